//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line with the
//! measured values; the test fails if any criterion does.
//!
//! Reference values come from independent oracles written here: brute-force
//! permutation search over exact rationals for CEAF, hand counts for the
//! statistics fixture, and per-window gold clusters for overlap merging.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use corefkit::conllu::{parse_corpus, write_corpus};
use corefkit::decode::{merge_overlapping_clusters, plan_overlap, predict_document, ClusterSet, DecodeOptions, OverlapMode};
use corefkit::fixtures::{gradcheck_conllu, gradcheck_document};
use corefkit::metrics::{
    b_cubed, ceaf, ceaf_similarities, cross_block_link_recall, max_weight_assignment, muc, primary_score,
    CeafSimilarity, MatchMode, ScoringOptions,
};
use corefkit::scorer::{enumerate_candidates, EncoderConfig, Vocab};
use corefkit::segment::segment_document;
use corefkit::stats::compute_stats;
use corefkit::synth::{generate, SynthSpec};
use corefkit::training::{
    evaluate, finite_difference_check, initial_model, train, Corpus, GradCheckOptions, TrainConfig, TrainData,
};
use corefkit::{Document, Mention, Model, ModelConfig, SingletonMode, Span2HeadMode};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Suite {
    failed: Vec<&'static str>,
}

impl Suite {
    fn run(&mut self, name: &'static str, budget: Duration, f: impl FnOnce() -> Check) {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = t.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > budget => Err(format!("{d}; over time budget {budget:?}")),
            o => o,
        };
        // Written to the raw stream so the lines show without --nocapture.
        let line = match outcome {
            Ok(detail) => format!("PASS  {name}  [{detail}] ({:.2}s)", elapsed.as_secs_f64()),
            Err(detail) => {
                self.failed.push(name);
                format!("FAIL  {name}  [{detail}] ({:.2}s)", elapsed.as_secs_f64())
            }
        };
        let _ = writeln!(std::io::stderr(), "{line}");
    }
}

#[test]
fn acceptance() {
    let mut s = Suite { failed: Vec::new() };
    s.run("metric oracle fixture", Duration::from_secs(1), metric_fixture);
    s.run("ceaf assignment equals permutation search", Duration::from_secs(10), ceaf_brute_force);
    s.run("identity and empty system", Duration::from_secs(60), identity_and_empty);
    s.run("gradient check over all mode combinations", Duration::from_secs(300), gradcheck_all);
    s.run("learning check on synthetic corpus", Duration::from_secs(900), learning_check);
    s.run("overlap plan worked example", Duration::from_secs(1), overlap_worked_example);
    s.run("cross-segment recall monotonicity", Duration::from_secs(60), cross_segment_monotonicity);
    s.run("round-trip fixed point", Duration::from_secs(10), round_trip);
    s.run("heads-only candidates bounded by tokens", Duration::from_secs(10), heads_only_candidates);
    s.run("statistics hand counts", Duration::from_secs(1), stats_hand_counts);
    assert!(s.failed.is_empty(), "failed: {:?}", s.failed);
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn metric_fixture() -> Check {
    let gold = vec![vec!['a', 'b', 'c'], vec!['d', 'e']];
    let sys = vec![vec!['a', 'b'], vec!['c', 'd', 'e']];
    let got = [
        muc(&gold, &sys).f1,
        b_cubed(&gold, &sys).f1,
        ceaf(&gold, &sys, CeafSimilarity::MentionCount).f1,
        ceaf(&gold, &sys, CeafSimilarity::EntityF1).f1,
    ];
    let want = [2.0 / 3.0, 11.0 / 15.0, 0.8, 0.8];
    for (name, (g, w)) in ["MUC", "B3", "CEAF-m", "CEAF-e"].iter().zip(got.iter().zip(want)) {
        ensure(close(*g, w), || format!("{name} F1 {g} != {w}"))?;
    }
    Ok(format!("F1 MUC {:.6} B3 {:.6} CEAF-m {:.6} CEAF-e {:.6}", got[0], got[1], got[2], got[3]))
}

type Q = Ratio<i64>;

fn exact_similarity(g: &[u32], s: &[u32], sim: CeafSimilarity) -> Q {
    let common = g.iter().filter(|x| s.contains(x)).count() as i64;
    match sim {
        CeafSimilarity::MentionCount => Q::from_integer(common),
        CeafSimilarity::EntityF1 => Q::new(2 * common, (g.len() + s.len()) as i64),
    }
}

/// Best total similarity over all one-to-one alignments, by enumerating
/// every permutation of the larger side.
fn brute_force_best(gold: &[Vec<u32>], sys: &[Vec<u32>], sim: CeafSimilarity) -> Q {
    let n = gold.len().max(sys.len());
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = Q::from_integer(0);
    loop {
        let mut total = Q::from_integer(0);
        for (i, &j) in perm.iter().enumerate() {
            if i < gold.len() && j < sys.len() {
                total += exact_similarity(&gold[i], &sys[j], sim);
            }
        }
        best = best.max(total);
        if !next_permutation(&mut perm) {
            return best;
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn random_partition(rng: &mut ChaCha8Rng, universe: &[u32], max_entities: usize) -> Vec<Vec<u32>> {
    let k = rng.random_range(1..=max_entities);
    let mut out = vec![Vec::new(); k];
    for &m in universe {
        // Some mentions are missing from this side.
        if rng.random_bool(0.8) {
            out[rng.random_range(0..k)].push(m);
        }
    }
    out.retain(|e| !e.is_empty());
    out
}

fn ceaf_brute_force() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut compared = 0;
    for case in 0..200 {
        let universe: Vec<u32> = (0..rng.random_range(1..=12)).collect();
        let gold = random_partition(&mut rng, &universe, 6);
        let sys = random_partition(&mut rng, &universe, 6);
        for sim in [CeafSimilarity::MentionCount, CeafSimilarity::EntityF1] {
            let best = brute_force_best(&gold, &sys, sim);
            let assignment = if gold.is_empty() || sys.is_empty() {
                vec![None; gold.len()]
            } else {
                max_weight_assignment(&ceaf_similarities(&gold, &sys, sim))
            };
            let mut used = HashSet::new();
            let mut total = Q::from_integer(0);
            for (i, j) in assignment.iter().enumerate() {
                if let Some(j) = *j {
                    ensure(used.insert(j), || format!("case {case}: column {j} assigned twice"))?;
                    total += exact_similarity(&gold[i], &sys[j], sim);
                }
            }
            ensure(total == best, || format!("case {case} {sim:?}: assignment {total} vs optimum {best}"))?;
            // The reported F1 is the one implied by the exact optimum.
            let self_sim = |side: &[Vec<u32>]| {
                side.iter().map(|e| exact_similarity(e, e, sim)).fold(Q::from_integer(0), |a, b| a + b)
            };
            let (gs, ss) = (self_sim(&gold), self_sim(&sys));
            let f1 = if best == Q::from_integer(0) {
                0.0
            } else {
                let r = best / gs;
                let p = best / ss;
                let f = Q::from_integer(2) * p * r / (p + r);
                *f.numer() as f64 / *f.denom() as f64
            };
            let got = ceaf(&gold, &sys, sim).f1;
            ensure((got - f1).abs() < 1e-12, || format!("case {case} {sim:?}: F1 {got} vs {f1}"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} alignments equal the exhaustive optimum"))
}

fn identity_and_empty() -> Check {
    let mut docs = generate(&SynthSpec {
        documents: 10,
        singleton_rate: 0.3,
        ..SynthSpec::default()
    })
    .map_err(|e| e.to_string())?;
    docs.push(gradcheck_document());
    let empty: Vec<Document> = docs
        .iter()
        .map(|d| Document {
            entities: Vec::new(),
            ..d.clone()
        })
        .collect();
    let mut lines = Vec::new();
    for (mode, keep) in [(MatchMode::Head, false), (MatchMode::Head, true), (MatchMode::Exact, true)] {
        let opts = ScoringOptions {
            match_mode: mode,
            keep_singletons: keep,
            ..ScoringOptions::default()
        };
        let same = primary_score(&docs, &docs, &opts).map_err(|e| e.to_string())?;
        let none = primary_score(&docs, &empty, &opts).map_err(|e| e.to_string())?;
        for (label, r, want) in [("identity", &same, 1.0), ("empty", &none, 0.0)] {
            let all = [r.muc, r.b3, r.ceaf_m, r.ceaf_e];
            let values: Vec<f64> = all
                .iter()
                .flat_map(|p| [p.precision, p.recall, p.f1])
                .chain([r.primary])
                .collect();
            ensure(values.iter().all(|&v| v == want), || {
                format!("{label} {mode:?} keep={keep}: {values:?}")
            })?;
        }
        lines.push(format!("{mode:?}/keep={keep}"));
    }
    Ok(format!("exact 1.0 and 0.0 under {}", lines.join(", ")))
}

fn gradcheck_config() -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig {
            vocab_size: 2,
            embedding_dim: 4,
            context_window: 4,
            segment_length: 8,
        },
        hidden_dim: 5,
        width_dim: 3,
        distance_dim: 3,
        max_span_width: 4,
        mention_ratio: 1.0,
        ..ModelConfig::default()
    }
}

fn gradcheck_all() -> Check {
    let doc = gradcheck_document();
    let mut worst: f64 = 0.0;
    let mut combos = 0;
    for heads_only in [false, true] {
        for span2head in [Span2HeadMode::Off, Span2HeadMode::Multiclass, Span2HeadMode::Binary] {
            for (k, mode) in SingletonMode::ALL.into_iter().enumerate() {
                let cfg = ModelConfig {
                    heads_only,
                    span2head,
                    singleton_mode: mode,
                    ..gradcheck_config()
                };
                let model = Model::new(cfg, Vocab::build([&doc]), 10 + k as u64).map_err(|e| e.to_string())?;
                let ex = model.example(doc.clone(), true, true);
                let r = finite_difference_check(&model.config, &model.params, &ex, &GradCheckOptions::default(), |_, _| {})
                    .map_err(|e| e.to_string())?;
                ensure(r.max_rel_error < 1e-4, || {
                    format!("heads_only={heads_only} span2head={span2head:?} {mode}: {:.3e}", r.max_rel_error)
                })?;
                worst = worst.max(r.max_rel_error);
                combos += 1;
            }
        }
    }
    Ok(format!("{combos} combinations, max relative error {worst:.2e}"))
}

fn learning_config(mode: SingletonMode) -> TrainConfig {
    TrainConfig {
        model: ModelConfig {
            encoder: EncoderConfig {
                embedding_dim: 32,
                context_window: 16,
                segment_length: 128,
                vocab_size: 0,
            },
            hidden_dim: 32,
            width_dim: 8,
            distance_dim: 8,
            max_span_width: 4,
            heads_only: true,
            singleton_mode: mode,
            mention_ratio: 0.4,
            ..ModelConfig::default()
        },
        steps: 5000,
        learning_rate: 0.005,
        eval_every: 250,
        seed: 0,
        ..TrainConfig::default()
    }
}

/// Precision, recall and F1 of emitted singleton mentions against gold
/// singletons, matched by head.
fn singleton_f1(gold: &[Document], pred: &[Document]) -> (f64, f64, f64) {
    let heads = |d: &Document| -> HashSet<_> {
        d.entities
            .iter()
            .filter(|e| e.is_singleton())
            .map(|e| e.mentions[0].head)
            .collect()
    };
    let (mut tp, mut np, mut ng) = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        let (gs, ps) = (heads(g), heads(p));
        tp += gs.intersection(&ps).count();
        np += ps.len();
        ng += gs.len();
    }
    let p = tp as f64 / np.max(1) as f64;
    let r = tp as f64 / ng.max(1) as f64;
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

fn learning_check() -> Check {
    let corpus = |seed, singleton_rate, documents| {
        generate(&SynthSpec {
            documents,
            seed,
            singleton_rate,
            ..SynthSpec::default()
        })
        .unwrap()
    };

    let cfg = learning_config(SingletonMode::Off);
    let corpora = vec![Corpus::new("synth", corpus(0, 0.0, 200))];
    let dev = corpus(1, 0.0, 40);
    let mut model = initial_model(&cfg, &corpora).map_err(|e| e.to_string())?;
    let mut reached = None;
    train(&mut model, &TrainData { corpora: &corpora, dev: &dev }, &cfg, |r| {
        if reached.is_none() && r.dev.is_some_and(|d| d >= 0.90) {
            reached = Some((r.step, r.dev.unwrap()));
        }
    })
    .map_err(|e| e.to_string())?;
    let final_dev = evaluate(&model, &dev, cfg.max_segments()).map_err(|e| e.to_string())?;
    let (step, score) = reached.ok_or_else(|| format!("never reached 0.90; final {final_dev:.3}"))?;

    let cfg = learning_config(SingletonMode::Mentions);
    let corpora = vec![Corpus::new("synth", corpus(0, 0.5, 200))];
    let dev = corpus(1, 0.5, 40);
    let mut model = initial_model(&cfg, &corpora).map_err(|e| e.to_string())?;
    train(&mut model, &TrainData { corpora: &corpora, dev: &dev }, &cfg, |_| {}).map_err(|e| e.to_string())?;
    let opts = DecodeOptions {
        max_segments: Some(cfg.max_segments()),
        ..DecodeOptions::default()
    };
    let pred: Vec<Document> = dev
        .iter()
        .map(|d| predict_document(&model, d, &opts))
        .collect::<corefkit::Result<_>>()
        .map_err(|e| e.to_string())?;
    let (p, r, f) = singleton_f1(&dev, &pred);
    ensure(f >= 0.85, || format!("singleton mention F1 {f:.3} (P {p:.3} R {r:.3})"))?;
    Ok(format!(
        "primary {score:.3} at step {step}, final {final_dev:.3}; singleton mention F1 {f:.3} (P {p:.3} R {r:.3})"
    ))
}

fn overlap_worked_example() -> Check {
    let plan = plan_overlap(6, 4, OverlapMode::Max).map_err(|e| e.to_string())?;
    ensure(plan.windows == vec![(0, 3), (1, 4), (2, 5)], || format!("{:?}", plan.windows))?;
    Ok(format!("{} examples {:?}", plan.windows.len(), plan.windows))
}

/// Gold clusters visible inside one window: entities with at least two
/// mentions there, as a perfect within-window resolver would emit.
fn oracle_window(window: &Document, k: usize) -> ClusterSet {
    let clusters: Vec<Vec<Mention>> = window
        .entities
        .iter()
        .filter(|e| e.mentions.len() >= 2)
        .map(|e| e.mentions.clone())
        .collect();
    let provenance = clusters.iter().flatten().map(|m| (m.clone(), k)).collect();
    ClusterSet { clusters, provenance }
}

fn oracle_decode(doc: &Document, segment_length: usize, max_segments: usize, mode: OverlapMode) -> Document {
    let segs = segment_document(doc, segment_length);
    let plan = plan_overlap(segs.len(), max_segments, mode).unwrap();
    let sets: Vec<ClusterSet> = plan
        .windows
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| oracle_window(&doc.slice(segs[a].start..segs[b].end).unwrap(), k))
        .collect();
    let seg_of: HashMap<_, _> = segs
        .iter()
        .enumerate()
        .flat_map(|(s, r)| r.clone().map(move |i| (i, s)))
        .map(|(i, s)| (doc.nodes[i].id, s))
        .collect();
    let merged = merge_overlapping_clusters(&sets, &plan, |n| seg_of[&n]);
    Document {
        entities: merged.to_entities(),
        ..doc.clone()
    }
}

fn cross_segment_monotonicity() -> Check {
    let docs = generate(&SynthSpec {
        documents: 30,
        sentences_per_doc: 40,
        cross_segment_rate: 0.6,
        cross_segment_gap: 5,
        seed: 7,
        ..SynthSpec::default()
    })
    .map_err(|e| e.to_string())?;
    let (segment_length, n) = (24, 3);
    let mut recall = Vec::new();
    for mode in [OverlapMode::None, OverlapMode::Min, OverlapMode::Max] {
        let (mut hit, mut total) = (0, 0);
        for d in &docs {
            let sys = oracle_decode(d, segment_length, n, mode);
            let (h, t) = cross_block_link_recall(d, &sys, n, segment_length, MatchMode::Exact);
            hit += h;
            total += t;
        }
        ensure(total > 0, || "no links cross block boundaries".into())?;
        recall.push((mode, hit, total));
    }
    let r: Vec<f64> = recall.iter().map(|&(_, h, t)| h as f64 / t as f64).collect();
    ensure(recall[0].1 == 0, || format!("none recalled {} cross-block links", recall[0].1))?;
    ensure(r[2] >= r[1] && r[1] >= r[0], || format!("not monotone: {r:?}"))?;
    Ok(recall
        .iter()
        .map(|(m, h, t)| format!("{m} {h}/{t}"))
        .collect::<Vec<_>>()
        .join(", "))
}

fn row(id: &str, form: &str, head: &str, deprel: &str, deps: &str, misc: &str) -> String {
    [id, form, "_", "_", "_", "_", head, deprel, deps, misc].join("\t") + "\n"
}

/// Discontinuous, nested and zero mentions plus sentence metadata.
fn tricky_conllu() -> String {
    [
        "# newdoc id = tricky\n".to_string(),
        "# global.Entity = eid-etype-head\n".to_string(),
        "# sent_id = t1\n".to_string(),
        "# text = The old cat saw it\n".to_string(),
        row("1", "The", "3", "det", "_", "Entity=(e1[1/2]-person-2)"),
        row("2", "old", "3", "amod", "_", "_"),
        row("3", "cat", "4", "nsubj", "_", "Entity=(e1[2/2])"),
        row("4", "saw", "0", "root", "_", "_"),
        row("4.1", "_", "_", "_", "4:obj", "Entity=(e2-thing-1)"),
        row("5", "it", "4", "obj", "_", "Entity=(e2-thing-1)|SpaceAfter=No"),
        "\n".to_string(),
        "# sent_id = t2\n".to_string(),
        row("1", "the", "2", "det", "_", "Entity=(e3-thing-2(e4-thing-2"),
        row("2", "dog", "0", "root", "_", "_"),
        row("3", "'s", "2", "case", "_", "Entity=e4)"),
        row("4", "tail", "2", "nmod", "_", "Entity=e3)"),
        row("5", "cat", "2", "dep", "_", "Entity=(e1-person-1)"),
        "\n".to_string(),
    ]
    .concat()
}

fn round_trip() -> Check {
    let synth = generate(&SynthSpec {
        documents: 5,
        singleton_rate: 0.3,
        cross_segment_rate: 0.5,
        cross_segment_gap: 3,
        ..SynthSpec::default()
    })
    .map_err(|e| e.to_string())?;
    let fixtures = [
        ("gradcheck", gradcheck_conllu()),
        ("tricky", tricky_conllu()),
        ("synth", write_corpus(&synth)),
    ];
    let tricky = parse_corpus(&tricky_conllu()).map_err(|e| e.to_string())?;
    let ms: Vec<&Mention> = tricky[0].entities.iter().flat_map(|e| &e.mentions).collect();
    ensure(ms.iter().any(|m| m.has_gap(&tricky[0])), || "tricky fixture lost its gap".into())?;
    ensure(ms.iter().any(|m| m.is_zero()), || "tricky fixture lost its zero mention".into())?;
    for (name, text) in &fixtures {
        let first = parse_corpus(text).map_err(|e| format!("{name}: {e}"))?;
        let written = write_corpus(&first);
        let second = parse_corpus(&written).map_err(|e| format!("{name}: {e}"))?;
        ensure(first == second, || format!("{name}: parse(write(parse)) differs"))?;
        ensure(write_corpus(&second) == written, || format!("{name}: second write differs"))?;
    }
    Ok(format!("{} fixtures byte-identical on second write", fixtures.len()))
}

fn heads_only_candidates() -> Check {
    let mut docs = generate(&SynthSpec {
        documents: 20,
        sentences_per_doc: 30,
        ..SynthSpec::default()
    })
    .map_err(|e| e.to_string())?;
    docs.push(gradcheck_document());
    docs.extend(parse_corpus(&tricky_conllu()).map_err(|e| e.to_string())?);
    let heads = ModelConfig {
        heads_only: true,
        ..ModelConfig::default()
    };
    let spans = ModelConfig::default();
    let (mut most, mut span_total, mut head_total) = (0.0f64, 0, 0);
    for d in &docs {
        let t = d.nodes.len();
        let c = enumerate_candidates(d, &heads).len();
        ensure(c <= t, || format!("{}: {c} candidates for {t} tokens", d.doc_id))?;
        most = most.max(c as f64 / t as f64);
        head_total += c;
        span_total += enumerate_candidates(d, &spans).len();
    }
    Ok(format!(
        "{} documents, max candidates/T {most:.2}; {head_total} head vs {span_total} span candidates",
        docs.len()
    ))
}

/// Four sentences, 19 words, one empty node. Entities: e1 with a
/// two-word, a zero and a one-word mention; e2 with a non-tree two-word
/// mention and a one-word mention; e3 with a discontinuous non-tree
/// mention and a one-word mention; e4 a singleton.
fn stats_conllu() -> String {
    [
        "# newdoc id = stats\n".to_string(),
        "# sent_id = 1\n".to_string(),
        row("1", "The", "2", "det", "_", "Entity=(e1"),
        row("2", "cat", "3", "nsubj", "_", "Entity=e1)"),
        row("3", "sat", "0", "root", "_", "_"),
        row("3.1", "_", "_", "_", "3:obj", "Entity=(e1)"),
        row("4", "on", "6", "case", "_", "_"),
        row("5", "the", "6", "det", "_", "Entity=(e2"),
        row("6", "mat", "3", "obl", "_", "Entity=e2)"),
        row("7", ".", "3", "punct", "_", "_"),
        "\n".to_string(),
        "# sent_id = 2\n".to_string(),
        row("1", "It", "2", "nsubj", "_", "Entity=(e1)"),
        row("2", "slept", "0", "root", "_", "_"),
        row("3", "there", "2", "advmod", "_", "Entity=(e2)"),
        row("4", ".", "2", "punct", "_", "_"),
        "\n".to_string(),
        "# sent_id = 3\n".to_string(),
        row("1", "A", "3", "det", "_", "Entity=(e3[1/2])"),
        row("2", "big", "3", "amod", "_", "_"),
        row("3", "dog", "4", "nsubj", "_", "Entity=(e3[2/2])"),
        row("4", "barked", "0", "root", "_", "Entity=(e4)"),
        row("5", ".", "4", "punct", "_", "_"),
        "\n".to_string(),
        "# sent_id = 4\n".to_string(),
        row("1", "It", "2", "nsubj", "_", "Entity=(e3)"),
        row("2", "ran", "0", "root", "_", "_"),
        row("3", ".", "2", "punct", "_", "_"),
        "\n".to_string(),
    ]
    .concat()
}

fn stats_hand_counts() -> Check {
    let docs = parse_corpus(&stats_conllu()).map_err(|e| e.to_string())?;
    let r = compute_stats(&docs);
    let got = (r.docs, r.sentences, r.words, r.empty_nodes);
    ensure(got == (1, 4, 19, 1), || format!("dataset counts {got:?}"))?;
    ensure(r.entities == 4 && r.entity_len == [1, 2, 1, 0, 0], || {
        format!("entities {} lengths {:?}", r.entities, r.entity_len)
    })?;
    ensure(r.entity_len_max == 3 && close(r.entity_len_avg(), 2.0), || {
        format!("entity length max {} avg {}", r.entity_len_max, r.entity_len_avg())
    })?;
    ensure(close(r.entities_per_1k(), 4000.0 / 19.0), || format!("entities/1k {}", r.entities_per_1k()))?;
    ensure(r.mentions == 7 && r.mention_len == [1, 3, 3, 0, 0, 0], || {
        format!("mentions {} lengths {:?}", r.mentions, r.mention_len)
    })?;
    ensure(r.mention_len_max == 2 && close(r.mention_len_avg(), 9.0 / 7.0), || {
        format!("mention length max {} avg {}", r.mention_len_max, r.mention_len_avg())
    })?;
    let types = (r.with_empty, r.with_gap, r.non_tree);
    ensure(types == (1, 1, 2), || format!("w/empty, w/gap, non-tree {types:?}"))?;
    let pct = r.mention_type_pct();
    ensure(close(pct[2], 200.0 / 7.0) && close(r.mention_len_pct()[0], 100.0 / 7.0), || {
        format!("percentages {pct:?}")
    })?;
    Ok(format!(
        "19 words, 4 entities, 7 mentions, length-0 {:.1}%, non-tree {:.1}%",
        r.mention_len_pct()[0],
        pct[2]
    ))
}
