use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use corefkit::conllu::{parse_corpus, write_corpus};
use corefkit::decode::{predict_document, DecodeOptions, OverlapMode};
use corefkit::kv::KeyValues;
use corefkit::metrics::{primary_score, MatchMode, ScoringOptions};
use corefkit::model::{is_valid, validate_document, Document};
use corefkit::scorer::checkpoint;
use corefkit::stats::compute_stats;
use corefkit::synth::{generate, SynthSpec};
use corefkit::training::{
    finite_difference_check, initial_model, train, Corpus, GradCheckOptions, MixtureSpec, StepRecord, TrainConfig,
    TrainData,
};
use corefkit::{Model, ModelConfig};

#[derive(Parser)]
#[command(name = "corefkit", version, about = "Coreference resolution for CorefUD corpora")]
struct Cli {
    /// Worker threads for per-document work (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check structural invariants; exits 1 when errors are found.
    Validate { input: PathBuf },
    /// Dataset, entity and mention statistics.
    Stats {
        input: Vec<PathBuf>,
        /// Tab-separated output with raw counts.
        #[arg(long)]
        tsv: bool,
    },
    /// Parse and rewrite in canonical form.
    Convert { input: PathBuf, output: PathBuf },
    /// Train a model from a key-value configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Step log (default: <out>.log.tsv).
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Annotate a corpus with predicted entities.
    Predict {
        #[arg(long)]
        model: PathBuf,
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = "none")]
        overlap: OverlapMode,
        #[arg(long)]
        filter_seen: bool,
        /// Segments per example (default: the training default for the model).
        #[arg(long)]
        max_segments: Option<usize>,
    },
    /// Evaluate system against gold annotation.
    Score {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        system: PathBuf,
        #[arg(long = "match", default_value = "head")]
        match_mode: MatchMode,
        #[arg(long)]
        keep_singletons: bool,
        /// Remove singletons before collapsing mentions that share a head.
        #[arg(long)]
        remove_singletons_first: bool,
        #[arg(long)]
        tsv: bool,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        /// CoNLL-U fixture (default: built-in 18-word document).
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
    },
    /// Generate a synthetic corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        documents: usize,
        #[arg(long, default_value_t = 12)]
        sentences: usize,
        #[arg(long, default_value_t = 4)]
        entities: usize,
        #[arg(long, default_value_t = 0.0)]
        singleton_rate: f64,
        #[arg(long, default_value_t = 0.0)]
        cross_segment_rate: f64,
        /// Sentences between mentions of spread chains.
        #[arg(long, default_value_t = 0)]
        cross_segment_gap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COREFKIT_LOG", "warn")).init();
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn read_corpus(path: &Path) -> Result<Vec<Document>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_corpus(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_kv(path: &Path) -> Result<KeyValues> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(KeyValues::parse(&text)?)
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Validate { input } => {
            let docs = read_corpus(&input)?;
            let mut errors = 0;
            for d in &docs {
                let v = validate_document(d);
                for x in &v {
                    println!("{x}");
                }
                errors += usize::from(!is_valid(&v));
            }
            println!("{} documents, {} with errors", docs.len(), errors);
            Ok(if errors == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Stats { input, tsv } => {
            if input.is_empty() {
                bail!("no input files");
            }
            let mut docs = Vec::new();
            for p in &input {
                docs.extend(read_corpus(p)?);
            }
            let r = compute_stats(&docs);
            print!("{}", if tsv { r.to_tsv() } else { r.to_table() });
            Ok(ExitCode::SUCCESS)
        }
        Command::Convert { input, output } => {
            let docs = read_corpus(&input)?;
            write_text(&output, &write_corpus(&docs))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Train {
            config,
            out,
            log,
            seed,
            steps,
        } => cmd_train(&config, &out, log, seed, steps),
        Command::Predict {
            model,
            input,
            output,
            overlap,
            filter_seen,
            max_segments,
        } => {
            let model = checkpoint::load(&model).with_context(|| format!("loading {}", model.display()))?;
            let docs = read_corpus(&input)?;
            let opts = DecodeOptions {
                max_segments: Some(max_segments.unwrap_or(if model.config.heads_only { 8 } else { 6 })),
                overlap,
                filter_seen,
            };
            let pred = docs
                .par_iter()
                .map(|d| predict_document(&model, d, &opts))
                .collect::<corefkit::Result<Vec<_>>>()?;
            write_text(&output, &write_corpus(&pred))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Score {
            gold,
            system,
            match_mode,
            keep_singletons,
            remove_singletons_first,
            tsv,
        } => {
            let opts = ScoringOptions {
                match_mode,
                keep_singletons,
                remove_singletons_first,
            };
            let r = primary_score(&read_corpus(&gold)?, &read_corpus(&system)?, &opts)?;
            print!("{}", if tsv { r.to_tsv() } else { r.to_table() });
            Ok(ExitCode::SUCCESS)
        }
        Command::Gradcheck {
            config,
            fixture,
            seed,
            epsilon,
        } => {
            let cfg = ModelConfig::from_kv(&read_kv(&config)?)?;
            let doc = match fixture {
                Some(p) => read_corpus(&p)?
                    .into_iter()
                    .next()
                    .context("fixture has no document")?,
                None => corefkit::fixtures::gradcheck_document(),
            };
            let corpus = Corpus::new("fixture", vec![doc.clone()]);
            let vocab = corefkit::scorer::Vocab::build([&doc]);
            let model = Model::new(cfg, vocab, seed)?;
            let ex = model.example(doc, true, corpus.singletons_annotated);
            let opts = GradCheckOptions {
                epsilon,
                seed,
                ..GradCheckOptions::default()
            };
            let r = finite_difference_check(&model.config, &model.params, &ex, &opts, |_, _| {})?;
            println!("array\tchecked\tmax_rel_error\tdead");
            for a in &r.arrays {
                println!("{}\t{}\t{:.3e}\t{}", a.name, a.checked, a.max_rel_error, a.dead);
            }
            println!("max relative error {:.3e}", r.max_rel_error);
            Ok(if r.max_rel_error < 1e-4 { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Synth {
            out,
            documents,
            sentences,
            entities,
            singleton_rate,
            cross_segment_rate,
            cross_segment_gap,
            seed,
        } => {
            let spec = SynthSpec {
                documents,
                sentences_per_doc: sentences,
                entities_per_doc: entities,
                num_classes: SynthSpec::default().num_classes.max(entities),
                singleton_rate,
                cross_segment_rate,
                cross_segment_gap,
                seed,
                ..SynthSpec::default()
            };
            write_text(&out, &write_corpus(&generate(&spec)?))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Paths in a config file are relative to the file.
fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn cmd_train(config: &Path, out: &Path, log: Option<PathBuf>, seed: Option<u64>, steps: Option<usize>) -> Result<ExitCode> {
    let kv = read_kv(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let mut cfg = TrainConfig::from_kv(&kv)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(s) = steps {
        cfg.steps = s;
    }
    let mut mixture = MixtureSpec::from_kv(&kv)?;
    for (p, _) in &mut mixture.corpora {
        *p = resolve(base, p);
    }
    let corpora = mixture.load()?;
    let mut dev = Vec::new();
    for p in kv.get_all("dev") {
        dev.extend(read_corpus(&resolve(base, Path::new(p)))?);
    }
    let mut model = match kv.get("init_from") {
        Some(p) => {
            let m = checkpoint::load(&resolve(base, Path::new(p)))?;
            cfg.model = m.config.clone();
            m
        }
        None => initial_model(&cfg, &corpora)?,
    };
    let log_path = log.unwrap_or_else(|| {
        let mut s = out.as_os_str().to_owned();
        s.push(".log.tsv");
        PathBuf::from(s)
    });
    let mut log_file =
        fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
    writeln!(log_file, "{}", StepRecord::HEADER)?;
    let mut io_error = None;
    let records = train(&mut model, &TrainData { corpora: &corpora, dev: &dev }, &cfg, |r| {
        if let Err(e) = writeln!(log_file, "{}", r.to_tsv()) {
            io_error.get_or_insert(e);
        }
        if let Some(d) = r.dev {
            log::info!("step {} dev primary {:.4}", r.step, d);
        }
    })?;
    if let Some(e) = io_error {
        return Err(e).context("writing the step log");
    }
    checkpoint::save(&model, out).with_context(|| format!("writing {}", out.display()))?;
    if let Some(last) = records.last() {
        println!("trained {} steps, last loss {:.4}", last.step, last.loss);
    }
    Ok(ExitCode::SUCCESS)
}
