//! Dense f64 matrices and a small reverse-mode tape.
//!
//! The tape records one node per operation. Parameters are borrowed, never
//! copied, so building a graph over a large embedding table costs nothing
//! until its rows are gathered. After [`Tape::backward`] the gradient of
//! every parameter that took part in the graph is available by parameter
//! index.

use std::borrow::Cow;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "shape does not match data length");
        Mat { rows, cols, data }
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        Mat::from_vec(1, data.len(), data)
    }

    pub fn column(data: Vec<f64>) -> Self {
        Mat::from_vec(data.len(), 1, data)
    }

    pub fn scalar(v: f64) -> Self {
        Mat::from_vec(1, 1, vec![v])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn add_assign(&mut self, other: &Mat) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `a (n×k) · b (k×m)`.
pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.rows, "matmul shape mismatch");
    let mut out = Mat::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &av) in a.row(i).iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(b.row(k)) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `a (n×k) · bᵀ` where `b` is `m×k`.
fn matmul_bt(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.cols);
    let mut out = Mat::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let ar = a.row(i);
        for j in 0..b.rows {
            out.data[i * b.rows + j] = dot(ar, b.row(j));
        }
    }
    out
}

/// `aᵀ · b` where `a` is `n×k` and `b` is `n×m`.
fn matmul_at(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.rows, b.rows);
    let mut out = Mat::zeros(a.cols, b.cols);
    for r in 0..a.rows {
        let br = b.row(r);
        for (k, &av) in a.row(r).iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out.data[k * b.cols..(k + 1) * b.cols];
            for (o, &bv) in orow.iter_mut().zip(br) {
                *o += av * bv;
            }
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Softmax of `xs`, written into a new vector.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Const,
    Param(usize),
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Tanh(Var),
    Concat(Vec<Var>),
    Gather(Var, Vec<Option<usize>>),
    RowDot(Var, Var),
    SpanAttend {
        x: Var,
        logits: Var,
        ranges: Vec<(usize, usize)>,
    },
    LocalAttention {
        q: Var,
        k: Var,
        v: Var,
        /// inclusive key range per query row
        windows: Vec<(usize, usize)>,
        scale: f64,
    },
    Scatter {
        src: Var,
        positions: Vec<(usize, usize)>,
    },
    MarginalNll {
        scores: Var,
        valid: Vec<bool>,
        gold: Vec<bool>,
    },
    Bce {
        logits: Var,
        targets: Vec<f64>,
        mask: Vec<bool>,
    },
    Sum(Vec<Var>),
}

struct TapeNode<'a> {
    value: Cow<'a, Mat>,
    op: Op,
}

/// Gradients of the parameters, indexed like the parameter list given to
/// the tape. `None` means the parameter did not take part in the graph.
pub type ParamGrads = Vec<Option<Mat>>;

pub struct Tape<'a> {
    nodes: Vec<TapeNode<'a>>,
    num_params: usize,
}

impl<'a> Tape<'a> {
    pub fn new(num_params: usize) -> Self {
        Tape {
            nodes: Vec::new(),
            num_params,
        }
    }

    fn push(&mut self, value: Cow<'a, Mat>, op: Op) -> Var {
        self.nodes.push(TapeNode { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, m: Mat) -> Var {
        self.push(Cow::Owned(m), Op::Const)
    }

    pub fn param(&mut self, index: usize, m: &'a Mat) -> Var {
        assert!(index < self.num_params);
        self.push(Cow::Borrowed(m), Op::Param(index))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = matmul(self.value(a), self.value(b));
        self.push(Cow::Owned(v), Op::MatMul(a, b))
    }

    /// `a (n×m)` plus the row vector `b (1×m)` on every row.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(bv.rows, 1);
        assert_eq!(av.cols, bv.cols);
        let mut out = av.clone();
        for r in 0..out.rows {
            for (o, x) in out.row_mut(r).iter_mut().zip(&bv.data) {
                *o += x;
            }
        }
        self.push(Cow::Owned(out), Op::AddRow(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(Cow::Owned(out), Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!((av.rows, av.cols), (bv.rows, bv.cols));
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| x * y).collect();
        let out = Mat::from_vec(av.rows, av.cols, data);
        self.push(Cow::Owned(out), Op::Mul(a, b))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let out = Mat::from_vec(av.rows, av.cols, av.data.iter().map(|x| x.tanh()).collect());
        self.push(Cow::Owned(out), Op::Tanh(a))
    }

    /// Column-wise concatenation; all parts must have the same row count.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Mat::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let pv = self.value(p);
                assert_eq!(pv.rows, rows, "concat row mismatch");
                out.data[r * cols + off..r * cols + off + pv.cols].copy_from_slice(pv.row(r));
                off += pv.cols;
            }
        }
        self.push(Cow::Owned(out), Op::Concat(parts.to_vec()))
    }

    /// Rows of `a` selected by `index`; `None` yields a zero row.
    pub fn gather(&mut self, a: Var, index: Vec<Option<usize>>) -> Var {
        let av = self.value(a);
        let mut out = Mat::zeros(index.len(), av.cols);
        for (r, ix) in index.iter().enumerate() {
            if let Some(i) = ix {
                out.row_mut(r).copy_from_slice(av.row(*i));
            }
        }
        self.push(Cow::Owned(out), Op::Gather(a, index))
    }

    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Var {
        self.gather(a, index.iter().map(|&i| Some(i)).collect())
    }

    /// Row-wise dot product of two equally shaped matrices (n×1 result).
    pub fn row_dot(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!((av.rows, av.cols), (bv.rows, bv.cols));
        let out = Mat::column((0..av.rows).map(|r| dot(av.row(r), bv.row(r))).collect());
        self.push(Cow::Owned(out), Op::RowDot(a, b))
    }

    /// For every inclusive row range of `x`, the softmax(`logits`)-weighted
    /// sum of its rows.
    pub fn span_attend(&mut self, x: Var, logits: Var, ranges: Vec<(usize, usize)>) -> Var {
        let (xv, lv) = (self.value(x), self.value(logits));
        assert_eq!(lv.cols, 1);
        let mut out = Mat::zeros(ranges.len(), xv.cols);
        for (r, &(s, e)) in ranges.iter().enumerate() {
            let alpha = softmax(&lv.data[s..=e]);
            let orow = out.row_mut(r);
            for (t, a) in (s..=e).zip(alpha) {
                for (o, xv) in orow.iter_mut().zip(xv.row(t)) {
                    *o += a * xv;
                }
            }
        }
        self.push(Cow::Owned(out), Op::SpanAttend { x, logits, ranges })
    }

    /// Scaled dot-product attention where query row `i` sees key rows
    /// `windows[i].0 ..= windows[i].1`.
    pub fn local_attention(&mut self, q: Var, k: Var, v: Var, windows: Vec<(usize, usize)>) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let scale = 1.0 / (qv.cols as f64).sqrt();
        let mut out = Mat::zeros(qv.rows, vv.cols);
        for (i, &(lo, hi)) in windows.iter().enumerate() {
            let scores: Vec<f64> = (lo..=hi).map(|j| dot(qv.row(i), kv.row(j)) * scale).collect();
            let alpha = softmax(&scores);
            let orow = out.row_mut(i);
            for (j, a) in (lo..=hi).zip(alpha) {
                for (o, x) in orow.iter_mut().zip(vv.row(j)) {
                    *o += a * x;
                }
            }
        }
        self.push(
            Cow::Owned(out),
            Op::LocalAttention {
                q,
                k,
                v,
                windows,
                scale,
            },
        )
    }

    /// A `rows×cols` zero matrix with `src[i]` (an n×1 column) placed at
    /// `positions[i]`.
    pub fn scatter(&mut self, src: Var, rows: usize, cols: usize, positions: Vec<(usize, usize)>) -> Var {
        let sv = self.value(src);
        assert_eq!(sv.cols, 1);
        assert_eq!(sv.rows, positions.len());
        let mut out = Mat::zeros(rows, cols);
        for (i, &(r, c)) in positions.iter().enumerate() {
            out.data[r * cols + c] += sv.data[i];
        }
        self.push(Cow::Owned(out), Op::Scatter { src, positions })
    }

    /// `Σ_rows [logsumexp(valid) − logsumexp(valid ∧ gold)]`, a 1×1 result.
    pub fn marginal_nll(&mut self, scores: Var, valid: Vec<bool>, gold: Vec<bool>) -> Var {
        let sv = self.value(scores);
        assert_eq!(valid.len(), sv.len());
        assert_eq!(gold.len(), sv.len());
        let mut total = 0.0;
        for r in 0..sv.rows {
            let row = sv.row(r);
            let base = r * sv.cols;
            let all = (0..sv.cols).filter(|&c| valid[base + c]).map(|c| row[c]);
            let good = (0..sv.cols)
                .filter(|&c| valid[base + c] && gold[base + c])
                .map(|c| row[c]);
            total += log_sum_exp(all) - log_sum_exp(good);
        }
        self.push(Cow::Owned(Mat::scalar(total)), Op::MarginalNll { scores, valid, gold })
    }

    /// Summed binary cross-entropy with logits over the masked entries.
    pub fn bce(&mut self, logits: Var, targets: Vec<f64>, mask: Vec<bool>) -> Var {
        let lv = self.value(logits);
        assert_eq!(targets.len(), lv.len());
        assert_eq!(mask.len(), lv.len());
        let total: f64 = lv
            .data
            .iter()
            .zip(&targets)
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|((&x, &y), _)| y * softplus(-x) + (1.0 - y) * softplus(x))
            .sum();
        self.push(Cow::Owned(Mat::scalar(total)), Op::Bce { logits, targets, mask })
    }

    /// Sum of 1×1 values.
    pub fn sum(&mut self, parts: &[Var]) -> Var {
        let total = parts.iter().map(|&p| self.value(p).data[0]).sum();
        self.push(Cow::Owned(Mat::scalar(total)), Op::Sum(parts.to_vec()))
    }

    /// Gradients of the 1×1 node `output` with respect to every parameter.
    pub fn backward(&self, output: Var) -> ParamGrads {
        assert_eq!(self.value(output).len(), 1, "backward needs a scalar output");
        let mut grads: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        let mut params: ParamGrads = vec![None; self.num_params];
        grads[output.0] = Some(Mat::scalar(1.0));

        fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Const => {}
                Op::Param(p) => match &mut params[*p] {
                    Some(existing) => existing.add_assign(&g),
                    slot => *slot = Some(g),
                },
                Op::MatMul(a, b) => {
                    let ga = matmul_bt(&g, self.value(*b));
                    let gb = matmul_at(self.value(*a), &g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::AddRow(a, b) => {
                    let mut gb = Mat::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (o, x) in gb.data.iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *a, g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga = g.data.iter().zip(&bv.data).map(|(x, y)| x * y).collect();
                    let gb = g.data.iter().zip(&av.data).map(|(x, y)| x * y).collect();
                    acc(&mut grads, *a, Mat::from_vec(g.rows, g.cols, ga));
                    acc(&mut grads, *b, Mat::from_vec(g.rows, g.cols, gb));
                }
                Op::Tanh(a) => {
                    let out = &node.value;
                    let ga = g.data.iter().zip(&out.data).map(|(x, y)| x * (1.0 - y * y)).collect();
                    acc(&mut grads, *a, Mat::from_vec(g.rows, g.cols, ga));
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let cols = self.value(p).cols;
                        let mut gp = Mat::zeros(g.rows, cols);
                        for r in 0..g.rows {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[off..off + cols]);
                        }
                        off += cols;
                        acc(&mut grads, p, gp);
                    }
                }
                Op::Gather(a, index) => {
                    let av = self.value(*a);
                    let mut ga = Mat::zeros(av.rows, av.cols);
                    for (r, ix) in index.iter().enumerate() {
                        if let Some(i) = ix {
                            for (o, x) in ga.row_mut(*i).iter_mut().zip(g.row(r)) {
                                *o += x;
                            }
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::RowDot(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let mut ga = Mat::zeros(av.rows, av.cols);
                    let mut gb = Mat::zeros(bv.rows, bv.cols);
                    for r in 0..av.rows {
                        let s = g.data[r];
                        for c in 0..av.cols {
                            ga.data[r * av.cols + c] = s * bv.get(r, c);
                            gb.data[r * av.cols + c] = s * av.get(r, c);
                        }
                    }
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::SpanAttend { x, logits, ranges } => {
                    let (xv, lv) = (self.value(*x), self.value(*logits));
                    let mut gx = Mat::zeros(xv.rows, xv.cols);
                    let mut gl = Mat::zeros(lv.rows, 1);
                    for (r, &(s, e)) in ranges.iter().enumerate() {
                        let alpha = softmax(&lv.data[s..=e]);
                        let gr = g.row(r);
                        let dalpha: Vec<f64> = (s..=e).map(|t| dot(gr, xv.row(t))).collect();
                        let mean: f64 = alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
                        for (k, t) in (s..=e).enumerate() {
                            for (o, x) in gx.row_mut(t).iter_mut().zip(gr) {
                                *o += alpha[k] * x;
                            }
                            gl.data[t] += alpha[k] * (dalpha[k] - mean);
                        }
                    }
                    acc(&mut grads, *x, gx);
                    acc(&mut grads, *logits, gl);
                }
                Op::LocalAttention {
                    q,
                    k,
                    v,
                    windows,
                    scale,
                } => {
                    let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let mut gq = Mat::zeros(qv.rows, qv.cols);
                    let mut gk = Mat::zeros(kv.rows, kv.cols);
                    let mut gv = Mat::zeros(vv.rows, vv.cols);
                    for (i, &(lo, hi)) in windows.iter().enumerate() {
                        let scores: Vec<f64> = (lo..=hi).map(|j| dot(qv.row(i), kv.row(j)) * scale).collect();
                        let alpha = softmax(&scores);
                        let gi = g.row(i);
                        let dalpha: Vec<f64> = (lo..=hi).map(|j| dot(gi, vv.row(j))).collect();
                        let mean: f64 = alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
                        for (n, j) in (lo..=hi).enumerate() {
                            for (o, x) in gv.row_mut(j).iter_mut().zip(gi) {
                                *o += alpha[n] * x;
                            }
                            let ds = alpha[n] * (dalpha[n] - mean) * scale;
                            if ds == 0.0 {
                                continue;
                            }
                            for c in 0..qv.cols {
                                gq.data[i * qv.cols + c] += ds * kv.get(j, c);
                                gk.data[j * kv.cols + c] += ds * qv.get(i, c);
                            }
                        }
                    }
                    acc(&mut grads, *q, gq);
                    acc(&mut grads, *k, gk);
                    acc(&mut grads, *v, gv);
                }
                Op::Scatter { src, positions } => {
                    let gs = positions.iter().map(|&(r, c)| g.get(r, c)).collect();
                    acc(&mut grads, *src, Mat::column(gs));
                }
                Op::MarginalNll { scores, valid, gold } => {
                    let sv = self.value(*scores);
                    let s = g.data[0];
                    let mut gs = Mat::zeros(sv.rows, sv.cols);
                    for r in 0..sv.rows {
                        let base = r * sv.cols;
                        let row = sv.row(r);
                        let all: Vec<usize> = (0..sv.cols).filter(|&c| valid[base + c]).collect();
                        let good: Vec<usize> = all.iter().copied().filter(|&c| gold[base + c]).collect();
                        let p_all = softmax(&all.iter().map(|&c| row[c]).collect::<Vec<_>>());
                        let p_good = softmax(&good.iter().map(|&c| row[c]).collect::<Vec<_>>());
                        for (&c, p) in all.iter().zip(p_all) {
                            gs.data[base + c] += s * p;
                        }
                        for (&c, p) in good.iter().zip(p_good) {
                            gs.data[base + c] -= s * p;
                        }
                    }
                    acc(&mut grads, *scores, gs);
                }
                Op::Bce { logits, targets, mask } => {
                    let lv = self.value(*logits);
                    let s = g.data[0];
                    let data = lv
                        .data
                        .iter()
                        .zip(targets)
                        .zip(mask)
                        .map(|((&x, &y), &m)| if m { s * (sigmoid(x) - y) } else { 0.0 })
                        .collect();
                    acc(&mut grads, *logits, Mat::from_vec(lv.rows, lv.cols, data));
                }
                Op::Sum(parts) => {
                    for &p in parts {
                        acc(&mut grads, p, g.clone());
                    }
                }
            }
        }
        params
    }
}
