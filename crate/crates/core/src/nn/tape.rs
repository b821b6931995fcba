//! Reverse-mode differentiation over whole-matrix primitives.
//!
//! Every op appends a node holding its output value. `backward` walks the
//! nodes in reverse, accumulates gradients, and adds the gradients of
//! parameter leaves into the [`ParamStore`]. A tape supports exactly one
//! backward pass.

use serde::{Deserialize, Serialize};

use super::matrix::{matmul_nt_into, matmul_tn_into, Matrix};
use super::params::{ParamId, ParamStore};
use super::NnError;

/// Lower clamp applied to probabilities before the log in the loss.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregatorKind {
    Mean,
    Max,
    Sum,
    WeightedSum,
}

impl AggregatorKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(Self::Mean),
            "max" => Some(Self::Max),
            "sum" => Some(Self::Sum),
            "wsum" | "weighted_sum" => Some(Self::WeightedSum),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    ConcatCols(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    RowL2Normalize(Var),
    GatherRows(Var, Vec<usize>),
    ScaleRows(Var, Vec<f64>),
    Aggregate {
        input: Var,
        offsets: Vec<usize>,
        kind: AggregatorKind,
        weights: Vec<f64>,
        argmax: Vec<usize>,
    },
    Bce {
        probs: Var,
        labels: Vec<f64>,
    },
}

struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    spent: bool,
}

fn finite(m: Matrix, what: &str) -> Result<Matrix, NnError> {
    if m.is_finite() {
        Ok(m)
    } else {
        Err(NnError::NonFinite(what.to_owned()))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn live(&self) -> Result<(), NnError> {
        if self.spent {
            Err(NnError::TapeSpent)
        } else {
            Ok(())
        }
    }

    pub fn constant(&mut self, m: Matrix) -> Result<Var, NnError> {
        self.live()?;
        let m = finite(m, "constant")?;
        Ok(self.push(m, Op::Constant))
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var, NnError> {
        self.live()?;
        let m = finite(store.get(id).value.clone(), store.get(id).name.as_str())?;
        Ok(self.push(m, Op::Param(id)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.live()?;
        let out = finite(self.value(a).matmul(self.value(b))?, "matmul")?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.live()?;
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(NnError::Shape(format!("add {:?} and {:?}", x.shape(), y.shape())));
        }
        let mut out = x.clone();
        out.add_assign(y);
        let out = finite(out, "add")?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.live()?;
        let (x, y) = (self.value(a), self.value(b));
        if x.rows() != y.rows() {
            return Err(NnError::Shape(format!("concat {:?} and {:?}", x.shape(), y.shape())));
        }
        let mut out = Matrix::zeros(x.rows(), x.cols() + y.cols());
        for r in 0..x.rows() {
            let row = out.row_mut(r);
            row[..x.cols()].copy_from_slice(x.row(r));
            row[x.cols()..].copy_from_slice(y.row(r));
        }
        Ok(self.push(out, Op::ConcatCols(a, b)))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, NnError> {
        self.live()?;
        let mut out = self.value(a).clone();
        out.data_mut().iter_mut().for_each(|x| *x = x.max(0.0));
        Ok(self.push(out, Op::Relu(a)))
    }

    pub fn activate(&mut self, a: Var, act: Activation) -> Result<Var, NnError> {
        match act {
            Activation::Relu => self.relu(a),
            Activation::Identity => Ok(a),
        }
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, NnError> {
        self.live()?;
        let mut out = self.value(a).clone();
        out.data_mut().iter_mut().for_each(|x| *x = sigmoid(*x));
        Ok(self.push(out, Op::Sigmoid(a)))
    }

    /// Scales each row to unit L2 norm; all-zero rows pass through unchanged.
    pub fn row_l2_normalize(&mut self, a: Var) -> Result<Var, NnError> {
        self.live()?;
        let mut out = self.value(a).clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|x| *x /= norm);
            }
        }
        Ok(self.push(out, Op::RowL2Normalize(a)))
    }

    pub fn gather_rows(&mut self, a: Var, idx: Vec<usize>) -> Result<Var, NnError> {
        self.live()?;
        let x = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= x.rows()) {
            return Err(NnError::Shape(format!("row {bad} out of {}", x.rows())));
        }
        let out = x.gather_rows(&idx);
        Ok(self.push(out, Op::GatherRows(a, idx)))
    }

    /// Multiplies row `i` by the constant `factors[i]`.
    pub fn scale_rows(&mut self, a: Var, factors: Vec<f64>) -> Result<Var, NnError> {
        self.live()?;
        let mut out = self.value(a).clone();
        if factors.len() != out.rows() {
            return Err(NnError::Shape(format!("{} factors for {} rows", factors.len(), out.rows())));
        }
        for (r, &f) in factors.iter().enumerate() {
            out.row_mut(r).iter_mut().for_each(|x| *x *= f);
        }
        let out = finite(out, "scale_rows")?;
        Ok(self.push(out, Op::ScaleRows(a, factors)))
    }

    /// Reduces consecutive row segments to one row each.
    ///
    /// Segment `s` covers rows `offsets[s]..offsets[s + 1]`. `weights` has
    /// one entry per input row and is read only by `WeightedSum`, where each
    /// segment's weights must sum to one.
    pub fn aggregate(
        &mut self,
        a: Var,
        offsets: Vec<usize>,
        kind: AggregatorKind,
        weights: Vec<f64>,
    ) -> Result<Var, NnError> {
        self.live()?;
        let x = self.value(a);
        if offsets.len() < 2 || offsets[0] != 0 || *offsets.last().unwrap() != x.rows() {
            return Err(NnError::Shape("segment offsets do not cover the input".into()));
        }
        if offsets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(NnError::EmptyAggregate);
        }
        if kind == AggregatorKind::WeightedSum {
            if weights.len() != x.rows() {
                return Err(NnError::Weights(format!("{} weights for {} rows", weights.len(), x.rows())));
            }
            for w in offsets.windows(2) {
                let s: f64 = weights[w[0]..w[1]].iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(NnError::Weights(format!("segment weights sum to {s}")));
                }
            }
        }
        let segs = offsets.len() - 1;
        let cols = x.cols();
        let mut out = Matrix::zeros(segs, cols);
        let mut argmax = Vec::new();
        if kind == AggregatorKind::Max {
            argmax = vec![0; segs * cols];
        }
        for s in 0..segs {
            let (lo, hi) = (offsets[s], offsets[s + 1]);
            let orow = out.row_mut(s);
            match kind {
                AggregatorKind::Mean | AggregatorKind::Sum => {
                    for r in lo..hi {
                        for (o, v) in orow.iter_mut().zip(x.row(r)) {
                            *o += v;
                        }
                    }
                    if kind == AggregatorKind::Mean {
                        let n = (hi - lo) as f64;
                        orow.iter_mut().for_each(|o| *o /= n);
                    }
                }
                AggregatorKind::WeightedSum => {
                    for r in lo..hi {
                        let w = weights[r];
                        for (o, v) in orow.iter_mut().zip(x.row(r)) {
                            *o += w * v;
                        }
                    }
                }
                AggregatorKind::Max => {
                    orow.copy_from_slice(x.row(lo));
                    let am = &mut argmax[s * cols..(s + 1) * cols];
                    am.iter_mut().for_each(|i| *i = lo);
                    for r in lo + 1..hi {
                        for (c, &v) in x.row(r).iter().enumerate() {
                            // strict comparison keeps the lowest row on ties
                            if v > orow[c] {
                                orow[c] = v;
                                am[c] = r;
                            }
                        }
                    }
                }
            }
        }
        let out = finite(out, "aggregate")?;
        Ok(self.push(
            out,
            Op::Aggregate {
                input: a,
                offsets,
                kind,
                weights,
                argmax,
            },
        ))
    }

    /// Mean binary cross-entropy of a column of probabilities against 0/1 labels.
    pub fn bce_loss(&mut self, probs: Var, labels: &[f64]) -> Result<Var, NnError> {
        self.live()?;
        let p = self.value(probs);
        if p.cols() != 1 || p.rows() != labels.len() || labels.is_empty() {
            return Err(NnError::Shape(format!("bce on {:?} with {} labels", p.shape(), labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(NnError::Label(bad));
        }
        let n = labels.len() as f64;
        let loss: f64 = p
            .data()
            .iter()
            .zip(labels)
            .map(|(&pi, &y)| {
                let pc = pi.clamp(PROB_EPS, 1.0 - PROB_EPS);
                -(y * pc.ln() + (1.0 - y) * (1.0 - pc).ln())
            })
            .sum::<f64>()
            / n;
        let out = finite(Matrix::from_vec(1, 1, vec![loss])?, "bce")?;
        Ok(self.push(
            out,
            Op::Bce {
                probs,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Propagates d`loss` back through the tape into the parameter gradients.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<(), NnError> {
        self.live()?;
        if self.nodes.is_empty() {
            return Err(NnError::TapeSpent);
        }
        if self.value(loss).shape() != (1, 1) {
            return Err(NnError::NotScalar);
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::from_vec(1, 1, vec![1.0])?);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => store.get_mut(*id).grad.add_assign(&g),
                Op::MatMul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga = acc(&mut grads, *a, av.shape());
                    matmul_nt_into(&g, bv, ga);
                    let gb = acc(&mut grads, *b, bv.shape());
                    matmul_tn_into(av, &g, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.shape()).add_assign(&g);
                    acc(&mut grads, *b, g.shape()).add_assign(&g);
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.nodes[a.0].value.cols();
                    let cb = self.nodes[b.0].value.cols();
                    let ga = acc(&mut grads, *a, (g.rows(), ca));
                    for r in 0..g.rows() {
                        for (o, v) in ga.row_mut(r).iter_mut().zip(&g.row(r)[..ca]) {
                            *o += v;
                        }
                    }
                    let gb = acc(&mut grads, *b, (g.rows(), cb));
                    for r in 0..g.rows() {
                        for (o, v) in gb.row_mut(r).iter_mut().zip(&g.row(r)[ca..]) {
                            *o += v;
                        }
                    }
                }
                Op::Relu(a) => {
                    let x = &self.nodes[a.0].value;
                    let ga = acc(&mut grads, *a, x.shape());
                    for ((o, &gi), &xi) in ga.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                        if xi > 0.0 {
                            *o += gi;
                        }
                    }
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let ga = acc(&mut grads, *a, y.shape());
                    for ((o, &gi), &yi) in ga.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        *o += gi * yi * (1.0 - yi);
                    }
                }
                Op::RowL2Normalize(a) => {
                    let x = &self.nodes[a.0].value;
                    let y = &node.value;
                    let ga = acc(&mut grads, *a, x.shape());
                    for r in 0..x.rows() {
                        let norm = x.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
                        let gr = g.row(r);
                        let out = ga.row_mut(r);
                        if norm > 0.0 {
                            let yr = y.row(r);
                            let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                            for ((o, &gi), &yi) in out.iter_mut().zip(gr).zip(yr) {
                                *o += (gi - yi * dot) / norm;
                            }
                        } else {
                            for (o, &gi) in out.iter_mut().zip(gr) {
                                *o += gi;
                            }
                        }
                    }
                }
                Op::GatherRows(a, idx) => {
                    let shape = self.nodes[a.0].value.shape();
                    let ga = acc(&mut grads, *a, shape);
                    for (o, &src) in idx.iter().enumerate() {
                        for (t, v) in ga.row_mut(src).iter_mut().zip(g.row(o)) {
                            *t += v;
                        }
                    }
                }
                Op::ScaleRows(a, factors) => {
                    let ga = acc(&mut grads, *a, g.shape());
                    for (r, &f) in factors.iter().enumerate() {
                        for (o, v) in ga.row_mut(r).iter_mut().zip(g.row(r)) {
                            *o += f * v;
                        }
                    }
                }
                Op::Aggregate {
                    input,
                    offsets,
                    kind,
                    weights,
                    argmax,
                } => {
                    let shape = self.nodes[input.0].value.shape();
                    let cols = shape.1;
                    let ga = acc(&mut grads, *input, shape);
                    for s in 0..offsets.len() - 1 {
                        let (lo, hi) = (offsets[s], offsets[s + 1]);
                        let gs = g.row(s);
                        match kind {
                            AggregatorKind::Sum | AggregatorKind::Mean => {
                                let scale = if *kind == AggregatorKind::Mean {
                                    1.0 / (hi - lo) as f64
                                } else {
                                    1.0
                                };
                                for r in lo..hi {
                                    for (o, v) in ga.row_mut(r).iter_mut().zip(gs) {
                                        *o += scale * v;
                                    }
                                }
                            }
                            AggregatorKind::WeightedSum => {
                                for r in lo..hi {
                                    let w = weights[r];
                                    for (o, v) in ga.row_mut(r).iter_mut().zip(gs) {
                                        *o += w * v;
                                    }
                                }
                            }
                            AggregatorKind::Max => {
                                for c in 0..cols {
                                    ga[(argmax[s * cols + c], c)] += gs[c];
                                }
                            }
                        }
                    }
                }
                Op::Bce { probs, labels } => {
                    let p = &self.nodes[probs.0].value;
                    let n = labels.len() as f64;
                    let scale = g.data()[0] / n;
                    let gp = acc(&mut grads, *probs, p.shape());
                    for ((o, &pi), &y) in gp.data_mut().iter_mut().zip(p.data()).zip(labels) {
                        // the clamp is flat outside its interval
                        if pi > PROB_EPS && pi < 1.0 - PROB_EPS {
                            *o += scale * (-(y / pi) + (1.0 - y) / (1.0 - pi));
                        }
                    }
                }
            }
        }
        self.nodes.clear();
        self.spent = true;
        Ok(())
    }
}

fn acc(grads: &mut [Option<Matrix>], v: Var, shape: (usize, usize)) -> &mut Matrix {
    grads[v.0].get_or_insert_with(|| Matrix::zeros(shape.0, shape.1))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn eval_unary(input: Matrix, f: impl Fn(&mut Tape, Var) -> Result<Var, NnError>) -> Matrix {
        let mut t = Tape::new();
        let x = t.constant(input).unwrap();
        let y = f(&mut t, x).unwrap();
        t.value(y).clone()
    }

    #[test]
    fn normalize_three_four_five() {
        let y = eval_unary(m(&[vec![3.0, 4.0]]), |t, x| t.row_l2_normalize(x));
        assert!(y.max_abs_diff(&m(&[vec![0.6, 0.8]])) < 1e-15);
    }

    #[test]
    fn normalize_leaves_zero_row() {
        let y = eval_unary(m(&[vec![0.0, 0.0], vec![1.0, 0.0]]), |t, x| t.row_l2_normalize(x));
        assert_eq!(y, m(&[vec![0.0, 0.0], vec![1.0, 0.0]]));
    }

    #[test]
    fn relu_clips() {
        let y = eval_unary(m(&[vec![-1.0, 0.0, 2.0]]), |t, x| t.relu(x));
        assert_eq!(y, m(&[vec![0.0, 0.0, 2.0]]));
    }

    fn agg(rows: &[Vec<f64>], kind: AggregatorKind, w: Vec<f64>) -> Vec<f64> {
        let n = rows.len();
        eval_unary(m(rows), |t, x| t.aggregate(x, vec![0, n], kind, w.clone()))
            .into_data()
    }

    #[test]
    fn aggregators() {
        assert_eq!(agg(&[vec![1.0, 3.0], vec![3.0, 5.0]], AggregatorKind::Mean, vec![]), vec![2.0, 4.0]);
        assert_eq!(agg(&[vec![1.0, 9.0], vec![4.0, 2.0]], AggregatorKind::Max, vec![]), vec![4.0, 9.0]);
        assert_eq!(agg(&[vec![1.0, 9.0], vec![4.0, 2.0]], AggregatorKind::Sum, vec![]), vec![5.0, 11.0]);
        assert_eq!(
            agg(&[vec![1.0, 0.0], vec![0.0, 1.0]], AggregatorKind::WeightedSum, vec![0.25, 0.75]),
            vec![0.25, 0.75]
        );
    }

    #[test]
    fn mean_equals_uniform_weighted_sum() {
        let rows = vec![vec![0.3, -1.7, 2.2], vec![1.1, 0.4, -0.9], vec![5.0, 0.1, 0.7], vec![-2.0, 3.3, 1.0]];
        let mean = agg(&rows, AggregatorKind::Mean, vec![]);
        let ws = agg(&rows, AggregatorKind::WeightedSum, vec![0.25; 4]);
        assert_eq!(mean, ws);
    }

    #[test]
    fn aggregate_errors() {
        let mut t = Tape::new();
        let x = t.constant(m(&[vec![1.0], vec![2.0]])).unwrap();
        assert!(matches!(
            t.aggregate(x, vec![0, 0, 2], AggregatorKind::Mean, vec![]),
            Err(NnError::EmptyAggregate)
        ));
        assert!(matches!(
            t.aggregate(x, vec![0, 2], AggregatorKind::WeightedSum, vec![0.5, 0.6]),
            Err(NnError::Weights(_))
        ));
        let e = t.constant(Matrix::zeros(0, 1)).unwrap();
        assert!(t.aggregate(e, vec![0], AggregatorKind::Mean, vec![]).is_err());
    }

    #[test]
    fn max_routes_gradient_to_lowest_tied_row() {
        let mut store = ParamStore::default();
        let id = store.add("x", m(&[vec![2.0, 1.0], vec![2.0, 3.0]]));
        let mut t = Tape::new();
        let x = t.param(&store, id).unwrap();
        let a = t.aggregate(x, vec![0, 2], AggregatorKind::Max, vec![]).unwrap();
        let w = t.constant(m(&[vec![1.0], vec![1.0]])).unwrap();
        let s = t.matmul(a, w).unwrap();
        let p = t.sigmoid(s).unwrap();
        let loss = t.bce_loss(p, &[1.0]).unwrap();
        t.backward(loss, &mut store).unwrap();
        let g = &store.get(id).grad;
        assert!(g[(0, 0)] != 0.0);
        assert_eq!(g[(1, 0)], 0.0);
        assert_eq!(g[(0, 1)], 0.0);
        assert!(g[(1, 1)] != 0.0);
    }

    #[test]
    fn bce_half_is_ln2() {
        let mut t = Tape::new();
        let p = t.constant(m(&[vec![0.5]])).unwrap();
        let l = t.bce_loss(p, &[1.0]).unwrap();
        assert!((t.value(l)[(0, 0)] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn bce_exact_prediction_near_zero() {
        let mut t = Tape::new();
        let p = t.constant(m(&[vec![1.0], vec![0.0]])).unwrap();
        let l = t.bce_loss(p, &[1.0, 0.0]).unwrap();
        let bound = -(1.0 - PROB_EPS).ln();
        assert!(t.value(l)[(0, 0)] <= bound + 1e-18);
    }

    #[test]
    fn bce_rejects_bad_labels() {
        let mut t = Tape::new();
        let p = t.constant(m(&[vec![0.5]])).unwrap();
        assert!(matches!(t.bce_loss(p, &[0.5]), Err(NnError::Label(_))));
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let mut t = Tape::new();
        assert!(matches!(t.constant(m(&[vec![f64::NAN]])), Err(NnError::NonFinite(_))));
    }

    #[test]
    fn backward_twice_fails() {
        let mut store = ParamStore::default();
        let id = store.add("w", m(&[vec![0.1]]));
        let mut t = Tape::new();
        let w = t.param(&store, id).unwrap();
        let p = t.sigmoid(w).unwrap();
        let l = t.bce_loss(p, &[1.0]).unwrap();
        t.backward(l, &mut store).unwrap();
        assert!(matches!(t.backward(l, &mut store), Err(NnError::TapeSpent)));
        assert!(matches!(t.constant(Matrix::zeros(1, 1)), Err(NnError::TapeSpent)));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut store = ParamStore::default();
        let mut t = Tape::new();
        let x = t.constant(Matrix::zeros(2, 1)).unwrap();
        assert!(matches!(t.backward(x, &mut store), Err(NnError::NotScalar)));
    }

    #[test]
    fn unused_parameter_has_zero_grad() {
        let mut store = ParamStore::default();
        let used = store.add("used", m(&[vec![0.3]]));
        let unused = store.add("unused", m(&[vec![0.7]]));
        let mut t = Tape::new();
        let w = t.param(&store, used).unwrap();
        let _ = t.param(&store, unused).unwrap();
        let p = t.sigmoid(w).unwrap();
        let l = t.bce_loss(p, &[0.0]).unwrap();
        t.backward(l, &mut store).unwrap();
        assert_eq!(store.get(unused).grad[(0, 0)], 0.0);
        assert!(store.get(used).grad[(0, 0)] != 0.0);
    }
}
