//! Multi-head feed-forward cost model with hand-written reverse mode.
//!
//! Every decision variable carries one feature row. A shared ReLU trunk maps
//! the row to a hidden representation and one head per objective maps that
//! to a raw score. The cost link (identity or sigmoid) is applied on top by
//! [`MlpModel`], so the network itself stays benchmark-agnostic.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::molp::{CostKind, MolpInstance};
use crate::rng::{stream_rng, Stream};

/// Layer sizes of the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    /// Hidden widths of the shared trunk.
    pub trunk: Vec<usize>,
    /// Hidden widths of every head before its scalar output.
    pub head: Vec<usize>,
    pub heads: usize,
}

impl Architecture {
    /// Two shared hidden layers of 64 and heads with one hidden layer of 64:
    /// four weight layers on every input-to-output path.
    pub fn default_for(input_dim: usize, heads: usize) -> Self {
        Architecture { input_dim, trunk: vec![64, 64], head: vec![64], heads }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.heads == 0 || self.trunk.iter().chain(&self.head).any(|w| *w == 0) {
            return Err(Error::Config("architecture sizes must be positive".into()));
        }
        Ok(())
    }

    /// Weight layers on one input-to-output path.
    pub fn depth(&self) -> usize {
        self.trunk.len() + self.head.len() + 1
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut prev = self.input_dim;
        for &w in &self.trunk {
            out.push((w, prev));
            prev = w;
        }
        let trunk_out = prev;
        for _ in 0..self.heads {
            let mut p = trunk_out;
            for &w in &self.head {
                out.push((w, p));
                p = w;
            }
            out.push((1, p));
        }
        out
    }
}

/// Dense layer `W x + b` with `W` stored row-major (`out × in`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl Layer {
    fn zeros(out: usize, inp: usize) -> Self {
        Layer { w: vec![vec![0.0; inp]; out], b: vec![0.0; out] }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.w.iter().zip(&self.b).map(|(row, b)| b + crate::molp::dot(row, x)).collect()
    }
}

/// Network weights: trunk layers first, then each head's layers in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorParams {
    pub arch: Architecture,
    pub layers: Vec<Layer>,
}

/// Parameter-shaped gradient accumulator.
pub type Gradients = PredictorParams;

impl PredictorParams {
    /// Fan-in scaled uniform initialization `U(−1/√fan_in, 1/√fan_in)`.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = stream_rng(seed, Stream::Init, 0);
        let layers = arch
            .shapes()
            .into_iter()
            .map(|(out, inp)| {
                let bound = 1.0 / (inp as f64).sqrt();
                Layer {
                    w: (0..out).map(|_| (0..inp).map(|_| rng.random_range(-bound..bound)).collect()).collect(),
                    b: (0..out).map(|_| rng.random_range(-bound..bound)).collect(),
                }
            })
            .collect();
        Ok(PredictorParams { arch, layers })
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let layers = arch.shapes().into_iter().map(|(o, i)| Layer::zeros(o, i)).collect();
        Ok(PredictorParams { arch, layers })
    }

    pub fn zeros_like(&self) -> Self {
        PredictorParams { arch: self.arch.clone(), layers: self.layers.iter().map(|l| Layer::zeros(l.b.len(), l.w.first().map_or(0, |r| r.len()))).collect() }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.b.len() * (1 + l.w.first().map_or(0, |r| r.len()))).sum()
    }

    /// Parameters in layer order, each layer as `W` row-major then `b`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            for row in &l.w {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn from_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_params() {
            return Err(Error::dim("flat parameter vector", self.num_params(), flat.len()));
        }
        let mut p = self.clone();
        let mut k = 0;
        for l in p.layers.iter_mut() {
            for row in l.w.iter_mut() {
                for v in row.iter_mut() {
                    *v = flat[k];
                    k += 1;
                }
            }
            for v in l.b.iter_mut() {
                *v = flat[k];
                k += 1;
            }
        }
        Ok(p)
    }

    fn for_each_pair(&mut self, other: &Self, mut f: impl FnMut(&mut f64, f64)) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (ra, rb) in a.w.iter_mut().zip(&b.w) {
                for (x, y) in ra.iter_mut().zip(rb) {
                    f(x, *y);
                }
            }
            for (x, y) in a.b.iter_mut().zip(&b.b) {
                f(x, *y);
            }
        }
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        self.for_each_pair(other, |x, y| *x += alpha * y);
    }

    pub fn scale(&mut self, s: f64) {
        for l in self.layers.iter_mut() {
            l.w.iter_mut().flatten().for_each(|v| *v *= s);
            l.b.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn norm(&self) -> f64 {
        self.flatten().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().flatten().chain(&l.b).all(|v| v.is_finite()))
    }

    fn head_range(&self, h: usize) -> std::ops::Range<usize> {
        let per = self.arch.head.len() + 1;
        let start = self.arch.trunk.len() + h * per;
        start..start + per
    }

    /// Raw scores `[head_j(x_r)]_{j,r}` for every feature row, plus the tape
    /// needed by [`backward`](Self::backward).
    pub fn predict(&self, features: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Tape)> {
        let d = self.arch.input_dim;
        if let Some(r) = features.iter().find(|r| r.len() != d) {
            return Err(Error::dim("feature row", d, r.len()));
        }
        let nt = self.arch.trunk.len();
        let mut out = vec![vec![0.0; features.len()]; self.arch.heads];
        let mut rows = Vec::with_capacity(features.len());
        for (r, x) in features.iter().enumerate() {
            // Trunk activations after ReLU, starting with the input.
            let mut trunk_acts = vec![x.clone()];
            for l in &self.layers[..nt] {
                let z = l.apply(trunk_acts.last().unwrap());
                trunk_acts.push(z.into_iter().map(|v| v.max(0.0)).collect());
            }
            let mut head_acts = Vec::with_capacity(self.arch.heads);
            for h in 0..self.arch.heads {
                let range = self.head_range(h);
                let last = range.end - 1;
                let mut acts = vec![trunk_acts.last().unwrap().clone()];
                for li in range {
                    let z = self.layers[li].apply(acts.last().unwrap());
                    if li == last {
                        out[h][r] = z[0];
                    } else {
                        acts.push(z.into_iter().map(|v| v.max(0.0)).collect());
                    }
                }
                head_acts.push(acts);
            }
            rows.push(RowTape { trunk: trunk_acts, heads: head_acts });
        }
        Ok((out, Tape { rows }))
    }

    /// Accumulates `dL/dθ` for upstream `dL/d(raw score)` (heads × rows)
    /// into `grads`. Consumes the tape.
    pub fn backward_into(&self, tape: Tape, upstream: &[Vec<f64>], grads: &mut Gradients) -> Result<()> {
        if upstream.len() != self.arch.heads {
            return Err(Error::dim("upstream heads", self.arch.heads, upstream.len()));
        }
        if let Some(u) = upstream.iter().find(|u| u.len() != tape.rows.len()) {
            return Err(Error::dim("upstream rows", tape.rows.len(), u.len()));
        }
        let nt = self.arch.trunk.len();
        for (r, row) in tape.rows.into_iter().enumerate() {
            let trunk_width = row.trunk.last().unwrap().len();
            let mut g_trunk = vec![0.0; trunk_width];
            for (h, acts) in row.heads.iter().enumerate() {
                let gout = upstream[h][r];
                if gout == 0.0 {
                    continue;
                }
                let range = self.head_range(h);
                let mut delta = vec![gout];
                for (step, li) in range.rev().enumerate() {
                    let input = &acts[acts.len() - 1 - step];
                    delta = layer_backward(&self.layers[li], &mut grads.layers[li], input, &delta);
                    if acts.len() - 1 - step > 0 {
                        relu_mask(&mut delta, input);
                    }
                }
                for (a, b) in g_trunk.iter_mut().zip(&delta) {
                    *a += b;
                }
            }
            if g_trunk.iter().all(|v| *v == 0.0) {
                continue;
            }
            let mut delta = g_trunk;
            for li in (0..nt).rev() {
                let input = &row.trunk[li];
                // delta is with respect to the post-ReLU output of layer li
                relu_mask(&mut delta, &row.trunk[li + 1]);
                delta = layer_backward(&self.layers[li], &mut grads.layers[li], input, &delta);
            }
        }
        Ok(())
    }

    /// Gradient of `Σ upstream ∘ scores` with respect to every parameter.
    pub fn backward(&self, tape: Tape, upstream: &[Vec<f64>]) -> Result<Gradients> {
        let mut g = self.zeros_like();
        self.backward_into(tape, upstream, &mut g)?;
        Ok(g)
    }

    /// `θ ← θ − lr ∇θ`, rescaling the gradient to norm `clip` when larger.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64, clip: Option<f64>) -> Result<StepInfo> {
        if !grads.is_finite() {
            return Err(Error::NonFinite("parameter gradient"));
        }
        if grads.arch != self.arch {
            return Err(Error::Config("gradient architecture differs from parameters".into()));
        }
        let norm = grads.norm();
        let factor = match clip {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        self.axpy(-lr * factor, grads);
        Ok(StepInfo { grad_norm: norm, clipped: factor < 1.0 })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let doc = Checkpoint { format: CHECKPOINT_FORMAT.into(), version: crate::VERSION.into(), params: self.clone() };
        let text = serde_json::to_string(&doc).map_err(|e| Error::Domain(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            field: "checkpoint".into(),
            message: e.to_string(),
        })?;
        if doc.format != CHECKPOINT_FORMAT {
            return Err(Error::Parse {
                path: path.display().to_string(),
                field: "format".into(),
                message: format!("expected {CHECKPOINT_FORMAT}, got {}", doc.format),
            });
        }
        doc.params.arch.validate()?;
        let expect = doc.params.arch.shapes();
        let ok = expect.len() == doc.params.layers.len()
            && expect.iter().zip(&doc.params.layers).all(|(&(o, i), l)| {
                l.b.len() == o && l.w.len() == o && l.w.iter().all(|r| r.len() == i)
            });
        if !ok {
            return Err(Error::Parse {
                path: path.display().to_string(),
                field: "params.layers".into(),
                message: "layer shapes do not match the architecture".into(),
            });
        }
        Ok(doc.params)
    }
}

const CHECKPOINT_FORMAT: &str = "modfl-predictor";

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: String,
    params: PredictorParams,
}

/// `δ_in = Wᵀ δ_out`; accumulates `δ_out xᵀ` and `δ_out` into `g`.
fn layer_backward(layer: &Layer, g: &mut Layer, input: &[f64], delta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; input.len()];
    for (o, &d) in delta.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        g.b[o] += d;
        for ((gw, w), (x, dx)) in g.w[o].iter_mut().zip(&layer.w[o]).zip(input.iter().zip(out.iter_mut())) {
            *gw += d * x;
            *dx += d * w;
        }
    }
    out
}

fn relu_mask(delta: &mut [f64], post: &[f64]) {
    for (d, a) in delta.iter_mut().zip(post) {
        if *a <= 0.0 {
            *d = 0.0;
        }
    }
}

/// Forward activations of one [`PredictorParams::predict`] call.
///
/// Backward passes take the tape by value, so a tape serves exactly one pass.
#[derive(Debug)]
pub struct Tape {
    rows: Vec<RowTape>,
}

#[derive(Debug)]
struct RowTape {
    trunk: Vec<Vec<f64>>,
    heads: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub grad_norm: f64,
    pub clipped: bool,
}

/// Maps raw scores to costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Link {
    Identity,
    Sigmoid,
}

impl Link {
    pub fn for_kind(kind: CostKind) -> Self {
        match kind {
            CostKind::Real => Link::Identity,
            CostKind::Probability => Link::Sigmoid,
        }
    }

    pub fn apply(self, z: f64) -> f64 {
        match self {
            Link::Identity => z,
            Link::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the output `y = apply(z)`.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Sigmoid => y * (1.0 - y),
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Anything that produces native-orientation cost predictions for an instance.
pub trait CostModel {
    fn predict_costs(&self, instance: &MolpInstance) -> Result<Vec<Vec<f64>>>;
}

/// Returns the true costs; the perfect-prediction reference.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleModel;

impl CostModel for OracleModel {
    fn predict_costs(&self, instance: &MolpInstance) -> Result<Vec<Vec<f64>>> {
        Ok(instance.costs.clone())
    }
}

/// The network followed by its cost link.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub params: PredictorParams,
    pub link: Link,
}

impl CostModel for MlpModel {
    fn predict_costs(&self, instance: &MolpInstance) -> Result<Vec<Vec<f64>>> {
        let (raw, _) = self.params.predict(&instance.features)?;
        Ok(raw.into_iter().map(|h| h.into_iter().map(|z| self.link.apply(z)).collect()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(rows: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = stream_rng(seed, Stream::Data, 0);
        (0..rows).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn zero_params_predict_zero() {
        let p = PredictorParams::zeros(Architecture::default_for(3, 2)).unwrap();
        let (y, _) = p.predict(&feats(4, 3, 1)).unwrap();
        assert!(y.iter().flatten().all(|v| *v == 0.0));
        assert_eq!(Architecture::default_for(3, 2).depth(), 4);
    }

    #[test]
    fn single_layer_identity() {
        let arch = Architecture { input_dim: 1, trunk: vec![], head: vec![], heads: 1 };
        let mut p = PredictorParams::zeros(arch).unwrap();
        p.layers[0].w[0][0] = 1.0;
        let x = vec![vec![0.5], vec![-2.0]];
        assert_eq!(p.predict(&x).unwrap().0, vec![vec![0.5, -2.0]]);
        // L = ŷ: dL/dW = x, dL/db = 1 per row
        let (_, tape) = p.predict(&x).unwrap();
        let g = p.backward(tape, &[vec![1.0, 1.0]]).unwrap();
        assert_eq!(g.layers[0].w[0][0], -1.5);
        assert_eq!(g.layers[0].b[0], 2.0);
    }

    #[test]
    fn forward_matches_matrix_recomputation() {
        let p = PredictorParams::init(Architecture { input_dim: 3, trunk: vec![4], head: vec![2], heads: 2 }, 5).unwrap();
        let x = feats(3, 3, 2);
        let (y, _) = p.predict(&x).unwrap();
        let relu = |v: Vec<f64>| v.into_iter().map(|a: f64| a.max(0.0)).collect::<Vec<_>>();
        let lin = |l: &Layer, v: &[f64]| -> Vec<f64> {
            (0..l.b.len()).map(|o| l.b[o] + (0..v.len()).map(|i| l.w[o][i] * v[i]).sum::<f64>()).collect()
        };
        for (r, row) in x.iter().enumerate() {
            let h = relu(lin(&p.layers[0], row));
            for head in 0..2 {
                let a = relu(lin(&p.layers[1 + 2 * head], &h));
                let o = lin(&p.layers[2 + 2 * head], &a)[0];
                assert!((o - y[head][r]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let p = PredictorParams::init(Architecture::default_for(2, 2), 1).unwrap();
        let (_, tape) = p.predict(&feats(3, 2, 1)).unwrap();
        let g = p.backward(tape, &[vec![0.0; 3], vec![0.0; 3]]).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = PredictorParams::init(Architecture { input_dim: 3, trunk: vec![6, 5], head: vec![4], heads: 2 }, 9).unwrap();
        let x = feats(5, 3, 3);
        let up: Vec<Vec<f64>> = feats(2, 5, 4);
        let loss = |q: &PredictorParams| -> f64 {
            let (y, _) = q.predict(&x).unwrap();
            y.iter().zip(&up).map(|(a, b)| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>()).sum()
        };
        let (_, tape) = p.predict(&x).unwrap();
        let g = p.backward(tape, &up).unwrap().flatten();
        let flat = p.flatten();
        let mut rng = stream_rng(7, Stream::Training, 0);
        for _ in 0..50 {
            let k = rng.random_range(0..flat.len());
            let h = 1e-6;
            let mut fp = flat.clone();
            fp[k] += h;
            let mut fm = flat.clone();
            fm[k] -= h;
            let fd = (loss(&p.from_flat(&fp).unwrap()) - loss(&p.from_flat(&fm).unwrap())) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-4 * fd.abs().max(1e-2), "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn sgd_examples() {
        let arch = Architecture { input_dim: 1, trunk: vec![], head: vec![], heads: 1 };
        let mut p = PredictorParams::zeros(arch).unwrap();
        p.layers[0].w[0][0] = 1.0;
        let mut g = p.zeros_like();
        let before = p.clone();
        p.sgd_step(&g, 0.1, None).unwrap();
        assert_eq!(p, before);
        g.layers[0].w[0][0] = 0.5;
        p.sgd_step(&g, 0.0, None).unwrap();
        assert_eq!(p, before);
        p.sgd_step(&g, 0.1, Some(10.0)).unwrap();
        assert!((p.layers[0].w[0][0] - 0.95).abs() < 1e-15);
        g.layers[0].b[0] = f64::NAN;
        assert!(p.sgd_step(&g, 0.1, None).is_err());
        let mut big = p.zeros_like();
        big.layers[0].w[0][0] = 100.0;
        let info = p.sgd_step(&big, 1.0, Some(10.0)).unwrap();
        assert!(info.clipped);
        assert!((p.layers[0].w[0][0] - (0.95 - 10.0)).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = PredictorParams::init(Architecture::default_for(4, 3), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        p.save(&path).unwrap();
        assert_eq!(PredictorParams::load(&path).unwrap(), p);
        std::fs::write(&path, "{\"format\":\"other\"}").unwrap();
        assert!(PredictorParams::load(&path).is_err());
    }
}
