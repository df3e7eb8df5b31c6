//! Instance normalization and weighted-sum scalarization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this population standard deviation a cost vector is treated as
/// constant.
pub const DEGENERATE_STD: f64 = 1e-12;

/// Mean and population standard deviation used for one objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
    pub degenerate: bool,
}

/// One instance-normalized cost vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    pub stats: NormStats,
}

/// `(y − mean(y)) / std(y)` with the population standard deviation. A
/// constant vector maps to zeros and sets `stats.degenerate`.
pub fn instance_normalize(y: &[f64]) -> Result<Normalized> {
    if y.len() < 2 {
        return Err(Error::dim("instance_normalize (min length)", 2, y.len()));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if !std.is_finite() {
        return Err(Error::NonFinite("instance_normalize input"));
    }
    if std < DEGENERATE_STD {
        return Ok(Normalized {
            values: vec![0.0; y.len()],
            stats: NormStats { mean, std, degenerate: true },
        });
    }
    Ok(Normalized {
        values: y.iter().map(|v| (v - mean) / std).collect(),
        stats: NormStats { mean, std, degenerate: false },
    })
}

/// Vector-Jacobian product of [`instance_normalize`]: maps `dL/dz` to `dL/dy`.
pub fn normalize_backward(norm: &Normalized, grad_out: &[f64]) -> Vec<f64> {
    if norm.stats.degenerate {
        return vec![0.0; grad_out.len()];
    }
    let n = grad_out.len() as f64;
    let g_mean = grad_out.iter().sum::<f64>() / n;
    let gz_mean = grad_out.iter().zip(&norm.values).map(|(g, z)| g * z).sum::<f64>() / n;
    grad_out
        .iter()
        .zip(&norm.values)
        .map(|(g, z)| (g - g_mean - z * gz_mean) / norm.stats.std)
        .collect()
}

/// Normalized versions of all `T` cost vectors of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCosts {
    pub objectives: Vec<Normalized>,
}

impl NormalizedCosts {
    pub fn new(costs: &[Vec<f64>]) -> Result<Self> {
        Ok(NormalizedCosts {
            objectives: costs.iter().map(|y| instance_normalize(y)).collect::<Result<_>>()?,
        })
    }

    pub fn t(&self) -> usize {
        self.objectives.len()
    }

    pub fn n(&self) -> usize {
        self.objectives.first().map_or(0, |o| o.values.len())
    }

    pub fn values(&self, j: usize) -> &[f64] {
        &self.objectives[j].values
    }

    /// Chains `dL/dBN(y^j)` back to `dL/dy^j` for every objective.
    pub fn backward(&self, grads: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.objectives
            .iter()
            .zip(grads)
            .map(|(o, g)| normalize_backward(o, g))
            .collect()
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Domain("weights must be finite and nonnegative".into()));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("weights sum to {s}, not 1")));
        }
        Ok(WeightVector(w))
    }

    pub fn uniform(t: usize) -> Self {
        WeightVector(vec![1.0 / t as f64; t])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.0.iter().all(|w| *w > 0.0)
    }
}

/// `Σ_j w_j · BN(y^j)`.
pub fn weighted_cost(normalized: &NormalizedCosts, w: &WeightVector) -> Result<Vec<f64>> {
    if w.len() != normalized.t() {
        return Err(Error::dim("weighted_cost weights", normalized.t(), w.len()));
    }
    let mut c = vec![0.0; normalized.n()];
    for (o, &wj) in normalized.objectives.iter().zip(w.values()) {
        for (ci, v) in c.iter_mut().zip(&o.values) {
            *ci += wj * v;
        }
    }
    Ok(c)
}

/// Every `w/denom` with nonnegative integer `w` summing to `denom`, in
/// ascending lexicographic order.
pub fn weight_grid(t: usize, denom: usize) -> Result<Vec<WeightVector>> {
    if t < 2 {
        return Err(Error::Domain(format!("weight_grid needs T ≥ 2, got {t}")));
    }
    if denom < 1 {
        return Err(Error::Domain("weight_grid needs denom ≥ 1".into()));
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(t);
    compositions(t, denom, &mut current, &mut out);
    Ok(out
        .into_iter()
        .map(|parts| WeightVector(parts.into_iter().map(|p| p as f64 / denom as f64).collect()))
        .collect())
}

fn compositions(parts: usize, remaining: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        current.push(remaining);
        out.push(current.clone());
        current.pop();
        return;
    }
    for k in 0..=remaining {
        current.push(k);
        compositions(parts - 1, remaining - k, current, out);
        current.pop();
    }
}
