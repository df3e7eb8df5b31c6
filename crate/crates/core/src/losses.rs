//! Surrogate decision losses and their weighted combination.
//!
//! Every loss works in the canonical (minimization) orientation and returns
//! its value together with the gradient with respect to its direct input.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::molp::dot;
use crate::ot::{srmmd, srmmd_grad, SrmmdConfig};
use crate::scalarize::NormalizedCosts;

/// Smoothing inside the Pareto-set distance, `√(d² + s²) − s`.
pub const DISTANCE_SMOOTHING: f64 = 1e-6;

/// Default cap on cache solutions entering one landscape evaluation.
pub const LANDSCAPE_SAMPLE_CAP: usize = 16;

/// Scalar loss and gradient with respect to a flat input.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Landscape loss value and gradient per predicted (canonical) cost vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeOutput {
    pub value: f64,
    pub grad: Vec<Vec<f64>>,
    /// Set when the cache held fewer than two solutions.
    pub skipped: bool,
    pub samples: usize,
}

/// Objective vectors `[BN(c^j)·π_i]_j` of every solution.
fn objective_cloud(costs: &NormalizedCosts, solutions: &[&[f64]]) -> Vec<Vec<f64>> {
    solutions
        .iter()
        .map(|pi| (0..costs.t()).map(|j| dot(costs.values(j), pi)).collect())
        .collect()
}

/// sRMMD between the true and predicted objective clouds over cached solutions.
///
/// `true_costs` and `predicted` are canonical cost vectors of one instance. At
/// most `cap` solutions are used; a larger cache is subsampled with `rng`.
/// The gradient is taken with respect to the predicted canonical costs; cached
/// solutions are constants.
pub fn landscape_loss<R: Rng>(
    true_costs: &[Vec<f64>],
    predicted: &[Vec<f64>],
    cache: &[Vec<f64>],
    cfg: &SrmmdConfig,
    cap: usize,
    seed: u64,
    rng: &mut R,
) -> Result<LandscapeOutput> {
    if true_costs.len() != predicted.len() {
        return Err(Error::dim("landscape objectives", true_costs.len(), predicted.len()));
    }
    let zero = predicted.iter().map(|c| vec![0.0; c.len()]).collect();
    if cache.len() < 2 {
        log::warn!("landscape loss skipped: cache holds {} solution(s)", cache.len());
        return Ok(LandscapeOutput { value: 0.0, grad: zero, skipped: true, samples: cache.len() });
    }
    let chosen: Vec<&[f64]> = if cache.len() > cap.max(2) {
        let mut idx = sample(rng, cache.len(), cap.max(2)).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| cache[i].as_slice()).collect()
    } else {
        cache.iter().map(|v| v.as_slice()).collect()
    };
    let truth = NormalizedCosts::new(true_costs)?;
    let pred = NormalizedCosts::new(predicted)?;
    let x = objective_cloud(&truth, &chosen);
    let y = objective_cloud(&pred, &chosen);
    let out = srmmd_grad(&x, &y, cfg, seed)?;
    // dL/dBN(ĉ^j) = Σ_i (dL/dY_i)_j π_i
    let mut g_norm: Vec<Vec<f64>> = predicted.iter().map(|c| vec![0.0; c.len()]).collect();
    for (gy, pi) in out.grad_y.iter().zip(&chosen) {
        for (j, gj) in gy.iter().enumerate() {
            for (a, p) in g_norm[j].iter_mut().zip(pi.iter()) {
                *a += gj * p;
            }
        }
    }
    Ok(LandscapeOutput { value: out.value, grad: pred.backward(&g_norm), skipped: false, samples: chosen.len() })
}

/// Landscape loss value only (no gradient).
pub fn landscape_value<R: Rng>(
    true_costs: &[Vec<f64>],
    predicted: &[Vec<f64>],
    cache: &[Vec<f64>],
    cfg: &SrmmdConfig,
    cap: usize,
    seed: u64,
    rng: &mut R,
) -> Result<f64> {
    if cache.len() < 2 {
        return Ok(0.0);
    }
    let chosen: Vec<&[f64]> = if cache.len() > cap.max(2) {
        let mut idx = sample(rng, cache.len(), cap.max(2)).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| cache[i].as_slice()).collect()
    } else {
        cache.iter().map(|v| v.as_slice()).collect()
    };
    let x = objective_cloud(&NormalizedCosts::new(true_costs)?, &chosen);
    let y = objective_cloud(&NormalizedCosts::new(predicted)?, &chosen);
    Ok(srmmd(&x, &y, cfg, seed)?.value)
}

/// Smoothed distance from `pi_hat` to the nearest representative Pareto
/// solution. Ties go to the earliest solution in `pareto_set`.
pub fn pareto_set_loss(pi_hat: &[f64], pareto_set: &[Vec<f64>]) -> Result<ValueGrad> {
    if pareto_set.is_empty() {
        return Err(Error::Config("pareto-set loss needs a nonempty Pareto set".into()));
    }
    let mut best = (f64::INFINITY, 0usize);
    for (k, p) in pareto_set.iter().enumerate() {
        if p.len() != pi_hat.len() {
            return Err(Error::dim("pareto set member", pi_hat.len(), p.len()));
        }
        let d2: f64 = p.iter().zip(pi_hat).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best.0 {
            best = (d2, k);
        }
    }
    let s2 = DISTANCE_SMOOTHING * DISTANCE_SMOOTHING;
    let r = (best.0 + s2).sqrt();
    let nearest = &pareto_set[best.1];
    Ok(ValueGrad {
        value: r - DISTANCE_SMOOTHING,
        grad: pi_hat.iter().zip(nearest).map(|(a, b)| (a - b) / r).collect(),
    })
}

/// `(1/T) Σ_j c^j·π̂` over the given canonical cost vectors (normalized or raw).
pub fn decision_loss(costs: &[Vec<f64>], pi_hat: &[f64]) -> Result<ValueGrad> {
    let t = costs.len();
    if t == 0 {
        return Err(Error::dim("decision loss objectives", 1, 0));
    }
    let mut grad = vec![0.0; pi_hat.len()];
    for c in costs {
        if c.len() != pi_hat.len() {
            return Err(Error::dim("decision loss cost", pi_hat.len(), c.len()));
        }
        for (g, v) in grad.iter_mut().zip(c) {
            *g += v / t as f64;
        }
    }
    Ok(ValueGrad { value: dot(&grad, pi_hat), grad })
}

/// Weights `(λ_l, λ_d, λ_ps)` of the combined loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambdas {
    pub landscape: f64,
    pub decision: f64,
    pub pareto_set: f64,
}

impl Default for Lambdas {
    fn default() -> Self {
        Lambdas { landscape: 1.0, decision: 2.0, pareto_set: 5.0 }
    }
}

/// Loss components switched off entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ablation {
    pub landscape: bool,
    pub decision: bool,
    pub pareto_set: bool,
}

impl Ablation {
    /// Parses `landscape`, `decision` or `pareto_set` (also `pareto-set`).
    pub fn set(&mut self, name: &str) -> Result<()> {
        match name {
            "landscape" => self.landscape = true,
            "decision" => self.decision = true,
            "pareto_set" | "pareto-set" => self.pareto_set = true,
            other => return Err(Error::Config(format!("unknown ablation '{other}'"))),
        }
        Ok(())
    }

    /// Table label of the run, e.g. `w/o Pareto Set Loss`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.landscape {
            parts.push("Landscape Loss");
        }
        if self.decision {
            parts.push("Decision Loss");
        }
        if self.pareto_set {
            parts.push("Pareto Set Loss");
        }
        if parts.is_empty() {
            "MoDFL".into()
        } else {
            format!("w/o {}", parts.join(", "))
        }
    }
}

impl Lambdas {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("landscape", self.landscape), ("decision", self.decision), ("pareto_set", self.pareto_set)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("lambda {name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// Weights after zeroing ablated components.
    pub fn effective(&self, ablation: &Ablation) -> Lambdas {
        Lambdas {
            landscape: if ablation.landscape { 0.0 } else { self.landscape },
            decision: if ablation.decision { 0.0 } else { self.decision },
            pareto_set: if ablation.pareto_set { 0.0 } else { self.pareto_set },
        }
    }
}

/// Loss components of one instance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Components {
    pub landscape: f64,
    pub decision: f64,
    pub pareto_set: f64,
}

/// Batch losses with their weighted total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub landscape: f64,
    pub decision: f64,
    pub pareto_set: f64,
    pub total: f64,
    pub lambdas: Lambdas,
    pub per_instance: Vec<Components>,
}

/// Averages per-instance components and weights them.
pub fn total_loss(per_instance: Vec<Components>, lambdas: Lambdas, ablation: &Ablation) -> Result<LossReport> {
    lambdas.validate()?;
    let eff = lambdas.effective(ablation);
    let k = per_instance.len().max(1) as f64;
    let mut landscape = 0.0;
    let mut decision = 0.0;
    let mut pareto_set = 0.0;
    for c in &per_instance {
        if !(c.landscape.is_finite() && c.decision.is_finite() && c.pareto_set.is_finite()) {
            return Err(Error::NonFinite("loss component"));
        }
        landscape += c.landscape;
        decision += c.decision;
        pareto_set += c.pareto_set;
    }
    let (landscape, decision, pareto_set) = (landscape / k, decision / k, pareto_set / k);
    Ok(LossReport {
        landscape,
        decision,
        pareto_set,
        total: combine(&Components { landscape, decision, pareto_set }, &eff),
        lambdas: eff,
        per_instance,
    })
}

/// `λ_l L_l + λ_d L_d + λ_ps L_ps`.
pub fn combine(c: &Components, l: &Lambdas) -> f64 {
    l.landscape * c.landscape + l.decision * c.decision + l.pareto_set * c.pareto_set
}
