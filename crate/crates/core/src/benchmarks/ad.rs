//! Advertisement allocation with category exposure targets.
//!
//! Variable `π_ij` (index `i·NC + j`) shows candidate `j` on query `i`. Each
//! query shows at most one candidate, and the share of queries given to
//! category `k` must stay within `δ_k ± thr`. Both objectives (click and
//! return probabilities) are maximized.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{attach_pareto, default_split, Teacher};
use crate::error::{Error, Result};
use crate::molp::{check_feasible, CostKind, Dataset, MolpInstance, Orientation};
use crate::predictor::sigmoid;
use crate::rng::{mix, stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdAllocConfig {
    /// Queries per instance.
    pub nd: usize,
    /// Candidates per instance.
    pub nc: usize,
    /// Candidate `j` belongs to category `j mod k`.
    pub k: usize,
    pub delta: Vec<f64>,
    pub thr: f64,
    /// Query features plus candidate features per cell.
    pub feature_dim: usize,
    pub teacher_seed: u64,
    pub seed: u64,
    pub denom: usize,
}

impl Default for AdAllocConfig {
    fn default() -> Self {
        AdAllocConfig {
            nd: 100,
            nc: 53,
            k: 4,
            delta: vec![0.25; 4],
            thr: 0.05,
            feature_dim: 8,
            teacher_seed: 0,
            seed: 0,
            denom: super::DEFAULT_DENOM,
        }
    }
}

impl AdAllocConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.nd == 0 || self.nc == 0 || self.k == 0 || self.feature_dim < 2 || self.denom == 0 {
            return bad("nd, nc, k, denom must be positive and feature_dim at least 2".into());
        }
        if self.delta.len() != self.k {
            return bad(format!("delta has {} entries for k = {}", self.delta.len(), self.k));
        }
        if self.nc < self.k {
            return bad(format!("nc = {} leaves categories without candidates (k = {})", self.nc, self.k));
        }
        if !(self.thr > 0.0) {
            return bad("thr must be positive".into());
        }
        if self.delta.iter().any(|d| !(*d >= 0.0)) {
            return bad("delta entries must be nonnegative".into());
        }
        let floor: f64 = self.delta.iter().map(|d| (d - self.thr).max(0.0)).sum();
        if floor > 1.0 + 1e-12 {
            return bad(format!("exposure floors sum to {floor} > 1; no allocation is feasible"));
        }
        Ok(())
    }

    /// True when every exposure bound is a whole number of queries, which
    /// makes every LP vertex integral.
    pub fn integral_exposure(&self) -> bool {
        let nd = self.nd as f64;
        self.delta.iter().all(|d| {
            [d + self.thr, d - self.thr].iter().all(|b| {
                let v = b * nd;
                (v - v.round()).abs() < 1e-9
            })
        })
    }

    pub fn category(&self, j: usize) -> usize {
        j % self.k
    }

    /// Constraint rows `(A triplets, b)` shared by every instance.
    pub fn constraints(&self) -> (Vec<(usize, usize, f64)>, Vec<f64>) {
        let (nd, nc) = (self.nd, self.nc);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..nd {
            for j in 0..nc {
                a.push((i, i * nc + j, 1.0));
            }
            b.push(1.0);
        }
        let inv = 1.0 / nd as f64;
        for k in 0..self.k {
            let upper = b.len();
            let lower = upper + 1;
            for i in 0..nd {
                for j in (0..nc).filter(|j| self.category(*j) == k) {
                    a.push((upper, i * nc + j, inv));
                    a.push((lower, i * nc + j, -inv));
                }
            }
            b.push(self.delta[k] + self.thr);
            b.push(-self.delta[k] + self.thr);
        }
        (a, b)
    }
}

/// `count` allocation instances. Features are Gaussian; the two cost vectors
/// are sigmoid outputs of two fixed teacher networks.
pub fn gen_ad_alloc(config: &AdAllocConfig, count: usize) -> Result<Dataset> {
    config.validate()?;
    if count == 0 {
        return Err(Error::Config("instance count must be positive".into()));
    }
    if !config.integral_exposure() {
        log::warn!("exposure bounds are not whole query counts; LP vertices may be fractional");
    }
    let teachers: Vec<Teacher> = (0..2)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(config.teacher_seed, 0x7465_6163, t));
            Teacher::new(config.feature_dim, 1.5, -1.0, &mut rng)
        })
        .collect();
    let (a, b) = config.constraints();
    let dq = config.feature_dim / 2;
    let da = config.feature_dim - dq;
    let n = config.nd * config.nc;
    let mut instances = Vec::with_capacity(count);
    for id in 0..count {
        let mut rng = stream_rng(config.seed, Stream::Data, id as u64);
        let draw = |d: usize, rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| StandardNormal.sample(rng)).collect() };
        let queries: Vec<Vec<f64>> = (0..config.nd).map(|_| draw(dq, &mut rng)).collect();
        let ads: Vec<Vec<f64>> = (0..config.nc).map(|_| draw(da, &mut rng)).collect();
        let mut features = Vec::with_capacity(n);
        for q in &queries {
            for v in &ads {
                features.push(q.iter().chain(v).copied().collect::<Vec<f64>>());
            }
        }
        let costs: Vec<Vec<f64>> = teachers
            .iter()
            .map(|t| features.iter().map(|x| sigmoid(t.logit(x))).collect())
            .collect();
        let mut inst = MolpInstance {
            id,
            n_vars: n,
            t_objectives: 2,
            orientation: Orientation::Max,
            features,
            costs,
            a: a.clone(),
            b: b.clone(),
            bounds: vec![(0.0, 1.0); n],
            pareto_set: vec![],
            pareto_front: vec![],
        };
        attach_pareto(&mut inst, config.denom)?;
        if let Some(bad) = inst.pareto_set.iter().find(|pi| !check_feasible(&inst, pi, 1e-7)) {
            return Err(Error::Domain(format!("instance {id}: infeasible Pareto solution of length {}", bad.len())));
        }
        instances.push(inst);
    }
    Ok(Dataset { split: default_split(count), instances, cost_kind: CostKind::Probability })
}
