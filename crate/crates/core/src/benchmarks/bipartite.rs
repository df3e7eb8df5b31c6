//! Relaxed bipartite matching with perturbed second labels.
//!
//! Variable `π_ij` (index `i·NV + j`) matches left node `i` to right node `j`.
//! Rows and columns sum to at most one and `π ∈ [0,1]^{NU·NV}`; the matrix is
//! totally unimodular, so LP vertices are integral.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{attach_pareto, default_split, Teacher};
use crate::error::{Error, Result};
use crate::molp::{CostKind, Dataset, MolpInstance, Orientation};
use crate::predictor::sigmoid;
use crate::rng::{mix, stream_rng, Stream};

/// How the second label set is derived from the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PerturbMode {
    /// Flip each label with probability `ρ`.
    #[default]
    Intent,
    /// Flip each label when `r ≥ ρ`, i.e. with probability `1 − ρ`.
    Literal,
}

impl std::str::FromStr for PerturbMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intent" => Ok(PerturbMode::Intent),
            "literal" => Ok(PerturbMode::Literal),
            other => Err(Error::Config(format!("unknown perturb mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BipartiteConfig {
    /// Nodes per instance, split evenly between the two sides.
    pub nodes: usize,
    pub rho: f64,
    /// Node feature dimension; edge features concatenate both endpoints.
    pub feature_dim: usize,
    pub instances: usize,
    pub perturb_mode: PerturbMode,
    /// Adds `y³ = w₁y¹ + w₂y²` with per-instance `w ~ U[0,1]²`.
    pub third_objective: bool,
    pub teacher_seed: u64,
    pub seed: u64,
    pub denom: usize,
}

impl Default for BipartiteConfig {
    fn default() -> Self {
        BipartiteConfig {
            nodes: 100,
            rho: 0.05,
            feature_dim: 8,
            instances: 27,
            perturb_mode: PerturbMode::Intent,
            third_objective: false,
            teacher_seed: 0,
            seed: 0,
            denom: super::DEFAULT_DENOM,
        }
    }
}

impl BipartiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 || !self.nodes.is_multiple_of(2) {
            return Err(Error::Config(format!("nodes = {} must be even and at least 2", self.nodes)));
        }
        if !(self.rho >= 0.0 && self.rho <= 1.0) {
            return Err(Error::Config(format!("rho = {} must lie in [0,1]", self.rho)));
        }
        if self.feature_dim == 0 || self.instances == 0 || self.denom == 0 {
            return Err(Error::Config("feature_dim, instances and denom must be positive".into()));
        }
        Ok(())
    }

    pub fn side(&self) -> usize {
        self.nodes / 2
    }

    pub fn t_objectives(&self) -> usize {
        if self.third_objective {
            3
        } else {
            2
        }
    }
}

/// Matching constraints for an `nu × nv` bipartite graph.
pub(crate) fn matching_constraints(nu: usize, nv: usize) -> (Vec<(usize, usize, f64)>, Vec<f64>) {
    let mut a = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            a.push((i, i * nv + j, 1.0));
            a.push((nu + j, i * nv + j, 1.0));
        }
    }
    (a, vec![1.0; nu + nv])
}

/// Second label set from the first.
pub fn perturb_labels<R: Rng>(y1: &[f64], rho: f64, mode: PerturbMode, rng: &mut R) -> Vec<f64> {
    y1.iter()
        .map(|&y| {
            let r: f64 = rng.random();
            let flip = match mode {
                PerturbMode::Intent => r < rho,
                PerturbMode::Literal => r >= rho,
            };
            if flip {
                1.0 - y
            } else {
                y
            }
        })
        .collect()
}

/// Builds a matching instance from endpoint features and first labels.
#[allow(clippy::too_many_arguments)]
pub(crate) fn matching_instance<R: Rng>(
    id: usize,
    left: &[Vec<f64>],
    right: &[Vec<f64>],
    y1: Vec<f64>,
    rho: f64,
    mode: PerturbMode,
    third: bool,
    denom: usize,
    rng: &mut R,
) -> Result<MolpInstance> {
    let (nu, nv) = (left.len(), right.len());
    let mut features = Vec::with_capacity(nu * nv);
    for u in left {
        for v in right {
            features.push(u.iter().chain(v).copied().collect::<Vec<f64>>());
        }
    }
    let y2 = perturb_labels(&y1, rho, mode, rng);
    let mut costs = vec![y1, y2];
    if third {
        let (w1, w2): (f64, f64) = (rng.random(), rng.random());
        costs.push(costs[0].iter().zip(&costs[1]).map(|(a, b)| w1 * a + w2 * b).collect());
    }
    let (a, b) = matching_constraints(nu, nv);
    let mut inst = MolpInstance {
        id,
        n_vars: nu * nv,
        t_objectives: costs.len(),
        orientation: Orientation::Max,
        features,
        costs,
        a,
        b,
        bounds: vec![(0.0, 1.0); nu * nv],
        pareto_set: vec![],
        pareto_front: vec![],
    };
    attach_pareto(&mut inst, denom)?;
    Ok(inst)
}

/// Synthetic matching instances. First labels are Bernoulli draws of a fixed
/// teacher network's edge probability.
pub fn gen_bipartite(config: &BipartiteConfig) -> Result<Dataset> {
    config.validate()?;
    let mut trng = ChaCha8Rng::seed_from_u64(mix(config.teacher_seed, 0x6269_7061, 0));
    let teacher = Teacher::new(2 * config.feature_dim, 2.0, -1.5, &mut trng);
    let side = config.side();
    let mut instances = Vec::with_capacity(config.instances);
    for id in 0..config.instances {
        let mut rng = stream_rng(config.seed, Stream::Data, id as u64);
        let nodes = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..side).map(|_| (0..config.feature_dim).map(|_| StandardNormal.sample(rng)).collect()).collect()
        };
        let left = nodes(&mut rng);
        let right = nodes(&mut rng);
        let mut y1 = Vec::with_capacity(side * side);
        for u in &left {
            for v in &right {
                let x: Vec<f64> = u.iter().chain(v).copied().collect();
                let p = sigmoid(teacher.logit(&x));
                y1.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
            }
        }
        instances.push(matching_instance(
            id,
            &left,
            &right,
            y1,
            config.rho,
            config.perturb_mode,
            config.third_objective,
            config.denom,
            &mut rng,
        )?);
    }
    let cost_kind = if config.third_objective { CostKind::Real } else { CostKind::Probability };
    Ok(Dataset { split: default_split(config.instances), instances, cost_kind })
}
