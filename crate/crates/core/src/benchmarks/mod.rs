//! Reproducible benchmark generators, the Cora loader, the analytic quadratic
//! example, and dataset directories on disk.

mod ad;
mod bipartite;
mod cora;
mod quadratic;

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use ad::{gen_ad_alloc, AdAllocConfig};
pub use bipartite::{gen_bipartite, perturb_labels, BipartiteConfig, PerturbMode};
pub use cora::{bipartition, load_cora, parse_cora, partition_graph, CoraConfig, CoraGraph};
pub use quadratic::{GridCheck, QuadraticExample};

use crate::error::{Error, Result};
use crate::molp::{read_instance, write_instance, CostKind, Dataset, MolpInstance, Split};
use crate::solver::solve_multiobjective;

/// Fraction of instances in the training and validation splits; the rest is
/// the test split.
pub const TRAIN_FRACTION: f64 = 0.6;
pub const VALIDATION_FRACTION: f64 = 0.2;

/// Weight-grid denominator used for stored Pareto data.
pub const DEFAULT_DENOM: usize = 5;

/// Fixed random network mapping a feature row to a logit. One tanh hidden
/// layer of [`Teacher::HIDDEN`] units, Gaussian weights scaled by fan-in.
#[derive(Debug, Clone)]
pub struct Teacher {
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    scale: f64,
    shift: f64,
}

impl Teacher {
    pub const HIDDEN: usize = 16;

    /// Output is `scale · net(x) + shift`; `net` has roughly unit variance.
    pub fn new<R: Rng>(input_dim: usize, scale: f64, shift: f64, rng: &mut R) -> Self {
        let n1 = Normal::new(0.0, 1.0 / (input_dim.max(1) as f64).sqrt()).unwrap();
        let n2 = Normal::new(0.0, 1.0 / (Self::HIDDEN as f64).sqrt()).unwrap();
        let w1 = (0..Self::HIDDEN).map(|_| (0..input_dim).map(|_| n1.sample(rng)).collect()).collect();
        let b1 = (0..Self::HIDDEN).map(|_| 0.5 * n1.sample(rng)).collect();
        let w2 = (0..Self::HIDDEN).map(|_| n2.sample(rng) * 2.0).collect();
        Teacher { w1, b1, w2, scale, shift }
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let h = self.w1.iter().zip(&self.b1).map(|(row, b)| (b + crate::molp::dot(row, x)).tanh());
        self.scale * h.zip(&self.w2).map(|(a, w)| a * w).sum::<f64>() + self.shift
    }
}

/// Fills `pareto_set`/`pareto_front` from the true costs and validates.
pub fn attach_pareto(inst: &mut MolpInstance, denom: usize) -> Result<()> {
    let data = solve_multiobjective(inst, denom)?;
    inst.pareto_set = data.pareto_set;
    inst.pareto_front = data.pareto_front;
    inst.validate()
}

pub(crate) fn default_split(n: usize) -> Split {
    Split::contiguous(n, TRAIN_FRACTION, VALIDATION_FRACTION)
}

/// Provenance of a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: String,
    pub benchmark: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub cost_kind: CostKind,
    pub split: Split,
    pub files: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn new(benchmark: &str, seed: u64, config: serde_json::Value, dataset: &Dataset) -> Self {
        Manifest {
            format: "modfl-dataset".into(),
            version: crate::VERSION.into(),
            benchmark: benchmark.into(),
            seed,
            config,
            cost_kind: dataset.cost_kind,
            split: dataset.split.clone(),
            files: (0..dataset.instances.len()).map(instance_file).collect(),
        }
    }
}

fn instance_file(i: usize) -> String {
    format!("instance_{i:04}.json")
}

/// Writes every instance and the manifest into `dir` (created if needed).
pub fn write_dataset(dir: &Path, dataset: &Dataset, manifest: &Manifest) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (inst, name) in dataset.instances.iter().zip(&manifest.files) {
        write_instance(inst, dir.join(name))?;
    }
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Reads a directory written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<(Dataset, Manifest)> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        field: "<document>".into(),
        message: e.to_string(),
    })?;
    let instances = manifest.files.iter().map(|f| read_instance(dir.join(f))).collect::<Result<Vec<_>>>()?;
    let dataset = Dataset { instances, split: manifest.split.clone(), cost_kind: manifest.cost_kind };
    dataset.validate()?;
    Ok((dataset, manifest))
}
