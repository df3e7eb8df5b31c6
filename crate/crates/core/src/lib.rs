//! Multi-objective decision-focused learning over linear programs.
//!
//! The crate trains a cost-predicting network whose outputs parameterize a
//! family of multi-objective LPs. Training propagates three surrogate decision
//! losses (landscape, Pareto-set, decision) through a differentiable,
//! quadratically smoothed LP layer. Evaluation solves the predicted problems
//! exactly and scores the resulting decisions and Pareto fronts against the
//! true problems.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`molp`] | instances, dominance, Pareto filtering, instance files |
//! | [`scalarize`] | instance normalization and weighted-sum scalarization |
//! | [`solver`] | bounded simplex, interior-point QP, weight-grid Pareto sets |
//! | [`dslp`] | differentiable smoothed LP layer |
//! | [`ot`] | log-domain Sinkhorn, soft rank maps, sRMMD |
//! | [`losses`] | landscape, Pareto-set and decision losses |
//! | [`predictor`] | multi-head feed-forward cost model |
//! | [`trainer`] | MoDFL and two-stage training loops |
//! | [`benchmarks`] | synthetic generators, Cora loader, quadratic example |
//! | [`metrics`] | regret, GD, MPFE, hypervolume, HAR |
//! | [`verify`] | self-check suites backing `modfl verify` |
//! | [`cli`] | subcommands of the `modfl` binary |

// index loops mirror the math; `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod cli;
pub mod dslp;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod molp;
pub mod ot;
pub mod predictor;
pub mod rng;
pub mod scalarize;
pub mod solver;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
pub use molp::{Dataset, MolpInstance, ObjectiveVector, Orientation};

/// Version stamp written into every run directory.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
