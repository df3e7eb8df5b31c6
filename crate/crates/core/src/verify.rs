//! Self-check suites run by `modfl verify` and the acceptance tests.
//!
//! Each suite compares a component against an independent oracle (finite
//! differences, brute force, Monte Carlo or a closed form) and reports its
//! runtime.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::benchmarks::{gen_ad_alloc, gen_bipartite, AdAllocConfig, BipartiteConfig, QuadraticExample};
use crate::dslp::{self, DiffSolution};
use crate::error::Result;
use crate::metrics::{evaluate_model, gd, hypervolume, mpfe};
use crate::molp::{dot, pareto_filter, FrontApproximation, ObjectiveVector, Orientation};
use crate::ot::{sinkhorn, srmmd, srmmd_grad, SrmmdConfig};
use crate::predictor::{Architecture, Link, MlpModel, OracleModel, PredictorParams};
use crate::scalarize::{NormalizedCosts, WeightVector};
use crate::solver::{enumerate_vertices, solve_lp, Polytope};
use crate::trainer::{evaluate_losses, loss_trace, seed_cache, train_modfl, TrainConfig};
use crate::Dataset;

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub runtime_s: f64,
    pub limit_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Report {
    pub suites: Vec<SuiteResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            out.push_str(&format!(
                "{:<6} {:<22} {:>8.2}s  {}\n",
                if s.passed { "PASS" } else { "FAIL" },
                s.name,
                s.runtime_s,
                s.detail
            ));
        }
        let failed = self.suites.iter().filter(|s| !s.passed).count();
        out.push_str(&format!("{} suites, {} failed\n", self.suites.len(), failed));
        out
    }
}

type Outcome = std::result::Result<String, String>;

fn timed(name: &str, limit_s: Option<f64>, f: impl FnOnce() -> Outcome) -> SuiteResult {
    let start = Instant::now();
    let outcome = f();
    let runtime_s = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if let Some(limit) = limit_s {
        if runtime_s > limit {
            passed = false;
            detail = format!("{detail}; runtime over the {limit} s limit");
        }
    }
    SuiteResult { name: name.into(), passed, detail, runtime_s, limit_s }
}

fn lib<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// Upstream-gradient map used by the gradient suite; swappable so a broken
/// implementation can be shown to fail.
pub type BackwardFn<'a> = &'a dyn Fn(&DiffSolution, &[f64]) -> Result<Vec<f64>>;

/// Seeded LP with `x = ½·1` strictly feasible.
pub fn random_lp(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> (Vec<f64>, Polytope) {
    let n = rng.random_range(2..=max_n);
    let m = rng.random_range(1..=max_m);
    let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let b = rows.iter().map(|r| r.iter().sum::<f64>() * 0.5 + rng.random_range(0.05..0.4)).collect();
    let poly = Polytope::new(rows, b, vec![(0.0, 1.0); n]).expect("consistent sizes");
    let c = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
    (c, poly)
}

/// Smoothed-LP Jacobians against central differences (step 1e-5) on 20
/// random LPs. Columns whose perturbation changes the active set are
/// degenerate and skipped. Error is `|a − b| / max(|a|, |b|, 1)`.
pub fn dslp_gradient_suite_with(backward: BackwardFn) -> SuiteResult {
    timed("dslp-gradients", Some(30.0), || {
        let gamma = 0.35;
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(0x6473_6c70);
        let (mut checked, mut skipped, mut worst) = (0usize, 0usize, 0.0f64);
        for _ in 0..20 {
            let (c, poly) = random_lp(&mut rng, 10, 15);
            let n = c.len();
            let d = lib(dslp::forward(&c, &poly, gamma))?;
            let mut jac = vec![vec![0.0; n]; n];
            for i in 0..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                jac[i] = lib(backward(&d, &e))?;
            }
            for col in 0..n {
                let (mut cp, mut cm) = (c.clone(), c.clone());
                cp[col] += h;
                cm[col] -= h;
                let xp = lib(dslp::forward(&cp, &poly, gamma))?;
                let xm = lib(dslp::forward(&cm, &poly, gamma))?;
                let same = |x: &DiffSolution| x.active_rows == d.active_rows && x.free == d.free;
                if !same(&xp) || !same(&xm) || d.ambiguous > 0 {
                    skipped += 1;
                    continue;
                }
                for row in 0..n {
                    let fd = (xp.primal[row] - xm.primal[row]) / (2.0 * h);
                    let a = jac[row][col];
                    worst = worst.max((fd - a).abs() / fd.abs().max(a.abs()).max(1.0));
                    checked += 1;
                }
            }
        }
        let detail = format!("{checked} entries checked, {skipped} degenerate columns skipped, worst error {worst:.2e}");
        if checked > 0 && worst <= 1e-4 {
            Ok(detail)
        } else {
            Err(detail)
        }
    })
}

pub fn dslp_gradient_suite() -> SuiteResult {
    dslp_gradient_suite_with(&|d, g| d.backward(g))
}

fn cloud(rng: &mut ChaCha8Rng, k: usize, d: usize, scale: f64, shift: f64) -> Vec<Vec<f64>> {
    (0..k).map(|_| (0..d).map(|_| scale * rng.random_range(-1.0..1.0) + shift).collect()).collect()
}

/// sRMMD identity and symmetry at `ε = 1e-5`, gradients against central
/// differences at `ε ∈ {0.05, 0.01}`, and Sinkhorn marginals down to 1e-5.
/// Gradient error is relative to the largest gradient entry.
pub fn srmmd_suite() -> SuiteResult {
    timed("srmmd", Some(60.0), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x736d_6d64);
        let cfg = SrmmdConfig::default();
        let (mut self_worst, mut sym_worst) = (0.0f64, 0.0f64);
        for s in 0..5 {
            let x = cloud(&mut rng, 8, 2, 1.0, 0.0);
            let y = cloud(&mut rng, 8, 2, 1.0, 0.3);
            self_worst = self_worst.max(lib(srmmd(&x, &x, &cfg, s))?.value);
            let xy = lib(srmmd(&x, &y, &cfg, s))?.value;
            let yx = lib(srmmd(&y, &x, &cfg, s))?.value;
            sym_worst = sym_worst.max((xy - yx).abs());
        }
        let mut grad_worst = 0.0f64;
        for (k, eps) in [0.05, 0.01].into_iter().enumerate() {
            let cfg = SrmmdConfig { epsilon: eps, ..SrmmdConfig::default() };
            let x = cloud(&mut rng, 8, 2, 0.5, 0.0);
            let y = cloud(&mut rng, 8, 2, 0.5, 0.3);
            let seed = 11 + k as u64;
            let out = lib(srmmd_grad(&x, &y, &cfg, seed))?;
            let scale = out.grad_x.iter().chain(&out.grad_y).flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
            let h = 1e-5;
            for which in 0..2 {
                for i in 0..8 {
                    for d in 0..2 {
                        let (mut xp, mut yp, mut xm, mut ym) = (x.clone(), y.clone(), x.clone(), y.clone());
                        let (p, m) = if which == 0 { (&mut xp, &mut xm) } else { (&mut yp, &mut ym) };
                        p[i][d] += h;
                        m[i][d] -= h;
                        let fd = (lib(srmmd(&xp, &yp, &cfg, seed))?.value - lib(srmmd(&xm, &ym, &cfg, seed))?.value)
                            / (2.0 * h);
                        let a = if which == 0 { out.grad_x[i][d] } else { out.grad_y[i][d] };
                        grad_worst = grad_worst.max((fd - a).abs() / scale);
                    }
                }
            }
        }
        let mut marginal_worst = 0.0f64;
        let a = cloud(&mut rng, 20, 2, 1.0, 0.0);
        let b = cloud(&mut rng, 20, 2, 1.0, 0.0);
        for eps in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
            marginal_worst = marginal_worst.max(lib(sinkhorn(&a, &b, eps, 5000, 1e-9))?.marginal_violation);
        }
        let detail = format!(
            "self {self_worst:.1e}, symmetry {sym_worst:.1e}, gradient {grad_worst:.1e}, marginals {marginal_worst:.1e}"
        );
        if self_worst <= 1e-8 && sym_worst <= 1e-10 && grad_worst <= 1e-3 && marginal_worst <= 1e-6 {
            Ok(detail)
        } else {
            Err(detail)
        }
    })
}

fn dominated_with_tol(candidate: &[f64], by: &[f64], tol: f64) -> bool {
    by.iter().zip(candidate).all(|(a, b)| *a <= b + tol) && by.iter().zip(candidate).any(|(a, b)| *a < b - tol)
}

/// Strictly positive weighted-sum optima are non-dominated among all
/// vertices, for raw and for instance-normalized scalarization, each in its
/// own objective space.
pub fn weighted_sum_suite() -> SuiteResult {
    timed("weighted-sum-pareto", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7773_756d);
        let (mut solves, mut violations) = (0usize, 0usize);
        for _ in 0..100 {
            let n = rng.random_range(2..=8);
            let m = rng.random_range(1..=5);
            let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let b = rows.iter().map(|r| r.iter().sum::<f64>() * 0.5 + rng.random_range(0.05..0.5)).collect();
            let poly = lib(Polytope::new(rows, b, vec![(0.0, 1.0); n]))?;
            let t = rng.random_range(2..=3);
            let costs: Vec<Vec<f64>> = (0..t).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let normalized = lib(NormalizedCosts::new(&costs))?;
            let scaled: Vec<Vec<f64>> = (0..t).map(|j| normalized.values(j).to_vec()).collect();
            let vertices = enumerate_vertices(&poly);
            for _ in 0..5 {
                let raw: Vec<f64> = (0..t).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let w = lib(WeightVector::new(raw.iter().map(|v| v / total).collect()))?;
                for space in [&costs, &scaled] {
                    let c: Vec<f64> =
                        (0..n).map(|i| (0..t).map(|j| w.values()[j] * space[j][i]).sum()).collect();
                    let x = lib(solve_lp(&c, &poly))?.primal;
                    let fx: Vec<f64> = space.iter().map(|y| dot(y, &x)).collect();
                    solves += 1;
                    if vertices.iter().any(|v| {
                        let fv: Vec<f64> = space.iter().map(|y| dot(y, v)).collect();
                        dominated_with_tol(&fx, &fv, 1e-9)
                    }) {
                        violations += 1;
                    }
                }
            }
        }
        let detail = format!("{solves} scalarized optima, {violations} dominated");
        if violations == 0 {
            Ok(detail)
        } else {
            Err(detail)
        }
    })
}

fn random_front(rng: &mut ChaCha8Rng, t: usize) -> FrontApproximation {
    let k = rng.random_range(1..=8);
    let pts: Vec<ObjectiveVector> = (0..k)
        .map(|_| ObjectiveVector::new((0..t).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap())
        .collect();
    pareto_filter(&pts, Orientation::Min).expect("nonempty")
}

/// Inclusion–exclusion over every subset of points.
fn hv_inclusion_exclusion(points: &[Vec<f64>], r: &[f64]) -> f64 {
    let k = points.len();
    let mut total = 0.0;
    for mask in 1u32..(1 << k) {
        let mut vol = 1.0;
        for (d, rd) in r.iter().enumerate() {
            let m = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| points[i][d]).fold(f64::NEG_INFINITY, f64::max);
            vol *= (rd - m).max(0.0);
        }
        total += if mask.count_ones() % 2 == 1 { vol } else { -vol };
    }
    total
}

/// GD, MPFE and hypervolume against brute force on 50 random front pairs,
/// plus a 10⁶-sample Monte Carlo hypervolume estimate.
pub fn metric_oracle_suite() -> SuiteResult {
    timed("metric-oracles", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6d65_7472);
        let (mut exact_worst, mut mc_worst) = (0.0f64, 0.0f64);
        for pair in 0..50 {
            let t = 2 + pair % 2;
            let p = random_front(&mut rng, t);
            let q = random_front(&mut rng, t);
            let pv: Vec<Vec<f64>> = p.points.iter().map(|v| v.values().to_vec()).collect();
            let qv: Vec<Vec<f64>> = q.points.iter().map(|v| v.values().to_vec()).collect();
            let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let mut gd_bf = 0.0;
            for a in &pv {
                let mut best = f64::INFINITY;
                for b in &qv {
                    best = best.min(d2(a, b));
                }
                gd_bf += best;
            }
            gd_bf /= pv.len() as f64;
            let mut mpfe_bf = 0.0f64;
            for b in &qv {
                let mut best = f64::INFINITY;
                for a in &pv {
                    best = best.min(d2(a, b));
                }
                mpfe_bf = mpfe_bf.max(best);
            }
            let r = vec![1.1; t];
            let hv = lib(hypervolume(&p, &r))?.value;
            exact_worst = exact_worst
                .max((lib(gd(&p, &q))? - gd_bf).abs())
                .max((lib(mpfe(&p, &q, 2.0))? - mpfe_bf).abs())
                .max((hv - hv_inclusion_exclusion(&pv, &r)).abs());
            let lo: Vec<f64> = (0..t).map(|d| pv.iter().map(|v| v[d]).fold(f64::INFINITY, f64::min)).collect();
            let box_vol: f64 = lo.iter().zip(&r).map(|(a, b)| b - a).product();
            let samples = 1_000_000;
            let mut hits = 0usize;
            let mut s = vec![0.0; t];
            for _ in 0..samples {
                for d in 0..t {
                    s[d] = rng.random_range(lo[d]..r[d]);
                }
                if pv.iter().any(|v| v.iter().zip(&s).all(|(a, b)| a <= b)) {
                    hits += 1;
                }
            }
            let est = hits as f64 / samples as f64 * box_vol;
            mc_worst = mc_worst.max((est - hv).abs() / hv);
        }
        let detail = format!("exact worst {exact_worst:.1e}, Monte Carlo worst {:.3}%", 100.0 * mc_worst);
        if exact_worst <= 1e-9 && mc_worst <= 0.005 {
            Ok(detail)
        } else {
            Err(detail)
        }
    })
}

/// Minimizer of the weighted sum `w f¹ + (1−w) f²` by bisection on its
/// derivative.
fn weighted_minimizer(q: &QuadraticExample, w: f64) -> f64 {
    let deriv = |x: f64| 2.0 * q.a1 * x - (w * q.a2 + (1.0 - w) * q.a3);
    let (mut lo, mut hi) = (-1e3, 1e3);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if deriv(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Analytic Pareto interval against numerically located extreme
/// minimizers, grid dominance, and the overlap-ratio value at half the gap.
pub fn quadratic_suite() -> SuiteResult {
    timed("quadratic-example", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7175_6164);
        let (mut worst, mut grid_failures) = (0.0f64, 0usize);
        for _ in 0..20 {
            let a1 = rng.random_range(0.5..3.0);
            let a2 = rng.random_range(-3.0..3.0);
            let a3 = loop {
                let v: f64 = rng.random_range(-3.0..3.0);
                if (v - a2).abs() > 0.2 {
                    break v;
                }
            };
            let q = lib(QuadraticExample::new(a1, a2, a3))?;
            let (lo, hi) = q.pareto_interval();
            let e1 = weighted_minimizer(&q, 1.0);
            let e2 = weighted_minimizer(&q, 0.0);
            worst = worst.max((lo - e1.min(e2)).abs()).max((hi - e1.max(e2)).abs());
            if !q.grid_check(1e-3, 0.25).passed() {
                grid_failures += 1;
            }
        }
        let q = QuadraticExample { eps_prec: 1.0, ..lib(QuadraticExample::new(1.0, 2.0, 4.0))? };
        let ratio = lib(q.overlap_ratio())?;
        let detail = format!("interval error {worst:.1e}, grid failures {grid_failures}, overlap ratio {ratio}");
        if worst <= 1e-9 && grid_failures == 0 && ratio == 0.5 {
            Ok(detail)
        } else {
            Err(detail)
        }
    })
}

/// Small datasets of both benchmarks (bipartite with two and three
/// objectives, ad allocation).
pub fn verification_datasets() -> Result<Vec<(String, Dataset)>> {
    let bip = BipartiteConfig { nodes: 12, instances: 6, rho: 0.3, feature_dim: 4, ..BipartiteConfig::default() };
    let bip3 = BipartiteConfig { third_objective: true, seed: 1, ..bip.clone() };
    let ad = AdAllocConfig { nd: 10, nc: 8, k: 2, delta: vec![0.5, 0.3], thr: 0.1, ..AdAllocConfig::default() };
    Ok(vec![
        ("bipartite".into(), gen_bipartite(&bip)?),
        ("bipartite-3obj".into(), gen_bipartite(&bip3)?),
        ("ad-alloc".into(), gen_ad_alloc(&ad, 6)?),
    ])
}

/// Oracle predictions give zero front distance, unit hyper-area ratio, zero
/// regret and vanishing landscape and Pareto-set losses.
pub fn perfect_prediction_suite() -> SuiteResult {
    timed("perfect-prediction", None, || {
        let mut lines = Vec::new();
        let mut ok = true;
        for (name, ds) in lib(verification_datasets())? {
            let all: Vec<usize> = (0..ds.instances.len()).collect();
            let (row, _) = lib(evaluate_model(&ds, &all, &OracleModel, 5, "oracle"))?;
            let (cache, _) = lib(seed_cache(&ds, 50))?;
            let losses = lib(evaluate_losses(&ds, &all, &OracleModel, &cache, &TrainConfig::default(), 0.0))?;
            let pass = row.gd <= 1e-6
                && (row.har - 1.0).abs() <= 1e-6
                && row.r.abs() <= 1e-6
                && losses.landscape <= 1e-6
                && losses.pareto_set <= 1e-9;
            ok &= pass;
            lines.push(format!(
                "{name}: GD {:.1e} HAR {:.6} ({} undefined) r {:.1e} L_l {:.1e} L_ps {:.1e}",
                row.gd, row.har, row.har_skipped, row.r, losses.landscape, losses.pareto_set
            ));
        }
        let detail = lines.join("; ");
        if ok {
            Ok(detail)
        } else {
            Err(detail)
        }
    })
}

/// Exact inference solutions of oracle and untrained-network predictions are
/// integral on matching and allocation instances.
pub fn integrality_suite() -> SuiteResult {
    timed("integrality", None, || {
        let mut worst = 0.0f64;
        let mut count = 0;
        for (_, ds) in lib(verification_datasets())? {
            let all: Vec<usize> = (0..ds.instances.len()).collect();
            let arch = Architecture::default_for(ds.feature_dim(), ds.t_objectives());
            let net = MlpModel { params: lib(PredictorParams::init(arch, 3))?, link: Link::for_kind(ds.cost_kind) };
            for model in [&OracleModel as &dyn crate::predictor::CostModel, &net] {
                let (_, per) = lib(evaluate_model(&ds, &all, model, 5, "check"))?;
                for m in per {
                    worst = worst.max(m.integrality_gap);
                    count += 1;
                }
            }
        }
        let detail = format!("{count} instance evaluations, worst distance to integers {worst:.1e}");
        if worst <= 1e-7 {
            Ok(detail)
        } else {
            Err(detail)
        }
    })
}

/// Two short training runs with one seed log identical losses.
pub fn determinism_suite() -> SuiteResult {
    timed("determinism", None, || {
        let ds = lib(gen_bipartite(&BipartiteConfig {
            nodes: 8,
            instances: 8,
            rho: 0.3,
            feature_dim: 4,
            ..BipartiteConfig::default()
        }))?;
        let cfg = TrainConfig { max_epochs: 3, trunk: vec![16], head: vec![16], ..TrainConfig::default() };
        let a = lib(train_modfl(&ds, &cfg))?;
        let b = lib(train_modfl(&ds, &cfg))?;
        if loss_trace(&a.log) == loss_trace(&b.log) && a.params == b.params {
            Ok(format!("{} epochs identical", a.log.len()))
        } else {
            Err("loss logs differ between identical runs".into())
        }
    })
}

/// Every suite in order.
pub fn run_all() -> Report {
    Report {
        suites: vec![
            dslp_gradient_suite(),
            srmmd_suite(),
            weighted_sum_suite(),
            metric_oracle_suite(),
            quadratic_suite(),
            perfect_prediction_suite(),
            integrality_suite(),
            determinism_suite(),
        ],
    }
}
