//! Entropic optimal transport, soft rank maps and the sRMMD statistic.
//!
//! All Sinkhorn updates run in the log domain. Small regularization values are
//! reached by annealing: potentials are warm-started through a decade
//! schedule `start, start/10, …, ε`. The differentiable statistic unrolls a
//! fixed iteration schedule and propagates gradients through every update.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Gaussian mixture kernel `k(a,b) = (1/S) Σ_σ exp(−‖a−b‖²/(2σ²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub bandwidths: Vec<f64>,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec { bandwidths: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0] }
    }
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bandwidths.is_empty() || self.bandwidths.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config("kernel bandwidths must be positive".into()));
        }
        Ok(())
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2 = sq_dist(a, b);
        self.bandwidths.iter().map(|s| (-d2 / (2.0 * s * s)).exp()).sum::<f64>() / self.bandwidths.len() as f64
    }

    /// `∇_a k(a, b)`.
    fn grad_a(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let d2 = sq_dist(a, b);
        let coef: f64 = self
            .bandwidths
            .iter()
            .map(|s| -(-d2 / (2.0 * s * s)).exp() / (s * s))
            .sum::<f64>()
            / self.bandwidths.len() as f64;
        a.iter().zip(b).map(|(x, y)| coef * (x - y)).collect()
    }
}

/// Dual potentials of an entropic transport problem.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropicPotentials {
    /// Source potentials.
    pub u: Vec<f64>,
    /// Target potentials.
    pub v: Vec<f64>,
    pub epsilon: f64,
    pub iterations: usize,
    /// Largest relative deviation of a coupling marginal from its weight.
    pub marginal_violation: f64,
}

impl EntropicPotentials {
    /// Coupling `P_ij = a_i b_j exp((u_i + v_j − C_ij)/ε)` for uniform weights.
    pub fn coupling(&self, source: &[Vec<f64>], target: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let la = -(source.len() as f64).ln();
        let lb = -(target.len() as f64).ln();
        source
            .iter()
            .enumerate()
            .map(|(i, x)| {
                target
                    .iter()
                    .enumerate()
                    .map(|(j, y)| (la + lb + (self.u[i] + self.v[j] - 0.5 * sq_dist(x, y)) / self.epsilon).exp())
                    .collect()
            })
            .collect()
    }
}

/// Iteration budget of the unrolled solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornSchedule {
    pub start_epsilon: f64,
    pub anneal_iters: usize,
    pub final_iters: usize,
}

impl Default for SinkhornSchedule {
    fn default() -> Self {
        SinkhornSchedule { start_epsilon: 0.1, anneal_iters: 50, final_iters: 200 }
    }
}

impl SinkhornSchedule {
    /// `(ε, iterations)` per stage, ending at `target`.
    pub fn stages(&self, target: f64) -> Vec<(f64, usize)> {
        let mut out = Vec::new();
        let mut eps = self.start_epsilon;
        while eps > target * (1.0 + 1e-9) {
            out.push((eps, self.anneal_iters));
            eps /= 10.0;
        }
        out.push((target, self.final_iters));
        out
    }

    pub fn total_iterations(&self, target: f64) -> usize {
        self.stages(target).iter().map(|s| s.1).sum()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lse(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn check_points(points: &[Vec<f64>], what: &'static str) -> Result<usize> {
    let d = points.first().ok_or(Error::EmptyFront(what))?.len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::dim(what, d, p.len()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(d)
}

fn cost_matrix(source: &[Vec<f64>], target: &[Vec<f64>]) -> Vec<Vec<f64>> {
    source.iter().map(|x| target.iter().map(|y| 0.5 * sq_dist(x, y)).collect()).collect()
}

/// Log-domain Sinkhorn state for weights `a`, `b` and cost `C`.
struct Problem<'a> {
    cost: &'a [Vec<f64>],
    loga: &'a [f64],
    logb: &'a [f64],
}

impl Problem<'_> {
    fn update_f(&self, g: &[f64], eps: f64, f: &mut [f64]) {
        for (i, fi) in f.iter_mut().enumerate() {
            let row = &self.cost[i];
            *fi = -eps * lse((0..g.len()).map(|j| (g[j] - row[j]) / eps + self.logb[j]));
        }
    }

    fn update_g(&self, f: &[f64], eps: f64, g: &mut [f64]) {
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = -eps * lse((0..f.len()).map(|i| (f[i] - self.cost[i][j]) / eps + self.loga[i]));
        }
    }

    fn plan(&self, f: &[f64], g: &[f64], eps: f64) -> Vec<Vec<f64>> {
        (0..f.len())
            .map(|i| {
                (0..g.len())
                    .map(|j| (self.loga[i] + self.logb[j] + (f[i] + g[j] - self.cost[i][j]) / eps).exp())
                    .collect()
            })
            .collect()
    }

    /// Largest relative error of a row or column sum of the coupling.
    fn violation(&self, f: &[f64], g: &[f64], eps: f64) -> f64 {
        let p = self.plan(f, g, eps);
        let mut worst = 0.0f64;
        for (i, row) in p.iter().enumerate() {
            worst = worst.max((row.iter().sum::<f64>() / self.loga[i].exp() - 1.0).abs());
        }
        for j in 0..g.len() {
            worst = worst.max((p.iter().map(|r| r[j]).sum::<f64>() / self.logb[j].exp() - 1.0).abs());
        }
        worst
    }

    /// Semi-dual objective `Σ a_i f_i(g) + Σ b_j g_j` (concave in `g`).
    fn semi_dual(&self, g: &[f64], eps: f64, f: &mut [f64]) -> f64 {
        self.update_f(g, eps, f);
        (0..f.len()).map(|i| self.loga[i].exp() * f[i]).sum::<f64>()
            + (0..g.len()).map(|j| self.logb[j].exp() * g[j]).sum::<f64>()
    }

    /// Damped Newton ascent on the semi-dual; returns (iterations, violation).
    fn newton(&self, f: &mut [f64], g: &mut [f64], eps: f64, tol: f64, max_iter: usize) -> (usize, f64) {
        let m = g.len();
        let mut value = self.semi_dual(g, eps, f);
        let mut violation = self.violation(f, g, eps);
        let mut it = 0;
        while it < max_iter && violation > tol && m > 1 {
            it += 1;
            let p = self.plan(f, g, eps);
            let col: Vec<f64> = (0..m).map(|j| p.iter().map(|r| r[j]).sum()).collect();
            let grad: Vec<f64> = (0..m).map(|j| self.logb[j].exp() - col[j]).collect();
            // Negated Hessian times ε, with g_0 held fixed to remove the constant shift.
            let k = m - 1;
            let mut h = DMatrix::<f64>::zeros(k, k);
            for a in 0..k {
                for b in 0..k {
                    let s: f64 = p.iter().zip(self.loga).map(|(r, la)| r[a + 1] * r[b + 1] / la.exp()).sum();
                    h[(a, b)] = -s;
                }
                h[(a, a)] += col[a + 1] + 1e-14;
            }
            let rhs = DVector::from_iterator(k, (1..m).map(|j| eps * grad[j]));
            let dir = match h.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => match h.lu().solve(&rhs) {
                    Some(d) => d,
                    None => break,
                },
            };
            let slope: f64 = (0..k).map(|a| grad[a + 1] * dir[a]).sum();
            let mut step = 1.0;
            let mut trial = g.to_vec();
            let mut accepted = false;
            for _ in 0..40 {
                for a in 0..k {
                    trial[a + 1] = g[a + 1] + step * dir[a];
                }
                let v = self.semi_dual(&trial, eps, f);
                if v >= value + 1e-4 * step * slope {
                    value = v;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                self.update_f(g, eps, f);
                break;
            }
            g.copy_from_slice(&trial);
            violation = self.violation(f, g, eps);
        }
        (it, violation)
    }
}

/// Entropic transport between uniform point clouds with cost `½‖φ−ψ‖²`.
///
/// Every annealing stage runs at most `max_iter` Sinkhorn iterations, stopping
/// once the marginal violation is at most `tol`. If the final stage is still
/// above `tol`, Newton steps on the target potential finish the solve.
pub fn sinkhorn(
    source: &[Vec<f64>],
    target: &[Vec<f64>],
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<EntropicPotentials> {
    let d = check_points(source, "sinkhorn source")?;
    let dt = check_points(target, "sinkhorn target")?;
    if d != dt {
        return Err(Error::dim("sinkhorn target dimension", d, dt));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let cost = cost_matrix(source, target);
    let loga = vec![-(source.len() as f64).ln(); source.len()];
    let logb = vec![-(target.len() as f64).ln(); target.len()];
    let prob = Problem { cost: &cost, loga: &loga, logb: &logb };
    let mut f = vec![0.0; source.len()];
    let mut g = vec![0.0; target.len()];
    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    let stages = SinkhornSchedule { start_epsilon: 0.1, anneal_iters: max_iter, final_iters: max_iter }.stages(epsilon);
    let last = stages.len() - 1;
    for (s, (eps, budget)) in stages.into_iter().enumerate() {
        violation = f64::INFINITY;
        for t in 0..budget {
            prob.update_f(&g, eps, &mut f);
            prob.update_g(&f, eps, &mut g);
            iterations += 1;
            if t % 5 == 4 || t + 1 == budget {
                violation = prob.violation(&f, &g, eps);
                if violation <= tol {
                    break;
                }
            }
        }
        if s == last && violation > tol {
            let (it, v) = prob.newton(&mut f, &mut g, eps, tol, 50);
            iterations += it;
            violation = v;
        }
    }
    if f.iter().chain(&g).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sinkhorn potentials"));
    }
    Ok(EntropicPotentials { u: f, v: g, epsilon, iterations, marginal_violation: violation })
}

/// Entropic transport map onto a fixed set of target samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftRankMap {
    pub targets: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    pub epsilon: f64,
}

impl SoftRankMap {
    /// Fits the map from `source` samples to `targets`.
    pub fn fit(source: &[Vec<f64>], targets: Vec<Vec<f64>>, epsilon: f64, max_iter: usize, tol: f64) -> Result<Self> {
        let pot = sinkhorn(source, &targets, epsilon, max_iter, tol)?;
        Ok(SoftRankMap { targets, v: pot.v, epsilon })
    }

    /// Fits against `n` uniform samples of `[0,1]^d` drawn from `seed`.
    pub fn fit_uniform(source: &[Vec<f64>], seed: u64, epsilon: f64, max_iter: usize, tol: f64) -> Result<Self> {
        let d = check_points(source, "soft rank source")?;
        let targets = uniform_targets(source.len(), d, seed);
        Self::fit(source, targets, epsilon, max_iter, tol)
    }

    pub fn rank(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let d = self.targets[0].len();
        if phi.len() != d {
            return Err(Error::dim("soft rank point", d, phi.len()));
        }
        Ok(soft_rank_weights(phi, &self.targets, &self.v, self.epsilon).1)
    }
}

/// Softmax weights over targets and the mapped point.
fn soft_rank_weights(phi: &[f64], targets: &[Vec<f64>], v: &[f64], eps: f64) -> (Vec<f64>, Vec<f64>) {
    let logits: Vec<f64> = targets.iter().zip(v).map(|(t, vj)| (vj - 0.5 * sq_dist(phi, t)) / eps).collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= s;
    }
    let mut out = vec![0.0; phi.len()];
    for (wj, t) in w.iter().zip(targets) {
        for (o, tk) in out.iter_mut().zip(t) {
            *o += wj * tk;
        }
    }
    (w, out)
}

/// `n` seeded samples of `Unif([0,1]^d)`.
pub fn uniform_targets(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, Stream::OtSampling, 0);
    (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Settings of the sRMMD statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrmmdConfig {
    /// Mixture weight of the first sample set.
    pub tau: f64,
    pub epsilon: f64,
    pub kernel: KernelSpec,
    pub schedule: SinkhornSchedule,
}

impl Default for SrmmdConfig {
    fn default() -> Self {
        SrmmdConfig { tau: 0.5, epsilon: 1e-5, kernel: KernelSpec::default(), schedule: SinkhornSchedule::default() }
    }
}

impl SrmmdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau must lie in (0,1), got {}", self.tau)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.schedule.final_iters == 0 {
            return Err(Error::Config("final Sinkhorn iterations must be positive".into()));
        }
        self.kernel.validate()
    }
}

/// Value of the statistic, with gradients when requested.
#[derive(Debug, Clone, PartialEq)]
pub struct SrmmdOutput {
    pub value: f64,
    pub grad_x: Vec<Vec<f64>>,
    pub grad_y: Vec<Vec<f64>>,
    /// All pooled samples coincide; the value is 0 by definition.
    pub degenerate: bool,
    /// Unrolled Sinkhorn iterations.
    pub iterations: usize,
    pub marginal_violation: f64,
}

/// Kernel MMD² between the soft ranks of `x` and `y` under one rank map fit
/// on the pooled mixture `τ P_X + (1−τ) P_Y`.
pub fn srmmd(x: &[Vec<f64>], y: &[Vec<f64>], cfg: &SrmmdConfig, seed: u64) -> Result<SrmmdOutput> {
    srmmd_impl(x, y, cfg, seed, false)
}

/// [`srmmd`] plus exact gradients of the unrolled computation.
pub fn srmmd_grad(x: &[Vec<f64>], y: &[Vec<f64>], cfg: &SrmmdConfig, seed: u64) -> Result<SrmmdOutput> {
    srmmd_impl(x, y, cfg, seed, true)
}

fn srmmd_impl(x: &[Vec<f64>], y: &[Vec<f64>], cfg: &SrmmdConfig, seed: u64, want_grad: bool) -> Result<SrmmdOutput> {
    cfg.validate()?;
    let d = check_points(x, "srmmd X")?;
    let dy = check_points(y, "srmmd Y")?;
    if d != dy {
        return Err(Error::dim("srmmd Y dimension", d, dy));
    }
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::dim("srmmd sample count (min)", 2, x.len().min(y.len())));
    }
    let (m, n) = (x.len(), y.len());
    let zeros = |k: usize| vec![vec![0.0; d]; k];

    // Pool in a canonical order so the statistic ignores input order.
    let mut pool: Vec<(&[f64], f64, bool, usize)> = x
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_slice(), cfg.tau / m as f64, true, i))
        .chain(y.iter().enumerate().map(|(i, p)| (p.as_slice(), (1.0 - cfg.tau) / n as f64, false, i)))
        .collect();
    pool.sort_by(|a, b| {
        a.0.iter()
            .zip(b.0)
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.total_cmp(&b.1))
    });
    let first = pool[0].0;
    let degenerate = pool.iter().all(|p| sq_dist(p.0, first) < 1e-24);
    let total_iters = cfg.schedule.total_iterations(cfg.epsilon);
    if degenerate {
        return Ok(SrmmdOutput {
            value: 0.0,
            grad_x: zeros(m),
            grad_y: zeros(n),
            degenerate: true,
            iterations: total_iters,
            marginal_violation: 0.0,
        });
    }

    let big_n = m + n;
    let points: Vec<Vec<f64>> = pool.iter().map(|p| p.0.to_vec()).collect();
    let loga: Vec<f64> = pool.iter().map(|p| p.1.ln()).collect();
    let targets = uniform_targets(big_n, d, seed);
    let logb = vec![-(big_n as f64).ln(); big_n];
    let cost = cost_matrix(&points, &targets);
    let prob = Problem { cost: &cost, loga: &loga, logb: &logb };

    // Unrolled forward pass; every iterate is kept for the reverse sweep.
    let stages = cfg.schedule.stages(cfg.epsilon);
    let mut g = vec![0.0; big_n];
    let mut f = vec![0.0; big_n];
    let mut tape: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    for &(eps, iters) in &stages {
        for _ in 0..iters {
            let g_in = g.clone();
            prob.update_f(&g, eps, &mut f);
            prob.update_g(&f, eps, &mut g);
            if want_grad {
                tape.push((eps, g_in, f.clone()));
            }
        }
    }
    if f.iter().chain(&g).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sinkhorn potentials"));
    }
    let eps = cfg.epsilon;
    let violation = prob.violation(&f, &g, eps);

    let mapped: Vec<(Vec<f64>, Vec<f64>)> =
        points.iter().map(|p| soft_rank_weights(p, &targets, &g, eps)).collect();
    let rx: Vec<usize> = (0..big_n).filter(|&k| pool[k].2).collect();
    let ry: Vec<usize> = (0..big_n).filter(|&k| !pool[k].2).collect();
    let k = &cfg.kernel;
    let mean_k = |a: &[usize], b: &[usize]| -> f64 {
        let mut s = 0.0;
        for &i in a {
            for &j in b {
                s += k.eval(&mapped[i].1, &mapped[j].1);
            }
        }
        s / (a.len() * b.len()) as f64
    };
    let raw = mean_k(&rx, &rx) + mean_k(&ry, &ry) - 2.0 * mean_k(&rx, &ry);
    let value = raw.max(0.0);
    let mut out = SrmmdOutput {
        value,
        grad_x: zeros(m),
        grad_y: zeros(n),
        degenerate: false,
        iterations: total_iters,
        marginal_violation: violation,
    };
    if !want_grad || raw < 0.0 {
        return Ok(out);
    }

    // dL/dR for every pooled point.
    let mut g_rank = vec![vec![0.0; d]; big_n];
    let add = |acc: &mut Vec<f64>, v: Vec<f64>, s: f64| {
        for (a, b) in acc.iter_mut().zip(v) {
            *a += s * b;
        }
    };
    let (fm, fn_) = (m as f64, n as f64);
    for &i in &rx {
        for &j in &rx {
            add(&mut g_rank[i], k.grad_a(&mapped[i].1, &mapped[j].1), 2.0 / (fm * fm));
        }
        for &j in &ry {
            add(&mut g_rank[i], k.grad_a(&mapped[i].1, &mapped[j].1), -2.0 / (fm * fn_));
        }
    }
    for &i in &ry {
        for &j in &ry {
            add(&mut g_rank[i], k.grad_a(&mapped[i].1, &mapped[j].1), 2.0 / (fn_ * fn_));
        }
        for &j in &rx {
            add(&mut g_rank[i], k.grad_a(&mapped[i].1, &mapped[j].1), -2.0 / (fm * fn_));
        }
    }

    // Through the rank map: logits (g_j − C_kj)/ε.
    let mut g_cost = vec![vec![0.0; big_n]; big_n];
    let mut gg = vec![0.0; big_n];
    for kk in 0..big_n {
        let (w, r) = &mapped[kk];
        for j in 0..big_n {
            let gl: f64 = w[j] * targets[j].iter().zip(r).zip(&g_rank[kk]).map(|((t, ri), gr)| (t - ri) * gr).sum::<f64>();
            gg[j] += gl / eps;
            g_cost[kk][j] -= gl / eps;
        }
    }

    // Reverse sweep through the Sinkhorn iterations.
    let mut g_out = g;
    for (eps, g_in, f_k) in tape.into_iter().rev() {
        let mut gf = vec![0.0; big_n];
        for j in 0..big_n {
            if gg[j] == 0.0 {
                continue;
            }
            for i in 0..big_n {
                let p = (loga[i] + (f_k[i] + g_out[j] - cost[i][j]) / eps).exp();
                gf[i] -= gg[j] * p;
                g_cost[i][j] += gg[j] * p;
            }
        }
        let mut gg_in = vec![0.0; big_n];
        for i in 0..big_n {
            if gf[i] == 0.0 {
                continue;
            }
            for j in 0..big_n {
                let q = (logb[j] + (f_k[i] + g_in[j] - cost[i][j]) / eps).exp();
                gg_in[j] -= gf[i] * q;
                g_cost[i][j] += gf[i] * q;
            }
        }
        gg = gg_in;
        g_out = g_in;
    }

    for kk in 0..big_n {
        let mut gp = vec![0.0; d];
        for j in 0..big_n {
            for (t, (pk, tj)) in gp.iter_mut().zip(points[kk].iter().zip(&targets[j])) {
                *t += g_cost[kk][j] * (pk - tj);
            }
        }
        let (_, _, is_x, idx) = pool[kk];
        if is_x {
            out.grad_x[idx] = gp;
        } else {
            out.grad_y[idx] = gp;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut ChaCha8Rng, k: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
        (0..k).map(|_| (0..d).map(|_| scale * rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn single_pair_is_trivial() {
        let p = sinkhorn(&[vec![0.0]], &[vec![0.0]], 1e-3, 100, 1e-12).unwrap();
        assert!(p.marginal_violation < 1e-12);
        let c = p.coupling(&[vec![0.0]], &[vec![0.0]]);
        assert!((c[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_clouds_couple_points_to_themselves() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = cloud(&mut rng, 6, 2, 1.0);
        let p = sinkhorn(&pts, &pts, 1e-3, 5000, 1e-9).unwrap();
        let c = p.coupling(&pts, &pts);
        for (i, row) in c.iter().enumerate() {
            let best = (0..6).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(best, i);
        }
    }

    #[test]
    fn marginals_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = cloud(&mut rng, 20, 2, 1.0);
        let b = cloud(&mut rng, 20, 2, 1.0);
        for eps in [1e-1, 1e-3, 1e-5] {
            let p = sinkhorn(&a, &b, eps, 5000, 1e-9).unwrap();
            let c = p.coupling(&a, &b);
            for row in &c {
                assert!((row.iter().sum::<f64>() - 0.05).abs() < 1e-6);
            }
            for j in 0..20 {
                assert!((c.iter().map(|r| r[j]).sum::<f64>() - 0.05).abs() < 1e-6);
            }
            assert!(p.marginal_violation <= 1e-6);
        }
    }

    #[test]
    fn rank_of_median_in_one_dimension() {
        let src = vec![vec![1.0], vec![2.0], vec![3.0]];
        let targets = vec![vec![1.0 / 6.0], vec![0.5], vec![5.0 / 6.0]];
        let map = SoftRankMap::fit(&src, targets, 1e-2, 5000, 1e-10).unwrap();
        assert!((map.rank(&[2.0]).unwrap()[0] - 0.5).abs() < 0.05);
    }

    #[test]
    fn ranks_are_translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = cloud(&mut rng, 10, 2, 1.0);
        let shifted: Vec<Vec<f64>> = x.iter().map(|p| vec![p[0] + 3.0, p[1] - 2.0]).collect();
        let a = SoftRankMap::fit_uniform(&x, 9, 0.05, 20000, 1e-13).unwrap();
        let b = SoftRankMap::fit_uniform(&shifted, 9, 0.05, 20000, 1e-13).unwrap();
        for (p, q) in x.iter().zip(&shifted) {
            let (ra, rb) = (a.rank(p).unwrap(), b.rank(q).unwrap());
            for (u, v) in ra.iter().zip(&rb) {
                assert!((u - v).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn single_target_maps_everything_to_it() {
        let map = SoftRankMap::fit(&[vec![0.3, 0.1], vec![5.0, 2.0]], vec![vec![0.25, 0.75]], 0.1, 100, 1e-12).unwrap();
        assert_eq!(map.rank(&[9.0, -3.0]).unwrap(), vec![0.25, 0.75]);
    }

    #[test]
    fn ranks_stay_in_the_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = cloud(&mut rng, 12, 3, 10.0);
        let map = SoftRankMap::fit_uniform(&x, 1, 1e-3, 2000, 1e-8).unwrap();
        for p in &x {
            assert!(map.rank(p).unwrap().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn srmmd_basic_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = cloud(&mut rng, 8, 2, 1.0);
        let y = cloud(&mut rng, 8, 2, 1.0);
        let cfg = SrmmdConfig::default();
        assert!(srmmd(&x, &x, &cfg, 1).unwrap().value <= 1e-8);
        let xy = srmmd(&x, &y, &cfg, 1).unwrap().value;
        let yx = srmmd(&y, &x, &cfg, 1).unwrap().value;
        assert!((xy - yx).abs() <= 1e-10);
        let mut perm = x.clone();
        perm.reverse();
        assert!((srmmd(&perm, &y, &cfg, 1).unwrap().value - xy).abs() <= 1e-12);
        let far: Vec<Vec<f64>> = x.iter().map(|p| vec![p[0] + 10.0, p[1] + 10.0]).collect();
        let near: Vec<Vec<f64>> = x.iter().map(|p| vec![p[0] + 0.1, p[1] + 0.1]).collect();
        assert!(srmmd(&x, &far, &cfg, 1).unwrap().value > srmmd(&x, &near, &cfg, 1).unwrap().value);
    }

    #[test]
    fn degenerate_pool_is_flagged() {
        let z = vec![vec![0.0, 0.0]; 4];
        let out = srmmd_grad(&z, &z, &SrmmdConfig::default(), 3).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.value, 0.0);
        assert!(out.grad_x.iter().flatten().all(|v| v.is_finite()));
    }

    fn fd_check(cfg: &SrmmdConfig, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = cloud(&mut rng, 8, 2, 0.5);
        let y = cloud(&mut rng, 8, 2, 0.5).into_iter().map(|p| vec![p[0] + 0.3, p[1]]).collect::<Vec<_>>();
        let out = srmmd_grad(&x, &y, cfg, 11).unwrap();
        let h = 1e-5;
        let mut worst = 0.0f64;
        let scale = out.grad_x.iter().chain(&out.grad_y).flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        for which in 0..2 {
            for i in 0..8 {
                for k in 0..2 {
                    let (mut xp, mut yp, mut xm, mut ym) = (x.clone(), y.clone(), x.clone(), y.clone());
                    if which == 0 {
                        xp[i][k] += h;
                        xm[i][k] -= h;
                    } else {
                        yp[i][k] += h;
                        ym[i][k] -= h;
                    }
                    let fd = (srmmd(&xp, &yp, cfg, 11).unwrap().value - srmmd(&xm, &ym, cfg, 11).unwrap().value) / (2.0 * h);
                    let a = if which == 0 { out.grad_x[i][k] } else { out.grad_y[i][k] };
                    worst = worst.max((fd - a).abs() / scale.max(1e-12));
                }
            }
        }
        assert!(worst <= 1e-3, "worst relative error {worst}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = SrmmdConfig { epsilon: 0.05, ..SrmmdConfig::default() };
        fd_check(&cfg, 21);
        let cfg = SrmmdConfig { epsilon: 0.01, ..SrmmdConfig::default() };
        fd_check(&cfg, 22);
    }

    #[test]
    fn identical_sets_have_vanishing_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = cloud(&mut rng, 8, 2, 1.0);
        let out = srmmd_grad(&x, &x, &SrmmdConfig { epsilon: 0.05, ..SrmmdConfig::default() }, 2).unwrap();
        let norm: f64 = out.grad_x.iter().chain(&out.grad_y).flatten().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= 1e-6);
    }
}
