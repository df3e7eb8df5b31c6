//! Primal-dual interior-point method for `min c·x + γ‖x‖²` over a polytope.
//!
//! Mehrotra predictor-corrector steps. The Newton system is reduced to the
//! primal variables; since the Hessian plus bound barrier terms is diagonal,
//! the general rows enter through a Woodbury identity and only an `m × m`
//! Cholesky factorization is needed per iteration. After convergence the
//! solution is polished by solving the equality-constrained QP on the
//! detected active set, which removes the residual barrier bias.

use nalgebra::{DMatrix, DVector};

use super::{LpSolution, Polytope};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub polish: bool,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions { max_iter: 100, tol: 1e-9, polish: true }
    }
}

#[derive(Clone)]
struct State {
    x: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    sl: Vec<f64>,
    zl: Vec<f64>,
    su: Vec<f64>,
    zu: Vec<f64>,
}

struct Residuals {
    rd: Vec<f64>,
    rp: Vec<f64>,
    rpl: Vec<f64>,
    rpu: Vec<f64>,
}

struct Direction {
    dx: Vec<f64>,
    ds: Vec<f64>,
    dz: Vec<f64>,
    dsl: Vec<f64>,
    dzl: Vec<f64>,
    dsu: Vec<f64>,
    dzu: Vec<f64>,
}

struct Problem<'a> {
    c: &'a [f64],
    poly: &'a Polytope,
    gamma: f64,
    lower: Vec<usize>,
    upper: Vec<usize>,
}

impl Problem<'_> {
    fn residuals(&self, st: &State) -> Residuals {
        let n = self.poly.n;
        let mut rd: Vec<f64> = (0..n).map(|j| self.c[j] + 2.0 * self.gamma * st.x[j]).collect();
        for (row, zi) in self.poly.rows.iter().zip(&st.z) {
            for (r, a) in rd.iter_mut().zip(row) {
                *r += a * zi;
            }
        }
        for (k, &j) in self.lower.iter().enumerate() {
            rd[j] -= st.zl[k];
        }
        for (k, &j) in self.upper.iter().enumerate() {
            rd[j] += st.zu[k];
        }
        let act = self.poly.row_activity(&st.x);
        let rp = act.iter().zip(&self.poly.b).zip(&st.s).map(|((a, b), s)| a + s - b).collect();
        let rpl = self
            .lower
            .iter()
            .enumerate()
            .map(|(k, &j)| self.poly.bounds[j].0 - st.x[j] + st.sl[k])
            .collect();
        let rpu = self
            .upper
            .iter()
            .enumerate()
            .map(|(k, &j)| st.x[j] - self.poly.bounds[j].1 + st.su[k])
            .collect();
        Residuals { rd, rp, rpl, rpu }
    }

    fn mu(&self, st: &State) -> f64 {
        let total = st.s.len() + st.sl.len() + st.su.len();
        if total == 0 {
            return 0.0;
        }
        let sum: f64 = dotp(&st.s, &st.z) + dotp(&st.sl, &st.zl) + dotp(&st.su, &st.zu);
        sum / total as f64
    }

    /// Solves the Newton system for complementarity targets `rc* = s∘z − target`.
    fn direction(&self, st: &State, res: &Residuals, rc: &[f64], rcl: &[f64], rcu: &[f64]) -> Result<Direction> {
        let n = self.poly.n;
        let m = self.poly.m();
        let mut d0 = vec![2.0 * self.gamma; n];
        let mut rhs: Vec<f64> = res.rd.iter().map(|v| -v).collect();
        for (k, &j) in self.lower.iter().enumerate() {
            d0[j] += st.zl[k] / st.sl[k];
            rhs[j] += (-rcl[k] + st.zl[k] * res.rpl[k]) / st.sl[k];
        }
        for (k, &j) in self.upper.iter().enumerate() {
            d0[j] += st.zu[k] / st.su[k];
            rhs[j] -= (-rcu[k] + st.zu[k] * res.rpu[k]) / st.su[k];
        }
        // −Gᵀ S⁻¹(−rc + Z rp)
        for i in 0..m {
            let w = (-rc[i] + st.z[i] * res.rp[i]) / st.s[i];
            for (r, a) in rhs.iter_mut().zip(&self.poly.rows[i]) {
                *r -= a * w;
            }
        }
        let dx = woodbury_solve(&d0, &self.poly.rows, &st.s, &st.z, &rhs)?;
        let gdx = self.poly.row_activity(&dx);
        let ds: Vec<f64> = (0..m).map(|i| -res.rp[i] - gdx[i]).collect();
        let dz: Vec<f64> = (0..m).map(|i| (-rc[i] - st.z[i] * ds[i]) / st.s[i]).collect();
        let dsl: Vec<f64> = self.lower.iter().enumerate().map(|(k, &j)| -res.rpl[k] + dx[j]).collect();
        let dzl: Vec<f64> = (0..self.lower.len()).map(|k| (-rcl[k] - st.zl[k] * dsl[k]) / st.sl[k]).collect();
        let dsu: Vec<f64> = self.upper.iter().enumerate().map(|(k, &j)| -res.rpu[k] - dx[j]).collect();
        let dzu: Vec<f64> = (0..self.upper.len()).map(|k| (-rcu[k] - st.zu[k] * dsu[k]) / st.su[k]).collect();
        Ok(Direction { dx, ds, dz, dsl, dzl, dsu, dzu })
    }
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `(diag(d0) + Gᵀ diag(z/s) G) x = r`, with a few rounds of
/// iterative refinement: near the boundary dependent active rows leave the
/// `m × m` Woodbury matrix badly conditioned.
fn woodbury_solve(d0: &[f64], g: &[Vec<f64>], s: &[f64], z: &[f64], r: &[f64]) -> Result<Vec<f64>> {
    let n = d0.len();
    let m = g.len();
    if m == 0 {
        return Ok((0..n).map(|j| r[j] / d0[j]).collect());
    }
    // K = diag(s/z) + G D0⁻¹ Gᵀ
    let mut k = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for l in i..m {
            let v: f64 = (0..n).map(|j| g[i][j] * g[l][j] / d0[j]).sum();
            k[(i, l)] = v;
            k[(l, i)] = v;
        }
        k[(i, i)] += s[i] / z[i];
    }
    let chol = k.clone().cholesky();
    let lu = if chol.is_none() { Some(k.lu()) } else { None };
    let apply_inverse = |r: &[f64]| -> Result<Vec<f64>> {
        let y: Vec<f64> = (0..n).map(|j| r[j] / d0[j]).collect();
        let gy = DVector::from_iterator(m, g.iter().map(|row| dotp(row, &y)));
        let w = match (&chol, &lu) {
            (Some(ch), _) => ch.solve(&gy),
            (None, Some(lu)) => lu.solve(&gy).ok_or(Error::SingularKkt { condition: f64::INFINITY })?,
            _ => unreachable!(),
        };
        let mut x = y;
        for i in 0..m {
            for j in 0..n {
                x[j] -= g[i][j] * w[i] / d0[j];
            }
        }
        Ok(x)
    };
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut out: Vec<f64> = (0..n).map(|j| d0[j] * x[j]).collect();
        for i in 0..m {
            let w = z[i] / s[i] * dotp(&g[i], x);
            for j in 0..n {
                out[j] += g[i][j] * w;
            }
        }
        out
    };
    let rnorm = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut x = apply_inverse(r)?;
    for _ in 0..3 {
        let ax = apply(&x);
        let resid: Vec<f64> = (0..n).map(|j| r[j] - ax[j]).collect();
        if resid.iter().fold(0.0f64, |a, v| a.max(v.abs())) <= 1e-14 * rnorm.max(1e-300) {
            break;
        }
        let dx = apply_inverse(&resid)?;
        for j in 0..n {
            x[j] += dx[j];
        }
    }
    Ok(x)
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1.0, f64::min)
}

fn step_lengths(st: &State, d: &Direction) -> (f64, f64) {
    let ap = max_step(&st.s, &d.ds).min(max_step(&st.sl, &d.dsl)).min(max_step(&st.su, &d.dsu));
    let ad = max_step(&st.z, &d.dz).min(max_step(&st.zl, &d.dzl)).min(max_step(&st.zu, &d.dzu));
    (ap, ad)
}

/// Unique minimizer of `c·x + gamma‖x‖²` over `poly` (`gamma > 0`).
pub fn solve_qp_regularized(c: &[f64], poly: &Polytope, gamma: f64, opts: QpOptions) -> Result<LpSolution> {
    poly.check_cost(c)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let n = poly.n;
    let m = poly.m();
    let lower: Vec<usize> = (0..n).filter(|&j| poly.bounds[j].0.is_finite()).collect();
    let upper: Vec<usize> = (0..n).filter(|&j| poly.bounds[j].1.is_finite()).collect();
    let prob = Problem { c, poly, gamma, lower, upper };

    let x0: Vec<f64> = poly
        .bounds
        .iter()
        .map(|&(lo, hi)| match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo + 1.0,
            (false, true) => hi - 1.0,
            (false, false) => 0.0,
        })
        .collect();
    let act = poly.row_activity(&x0);
    let mut st = State {
        s: (0..m).map(|i| (poly.b[i] - act[i]).max(1.0)).collect(),
        z: vec![1.0; m],
        sl: prob.lower.iter().map(|&j| (x0[j] - poly.bounds[j].0).max(1.0)).collect(),
        zl: vec![1.0; prob.lower.len()],
        su: prob.upper.iter().map(|&j| (poly.bounds[j].1 - x0[j]).max(1.0)).collect(),
        zu: vec![1.0; prob.upper.len()],
        x: x0,
    };

    let scale = 1.0 + c.iter().map(|v| v.abs()).fold(0.0, f64::max) + poly.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut iterations = 0;
    let mut converged = false;
    let mut last_res = f64::INFINITY;
    let mut best_res = f64::INFINITY;
    let mut best = st.clone();
    while iterations < opts.max_iter {
        let res = prob.residuals(&st);
        let mu = prob.mu(&st);
        let inf = res
            .rd
            .iter()
            .chain(&res.rp)
            .chain(&res.rpl)
            .chain(&res.rpu)
            .fold(0.0f64, |a, v| a.max(v.abs()));
        last_res = inf.max(mu);
        if last_res < best_res {
            best_res = last_res;
            best = st.clone();
        } else if last_res > 1e3 * best_res {
            // numerical breakdown near the boundary; fall back to the best iterate
            break;
        }
        // every complementarity product small, not only their mean
        let gap = st.s.iter().zip(&st.z).chain(st.sl.iter().zip(&st.zl)).chain(st.su.iter().zip(&st.zu));
        let worst_gap = gap.fold(0.0f64, |a, (s, z)| a.max(s * z));
        if inf <= opts.tol * scale && worst_gap <= opts.tol {
            converged = true;
            break;
        }
        iterations += 1;

        // Predictor.
        let rc: Vec<f64> = st.s.iter().zip(&st.z).map(|(s, z)| s * z).collect();
        let rcl: Vec<f64> = st.sl.iter().zip(&st.zl).map(|(s, z)| s * z).collect();
        let rcu: Vec<f64> = st.su.iter().zip(&st.zu).map(|(s, z)| s * z).collect();
        let aff = prob.direction(&st, &res, &rc, &rcl, &rcu)?;
        let (ap, ad) = step_lengths(&st, &aff);
        let ap = ap.min(ad);
        let ad = ap;
        let mu_aff = {
            let f = |v: &[f64], dv: &[f64], w: &[f64], dw: &[f64]| -> f64 {
                (0..v.len()).map(|i| (v[i] + ap * dv[i]) * (w[i] + ad * dw[i])).sum()
            };
            let total = (m + prob.lower.len() + prob.upper.len()).max(1) as f64;
            (f(&st.s, &aff.ds, &st.z, &aff.dz) + f(&st.sl, &aff.dsl, &st.zl, &aff.dzl) + f(&st.su, &aff.dsu, &st.zu, &aff.dzu))
                / total
        };
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        // Corrector.
        let target = sigma * mu;
        let rc: Vec<f64> = (0..m).map(|i| st.s[i] * st.z[i] + aff.ds[i] * aff.dz[i] - target).collect();
        let rcl: Vec<f64> = (0..prob.lower.len())
            .map(|k| st.sl[k] * st.zl[k] + aff.dsl[k] * aff.dzl[k] - target)
            .collect();
        let rcu: Vec<f64> = (0..prob.upper.len())
            .map(|k| st.su[k] * st.zu[k] + aff.dsu[k] * aff.dzu[k] - target)
            .collect();
        let dir = prob.direction(&st, &res, &rc, &rcl, &rcu)?;
        let (ap, ad) = step_lengths(&st, &dir);
        // One step length for both: stationarity couples x and the multipliers.
        let ap = (0.995 * ap.min(ad)).min(1.0);
        let ad = ap;
        let upd = |v: &mut Vec<f64>, dv: &[f64], a: f64| {
            for (x, d) in v.iter_mut().zip(dv) {
                *x += a * d;
            }
        };
        upd(&mut st.x, &dir.dx, ap);
        upd(&mut st.s, &dir.ds, ap);
        upd(&mut st.sl, &dir.dsl, ap);
        upd(&mut st.su, &dir.dsu, ap);
        upd(&mut st.z, &dir.dz, ad);
        upd(&mut st.zl, &dir.dzl, ad);
        upd(&mut st.zu, &dir.dzu, ad);
        if st.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("interior-point iterate"));
        }
    }
    if !converged {
        st = best;
    }

    let mut sol = LpSolution {
        primal: st.x.clone(),
        duals: st.z.clone(),
        bound_duals: bound_duals_from(&prob, &st),
        objective_value: 0.0,
        iterations,
    };
    if opts.polish {
        if let Some(p) = polish(&prob, &st) {
            if p.kkt_residual(c, poly, gamma) <= sol.kkt_residual(c, poly, gamma).max(1e-12) {
                sol = LpSolution { iterations, ..p };
            }
        }
    }
    // a stalled run is still usable when the polished point satisfies KKT
    if !converged && sol.kkt_residual(c, poly, gamma) > 1e-7 * scale {
        return Err(Error::NoConvergence { iterations, residual: last_res.min(best_res) });
    }
    sol.objective_value = dotp(c, &sol.primal) + gamma * dotp(&sol.primal, &sol.primal);
    Ok(sol)
}

fn bound_duals_from(prob: &Problem, st: &State) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); prob.poly.n];
    for (k, &j) in prob.lower.iter().enumerate() {
        out[j].0 = st.zl[k];
    }
    for (k, &j) in prob.upper.iter().enumerate() {
        out[j].1 = st.zu[k];
    }
    out
}

/// Re-solves the QP with the IPM's active set held as equalities.
fn polish(prob: &Problem, st: &State) -> Option<LpSolution> {
    let poly = prob.poly;
    let n = poly.n;
    let g2 = 2.0 * prob.gamma;
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for (k, &j) in prob.lower.iter().enumerate() {
        if st.sl[k] < st.zl[k] {
            fixed[j] = Some(poly.bounds[j].0);
        }
    }
    for (k, &j) in prob.upper.iter().enumerate() {
        if st.su[k] < st.zu[k] {
            fixed[j] = Some(poly.bounds[j].1);
        }
    }
    let active: Vec<usize> = (0..poly.m()).filter(|&i| st.s[i] < st.z[i]).collect();
    let free: Vec<usize> = (0..n).filter(|&j| fixed[j].is_none()).collect();

    let mut x = vec![0.0; n];
    for j in 0..n {
        if let Some(v) = fixed[j] {
            x[j] = v;
        }
    }
    let ma = active.len();
    let mut nu = vec![0.0; ma];
    if ma > 0 {
        // (G_A G_Aᵀ) ν = −2γ r − G_A c, restricted to free columns
        let mut k = DMatrix::<f64>::zeros(ma, ma);
        let mut rhs = DVector::<f64>::zeros(ma);
        for (p, &i) in active.iter().enumerate() {
            let fixed_part: f64 = (0..n).filter_map(|j| fixed[j].map(|v| poly.rows[i][j] * v)).sum();
            let r = poly.b[i] - fixed_part;
            let gc: f64 = free.iter().map(|&j| poly.rows[i][j] * prob.c[j]).sum();
            rhs[p] = -g2 * r - gc;
            for (q, &l) in active.iter().enumerate() {
                k[(p, q)] = free.iter().map(|&j| poly.rows[i][j] * poly.rows[l][j]).sum();
            }
        }
        // dependent active rows (matching polytopes) make K singular; any
        // least-squares ν then yields the same x
        let sol = match k.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => k.svd(true, true).solve(&rhs, 1e-10).ok()?,
        };
        nu = sol.iter().copied().collect();
    }
    for &j in &free {
        let gt: f64 = active.iter().zip(&nu).map(|(&i, v)| poly.rows[i][j] * v).sum();
        x[j] = -(prob.c[j] + gt) / g2;
    }
    let mut duals = vec![0.0; poly.m()];
    for (&i, &v) in active.iter().zip(&nu) {
        if v < -1e-10 {
            return None;
        }
        duals[i] = v.max(0.0);
    }
    let mut bound_duals = vec![(0.0, 0.0); n];
    for j in 0..n {
        if fixed[j].is_some() {
            let gt: f64 = active.iter().zip(&nu).map(|(&i, v)| poly.rows[i][j] * v).sum();
            let r = prob.c[j] + g2 * x[j] + gt;
            let at_lower = fixed[j] == Some(poly.bounds[j].0);
            let mult = if at_lower { r } else { -r };
            if mult < -1e-10 {
                return None;
            }
            bound_duals[j] = if at_lower { (mult.max(0.0), 0.0) } else { (0.0, mult.max(0.0)) };
        }
    }
    if !poly.is_feasible(&x, 1e-10) {
        return None;
    }
    Some(LpSolution { primal: x, duals, bound_duals, objective_value: 0.0, iterations: 0 })
}
