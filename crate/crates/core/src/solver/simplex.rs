//! Dense bounded-variable primal simplex.
//!
//! Variables are shifted so every column lives in `[0, u]`; rows get slacks,
//! and rows with negative right-hand side get an artificial for a phase-one
//! start. Pricing is Dantzig's rule, falling back to Bland's rule (smallest
//! eligible index, smallest leaving basic index) after a run of degenerate
//! pivots, so the method cannot cycle and identical inputs always follow the
//! same pivot path.

use super::{LpSolution, Polytope};
use crate::error::{Error, Result};

const COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Basic(usize),
    AtLower,
    AtUpper,
}

/// How an original variable maps to tableau columns.
#[derive(Debug, Clone, Copy)]
enum ColumnMap {
    /// `x = lo + x'`
    Shift(usize, f64),
    /// `x = hi − x'`
    Mirror(usize, f64),
    /// `x = x⁺ − x⁻`
    Split(usize, usize),
}

struct Tableau {
    m: usize,
    ncols: usize,
    /// Row-major `m × ncols`, always equal to `B⁻¹ [A' | ±I | art]`.
    t: Vec<f64>,
    beta: Vec<f64>,
    upper: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    iterations: usize,
}

impl Tableau {
    fn row(&self, i: usize) -> &[f64] {
        &self.t[i * self.ncols..(i + 1) * self.ncols]
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (dj, a) in d.iter_mut().zip(self.row(i)) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, q: usize, d: &mut [f64]) {
        let nc = self.ncols;
        let piv = self.t[r * nc + q];
        for v in &mut self.t[r * nc..(r + 1) * nc] {
            *v /= piv;
        }
        let pivot_row: Vec<f64> = self.t[r * nc..(r + 1) * nc].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + q];
            if f != 0.0 {
                for (v, p) in self.t[i * nc..(i + 1) * nc].iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                self.t[i * nc + q] = 0.0;
            }
        }
        let f = d[q];
        if f != 0.0 {
            for (v, p) in d.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            d[q] = 0.0;
        }
    }

    /// Runs simplex iterations for `cost` over columns `0..active_cols`.
    fn optimize(&mut self, cost: &[f64], active_cols: usize, max_iter: usize) -> Result<()> {
        let mut d = self.reduced_costs(cost);
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= max_iter {
                return Err(Error::NoConvergence { iterations: self.iterations, residual: f64::NAN });
            }
            let bland = degenerate_run >= DEGENERATE_RUN;
            let mut entering: Option<(usize, f64)> = None;
            for (j, &dj) in d.iter().enumerate().take(active_cols) {
                let gain = match self.status[j] {
                    Status::Basic(_) => continue,
                    Status::AtLower if dj < -COST_TOL && self.upper[j] > 0.0 => -dj,
                    Status::AtUpper if dj > COST_TOL => dj,
                    _ => continue,
                };
                if bland {
                    entering = Some((j, gain));
                    break;
                }
                if entering.is_none_or(|(_, g)| gain > g) {
                    entering = Some((j, gain));
                }
            }
            let Some((q, _)) = entering else {
                return Ok(());
            };
            let dir = if self.status[q] == Status::AtLower { 1.0 } else { -1.0 };

            // Ratio test: basic variable i changes by −dir·α_iq per unit step.
            let mut best: Option<(usize, f64, bool)> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m {
                let alpha = self.t[i * self.ncols + q];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let delta = -dir * alpha;
                let bvar = self.basis[i];
                let (ratio, to_upper) = if delta < 0.0 {
                    (self.beta[i].max(0.0) / -delta, false)
                } else if self.upper[bvar].is_finite() {
                    ((self.upper[bvar] - self.beta[i]).max(0.0) / delta, true)
                } else {
                    continue;
                };
                let better = match best {
                    None => true,
                    Some((bi, _, _)) => {
                        if ratio < best_ratio - 1e-12 {
                            true
                        } else if ratio <= best_ratio + 1e-12 {
                            if bland {
                                bvar < self.basis[bi]
                            } else {
                                alpha.abs() > self.t[bi * self.ncols + q].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    best = Some((i, ratio, to_upper));
                    best_ratio = best_ratio.min(ratio);
                }
            }
            let uq = self.upper[q];
            self.iterations += 1;
            match best {
                Some((_, ratio, _)) if ratio < uq => {}
                _ if uq.is_finite() => {
                    // Bound flip; no basis change.
                    for i in 0..self.m {
                        let alpha = self.t[i * self.ncols + q];
                        self.beta[i] += -dir * alpha * uq;
                    }
                    self.status[q] = if dir > 0.0 { Status::AtUpper } else { Status::AtLower };
                    degenerate_run = 0;
                    continue;
                }
                None => return Err(Error::Unbounded),
                _ => {}
            }
            let (r, step, to_upper) = best.expect("ratio test produced a row");
            for i in 0..self.m {
                let alpha = self.t[i * self.ncols + q];
                self.beta[i] += -dir * alpha * step;
            }
            let leaving = self.basis[r];
            self.status[leaving] = if to_upper { Status::AtUpper } else { Status::AtLower };
            self.beta[r] = if dir > 0.0 { step } else { uq - step };
            self.basis[r] = q;
            self.status[q] = Status::Basic(r);
            self.pivot(r, q, &mut d);
            if step <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
        }
    }

    fn value(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::Basic(i) => self.beta[i],
            Status::AtLower => 0.0,
            Status::AtUpper => self.upper[j],
        }
    }
}

/// Vertex-optimal solution of `min c·π` over `poly`.
pub fn solve_lp(c: &[f64], poly: &Polytope) -> Result<LpSolution> {
    poly.check_cost(c)?;
    let n = poly.n;
    let m = poly.m();

    let mut maps = Vec::with_capacity(n);
    let mut col_costs: Vec<f64> = Vec::new();
    let mut col_upper: Vec<f64> = Vec::new();
    let mut offset = vec![0.0; n];
    for (j, &(lo, hi)) in poly.bounds.iter().enumerate() {
        let k = col_costs.len();
        if lo.is_finite() {
            maps.push(ColumnMap::Shift(k, lo));
            col_costs.push(c[j]);
            col_upper.push(hi - lo);
            offset[j] = lo;
        } else if hi.is_finite() {
            maps.push(ColumnMap::Mirror(k, hi));
            col_costs.push(-c[j]);
            col_upper.push(f64::INFINITY);
            offset[j] = hi;
        } else {
            maps.push(ColumnMap::Split(k, k + 1));
            col_costs.extend([c[j], -c[j]]);
            col_upper.extend([f64::INFINITY, f64::INFINITY]);
        }
    }
    let ns = col_costs.len();
    let rhs: Vec<f64> = poly
        .rows
        .iter()
        .zip(&poly.b)
        .map(|(row, b)| b - crate::molp::dot(row, &offset))
        .collect();
    let negative_rows: Vec<usize> = (0..m).filter(|&i| rhs[i] < 0.0).collect();
    let n_art = negative_rows.len();
    let ncols = ns + m + n_art;

    let mut t = vec![0.0; m * ncols];
    let mut beta = vec![0.0; m];
    let mut basis = vec![0usize; m];
    let mut status = vec![Status::AtLower; ncols];
    let mut art_of_row = vec![None; m];
    for (k, &i) in negative_rows.iter().enumerate() {
        art_of_row[i] = Some(ns + m + k);
    }
    for i in 0..m {
        let sign = if art_of_row[i].is_some() { -1.0 } else { 1.0 };
        let row = &mut t[i * ncols..(i + 1) * ncols];
        for (j, map) in maps.iter().enumerate() {
            let a = poly.rows[i][j];
            if a == 0.0 {
                continue;
            }
            match *map {
                ColumnMap::Shift(k, _) => row[k] = sign * a,
                ColumnMap::Mirror(k, _) => row[k] = -sign * a,
                ColumnMap::Split(p, q) => {
                    row[p] = sign * a;
                    row[q] = -sign * a;
                }
            }
        }
        row[ns + i] = sign;
        beta[i] = sign * rhs[i];
        if let Some(a) = art_of_row[i] {
            row[a] = 1.0;
            basis[i] = a;
            status[a] = Status::Basic(i);
        } else {
            basis[i] = ns + i;
            status[ns + i] = Status::Basic(i);
        }
    }
    let mut upper = col_upper;
    upper.extend(std::iter::repeat_n(f64::INFINITY, m + n_art));

    let mut tab = Tableau { m, ncols, t, beta, upper, status, basis, iterations: 0 };
    let max_iter = 50_000 + 50 * (m + ncols);

    if n_art > 0 {
        let mut phase1 = vec![0.0; ncols];
        for c in phase1.iter_mut().skip(ns + m) {
            *c = 1.0;
        }
        tab.optimize(&phase1, ncols, max_iter)?;
        let infeas: f64 = (ns + m..ncols).map(|j| tab.value(j)).sum();
        if infeas > FEAS_TOL * (1.0 + rhs.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
            return Err(Error::Infeasible);
        }
        for j in ns + m..ncols {
            tab.upper[j] = 0.0;
            if let Status::Basic(i) = tab.status[j] {
                tab.beta[i] = 0.0;
            }
        }
    }

    let mut phase2 = vec![0.0; ncols];
    phase2[..ns].copy_from_slice(&col_costs);
    tab.optimize(&phase2, ns + m, max_iter)?;

    let mut x = vec![0.0; n];
    for (j, map) in maps.iter().enumerate() {
        x[j] = match *map {
            ColumnMap::Shift(k, lo) => lo + tab.value(k),
            ColumnMap::Mirror(k, hi) => hi - tab.value(k),
            ColumnMap::Split(p, q) => tab.value(p) - tab.value(q),
        };
        let (lo, hi) = poly.bounds[j];
        x[j] = x[j].clamp(lo, hi);
    }

    // Row multipliers are the reduced costs of the slack columns.
    let d = tab.reduced_costs(&phase2);
    let duals: Vec<f64> = (0..m).map(|i| d[ns + i].max(0.0)).collect();
    let mut r = c.to_vec();
    for (row, l) in poly.rows.iter().zip(&duals) {
        if *l != 0.0 {
            for (rj, a) in r.iter_mut().zip(row) {
                *rj += a * l;
            }
        }
    }
    let bound_duals = r.iter().map(|&rj| if rj >= 0.0 { (rj, 0.0) } else { (0.0, -rj) }).collect();

    Ok(LpSolution {
        objective_value: crate::molp::dot(c, &x),
        primal: x,
        duals,
        bound_duals,
        iterations: tab.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testing::enumerate_vertices;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assignment_2x2() -> Polytope {
        // variables x00, x01, x10, x11
        Polytope::new(
            vec![
                vec![1.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 1.0],
                vec![1.0, 0.0, 1.0, 0.0],
                vec![0.0, 1.0, 0.0, 1.0],
            ],
            vec![1.0; 4],
            vec![(0.0, 1.0); 4],
        )
        .unwrap()
    }

    #[test]
    fn identity_matching() {
        let sol = solve_lp(&[-1.0, 0.0, 0.0, -1.0], &assignment_2x2()).unwrap();
        assert_eq!(sol.primal, vec![1.0, 0.0, 0.0, 1.0]);
        assert!((sol.objective_value + 2.0).abs() < 1e-12);
        assert!(sol.kkt_residual(&[-1.0, 0.0, 0.0, -1.0], &assignment_2x2(), 0.0) < 1e-8);
    }

    #[test]
    fn zero_cost_is_deterministic_vertex() {
        let p = assignment_2x2();
        let a = solve_lp(&[0.0; 4], &p).unwrap();
        let b = solve_lp(&[0.0; 4], &p).unwrap();
        assert_eq!(a.objective_value, 0.0);
        assert_eq!(a.primal, b.primal);
        assert!(p.is_feasible(&a.primal, 1e-12));
    }

    #[test]
    fn infeasible_and_unbounded_are_reported() {
        let p = Polytope::new(vec![vec![1.0], vec![-1.0]], vec![1.0, -2.0], vec![(0.0, 10.0)]).unwrap();
        assert!(matches!(solve_lp(&[1.0], &p), Err(Error::Infeasible)));
        let p = Polytope::new(vec![], vec![], vec![(0.0, f64::INFINITY)]).unwrap();
        assert!(matches!(solve_lp(&[-1.0], &p), Err(Error::Unbounded)));
    }

    #[test]
    fn handles_mirrored_and_free_variables() {
        // min x + y with x ≤ 3 (no lower), y free, x + y ≥ -1, x ≥ -4 via rows
        let p = Polytope::new(
            vec![vec![-1.0, -1.0], vec![-1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 4.0, 5.0],
            vec![(f64::NEG_INFINITY, 3.0), (f64::NEG_INFINITY, f64::INFINITY)],
        )
        .unwrap();
        let sol = solve_lp(&[1.0, 2.0], &p).unwrap();
        // optimum: y as small as possible subject to x + y ≥ −1, x ≤ 3 → x = 3, y = −4
        assert!((sol.primal[0] - 3.0).abs() < 1e-9);
        assert!((sol.primal[1] + 4.0).abs() < 1e-9);
        assert!(sol.kkt_residual(&[1.0, 2.0], &p, 0.0) < 1e-8);
    }

    fn random_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Polytope {
        let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        // b chosen so the box midpoint is feasible.
        let b = rows
            .iter()
            .map(|r| r.iter().map(|a| 0.5 * a).sum::<f64>() + rng.random_range(0.1..1.0))
            .collect();
        Polytope::new(rows, b, vec![(0.0, 1.0); n]).unwrap()
    }

    #[test]
    fn matches_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..25 {
            let p = random_lp(&mut rng, 6, 8);
            let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sol = solve_lp(&c, &p).unwrap();
            let best = enumerate_vertices(&p)
                .iter()
                .map(|v| crate::molp::dot(&c, v))
                .fold(f64::INFINITY, f64::min);
            assert!((sol.objective_value - best).abs() < 1e-7, "{} vs {best}", sol.objective_value);
            assert!(sol.kkt_residual(&c, &p, 0.0) < 1e-8);
        }
    }

    #[test]
    fn negative_rhs_uses_phase_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let n = 5;
            let mut p = random_lp(&mut rng, n, 4);
            // x_0 + x_1 ≥ 0.5 as −x_0 − x_1 ≤ −0.5
            let mut r = vec![0.0; n];
            r[0] = -1.0;
            r[1] = -1.0;
            p.rows.push(r);
            p.b.push(-0.5);
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            match solve_lp(&c, &p) {
                Ok(sol) => {
                    let verts = enumerate_vertices(&p);
                    let best = verts.iter().map(|v| crate::molp::dot(&c, v)).fold(f64::INFINITY, f64::min);
                    assert!((sol.objective_value - best).abs() < 1e-7);
                    assert!(p.is_feasible(&sol.primal, 1e-8));
                }
                Err(Error::Infeasible) => assert!(enumerate_vertices(&p).is_empty()),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn bipartite_vertices_are_integral() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = 6;
        let n = k * k;
        let mut rows = Vec::new();
        for i in 0..k {
            let mut r = vec![0.0; n];
            for j in 0..k {
                r[i * k + j] = 1.0;
            }
            rows.push(r);
        }
        for j in 0..k {
            let mut r = vec![0.0; n];
            for i in 0..k {
                r[i * k + j] = 1.0;
            }
            rows.push(r);
        }
        let p = Polytope::new(rows, vec![1.0; 2 * k], vec![(0.0, 1.0); n]).unwrap();
        for _ in 0..20 {
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..0.5)).collect();
            let sol = solve_lp(&c, &p).unwrap();
            assert!(sol.primal.iter().all(|v| (v - v.round()).abs() <= 1e-7));
        }
    }
}
