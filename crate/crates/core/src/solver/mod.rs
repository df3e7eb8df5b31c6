//! Exact LP solving, smoothed QP solving and weight-grid Pareto sets.

mod ipm;
mod multi;
mod simplex;

pub use ipm::{solve_qp_regularized, QpOptions};
pub use multi::{
    pareto_candidate_weights, single_objective_optima, solve_multiobjective, solve_multiobjective_costs,
    ParetoData,
};
pub use simplex::solve_lp;
pub use testing::enumerate_vertices;

use crate::error::{Error, Result};
use crate::molp::MolpInstance;

/// Feasible region `{π : Aπ ≤ b, lo ≤ π ≤ hi}` with a dense `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
}

impl Polytope {
    pub fn new(rows: Vec<Vec<f64>>, b: Vec<f64>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let n = bounds.len();
        if rows.len() != b.len() {
            return Err(Error::dim("Polytope rows vs b", b.len(), rows.len()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::dim("Polytope row length", n, r.len()));
        }
        if bounds.iter().any(|(lo, hi)| lo > hi || lo.is_nan() || hi.is_nan()) {
            return Err(Error::Domain("bounds with lo > hi".into()));
        }
        Ok(Polytope { n, rows, b, bounds })
    }

    pub fn from_instance(instance: &MolpInstance) -> Self {
        Polytope {
            n: instance.n_vars,
            rows: instance.dense_a(),
            b: instance.b.clone(),
            bounds: instance.bounds.clone(),
        }
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Unit box `[0,1]^n` with no rows.
    pub fn unit_box(n: usize) -> Self {
        Polytope { n, rows: vec![], b: vec![], bounds: vec![(0.0, 1.0); n] }
    }

    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| crate::molp::dot(r, x)).collect()
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.n
            && x.iter().zip(&self.bounds).all(|(&v, &(lo, hi))| v >= lo - tol && v <= hi + tol)
            && self.row_activity(x).iter().zip(&self.b).all(|(ax, b)| *ax <= b + tol)
    }

    fn check_cost(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.n {
            return Err(Error::dim("cost vector", self.n, c.len()));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cost vector"));
        }
        Ok(())
    }
}

/// Primal/dual solution of an LP or of the smoothed QP.
///
/// Multipliers follow the stationarity convention
/// `∇objective + Aᵀλ − μ_lo + μ_hi = 0` with all multipliers nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub primal: Vec<f64>,
    /// One multiplier per row of `A`.
    pub duals: Vec<f64>,
    /// `(μ_lo, μ_hi)` per variable.
    pub bound_duals: Vec<(f64, f64)>,
    pub objective_value: f64,
    pub iterations: usize,
}

impl LpSolution {
    /// Largest of primal infeasibility, dual infeasibility, complementarity
    /// and stationarity residual for `min c·π + gamma‖π‖²`.
    pub fn kkt_residual(&self, c: &[f64], poly: &Polytope, gamma: f64) -> f64 {
        let x = &self.primal;
        let act = poly.row_activity(x);
        let mut worst = 0.0f64;
        for ((ax, b), l) in act.iter().zip(&poly.b).zip(&self.duals) {
            worst = worst.max(ax - b).max(-l).max((l * (ax - b)).abs());
        }
        let mut station: Vec<f64> = c.iter().zip(x).map(|(ci, xi)| ci + 2.0 * gamma * xi).collect();
        for (row, l) in poly.rows.iter().zip(&self.duals) {
            for (s, a) in station.iter_mut().zip(row) {
                *s += a * l;
            }
        }
        for (j, (&(lo, hi), &(ml, mh))) in poly.bounds.iter().zip(&self.bound_duals).enumerate() {
            station[j] += mh - ml;
            worst = worst.max(lo - x[j]).max(x[j] - hi).max(-ml).max(-mh);
            if lo.is_finite() {
                worst = worst.max((ml * (x[j] - lo)).abs());
            }
            if hi.is_finite() {
                worst = worst.max((mh * (hi - x[j])).abs());
            }
        }
        station.iter().fold(worst, |w, s| w.max(s.abs()))
    }
}

pub mod testing {
    //! Brute-force vertex enumeration used as an independent oracle.

    use super::Polytope;

    /// All vertices of a bounded polytope (bounds finite), found by solving
    /// every `n`-subset of tight constraints with Gaussian elimination.
    pub fn enumerate_vertices(poly: &Polytope) -> Vec<Vec<f64>> {
        let n = poly.n;
        let mut cons: Vec<(Vec<f64>, f64)> = poly.rows.iter().cloned().zip(poly.b.iter().cloned()).collect();
        for (j, &(lo, hi)) in poly.bounds.iter().enumerate() {
            let mut e = vec![0.0; n];
            e[j] = -1.0;
            cons.push((e.clone(), -lo));
            e[j] = 1.0;
            cons.push((e, hi));
        }
        let mut out: Vec<Vec<f64>> = Vec::new();
        let k = cons.len();
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            if let Some(x) = solve_square(&idx.iter().map(|&i| cons[i].clone()).collect::<Vec<_>>(), n) {
                if poly.is_feasible(&x, 1e-9)
                    && !out.iter().any(|v| v.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-9))
                {
                    out.push(x);
                }
            }
            // next combination
            let mut i = n;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if idx[i] < k - n + i {
                    idx[i] += 1;
                    for j in i + 1..n {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    fn solve_square(rows: &[(Vec<f64>, f64)], n: usize) -> Option<Vec<f64>> {
        let mut m: Vec<Vec<f64>> = rows
            .iter()
            .map(|(r, b)| {
                let mut v = r.clone();
                v.push(*b);
                v
            })
            .collect();
        for col in 0..n {
            let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
            if m[piv][col].abs() < 1e-10 {
                return None;
            }
            m.swap(col, piv);
            for r in 0..n {
                if r != col {
                    let f = m[r][col] / m[col][col];
                    for c in col..=n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
        Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
    }
}
