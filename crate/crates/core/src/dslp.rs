//! Differentiable LP layer.
//!
//! The forward pass solves `min c·π + γ‖π‖²` over the polytope. Sensitivities
//! come from differentiating the KKT conditions on the detected active set:
//! variables pinned at a bound with a positive multiplier are held fixed, and
//! the remaining rows are eliminated through an `k × k` Schur complement
//! `(Λ G Gᵀ + 2γ S) Y = −Λ G` where `G` holds the active rows on the free
//! columns.

use nalgebra::{DMatrix, DVector, LU, Dyn};

use crate::error::{Error, Result};
use crate::solver::{solve_lp, solve_qp_regularized, LpSolution, Polytope, QpOptions};

/// Slack and multiplier threshold used to classify constraints.
pub const ACTIVE_TOL: f64 = 1e-7;
/// Diagonal damping added for constraints that are tight with a vanishing multiplier.
pub const DAMPING: f64 = 1e-8;

/// Forward solution plus the factorization needed for sensitivities.
#[derive(Debug, Clone)]
pub struct DiffSolution {
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
    pub bound_duals: Vec<(f64, f64)>,
    pub gamma: f64,
    /// Variables not pinned at a bound.
    pub free: Vec<usize>,
    /// Rows kept in the sensitivity system.
    pub active_rows: Vec<usize>,
    /// Constraints that were tight with a near-zero multiplier.
    pub ambiguous: usize,
    g: Vec<Vec<f64>>,
    lambda: Vec<f64>,
    /// LU factors of the transposed Schur complement.
    schur: Option<LU<f64, Dyn, Dyn>>,
}

/// Solves the regularized problem and prepares its sensitivities. With
/// `gamma == 0` the exact LP is solved and the Jacobian is zero.
pub fn forward(c: &[f64], poly: &Polytope, gamma: f64) -> Result<DiffSolution> {
    if gamma == 0.0 {
        let sol = solve_lp(c, poly)?;
        return Ok(DiffSolution {
            primal: sol.primal,
            duals: sol.duals,
            bound_duals: sol.bound_duals,
            gamma,
            free: vec![],
            active_rows: vec![],
            ambiguous: 0,
            g: vec![],
            lambda: vec![],
            schur: None,
        });
    }
    let sol = solve_qp_regularized(c, poly, gamma, QpOptions::default())?;
    from_solution(sol, poly, gamma)
}

/// Builds the sensitivity system around an already solved regularized problem.
pub fn from_solution(sol: LpSolution, poly: &Polytope, gamma: f64) -> Result<DiffSolution> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let n = poly.n;
    let x = &sol.primal;
    let mut ambiguous = 0;
    let mut free = Vec::with_capacity(n);
    for j in 0..n {
        let (lo, hi) = poly.bounds[j];
        let (ml, mh) = sol.bound_duals[j];
        let at_lo = x[j] - lo <= ACTIVE_TOL;
        let at_hi = hi - x[j] <= ACTIVE_TOL;
        if (at_lo && ml >= ACTIVE_TOL) || (at_hi && mh >= ACTIVE_TOL) {
            continue;
        }
        if at_lo || at_hi {
            ambiguous += 1;
        }
        free.push(j);
    }
    let act = poly.row_activity(x);
    let mut active_rows = Vec::new();
    let mut slack = Vec::new();
    let mut lambda = Vec::new();
    for i in 0..poly.m() {
        let s = (poly.b[i] - act[i]).max(0.0);
        let l = sol.duals[i].max(0.0);
        if s > ACTIVE_TOL && l < ACTIVE_TOL {
            continue;
        }
        active_rows.push(i);
        slack.push(s);
        lambda.push(l);
    }
    let g: Vec<Vec<f64>> = active_rows.iter().map(|&i| free.iter().map(|&j| poly.rows[i][j]).collect()).collect();
    let k = active_rows.len();
    let schur = if k == 0 {
        None
    } else {
        let mut m = DMatrix::<f64>::zeros(k, k);
        for p in 0..k {
            for q in 0..k {
                let gg: f64 = g[p].iter().zip(&g[q]).map(|(a, b)| a * b).sum();
                m[(p, q)] = lambda[p] * gg;
            }
            m[(p, p)] += 2.0 * gamma * slack[p];
            if lambda[p] < ACTIVE_TOL {
                ambiguous += 1;
                m[(p, p)] += DAMPING;
            }
        }
        let lu = m.transpose().lu();
        if !lu.is_invertible() {
            // Degenerate vertex with dependent active rows.
            for p in 0..k {
                m[(p, p)] += DAMPING;
            }
            let lu = m.transpose().lu();
            if !lu.is_invertible() {
                return Err(Error::SingularKkt { condition: condition_estimate(&m) });
            }
            Some(lu)
        } else {
            Some(lu)
        }
    };
    Ok(DiffSolution {
        primal: sol.primal,
        duals: sol.duals,
        bound_duals: sol.bound_duals,
        gamma,
        free,
        active_rows,
        ambiguous,
        g,
        lambda,
        schur,
    })
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 { f64::INFINITY } else { max / min }
}

impl DiffSolution {
    pub fn n(&self) -> usize {
        self.primal.len()
    }

    /// `grad_outᵀ · ∂π̂/∂c`.
    pub fn backward(&self, grad_out: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if grad_out.len() != n {
            return Err(Error::dim("dslp backward", n, grad_out.len()));
        }
        if grad_out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dslp upstream gradient"));
        }
        let mut out = vec![0.0; n];
        if self.gamma == 0.0 {
            return Ok(out);
        }
        let gf: Vec<f64> = self.free.iter().map(|&j| grad_out[j]).collect();
        let mut proj = gf.clone();
        if let Some(lu) = &self.schur {
            // gᵀ J_F = −(g − Gᵀ Λ M⁻ᵀ G g)/(2γ)
            let u = DVector::from_iterator(self.g.len(), self.g.iter().map(|row| crate::molp::dot(row, &gf)));
            let v = lu.solve(&u).ok_or(Error::SingularKkt { condition: f64::INFINITY })?;
            for (p, row) in self.g.iter().enumerate() {
                let w = self.lambda[p] * v[p];
                for (q, a) in proj.iter_mut().zip(row) {
                    *q -= a * w;
                }
            }
        }
        let scale = -1.0 / (2.0 * self.gamma);
        for (&j, p) in self.free.iter().zip(&proj) {
            out[j] = scale * p;
        }
        Ok(out)
    }

    /// Dense `∂π̂/∂c` (row `i` holds the sensitivities of `π̂_i`).
    pub fn jacobian(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.n();
        let mut jac = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            jac[i] = self.backward(&e)?;
        }
        Ok(jac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_variable_interior() {
        let p = Polytope::unit_box(1);
        let d = forward(&[-0.5], &p, 0.35).unwrap();
        assert!((d.primal[0] - 0.5 / 0.7).abs() < 1e-10);
        let j = d.jacobian().unwrap();
        assert!((j[0][0] + 1.0 / 0.7).abs() < 1e-12);
    }

    #[test]
    fn one_variable_active_bound() {
        let p = Polytope::unit_box(1);
        let d = forward(&[-1.0], &p, 0.35).unwrap();
        assert!((d.primal[0] - 1.0).abs() < 1e-10);
        assert_eq!(d.jacobian().unwrap()[0][0], 0.0);
    }

    #[test]
    fn interior_box_is_scaled_identity() {
        let p = Polytope::unit_box(4);
        let c = [-0.1, -0.2, -0.3, -0.4];
        let d = forward(&c, &p, 0.35).unwrap();
        let j = d.jacobian().unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let expect = if a == b { -1.0 / 0.7 } else { 0.0 };
                assert!((j[a][b] - expect).abs() < 1e-12);
            }
        }
        assert_eq!(d.backward(&[0.0; 4]).unwrap(), vec![0.0; 4]);
        let e = d.backward(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((e[1] + 1.0 / 0.7).abs() < 1e-12);
    }

    #[test]
    fn zero_gamma_calls_the_lp() {
        let p = Polytope::unit_box(2);
        let d = forward(&[-1.0, 1.0], &p, 0.0).unwrap();
        assert_eq!(d.primal, vec![1.0, 0.0]);
        assert_eq!(d.backward(&[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_equality_like_row_projects() {
        // x1 + x2 ≤ 1 active with both interior: J = −(I − ½11ᵀ)/(2γ)
        let p = Polytope::new(vec![vec![1.0, 1.0]], vec![1.0], vec![(0.0, 1.0); 2]).unwrap();
        let d = forward(&[-1.0, -1.2], &p, 0.5).unwrap();
        let j = d.jacobian().unwrap();
        let expect = [[-0.5, 0.5], [0.5, -0.5]];
        for a in 0..2 {
            for b in 0..2 {
                assert!((j[a][b] - expect[a][b]).abs() < 1e-9, "{j:?}");
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut checked = 0;
        for _ in 0..20 {
            let n = rng.random_range(2..=8);
            let m = rng.random_range(1..=10);
            let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let b = rows.iter().map(|r| r.iter().sum::<f64>() * 0.5 + rng.random_range(0.05..0.4)).collect();
            let p = Polytope::new(rows, b, vec![(0.0, 1.0); n]).unwrap();
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
            let d = forward(&c, &p, 0.35).unwrap();
            let jac = d.jacobian().unwrap();
            let h = 1e-5;
            for col in 0..n {
                let mut cp = c.clone();
                cp[col] += h;
                let mut cm = c.clone();
                cm[col] -= h;
                let xp = forward(&cp, &p, 0.35).unwrap();
                let xm = forward(&cm, &p, 0.35).unwrap();
                if xp.active_rows != d.active_rows
                    || xm.active_rows != d.active_rows
                    || xp.free != d.free
                    || xm.free != d.free
                {
                    continue;
                }
                for row in 0..n {
                    let fd = (xp.primal[row] - xm.primal[row]) / (2.0 * h);
                    let a = jac[row][col];
                    assert!((fd - a).abs() <= 1e-4 * fd.abs().max(a.abs()).max(1.0), "{fd} vs {a}");
                }
                checked += 1;
            }
        }
        assert!(checked > 40);
    }
}
