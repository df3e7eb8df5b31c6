//! The bi-objective quadratic `f¹(π) = a₁π² − a₂π`, `f²(π) = a₁π² − a₃π`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticExample {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// Dimension of `π` (coordinates are independent copies).
    pub n: usize,
    /// Lower bound on the coefficient prediction error.
    pub eps_prec: f64,
}

/// Result of the grid dominance check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridCheck {
    pub points: usize,
    /// Inside-interval points that some grid point dominates.
    pub inside_dominated: usize,
    /// Outside-interval points that no grid point dominates.
    pub outside_nondominated: usize,
}

impl GridCheck {
    pub fn passed(&self) -> bool {
        self.inside_dominated == 0 && self.outside_nondominated == 0
    }
}

impl QuadraticExample {
    pub fn new(a1: f64, a2: f64, a3: f64) -> Result<Self> {
        let q = QuadraticExample { a1, a2, a3, n: 1, eps_prec: 0.0 };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a1 > 0.0) || !self.a2.is_finite() || !self.a3.is_finite() {
            return Err(Error::Domain(format!("quadratic example needs a1 > 0, got {}", self.a1)));
        }
        Ok(())
    }

    pub fn objectives(&self, x: f64) -> [f64; 2] {
        [self.a1 * x * x - self.a2 * x, self.a1 * x * x - self.a3 * x]
    }

    /// Pareto set of one coordinate: the interval between the two minimizers.
    /// Collapses to a point when `a2 = a3`.
    pub fn pareto_interval(&self) -> (f64, f64) {
        let p = self.a2 / (2.0 * self.a1);
        let q = self.a3 / (2.0 * self.a1);
        (p.min(q), p.max(q))
    }

    /// Worst-case share of the true Pareto set covered by a predicted one,
    /// `(1 − ε/|a₂ − a₃|)^n`.
    pub fn overlap_ratio(&self) -> Result<f64> {
        let gap = (self.a2 - self.a3).abs();
        if gap == 0.0 {
            return Err(Error::Domain("overlap ratio undefined for a2 = a3".into()));
        }
        if !(self.eps_prec >= 0.0) {
            return Err(Error::Domain("eps_prec must be nonnegative".into()));
        }
        Ok((1.0 - self.eps_prec / gap).max(0.0).powi(self.n as i32))
    }

    /// Grid over the interval widened by `margin` on each side, plus the two
    /// endpoints, checked pairwise for dominance.
    pub fn grid_check(&self, step: f64, margin: f64) -> GridCheck {
        let (lo, hi) = self.pareto_interval();
        let start = lo - margin;
        let count = ((hi - lo + 2.0 * margin) / step).floor() as usize + 1;
        let mut xs: Vec<f64> = (0..count).map(|k| start + k as f64 * step).collect();
        xs.push(lo);
        xs.push(hi);
        let f: Vec<[f64; 2]> = xs.iter().map(|&x| self.objectives(x)).collect();
        // round-off guard: points within 1e-9 of an endpoint count as inside
        // and objective ties within 1e-12 are not strict improvements
        let tol = 1e-12 * (1.0 + f.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())));
        let dominated = |i: usize| {
            f.iter().any(|g| {
                g[0] <= f[i][0] + tol && g[1] <= f[i][1] + tol && (g[0] < f[i][0] - tol || g[1] < f[i][1] - tol)
            })
        };
        let mut out = GridCheck { points: xs.len(), inside_dominated: 0, outside_nondominated: 0 };
        for (i, &x) in xs.iter().enumerate() {
            let inside = x >= lo - 1e-9 && x <= hi + 1e-9;
            let dom = dominated(i);
            if inside && dom {
                out.inside_dominated += 1;
            }
            if !inside && !dom {
                out.outside_nondominated += 1;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_examples() {
        assert_eq!(QuadraticExample::new(1.0, 2.0, 4.0).unwrap().pareto_interval(), (1.0, 2.0));
        assert_eq!(QuadraticExample::new(1.0, 2.0, 2.0).unwrap().pareto_interval(), (1.0, 1.0));
        assert!(QuadraticExample::new(0.0, 2.0, 4.0).is_err());
    }

    #[test]
    fn overlap_ratio_half_at_half_gap() {
        let q = QuadraticExample { eps_prec: 1.0, ..QuadraticExample::new(1.0, 2.0, 4.0).unwrap() };
        assert_eq!(q.overlap_ratio().unwrap(), 0.5);
        let q3 = QuadraticExample { n: 3, ..q };
        assert_eq!(q3.overlap_ratio().unwrap(), 0.125);
        assert!(QuadraticExample::new(1.0, 2.0, 2.0).unwrap().overlap_ratio().is_err());
    }

    #[test]
    fn grid_membership_matches_interval() {
        for (a1, a2, a3) in [(1.0, 2.0, 4.0), (0.7, -1.3, 2.2), (3.0, 5.0, -2.0), (1.0, 2.0, 2.0)] {
            let c = QuadraticExample::new(a1, a2, a3).unwrap().grid_check(1e-3, 0.5);
            assert!(c.passed(), "{a1} {a2} {a3}: {c:?}");
        }
    }
}
