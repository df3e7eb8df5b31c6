//! Pareto sets by weighted-sum enumeration.

use super::{solve_lp, Polytope};
use crate::error::Result;
use crate::molp::{dominates_slice, MolpInstance, Orientation};
use crate::scalarize::{weight_grid, weighted_cost, NormalizedCosts, WeightVector};

/// Representative Pareto-optimal solutions and their objective vectors
/// (native orientation), aligned index by index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParetoData {
    pub pareto_set: Vec<Vec<f64>>,
    pub pareto_front: Vec<Vec<f64>>,
}

/// The grid `w/denom` followed by the uniform weight when the grid lacks it.
/// The uniform weight is the one the training layer scalarizes with, so its
/// solution must be part of every reference set.
pub fn pareto_candidate_weights(t: usize, denom: usize) -> Result<Vec<WeightVector>> {
    let mut weights = weight_grid(t, denom)?;
    let uniform = WeightVector::uniform(t);
    let has_uniform = weights
        .iter()
        .any(|w| w.values().iter().zip(uniform.values()).all(|(a, b)| (a - b).abs() < 1e-12));
    if !has_uniform {
        weights.push(uniform);
    }
    Ok(weights)
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Pareto data of `min [BN(c^1)·π, …, BN(c^T)·π]` for canonical
/// (minimization) costs `canonical`. Objective vectors are reported through
/// the `evaluate_with` costs. Distinct solutions sharing an objective vector
/// are all kept.
pub fn solve_multiobjective_costs(
    canonical: &[Vec<f64>],
    evaluate_with: &[Vec<f64>],
    poly: &Polytope,
    denom: usize,
) -> Result<ParetoData> {
    let normalized = NormalizedCosts::new(canonical)?;
    let mut solutions: Vec<Vec<f64>> = Vec::new();
    for w in pareto_candidate_weights(canonical.len(), denom)? {
        let c = weighted_cost(&normalized, &w)?;
        let sol = solve_lp(&c, poly)?;
        if !solutions.iter().any(|s| linf(s, &sol.primal) <= 1e-7) {
            solutions.push(sol.primal);
        }
    }
    // Dominance is judged on the normalized objectives the weighted sums
    // optimize, so every positive-weight optimum survives the filter.
    let scaled: Vec<Vec<f64>> = solutions
        .iter()
        .map(|pi| (0..normalized.t()).map(|j| crate::molp::dot(normalized.values(j), pi)).collect())
        .collect();
    let mut data = ParetoData::default();
    for (i, pi) in solutions.iter().enumerate() {
        let mut dominated = false;
        for (k, g) in scaled.iter().enumerate() {
            if k != i && dominates_slice(g, &scaled[i], Orientation::Min)? {
                dominated = true;
                break;
            }
        }
        if !dominated {
            data.pareto_set.push(pi.clone());
            data.pareto_front.push(evaluate_with.iter().map(|y| crate::molp::dot(y, pi)).collect());
        }
    }
    Ok(data)
}

/// Pareto set and front of an instance's true problem.
pub fn solve_multiobjective(instance: &MolpInstance, denom: usize) -> Result<ParetoData> {
    solve_multiobjective_costs(
        &instance.canonical_costs(),
        &instance.costs,
        &Polytope::from_instance(instance),
        denom,
    )
}

/// `π^{*,j}` for each objective: `solve_lp` on the raw canonical cost `j`.
pub fn single_objective_optima(canonical: &[Vec<f64>], poly: &Polytope) -> Result<Vec<Vec<f64>>> {
    canonical.iter().map(|c| solve_lp(c, poly).map(|s| s.primal)).collect()
}

#[cfg(test)]
mod tests {
    use super::super::testing::enumerate_vertices;
    use super::*;
    use crate::molp::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matching_2x2() -> Polytope {
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

    fn nondominated_within(points: &[Vec<f64>], candidate: &[f64]) -> bool {
        !points.iter().any(|p| dominates_slice(p, candidate, Orientation::Min).unwrap())
    }

    #[test]
    fn identical_objectives_give_one_solution() {
        let y = vec![3.0, 1.0, 2.0, 5.0];
        let costs = vec![y.clone(), y];
        let data = solve_multiobjective_costs(&costs, &costs, &matching_2x2(), 5).unwrap();
        // canonical = native here, so this maximizes by minimizing; one solution either way
        assert_eq!(data.pareto_set.len(), 1);
    }

    #[test]
    fn conflicting_matching_has_two_front_points() {
        // objective 1 prefers the identity matching, objective 2 the swap
        let native = vec![vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 1.0, 1.0, 0.0]];
        let canonical: Vec<Vec<f64>> = native.iter().map(|y| y.iter().map(|v| -v).collect()).collect();
        let poly = matching_2x2();
        let data = solve_multiobjective_costs(&canonical, &native, &poly, 5).unwrap();
        assert!(data.pareto_front.len() >= 2);
        assert!(data.pareto_front.contains(&vec![2.0, 0.0]) && data.pareto_front.contains(&vec![0.0, 2.0]));
        // oracle: every vertex of the matching polytope, in scalarized objective space
        let normalized = NormalizedCosts::new(&canonical).unwrap();
        let eval = |v: &[f64]| -> Vec<f64> { (0..2).map(|j| dot(normalized.values(j), v)).collect() };
        let all: Vec<Vec<f64>> = enumerate_vertices(&poly).iter().map(|v| eval(v)).collect();
        let returned: Vec<Vec<f64>> = data.pareto_set.iter().map(|p| eval(p)).collect();
        for f in &returned {
            assert!(nondominated_within(&all, f));
            for g in &returned {
                assert!(!dominates_slice(g, f, Orientation::Min).unwrap());
            }
        }
        for (pi, f) in data.pareto_set.iter().zip(&data.pareto_front) {
            assert_eq!(&native.iter().map(|y| dot(y, pi)).collect::<Vec<_>>(), f);
        }
    }

    #[test]
    fn positive_weight_optima_are_pareto_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..40 {
            let n = rng.random_range(3..=6);
            let m = rng.random_range(1..=5);
            let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let b = rows.iter().map(|r: &Vec<f64>| r.iter().sum::<f64>() * 0.5 + 0.3).collect();
            let poly = Polytope::new(rows, b, vec![(0.0, 1.0); n]).unwrap();
            let costs: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            // the mean shift of the normalization scales with Σπ, so optimality
            // is with respect to the normalized objectives
            let normalized = NormalizedCosts::new(&costs).unwrap();
            let objectives: Vec<Vec<f64>> = (0..2).map(|j| normalized.values(j).to_vec()).collect();
            let verts: Vec<Vec<f64>> = enumerate_vertices(&poly)
                .iter()
                .map(|v| objectives.iter().map(|c| dot(c, v)).collect())
                .collect();
            for w in weight_grid(2, 5).unwrap().into_iter().filter(|w| w.is_strictly_positive()) {
                let c = weighted_cost(&normalized, &w).unwrap();
                let sol = solve_lp(&c, &poly).unwrap();
                let f: Vec<f64> = objectives.iter().map(|y| dot(y, &sol.primal)).collect();
                // tolerance: shrink f slightly toward worse so ties at 1e-9 don't count
                let shifted: Vec<f64> = f.iter().map(|v| v - 1e-9).collect();
                assert!(nondominated_within(&verts, &shifted));
            }
        }
    }

    #[test]
    fn candidate_weights_include_uniform() {
        let w = pareto_candidate_weights(2, 5).unwrap();
        assert_eq!(w.len(), 7);
        assert_eq!(w.last().unwrap().values(), &[0.5, 0.5]);
        assert_eq!(pareto_candidate_weights(2, 4).unwrap().len(), 5);
    }
}
