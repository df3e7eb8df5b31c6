//! Parametric multi-objective linear programs and Pareto relations.
//!
//! Every instance is `min/max [y^1·π, …, y^T·π]` subject to `Aπ ≤ b` and
//! per-variable bounds. Costs are stored in the instance's native orientation;
//! [`MolpInstance::canonical_costs`] returns them in minimization form, which is
//! the convention every solver and loss works in.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Optimization direction of an instance or a front.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Min,
    Max,
}

impl Orientation {
    /// Multiplier mapping native values to minimization form.
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Min => 1.0,
            Orientation::Max => -1.0,
        }
    }

    /// True when `a` is at least as good as `b` in this orientation.
    pub fn weakly_better(self, a: f64, b: f64) -> bool {
        self.sign() * a <= self.sign() * b
    }
}

impl std::str::FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Orientation::Min),
            "max" => Ok(Orientation::Max),
            other => Err(Error::Config(format!("unknown orientation `{other}`"))),
        }
    }
}

/// A point in objective space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(Vec<f64>);

impl ObjectiveVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("objective vector"));
        }
        Ok(ObjectiveVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<ObjectiveVector> for Vec<f64> {
    fn from(v: ObjectiveVector) -> Self {
        v.0
    }
}

/// Where a front came from; carried for reporting only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontSource {
    Predicted,
    True,
    Unspecified,
}

/// A nonempty, Pareto-filtered set of objective vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontApproximation {
    pub points: Vec<ObjectiveVector>,
    pub orientation: Orientation,
    pub source: FrontSource,
}

impl FrontApproximation {
    pub fn with_source(mut self, source: FrontSource) -> Self {
        self.source = source;
        self
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, ObjectiveVector::len)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Pareto dominance of `phi` over `psi`.
pub fn dominates(phi: &ObjectiveVector, psi: &ObjectiveVector, orientation: Orientation) -> Result<bool> {
    dominates_slice(phi.values(), psi.values(), orientation)
}

pub(crate) fn dominates_slice(phi: &[f64], psi: &[f64], orientation: Orientation) -> Result<bool> {
    if phi.len() != psi.len() {
        return Err(Error::dim("dominates", phi.len(), psi.len()));
    }
    let s = orientation.sign();
    let mut strict = false;
    for (a, b) in phi.iter().zip(psi) {
        let (a, b) = (s * a, s * b);
        if a > b {
            return Ok(false);
        }
        if a < b {
            strict = true;
        }
    }
    Ok(strict)
}

/// Indices of the non-dominated members of `points`, in input order.
/// Exact duplicates keep their first occurrence.
pub fn pareto_filter_indices(points: &[Vec<f64>], orientation: Orientation) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(Error::EmptyFront("pareto_filter input"));
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::dim("pareto_filter", dim, p.len()));
    }
    let mut kept = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate() {
            if j == i {
                continue;
            }
            if dominates_slice(q, p, orientation)? || (j < i && q == p) {
                continue 'outer;
            }
        }
        kept.push(i);
    }
    Ok(kept)
}

/// The non-dominated subset of `points`.
pub fn pareto_filter(points: &[ObjectiveVector], orientation: Orientation) -> Result<FrontApproximation> {
    let raw: Vec<Vec<f64>> = points.iter().map(|p| p.values().to_vec()).collect();
    let kept = pareto_filter_indices(&raw, orientation)?;
    Ok(FrontApproximation {
        points: kept.into_iter().map(|i| points[i].clone()).collect(),
        orientation,
        source: FrontSource::Unspecified,
    })
}

fn serialize_bounds<S: Serializer>(bounds: &[(f64, f64)], s: S) -> Result<S::Ok, S::Error> {
    let as_opt: Vec<(Option<f64>, Option<f64>)> = bounds
        .iter()
        .map(|&(lo, hi)| (lo.is_finite().then_some(lo), hi.is_finite().then_some(hi)))
        .collect();
    as_opt.serialize(s)
}

fn deserialize_bounds<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(f64, f64)>, D::Error> {
    let raw: Vec<(Option<f64>, Option<f64>)> = Vec::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|(lo, hi)| (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)))
        .collect())
}

/// One problem instance. Field names follow the on-disk JSON schema; infinite
/// bounds are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MolpInstance {
    pub id: usize,
    pub n_vars: usize,
    pub t_objectives: usize,
    pub orientation: Orientation,
    /// Feature rows; one per decision variable for the bundled benchmarks.
    pub features: Vec<Vec<f64>>,
    /// `t_objectives` cost vectors of length `n_vars`, native orientation.
    pub costs: Vec<Vec<f64>>,
    /// Sparse constraint matrix as `(row, col, value)` triplets.
    #[serde(rename = "A")]
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    #[serde(serialize_with = "serialize_bounds", deserialize_with = "deserialize_bounds")]
    pub bounds: Vec<(f64, f64)>,
    pub pareto_set: Vec<Vec<f64>>,
    pub pareto_front: Vec<Vec<f64>>,
}

impl MolpInstance {
    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    /// Dense row-major copy of `A`.
    pub fn dense_a(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n_vars]; self.n_rows()];
        for &(r, c, v) in &self.a {
            a[r][c] += v;
        }
        a
    }

    /// Costs in minimization form.
    pub fn canonical_costs(&self) -> Vec<Vec<f64>> {
        let s = self.orientation.sign();
        self.costs.iter().map(|y| y.iter().map(|v| s * v).collect()).collect()
    }

    /// `A π`.
    pub fn row_activity(&self, pi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows()];
        for &(r, c, v) in &self.a {
            out[r] += v * pi[c];
        }
        out
    }

    /// Checks every structural invariant of the instance.
    pub fn validate(&self) -> Result<()> {
        if self.costs.len() != self.t_objectives {
            return Err(Error::dim("costs (objectives)", self.t_objectives, self.costs.len()));
        }
        for y in &self.costs {
            if y.len() != self.n_vars {
                return Err(Error::dim("costs (variables)", self.n_vars, y.len()));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("costs"));
            }
        }
        if self.bounds.len() != self.n_vars {
            return Err(Error::dim("bounds", self.n_vars, self.bounds.len()));
        }
        if self.bounds.iter().any(|(lo, hi)| lo > hi || lo.is_nan() || hi.is_nan()) {
            return Err(Error::Domain("bounds with lo > hi".into()));
        }
        let m = self.n_rows();
        for &(r, c, v) in &self.a {
            if r >= m {
                return Err(Error::dim("A row index", m, r));
            }
            if c >= self.n_vars {
                return Err(Error::dim("A column index", self.n_vars, c));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("A"));
            }
        }
        if self.pareto_set.len() != self.pareto_front.len() {
            return Err(Error::dim("pareto_front", self.pareto_set.len(), self.pareto_front.len()));
        }
        for (pi, front) in self.pareto_set.iter().zip(&self.pareto_front) {
            let f = evaluate_objectives(self, pi)?;
            if front.len() != self.t_objectives {
                return Err(Error::dim("pareto_front entry", self.t_objectives, front.len()));
            }
            if f.values().iter().zip(front).any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + a.abs())) {
                return Err(Error::Domain("pareto_front does not match pareto_set".into()));
            }
            if !check_feasible(self, pi, 1e-8) {
                return Err(Error::Domain("infeasible pareto_set member".into()));
            }
        }
        Ok(())
    }
}

/// `[y^1·π, …, y^T·π]` in the instance's native orientation.
pub fn evaluate_objectives(instance: &MolpInstance, pi: &[f64]) -> Result<ObjectiveVector> {
    if pi.len() != instance.n_vars {
        return Err(Error::dim("evaluate_objectives", instance.n_vars, pi.len()));
    }
    ObjectiveVector::new(instance.costs.iter().map(|y| dot(y, pi)).collect())
}

/// `Aπ ≤ b + tol` and bounds within `tol`.
pub fn check_feasible(instance: &MolpInstance, pi: &[f64], tol: f64) -> bool {
    if pi.len() != instance.n_vars || pi.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let bounds_ok = pi
        .iter()
        .zip(&instance.bounds)
        .all(|(&x, &(lo, hi))| x >= lo - tol && x <= hi + tol);
    bounds_ok
        && instance
            .row_activity(pi)
            .iter()
            .zip(&instance.b)
            .all(|(ax, b)| *ax <= b + tol)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const REQUIRED_FIELDS: [&str; 11] = [
    "id",
    "n_vars",
    "t_objectives",
    "orientation",
    "features",
    "costs",
    "A",
    "b",
    "bounds",
    "pareto_set",
    "pareto_front",
];

fn field<T: DeserializeOwned>(obj: &Map<String, Value>, name: &str, path: &str) -> Result<T> {
    let v = obj.get(name).ok_or_else(|| Error::Parse {
        path: path.to_string(),
        field: name.to_string(),
        message: "missing field".into(),
    })?;
    serde_json::from_value(v.clone()).map_err(|e| Error::Parse {
        path: path.to_string(),
        field: name.to_string(),
        message: e.to_string(),
    })
}

/// Parses an instance from JSON text; `origin` names the source in errors.
pub fn parse_instance(text: &str, origin: &str) -> Result<MolpInstance> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        field: "<document>".into(),
        message: e.to_string(),
    })?;
    let obj = value.as_object().ok_or_else(|| Error::Parse {
        path: origin.to_string(),
        field: "<document>".into(),
        message: "expected a JSON object".into(),
    })?;
    for name in REQUIRED_FIELDS {
        if !obj.contains_key(name) {
            return Err(Error::Parse {
                path: origin.to_string(),
                field: name.to_string(),
                message: "missing field".into(),
            });
        }
    }
    let bounds_raw: Vec<(Option<f64>, Option<f64>)> = field(obj, "bounds", origin)?;
    let instance = MolpInstance {
        id: field(obj, "id", origin)?,
        n_vars: field(obj, "n_vars", origin)?,
        t_objectives: field(obj, "t_objectives", origin)?,
        orientation: field(obj, "orientation", origin)?,
        features: field(obj, "features", origin)?,
        costs: field(obj, "costs", origin)?,
        a: field(obj, "A", origin)?,
        b: field(obj, "b", origin)?,
        bounds: bounds_raw
            .into_iter()
            .map(|(lo, hi)| (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)))
            .collect(),
        pareto_set: field(obj, "pareto_set", origin)?,
        pareto_front: field(obj, "pareto_front", origin)?,
    };
    instance.validate().map_err(|e| Error::Parse {
        path: origin.to_string(),
        field: "<invariants>".into(),
        message: e.to_string(),
    })?;
    Ok(instance)
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<MolpInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_instance(&text, &path.display().to_string())
}

pub fn write_instance(instance: &MolpInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string(instance).expect("instance serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Train/validation/test index lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Contiguous split of `n` indices by fractions; validation and test get
    /// at least one index each when `n ≥ 3`.
    pub fn contiguous(n: usize, train_frac: f64, val_frac: f64) -> Split {
        let mut n_val = ((n as f64) * val_frac).round() as usize;
        let mut n_train = ((n as f64) * train_frac).round() as usize;
        if n >= 3 {
            n_val = n_val.max(1);
            n_train = n_train.min(n - n_val - 1).max(1);
        } else {
            n_train = n;
            n_val = 0;
        }
        let n_train = n_train.min(n);
        let n_val = n_val.min(n - n_train);
        Split {
            train: (0..n_train).collect(),
            validation: (n_train..n_train + n_val).collect(),
            test: (n_train + n_val..n).collect(),
        }
    }
}

/// How the cost coefficients of a benchmark should be interpreted by models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    /// Unrestricted real values.
    #[default]
    Real,
    /// Values in [0, 1]; models predict them through a sigmoid link.
    Probability,
}

/// Instances plus their split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub instances: Vec<MolpInstance>,
    pub split: Split,
    pub cost_kind: CostKind,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        let n = self.instances.len();
        let mut seen = vec![false; n];
        for &i in self
            .split
            .train
            .iter()
            .chain(&self.split.validation)
            .chain(&self.split.test)
        {
            if i >= n {
                return Err(Error::dim("split index", n, i));
            }
            if seen[i] {
                return Err(Error::Domain(format!("index {i} appears in more than one split")));
            }
            seen[i] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Domain(format!("index {missing} is not in any split")));
        }
        for inst in &self.instances {
            inst.validate()?;
        }
        Ok(())
    }

    pub fn t_objectives(&self) -> usize {
        self.instances.first().map_or(0, |i| i.t_objectives)
    }

    pub fn feature_dim(&self) -> usize {
        self.instances
            .first()
            .and_then(|i| i.features.first())
            .map_or(0, Vec::len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ov(v: &[f64]) -> ObjectiveVector {
        ObjectiveVector::new(v.to_vec()).unwrap()
    }

    pub(crate) fn tiny_instance() -> MolpInstance {
        // 2x2 assignment polytope: rows ≤ 1, columns ≤ 1.
        MolpInstance {
            id: 0,
            n_vars: 2,
            t_objectives: 2,
            orientation: Orientation::Min,
            features: vec![vec![0.5], vec![-0.5]],
            costs: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            a: vec![(0, 0, 1.0), (0, 1, 1.0)],
            b: vec![1.0],
            bounds: vec![(0.0, 1.0); 2],
            pareto_set: vec![vec![0.0, 0.0]],
            pareto_front: vec![vec![0.0, 0.0]],
        }
    }

    #[test]
    fn dominance_examples() {
        let min = Orientation::Min;
        assert!(dominates(&ov(&[1.0, 2.0]), &ov(&[2.0, 3.0]), min).unwrap());
        assert!(!dominates(&ov(&[1.0, 2.0]), &ov(&[1.0, 2.0]), min).unwrap());
        assert!(!dominates(&ov(&[1.0, 3.0]), &ov(&[2.0, 1.0]), min).unwrap());
        assert!(dominates(&ov(&[1.0]), &ov(&[1.0, 2.0]), min).is_err());
    }

    #[test]
    fn filter_examples() {
        let pts = vec![ov(&[1.0, 2.0]), ov(&[2.0, 1.0]), ov(&[2.0, 2.0])];
        let f = pareto_filter(&pts, Orientation::Min).unwrap();
        assert_eq!(f.points, vec![ov(&[1.0, 2.0]), ov(&[2.0, 1.0])]);
        let single = pareto_filter(&[ov(&[0.0, 0.0])], Orientation::Min).unwrap();
        assert_eq!(single.points, vec![ov(&[0.0, 0.0])]);
        assert!(matches!(pareto_filter(&[], Orientation::Min), Err(Error::EmptyFront(_))));
    }

    #[test]
    fn filter_collapses_duplicates_to_first() {
        let pts = [ov(&[1.0, 2.0]), ov(&[1.0, 2.0]), ov(&[2.0, 1.0])];
        let idx = pareto_filter_indices(
            &pts.iter().map(|p| p.values().to_vec()).collect::<Vec<_>>(),
            Orientation::Min,
        )
        .unwrap();
        assert_eq!(idx, vec![0, 2]);
    }

    fn brute_force_front(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for p in points {
            let dominated = points.iter().any(|q| {
                q.iter().zip(p).all(|(a, b)| a <= b) && q.iter().zip(p).any(|(a, b)| a < b)
            });
            if !dominated && !out.contains(p) {
                out.push(p.clone());
            }
        }
        out
    }

    #[test]
    fn filter_matches_brute_force_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random(), rng.random()]).collect();
        let ovs: Vec<_> = pts.iter().map(|p| ov(p)).collect();
        let got: Vec<Vec<f64>> = pareto_filter(&ovs, Orientation::Min)
            .unwrap()
            .points
            .into_iter()
            .map(Into::into)
            .collect();
        assert_eq!(got, brute_force_front(&pts));
    }

    #[test]
    fn objective_examples() {
        let mut inst = tiny_instance();
        assert_eq!(evaluate_objectives(&inst, &[1.0, 1.0]).unwrap().values(), &[1.0, 1.0]);
        assert_eq!(evaluate_objectives(&inst, &[0.0, 0.0]).unwrap().values(), &[0.0, 0.0]);
        assert!(evaluate_objectives(&inst, &[0.0]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        inst.n_vars = 5;
        inst.costs = (0..2).map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let pi: Vec<f64> = (0..5).map(|_| rng.random()).collect();
        let f = evaluate_objectives(&inst, &pi).unwrap();
        for (j, y) in inst.costs.iter().enumerate() {
            let mut acc = 0.0;
            for k in 0..5 {
                acc += y[k] * pi[k];
            }
            assert!((f.values()[j] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn feasibility_examples() {
        let inst = tiny_instance();
        assert!(check_feasible(&inst, &[1.0, 0.0], 1e-9));
        assert!(!check_feasible(&inst, &[2.0, 0.0], 1e-9));
        // Aπ = b exactly.
        assert!(check_feasible(&inst, &[0.5, 0.5], 1e-12));
    }

    #[test]
    fn round_trip_small_instance() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.json");
        let mut inst = tiny_instance();
        inst.bounds[1] = (f64::NEG_INFINITY, 1.0);
        write_instance(&inst, &path).unwrap();
        assert_eq!(read_instance(&path).unwrap(), inst);
    }

    #[test]
    fn round_trip_hundred_vars() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100;
        let inst = MolpInstance {
            id: 9,
            n_vars: n,
            t_objectives: 2,
            orientation: Orientation::Max,
            features: (0..n).map(|_| vec![rng.random::<f64>() * 1e-3, rng.random()]).collect(),
            costs: (0..2).map(|_| (0..n).map(|_| rng.random::<f64>() / 3.0).collect()).collect(),
            a: (0..n).map(|c| (c % 10, c, 1.0 / 7.0)).collect(),
            b: vec![1.0; 10],
            bounds: vec![(0.0, 1.0); n],
            pareto_set: vec![],
            pareto_front: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.json");
        write_instance(&inst, &path).unwrap();
        let back = read_instance(&path).unwrap();
        let max_diff = inst
            .costs
            .iter()
            .flatten()
            .zip(back.costs.iter().flatten())
            .chain(inst.features.iter().flatten().zip(back.features.iter().flatten()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_diff < 1e-12);
        assert_eq!(back, inst);
    }

    #[test]
    fn missing_costs_is_a_named_parse_error() {
        let mut v = serde_json::to_value(tiny_instance()).unwrap();
        v.as_object_mut().unwrap().remove("costs");
        match parse_instance(&v.to_string(), "mem") {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "costs"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_field_is_named() {
        let mut v = serde_json::to_value(tiny_instance()).unwrap();
        v["b"] = Value::String("oops".into());
        match parse_instance(&v.to_string(), "mem") {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dataset_split_validation() {
        let inst = tiny_instance();
        let mut ds = Dataset {
            instances: vec![inst.clone(), inst.clone(), inst],
            split: Split { train: vec![0], validation: vec![1], test: vec![2] },
            cost_kind: CostKind::Real,
        };
        ds.validate().unwrap();
        ds.split.test = vec![1];
        assert!(ds.validate().is_err());
        let s = Split::contiguous(10, 0.6, 0.2);
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (6, 2, 2));
    }

    fn vec2() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, 3)
    }

    proptest! {
        #[test]
        fn dominance_is_a_strict_partial_order(a in vec2(), b in vec2(), c in vec2()) {
            let (a, b, c) = (ov(&a), ov(&b), ov(&c));
            let min = Orientation::Min;
            prop_assert!(!dominates(&a, &a, min).unwrap());
            prop_assert!(!(dominates(&a, &b, min).unwrap() && dominates(&b, &a, min).unwrap()));
            if dominates(&a, &b, min).unwrap() && dominates(&b, &c, min).unwrap() {
                prop_assert!(dominates(&a, &c, min).unwrap());
            }
        }

        #[test]
        fn max_orientation_is_negated_min(a in vec2(), b in vec2()) {
            let neg = |v: &Vec<f64>| ov(&v.iter().map(|x| -x).collect::<Vec<_>>());
            prop_assert_eq!(
                dominates(&ov(&a), &ov(&b), Orientation::Max).unwrap(),
                dominates(&neg(&a), &neg(&b), Orientation::Min).unwrap()
            );
        }

        #[test]
        fn filter_output_is_mutually_nondominated_and_covers_removed(
            pts in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..200)
        ) {
            let ovs: Vec<_> = pts.iter().map(|p| ov(p)).collect();
            let front = pareto_filter(&ovs, Orientation::Min).unwrap();
            for p in &front.points {
                for q in &front.points {
                    prop_assert!(!dominates(p, q, Orientation::Min).unwrap());
                }
            }
            for p in &ovs {
                let kept = front.points.contains(p);
                let covered = front.points.iter().any(|q| dominates(q, p, Orientation::Min).unwrap());
                prop_assert!(kept || covered);
            }
        }

        #[test]
        fn objectives_are_linear(
            p in prop::collection::vec(-1.0f64..1.0, 2),
            q in prop::collection::vec(-1.0f64..1.0, 2),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let inst = tiny_instance();
            let mix: Vec<f64> = p.iter().zip(&q).map(|(x, y)| alpha * x + beta * y).collect();
            let fm = evaluate_objectives(&inst, &mix).unwrap();
            let fp = evaluate_objectives(&inst, &p).unwrap();
            let fq = evaluate_objectives(&inst, &q).unwrap();
            for j in 0..2 {
                let lin = alpha * fp.values()[j] + beta * fq.values()[j];
                prop_assert!((fm.values()[j] - lin).abs() < 1e-9);
            }
        }
    }
}
