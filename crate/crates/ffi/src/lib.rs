//! C ABI for the `modfl` library.
//!
//! Conventions:
//! - every fallible function returns a [`ModflStatus`]; `MODFL_STATUS_OK` is 0
//! - on failure, [`modfl_last_error`] returns a message for the calling thread
//! - datasets and models are opaque handles released with their `_free`
//!   function; passing NULL to a `_free` function is a no-op
//! - matrices are dense, row-major `double` arrays
//! - panics never cross the boundary; they surface as `MODFL_STATUS_PANIC`

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use modfl::benchmarks::{gen_bipartite, read_dataset, write_dataset, BipartiteConfig, Manifest};
use modfl::metrics::{evaluate_model, gd, hypervolume, mpfe};
use modfl::molp::{FrontApproximation, FrontSource, ObjectiveVector};
use modfl::ot::{srmmd_grad, SrmmdConfig};
use modfl::predictor::{CostModel, Link, MlpModel, OracleModel, PredictorParams};
use modfl::solver::{solve_lp, Polytope};
use modfl::{Dataset, Error, Orientation};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModflStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Domain = 4,
    Config = 5,
    Parse = 6,
    Io = 7,
    Infeasible = 8,
    Unbounded = 9,
    NoConvergence = 10,
    SingularKkt = 11,
    NonFinite = 12,
    Unsupported = 13,
    Aborted = 14,
    EmptyFront = 15,
    Panic = 16,
}

impl From<&Error> for ModflStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension { .. } => ModflStatus::Dimension,
            Error::EmptyFront(_) => ModflStatus::EmptyFront,
            Error::Domain(_) => ModflStatus::Domain,
            Error::Config(_) => ModflStatus::Config,
            Error::Parse { .. } => ModflStatus::Parse,
            Error::Io { .. } => ModflStatus::Io,
            Error::Infeasible => ModflStatus::Infeasible,
            Error::Unbounded => ModflStatus::Unbounded,
            Error::NoConvergence { .. } => ModflStatus::NoConvergence,
            Error::SingularKkt { .. } => ModflStatus::SingularKkt,
            Error::NonFinite(_) => ModflStatus::NonFinite,
            Error::Unsupported(_) => ModflStatus::Unsupported,
            Error::Aborted(_) => ModflStatus::Aborted,
        }
    }
}

/// Which instances an evaluation covers.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModflSplit {
    Train = 0,
    Validation = 1,
    Test = 2,
    All = 3,
}

/// Aggregate metrics of one evaluation. `har` is NaN when no instance has a
/// positive true hypervolume.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModflMetrics {
    pub gd: f64,
    pub mpfe: f64,
    pub har: f64,
    pub regret: f64,
    pub instances: usize,
    pub har_skipped: usize,
    pub regret_skipped: usize,
}

/// Opaque dataset handle.
pub struct ModflDataset {
    dataset: Dataset,
    manifest: Manifest,
}

/// Opaque trained-model handle.
pub struct ModflModel {
    params: PredictorParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(ModflStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

type FfiResult = Result<(), Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> ModflStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ModflStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            ModflStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(ModflStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(ModflStatus::InvalidArgument, msg.into())
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn path(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

fn rows(flat: &[f64], r: usize, c: usize) -> Vec<Vec<f64>> {
    (0..r).map(|i| flat[i * c..(i + 1) * c].to_vec()).collect()
}

unsafe fn polytope(
    n: usize,
    m: usize,
    a: *const f64,
    b: *const f64,
    lower: *const f64,
    upper: *const f64,
) -> Result<Polytope, Failure> {
    let a = slice(a, n * m, "a")?;
    let b = slice(b, m, "b")?;
    let lo = slice(lower, n, "lower")?;
    let hi = slice(upper, n, "upper")?;
    Ok(Polytope::new(rows(a, m, n), b.to_vec(), lo.iter().copied().zip(hi.iter().copied()).collect())?)
}

unsafe fn front(points: *const f64, k: usize, t: usize) -> Result<FrontApproximation, Failure> {
    if k == 0 || t == 0 {
        return Err(invalid("fronts need at least one point and one objective"));
    }
    let flat = slice(points, k * t, "points")?;
    let points = rows(flat, k, t).into_iter().map(ObjectiveVector::new).collect::<Result<Vec<_>, _>>()?;
    Ok(FrontApproximation { points, orientation: Orientation::Min, source: FrontSource::Unspecified })
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn modfl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn modfl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads a dataset directory.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn modfl_dataset_read(dir: *const c_char, out: *mut *mut ModflDataset) -> ModflStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (dataset, manifest) = read_dataset(&path(dir)?)?;
        *out = Box::into_raw(Box::new(ModflDataset { dataset, manifest }));
        Ok(())
    })
}

/// Generates a bipartite matching dataset with `nodes` nodes per instance.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn modfl_dataset_generate_bipartite(
    nodes: usize,
    instances: usize,
    rho: f64,
    seed: u64,
    out: *mut *mut ModflDataset,
) -> ModflStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = BipartiteConfig { nodes, instances, rho, seed, ..BipartiteConfig::default() };
        let dataset = gen_bipartite(&cfg)?;
        let config = serde_json::to_value(&cfg).expect("config serializes");
        let manifest = Manifest::new("bipartite", seed, config, &dataset);
        *out = Box::into_raw(Box::new(ModflDataset { dataset, manifest }));
        Ok(())
    })
}

/// Writes instance files and the manifest into `dir`.
///
/// # Safety
/// `ds` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn modfl_dataset_write(ds: *const ModflDataset, dir: *const c_char) -> ModflStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        write_dataset(&path(dir)?, &ds.dataset, &ds.manifest)?;
        Ok(())
    })
}

/// Number of instances, or 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn modfl_dataset_len(ds: *const ModflDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.dataset.instances.len())
}

/// Variables, objectives and feature width of instance `index`.
///
/// # Safety
/// `ds` must be a live handle; output pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn modfl_instance_shape(
    ds: *const ModflDataset,
    index: usize,
    n_vars: *mut usize,
    t_objectives: *mut usize,
    n_features: *mut usize,
) -> ModflStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let inst = ds
            .dataset
            .instances
            .get(index)
            .ok_or_else(|| invalid(format!("instance {index} out of range")))?;
        if let Some(p) = n_vars.as_mut() {
            *p = inst.n_vars;
        }
        if let Some(p) = t_objectives.as_mut() {
            *p = inst.t_objectives;
        }
        if let Some(p) = n_features.as_mut() {
            *p = inst.features.first().map_or(0, Vec::len);
        }
        Ok(())
    })
}

/// Releases a dataset handle.
///
/// # Safety
/// `ds` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn modfl_dataset_free(ds: *mut ModflDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Loads a checkpoint written by `modfl train`.
///
/// # Safety
/// `file` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn modfl_model_load(file: *const c_char, out: *mut *mut ModflModel) -> ModflStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = PredictorParams::load(&path(file)?)?;
        *out = Box::into_raw(Box::new(ModflModel { params }));
        Ok(())
    })
}

/// Releases a model handle.
///
/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn modfl_model_free(model: *mut ModflModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Scores `model` on a split of `ds`. A NULL model predicts the true costs.
///
/// # Safety
/// `ds` must be a live handle, `model` NULL or a live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn modfl_evaluate(
    ds: *const ModflDataset,
    model: *const ModflModel,
    split: ModflSplit,
    denom: usize,
    out: *mut ModflMetrics,
) -> ModflStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let d = &ds.dataset;
        let indices: Vec<usize> = match split {
            ModflSplit::Train => d.split.train.clone(),
            ModflSplit::Validation => d.split.validation.clone(),
            ModflSplit::Test => d.split.test.clone(),
            ModflSplit::All => (0..d.instances.len()).collect(),
        };
        let mlp;
        let cost_model: &dyn CostModel = match model.as_ref() {
            None => &OracleModel,
            Some(m) => {
                if m.params.arch.input_dim != d.feature_dim() || m.params.arch.heads != d.t_objectives() {
                    return Err(Failure(ModflStatus::Dimension, "model and dataset shapes differ".into()));
                }
                mlp = MlpModel { params: m.params.clone(), link: Link::for_kind(d.cost_kind) };
                &mlp
            }
        };
        let (row, _) = evaluate_model(d, &indices, cost_model, denom, "ffi")?;
        *out = ModflMetrics {
            gd: row.gd,
            mpfe: row.mpfe,
            har: row.har,
            regret: row.r,
            instances: row.instances,
            har_skipped: row.har_skipped,
            regret_skipped: row.regret_skipped,
        };
        Ok(())
    })
}

/// Minimizes `c·x` subject to `A x ≤ b`, `lower ≤ x ≤ upper`. `a` is
/// `m × n`; infinite bounds are allowed. Writes a vertex optimum to `x_out`
/// (length `n`) and its value to `objective_out` (may be NULL).
///
/// # Safety
/// Array arguments must have the stated lengths.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn modfl_solve_lp(
    n: usize,
    m: usize,
    a: *const f64,
    b: *const f64,
    lower: *const f64,
    upper: *const f64,
    c: *const f64,
    x_out: *mut f64,
    objective_out: *mut f64,
) -> ModflStatus {
    guard(|| {
        let poly = polytope(n, m, a, b, lower, upper)?;
        let c = slice(c, n, "c")?;
        let x = slice_mut(x_out, n, "x_out")?;
        let sol = solve_lp(c, &poly)?;
        x.copy_from_slice(&sol.primal);
        if let Some(o) = objective_out.as_mut() {
            *o = sol.objective_value;
        }
        Ok(())
    })
}

/// Smoothed LP layer: `x = argmin c·x + γ‖x‖²` over the polytope, and, when
/// `upstream` is non-NULL, the vector-Jacobian product `(∂x/∂c)ᵀ upstream`
/// in `grad_c_out`. `gamma = 0` solves the plain LP.
///
/// # Safety
/// Array arguments must have the stated lengths.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn modfl_dslp(
    n: usize,
    m: usize,
    a: *const f64,
    b: *const f64,
    lower: *const f64,
    upper: *const f64,
    c: *const f64,
    gamma: f64,
    upstream: *const f64,
    x_out: *mut f64,
    grad_c_out: *mut f64,
) -> ModflStatus {
    guard(|| {
        let poly = polytope(n, m, a, b, lower, upper)?;
        let c = slice(c, n, "c")?;
        let x = slice_mut(x_out, n, "x_out")?;
        let d = modfl::dslp::forward(c, &poly, gamma)?;
        x.copy_from_slice(&d.primal);
        if !upstream.is_null() {
            let up = slice(upstream, n, "upstream")?;
            let g = slice_mut(grad_c_out, n, "grad_c_out")?;
            g.copy_from_slice(&d.backward(up)?);
        }
        Ok(())
    })
}

/// sRMMD between two `k × d` point sets. `epsilon ≤ 0` keeps the default
/// entropic regularization. Gradient outputs may be NULL.
///
/// # Safety
/// Array arguments must have length `k · d`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn modfl_srmmd(
    k: usize,
    d: usize,
    x: *const f64,
    y: *const f64,
    epsilon: f64,
    seed: u64,
    value_out: *mut f64,
    grad_x_out: *mut f64,
    grad_y_out: *mut f64,
) -> ModflStatus {
    guard(|| {
        let value_out = value_out.as_mut().ok_or_else(|| null("value_out"))?;
        let xs = rows(slice(x, k * d, "x")?, k, d);
        let ys = rows(slice(y, k * d, "y")?, k, d);
        let mut cfg = SrmmdConfig::default();
        if epsilon > 0.0 {
            cfg.epsilon = epsilon;
        }
        let res = srmmd_grad(&xs, &ys, &cfg, seed)?;
        *value_out = res.value;
        for (ptr, grad) in [(grad_x_out, &res.grad_x), (grad_y_out, &res.grad_y)] {
            if !ptr.is_null() {
                let out = slice_mut(ptr, k * d, "gradient")?;
                for (dst, src) in out.chunks_mut(d.max(1)).zip(grad) {
                    dst.copy_from_slice(src);
                }
            }
        }
        Ok(())
    })
}

/// Generational distance of `pred` (`k_pred × t`) to `truth` (`k_true × t`).
///
/// # Safety
/// Array arguments must have the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn modfl_gd(
    pred: *const f64,
    k_pred: usize,
    truth: *const f64,
    k_true: usize,
    t: usize,
    out: *mut f64,
) -> ModflStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = gd(&front(pred, k_pred, t)?, &front(truth, k_true, t)?)?;
        Ok(())
    })
}

/// Maximum Pareto-front error with exponent `p`.
///
/// # Safety
/// Array arguments must have the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn modfl_mpfe(
    pred: *const f64,
    k_pred: usize,
    truth: *const f64,
    k_true: usize,
    t: usize,
    p: f64,
    out: *mut f64,
) -> ModflStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = mpfe(&front(pred, k_pred, t)?, &front(truth, k_true, t)?, p)?;
        Ok(())
    })
}

/// Hypervolume of a minimization front (`k × t`, `t ≤ 3`) against
/// `reference`.
///
/// # Safety
/// Array arguments must have the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn modfl_hypervolume(
    points: *const f64,
    k: usize,
    t: usize,
    reference: *const f64,
    out: *mut f64,
) -> ModflStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = slice(reference, t, "reference")?;
        *out = hypervolume(&front(points, k, t)?, r)?.value;
        Ok(())
    })
}
