//! MoDFL training loop and the two-stage baseline.

use std::collections::VecDeque;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dslp;
use crate::error::{Error, Result};
use crate::losses::{
    combine, decision_loss, landscape_loss, landscape_value, pareto_set_loss, total_loss, Ablation, Components,
    Lambdas, LossReport, LANDSCAPE_SAMPLE_CAP,
};
use crate::molp::{check_feasible, CostKind, Dataset, MolpInstance};
use crate::ot::SrmmdConfig;
use crate::predictor::{Architecture, CostModel, Gradients, Link, MlpModel, PredictorParams};
use crate::rng::{mix, stream_rng, Stream};
use crate::scalarize::{weighted_cost, NormalizedCosts, WeightVector};
use crate::solver::{pareto_candidate_weights, solve_lp, Polytope};

/// Per-instance pools of feasible solutions, FIFO-evicted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolutionCache {
    pub capacity: usize,
    pools: Vec<VecDeque<Vec<f64>>>,
}

/// Feasibility tolerance enforced on cache insertions.
pub const CACHE_FEASIBILITY_TOL: f64 = 1e-6;

impl SolutionCache {
    pub fn new(instances: usize, capacity: usize) -> Self {
        SolutionCache { capacity, pools: vec![VecDeque::new(); instances] }
    }

    pub fn len(&self, i: usize) -> usize {
        self.pools[i].len()
    }

    pub fn is_empty(&self, i: usize) -> bool {
        self.pools[i].is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.pools.iter().map(|p| p.len()).collect()
    }

    /// Solutions of instance `i`, oldest first.
    pub fn solutions(&self, i: usize) -> Vec<Vec<f64>> {
        self.pools[i].iter().cloned().collect()
    }

    /// Inserts `pi` unless an equal solution (L∞ 1e-7) is present. Returns
    /// whether it was inserted. Infeasible solutions are an error.
    pub fn insert(&mut self, i: usize, instance: &MolpInstance, pi: Vec<f64>) -> Result<bool> {
        if !check_feasible(instance, &pi, CACHE_FEASIBILITY_TOL) {
            return Err(Error::Domain(format!("cache insertion infeasible for instance {}", instance.id)));
        }
        let pool = &mut self.pools[i];
        if pool.iter().any(|s| s.iter().zip(&pi).all(|(a, b)| (a - b).abs() <= 1e-7)) {
            return Ok(false);
        }
        if self.capacity == 0 {
            return Ok(false);
        }
        while pool.len() >= self.capacity {
            pool.pop_front();
        }
        pool.push_back(pi);
        Ok(true)
    }
}

/// Cache filled with each instance's true Pareto set, and the instances
/// left with fewer than two solutions.
pub fn seed_cache(dataset: &Dataset, capacity: usize) -> Result<(SolutionCache, Vec<usize>)> {
    let mut cache = SolutionCache::new(dataset.instances.len(), capacity);
    let mut flagged = Vec::new();
    for (i, inst) in dataset.instances.iter().enumerate() {
        for pi in &inst.pareto_set {
            cache.insert(i, inst, pi.clone())?;
        }
        if cache.len(i) < 2 {
            flagged.push(i);
        }
    }
    Ok((cache, flagged))
}

/// Hyperparameters shared by both training methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub gamma: f64,
    pub lambdas: Lambdas,
    pub p_solve: f64,
    pub seed: u64,
    pub ablation: Ablation,
    /// Grid weights solved per cache refresh.
    pub refresh_weights: usize,
    pub denom: usize,
    pub cache_capacity: usize,
    pub clip: Option<f64>,
    pub trunk: Vec<usize>,
    pub head: Vec<usize>,
    pub srmmd: SrmmdConfig,
    pub landscape_cap: usize,
    /// Decision loss on raw instead of normalized true costs.
    pub raw_decision: bool,
    /// Largest tolerated fraction of failed instance evaluations per epoch.
    pub failure_tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.1,
            batch_size: 8,
            max_epochs: 50,
            patience: 5,
            gamma: 0.35,
            lambdas: Lambdas::default(),
            p_solve: 1.0,
            seed: 0,
            ablation: Ablation::default(),
            refresh_weights: 3,
            denom: 5,
            cache_capacity: 50,
            clip: Some(10.0),
            trunk: vec![64, 64],
            head: vec![64],
            srmmd: SrmmdConfig::default(),
            landscape_cap: LANDSCAPE_SAMPLE_CAP,
            raw_decision: false,
            failure_tolerance: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be nonnegative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be positive");
        }
        if !(0.0..=1.0).contains(&self.p_solve) {
            return bad("p_solve must lie in [0,1]");
        }
        if self.denom == 0 {
            return bad("denom must be positive");
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return bad("clip must be positive");
            }
        }
        if !(0.0..=1.0).contains(&self.failure_tolerance) {
            return bad("failure_tolerance must lie in [0,1]");
        }
        self.lambdas.validate()?;
        self.srmmd.validate()
    }

    pub fn architecture(&self, dataset: &Dataset) -> Architecture {
        Architecture {
            input_dim: dataset.feature_dim(),
            trunk: self.trunk.clone(),
            head: self.head.clone(),
            heads: dataset.t_objectives(),
        }
    }
}

/// Batch-averaged training losses of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub l: f64,
    pub d: f64,
    pub ps: f64,
    pub total: f64,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_losses: EpochLosses,
    pub val_total: f64,
    pub cache_sizes: Vec<usize>,
    pub wall_time_s: f64,
}

/// Work done during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub dslp_calls: usize,
    pub solver_calls: usize,
    pub failures: usize,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation parameters.
    pub params: PredictorParams,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub counters: Counters,
    /// Instances whose seeded cache held fewer than two solutions.
    pub flagged: Vec<usize>,
}

impl TrainOutcome {
    pub fn model(&self, kind: CostKind) -> MlpModel {
        MlpModel { params: self.params.clone(), link: Link::for_kind(kind) }
    }
}

/// Cost predictions of the network with everything needed for backprop.
struct Forward {
    /// Native-orientation predicted costs.
    native: Vec<Vec<f64>>,
    tape: crate::predictor::Tape,
}

fn predict(params: &PredictorParams, link: Link, inst: &MolpInstance) -> Result<Forward> {
    let (raw, tape) = params.predict(&inst.features)?;
    let native = raw.into_iter().map(|h| h.into_iter().map(|z| link.apply(z)).collect()).collect();
    Ok(Forward { native, tape })
}

fn to_canonical(inst: &MolpInstance, costs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let s = inst.orientation.sign();
    costs.iter().map(|c| c.iter().map(|v| s * v).collect()).collect()
}

/// Gradient with respect to canonical predicted costs → gradient with
/// respect to raw network scores.
fn to_raw_grad(inst: &MolpInstance, link: Link, native: &[Vec<f64>], g_canon: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let s = inst.orientation.sign();
    g_canon
        .iter()
        .zip(native)
        .map(|(g, y)| g.iter().zip(y).map(|(gv, yv)| s * gv * link.derivative_from_output(*yv)).collect())
        .collect()
}

/// MoDFL losses of one instance for canonical predicted costs, optionally
/// with their gradient.
struct InstanceEval {
    components: Components,
    grad: Option<Vec<Vec<f64>>>,
}

struct Context<'a> {
    cfg: &'a TrainConfig,
    lambdas: Lambdas,
}

impl Context<'_> {
    fn decision_costs(&self, inst: &MolpInstance) -> Result<Vec<Vec<f64>>> {
        let canon = inst.canonical_costs();
        if self.cfg.raw_decision {
            Ok(canon)
        } else {
            let n = NormalizedCosts::new(&canon)?;
            Ok((0..n.t()).map(|j| n.values(j).to_vec()).collect())
        }
    }

    /// Losses at predicted canonical costs `pred`. The decision comes from the
    /// smoothed layer at `gamma`; `gamma = 0` is the exact LP decision.
    #[allow(clippy::too_many_arguments)]
    fn evaluate(
        &self,
        inst: &MolpInstance,
        poly: &Polytope,
        pred: &[Vec<f64>],
        gamma: f64,
        cache: &[Vec<f64>],
        ot_index: u64,
        want_grad: bool,
        counters: &mut Counters,
    ) -> Result<InstanceEval> {
        let t = pred.len();
        let normalized = NormalizedCosts::new(pred)?;
        let c = weighted_cost(&normalized, &WeightVector::uniform(t))?;
        counters.dslp_calls += 1;
        let diff = dslp::forward(&c, poly, gamma)?;
        let mut comp = Components::default();
        let mut g_pi = vec![0.0; inst.n_vars];
        let l = self.lambdas;
        if l.pareto_set > 0.0 {
            let ps = pareto_set_loss(&diff.primal, &inst.pareto_set)?;
            comp.pareto_set = ps.value;
            for (g, v) in g_pi.iter_mut().zip(&ps.grad) {
                *g += l.pareto_set * v;
            }
        }
        if l.decision > 0.0 {
            let d = decision_loss(&self.decision_costs(inst)?, &diff.primal)?;
            comp.decision = d.value;
            for (g, v) in g_pi.iter_mut().zip(&d.grad) {
                *g += l.decision * v;
            }
        }
        let truth = inst.canonical_costs();
        let srmmd_seed = mix(self.cfg.seed, 0x6c61_6e64, inst.id as u64);
        let mut sub_rng = stream_rng(self.cfg.seed, Stream::OtSampling, ot_index);
        let mut grad = None;
        if want_grad {
            let dc = diff.backward(&g_pi)?;
            let per: Vec<Vec<f64>> = (0..t).map(|_| dc.iter().map(|v| v / t as f64).collect()).collect();
            let mut g = normalized.backward(&per);
            if l.landscape > 0.0 {
                let out = landscape_loss(&truth, pred, cache, &self.cfg.srmmd, self.cfg.landscape_cap, srmmd_seed, &mut sub_rng)?;
                comp.landscape = out.value;
                for (gj, lj) in g.iter_mut().zip(&out.grad) {
                    for (a, b) in gj.iter_mut().zip(lj) {
                        *a += l.landscape * b;
                    }
                }
            }
            grad = Some(g);
        } else if l.landscape > 0.0 {
            comp.landscape =
                landscape_value(&truth, pred, cache, &self.cfg.srmmd, self.cfg.landscape_cap, srmmd_seed, &mut sub_rng)?;
        }
        Ok(InstanceEval { components: comp, grad })
    }
}

/// Refreshes the cache of instance `i` with LP solutions of the predicted
/// problem under `k` random grid weights.
#[allow(clippy::too_many_arguments)]
fn refresh_cache<R: Rng>(
    cache: &mut SolutionCache,
    i: usize,
    inst: &MolpInstance,
    poly: &Polytope,
    pred: &[Vec<f64>],
    cfg: &TrainConfig,
    rng: &mut R,
    counters: &mut Counters,
) -> Result<()> {
    let weights = pareto_candidate_weights(pred.len(), cfg.denom)?;
    let normalized = NormalizedCosts::new(pred)?;
    for _ in 0..cfg.refresh_weights {
        let w = &weights[rng.random_range(0..weights.len())];
        let c = weighted_cost(&normalized, w)?;
        counters.solver_calls += 1;
        let sol = solve_lp(&c, poly)?;
        cache.insert(i, inst, sol.primal)?;
    }
    Ok(())
}

/// Mean loss over `indices` for an arbitrary cost model, with the caches as
/// they stand. Decisions come from the layer at `gamma`.
pub fn evaluate_losses(
    dataset: &Dataset,
    indices: &[usize],
    model: &dyn CostModel,
    cache: &SolutionCache,
    cfg: &TrainConfig,
    gamma: f64,
) -> Result<LossReport> {
    let ctx = Context { cfg, lambdas: cfg.lambdas.effective(&cfg.ablation) };
    let mut counters = Counters::default();
    let mut per = Vec::with_capacity(indices.len());
    for &i in indices {
        let inst = &dataset.instances[i];
        let pred = to_canonical(inst, &model.predict_costs(inst)?);
        let poly = Polytope::from_instance(inst);
        let ot_index = mix(cfg.seed, 0x7661_6c00, i as u64);
        per.push(ctx.evaluate(inst, &poly, &pred, gamma, &cache.solutions(i), ot_index, false, &mut counters)?.components);
    }
    total_loss(per, cfg.lambdas, &cfg.ablation)
}

fn check_dataset(dataset: &Dataset) -> Result<()> {
    dataset.validate()?;
    if dataset.split.train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    Ok(())
}

struct EarlyStop {
    best: f64,
    best_epoch: usize,
    best_params: PredictorParams,
    stale: usize,
}

impl EarlyStop {
    fn update(&mut self, epoch: usize, val: f64, params: &PredictorParams) {
        if val < self.best {
            self.best = val;
            self.best_epoch = epoch;
            self.best_params = params.clone();
            self.stale = 0;
        } else {
            self.stale += 1;
        }
    }
}

/// Algorithm-1 training: predict, normalize, scalarize uniformly, solve the
/// smoothed layer, refresh the cache with probability `p_solve`, and descend
/// on the weighted loss. Returns the best-validation parameters.
pub fn train_modfl(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_dataset(dataset)?;
    let link = Link::for_kind(dataset.cost_kind);
    let mut params = PredictorParams::init(cfg.architecture(dataset), cfg.seed)?;
    let (mut cache, flagged) = seed_cache(dataset, cfg.cache_capacity)?;
    for &i in &flagged {
        log::warn!("instance {i}: fewer than two cached solutions; landscape loss will be skipped");
    }
    let polys: Vec<Polytope> = dataset.instances.iter().map(Polytope::from_instance).collect();
    let ctx = Context { cfg, lambdas: cfg.lambdas.effective(&cfg.ablation) };
    let mut counters = Counters::default();
    let mut log = Vec::new();
    let val_idx = validation_indices(dataset);
    let start = Instant::now();
    let mut stop = EarlyStop { best: f64::INFINITY, best_epoch: 0, best_params: params.clone(), stale: 0 };
    for epoch in 0..cfg.max_epochs {
        let mut rng = stream_rng(cfg.seed, Stream::Training, epoch as u64);
        let mut order = dataset.split.train.clone();
        order.shuffle(&mut rng);
        let mut per = Vec::with_capacity(order.len());
        let mut failures = 0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grads: Gradients = params.zeros_like();
            let mut used = 0usize;
            for (k, &i) in batch.iter().enumerate() {
                let inst = &dataset.instances[i];
                let fwd = predict(&params, link, inst)?;
                let pred = to_canonical(inst, &fwd.native);
                let refresh = rng.random::<f64>() < cfg.p_solve;
                if refresh {
                    if let Err(e) = refresh_cache(&mut cache, i, inst, &polys[i], &pred, cfg, &mut rng, &mut counters) {
                        log::warn!("instance {i}: cache refresh failed: {e}");
                        failures += 1;
                        counters.failures += 1;
                    }
                }
                let ot_index = ((epoch as u64) << 32) | ((b * cfg.batch_size + k) as u64);
                match ctx.evaluate(inst, &polys[i], &pred, cfg.gamma, &cache.solutions(i), ot_index, true, &mut counters) {
                    Ok(ev) => {
                        let g = to_raw_grad(inst, link, &fwd.native, ev.grad.as_ref().unwrap());
                        params.backward_into(fwd.tape, &g, &mut grads)?;
                        per.push(ev.components);
                        used += 1;
                    }
                    Err(e) => {
                        log::warn!("instance {i}: layer evaluation failed: {e}");
                        failures += 1;
                        counters.failures += 1;
                    }
                }
            }
            if used > 0 {
                grads.scale(1.0 / used as f64);
                params.sgd_step(&grads, cfg.lr, cfg.clip)?;
                counters.steps += 1;
            }
        }
        if failures as f64 > cfg.failure_tolerance * order.len() as f64 {
            return Err(Error::Aborted(format!(
                "epoch {epoch}: {failures} of {} instance evaluations failed",
                order.len()
            )));
        }
        let train = total_loss(per, cfg.lambdas, &cfg.ablation)?;
        let model = MlpModel { params: params.clone(), link };
        let val = evaluate_losses(dataset, &val_idx, &model, &cache, cfg, cfg.gamma)?;
        counters.dslp_calls += val_idx.len();
        log::info!("epoch {epoch}: train {:.6} val {:.6}", train.total, val.total);
        log.push(EpochRecord {
            epoch,
            train_losses: EpochLosses { l: train.landscape, d: train.decision, ps: train.pareto_set, total: train.total },
            val_total: val.total,
            cache_sizes: cache.sizes(),
            wall_time_s: start.elapsed().as_secs_f64(),
        });
        stop.update(epoch, val.total, &params);
        if stop.stale >= cfg.patience {
            break;
        }
    }
    Ok(TrainOutcome { params: stop.best_params, log, best_epoch: stop.best_epoch, counters, flagged })
}

fn validation_indices(dataset: &Dataset) -> Vec<usize> {
    if dataset.split.validation.is_empty() {
        dataset.split.train.clone()
    } else {
        dataset.split.validation.clone()
    }
}

/// Accuracy loss of one instance and its gradient with respect to raw scores:
/// mean squared error on costs, or binary cross-entropy for probabilities,
/// averaged over cells and objectives.
pub fn accuracy_loss(raw: &[Vec<f64>], truth: &[Vec<f64>], kind: CostKind) -> Result<(f64, Vec<Vec<f64>>)> {
    if raw.len() != truth.len() {
        return Err(Error::dim("accuracy loss objectives", truth.len(), raw.len()));
    }
    let t = raw.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(raw.len());
    for (z, y) in raw.iter().zip(truth) {
        if z.len() != y.len() {
            return Err(Error::dim("accuracy loss cells", y.len(), z.len()));
        }
        let n = z.len() as f64;
        let mut gj = Vec::with_capacity(z.len());
        let mut lj = 0.0;
        for (&zi, &yi) in z.iter().zip(y) {
            match kind {
                CostKind::Real => {
                    lj += (zi - yi) * (zi - yi);
                    gj.push(2.0 * (zi - yi) / (n * t));
                }
                CostKind::Probability => {
                    // −[y log σ(z) + (1−y) log(1−σ(z))] in a stable form
                    lj += zi.max(0.0) - zi * yi + (-zi.abs()).exp().ln_1p();
                    gj.push((crate::predictor::sigmoid(zi) - yi) / (n * t));
                }
            }
        }
        value += lj / n / t;
        grad.push(gj);
    }
    Ok((value, grad))
}

/// Mean accuracy loss of a parameter set over `indices`.
pub fn evaluate_accuracy(dataset: &Dataset, indices: &[usize], params: &PredictorParams) -> Result<f64> {
    let mut total = 0.0;
    for &i in indices {
        let inst = &dataset.instances[i];
        let (raw, _) = params.predict(&inst.features)?;
        total += accuracy_loss(&raw, &inst.costs, dataset.cost_kind)?.0;
    }
    Ok(total / indices.len().max(1) as f64)
}

/// Two-stage baseline: the same network and optimizer trained on accuracy
/// alone. The log reports the accuracy loss in `total` and zeros elsewhere.
pub fn train_twostage(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_dataset(dataset)?;
    let mut params = PredictorParams::init(cfg.architecture(dataset), cfg.seed)?;
    let val_idx = validation_indices(dataset);
    let mut log = Vec::new();
    let mut counters = Counters::default();
    let start = Instant::now();
    let mut stop = EarlyStop { best: f64::INFINITY, best_epoch: 0, best_params: params.clone(), stale: 0 };
    for epoch in 0..cfg.max_epochs {
        let mut rng = stream_rng(cfg.seed, Stream::Training, epoch as u64);
        let mut order = dataset.split.train.clone();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = params.zeros_like();
            for &i in batch {
                let inst = &dataset.instances[i];
                let (raw, tape) = params.predict(&inst.features)?;
                let (v, g) = accuracy_loss(&raw, &inst.costs, dataset.cost_kind)?;
                epoch_loss += v;
                params.backward_into(tape, &g, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            params.sgd_step(&grads, cfg.lr, cfg.clip)?;
            counters.steps += 1;
        }
        let train = epoch_loss / order.len() as f64;
        let val = evaluate_accuracy(dataset, &val_idx, &params)?;
        log::info!("epoch {epoch}: train {train:.6} val {val:.6}");
        log.push(EpochRecord {
            epoch,
            train_losses: EpochLosses { l: 0.0, d: 0.0, ps: 0.0, total: train },
            val_total: val,
            cache_sizes: vec![],
            wall_time_s: start.elapsed().as_secs_f64(),
        });
        stop.update(epoch, val, &params);
        if stop.stale >= cfg.patience {
            break;
        }
    }
    Ok(TrainOutcome { params: stop.best_params, log, best_epoch: stop.best_epoch, counters, flagged: vec![] })
}

/// Losses of an epoch record without the wall-clock field, for comparisons.
pub fn loss_trace(log: &[EpochRecord]) -> Vec<(usize, EpochLosses, f64)> {
    log.iter().map(|r| (r.epoch, r.train_losses, r.val_total)).collect()
}

/// Weighted total of one component set under a config.
pub fn weighted_total(c: &Components, cfg: &TrainConfig) -> f64 {
    combine(c, &cfg.lambdas.effective(&cfg.ablation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{gen_bipartite, BipartiteConfig};
    use crate::predictor::OracleModel;

    fn data(rho: f64) -> Dataset {
        gen_bipartite(&BipartiteConfig { nodes: 8, instances: 10, rho, feature_dim: 4, ..BipartiteConfig::default() })
            .unwrap()
    }

    fn quick() -> TrainConfig {
        TrainConfig { max_epochs: 3, trunk: vec![8], head: vec![8], batch_size: 4, ..TrainConfig::default() }
    }

    #[test]
    fn cache_is_fifo_and_deduplicated() {
        let ds = data(0.3);
        let inst = &ds.instances[0];
        let mut cache = SolutionCache::new(1, 3);
        let n = inst.n_vars;
        let unit = |k: usize| {
            let mut v = vec![0.0; n];
            v[k] = 1.0;
            v
        };
        for k in 0..5 {
            assert!(cache.insert(0, inst, unit(k)).unwrap());
        }
        assert_eq!(cache.solutions(0), vec![unit(2), unit(3), unit(4)]);
        let mut near = unit(4);
        near[0] += 5e-8;
        assert!(!cache.insert(0, inst, near).unwrap());
        assert_eq!(cache.len(0), 3);
        assert!(cache.insert(0, inst, vec![1.0; n]).is_err());
    }

    #[test]
    fn seeding_counts_distinct_solutions_and_flags_singletons() {
        let ds = data(0.3);
        let (cache, flagged) = seed_cache(&ds, 50).unwrap();
        for (i, inst) in ds.instances.iter().enumerate() {
            assert_eq!(cache.len(i), inst.pareto_set.len());
            assert_eq!(flagged.contains(&i), inst.pareto_set.len() < 2);
        }
        let same = data(0.0);
        let (cache, flagged) = seed_cache(&same, 50).unwrap();
        assert_eq!(flagged.len(), same.instances.len());
        assert!(cache.sizes().iter().all(|s| *s == 1));
    }

    #[test]
    fn fixed_seed_is_deterministic_and_seeds_differ() {
        let ds = data(0.3);
        let cfg = quick();
        let a = train_modfl(&ds, &cfg).unwrap();
        let b = train_modfl(&ds, &cfg).unwrap();
        assert_eq!(loss_trace(&a.log), loss_trace(&b.log));
        assert_eq!(a.params, b.params);
        let c = train_modfl(&ds, &TrainConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(loss_trace(&a.log), loss_trace(&c.log));
    }

    #[test]
    fn zero_landscape_weight_equals_ablation() {
        let ds = data(0.3);
        let zero = TrainConfig { lambdas: Lambdas { landscape: 0.0, ..Lambdas::default() }, ..quick() };
        let mut ablated = quick();
        ablated.ablation.landscape = true;
        let a = train_modfl(&ds, &zero).unwrap();
        let b = train_modfl(&ds, &ablated).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(loss_trace(&a.log), loss_trace(&b.log));
        assert!(a.log.iter().all(|r| r.train_losses.l == 0.0));
    }

    #[test]
    fn no_solver_calls_without_refresh() {
        let ds = data(0.3);
        let out = train_modfl(&ds, &TrainConfig { p_solve: 0.0, ..quick() }).unwrap();
        assert_eq!(out.counters.solver_calls, 0);
        assert!(out.counters.dslp_calls > 0);
        let (seeded, _) = seed_cache(&ds, 50).unwrap();
        assert_eq!(out.log.last().unwrap().cache_sizes, seeded.sizes());
        let out = train_modfl(&ds, &quick()).unwrap();
        assert_eq!(out.counters.solver_calls, 3 * 3 * ds.split.train.len());
    }

    #[test]
    fn returns_best_validation_snapshot() {
        let ds = data(0.3);
        let cfg = TrainConfig { max_epochs: 6, patience: 2, lr: 0.5, ..quick() };
        let out = train_modfl(&ds, &cfg).unwrap();
        assert!(out.log.len() <= cfg.max_epochs);
        let best = out.log.iter().map(|r| r.val_total).fold(f64::INFINITY, f64::min);
        assert_eq!(out.log[out.best_epoch].val_total, best);
        let (cache, _) = seed_cache(&ds, 50).unwrap();
        let model = out.model(ds.cost_kind);
        let again = evaluate_losses(&ds, &ds.split.validation, &model, &cache, &cfg, cfg.gamma).unwrap();
        assert!(again.total.is_finite());
    }

    #[test]
    fn oracle_losses_vanish_at_exact_decisions() {
        let ds = data(0.3);
        let (cache, _) = seed_cache(&ds, 50).unwrap();
        let all: Vec<usize> = (0..ds.instances.len()).collect();
        let rep = evaluate_losses(&ds, &all, &OracleModel, &cache, &TrainConfig::default(), 0.0).unwrap();
        assert!(rep.landscape <= 1e-6, "{}", rep.landscape);
        assert!(rep.pareto_set <= 1e-9, "{}", rep.pareto_set);
    }

    #[test]
    fn accuracy_loss_averages_objectives() {
        let raw = vec![vec![0.5, -1.0], vec![2.0, 0.0]];
        let truth = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let (v, g) = accuracy_loss(&raw, &truth, CostKind::Real).unwrap();
        let per0 = (0.25 + 1.0) / 2.0;
        let per1 = (4.0 + 1.0) / 2.0;
        assert!((v - (per0 + per1) / 2.0).abs() < 1e-12);
        assert!((g[1][0] - 2.0 * 2.0 / 4.0).abs() < 1e-12);
        let (b, gb) = accuracy_loss(&[vec![0.0]], &[vec![1.0]], CostKind::Probability).unwrap();
        assert!((b - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((gb[0][0] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn twostage_loss_decreases_and_is_deterministic() {
        let ds = data(0.3);
        let cfg = TrainConfig { max_epochs: 5, patience: 10, lr: 0.5, ..quick() };
        let a = train_twostage(&ds, &cfg).unwrap();
        let b = train_twostage(&ds, &cfg).unwrap();
        assert_eq!(loss_trace(&a.log), loss_trace(&b.log));
        assert_eq!(a.counters.dslp_calls, 0);
        let losses: Vec<f64> = a.log.iter().map(|r| r.train_losses.total).collect();
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(TrainConfig { p_solve: 1.5, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { gamma: 0.0, ..TrainConfig::default() }.validate().is_err());
    }
}
