//! Outer training loops: momentum gradient descent and the adaptive
//! structure search that grows and prunes W between descent runs.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::ansatz::FsvffAnsatz;
use crate::cost::{self, CostVariant, TrainingSet};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;
use crate::statevector::{Circuit, GateKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_iters: usize,
    pub plateau_window: usize,
    pub plateau_tol: f64,
    /// Number of training terms per iteration, cycled through in order.
    pub minibatch: Option<usize>,
    /// Stop as soon as the observed cost is at or below this value.
    pub cost_tol: f64,
    /// Halve the learning rate on plateau instead of stopping, at most
    /// `max_halvings` times.
    pub halve_on_plateau: bool,
    pub max_halvings: usize,
    pub shots: Option<u64>,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            momentum: 0.0,
            max_iters: 500,
            plateau_window: 20,
            plateau_tol: 1e-3,
            minibatch: None,
            cost_tol: 0.0,
            halve_on_plateau: false,
            max_halvings: 10,
            shots: None,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning_rate must be non-negative, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if self.plateau_window < 2 {
            return Err(Error::Config("plateau_window must be at least 2".into()));
        }
        if !(self.plateau_tol >= 0.0) {
            return Err(Error::Config("plateau_tol must be non-negative".into()));
        }
        if self.minibatch == Some(0) {
            return Err(Error::Config("minibatch must be at least 1".into()));
        }
        if self.shots == Some(0) {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureSearchConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub insert_count: usize,
    /// Depth penalty scale; `None` disables regularization.
    pub lambda: Option<f64>,
    pub gate_dictionary: Vec<GateKind>,
    pub nearest_neighbor_only: bool,
    pub max_rounds: usize,
    /// Search stops once the best plain cost reaches this value.
    pub target_cost: f64,
    pub seed: u64,
}

impl Default for StructureSearchConfig {
    fn default() -> Self {
        Self {
            beta1: 10.0,
            beta2: 10.0,
            insert_count: 3,
            lambda: Some(1e3),
            gate_dictionary: vec![GateKind::RZ, GateKind::RZZ, GateKind::GIVENS],
            nearest_neighbor_only: true,
            max_rounds: 20,
            target_cost: 1e-6,
            seed: 0,
        }
    }
}

impl StructureSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta1 > 0.0 && self.beta2 > 0.0) {
            return Err(Error::Config("beta1 and beta2 must be positive".into()));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                return Err(Error::Config(format!("lambda must be positive, got {l}")));
            }
        }
        if self.gate_dictionary.is_empty() {
            return Err(Error::Config("gate dictionary is empty".into()));
        }
        if let Some(k) = self
            .gate_dictionary
            .iter()
            .find(|k| !matches!(k, GateKind::RZ | GateKind::RZZ | GateKind::GIVENS))
        {
            return Err(Error::Config(format!("{k} is not in the dictionary {{RZ, RZZ, GIVENS}}")));
        }
        if self.insert_count == 0 {
            return Err(Error::Config("insert_count must be at least 1".into()));
        }
        Ok(())
    }

    /// `C (1 + N_gates / lambda)`, or `C` without regularization.
    pub fn regularized(&self, cost: f64, n_gates: usize) -> f64 {
        match self.lambda {
            Some(l) => cost * (1.0 + n_gates as f64 / l),
            None => cost,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub cost_exact: f64,
    pub cost_shot: Option<f64>,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub inserted: usize,
    pub deleted: usize,
    pub cost_plateau: f64,
    pub cost_after_deletion: f64,
    pub delta_c2: f64,
    pub accepted: bool,
    pub n_gates: usize,
    pub cnot_count: usize,
}

#[derive(Clone, Debug)]
pub struct TrainingResult<T: Real> {
    pub ansatz: FsvffAnsatz<T>,
    /// Exact-mode cost at the returned parameters.
    pub final_cost: T,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    pub plateaued: bool,
    pub accepted_rounds: usize,
    pub rounds: Vec<RoundRecord>,
}

impl<T: Real> TrainingResult<T> {
    pub fn theta_opt(&self) -> &[T] {
        &self.ansatz.theta
    }

    pub fn gamma_opt(&self) -> &[T] {
        self.ansatz.d.gammas()
    }

    pub fn final_circuit(&self) -> &Circuit<T> {
        &self.ansatz.w
    }

    pub fn cost_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|e| e.cost_exact).collect()
    }

    /// Trace as CSV with header `iteration,cost_exact,cost_shot,grad_norm`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,cost_exact,cost_shot,grad_norm\n");
        for e in &self.trace {
            let shot = e.cost_shot.map(|c| c.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", e.iteration, e.cost_exact, shot, e.grad_norm));
        }
        out
    }
}

/// True iff the relative improvement across the last `window` entries is
/// below `tol`. Improvement is measured between running minima, so an
/// oscillating trace that still reaches new lows does not count as flat.
pub fn plateau_detector(trace: &[f64], window: usize, tol: f64) -> bool {
    assert!(window >= 2, "plateau window must be at least 2");
    if trace.len() < window {
        return false;
    }
    let split = trace.len() - window + 1;
    let before = trace[..split].iter().copied().fold(f64::INFINITY, f64::min);
    let recent = trace[split..].iter().copied().fold(f64::INFINITY, f64::min);
    if recent >= before {
        return true;
    }
    (before - recent) / before.abs().max(f64::MIN_POSITIVE) < tol
}

fn minibatch_terms(variant: &CostVariant, minibatch: Option<usize>, n_terms: usize, iteration: usize) -> Result<Option<Vec<usize>>> {
    match (variant, minibatch) {
        (_, None) => Ok(None),
        (CostVariant::Randomized { .. }, Some(_)) => Err(Error::Config("minibatch applies to global and local costs only".into())),
        (_, Some(m)) => {
            let m = m.min(n_terms);
            let start = (iteration * m) % n_terms;
            Ok(Some((0..m).map(|j| (start + j) % n_terms).collect()))
        }
    }
}

/// Momentum gradient descent on all theta and gamma parameters:
/// `v <- momentum v - lr grad`, `params <- params + v`.
pub fn gradient_descent<T: Real>(
    ts: &TrainingSet<T>,
    ansatz: &FsvffAnsatz<T>,
    cfg: &OptimizerConfig,
    variant: &CostVariant,
) -> Result<TrainingResult<T>> {
    cfg.validate()?;
    let mut a = ansatz.clone();
    let (n_theta, n_gamma) = a.param_counts();
    let mut velocity = vec![T::zero(); n_theta + n_gamma];
    let mut lr = T::lit(cfg.learning_rate);
    let momentum = T::lit(cfg.momentum);
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut observed: Vec<f64> = Vec::new();
    let mut window_start = 0;
    let mut halvings = 0;
    let mut plateaued = false;

    for it in 0..cfg.max_iters {
        let seed = rng::derive_seed(cfg.seed, "optimizer", it as u64);
        let exact = cost::evaluate(ts, &a, variant, None, seed)?.value.as_f64();
        let shot = match cfg.shots {
            Some(s) => Some(cost::evaluate(ts, &a, variant, Some(s), seed)?.value.as_f64()),
            None => None,
        };
        let seen = shot.unwrap_or(exact);
        if !seen.is_finite() || seen > 1.0 + 1e-6 {
            let mut costs: Vec<f64> = trace.iter().map(|e| e.cost_exact).collect();
            costs.push(exact);
            return Err(Error::Divergence {
                iteration: it,
                cost: seen,
                trace: costs,
            });
        }
        let terms = minibatch_terms(variant, cfg.minibatch, ts.n_eig(), it)?;
        let grad = cost::gradient_terms(ts, &a, variant, terms.as_deref(), cfg.shots, seed)?;
        let grad_norm = grad.norm().as_f64();
        if !grad_norm.is_finite() {
            return Err(Error::Divergence {
                iteration: it,
                cost: seen,
                trace: trace.iter().map(|e| e.cost_exact).collect(),
            });
        }
        trace.push(TraceEntry {
            iteration: it,
            cost_exact: exact,
            cost_shot: shot,
            grad_norm,
        });
        observed.push(seen);
        if seen <= cfg.cost_tol {
            break;
        }
        if plateau_detector(&observed[window_start..], cfg.plateau_window, cfg.plateau_tol) {
            if cfg.halve_on_plateau && halvings < cfg.max_halvings {
                halvings += 1;
                lr = lr / T::lit(2.0);
                window_start = observed.len();
            } else {
                plateaued = true;
                break;
            }
        }
        let g = grad.theta.iter().chain(&grad.gamma);
        for (v, gi) in velocity.iter_mut().zip(g) {
            *v = momentum * *v - lr * *gi;
        }
        for (p, v) in a.theta.iter_mut().zip(&velocity[..n_theta]) {
            *p += *v;
        }
        for (p, v) in a.d.gammas_mut().iter_mut().zip(&velocity[n_theta..]) {
            *p += *v;
        }
    }

    let final_cost = cost::evaluate(ts, &a, variant, None, cfg.seed)?.value;
    Ok(TrainingResult {
        ansatz: a,
        final_cost,
        iterations: trace.len(),
        trace,
        plateaued,
        accepted_rounds: 0,
        rounds: Vec::new(),
    })
}

/// Restarts descent from fresh uniform theta in `[-init_scale, init_scale]`
/// (gammas as given) until a run reaches `target`, keeping the best run.
/// Restart `r` draws from substream `(cfg.seed, "multistart", r)` and uses
/// optimizer seed `derive_seed(cfg.seed, "multistart", r)`.
pub fn multi_start_descent<T: Real>(
    ts: &TrainingSet<T>,
    ansatz: &FsvffAnsatz<T>,
    cfg: &OptimizerConfig,
    variant: &CostVariant,
    restarts: usize,
    init_scale: f64,
    target: f64,
) -> Result<TrainingResult<T>> {
    if restarts == 0 {
        return Err(Error::Config("restarts must be at least 1".into()));
    }
    if !(init_scale >= 0.0) || !init_scale.is_finite() {
        return Err(Error::Config(format!("init_scale must be non-negative, got {init_scale}")));
    }
    let mut best: Option<TrainingResult<T>> = None;
    for r in 0..restarts as u64 {
        let mut a = ansatz.clone();
        let mut g = rng::substream(cfg.seed, "multistart", r);
        for t in a.theta.iter_mut() {
            *t = T::lit(g.random_range(-init_scale..=init_scale));
        }
        let run_cfg = OptimizerConfig {
            seed: rng::derive_seed(cfg.seed, "multistart", r),
            ..cfg.clone()
        };
        let res = gradient_descent(ts, &a, &run_cfg, variant)?;
        let done = res.final_cost.as_f64() <= target;
        if best.as_ref().map_or(true, |b| res.final_cost < b.final_cost) {
            best = Some(res);
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one restart ran"))
}

struct Scored<T: Real> {
    ansatz: FsvffAnsatz<T>,
    cost: f64,
    reg: f64,
}

/// Grows W by random identity insertions, retrains, prunes gates whose
/// removal barely changes the cost, and accepts or rejects each round with
/// an annealing-style test. Rejected rounds leave the accepted state as it
/// was before the round. Returns the lowest regularized cost seen.
pub fn adaptive_structure_search<T: Real>(
    ts: &TrainingSet<T>,
    seed_ansatz: &FsvffAnsatz<T>,
    opt: &OptimizerConfig,
    ss: &StructureSearchConfig,
    variant: &CostVariant,
) -> Result<TrainingResult<T>> {
    opt.validate()?;
    ss.validate()?;
    let eval_seed = ss.seed;
    let score = |a: FsvffAnsatz<T>| -> Result<Scored<T>> {
        let cost = cost::evaluate(ts, &a, variant, opt.shots, eval_seed)?.value.as_f64();
        let reg = ss.regularized(cost, a.w.len());
        Ok(Scored { ansatz: a, cost, reg })
    };
    let train = |a: &FsvffAnsatz<T>, round: usize| -> Result<TrainingResult<T>> {
        let cfg = OptimizerConfig {
            seed: rng::derive_seed(opt.seed, "round", round as u64),
            ..opt.clone()
        };
        gradient_descent(ts, a, &cfg, variant)
    };

    let first = train(seed_ansatz, 0)?;
    let mut trace = first.trace;
    let mut current = score(first.ansatz.compress()?)?;
    let mut best = Scored {
        ansatz: current.ansatz.clone(),
        cost: current.cost,
        reg: current.reg,
    };
    let mut rounds = Vec::new();
    let mut accepted = 0;

    for round in 1..=ss.max_rounds {
        if best.cost <= ss.target_cost {
            break;
        }
        let mut rng = rng::substream(ss.seed, "structure", round as u64);
        let len = current.ansatz.w.len();
        let positions: Vec<usize> = (0..ss.insert_count).map(|_| rng.random_range(0..=len)).collect();
        let kinds: Vec<GateKind> = (0..ss.insert_count)
            .map(|_| ss.gate_dictionary[rng.random_range(0..ss.gate_dictionary.len())])
            .collect();
        let grown = current.ansatz.insert_identity_gates(
            &positions,
            &kinds,
            ss.nearest_neighbor_only,
            rng::derive_seed(ss.seed, "insert", round as u64),
        )?;
        let trained = train(&grown, round)?;
        trace.extend(trained.trace);
        let mut cand = score(trained.ansatz)?;
        let cost_plateau = cand.cost;

        let mut deleted = 0;
        let mut i = 0;
        while i < cand.ansatz.w.len() {
            let trial = score(cand.ansatz.remove_gate(i)?)?;
            let delta_c1 = trial.reg - cand.reg;
            let p_delete = (-ss.beta1 * delta_c1 / cand.reg.max(f64::MIN_POSITIVE)).exp();
            if p_delete > rng.random::<f64>() {
                cand = trial;
                deleted += 1;
            } else {
                i += 1;
            }
        }
        let cand = score(cand.ansatz.compress()?)?;

        let delta_c2 = cand.reg - current.reg;
        let accept = delta_c2 <= 0.0 || 1.0 - (-ss.beta2 * delta_c2 / current.reg.max(f64::MIN_POSITIVE)).exp() < rng.random::<f64>();
        rounds.push(RoundRecord {
            round,
            inserted: ss.insert_count,
            deleted,
            cost_plateau,
            cost_after_deletion: cand.cost,
            delta_c2,
            accepted: accept,
            n_gates: cand.ansatz.w.len(),
            cnot_count: cand.ansatz.w.cnot_count(),
        });
        if accept {
            accepted += 1;
            if cand.reg < best.reg {
                best = Scored {
                    ansatz: cand.ansatz.clone(),
                    cost: cand.cost,
                    reg: cand.reg,
                };
            }
            current = cand;
        }
    }

    let final_cost = cost::evaluate(ts, &best.ansatz, variant, None, eval_seed)?.value;
    Ok(TrainingResult {
        ansatz: best.ansatz,
        final_cost,
        iterations: trace.len(),
        trace,
        plateaued: true,
        accepted_rounds: accepted,
        rounds,
    })
}
