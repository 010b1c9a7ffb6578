//! Per-tree training updates for the policy and value heads.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{action_features, state_features, FeatureVector};
use super::{sigmoid, PolicyModel, SparseGrad};
use crate::dataset::{pair_with_failure, select_single, Derivation, PllSample};
use crate::error::{LossError, TrainError};
use crate::logic::{derive_seed, Problem};
use crate::losses::{assemble_sequential_gradient, bs_loss, merit_log_weights, path_logprobs, set_loss_log, single_loss_log, softmax, weighted_log_loss_log, LossKind, SetLoss, Step};
use crate::scalar::Scalar;
use crate::tableau::{Action, CalculusConfig, TableauState};

/// Problems by name, for replaying stored derivations.
pub type ProblemIndex = HashMap<String, Arc<Problem>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub rng_seed: u64,
    /// Train on the samples of all iterations so far instead of the latest one.
    pub accumulate_data: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { loss: LossKind::Nll, epochs: 5, learning_rate: 0.01, optimizer: Optimizer::Adam, rng_seed: 0, accumulate_data: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    /// Mean policy loss per epoch.
    pub epoch_loss: Vec<f64>,
    /// Mean value-head squared error per epoch.
    pub epoch_value_loss: Vec<f64>,
    pub samples: usize,
}

enum Objective {
    Set { kind: SetLoss, paths: Vec<Vec<Step>>, root_logp: Vec<f64> },
    Single { proof: Vec<Step>, failure: Option<Vec<Step>>, root_logp: [f64; 2], lambda: f64 },
    Bs { targets: Vec<(usize, Vec<f64>)> },
}

/// A sample turned into feature vectors, once per training call.
struct Compiled {
    problem: String,
    /// Action features at every distinct action prefix the objective visits.
    nodes: Vec<Vec<FeatureVector>>,
    objective: Objective,
    value: Vec<(FeatureVector, f64)>,
}

struct Builder<'a> {
    problem: &'a Arc<Problem>,
    calculus: CalculusConfig,
    dim: usize,
    index: HashMap<Vec<Action>, usize>,
    nodes: Vec<Vec<FeatureVector>>,
    states: HashMap<Vec<Action>, TableauState>,
}

impl Builder<'_> {
    fn state(&mut self, prefix: &[Action]) -> Result<TableauState, LossError> {
        if let Some(s) = self.states.get(prefix) {
            return Ok(s.clone());
        }
        let s = match prefix.split_last() {
            None => TableauState::root(self.problem.clone(), self.calculus),
            Some((&last, rest)) => self.state(rest)?.apply_action(last).map_err(|e| LossError::Replay(e.to_string()))?,
        };
        self.states.insert(prefix.to_vec(), s.clone());
        Ok(s)
    }

    fn node(&mut self, prefix: &[Action], state: &TableauState, actions: &[Action]) -> usize {
        if let Some(&n) = self.index.get(prefix) {
            return n;
        }
        let n = self.nodes.len();
        self.nodes.push(action_features(state, actions, self.dim));
        self.index.insert(prefix.to_vec(), n);
        n
    }

    /// Steps of a derivation below the virtual root, and the log probability
    /// of the uniform start choice.
    fn path(&mut self, actions: &[Action]) -> Result<(Vec<Step>, f64), LossError> {
        let mut steps = Vec::with_capacity(actions.len());
        let mut root_logp = 0.0;
        for j in 0..actions.len() {
            let state = self.state(&actions[..j])?;
            let legal = state.legal_actions();
            let idx = legal.iter().position(|&a| a == actions[j]).ok_or_else(|| LossError::Replay(format!("{} is not legal", actions[j])))?;
            if state.is_root() {
                root_logp -= (legal.len() as f64).ln();
            } else {
                steps.push((self.node(&actions[..j], &state, &legal), idx));
            }
        }
        Ok((steps, root_logp))
    }
}

fn compile(sample: &PllSample, problem: &Arc<Problem>, calculus: CalculusConfig, dim: usize, loss: LossKind, seed: u64) -> Result<Compiled, LossError> {
    let mut b = Builder { problem, calculus, dim, index: HashMap::new(), nodes: Vec::new(), states: HashMap::new() };
    let loss = loss.with_seed(derive_seed(seed, fnv_hash(&sample.problem)));
    let objective = match loss {
        LossKind::Bs => {
            let mut targets = Vec::new();
            for t in sample.tree_targets.iter().flatten() {
                let state = b.state(&t.prefix)?;
                if state.legal_actions() != t.actions {
                    return Err(LossError::Replay(format!("tree target actions differ at {:?}", t.prefix)));
                }
                let n = b.node(&t.prefix, &state, &t.actions);
                targets.push((n, t.policy.clone()));
            }
            Objective::Bs { targets }
        }
        LossKind::Single(strategy) | LossKind::SinglePair(strategy, _) => {
            let (proof, failure): (&Derivation, Option<&Derivation>) = match loss {
                LossKind::SinglePair(..) => pair_with_failure(sample, strategy),
                _ => (select_single(sample, strategy), None),
            };
            let lambda = if let LossKind::SinglePair(_, l) = loss { l } else { 0.0 };
            let (proof, rp) = b.path(&proof.actions)?;
            let (failure, rf) = match failure {
                Some(f) if lambda > 0.0 => {
                    let (p, r) = b.path(&f.actions)?;
                    (Some(p), r)
                }
                _ => (None, 0.0),
            };
            Objective::Single { proof, failure, root_logp: [rp, rf], lambda }
        }
        other => {
            let kind = other.set_loss().expect("remaining kinds are set losses");
            let mut paths = Vec::new();
            let mut root_logp = Vec::new();
            for d in &sample.proofs {
                let (p, r) = b.path(&d.actions)?;
                paths.push(p);
                root_logp.push(r);
            }
            Objective::Set { kind, paths, root_logp }
        }
    };
    let mut value = Vec::new();
    for t in sample.tree_targets.iter().flatten() {
        let state = b.state(&t.prefix)?;
        value.push((state_features(&state, dim), t.value));
    }
    Ok(Compiled { problem: sample.problem.clone(), nodes: b.nodes, objective, value })
}

fn fnv_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

struct Evaluation<F> {
    policy_loss: F,
    value_loss: F,
    grad: SparseGrad<F>,
}

impl<F: Scalar> Evaluation<F> {
    fn total(&self) -> F {
        self.policy_loss + self.value_loss
    }
}

/// Merit weights at the current parameters; they are constants for differentiation.
fn merit_weights_of<F: Scalar>(model: &PolicyModel<F>, c: &Compiled) -> Option<Vec<F>> {
    let Objective::Set { kind: SetLoss::Merit(beta), paths, root_logp } = &c.objective else { return None };
    let dists = distributions(model, c);
    let logp: Vec<F> = path_logprobs(paths, &dists).into_iter().zip(root_logp).map(|(l, &r)| l + F::of(r)).collect();
    Some(merit_log_weights(&logp, *beta))
}

fn distributions<F: Scalar>(model: &PolicyModel<F>, c: &Compiled) -> Vec<Vec<F>> {
    c.nodes
        .iter()
        .map(|fvs| if fvs.len() == 1 { vec![F::one()] } else { softmax(&fvs.iter().map(|fv| model.score(fv)).collect::<Vec<F>>()) })
        .collect()
}

fn evaluate<F: Scalar>(model: &PolicyModel<F>, c: &Compiled, frozen_merit: Option<&[F]>) -> Result<Evaluation<F>, LossError> {
    let dists = distributions(model, c);
    let (policy_loss, logit_grads): (F, Vec<Vec<F>>) = match &c.objective {
        Objective::Set { kind, paths, root_logp } => {
            let logp: Vec<F> = path_logprobs(paths, &dists).into_iter().zip(root_logp).map(|(l, &r)| l + F::of(r)).collect();
            let (v, g) = match (kind, frozen_merit) {
                (SetLoss::Merit(_), Some(w)) => weighted_log_loss_log(&logp, w),
                _ => set_loss_log(*kind, &logp)?,
            };
            (v, assemble_sequential_gradient(&g, paths, &dists))
        }
        Objective::Single { proof, failure, root_logp, lambda } => {
            let lp = path_logprobs(std::slice::from_ref(proof), &dists)[0] + F::of(root_logp[0]);
            let lf = failure.as_ref().map(|f| path_logprobs(std::slice::from_ref(f), &dists)[0] + F::of(root_logp[1]));
            let (v, gp, gf) = single_loss_log(lp, lf, F::of(*lambda));
            let mut paths = vec![proof.clone()];
            let mut grads = vec![gp];
            if let (Some(f), Some(g)) = (failure, gf) {
                paths.push(f.clone());
                grads.push(g);
            }
            (v, assemble_sequential_gradient(&grads, &paths, &dists))
        }
        Objective::Bs { targets } => {
            let t: Vec<Vec<F>> = targets.iter().map(|(_, t)| t.iter().map(|&x| F::of(x)).collect()).collect();
            let pi: Vec<Vec<F>> = targets.iter().map(|&(n, _)| dists[n].clone()).collect();
            let (v, g) = bs_loss(&t, &pi);
            let mut out: Vec<Vec<F>> = dists.iter().map(|d| vec![F::zero(); d.len()]).collect();
            for ((n, _), gn) in targets.iter().zip(g) {
                for (o, x) in out[*n].iter_mut().zip(gn) {
                    *o = *o + x;
                }
            }
            (v, out)
        }
    };
    let mut grad = SparseGrad::default();
    for (fvs, gz) in c.nodes.iter().zip(&logit_grads) {
        if fvs.len() > 1 {
            for (fv, &g) in fvs.iter().zip(gz) {
                model.score_backward(fv, g, &mut grad);
            }
        }
    }
    let mut value_loss = F::zero();
    if !c.value.is_empty() {
        let n = F::of(c.value.len() as f64);
        for (fv, target) in &c.value {
            let v = sigmoid(model.value_logit(fv));
            let err = v - F::of(*target);
            value_loss = value_loss + err * err / n;
            model.value_backward(fv, F::of(2.0) * err * v * (F::one() - v) / n, &mut grad);
        }
    }
    Ok(Evaluation { policy_loss, value_loss, grad })
}

struct OptimizerState<F> {
    kind: Optimizer,
    rate: F,
    step: i32,
    m: Vec<F>,
    v: Vec<F>,
}

impl<F: Scalar> OptimizerState<F> {
    fn new(kind: Optimizer, rate: f64, params: usize) -> Self {
        let (m, v) = if kind == Optimizer::Adam { (vec![F::zero(); params], vec![F::zero(); params]) } else { (Vec::new(), Vec::new()) };
        OptimizerState { kind, rate: F::of(rate), step: 0, m, v }
    }

    /// Applies one update. Adam updates only the coordinates in the gradient.
    fn apply(&mut self, params: &mut [F], grad: &SparseGrad<F>) {
        let mut coords: Vec<(&usize, &F)> = grad.iter().collect();
        coords.sort_unstable_by_key(|(&i, _)| i);
        match self.kind {
            Optimizer::Sgd => {
                for (&i, &g) in coords {
                    params[i] = params[i] - self.rate * g;
                }
            }
            Optimizer::Adam => {
                self.step += 1;
                let (b1, b2, eps) = (F::of(0.9), F::of(0.999), F::of(1e-8));
                let c1 = F::one() - b1.powi(self.step);
                let c2 = F::one() - b2.powi(self.step);
                for (&i, &g) in coords {
                    self.m[i] = b1 * self.m[i] + (F::one() - b1) * g;
                    self.v[i] = b2 * self.v[i] + (F::one() - b2) * g * g;
                    let mhat = self.m[i] / c1;
                    let vhat = self.v[i] / c2;
                    params[i] = params[i] - self.rate * mhat / (vhat.sqrt() + eps);
                }
            }
        }
    }
}

fn compile_all(samples: &[PllSample], problems: &ProblemIndex, calculus: CalculusConfig, dim: usize, cfg: &TrainConfig) -> Result<Vec<Compiled>, TrainError> {
    samples
        .iter()
        .map(|s| {
            let p = problems.get(&s.problem).ok_or_else(|| TrainError::UnknownProblem(s.problem.clone()))?;
            Ok(compile(s, p, calculus, dim, cfg.loss, cfg.rng_seed)?)
        })
        .collect()
}

/// `cfg.epochs` passes over the samples in seeded shuffled order with one
/// update per sample. The policy follows `cfg.loss`; the value head always
/// regresses the search's value targets.
pub fn train<F: Scalar>(model: &mut PolicyModel<F>, samples: &[PllSample], problems: &ProblemIndex, calculus: CalculusConfig, cfg: &TrainConfig) -> Result<TrainStats, TrainError> {
    if samples.is_empty() {
        return Err(TrainError::Empty);
    }
    let compiled = compile_all(samples, problems, calculus, model.config.dim, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut order: Vec<usize> = (0..compiled.len()).collect();
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, model.params.len());
    let mut stats = TrainStats { samples: samples.len(), ..TrainStats::default() };
    for epoch in 0..cfg.epochs.max(1) {
        order.shuffle(&mut rng);
        let (mut policy, mut value) = (0.0, 0.0);
        for &i in &order {
            let c = &compiled[i];
            let e = evaluate(model, c, None)?;
            if !e.total().is_finite() || e.grad.values().any(|g| !g.is_finite()) {
                return Err(TrainError::NonFinite { epoch, problem: c.problem.clone() });
            }
            policy += e.policy_loss.f64();
            value += e.value_loss.f64();
            opt.apply(&mut model.params, &e.grad);
        }
        stats.epoch_loss.push(policy / compiled.len() as f64);
        stats.epoch_value_loss.push(value / compiled.len() as f64);
    }
    Ok(stats)
}

/// Scale below which gradient errors are measured absolutely.
pub const GRAD_CHECK_FLOOR: f64 = 1e-4;

/// Largest disagreement between the analytic gradient of the per-sample
/// objective (policy loss plus value loss) and fourth-order central finite
/// differences with step `eps`, over 50 seeded coordinates drawn from the
/// parameters the sample touches.
/// Merit weights are held at their values for the unperturbed model, as they
/// are constants of the merit objective.
/// The error is relative to `max(|analytic|, |numeric|, GRAD_CHECK_FLOOR)`:
/// differences carry roughly `1e-16 * |loss| / eps` of rounding noise, so
/// gradients below the floor are compared absolutely. Steps near `1e-4` balance
/// rounding against truncation for losses summed over long derivations.
pub fn grad_check(
    model: &PolicyModel<f64>,
    sample: &PllSample,
    problems: &ProblemIndex,
    calculus: CalculusConfig,
    loss: LossKind,
    eps: f64,
    seed: u64,
) -> Result<f64, TrainError> {
    let cfg = TrainConfig { loss, rng_seed: seed, ..TrainConfig::default() };
    let compiled = compile_all(std::slice::from_ref(sample), problems, calculus, model.config.dim, &cfg)?.pop().expect("one sample");
    let frozen = merit_weights_of(model, &compiled);
    let analytic = evaluate(model, &compiled, None)?.grad;
    let mut coords: Vec<usize> = analytic.keys().copied().collect();
    coords.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    coords.shuffle(&mut rng);
    coords.truncate(50);
    while coords.len() < 50 {
        coords.push(rng.random_range(0..model.params.len()));
    }
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for i in coords {
        let original = probe.params[i];
        let mut at = |offset: f64| -> Result<f64, TrainError> {
            probe.params[i] = original + offset;
            Ok(evaluate(&probe, &compiled, frozen.as_deref())?.total())
        };
        // Fourth-order central stencil: truncation error O(eps^4).
        let numeric = (8.0 * (at(eps)? - at(-eps)?) - (at(2.0 * eps)? - at(-2.0 * eps)?)) / (12.0 * eps);
        probe.params[i] = original;
        let a = analytic.get(&i).copied().unwrap_or(0.0);
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR));
    }
    Ok(worst)
}
