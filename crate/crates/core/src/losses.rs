//! Training objectives with analytic gradients.
//!
//! Two layers are provided. The probability-level functions take a vector of
//! label probabilities `p` and an allowed mask `y` and return the loss with
//! its gradient in `p`. The log-domain functions take the log probabilities
//! of the enumerated derivations of one problem (all of them allowed) and
//! return the gradient in those log probabilities; [`assemble_sequential_gradient`]
//! then pushes it through the product of step probabilities and each step's
//! softmax down to the action logits.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::SelectionStrategy;
use crate::error::LossError;
use crate::logic::Problem;
use crate::scalar::Scalar;
use crate::search::Guidance;
use crate::tableau::{Action, CalculusConfig, TableauState};

/// Lower bound applied to probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// A loss value with its gradient.
pub type LossGrad<F> = (F, Vec<F>);

/// `ln(max(p, floor))`, propagating NaN so that divergence stays visible.
fn floor_ln<F: Scalar>(p: F) -> F {
    let floor = F::of(PROB_FLOOR);
    if p < floor {
        floor.ln()
    } else {
        p.ln()
    }
}

fn mask_stats<F: Scalar>(p: &[F], y: &[bool]) -> Result<(usize, F), LossError> {
    if p.len() != y.len() {
        return Err(LossError::Length(p.len(), y.len()));
    }
    let k = y.iter().filter(|&&a| a).count();
    if k == 0 {
        return Err(LossError::NoAllowed);
    }
    let p_acc = p.iter().zip(y).filter(|(_, &a)| a).map(|(&q, _)| q).sum();
    Ok((k, p_acc))
}

/// `-log P_acc`; gradient `-y_i / P_acc`.
pub fn nll_loss<F: Scalar>(p: &[F], y: &[bool]) -> Result<LossGrad<F>, LossError> {
    let (_, p_acc) = mask_stats(p, y)?;
    if p_acc <= F::zero() {
        return Err(LossError::AcceptedMass("(0, 1]", p_acc.f64()));
    }
    let grad = y.iter().map(|&a| if a { -p_acc.recip() } else { F::zero() }).collect();
    Ok((-floor_ln(p_acc), grad))
}

/// `-sum_i y_i log p_i`; gradient `-y_i / p_i`.
pub fn uniform_loss<F: Scalar>(p: &[F], y: &[bool]) -> Result<LossGrad<F>, LossError> {
    mask_stats(p, y)?;
    if let Some(i) = (0..p.len()).find(|&i| y[i] && p[i] <= F::zero()) {
        return Err(LossError::ZeroAllowed(i));
    }
    let value = p.iter().zip(y).filter(|(_, &a)| a).map(|(&q, _)| -floor_ln(q)).sum();
    let grad = p.iter().zip(y).map(|(&q, &a)| if a { -q.recip() } else { F::zero() }).collect();
    Ok((value, grad))
}

/// Normalized weights `y_i (p_i / P_acc)^beta`.
pub fn merit_weights<F: Scalar>(p: &[F], y: &[bool], beta: F) -> Result<Vec<F>, LossError> {
    let (_, p_acc) = mask_stats(p, y)?;
    if p_acc <= F::zero() {
        return Err(LossError::AcceptedMass("(0, 1]", p_acc.f64()));
    }
    let raw: Vec<F> = p.iter().zip(y).map(|(&q, &a)| if a { (q / p_acc).powf(beta) } else { F::zero() }).collect();
    let total: F = raw.iter().copied().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// `-sum_i w_i log p_i` for fixed weights `w`; gradient `-w_i / p_i`.
pub fn weighted_log_loss<F: Scalar>(p: &[F], w: &[F]) -> LossGrad<F> {
    let value = p.iter().zip(w).filter(|(_, &wi)| wi != F::zero()).map(|(&q, &wi)| -wi * floor_ln(q)).sum();
    let grad = p.iter().zip(w).map(|(&q, &wi)| if wi == F::zero() { F::zero() } else { -wi / q }).collect();
    (value, grad)
}

/// The beta-meritocratic loss; the weights are constants for differentiation.
pub fn merit_loss<F: Scalar>(p: &[F], y: &[bool], beta: F) -> Result<LossGrad<F>, LossError> {
    let w = merit_weights(p, y, beta)?;
    Ok(weighted_log_loss(p, &w))
}

/// `-(1/k) sum_i y_i log p_i + log(1 - P_acc)`.
pub fn libra_loss<F: Scalar>(p: &[F], y: &[bool]) -> Result<LossGrad<F>, LossError> {
    let (k, p_acc) = mask_stats(p, y)?;
    if p_acc <= F::zero() || p_acc >= F::one() {
        return Err(LossError::AcceptedMass("(0, 1)", p_acc.f64()));
    }
    let k = F::of(k as f64);
    let rest = (F::one() - p_acc).max(F::of(PROB_FLOOR));
    let allowed: F = p.iter().zip(y).filter(|(_, &a)| a).map(|(&q, _)| floor_ln(q)).sum();
    let value = -allowed / k + rest.ln();
    let grad = p.iter().zip(y).map(|(&q, &a)| if a { -(k * q).recip() - rest.recip() } else { F::zero() }).collect();
    Ok((value, grad))
}

pub fn softmax<F: Scalar>(z: &[F]) -> Vec<F> {
    let m = z.iter().copied().fold(F::neg_infinity(), F::max);
    let e: Vec<F> = z.iter().map(|&v| (v - m).exp()).collect();
    let total: F = e.iter().copied().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Chain rule through `p = softmax(z)`: `dL/dz_i = p_i (g_i - sum_j g_j p_j)`.
pub fn logit_gradient<F: Scalar>(p: &[F], dp: &[F]) -> Vec<F> {
    let mean: F = p.iter().zip(dp).map(|(&a, &b)| a * b).sum();
    p.iter().zip(dp).map(|(&a, &b)| a * (b - mean)).collect()
}

/// The losses defined over a set of allowed derivations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SetLoss {
    Nll,
    Uniform,
    Merit(f64),
    Libra,
}

/// Set losses in terms of `l_d = log p_d`, returning `dL/dl_d`.
///
/// Derivation probabilities are products of many step probabilities, so no
/// floor is applied to `l_d`; the Libra remainder `1 - sum p_d` is floored.
pub fn set_loss_log<F: Scalar>(kind: SetLoss, logp: &[F]) -> Result<LossGrad<F>, LossError> {
    if logp.is_empty() {
        return Err(LossError::NoAllowed);
    }
    let k = F::of(logp.len() as f64);
    Ok(match kind {
        SetLoss::Nll => {
            let m = logp.iter().copied().fold(F::neg_infinity(), F::max);
            let lse = m + logp.iter().map(|&l| (l - m).exp()).sum::<F>().ln();
            (-lse, softmax(logp).into_iter().map(|q| -q).collect())
        }
        SetLoss::Uniform => (-logp.iter().copied().sum::<F>(), vec![-F::one(); logp.len()]),
        SetLoss::Merit(beta) => weighted_log_loss_log(logp, &merit_log_weights(logp, beta)),
        SetLoss::Libra => {
            let p_acc: F = logp.iter().map(|&l| l.exp()).sum();
            let rest = (F::one() - p_acc).max(F::of(PROB_FLOOR));
            let value = -logp.iter().copied().sum::<F>() / k + rest.ln();
            (value, logp.iter().map(|&l| -k.recip() - l.exp() / rest).collect())
        }
    })
}

/// Merit weights in the log domain: `softmax(beta * l)`.
pub fn merit_log_weights<F: Scalar>(logp: &[F], beta: f64) -> Vec<F> {
    softmax(&logp.iter().map(|&l| F::of(beta) * l).collect::<Vec<F>>())
}

/// `-sum_d w_d l_d` for fixed weights; gradient `-w_d`.
pub fn weighted_log_loss_log<F: Scalar>(logp: &[F], w: &[F]) -> LossGrad<F> {
    (-w.iter().zip(logp).map(|(&a, &b)| a * b).sum::<F>(), w.iter().map(|&a| -a).collect())
}

/// `-l_proof + lambda * l_failure`, with gradients for both log probabilities.
pub fn single_loss_log<F: Scalar>(proof: F, failure: Option<F>, lambda: F) -> (F, F, Option<F>) {
    match failure {
        Some(f) if lambda > F::zero() => (-proof + lambda * f, -F::one(), Some(lambda)),
        _ => (-proof, -F::one(), None),
    }
}

/// Mean over nodes of the cross-entropy between visit targets and the model
/// policy, with the logit gradient `(pi - t) / nodes` at every node.
pub fn bs_loss<F: Scalar>(targets: &[Vec<F>], policies: &[Vec<F>]) -> (F, Vec<Vec<F>>) {
    if targets.is_empty() {
        return (F::zero(), Vec::new());
    }
    let n = F::of(targets.len() as f64);
    let mut value = F::zero();
    let grads = targets
        .iter()
        .zip(policies)
        .map(|(t, pi)| {
            value = value - t.iter().zip(pi).filter(|(&ti, _)| ti != F::zero()).map(|(&ti, &q)| ti * floor_ln(q)).sum::<F>();
            pi.iter().zip(t).map(|(&q, &ti)| (q - ti) / n).collect()
        })
        .collect();
    (value / n, grads)
}

/// A step of a derivation: the trie node (a distinct action prefix) and the
/// index of the taken action among that node's actions.
pub type Step = (usize, usize);

/// Pushes `dL/dl_d` through `l_d = sum_j log pi_j(a_j)` and each step's
/// softmax. Steps shared by several derivations accumulate their
/// contributions. Returns one logit gradient per trie node.
pub fn assemble_sequential_gradient<F: Scalar>(derivation_grads: &[F], paths: &[Vec<Step>], dists: &[Vec<F>]) -> Vec<Vec<F>> {
    let mut out: Vec<Vec<F>> = dists.iter().map(|d| vec![F::zero(); d.len()]).collect();
    for (g, path) in derivation_grads.iter().zip(paths) {
        for &(node, a) in path {
            for (i, (o, &q)) in out[node].iter_mut().zip(&dists[node]).enumerate() {
                let indicator = if i == a { F::one() } else { F::zero() };
                *o = *o + *g * (indicator - q);
            }
        }
    }
    out
}

/// Log probabilities of derivations: `l_d = sum_j log pi_{node_j}(a_j)`.
pub fn path_logprobs<F: Scalar>(paths: &[Vec<Step>], dists: &[Vec<F>]) -> Vec<F> {
    paths.iter().map(|p| p.iter().map(|&(n, a)| floor_ln(dists[n][a])).sum()).collect()
}

/// Log probability of a derivation under `guidance`, with the action
/// distribution of every step. The start-clause choice is uniform.
pub fn derivation_logprob<G: Guidance + ?Sized>(
    problem: &Arc<Problem>,
    config: CalculusConfig,
    actions: &[Action],
    guidance: &G,
) -> Result<(f64, Vec<Vec<f64>>), LossError> {
    let mut state = TableauState::root(problem.clone(), config);
    let mut logp = 0.0;
    let mut dists = Vec::with_capacity(actions.len());
    for &a in actions {
        let legal = state.legal_actions();
        let idx = legal.iter().position(|&b| b == a).ok_or_else(|| LossError::Replay(format!("{a} is not legal")))?;
        let dist = if state.is_root() { vec![1.0 / legal.len() as f64; legal.len()] } else { guidance.policy(&state, &legal) };
        logp += floor_ln(dist[idx]);
        dists.push(dist);
        state = state.apply_action(a).map_err(|e| LossError::Replay(e.to_string()))?;
    }
    Ok((logp, dists))
}

/// Objective selector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LossKind {
    Bs,
    Nll,
    Uniform,
    Merit(f64),
    Libra,
    Single(SelectionStrategy),
    SinglePair(SelectionStrategy, f64),
}

pub const LOSS_CHOICES: &str = "bs, nll, uniform, merit:<beta>, libra, short, long, rand, short±, long±, rand± (or short_pm, long_pm, rand_pm)";

impl LossKind {
    pub fn set_loss(self) -> Option<SetLoss> {
        match self {
            LossKind::Nll => Some(SetLoss::Nll),
            LossKind::Uniform => Some(SetLoss::Uniform),
            LossKind::Merit(b) => Some(SetLoss::Merit(b)),
            LossKind::Libra => Some(SetLoss::Libra),
            _ => None,
        }
    }

    /// A copy with the pairing weight replaced (no effect on other kinds).
    pub fn with_lambda(self, lambda: f64) -> Self {
        match self {
            LossKind::SinglePair(s, _) => LossKind::SinglePair(s, lambda),
            other => other,
        }
    }

    /// A copy with the seed of a random selection replaced.
    pub fn with_seed(self, seed: u64) -> Self {
        let reseed = |s| if let SelectionStrategy::Rand(_) = s { SelectionStrategy::Rand(seed) } else { s };
        match self {
            LossKind::Single(s) => LossKind::Single(reseed(s)),
            LossKind::SinglePair(s, l) => LossKind::SinglePair(reseed(s), l),
            other => other,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseLossError(pub String);

impl fmt::Display for ParseLossError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown loss `{}`; valid choices: {LOSS_CHOICES}", self.0)
    }
}

impl std::error::Error for ParseLossError {}

impl FromStr for LossKind {
    type Err = ParseLossError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseLossError(s.to_string());
        let lower = s.trim().to_ascii_lowercase();
        if let Some(beta) = lower.strip_prefix("merit:") {
            let beta: f64 = beta.parse().map_err(|_| err())?;
            return if (0.0..=1.0).contains(&beta) { Ok(LossKind::Merit(beta)) } else { Err(err()) };
        }
        let (base, paired) = match lower.strip_suffix('±').or_else(|| lower.strip_suffix("_pm")).or_else(|| lower.strip_suffix("+-")) {
            Some(b) => (b, true),
            None => (lower.as_str(), false),
        };
        let strategy = match base {
            "short" => SelectionStrategy::Short,
            "long" => SelectionStrategy::Long,
            "rand" => SelectionStrategy::Rand(0),
            _ if paired => return Err(err()),
            "bs" => return Ok(LossKind::Bs),
            "nll" => return Ok(LossKind::Nll),
            "uniform" => return Ok(LossKind::Uniform),
            "libra" => return Ok(LossKind::Libra),
            _ => return Err(err()),
        };
        Ok(if paired { LossKind::SinglePair(strategy, 1.0) } else { LossKind::Single(strategy) })
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let strat = |s: &SelectionStrategy| match s {
            SelectionStrategy::Short => "short",
            SelectionStrategy::Long => "long",
            SelectionStrategy::Rand(_) => "rand",
        };
        match self {
            LossKind::Bs => write!(f, "bs"),
            LossKind::Nll => write!(f, "nll"),
            LossKind::Uniform => write!(f, "uniform"),
            LossKind::Merit(b) => write!(f, "merit:{b}"),
            LossKind::Libra => write!(f, "libra"),
            LossKind::Single(s) => write!(f, "{}", strat(s)),
            LossKind::SinglePair(s, _) => write!(f, "{}_pm", strat(s)),
        }
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    const P: [f64; 3] = [0.5, 0.3, 0.2];
    const Y: [bool; 3] = [true, true, false];

    #[test]
    fn oracle_values() {
        assert_abs_diff_eq!(nll_loss(&P, &Y).unwrap().0, 0.223_143_551_314_209_8, epsilon = 1e-12);
        assert_abs_diff_eq!(uniform_loss(&P, &Y).unwrap().0, 1.897_119_984_885_881_3, epsilon = 1e-12);
        let w = merit_weights(&P, &Y, 0.5).unwrap();
        assert_abs_diff_eq!(w[0], 0.563_508_326_896_291_6, epsilon = 1e-12);
        assert_abs_diff_eq!(merit_loss(&P, &Y, 0.5).unwrap().0, 0.916_118_311_741_808_1, epsilon = 1e-12);
        assert_abs_diff_eq!(libra_loss(&P, &Y).unwrap().0, -0.660_877_919_991_159_7, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_cases() {
        assert_eq!(nll_loss(&[1.0], &[true]).unwrap().0, 0.0);
        assert!(nll_loss(&[0.0, 1.0], &[true, false]).is_err());
        assert!(uniform_loss(&[0.0, 1.0], &[true, false]).is_err());
        assert!(libra_loss(&[1.0], &[true]).is_err());
        assert!(nll_loss(&[0.5], &[false]).is_err());
        assert!(nll_loss(&[0.5], &[true, false]).is_err());
        let u = uniform_loss(&[0.5, 0.5, 0.0, 0.0], &[true, true, false, false]).unwrap().0;
        assert_abs_diff_eq!(u, 2.0 * 2f64.ln(), epsilon = 1e-12);
        let (v, _) = libra_loss(&[0.3, 0.7], &[true, false]).unwrap();
        assert_abs_diff_eq!(v, -(0.3f64).ln() + (0.7f64).ln(), epsilon = 1e-12);
        // NLL depends only on the accepted mass.
        assert_abs_diff_eq!(nll_loss(&[0.1, 0.7, 0.2], &Y).unwrap().0, nll_loss(&P, &Y).unwrap().0, epsilon = 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let p: Vec<f32> = P.iter().map(|&x| x as f32).collect();
        assert!((libra_loss(&p, &Y).unwrap().0 + 0.660_878).abs() < 1e-5);
    }

    #[test]
    fn libra_logit_law() {
        let z = [0.3, -1.2, 0.8, 0.1];
        let y = [true, false, true, false];
        let p = softmax(&z);
        let g = logit_gradient(&p, &libra_loss(&p, &y).unwrap().1);
        let rest = p[1] + p[3];
        assert_abs_diff_eq!(g[0], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g[2], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1], p[1] / rest, epsilon = 1e-12);
        assert_abs_diff_eq!(g[3], p[3] / rest, epsilon = 1e-12);
    }

    #[test]
    fn log_domain_matches_probability_level() {
        // A flat softmax with allowed labels 0 and 1: log-domain gradients are
        // p_d times the probability-level ones.
        let logp: Vec<f64> = P[..2].iter().map(|q| q.ln()).collect();
        for (kind, prob) in [
            (SetLoss::Nll, nll_loss(&P, &Y).unwrap()),
            (SetLoss::Uniform, uniform_loss(&P, &Y).unwrap()),
            (SetLoss::Merit(0.5), merit_loss(&P, &Y, 0.5).unwrap()),
            (SetLoss::Libra, libra_loss(&P, &Y).unwrap()),
        ] {
            let (v, g) = set_loss_log(kind, &logp).unwrap();
            assert_abs_diff_eq!(v, prob.0, epsilon = 1e-12);
            for d in 0..2 {
                assert_abs_diff_eq!(g[d], P[d] * prob.1[d], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn bs_values() {
        let (v, g) = bs_loss(&[vec![1.0, 0.0]], &[vec![0.5, 0.5]]);
        assert_abs_diff_eq!(v, 2f64.ln(), epsilon = 1e-12);
        assert_eq!(g, vec![vec![-0.5, 0.5]]);
        let t = vec![vec![0.25, 0.75], vec![1.0, 0.0, 0.0]];
        let (v, _) = bs_loss(&t, &t);
        let h0 = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        assert_abs_diff_eq!(v, h0 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn sequential_nll_is_step_cross_entropy() {
        let dists = vec![vec![0.2, 0.8], vec![0.6, 0.4]];
        let paths = vec![vec![(0, 1), (1, 0)]];
        let (_, g) = set_loss_log(SetLoss::Nll, &path_logprobs(&paths, &dists)).unwrap();
        let z = assemble_sequential_gradient(&g, &paths, &dists);
        assert_abs_diff_eq!(z[0][0], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(z[0][1], -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(z[1][0], -0.4, epsilon = 1e-12);
    }

    /// Two derivations sharing their first step, on a toy trie of logits.
    #[test]
    fn shared_prefix_finite_differences() {
        let logits = vec![vec![0.1, -0.4], vec![0.7, 0.2, -0.3]];
        let paths = vec![vec![(0, 0), (1, 0)], vec![(0, 0), (1, 2)]];
        let objective = |z: &Vec<Vec<f64>>, kind| {
            let dists: Vec<Vec<f64>> = z.iter().map(|l| softmax(l)).collect();
            set_loss_log(kind, &path_logprobs(&paths, &dists)).unwrap().0
        };
        for kind in [SetLoss::Nll, SetLoss::Uniform, SetLoss::Libra] {
            let dists: Vec<Vec<f64>> = logits.iter().map(|l| softmax(l)).collect();
            let (_, g) = set_loss_log(kind, &path_logprobs(&paths, &dists)).unwrap();
            let analytic = assemble_sequential_gradient(&g, &paths, &dists);
            for n in 0..logits.len() {
                for a in 0..logits[n].len() {
                    let (mut up, mut down) = (logits.clone(), logits.clone());
                    up[n][a] += 1e-6;
                    down[n][a] -= 1e-6;
                    let fd = (objective(&up, kind) - objective(&down, kind)) / 2e-6;
                    assert_abs_diff_eq!(analytic[n][a], fd, epsilon = 1e-7);
                }
            }
        }
    }

    #[test]
    fn loss_kind_strings() {
        for (s, k) in [
            ("bs", LossKind::Bs),
            ("NLL", LossKind::Nll),
            ("merit:0.5", LossKind::Merit(0.5)),
            ("short", LossKind::Single(SelectionStrategy::Short)),
            ("long±", LossKind::SinglePair(SelectionStrategy::Long, 1.0)),
            ("rand_pm", LossKind::SinglePair(SelectionStrategy::Rand(0), 1.0)),
        ] {
            assert_eq!(s.parse::<LossKind>().unwrap(), k);
            assert_eq!(k.to_string().parse::<LossKind>().unwrap(), k);
        }
        for bad in ["merit:2", "merit:x", "bs±", "cross"] {
            let e = bad.parse::<LossKind>().unwrap_err().to_string();
            assert!(e.contains("libra"), "{e}");
        }
    }

    fn config() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..7).prop_flat_map(|n| {
            (prop::collection::vec(0.05f64..1.0, n), prop::collection::vec(any::<bool>(), n)).prop_map(|(raw, mut y)| {
                y[0] = true;
                *y.last_mut().unwrap() = false;
                let total: f64 = raw.iter().sum();
                (raw.iter().map(|r| r / total).collect(), y)
            })
        })
    }

    fn fd_check(f: &dyn Fn(&[f64]) -> f64, p: &[f64], grad: &[f64]) {
        for i in 0..p.len() {
            let (mut up, mut down) = (p.to_vec(), p.to_vec());
            up[i] += 1e-6;
            down[i] -= 1e-6;
            let fd = (f(&up) - f(&down)) / 2e-6;
            let scale = fd.abs().max(grad[i].abs()).max(1.0);
            assert!((fd - grad[i]).abs() / scale < 1e-5, "component {i}: {fd} vs {}", grad[i]);
        }
    }

    proptest! {
        #[test]
        fn probability_gradients((p, y) in config(), beta in 0.0f64..1.0) {
            fd_check(&|q| nll_loss(q, &y).unwrap().0, &p, &nll_loss(&p, &y).unwrap().1);
            fd_check(&|q| uniform_loss(q, &y).unwrap().0, &p, &uniform_loss(&p, &y).unwrap().1);
            fd_check(&|q| libra_loss(q, &y).unwrap().0, &p, &libra_loss(&p, &y).unwrap().1);
            let w = merit_weights(&p, &y, beta).unwrap();
            fd_check(&|q| weighted_log_loss(q, &w).0, &p, &merit_loss(&p, &y, beta).unwrap().1);
        }

        #[test]
        fn merit_interpolates((p, y) in config()) {
            let k = y.iter().filter(|&&a| a).count() as f64;
            let nll = nll_loss(&p, &y).unwrap().1;
            let uni = uniform_loss(&p, &y).unwrap().1;
            let m1 = merit_loss(&p, &y, 1.0).unwrap().1;
            let m0 = merit_loss(&p, &y, 0.0).unwrap().1;
            for i in 0..p.len() {
                prop_assert!((m1[i] - nll[i]).abs() <= 1e-9 * nll[i].abs().max(1.0));
                prop_assert!((m0[i] - uni[i] / k).abs() <= 1e-9 * uni[i].abs().max(1.0));
            }
        }
    }
}
