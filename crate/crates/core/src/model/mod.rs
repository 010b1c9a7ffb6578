//! Hashed-feature policy and value model.
//!
//! The policy scores each action from its feature vector, either linearly or
//! through one tanh hidden layer, and normalizes the scores with a softmax.
//! The value head is a logistic regression over state features. Both heads
//! live in one flat parameter vector:
//!
//! ```text
//! linear:  [policy weights: dim] [value weights: dim] [value bias: 1]
//! hidden:  [W1: dim*hidden] [b1: hidden] [w2: hidden] [value weights: dim] [value bias: 1]
//! ```
//!
//! Model files are binary: the bytes `PLLM`, the format version (u32 LE),
//! the byte length of a JSON header (u32 LE), the header (config and scalar
//! name), the number of stored entries (u64 LE), then one (u64 LE index,
//! scalar LE bytes) pair per parameter that differs from its seeded initial
//! value.

mod features;
mod train;

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use features::{action_features, featurize, state_features, FeatureVector};
pub use train::{grad_check, train, Optimizer, ProblemIndex, TrainConfig, TrainStats};

use crate::error::StoreError;
use crate::losses::softmax;
use crate::scalar::Scalar;
use crate::search::Guidance;
use crate::tableau::{Action, TableauState};

pub const MODEL_VERSION: u32 = 1;
pub const DEFAULT_DIM: usize = 1 << 18;
const MAGIC: &[u8; 4] = b"PLLM";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Hash dimension.
    pub dim: usize,
    /// Hidden units of the policy scorer; 0 for a linear scorer.
    pub hidden: usize,
    /// Seed of the hidden-layer initialization.
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { dim: DEFAULT_DIM, hidden: 0, init_seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyModel<F> {
    config: ModelConfig,
    params: Vec<F>,
}

/// Sparse gradient over the flat parameter vector.
pub type SparseGrad<F> = fnv::FnvHashMap<usize, F>;

fn add<F: Scalar>(g: &mut SparseGrad<F>, i: usize, v: F) {
    let e = g.entry(i).or_insert(F::zero());
    *e = *e + v;
}

fn sigmoid<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

impl<F: Scalar> PolicyModel<F> {
    /// Zero policy output weights and zero value head, so the initial policy is
    /// uniform and the initial value 0.5; hidden weights are small and seeded.
    pub fn new(config: ModelConfig) -> Self {
        let mut params = vec![F::zero(); Self::param_count(config)];
        if config.hidden > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
            let scale = 1.0 / (config.hidden as f64).sqrt();
            for w in &mut params[..config.dim * config.hidden] {
                *w = F::of(rng.random_range(-scale..scale));
            }
        }
        PolicyModel { config, params }
    }

    pub fn param_count(config: ModelConfig) -> usize {
        let policy = if config.hidden == 0 { config.dim } else { config.dim * config.hidden + 2 * config.hidden };
        policy + config.dim + 1
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    fn value_offset(&self) -> usize {
        self.params.len() - self.config.dim - 1
    }

    fn hidden_pre(&self, fv: &FeatureVector) -> Vec<F> {
        let h = self.config.hidden;
        let dh = self.config.dim * h;
        let mut pre: Vec<F> = self.params[dh..dh + h].to_vec();
        for &(i, c) in &fv.entries {
            let c = F::of(f64::from(c));
            let row = &self.params[i as usize * h..(i as usize + 1) * h];
            for (p, &w) in pre.iter_mut().zip(row) {
                *p = *p + c * w;
            }
        }
        pre
    }

    /// Score of one action's feature vector.
    pub fn score(&self, fv: &FeatureVector) -> F {
        let h = self.config.hidden;
        if h == 0 {
            return fv.entries.iter().map(|&(i, c)| F::of(f64::from(c)) * self.params[i as usize]).sum();
        }
        let w2 = self.config.dim * h + h;
        self.hidden_pre(fv).into_iter().zip(&self.params[w2..w2 + h]).map(|(p, &w)| p.tanh() * w).sum()
    }

    /// Adds `dscore * d score / d params` to `grad`.
    pub fn score_backward(&self, fv: &FeatureVector, dscore: F, grad: &mut SparseGrad<F>) {
        if dscore == F::zero() {
            return;
        }
        let h = self.config.hidden;
        if h == 0 {
            for &(i, c) in &fv.entries {
                add(grad, i as usize, dscore * F::of(f64::from(c)));
            }
            return;
        }
        let b1 = self.config.dim * h;
        let w2 = b1 + h;
        for (k, p) in self.hidden_pre(fv).into_iter().enumerate() {
            let a = p.tanh();
            add(grad, w2 + k, dscore * a);
            let dpre = dscore * self.params[w2 + k] * (F::one() - a * a);
            add(grad, b1 + k, dpre);
            for &(i, c) in &fv.entries {
                add(grad, i as usize * h + k, dpre * F::of(f64::from(c)));
            }
        }
    }

    pub fn value_logit(&self, fv: &FeatureVector) -> F {
        let off = self.value_offset();
        let bias = self.params[off + self.config.dim];
        bias + fv.entries.iter().map(|&(i, c)| F::of(f64::from(c)) * self.params[off + i as usize]).sum::<F>()
    }

    /// Adds `dlogit * d value_logit / d params` to `grad`.
    pub fn value_backward(&self, fv: &FeatureVector, dlogit: F, grad: &mut SparseGrad<F>) {
        let off = self.value_offset();
        add(grad, off + self.config.dim, dlogit);
        for &(i, c) in &fv.entries {
            add(grad, off + i as usize, dlogit * F::of(f64::from(c)));
        }
    }

    /// Policy probabilities and logits over `actions`, in order.
    pub fn policy_forward(&self, state: &TableauState, actions: &[Action]) -> (Vec<F>, Vec<F>) {
        let logits: Vec<F> = action_features(state, actions, self.config.dim).iter().map(|fv| self.score(fv)).collect();
        (softmax(&logits), logits)
    }

    pub fn value_forward(&self, state: &TableauState) -> F {
        sigmoid(self.value_logit(&state_features(state, self.config.dim)))
    }

    /// Indices of parameters differing from a freshly initialized model.
    fn changed_entries(&self) -> Vec<(usize, F)> {
        let init = PolicyModel::<F>::new(self.config);
        self.params.iter().zip(&init.params).enumerate().filter(|(_, (a, b))| a.f64().to_bits() != b.f64().to_bits()).map(|(i, (&a, _))| (i, a)).collect()
    }
}

impl<F: Scalar> Guidance for PolicyModel<F> {
    fn policy(&self, state: &TableauState, actions: &[Action]) -> Vec<f64> {
        self.policy_forward(state, actions).0.into_iter().map(Scalar::f64).collect()
    }

    fn value(&self, state: &TableauState) -> f64 {
        self.value_forward(state).f64()
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    scalar: String,
}

fn scalar_name<F: Scalar>() -> &'static str {
    if std::mem::size_of::<F>() == 4 {
        "f32"
    } else {
        "f64"
    }
}

fn write_scalar<F: Scalar>(out: &mut Vec<u8>, v: F) {
    if std::mem::size_of::<F>() == 4 {
        out.extend_from_slice(&(v.f64() as f32).to_le_bytes());
    } else {
        out.extend_from_slice(&v.f64().to_le_bytes());
    }
}

pub fn save_model<F: Scalar>(model: &PolicyModel<F>, path: &Path) -> Result<(), StoreError> {
    let header = serde_json::to_vec(&Header { config: model.config, scalar: scalar_name::<F>().into() }).expect("header serializes");
    let entries = model.changed_entries();
    let mut out = Vec::with_capacity(32 + header.len() + entries.len() * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for (i, v) in entries {
        out.extend_from_slice(&(i as u64).to_le_bytes());
        write_scalar(&mut out, v);
    }
    fs::write(path, out).map_err(|e| StoreError::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| StoreError::Shape("model file is truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Loads a model; the stored scalar type must match `F`.
pub fn load_model<F: Scalar>(path: &Path) -> Result<PolicyModel<F>, StoreError> {
    let bytes = fs::read(path).map_err(|e| StoreError::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(StoreError::Shape("not a model file".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(StoreError::Version { found: version, expected: MODEL_VERSION });
    }
    let header_len = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len)?).map_err(|e| StoreError::Shape(format!("bad header: {e}")))?;
    if header.scalar != scalar_name::<F>() {
        return Err(StoreError::Shape(format!("model stores {} but {} was requested", header.scalar, scalar_name::<F>())));
    }
    let mut model = PolicyModel::<F>::new(header.config);
    let count = r.u64()?;
    for _ in 0..count {
        let i = r.u64()? as usize;
        let v = if std::mem::size_of::<F>() == 4 {
            F::of(f64::from(f32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"))))
        } else {
            F::of(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")))
        };
        *model.params.get_mut(i).ok_or_else(|| StoreError::Shape(format!("parameter index {i} out of range")))? = v;
    }
    Ok(model)
}

/// Loads a model and checks that its configuration is `expected`.
pub fn load_model_expecting<F: Scalar>(path: &Path, expected: ModelConfig) -> Result<PolicyModel<F>, StoreError> {
    let model = load_model::<F>(path)?;
    if model.config != expected {
        return Err(StoreError::Shape(format!("model has {:?}, expected {:?}", model.config, expected)));
    }
    Ok(model)
}
