//! Hashed term-walk features.
//!
//! A walk is a path of at most three symbols going down a term, each step
//! tagged with the argument position. Anchored walks start at the predicate
//! of a literal and only look at its top; unanchored walks start at every
//! subterm of the selected goal. Every policy feature is conjoined with a key
//! identifying the action, since features shared by all actions of a state
//! cancel in the softmax.

use fnv::FnvHashMap;
use serde::{Deserialize, Serialize};

use crate::logic::{Literal, Substitution, Term};
use crate::tableau::{Action, TableauState};

/// Sparse feature counts over `[0, dim)`, sorted by index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub entries: Vec<(u32, u32)>,
}

impl FeatureVector {
    fn from_weighted(hashes: impl IntoIterator<Item = (u64, u32)>, dim: usize) -> Self {
        let mut counts: FnvHashMap<u32, u32> = FnvHashMap::default();
        for (h, c) in hashes {
            *counts.entry((h % dim as u64) as u32).or_insert(0) += c;
        }
        let mut entries: Vec<(u32, u32)> = counts.into_iter().collect();
        entries.sort_unstable();
        FeatureVector { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(a << 6).wrapping_add(a >> 2);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const VAR_TOKEN: u64 = 0x5a5a_5a5a;

fn token(t: &Term) -> u64 {
    match t {
        Term::Var(_) => VAR_TOKEN,
        Term::App(f, _) => hash_str(f),
    }
}

fn step(parent: u64, position: usize, child: &Term) -> u64 {
    mix(parent, mix(position as u64 + 1, token(child)))
}

/// Walk hashes with multiplicities, deduplicated.
#[derive(Default)]
struct Walks(FnvHashMap<u64, u32>);

impl Walks {
    fn emit(&mut self, h: u64) {
        *self.0.entry(h).or_insert(0) += 1;
    }

    /// Walks from the predicate of `lit` down at most two argument levels.
    fn anchored(&mut self, prefix: &str, lit: &Literal, s: &Substitution) {
        let root = mix(hash_str(prefix), mix(u64::from(lit.positive), hash_str(&lit.predicate)));
        self.emit(root);
        for (i, a) in lit.args.iter().enumerate() {
            let a = s.walk(a);
            let w1 = step(root, i, a);
            self.emit(w1);
            if let Term::App(_, inner) = a {
                for (j, b) in inner.iter().enumerate() {
                    self.emit(step(w1, j, s.walk(b)));
                }
            }
        }
    }

    /// Walks of length at most three starting at every subterm of `lit`.
    fn unanchored(&mut self, prefix: &str, lit: &Literal, s: &Substitution) {
        let p = hash_str(prefix);
        let mut stack: Vec<&Term> = lit.args.iter().map(|a| s.walk(a)).collect();
        while let Some(t) = stack.pop() {
            let w0 = mix(p, token(t));
            self.emit(w0);
            if let Term::App(_, args) = t {
                for (i, a) in args.iter().enumerate() {
                    let a = s.walk(a);
                    let w1 = step(w0, i, a);
                    self.emit(w1);
                    if let Term::App(_, inner) = a {
                        for (j, b) in inner.iter().enumerate() {
                            self.emit(step(w1, j, s.walk(b)));
                        }
                    }
                    stack.push(a);
                }
            }
        }
    }

    fn token(&mut self, name: &str, bucket: usize) {
        self.emit(mix(hash_str(name), bucket as u64));
    }
}

fn bucket(n: usize) -> usize {
    match n {
        0..=4 => n,
        5..=7 => 5,
        8..=12 => 6,
        13..=20 => 7,
        _ => 8,
    }
}

/// Walks describing a state, shared by the value head and every action.
fn state_walks(state: &TableauState) -> Walks {
    let mut w = Walks::default();
    let s = state.subst();
    w.token("bias", 0);
    let goals = state.open_goal_literals();
    w.token("goals", bucket(goals.len()));
    if let Some((goal, path)) = state.selected() {
        w.token("depth", bucket(path.len()));
        w.anchored("G", goal, s);
        w.unanchored("g", goal, s);
        for p in path {
            w.anchored("P", p, s);
        }
        for other in goals.iter().skip(1) {
            w.anchored("O", other, s);
        }
    }
    w
}

fn action_key(action: Action) -> u64 {
    match action {
        Action::Start { clause } => mix(hash_str("start"), clause as u64),
        Action::Extension { clause, literal } => mix(hash_str("ext"), mix(clause as u64, literal as u64)),
        Action::Reduction { path_index } => mix(hash_str("red"), path_index.min(7) as u64),
    }
}

/// Walks specific to an action: the new goals an extension creates (after
/// unification), or the path literal a reduction closes against.
fn action_walks(state: &TableauState, action: Action) -> Walks {
    let mut w = Walks::default();
    let Some((goal, path)) = state.selected() else {
        return w;
    };
    match action {
        Action::Extension { clause, literal } => {
            let Some(c) = state.problem().clause(clause) else { return w };
            let offset = state.var_offset();
            let mut scratch = state.subst().clone();
            let connected = c.literals[literal].shift_vars(offset);
            if !scratch.unify_args_mut(&goal.args, &connected.args) {
                return w;
            }
            w.token("new", c.literals.len() - 1);
            for (k, lit) in c.literals.iter().enumerate() {
                if k != literal {
                    w.anchored("N", &lit.shift_vars(offset), &scratch);
                }
            }
        }
        Action::Reduction { path_index } => {
            if let Some(p) = path.get(path_index) {
                w.anchored("R", p, state.subst());
            }
        }
        Action::Start { .. } => {}
    }
    w
}

/// Value-head features of a state.
pub fn state_features(state: &TableauState, dim: usize) -> FeatureVector {
    FeatureVector::from_weighted(state_walks(state).0, dim)
}

/// Policy features of every action at `state`, sharing the state walks.
pub fn action_features(state: &TableauState, actions: &[Action], dim: usize) -> Vec<FeatureVector> {
    let shared: Vec<(u64, u32)> = state_walks(state).0.into_iter().collect();
    actions
        .iter()
        .map(|&a| {
            let key = action_key(a);
            let own = action_walks(state, a).0;
            let all = shared.iter().copied().chain(own).map(|(h, c)| (mix(key, h), c));
            FeatureVector::from_weighted(all, dim)
        })
        .collect()
}

/// Policy features of one (state, action) pair.
pub fn featurize(state: &TableauState, action: Action, dim: usize) -> FeatureVector {
    action_features(state, &[action], dim).pop().expect("one action")
}
