use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::TableauError;
use crate::logic::{Literal, Problem, Substitution, Term};

/// Calculus limits shared by every state of one search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalculusConfig {
    /// Maximum path length (number of literals above a goal).
    pub max_depth: usize,
}

impl Default for CalculusConfig {
    fn default() -> Self {
        CalculusConfig { max_depth: 20 }
    }
}

/// A legal inference. `Start` only occurs at the root, choosing the start clause.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Action {
    Start { clause: usize },
    Extension { clause: usize, literal: usize },
    Reduction { path_index: usize },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Start { clause } => write!(f, "start({clause})"),
            Action::Extension { clause, literal } => write!(f, "ext({clause},{literal})"),
            Action::Reduction { path_index } => write!(f, "red({path_index})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivationStatus {
    Proof,
    Failure,
    Unknown,
}

impl DerivationStatus {
    pub fn is_terminal(self) -> bool {
        self != DerivationStatus::Unknown
    }
}

/// An open goal with its branch context, both with the state's substitution applied.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Goal {
    pub literal: Literal,
    /// Ancestor literals, nearest first.
    pub path: Vec<Literal>,
}

/// The remaining literals of one clause copy. `goals[0]` is the literal being
/// worked on; when a frame sits below the top of the stack, that literal has
/// been extended and its subtree is in progress.
#[derive(Clone, Debug)]
struct Frame {
    goals: Vec<Literal>,
    /// Path shared by every goal of the frame, nearest first.
    path: Vec<Literal>,
    /// Literals already closed to the left, usable as lemmas by these goals.
    lemmas: Vec<Literal>,
}

/// Connection-tableau prover state.
///
/// Goals are processed depth first, leftmost first. After every step the state
/// closes goals that need no new bindings: a goal identical to a lemma, or whose
/// complement already sits on its path. A goal identical to one of its own path
/// literals violates regularity and makes the state a dead end.
#[derive(Clone, Debug)]
pub struct TableauState {
    problem: Arc<Problem>,
    config: CalculusConfig,
    frames: Vec<Frame>,
    subst: Substitution,
    started: bool,
    dead: bool,
    depth: usize,
    steps_taken: usize,
    var_offset: u32,
    stride: u32,
    auto_closed: usize,
}

impl TableauState {
    /// The state before a start clause is chosen.
    pub fn root(problem: Arc<Problem>, config: CalculusConfig) -> Self {
        let stride = problem.var_stride();
        TableauState {
            problem,
            config,
            frames: Vec::new(),
            subst: Substitution::new(),
            started: false,
            dead: false,
            depth: 0,
            steps_taken: 0,
            var_offset: 0,
            stride,
            auto_closed: 0,
        }
    }

    pub fn problem(&self) -> &Arc<Problem> {
        &self.problem
    }

    pub fn config(&self) -> CalculusConfig {
        self.config
    }

    pub fn subst(&self) -> &Substitution {
        &self.subst
    }

    pub fn is_root(&self) -> bool {
        !self.started
    }

    /// True after a regularity violation.
    pub fn is_dead(&self) -> bool {
        self.dead
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn var_offset(&self) -> u32 {
        self.var_offset
    }

    /// Goals closed automatically by the last transition.
    pub fn auto_closed(&self) -> usize {
        self.auto_closed
    }

    /// Raw selected goal and its path, without the substitution applied.
    pub fn selected(&self) -> Option<(&Literal, &[Literal])> {
        if self.dead {
            return None;
        }
        self.frames.last().map(|f| (&f.goals[0], f.path.as_slice()))
    }

    pub fn lemmas(&self) -> &[Literal] {
        self.frames.last().map_or(&[], |f| f.lemmas.as_slice())
    }

    pub fn open_goal_count(&self) -> usize {
        match self.frames.split_last() {
            None => 0,
            Some((top, rest)) => top.goals.len() + rest.iter().map(|f| f.goals.len() - 1).sum::<usize>(),
        }
    }

    /// Open goals, leftmost (selected) first.
    pub fn open_goals(&self) -> Vec<Goal> {
        let mut out = Vec::new();
        for (k, frame) in self.frames.iter().enumerate().rev() {
            let skip = usize::from(k + 1 != self.frames.len());
            for g in &frame.goals[skip..] {
                out.push(Goal {
                    literal: self.subst.apply_literal(g),
                    path: frame.path.iter().map(|l| self.subst.apply_literal(l)).collect(),
                });
            }
        }
        out
    }

    /// Raw open goal literals, leftmost (selected) first, without the substitution applied.
    pub fn open_goal_literals(&self) -> Vec<&Literal> {
        if self.dead {
            return Vec::new();
        }
        let top = self.frames.len();
        self.frames.iter().enumerate().rev().flat_map(|(k, f)| f.goals[usize::from(k + 1 != top)..].iter()).collect()
    }

    pub fn legal_actions(&self) -> Vec<Action> {
        if !self.started {
            return self.problem.start_clause_ids.iter().map(|&clause| Action::Start { clause }).collect();
        }
        let Some((goal, path)) = self.selected() else {
            return Vec::new();
        };
        let mut scratch = self.subst.clone();
        let mut actions = Vec::new();
        for (i, p) in path.iter().enumerate() {
            if goal.may_connect(p) && scratch.unifiable_args(&goal.args, &p.args) {
                actions.push(Action::Reduction { path_index: i });
            }
        }
        let deeper_ok = path.len() < self.config.max_depth;
        for clause in &self.problem.clauses {
            if clause.literals.len() > 1 && !deeper_ok {
                continue;
            }
            for (j, lit) in clause.literals.iter().enumerate() {
                if !goal.may_connect(lit) {
                    continue;
                }
                let renamed = lit.shift_vars(self.var_offset);
                if scratch.unifiable_args(&goal.args, &renamed.args) {
                    actions.push(Action::Extension { clause: clause.id, literal: j });
                }
            }
        }
        actions
    }

    pub fn status(&self) -> DerivationStatus {
        self.status_given(&self.legal_actions())
    }

    /// Status when the legal actions are already known.
    pub fn status_given(&self, actions: &[Action]) -> DerivationStatus {
        if self.dead {
            DerivationStatus::Failure
        } else if self.started && self.frames.is_empty() {
            DerivationStatus::Proof
        } else if actions.is_empty() {
            DerivationStatus::Failure
        } else {
            DerivationStatus::Unknown
        }
    }

    pub fn apply_action(&self, action: Action) -> Result<TableauState, TableauError> {
        let illegal = || TableauError::IllegalAction(action.to_string());
        let mut next = self.clone();
        next.auto_closed = 0;
        match action {
            Action::Start { clause } => {
                if self.started || !self.problem.start_clause_ids.contains(&clause) {
                    return Err(illegal());
                }
                let c = self.problem.clause(clause).ok_or_else(illegal)?;
                let goals = c.literals.iter().map(|l| l.shift_vars(self.var_offset)).collect();
                next.frames.push(Frame { goals, path: Vec::new(), lemmas: Vec::new() });
                next.started = true;
            }
            Action::Extension { clause, literal } => {
                let (goal, path) = self.selected().ok_or_else(illegal)?;
                let c = self.problem.clause(clause).ok_or_else(illegal)?;
                let lit = c.literals.get(literal).ok_or_else(illegal)?;
                let renamed = lit.shift_vars(self.var_offset);
                if !next.subst.unify_complementary(goal, &renamed) {
                    return Err(illegal());
                }
                let rest: Vec<Literal> = c
                    .literals
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != literal)
                    .map(|(_, l)| l.shift_vars(self.var_offset))
                    .collect();
                if rest.is_empty() {
                    next.close_selected();
                } else {
                    if path.len() >= self.config.max_depth {
                        return Err(illegal());
                    }
                    let mut child_path = Vec::with_capacity(path.len() + 1);
                    child_path.push(goal.clone());
                    child_path.extend_from_slice(path);
                    next.depth = next.depth.max(child_path.len());
                    let lemmas = self.frames.last().map(|f| f.lemmas.clone()).unwrap_or_default();
                    next.frames.push(Frame { goals: rest, path: child_path, lemmas });
                }
            }
            Action::Reduction { path_index } => {
                let (goal, path) = self.selected().ok_or_else(illegal)?;
                let target = path.get(path_index).ok_or_else(illegal)?;
                if !next.subst.unify_complementary(goal, target) {
                    return Err(illegal());
                }
                next.close_selected();
            }
        }
        next.var_offset += self.stride;
        next.steps_taken += 1;
        next.settle();
        Ok(next)
    }

    fn close_selected(&mut self) {
        let top = self.frames.last_mut().expect("a selected goal");
        let g = top.goals.remove(0);
        top.lemmas.push(g);
    }

    fn settle(&mut self) {
        loop {
            while self.frames.last().is_some_and(|f| f.goals.is_empty()) {
                self.frames.pop();
                if self.frames.is_empty() {
                    return;
                }
                self.close_selected();
            }
            if self.frames.is_empty() {
                return;
            }
            if self.violates_regularity() {
                self.dead = true;
                return;
            }
            let top = self.frames.last().expect("non-empty");
            let goal = &top.goals[0];
            let closable = top.lemmas.iter().any(|l| self.subst.identical_literals(l, goal))
                || top.path.iter().any(|p| self.subst.complementary(goal, p));
            if !closable {
                return;
            }
            self.close_selected();
            self.auto_closed += 1;
        }
    }

    fn violates_regularity(&self) -> bool {
        let n = self.frames.len();
        self.frames.iter().enumerate().any(|(k, f)| {
            let skip = usize::from(k + 1 != n);
            f.goals[skip..]
                .iter()
                .any(|g| f.path.iter().any(|p| self.subst.identical_literals(g, p)))
        })
    }

    /// Printed goals, paths and lemmas after substitution, with variables
    /// renumbered in order of first occurrence. Equal keys mean equal futures.
    pub fn canonical_key(&self) -> String {
        if !self.started {
            return "root".to_string();
        }
        if self.dead {
            return "dead".to_string();
        }
        if self.frames.is_empty() {
            return "closed".to_string();
        }
        let mut names = HashMap::new();
        let mut out = String::new();
        for f in &self.frames {
            out.push('[');
            for (label, lits) in [("g", &f.goals), ("p", &f.path), ("l", &f.lemmas)] {
                out.push_str(label);
                out.push(':');
                for l in lits.iter() {
                    self.write_canonical(&mut out, l, &mut names);
                    out.push(',');
                }
                out.push(';');
            }
            out.push(']');
        }
        out
    }

    fn write_canonical(&self, out: &mut String, l: &Literal, names: &mut HashMap<u32, usize>) {
        if !l.positive {
            out.push('~');
        }
        out.push_str(&l.predicate);
        out.push('(');
        for a in &l.args {
            self.write_term(out, a, names);
            out.push(',');
        }
        out.push(')');
    }

    fn write_term(&self, out: &mut String, t: &Term, names: &mut HashMap<u32, usize>) {
        match self.subst.walk(t) {
            Term::Var(v) => {
                let n = names.len();
                let idx = *names.entry(*v).or_insert(n);
                let _ = write!(out, "_{idx}");
            }
            Term::App(f, args) => {
                out.push_str(f);
                if !args.is_empty() {
                    out.push('(');
                    for a in args.iter() {
                        self.write_term(out, a, names);
                        out.push(',');
                    }
                    out.push(')');
                }
            }
        }
    }
}

/// One state per start clause, i.e. the children of the root.
pub fn initial_states(problem: &Arc<Problem>, config: CalculusConfig) -> Result<Vec<TableauState>, TableauError> {
    let root = TableauState::root(problem.clone(), config);
    let actions = root.legal_actions();
    if actions.is_empty() {
        return Err(TableauError::NoStartClause);
    }
    actions.into_iter().map(|a| root.apply_action(a)).collect()
}

/// Replays `actions` from the root, returning every intermediate state
/// (root first).
pub fn replay(problem: &Arc<Problem>, config: CalculusConfig, actions: &[Action]) -> Result<Vec<TableauState>, TableauError> {
    let mut states = vec![TableauState::root(problem.clone(), config)];
    for &a in actions {
        let next = states.last().expect("non-empty").apply_action(a)?;
        states.push(next);
    }
    Ok(states)
}

/// Human-readable label of an action at `state`, e.g. `~f(a) & p` for an
/// extension (connected literal first) or `red` for a reduction.
pub fn action_label(state: &TableauState, action: Action) -> String {
    match action {
        Action::Reduction { .. } => "red".to_string(),
        Action::Start { clause } | Action::Extension { clause, .. } => {
            let Some(c) = state.problem().clause(clause) else {
                return action.to_string();
            };
            let first = match action {
                Action::Extension { literal, .. } => literal,
                _ => 0,
            };
            let mut parts = vec![c.literals[first].to_string()];
            parts.extend(c.literals.iter().enumerate().filter(|&(j, _)| j != first).map(|(_, l)| l.to_string()));
            parts.join(" & ")
        }
    }
}
