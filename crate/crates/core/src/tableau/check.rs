//! Independent proof checker.
//!
//! Rebuilds the tableau as an explicit tree of literal nodes instead of the
//! frame stack used by [`TableauState`](super::TableauState), re-deriving which
//! leaf each action applies to, and finally verifies every leaf closure under
//! the final substitution.

use crate::logic::{rename_apart, Literal, Problem, Substitution};
use crate::tableau::state::{Action, CalculusConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Closure {
    Open,
    /// Extended: closed iff all children are closed.
    Inner,
    /// The literal of an extension clause that was connected to its parent.
    Connection,
    /// Complementary to the ancestor with the given node index.
    Reduction(usize),
    /// Identical to an earlier closed node with the given index.
    Lemma(usize),
}

#[derive(Clone, Debug)]
struct Node {
    lit: Option<Literal>,
    parent: Option<usize>,
    children: Vec<usize>,
    closure: Closure,
}

struct Tree {
    nodes: Vec<Node>,
    subst: Substitution,
    next_offset: u32,
    stride: u32,
}

impl Tree {
    fn new(stride: u32) -> Self {
        let root = Node { lit: None, parent: None, children: Vec::new(), closure: Closure::Inner };
        Tree { nodes: vec![root], subst: Substitution::new(), next_offset: 0, stride }
    }

    fn fresh_offset(&mut self) -> u32 {
        let o = self.next_offset;
        self.next_offset += self.stride;
        o
    }

    fn add_children(&mut self, parent: usize, lits: Vec<Literal>, connected: Option<usize>) {
        for (j, lit) in lits.into_iter().enumerate() {
            let idx = self.nodes.len();
            let closure = if Some(j) == connected { Closure::Connection } else { Closure::Open };
            self.nodes.push(Node { lit: Some(lit), parent: Some(parent), children: Vec::new(), closure });
            self.nodes[parent].children.push(idx);
        }
        self.nodes[parent].closure = Closure::Inner;
    }

    fn is_closed(&self, idx: usize) -> bool {
        match self.nodes[idx].closure {
            Closure::Open => false,
            Closure::Inner => !self.nodes[idx].children.is_empty() && self.nodes[idx].children.iter().all(|&c| self.is_closed(c)),
            _ => true,
        }
    }

    fn leftmost_open(&self, idx: usize) -> Option<usize> {
        let n = &self.nodes[idx];
        match n.closure {
            Closure::Open => Some(idx),
            Closure::Inner => n.children.iter().find_map(|&c| self.leftmost_open(c)),
            _ => None,
        }
    }

    /// Literal ancestors of `idx`, nearest first.
    fn ancestors(&self, idx: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = self.nodes[idx].parent;
        while let Some(p) = cur {
            if self.nodes[p].lit.is_some() {
                out.push(p);
            }
            cur = self.nodes[p].parent;
        }
        out
    }

    fn lit(&self, idx: usize) -> &Literal {
        self.nodes[idx].lit.as_ref().expect("literal node")
    }

    /// Closed non-connection nodes that are left siblings of `idx` or of one of
    /// its ancestors.
    fn lemma_candidates(&self, idx: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut child = idx;
        let mut cur = self.nodes[idx].parent;
        while let Some(p) = cur {
            for &sib in &self.nodes[p].children {
                if sib == child {
                    break;
                }
                if self.nodes[sib].closure != Closure::Connection && self.is_closed(sib) {
                    out.push(sib);
                }
            }
            child = p;
            cur = self.nodes[p].parent;
        }
        out
    }

    fn regular(&self) -> bool {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].closure == Closure::Open).all(|i| {
            let l = self.lit(i);
            self.ancestors(i).iter().all(|&a| !self.subst.identical_literals(l, self.lit(a)))
        })
    }

    /// Applies the closures that need no new bindings, mirroring the prover's
    /// transition semantics. Returns false on a regularity violation.
    fn auto_close(&mut self) -> bool {
        loop {
            if !self.regular() {
                return false;
            }
            let Some(leaf) = self.leftmost_open(0) else {
                return true;
            };
            let l = self.lit(leaf).clone();
            if let Some(m) = self.lemma_candidates(leaf).into_iter().find(|&m| self.subst.identical_literals(&l, self.lit(m))) {
                self.nodes[leaf].closure = Closure::Lemma(m);
                continue;
            }
            if let Some(a) = self.ancestors(leaf).into_iter().find(|&a| self.subst.complementary(&l, self.lit(a))) {
                self.nodes[leaf].closure = Closure::Reduction(a);
                continue;
            }
            return true;
        }
    }

    fn step(&mut self, problem: &Problem, config: CalculusConfig, action: Action, first: bool) -> bool {
        match action {
            Action::Start { clause } => {
                if !first || !problem.start_clause_ids.contains(&clause) {
                    return false;
                }
                let Some(c) = problem.clause(clause) else { return false };
                let offset = self.fresh_offset();
                self.add_children(0, rename_apart(c, offset).literals, None);
            }
            Action::Extension { clause, literal } => {
                let Some(leaf) = self.leftmost_open(0) else { return false };
                let Some(c) = problem.clause(clause) else { return false };
                if literal >= c.literals.len() {
                    return false;
                }
                let offset = self.fresh_offset();
                let copy = rename_apart(c, offset);
                let goal = self.lit(leaf).clone();
                if !copy.literals[literal].may_connect(&goal) || !self.subst.unify_args_mut(&goal.args, &copy.literals[literal].args) {
                    return false;
                }
                if copy.literals.len() > 1 && self.ancestors(leaf).len() + 1 > config.max_depth {
                    return false;
                }
                self.add_children(leaf, copy.literals, Some(literal));
            }
            Action::Reduction { path_index } => {
                let Some(leaf) = self.leftmost_open(0) else { return false };
                let ancestors = self.ancestors(leaf);
                let Some(&target) = ancestors.get(path_index) else { return false };
                let goal = self.lit(leaf).clone();
                let other = self.lit(target).clone();
                if !goal.may_connect(&other) || !self.subst.unify_args_mut(&goal.args, &other.args) {
                    return false;
                }
                self.nodes[leaf].closure = Closure::Reduction(target);
            }
        }
        self.auto_close()
    }

    /// Every leaf closed, each closure re-validated under the final substitution.
    fn verify_closed(&self) -> bool {
        if self.nodes[0].children.is_empty() {
            return false;
        }
        (1..self.nodes.len()).all(|i| {
            let n = &self.nodes[i];
            match n.closure {
                Closure::Open => false,
                Closure::Inner => !n.children.is_empty(),
                Closure::Connection => n.parent.is_some_and(|p| self.nodes[p].lit.as_ref().is_some_and(|pl| self.subst.complementary(self.lit(i), pl))),
                Closure::Reduction(a) => self.ancestors(i).contains(&a) && self.subst.complementary(self.lit(i), self.lit(a)),
                Closure::Lemma(m) => {
                    let left_of_branch = {
                        let mut ok = false;
                        let mut child = i;
                        let mut cur = n.parent;
                        while let Some(p) = cur {
                            let sibs = &self.nodes[p].children;
                            let (pm, pc) = (sibs.iter().position(|&s| s == m), sibs.iter().position(|&s| s == child));
                            if let (Some(pm), Some(pc)) = (pm, pc) {
                                ok = pm < pc;
                                break;
                            }
                            child = p;
                            cur = self.nodes[p].parent;
                        }
                        ok
                    };
                    left_of_branch && self.is_closed(m) && self.subst.identical_literals(self.lit(i), self.lit(m))
                }
            }
        })
    }
}

/// Replays `actions` on a freshly built tableau tree and accepts iff every step
/// is a valid inference and the final tableau is closed.
pub fn check_proof(problem: &Problem, config: CalculusConfig, actions: &[Action]) -> bool {
    let mut tree = Tree::new(problem.var_stride());
    for (i, &a) in actions.iter().enumerate() {
        if !tree.step(problem, config, a, i == 0) {
            return false;
        }
    }
    !actions.is_empty() && tree.leftmost_open(0).is_none() && tree.verify_closed()
}
