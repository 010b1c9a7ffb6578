use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::TableauError;
use crate::logic::Problem;
use crate::tableau::state::{action_label, Action, CalculusConfig, DerivationStatus, TableauState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DagNode {
    pub key: String,
    pub status: DerivationStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DagEdge {
    pub from: usize,
    pub action: Action,
    pub label: String,
    pub to: usize,
}

/// The complete search space of a problem, with states merged up to variable
/// renaming. Closed tableaux and dead ends reached by a regularity violation
/// are kept as separate nodes, one per incoming edge.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchDag {
    pub nodes: Vec<DagNode>,
    pub edges: Vec<DagEdge>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DagStats {
    pub nodes: usize,
    pub proofs: usize,
    pub failures: usize,
}

impl SearchDag {
    pub fn stats(&self) -> DagStats {
        let count = |s| self.nodes.iter().filter(|n| n.status == s).count();
        DagStats { nodes: self.nodes.len(), proofs: count(DerivationStatus::Proof), failures: count(DerivationStatus::Failure) }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dag serializes")
    }

    /// Graphviz rendering; Proof green, Failure red, Unknown gray.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph search_dag {\n  node [shape=circle, style=filled];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let color = match n.status {
                DerivationStatus::Proof => "palegreen",
                DerivationStatus::Failure => "lightpink",
                DerivationStatus::Unknown => "gray90",
            };
            let _ = writeln!(out, "  n{i} [label=\"{}\", fillcolor={color}];", i + 1);
        }
        for e in &self.edges {
            let label = e.label.replace('"', "\\\"");
            let _ = writeln!(out, "  n{} -> n{} [label=\"{label}\"];", e.from, e.to);
        }
        out.push_str("}\n");
        out
    }
}

/// Breadth-first closure of the transition relation from the root.
pub fn enumerate_search_dag(problem: &Arc<Problem>, config: CalculusConfig, max_nodes: usize) -> Result<SearchDag, TableauError> {
    let mut dag = SearchDag::default();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut queue = VecDeque::new();

    let root = TableauState::root(problem.clone(), config);
    dag.nodes.push(DagNode { key: root.canonical_key(), status: root.status() });
    index.insert(root.canonical_key(), 0);
    queue.push_back((0usize, root));

    while let Some((id, state)) = queue.pop_front() {
        let actions = state.legal_actions();
        if state.status_given(&actions).is_terminal() {
            continue;
        }
        for action in actions {
            let child = state.apply_action(action)?;
            let label = action_label(&state, action);
            let closed = child.open_goal_count() == 0;
            let to = if child.is_dead() || closed {
                let (tag, status) = if closed { ("proof", DerivationStatus::Proof) } else { ("dead", DerivationStatus::Failure) };
                dag.nodes.push(DagNode { key: format!("{tag}/{id}/{action}"), status });
                dag.nodes.len() - 1
            } else {
                let key = child.canonical_key();
                match index.get(&key) {
                    Some(&existing) => existing,
                    None => {
                        dag.nodes.push(DagNode { key: key.clone(), status: child.status() });
                        let new_id = dag.nodes.len() - 1;
                        index.insert(key, new_id);
                        queue.push_back((new_id, child));
                        new_id
                    }
                }
            };
            if dag.nodes.len() > max_nodes {
                return Err(TableauError::BudgetExceeded(max_nodes));
            }
            dag.edges.push(DagEdge { from: id, action, label, to });
        }
    }
    Ok(dag)
}
