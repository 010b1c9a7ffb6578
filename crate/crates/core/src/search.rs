//! PUCT Monte Carlo tree search over prover states.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::TableauError;
use crate::logic::Problem;
use crate::tableau::{Action, CalculusConfig, DerivationStatus, TableauState};

/// Policy and value oracle consulted by the search.
///
/// Implementations are shared read-only between worker threads.
pub trait Guidance: Sync {
    /// A probability distribution over exactly `actions`, in the given order.
    fn policy(&self, state: &TableauState, actions: &[Action]) -> Vec<f64>;
    /// Estimated probability of reaching a proof from `state`, in `[0, 1]`.
    fn value(&self, state: &TableauState) -> f64;
}

/// Uniform policy and constant value 0.5.
#[derive(Clone, Copy, Debug, Default)]
pub struct Unguided;

impl Guidance for Unguided {
    fn policy(&self, _state: &TableauState, actions: &[Action]) -> Vec<f64> {
        uniform(actions.len())
    }

    fn value(&self, _state: &TableauState) -> f64 {
        0.5
    }
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletNoise {
    pub alpha: f64,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MctsConfig {
    pub cp: f64,
    /// Number of node expansions (new tree nodes) per problem.
    pub inference_budget: usize,
    pub max_depth: usize,
    pub dirichlet_noise: Option<DirichletNoise>,
    pub rng_seed: u64,
    /// Cap on playouts, so that search ends even when it keeps revisiting
    /// terminal nodes. `None` means four times the budget.
    pub max_playouts: Option<usize>,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig { cp: 2.0, inference_budget: 2000, max_depth: 20, dirichlet_noise: None, rng_seed: 0, max_playouts: None }
    }
}

impl MctsConfig {
    pub fn calculus(&self) -> CalculusConfig {
        CalculusConfig { max_depth: self.max_depth }
    }

    pub fn playout_cap(&self) -> usize {
        self.max_playouts.unwrap_or(self.inference_budget.saturating_mul(4)).max(1)
    }
}

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub state: TableauState,
    pub parent: Option<usize>,
    /// The action leading here from the parent.
    pub action: Option<Action>,
    pub actions: Vec<Action>,
    pub priors: Vec<f64>,
    /// Child node index per action, `None` while unexpanded.
    pub children: Vec<Option<usize>>,
    pub visits: u64,
    pub total_reward: f64,
    pub status: DerivationStatus,
    /// Every node below has been created and is terminal or exhausted itself.
    pub exhausted: bool,
}

impl TreeNode {
    pub fn value_estimate(&self) -> f64 {
        self.total_reward / self.visits.max(1) as f64
    }

    pub fn depth(&self) -> usize {
        self.state.steps_taken()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub expansions: usize,
    pub playouts: usize,
}

/// A search tree stored as an arena; node 0 is the virtual root whose actions
/// choose the start clause.
#[derive(Clone, Debug)]
pub struct SearchTree {
    pub problem: Arc<Problem>,
    pub nodes: Vec<TreeNode>,
    pub stats: SearchStats,
}

/// Per-node training targets taken from visit statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeTarget {
    /// Actions from the initial (virtual root) state to this node.
    pub prefix: Vec<Action>,
    pub actions: Vec<Action>,
    pub policy: Vec<f64>,
    pub value: f64,
}

/// Summary exported per problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeReport {
    pub problem: String,
    pub solved: bool,
    pub proofs: usize,
    pub nodes: usize,
    pub depth_reached: usize,
    pub expansions: usize,
    pub playouts: usize,
}

impl SearchTree {
    /// Action sequence from the root to `node`.
    pub fn path_to(&self, mut node: usize) -> Vec<Action> {
        let mut actions = Vec::new();
        while let Some(a) = self.nodes[node].action {
            actions.push(a);
            node = self.nodes[node].parent.expect("non-root node has a parent");
        }
        actions.reverse();
        actions
    }

    fn terminal_paths(&self, status: DerivationStatus) -> Vec<Vec<Action>> {
        let mut out: Vec<Vec<Action>> = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.status == status {
                let path = self.path_to(i);
                if !out.contains(&path) {
                    out.push(path);
                }
            }
        }
        out
    }

    /// Distinct root-to-Proof action sequences, in node creation order.
    pub fn proofs(&self) -> Vec<Vec<Action>> {
        self.terminal_paths(DerivationStatus::Proof)
    }

    /// Distinct root-to-Failure action sequences, in node creation order.
    pub fn failures(&self) -> Vec<Vec<Action>> {
        self.terminal_paths(DerivationStatus::Failure)
    }

    pub fn solved(&self) -> bool {
        self.nodes.iter().any(|n| n.status == DerivationStatus::Proof)
    }

    pub fn report(&self) -> TreeReport {
        TreeReport {
            problem: self.problem.name.clone(),
            solved: self.solved(),
            proofs: self.proofs().len(),
            nodes: self.nodes.len(),
            depth_reached: self.nodes.iter().map(TreeNode::depth).max().unwrap_or(0),
            expansions: self.stats.expansions,
            playouts: self.stats.playouts,
        }
    }

    /// Policy and value targets at every expanded non-terminal node below the
    /// virtual root.
    pub fn targets(&self) -> Vec<NodeTarget> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| !n.state.is_root() && n.status == DerivationStatus::Unknown)
            .filter_map(|(i, n)| {
                let counts: Vec<f64> = n.children.iter().map(|c| c.map_or(0.0, |c| self.nodes[c].visits as f64)).collect();
                let total: f64 = counts.iter().sum();
                (total > 0.0).then(|| NodeTarget {
                    prefix: self.path_to(i),
                    actions: n.actions.clone(),
                    policy: counts.iter().map(|c| c / total).collect(),
                    value: n.value_estimate(),
                })
            })
            .collect()
    }
}

/// Per-node targets: visit frequencies of the children and the mean reward.
pub fn extract_targets(tree: &SearchTree) -> Vec<NodeTarget> {
    tree.targets()
}

/// All distinct proofs in the tree.
pub fn proofs_in_tree(tree: &SearchTree) -> Vec<Vec<Action>> {
    tree.proofs()
}

struct Search<'a, G: Guidance + ?Sized> {
    tree: SearchTree,
    guidance: &'a G,
    config: MctsConfig,
    rng: ChaCha8Rng,
}

impl<G: Guidance + ?Sized> Search<'_, G> {
    fn priors(&mut self, state: &TableauState, actions: &[Action], near_root: bool) -> Vec<f64> {
        if actions.is_empty() {
            return Vec::new();
        }
        let mut priors = if state.is_root() { uniform(actions.len()) } else { self.guidance.policy(state, actions) };
        if let (true, Some(noise), true) = (near_root, self.config.dirichlet_noise, actions.len() > 1) {
            // A Dirichlet draw as normalized Gamma samples.
            if let Ok(gamma) = Gamma::new(noise.alpha, 1.0) {
                let eta: Vec<f64> = (0..actions.len()).map(|_| gamma.sample(&mut self.rng)).collect();
                let total: f64 = eta.iter().sum();
                if total > 0.0 {
                    for (p, e) in priors.iter_mut().zip(eta) {
                        *p = (1.0 - noise.weight) * *p + noise.weight * e / total;
                    }
                }
            }
        }
        priors
    }

    /// Creates a node and returns it together with its leaf evaluation.
    fn make_node(&mut self, state: TableauState, parent: Option<usize>, action: Option<Action>) -> (TreeNode, f64) {
        let actions = state.legal_actions();
        let status = state.status_given(&actions);
        let near_root = parent.is_none() || parent == Some(0);
        let (priors, reward) = match status {
            DerivationStatus::Proof => (Vec::new(), 1.0),
            DerivationStatus::Failure => (Vec::new(), 0.0),
            DerivationStatus::Unknown => {
                let priors = self.priors(&state, &actions, near_root);
                let value = if state.is_root() { 0.0 } else { self.guidance.value(&state).clamp(0.0, 1.0) };
                (priors, value)
            }
        };
        let children = vec![None; actions.len()];
        let node = TreeNode { state, parent, action, actions, priors, children, visits: 1, total_reward: reward, status, exhausted: status.is_terminal() };
        (node, reward)
    }

    fn select(&self, node: usize) -> usize {
        let n = &self.tree.nodes[node];
        let sqrt_n = (n.visits as f64).sqrt();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, child) in n.children.iter().enumerate() {
            let (visits, reward) = child.map_or((0, 0.0), |c| (self.tree.nodes[c].visits, self.tree.nodes[c].total_reward));
            let q = reward / visits.max(1) as f64;
            let u = self.config.cp * n.priors[i] * sqrt_n / (1 + visits) as f64;
            let score = q + u;
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        best
    }

    /// One selection/expansion/backup pass. Returns whether a node was created.
    fn playout(&mut self) -> Result<bool, TableauError> {
        let mut path = vec![0usize];
        let mut node = 0usize;
        let (reward, expanded) = loop {
            let n = &self.tree.nodes[node];
            if n.status.is_terminal() {
                break (if n.status == DerivationStatus::Proof { 1.0 } else { 0.0 }, false);
            }
            let i = self.select(node);
            match self.tree.nodes[node].children[i] {
                Some(c) => {
                    node = c;
                    path.push(c);
                }
                None => {
                    let action = self.tree.nodes[node].actions[i];
                    let state = self.tree.nodes[node].state.apply_action(action)?;
                    let (child, reward) = self.make_node(state, Some(node), Some(action));
                    let id = self.tree.nodes.len();
                    self.tree.nodes.push(child);
                    self.tree.nodes[node].children[i] = Some(id);
                    self.tree.stats.expansions += 1;
                    break (reward, true);
                }
            }
        };
        // A freshly created child already holds its own first visit.
        let revisited = if expanded { None } else { path.pop() };
        if let Some(t) = revisited {
            self.tree.nodes[t].visits += 1;
            self.tree.nodes[t].total_reward += reward;
        }
        for &p in path.iter().rev() {
            let exhausted = {
                let n = &self.tree.nodes[p];
                n.children.iter().all(|c| c.is_some_and(|c| self.tree.nodes[c].exhausted))
            };
            let n = &mut self.tree.nodes[p];
            n.visits += 1;
            n.total_reward += reward;
            n.exhausted = exhausted;
        }
        self.tree.stats.playouts += 1;
        Ok(expanded)
    }
}

/// Runs MCTS until `inference_budget` nodes have been created, the tree is
/// exhausted, or the playout cap is reached.
pub fn run_mcts<G: Guidance + ?Sized>(problem: &Arc<Problem>, guidance: &G, config: &MctsConfig) -> Result<SearchTree, TableauError> {
    let root_state = TableauState::root(problem.clone(), config.calculus());
    if root_state.legal_actions().is_empty() {
        return Err(TableauError::NoStartClause);
    }
    let mut search = Search {
        tree: SearchTree { problem: problem.clone(), nodes: Vec::new(), stats: SearchStats::default() },
        guidance,
        config: *config,
        rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
    };
    let (root, _) = search.make_node(root_state, None, None);
    search.tree.nodes.push(root);
    let cap = config.playout_cap();
    while search.tree.stats.expansions < config.inference_budget && search.tree.stats.playouts < cap && !search.tree.nodes[0].exhausted {
        search.playout()?;
    }
    Ok(search.tree)
}
