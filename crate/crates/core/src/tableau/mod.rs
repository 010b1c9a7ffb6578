//! Connection calculus: prover states, inferences, an independent proof
//! checker and exhaustive search-space enumeration.

mod check;
mod dag;
mod state;

pub use check::check_proof;
pub use dag::{enumerate_search_dag, DagEdge, DagNode, DagStats, SearchDag};
pub use state::{action_label, initial_states, replay, Action, CalculusConfig, DerivationStatus, Goal, TableauState};

/// The example theorem whose complete search DAG has 15 states.
pub const PELLETIER21: &str = "\
#name: pelletier21
#start: 2
p | ~f(a).
f(b) | ~p.
p | f(X).
~p | ~f(X).
";

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::logic::parse_problem;

    fn example() -> Arc<crate::logic::Problem> {
        Arc::new(parse_problem(PELLETIER21).unwrap())
    }

    fn cfg() -> CalculusConfig {
        CalculusConfig::default()
    }

    fn ext(clause: usize, literal: usize) -> Action {
        Action::Extension { clause, literal }
    }

    /// root -> 2 -> 3 -> 4 -> 5 of the example DAG.
    fn short_proof() -> Vec<Action> {
        vec![Action::Start { clause: 2 }, ext(1, 1), ext(3, 1), ext(0, 1)]
    }

    #[test]
    fn start_state_has_clause_literals_as_goals() {
        let states = initial_states(&example(), cfg()).unwrap();
        assert_eq!(states.len(), 1);
        let goals = states[0].open_goals();
        assert_eq!(goals.len(), 2);
        assert_eq!(goals[0].literal.to_string(), "p");
        assert!(goals.iter().all(|g| g.path.is_empty()));
        assert_eq!(states[0].status(), DerivationStatus::Unknown);
    }

    #[test]
    fn single_and_multiple_start_clauses() {
        let p = Arc::new(parse_problem("q.").unwrap());
        let s = initial_states(&p, cfg()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].open_goals().len(), 1);
        let p = Arc::new(parse_problem("#start: 0 1\nq.\n~q.").unwrap());
        assert_eq!(initial_states(&p, cfg()).unwrap().len(), 2);
        let p = Arc::new(parse_problem("#start:\nq.").unwrap());
        assert!(initial_states(&p, cfg()).is_err());
    }

    #[test]
    fn walk_to_first_proof() {
        let states = replay(&example(), cfg(), &short_proof()).unwrap();
        let s4 = &states[3];
        assert_eq!(s4.open_goals().len(), 1);
        assert_eq!(s4.open_goals()[0].literal.to_string(), "f(X0)");
        assert_eq!(s4.legal_actions(), vec![ext(0, 1), ext(3, 1)]);
        assert_eq!(states[4].status(), DerivationStatus::Proof);
        assert!(check_proof(&example(), cfg(), &short_proof()));
    }

    #[test]
    fn node_seven_offers_reduction_and_extension() {
        let actions = [Action::Start { clause: 2 }, ext(1, 1), ext(3, 1), ext(3, 1), ext(0, 0)];
        let states = replay(&example(), cfg(), &actions).unwrap();
        let s7 = states.last().unwrap();
        assert_eq!(s7.open_goals()[0].literal.to_string(), "~f(a)");
        assert_eq!(s7.legal_actions(), vec![Action::Reduction { path_index: 1 }, ext(2, 1)]);
        for a in s7.legal_actions() {
            assert_eq!(s7.apply_action(a).unwrap().status(), DerivationStatus::Proof);
        }
    }

    #[test]
    fn regularity_violation_is_failure() {
        // node 14 -> 15: p, then ~f(Y) extended with p | f(X) repeats p on the path.
        let actions = [Action::Start { clause: 2 }, ext(3, 0), ext(2, 1)];
        let states = replay(&example(), cfg(), &actions).unwrap();
        assert!(states[3].is_dead());
        assert_eq!(states[3].status(), DerivationStatus::Failure);
    }

    #[test]
    fn illegal_action_is_rejected() {
        let s = &initial_states(&example(), cfg()).unwrap()[0];
        assert!(s.apply_action(ext(0, 0)).is_err());
        assert!(s.apply_action(Action::Reduction { path_index: 0 }).is_err());
        assert!(s.apply_action(Action::Start { clause: 2 }).is_err());
    }

    #[test]
    fn goal_without_complement_fails() {
        let p = Arc::new(parse_problem("q.\nr.").unwrap());
        let s = &initial_states(&p, cfg()).unwrap()[0];
        assert!(s.legal_actions().is_empty());
        assert_eq!(s.status(), DerivationStatus::Failure);
    }

    #[test]
    fn reduction_closes_one_goal() {
        let p = Arc::new(parse_problem("#start: 0\np(X) | q.\n~p(a) | ~p(Y) | q.").unwrap());
        let s = &initial_states(&p, cfg()).unwrap()[0];
        let after = s.apply_action(ext(1, 0)).unwrap();
        let before = after.open_goal_count();
        let red = after.legal_actions().into_iter().find(|a| matches!(a, Action::Reduction { .. })).unwrap();
        let next = after.apply_action(red).unwrap();
        assert_eq!(next.open_goal_count() + next.auto_closed(), before - 1);
    }

    #[test]
    fn proper_prefixes_are_rejected() {
        let proof = short_proof();
        for n in 0..proof.len() {
            assert!(!check_proof(&example(), cfg(), &proof[..n]));
        }
    }

    #[test]
    fn dag_of_example() {
        let dag = enumerate_search_dag(&example(), cfg(), 1000).unwrap();
        let stats = dag.stats();
        assert_eq!((stats.proofs, stats.failures), (4, 2));
        assert_eq!(stats.nodes, 14);
        let keys: std::collections::HashSet<_> = dag.nodes.iter().map(|n| &n.key).collect();
        assert_eq!(keys.len(), dag.nodes.len());
    }

    #[test]
    fn tiny_dags() {
        let p = Arc::new(parse_problem("#start: 0\nq.\n~q.").unwrap());
        let s = enumerate_search_dag(&p, cfg(), 100).unwrap().stats();
        assert_eq!((s.nodes, s.proofs, s.failures), (3, 1, 0));
        let p = Arc::new(parse_problem("q.").unwrap());
        let s = enumerate_search_dag(&p, cfg(), 100).unwrap().stats();
        assert_eq!((s.nodes, s.proofs, s.failures), (2, 0, 1));
        assert!(enumerate_search_dag(&example(), cfg(), 3).is_err());
    }
}
