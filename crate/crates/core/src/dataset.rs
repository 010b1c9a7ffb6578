//! Training samples built from search trees, and their JSONL storage.
//!
//! Each line of a samples file is one JSON object:
//!
//! ```text
//! {"version":1,"problem":"ra_1_0003",
//!  "proofs":[{"problem":"ra_1_0003","actions":[{"kind":"start","clause":12},...],"status":"proof","length":5}],
//!  "failures":[...],
//!  "tree_targets":[{"prefix":[...],"actions":[...],"policy":[...],"value":0.4}]}
//! ```
//!
//! `tree_targets` may be `null`. A record whose `version` differs from
//! [`SAMPLES_VERSION`] is a load error.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{StoreError, TableauError};
use crate::logic::Problem;
use crate::search::{NodeTarget, SearchTree};
use crate::tableau::{replay, Action, CalculusConfig, DerivationStatus};

pub const SAMPLES_VERSION: u32 = 1;

/// An action sequence from the virtual root with its final status.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derivation {
    pub problem: String,
    pub actions: Vec<Action>,
    pub status: DerivationStatus,
    pub length: usize,
}

impl Derivation {
    pub fn new(problem: &str, actions: Vec<Action>, status: DerivationStatus) -> Self {
        Derivation { problem: problem.to_string(), length: actions.len(), actions, status }
    }

    /// Status obtained by replaying the actions on the problem.
    pub fn replay_status(&self, problem: &Arc<Problem>, config: CalculusConfig) -> Result<DerivationStatus, TableauError> {
        let states = replay(problem, config, &self.actions)?;
        Ok(states.last().expect("replay includes the root").status())
    }
}

/// All derivations of one problem found by one search: a partially labelled sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PllSample {
    pub problem: String,
    pub proofs: Vec<Derivation>,
    pub failures: Vec<Derivation>,
    pub tree_targets: Option<Vec<NodeTarget>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionStrategy {
    Short,
    Long,
    Rand(u64),
}

/// The sample of a tree, or `None` when the tree holds no proof.
pub fn extract_sample(tree: &SearchTree) -> Option<PllSample> {
    let name = &tree.problem.name;
    let proofs: Vec<Derivation> = tree.proofs().into_iter().map(|a| Derivation::new(name, a, DerivationStatus::Proof)).collect();
    if proofs.is_empty() {
        return None;
    }
    let failures = tree.failures().into_iter().map(|a| Derivation::new(name, a, DerivationStatus::Failure)).collect();
    Some(PllSample { problem: name.clone(), proofs, failures, tree_targets: Some(tree.targets()) })
}

/// Picks one derivation: shortest or longest (ties to the lexicographically
/// first action sequence), or uniformly at random under the given seed.
/// Returns `None` for an empty slice.
pub fn select_from(derivations: &[Derivation], strategy: SelectionStrategy) -> Option<&Derivation> {
    if derivations.is_empty() {
        return None;
    }
    match strategy {
        SelectionStrategy::Short => derivations.iter().min_by(|a, b| a.length.cmp(&b.length).then_with(|| a.actions.cmp(&b.actions))),
        SelectionStrategy::Long => derivations.iter().min_by(|a, b| b.length.cmp(&a.length).then_with(|| a.actions.cmp(&b.actions))),
        SelectionStrategy::Rand(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Some(&derivations[rng.random_range(0..derivations.len())])
        }
    }
}

/// The proof to imitate under `strategy`.
pub fn select_single(sample: &PllSample, strategy: SelectionStrategy) -> &Derivation {
    select_from(&sample.proofs, strategy).expect("a sample has at least one proof")
}

/// A proof to imitate and, when the sample has one, a failure to avoid, both
/// chosen with the same strategy.
pub fn pair_with_failure(sample: &PllSample, strategy: SelectionStrategy) -> (&Derivation, Option<&Derivation>) {
    (select_single(sample, strategy), select_from(&sample.failures, strategy))
}

#[derive(Serialize)]
struct RecordOut<'a> {
    version: u32,
    #[serde(flatten)]
    sample: &'a PllSample,
}

#[derive(Deserialize)]
struct RecordIn {
    version: u32,
    #[serde(flatten)]
    sample: PllSample,
}

pub fn save_samples(samples: &[PllSample], path: &Path) -> Result<(), StoreError> {
    let file = File::create(path).map_err(|e| StoreError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for sample in samples {
        let line = serde_json::to_string(&RecordOut { version: SAMPLES_VERSION, sample }).expect("samples serialize");
        writeln!(out, "{line}").map_err(|e| StoreError::io(path, e))?;
    }
    out.flush().map_err(|e| StoreError::io(path, e))
}

pub fn load_samples(path: &Path) -> Result<Vec<PllSample>, StoreError> {
    let file = File::open(path).map_err(|e| StoreError::io(path, e))?;
    let mut samples = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| StoreError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RecordIn = serde_json::from_str(&line).map_err(|e| StoreError::Malformed { index, message: e.to_string() })?;
        if record.version != SAMPLES_VERSION {
            return Err(StoreError::Version { found: record.version, expected: SAMPLES_VERSION });
        }
        samples.push(record.sample);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_problem;
    use crate::search::{run_mcts, MctsConfig, Unguided};
    use crate::tableau::{check_proof, PELLETIER21};

    fn example_sample() -> PllSample {
        let p = Arc::new(parse_problem(PELLETIER21).unwrap());
        let tree = run_mcts(&p, &Unguided, &MctsConfig { inference_budget: 200, ..MctsConfig::default() }).unwrap();
        extract_sample(&tree).unwrap()
    }

    fn d(actions: &[usize]) -> Derivation {
        let acts = actions.iter().map(|&c| Action::Start { clause: c }).collect();
        Derivation::new("t", acts, DerivationStatus::Proof)
    }

    #[test]
    fn example_sample_contents() {
        let s = example_sample();
        assert_eq!(s.failures.len(), 3);
        assert_eq!(s.proofs.len(), 8);
        let p = parse_problem(PELLETIER21).unwrap();
        assert!(s.proofs.iter().all(|d| check_proof(&p, CalculusConfig::default(), &d.actions)));
        let pa = Arc::new(p);
        for d in s.proofs.iter().chain(&s.failures) {
            assert_eq!(d.replay_status(&pa, CalculusConfig::default()).unwrap(), d.status);
            assert_eq!(d.length, d.actions.len());
        }
    }

    #[test]
    fn unsolved_tree_gives_no_sample() {
        let p = Arc::new(parse_problem("q.\nr.").unwrap());
        let tree = run_mcts(&p, &Unguided, &MctsConfig { inference_budget: 10, ..MctsConfig::default() }).unwrap();
        assert!(extract_sample(&tree).is_none());
    }

    #[test]
    fn selection_rules() {
        let proofs = vec![d(&[9, 9, 9, 9, 9, 9]), d(&[1, 1, 1, 1]), d(&[2, 2, 2, 2, 2, 1])];
        let s = PllSample { problem: "t".into(), proofs, failures: vec![], tree_targets: None };
        assert_eq!(select_single(&s, SelectionStrategy::Short).length, 4);
        assert_eq!(select_single(&s, SelectionStrategy::Long), &s.proofs[2]);
        let a = select_single(&s, SelectionStrategy::Rand(5));
        assert_eq!(a, select_single(&s, SelectionStrategy::Rand(5)));
        assert_eq!(pair_with_failure(&s, SelectionStrategy::Short).1, None);
    }

    #[test]
    fn short_pair_on_example() {
        let s = example_sample();
        let (proof, failure) = pair_with_failure(&s, SelectionStrategy::Short);
        assert_eq!(proof.length, 4);
        let shortest_failure = s.failures.iter().map(|f| f.length).min().unwrap();
        assert_eq!(failure.unwrap().length, shortest_failure);
    }

    #[test]
    fn storage_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let s = example_sample();
        let many: Vec<_> = (0..100).map(|i| PllSample { problem: format!("p{i}"), ..s.clone() }).collect();
        save_samples(&many, &path).unwrap();
        assert_eq!(load_samples(&path).unwrap(), many);
        save_samples(&[], &path).unwrap();
        assert!(load_samples(&path).unwrap().is_empty());
    }

    #[test]
    fn storage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let s = example_sample();
        save_samples(&[s.clone(), s], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() - 40]).unwrap();
        match load_samples(&path) {
            Err(StoreError::Malformed { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected malformed record, got {other:?}"),
        }
        let first = text.lines().next().unwrap().replacen("\"version\":1", "\"version\":7", 1);
        std::fs::write(&path, first).unwrap();
        assert!(matches!(load_samples(&path), Err(StoreError::Version { found: 7, .. })));
        assert!(matches!(load_samples(&dir.path().join("missing")), Err(StoreError::Io { .. })));
    }
}
