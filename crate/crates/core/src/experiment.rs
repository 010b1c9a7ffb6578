//! Expert iteration: guided search over a problem set, sample extraction,
//! training, and a run directory holding everything needed to rerun.
//!
//! Run directory layout:
//!
//! ```text
//! config.json                  the ExperimentConfig
//! problems.txt                 problem names, one per line, in run order
//! summary.csv                  iteration,loss,solved,cumulative,avg_proofs,mean_len,seconds
//! iter_<k>/samples.jsonl       samples found by the search of iteration k
//! iter_<k>/report.json         IterationReport of iteration k
//! iter_<k>/trees.json          per-problem TreeReport list
//! iter_<k>/model.bin           model after training on the data of iteration k
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_samples, save_samples, PllSample};
use crate::error::{RunError, StoreError, TrainError};
use crate::logic::{derive_seed, Problem};
use crate::model::{load_model_expecting, save_model, train, ModelConfig, PolicyModel, ProblemIndex, TrainConfig, TrainStats};
use crate::search::{run_mcts, Guidance, MctsConfig, TreeReport, Unguided};

/// Stack size of search and training threads; successor numerals are deep terms.
pub const WORKER_STACK: usize = 256 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub loss: String,
    pub problems: usize,
    pub solved: usize,
    pub cumulative_solved: usize,
    pub avg_proofs_per_solved: f64,
    /// Mean over solved problems of the shortest proof length.
    pub mean_proof_length: f64,
    /// Wall-clock seconds of search and training; the only field that differs between reruns.
    pub wall_time: f64,
    pub loss_stats: TrainStats,
    pub solved_problems: Vec<String>,
}

impl IterationReport {
    /// The report without its wall-clock time.
    pub fn timeless(&self) -> IterationReport {
        IterationReport { wall_time: 0.0, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mcts: MctsConfig,
    pub train: TrainConfig,
    pub model: ModelConfig,
    /// Number of search iterations; iteration 0 is unguided.
    pub iterations: usize,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig { mcts: MctsConfig::default(), train: TrainConfig::default(), model: ModelConfig::default(), iterations: 4, workers: 1 }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        let fail = |m: &str| Err(RunError::Config(m.to_string()));
        if self.iterations == 0 {
            return fail("iterations must be at least 1");
        }
        if self.workers == 0 {
            return fail("workers must be at least 1");
        }
        if self.mcts.inference_budget == 0 {
            return fail("budget must be at least 1");
        }
        if self.mcts.max_depth == 0 {
            return fail("max depth must be at least 1");
        }
        if !(self.mcts.cp >= 0.0 && self.mcts.cp.is_finite()) {
            return fail("cp must be a finite non-negative number");
        }
        if self.train.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if !(self.train.learning_rate >= 0.0 && self.train.learning_rate.is_finite()) {
            return fail("learning rate must be a finite non-negative number");
        }
        if self.model.dim == 0 {
            return fail("feature dimension must be at least 1");
        }
        Ok(())
    }
}

/// Output of the search phase of one iteration.
#[derive(Clone, Debug)]
pub struct IterationOutcome {
    pub samples: Vec<PllSample>,
    pub trees: Vec<TreeReport>,
}

impl IterationOutcome {
    pub fn solved(&self) -> Vec<String> {
        self.trees.iter().filter(|t| t.solved).map(|t| t.problem.clone()).collect()
    }

    pub fn avg_proofs_per_solved(&self) -> f64 {
        avg_proofs(&self.samples)
    }

    pub fn mean_proof_length(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let total: usize = self.samples.iter().map(|s| s.proofs.iter().map(|p| p.length).min().unwrap_or(0)).sum();
        total as f64 / self.samples.len() as f64
    }
}

/// Mean number of proofs per sample (one sample per solved problem).
pub fn avg_proofs(samples: &[PllSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.proofs.len()).sum::<usize>() as f64 / samples.len() as f64
}

fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).stack_size(WORKER_STACK).build().expect("thread pool")
}

/// Runs `f` on a thread with a stack large enough for deep terms.
pub fn with_big_stack<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    std::thread::scope(|s| std::thread::Builder::new().stack_size(WORKER_STACK).spawn_scoped(s, f).expect("spawn worker").join().expect("worker panicked"))
}

/// Searches every problem with `guidance`. Problem `i` uses the search seed
/// `derive_seed(mcts.rng_seed, i)`, so results do not depend on `workers`.
/// A problem whose search fails is recorded as unsolved.
pub fn run_iteration<G: Guidance + ?Sized>(problems: &[Arc<Problem>], guidance: &G, mcts: &MctsConfig, workers: usize) -> IterationOutcome {
    let results: Vec<(TreeReport, Option<PllSample>)> = pool(workers).install(|| {
        problems
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let cfg = MctsConfig { rng_seed: derive_seed(mcts.rng_seed, i as u64), ..*mcts };
                match run_mcts(p, guidance, &cfg) {
                    Ok(tree) => (tree.report(), crate::dataset::extract_sample(&tree)),
                    Err(_) => (TreeReport { problem: p.name.clone(), solved: false, proofs: 0, nodes: 0, depth_reached: 0, expansions: 0, playouts: 0 }, None),
                }
            })
            .collect()
    });
    let (trees, samples): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    IterationOutcome { trees, samples: samples.into_iter().flatten().collect() }
}

/// Names of the problems solved by a guided search.
pub fn evaluate<G: Guidance + ?Sized>(guidance: &G, problems: &[Arc<Problem>], mcts: &MctsConfig, workers: usize) -> BTreeSet<String> {
    run_iteration(problems, guidance, mcts, workers).solved().into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpRow {
    pub cp: f64,
    pub solved: usize,
    pub proofs_per_solved: f64,
}

/// Unguided search at each exploration constant, with shared seeds.
pub fn cp_sweep(problems: &[Arc<Problem>], cp_values: &[f64], mcts: &MctsConfig, workers: usize) -> Vec<CpRow> {
    cp_values
        .iter()
        .map(|&cp| {
            let out = run_iteration(problems, &Unguided, &MctsConfig { cp, ..*mcts }, workers);
            CpRow { cp, solved: out.samples.len(), proofs_per_solved: out.avg_proofs_per_solved() }
        })
        .collect()
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T, StoreError> {
    r.map_err(|e| StoreError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    io(path, fs::write(path, serde_json::to_string_pretty(value).expect("value serializes")))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let text = io(path, fs::read_to_string(path))?;
    serde_json::from_str(&text).map_err(|e| StoreError::Malformed { index: 0, message: format!("{}: {e}", path.display()) })
}

pub fn iteration_dir(run_dir: &Path, k: usize) -> PathBuf {
    run_dir.join(format!("iter_{k}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SummaryRow {
    iteration: usize,
    loss: String,
    solved: usize,
    cumulative: usize,
    avg_proofs: f64,
    mean_len: f64,
    seconds: f64,
}

fn write_summary(run_dir: &Path, reports: &[IterationReport]) -> Result<(), StoreError> {
    let path = run_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| StoreError::Malformed { index: 0, message: e.to_string() })?;
    for r in reports {
        let row = SummaryRow {
            iteration: r.iteration,
            loss: r.loss.clone(),
            solved: r.solved,
            cumulative: r.cumulative_solved,
            avg_proofs: r.avg_proofs_per_solved,
            mean_len: r.mean_proof_length,
            seconds: r.wall_time,
        };
        w.serialize(row).map_err(|e| StoreError::Malformed { index: r.iteration, message: e.to_string() })?;
    }
    io(&path, w.flush())
}

/// One row of an aggregate summary file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub iteration: usize,
    pub loss: String,
    pub solved: usize,
    pub cumulative: usize,
    pub avg_proofs: f64,
    pub mean_len: f64,
    pub seconds: f64,
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryEntry>, StoreError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => StoreError::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string())),
        _ => StoreError::Malformed { index: 0, message: e.to_string() },
    })?;
    r.deserialize().enumerate().map(|(i, row)| row.map_err(|e| StoreError::Malformed { index: i, message: e.to_string() })).collect()
}

pub fn load_reports(run_dir: &Path) -> Result<Vec<IterationReport>, StoreError> {
    let mut reports = Vec::new();
    for k in 0.. {
        let path = iteration_dir(run_dir, k).join("report.json");
        if !path.exists() {
            break;
        }
        reports.push(read_json(&path)?);
    }
    Ok(reports)
}

fn problem_index(problems: &[Arc<Problem>]) -> ProblemIndex {
    problems.iter().map(|p| (p.name.clone(), p.clone())).collect()
}

/// Alternates search and training for `config.iterations` iterations.
///
/// With a run directory, every iteration is persisted as it completes; with
/// `resume`, completed iterations found in the directory are reloaded and the
/// run continues after the last of them.
pub fn expert_iteration(problems: &[Arc<Problem>], config: &ExperimentConfig, run_dir: Option<&Path>, resume: bool) -> Result<Vec<IterationReport>, RunError> {
    config.validate()?;
    let index = problem_index(problems);
    let mut model = PolicyModel::<f64>::new(config.model);
    let mut reports: Vec<IterationReport> = Vec::new();
    let mut history: Vec<PllSample> = Vec::new();
    let mut ever_solved: BTreeSet<String> = BTreeSet::new();

    if let Some(dir) = run_dir {
        io(dir, fs::create_dir_all(dir))?;
        if resume {
            let stored: ExperimentConfig = read_json(&dir.join("config.json"))?;
            if (ExperimentConfig { iterations: config.iterations, workers: config.workers, ..stored.clone() }) != *config {
                return Err(RunError::Config("resume configuration differs from the stored one".into()));
            }
            reports = load_reports(dir)?;
            reports.truncate(config.iterations);
            for r in &reports {
                ever_solved.extend(r.solved_problems.iter().cloned());
                history.extend(load_samples(&iteration_dir(dir, r.iteration).join("samples.jsonl"))?);
            }
            if let Some(last) = reports.last() {
                model = load_model_expecting(&iteration_dir(dir, last.iteration).join("model.bin"), config.model)?;
            }
            if !config.train.accumulate_data {
                history = match reports.last() {
                    Some(last) => load_samples(&iteration_dir(dir, last.iteration).join("samples.jsonl"))?,
                    None => Vec::new(),
                };
            }
        }
        write_json(&dir.join("config.json"), config)?;
        let names: Vec<&str> = problems.iter().map(|p| p.name.as_str()).collect();
        io(dir, fs::write(dir.join("problems.txt"), names.join("\n") + "\n"))?;
    }

    for k in reports.len()..config.iterations {
        let started = Instant::now();
        let outcome = if k == 0 { run_iteration(problems, &Unguided, &config.mcts, config.workers) } else { run_iteration(problems, &model, &config.mcts, config.workers) };
        let solved = outcome.solved();
        ever_solved.extend(solved.iter().cloned());
        if config.train.accumulate_data {
            history.extend(outcome.samples.iter().cloned());
        } else {
            history = outcome.samples.clone();
        }
        let train_cfg = TrainConfig { rng_seed: derive_seed(config.train.rng_seed, k as u64), ..config.train };
        let loss_stats = match with_big_stack(|| train(&mut model, &history, &index, config.mcts.calculus(), &train_cfg)) {
            Ok(stats) => stats,
            Err(TrainError::Empty) => TrainStats::default(),
            Err(e) => return Err(e.into()),
        };
        let report = IterationReport {
            iteration: k,
            loss: config.train.loss.to_string(),
            problems: problems.len(),
            solved: solved.len(),
            cumulative_solved: ever_solved.len(),
            avg_proofs_per_solved: outcome.avg_proofs_per_solved(),
            mean_proof_length: outcome.mean_proof_length(),
            wall_time: started.elapsed().as_secs_f64(),
            loss_stats,
            solved_problems: solved,
        };
        if let Some(dir) = run_dir {
            let it = iteration_dir(dir, k);
            io(&it, fs::create_dir_all(&it))?;
            save_samples(&outcome.samples, &it.join("samples.jsonl"))?;
            write_json(&it.join("trees.json"), &outcome.trees)?;
            save_model(&model, &it.join("model.bin"))?;
            write_json(&it.join("report.json"), &report)?;
        }
        reports.push(report);
        if let Some(dir) = run_dir {
            write_summary(dir, &reports)?;
        }
    }
    Ok(reports)
}
