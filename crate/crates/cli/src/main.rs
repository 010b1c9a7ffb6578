//! `pllcop`: generate problems, prove, run expert iteration, draw search DAGs
//! and render experiment tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pllcop::experiment::{cp_sweep, expert_iteration, read_summary, with_big_stack, ExperimentConfig, SummaryEntry};
use pllcop::logic::{generate_ra_set, parse_named, Problem};
use pllcop::losses::{LossKind, LOSS_CHOICES};
use pllcop::model::{load_model, ModelConfig, Optimizer, TrainConfig, DEFAULT_DIM};
use pllcop::search::{run_mcts, MctsConfig, Unguided};
use pllcop::tableau::{check_proof, enumerate_search_dag};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "pllcop", version, about = "Connection-tableau prover with MCTS guidance trained by partial label learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write generated Robinson Arithmetic problems, one matrix file each.
    GenRa(GenRaArgs),
    /// Search for a proof of one problem. Exit 0 with a checked proof, 1 when the budget runs out, 2 on input errors.
    Prove(ProveArgs),
    /// Run expert iteration and record everything in a run directory.
    Loop(LoopArgs),
    /// Enumerate the complete search DAG of a small problem as DOT plus stats JSON.
    Dag(DagArgs),
    /// Print the summary tables of a run directory, one row per loss and one column per iteration.
    Report(ReportArgs),
    /// Unguided search at several exploration constants.
    Sweep(SweepArgs),
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct GenArgs {
    /// Operators per generated expression.
    #[arg(long, default_value_t = 3)]
    operators: usize,
    /// Exclusive upper bound of generated operands.
    #[arg(long, default_value_t = 10)]
    bound: u64,
}

#[derive(Args)]
struct GenRaArgs {
    /// Number of problems.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    gen: GenArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct SearchArgs {
    /// Exploration constant.
    #[arg(long, default_value_t = 2.0)]
    cp: f64,
    /// Expansions per problem.
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    /// Maximum path length.
    #[arg(long, default_value_t = 20)]
    depth: usize,
    /// Search seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SearchArgs {
    fn mcts(&self) -> MctsConfig {
        MctsConfig { cp: self.cp, inference_budget: self.budget, max_depth: self.depth, rng_seed: self.seed, ..MctsConfig::default() }
    }
}

#[derive(Args)]
struct ProveArgs {
    /// Problem file.
    problem: PathBuf,
    /// Trained model; unguided search without one.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    search: SearchArgs,
    /// Where to write the proof as JSON actions.
    #[arg(long)]
    proof_out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct ProblemSource {
    /// Directory of problem files; generated problems when absent.
    #[arg(long)]
    problems: Option<PathBuf>,
    /// Number of generated problems.
    #[arg(long, default_value_t = 200)]
    count: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    gen_seed: u64,
    #[command(flatten)]
    gen: GenArgs,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct LoopArgs {
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    /// Continue a run from its last completed iteration; other settings come from the run directory.
    #[arg(long)]
    resume: bool,
    #[command(flatten)]
    source: ProblemSource,
    #[command(flatten)]
    search: SearchArgs,
    /// Comma-separated losses; one sub-run per loss when several are given.
    #[arg(long, default_value = "nll", help = format!("Comma-separated losses, from: {}", LOSS_CHOICES))]
    loss: String,
    /// Merit interpolation parameter, used by a plain `merit` loss.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Weight of the failure term of paired single losses.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Search iterations, the first one unguided.
    #[arg(long, default_value_t = 4)]
    iterations: usize,
    /// Training epochs per iteration.
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Learning rate.
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Optimizer: sgd or adam.
    #[arg(long, default_value = "adam")]
    optimizer: String,
    /// Train only on the latest iteration's samples.
    #[arg(long)]
    no_accumulate: bool,
    /// Hashed feature dimension.
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    /// Hidden units of the policy; 0 gives a linear policy.
    #[arg(long, default_value_t = 0)]
    hidden: usize,
    /// Search worker threads; 1 makes runs bit-reproducible.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct DagArgs {
    /// Problem file.
    problem: PathBuf,
    /// Output prefix; writes <out>.dot and <out>.json.
    #[arg(long)]
    out: PathBuf,
    /// Maximum path length.
    #[arg(long, default_value_t = 20)]
    depth: usize,
    /// Abort when the DAG grows beyond this many nodes.
    #[arg(long, default_value_t = 100_000)]
    max_nodes: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory, or a directory of run directories.
    run_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: ProblemSource,
    #[command(flatten)]
    search: SearchArgs,
    /// Comma-separated exploration constants.
    #[arg(long = "cps", default_value = "0.5,1,2,5")]
    cps: String,
    /// Search worker threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match with_big_stack(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::GenRa(a) => cmd_gen_ra(&a).map(|_| ExitCode::SUCCESS),
        Command::Prove(a) => cmd_prove(&a),
        Command::Loop(a) => cmd_loop(a).map(|_| ExitCode::SUCCESS),
        Command::Dag(a) => cmd_dag(&a).map(|_| ExitCode::SUCCESS),
        Command::Report(a) => cmd_report(&a.run_dir).map(|t| {
            print!("{t}");
            ExitCode::SUCCESS
        }),
        Command::Sweep(a) => cmd_sweep(&a).map(|_| ExitCode::SUCCESS),
    }
}

fn cmd_gen_ra(a: &GenRaArgs) -> Result<()> {
    if a.gen.operators == 0 || a.gen.bound == 0 {
        bail!("--operators and --bound must be at least 1");
    }
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for p in generate_ra_set(a.count, a.seed, a.gen.operators, a.gen.bound) {
        let path = a.out.join(format!("{}.p", p.name));
        fs::write(&path, p.to_string()).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("wrote {} problems to {}", a.count, a.out.display());
    Ok(())
}

fn read_problem(path: &Path) -> Result<Problem> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("problem");
    parse_named(&text, stem).with_context(|| format!("parsing {}", path.display()))
}

fn load_problem_dir(dir: &Path) -> Result<Vec<Problem>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let problems: Vec<Problem> = paths.iter().map(|p| read_problem(p)).collect::<Result<_>>()?;
    let mut seen = std::collections::HashSet::new();
    for p in &problems {
        if !seen.insert(p.name.clone()) {
            bail!("duplicate problem name {}", p.name);
        }
    }
    Ok(problems)
}

fn load_source(s: &ProblemSource) -> Result<Vec<Arc<Problem>>> {
    let problems = match &s.problems {
        Some(dir) => load_problem_dir(dir)?,
        None => {
            if s.gen.operators == 0 || s.gen.bound == 0 {
                bail!("--operators and --bound must be at least 1");
            }
            generate_ra_set(s.count, s.gen_seed, s.gen.operators, s.gen.bound)
        }
    };
    Ok(problems.into_iter().map(Arc::new).collect())
}

fn cmd_prove(a: &ProveArgs) -> Result<ExitCode> {
    let problem = Arc::new(read_problem(&a.problem)?);
    let cfg = a.search.mcts();
    let tree = match &a.model {
        Some(path) => {
            let model = load_model::<f64>(path).with_context(|| format!("loading {}", path.display()))?;
            run_mcts(&problem, &model, &cfg)?
        }
        None => run_mcts(&problem, &Unguided, &cfg)?,
    };
    let report = tree.report();
    let Some(proof) = tree.proofs().into_iter().min_by_key(Vec::len) else {
        println!("{}: no proof within {} expansions ({} nodes)", problem.name, report.expansions, report.nodes);
        return Ok(ExitCode::from(1));
    };
    if !check_proof(&problem, cfg.calculus(), &proof) {
        bail!("internal error: the proof found for {} fails the checker", problem.name);
    }
    let json = serde_json::to_string_pretty(&proof)?;
    if let Some(out) = &a.proof_out {
        fs::write(out, &json).with_context(|| format!("writing {}", out.display()))?;
    }
    println!("{}: proof of {} steps found after {} expansions; {} proofs in the tree", problem.name, proof.len(), report.expansions, report.proofs);
    println!("{json}");
    Ok(ExitCode::SUCCESS)
}

fn parse_losses(a: &LoopArgs) -> Result<Vec<LossKind>> {
    a.loss
        .split(',')
        .map(|s| {
            let s = s.trim();
            let s = if s == "merit" { format!("merit:{}", a.beta) } else { s.to_string() };
            s.parse::<LossKind>().map(|l| l.with_lambda(a.lambda)).map_err(anyhow::Error::from)
        })
        .collect()
}

fn parse_optimizer(s: &str) -> Result<Optimizer> {
    match s {
        "sgd" => Ok(Optimizer::Sgd),
        "adam" => Ok(Optimizer::Adam),
        other => bail!("unknown optimizer {other:?}; valid choices: sgd, adam"),
    }
}

fn experiment_config(a: &LoopArgs, loss: LossKind) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig {
        mcts: a.search.mcts(),
        train: TrainConfig {
            loss,
            epochs: a.epochs,
            learning_rate: a.lr,
            optimizer: parse_optimizer(&a.optimizer)?,
            rng_seed: a.search.seed,
            accumulate_data: !a.no_accumulate,
        },
        model: ModelConfig { dim: a.dim, hidden: a.hidden, init_seed: a.search.seed },
        iterations: a.iterations,
        workers: a.workers,
    };
    cfg.validate()?;
    Ok(cfg)
}

const RUN_CONFIG: &str = "run_config.json";

fn cmd_loop(mut a: LoopArgs) -> Result<()> {
    if a.resume {
        let path = a.out.join(RUN_CONFIG);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let stored: LoopArgs = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        a = LoopArgs { resume: true, iterations: a.iterations.max(stored.iterations), workers: a.workers, ..stored };
    }
    let losses = parse_losses(&a)?;
    let configs: Vec<(LossKind, ExperimentConfig)> = losses.iter().map(|&l| experiment_config(&a, l).map(|c| (l, c))).collect::<Result<_>>()?;
    let problems = load_source(&a.source)?;
    if problems.is_empty() {
        bail!("the problem set is empty");
    }
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    fs::write(a.out.join(RUN_CONFIG), serde_json::to_string_pretty(&a)?)?;

    let multi = configs.len() > 1;
    let mut rows: Vec<SummaryEntry> = Vec::new();
    for (loss, cfg) in &configs {
        let dir = if multi { a.out.join(loss.to_string().replace(':', "_")) } else { a.out.clone() };
        let reports = expert_iteration(&problems, cfg, Some(&dir), a.resume)?;
        for r in &reports {
            println!("{:>12} iter {}: solved {:>4} cumulative {:>4} proofs/solved {:>6.2} ({:.1}s)", r.loss, r.iteration, r.solved, r.cumulative_solved, r.avg_proofs_per_solved, r.wall_time);
        }
        if multi {
            rows.extend(read_summary(&dir.join("summary.csv"))?);
        }
    }
    if multi {
        let mut w = csv::Writer::from_path(a.out.join("summary.csv"))?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_dag(a: &DagArgs) -> Result<()> {
    let problem = Arc::new(read_problem(&a.problem)?);
    let dag = enumerate_search_dag(&problem, pllcop::tableau::CalculusConfig { max_depth: a.depth }, a.max_nodes)?;
    let stats = serde_json::to_string_pretty(&dag.stats())?;
    let with_ext = |ext: &str| {
        let mut s = a.out.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(with_ext(".dot"), dag.to_dot())?;
    fs::write(with_ext(".json"), &stats)?;
    println!("{stats}");
    Ok(())
}

/// Summary rows of a run directory, or of every run directory below it.
fn collect_summaries(run_dir: &Path) -> Result<Vec<SummaryEntry>> {
    if !run_dir.is_dir() {
        bail!("run directory {} does not exist", run_dir.display());
    }
    let top = run_dir.join("summary.csv");
    if top.is_file() {
        return Ok(read_summary(&top)?);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(run_dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.join("summary.csv").is_file()).collect();
    subdirs.sort();
    let mut rows = Vec::new();
    for d in subdirs {
        rows.extend(read_summary(&d.join("summary.csv"))?);
    }
    if rows.is_empty() {
        bail!("no summary.csv found in {}", run_dir.display());
    }
    Ok(rows)
}

fn render_table(title: &str, rows: &BTreeMap<String, BTreeMap<usize, String>>, iterations: usize) -> String {
    let label_width = rows.keys().map(String::len).max().unwrap_or(4).max(4);
    let mut cells: Vec<Vec<String>> = vec![std::iter::once("loss".to_string()).chain((0..iterations).map(|k| format!("iter {k}"))).collect()];
    for (loss, by_iter) in rows {
        cells.push(std::iter::once(loss.clone()).chain((0..iterations).map(|k| by_iter.get(&k).cloned().unwrap_or_else(|| "-".into()))).collect());
    }
    let widths: Vec<usize> = (0..=iterations).map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0).max(if c == 0 { label_width } else { 0 })).collect();
    let mut out = format!("{title}\n");
    for row in cells {
        let line: Vec<String> = row.iter().enumerate().map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) }).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn cmd_report(run_dir: &Path) -> Result<String> {
    let rows = collect_summaries(run_dir)?;
    let iterations = rows.iter().map(|r| r.iteration + 1).max().unwrap_or(0);
    let table = |f: &dyn Fn(&SummaryEntry) -> String| {
        let mut t: BTreeMap<String, BTreeMap<usize, String>> = BTreeMap::new();
        for r in &rows {
            t.entry(r.loss.clone()).or_default().insert(r.iteration, f(r));
        }
        t
    };
    let mut out = render_table("solved per iteration", &table(&|r| r.solved.to_string()), iterations);
    out.push('\n');
    out.push_str(&render_table("cumulative solved", &table(&|r| r.cumulative.to_string()), iterations));
    out.push('\n');
    out.push_str(&render_table("proofs per solved problem", &table(&|r| r.avg_proofs.to_string()), iterations));
    Ok(out)
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let cps: Vec<f64> = a.cps.split(',').map(|s| s.trim().parse::<f64>().with_context(|| format!("bad cp value {s:?}"))).collect::<Result<_>>()?;
    if cps.is_empty() || cps.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        bail!("--cps needs finite non-negative values");
    }
    let problems = load_source(&a.source)?;
    println!("{:>6}  {:>7}  {:>7}", "cp", "solved", "proofs");
    for row in cp_sweep(&problems, &cps, &a.search.mcts(), a.workers) {
        println!("{:>6}  {:>7}  {:>7.2}", row.cp, row.solved, row.proofs_per_solved);
    }
    Ok(())
}
