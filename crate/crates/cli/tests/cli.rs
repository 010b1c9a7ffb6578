use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pllcop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pllcop")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn example() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems/pelletier21.p")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn dir_contents(dir: &Path) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap())).collect();
    v.sort();
    v
}

#[test]
fn gen_ra_writes_requested_count_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&pllcop(&["gen-ra", "--count", "5", "--seed", "3", "--out", s(&a)])), 0);
    assert_eq!(code(&pllcop(&["gen-ra", "--count", "5", "--seed", "3", "--out", s(&b)])), 0);
    let (ca, cb) = (dir_contents(&a), dir_contents(&b));
    assert_eq!(ca.len(), 5);
    assert_eq!(ca, cb);
    assert!(ca[0].1.contains("eq("));
}

#[test]
fn gen_ra_zero_count_gives_empty_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("none");
    assert_eq!(code(&pllcop(&["gen-ra", "--count", "0", "--out", s(&out)])), 0);
    assert!(dir_contents(&out).is_empty());
}

#[test]
fn prove_example_succeeds_with_checked_proof() {
    let tmp = tempfile::tempdir().unwrap();
    let proof = tmp.path().join("proof.json");
    let out = pllcop(&["prove", s(&example()), "--budget", "200", "--proof-out", s(&proof)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let actions: serde_json::Value = serde_json::from_str(&fs::read_to_string(&proof).unwrap()).unwrap();
    let n = actions.as_array().unwrap().len();
    assert!((1..=4).contains(&n), "shortest proof has {n} actions");
}

#[test]
fn prove_exhausted_budget_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("ra");
    assert_eq!(code(&pllcop(&["gen-ra", "--count", "1", "--seed", "5", "--out", s(&dir)])), 0);
    let file = fs::read_dir(&dir).unwrap().next().unwrap().unwrap().path();
    assert_eq!(code(&pllcop(&["prove", s(&file), "--budget", "1"])), 1);
}

#[test]
fn prove_missing_or_malformed_file_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&pllcop(&["prove", s(&tmp.path().join("missing.p"))])), 2);
    let bad = tmp.path().join("bad.p");
    fs::write(&bad, "p | (.\n").unwrap();
    assert_eq!(code(&pllcop(&["prove", s(&bad)])), 2);
}

#[test]
fn dag_writes_valid_dot_and_stats() {
    let tmp = tempfile::tempdir().unwrap();
    let prefix = tmp.path().join("fig");
    let out = pllcop(&["dag", s(&example()), "--out", s(&prefix)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("fig.json")).unwrap()).unwrap();
    assert_eq!((stats["nodes"].as_u64(), stats["proofs"].as_u64(), stats["failures"].as_u64()), (Some(14), Some(4), Some(2)));
    let dot = fs::read_to_string(tmp.path().join("fig.dot")).unwrap();
    check_dot(&dot, 14);

    let trivial = tmp.path().join("trivial.p");
    fs::write(&trivial, "#start: 0\nq.\n~q.\n").unwrap();
    let out = pllcop(&["dag", s(&trivial), "--out", s(&tmp.path().join("t"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stats: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!((stats["proofs"].as_u64(), stats["failures"].as_u64()), (Some(1), Some(0)));
}

/// Checks the subset of the DOT grammar the renderer emits: a digraph header,
/// node statements with attribute lists, edge statements between declared
/// nodes, balanced quotes and a closing brace.
fn check_dot(dot: &str, nodes: usize) {
    let lines: Vec<&str> = dot.lines().collect();
    assert!(lines[0].starts_with("digraph ") && lines[0].ends_with('{'));
    assert_eq!(*lines.last().unwrap(), "}");
    let mut declared = std::collections::HashSet::new();
    for line in &lines[1..lines.len() - 1] {
        let line = line.trim();
        assert!(line.ends_with(';'), "statement without terminator: {line}");
        assert_eq!((line.matches('"').count() - line.matches("\\\"").count()) % 2, 0, "unbalanced quotes: {line}");
        let head = line.split('[').next().unwrap().trim();
        if let Some((a, b)) = head.split_once("->") {
            assert!(declared.contains(a.trim()) && declared.contains(b.trim()), "edge between undeclared nodes: {line}");
        } else if head != "node" {
            assert!(head.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'), "bad node id: {head}");
            declared.insert(head.to_string());
        }
        if line.contains('[') {
            assert!(line.ends_with("];"), "unterminated attribute list: {line}");
        }
    }
    assert_eq!(declared.len(), nodes);
}

#[test]
fn loop_smoke_resume_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let base = ["loop", "--out", s(&run), "--count", "50", "--budget", "100", "--dim", "4096", "--epochs", "1"];
    let out = pllcop(&[&base[..], &["--iterations", "2"]].concat());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(run.join("iter_1/report.json").is_file());
    assert!(!run.join("iter_2").exists());

    let out = pllcop(&["loop", "--out", s(&run), "--resume", "--iterations", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for k in 0..3 {
        assert!(run.join(format!("iter_{k}/report.json")).is_file());
        assert!(run.join(format!("iter_{k}/model.bin")).is_file());
        assert!(run.join(format!("iter_{k}/samples.jsonl")).is_file());
    }
    let csv = fs::read_to_string(run.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let fresh = tmp.path().join("fresh");
    let out = pllcop(&["loop", "--out", s(&fresh), "--count", "50", "--budget", "100", "--dim", "4096", "--epochs", "1", "--iterations", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for k in 0..3 {
        let rel = format!("iter_{k}/model.bin");
        assert_eq!(fs::read(run.join(&rel)).unwrap(), fs::read(fresh.join(&rel)).unwrap(), "{rel} differs after resume");
    }

    let table = pllcop(&["report", s(&run)]);
    assert_eq!(code(&table), 0);
    let text = stdout(&table);
    let solved: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    let solved_row = text.lines().find(|l| l.starts_with("nll")).unwrap();
    assert_eq!(solved_row.split_whitespace().skip(1).collect::<Vec<_>>(), solved, "{text}");
}

#[test]
fn loop_rejects_invalid_loss_before_work() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let out = pllcop(&["loop", "--out", s(&run), "--loss", "hinge"]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    for choice in ["nll", "uniform", "merit", "libra", "bs"] {
        assert!(err.contains(choice), "error does not name {choice}: {err}");
    }
    assert!(!run.exists());
    let out = pllcop(&["loop", "--out", s(&run), "--iterations", "0"]);
    assert_eq!(code(&out), 2);
    assert!(!run.exists());
}

#[test]
fn report_has_one_row_per_loss() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("multi");
    let out = pllcop(&["loop", "--out", s(&run), "--count", "10", "--budget", "50", "--dim", "4096", "--epochs", "1", "--iterations", "2", "--loss", "nll,libra,bs"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&pllcop(&["report", s(&run)]));
    let first_table: Vec<&str> = text.split("\n\n").next().unwrap().lines().collect();
    assert_eq!(first_table.len(), 2 + 3, "{text}");
    for loss in ["nll", "libra", "bs"] {
        assert_eq!(first_table.iter().filter(|l| l.split_whitespace().next() == Some(loss)).count(), 1);
    }
}

#[test]
fn report_errors_on_missing_or_empty_run_dir() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&pllcop(&["report", s(&tmp.path().join("nope"))])), 2);
    assert_eq!(code(&pllcop(&["report", s(tmp.path())])), 2);
}

#[test]
fn help_documents_defaults() {
    for sub in ["gen-ra", "prove", "loop", "dag", "report", "sweep"] {
        let out = pllcop(&[sub, "--help"]);
        assert_eq!(code(&out), 0);
        if sub != "report" {
            assert!(stdout(&out).contains("[default:"), "{sub} --help shows no defaults");
        }
    }
    let help = stdout(&pllcop(&["loop", "--help"]));
    for flag in ["--cp", "--budget", "--epochs", "--loss", "--beta", "--workers", "--resume"] {
        assert!(help.contains(flag), "loop --help lacks {flag}");
    }
}
