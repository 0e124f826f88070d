//! Acceptance gate: runs every experiment from `configs/`, prints one line per
//! criterion and exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use noetherdyn::verdict::parse_verdict_file;
use noetherdyn::{run, ExperimentConfig, ExperimentKind, RunReport, Verdict};

/// Wall-time budgets in seconds for the criteria that state one.
const BUDGETS: [(&str, f64); 4] = [("C1", 1.0), ("C2", 30.0), ("C4", 5.0), ("C6", 30.0)];

fn config_path(kind: ExperimentKind) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{}.toml", kind.name()))
}

/// Sequential, so each wall time measures one experiment alone.
fn run_all(out: &Path) -> Vec<(ExperimentKind, RunReport)> {
    ExperimentKind::ALL
        .into_iter()
        .map(|kind| {
            let config = ExperimentConfig::from_file(kind, &config_path(kind), out).expect("config");
            let report = run(&config).unwrap_or_else(|e| panic!("{kind}: {e}"));
            (kind, report)
        })
        .collect()
}

fn csv_files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    for kind in ExperimentKind::ALL {
        let sub = dir.join(kind.name());
        for entry in fs::read_dir(&sub).expect("run directory") {
            let path = entry.expect("entry").path();
            if path.extension().is_some_and(|e| e == "csv") {
                let rel = path.strip_prefix(dir).unwrap().to_path_buf();
                files.insert(rel, fs::read(&path).expect("csv"));
            }
        }
    }
    files
}

fn main() -> ExitCode {
    let first = tempfile::tempdir().expect("tempdir");
    let second = tempfile::tempdir().expect("tempdir");
    let reports = run_all(first.path());

    let mut by_criterion: BTreeMap<String, Vec<Verdict>> = BTreeMap::new();
    let mut wall: BTreeMap<String, f64> = BTreeMap::new();
    for (kind, report) in &reports {
        let on_disk = fs::read_to_string(first.path().join(kind.name()).join("verdict.tsv")).expect("verdict file");
        assert_eq!(parse_verdict_file(&on_disk).expect("verdict file parses"), report.artifacts.verdicts);
        assert_eq!(report.exit_code(), if report.artifacts.all_pass() { 0 } else { 1 });
        for v in &report.artifacts.verdicts {
            by_criterion.entry(v.criterion().to_string()).or_default().push(v.clone());
            *wall.entry(v.criterion().to_string()).or_default() = report.wall_seconds;
        }
    }

    let mut lines = Vec::new();
    for n in 1..=9 {
        let id = format!("C{n}");
        let verdicts = by_criterion.get(&id).cloned().unwrap_or_default();
        let seconds = wall.get(&id).copied().unwrap_or(f64::NAN);
        let budget = BUDGETS.iter().find(|(c, _)| *c == id).map(|(_, b)| *b);
        let in_budget = budget.is_none_or(|b| seconds < b);
        let failed: Vec<String> = verdicts
            .iter()
            .filter(|v| !v.pass)
            .map(|v| format!("{} = {:e} ({})", v.id, v.measured, v.tolerance))
            .collect();
        let pass = !verdicts.is_empty() && failed.is_empty() && in_budget;
        let mut detail = format!("{} assertions, {seconds:.2} s", verdicts.len());
        if let Some(b) = budget {
            detail.push_str(&format!(" (budget {b} s)"));
        }
        if verdicts.is_empty() {
            detail.push_str("; no assertions recorded");
        }
        if !failed.is_empty() {
            detail.push_str(&format!("; failing: {}", failed.join(", ")));
        }
        lines.push((id, pass, detail));
    }

    run_all(second.path());
    let a = csv_files(first.path());
    let b = csv_files(second.path());
    let differing: Vec<String> = a
        .iter()
        .filter(|(name, bytes)| b.get(*name) != Some(bytes))
        .map(|(name, _)| name.display().to_string())
        .collect();
    let same_set = a.keys().eq(b.keys());
    let detail = if differing.is_empty() && same_set {
        format!("{} CSV files byte-identical across reruns", a.len())
    } else {
        format!("differing CSV files: {}", differing.join(", "))
    };
    lines.push(("C10".into(), differing.is_empty() && same_set && !a.is_empty(), detail));

    println!();
    for (id, pass, detail) in &lines {
        println!("{id:<4} {}  {detail}", if *pass { "PASS" } else { "FAIL" });
    }
    let failed = lines.iter().filter(|l| !l.1).count();
    println!("\nacceptance: {} of {} criteria pass", lines.len() - failed, lines.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
