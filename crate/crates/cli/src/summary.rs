//! `brwlab report`: merge run reports and check gap trends across runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use brwlab::limits::TREND_SLACK;
use brwlab::report::{fmt_f64, ReportRow, Table, Verdict};
use serde::Deserialize;

use crate::config::results_dir;
use crate::error::CliError;
use crate::{plain, sha256_hex, CmdResult};

#[derive(Deserialize)]
struct RunReport {
    run_id: String,
    kind: String,
    rows: Vec<ReportRow>,
}

#[derive(Deserialize)]
struct ManifestModel {
    name: String,
    spec_hash: String,
}

#[derive(Deserialize)]
struct Manifest {
    model: ManifestModel,
}

fn run_dir(arg: &str) -> PathBuf {
    let p = PathBuf::from(arg);
    if p.join("manifest.json").exists() {
        p
    } else {
        results_dir().join(arg)
    }
}

fn load(arg: &str) -> Result<(Manifest, RunReport), CliError> {
    let dir = run_dir(arg);
    let read = |name: &str| -> Result<String, CliError> {
        std::fs::read_to_string(dir.join(name)).map_err(|e| CliError::Config(format!("run {arg}: cannot read {name}: {e}")))
    };
    let manifest: Manifest = serde_json::from_str(&read("manifest.json")?).map_err(|e| CliError::Config(format!("run {arg}: manifest: {e}")))?;
    let report: RunReport = serde_json::from_str(&read("report.json")?).map_err(|e| CliError::Config(format!("run {arg}: report: {e}")))?;
    Ok((manifest, report))
}

/// Series whose gap should not grow with `n`, keyed by name.
fn trend_key(row: &ReportRow) -> Option<(String, f64)> {
    if row.quantity == "kolmogorov_gap" {
        Some(("minimum_law".into(), row.estimate))
    } else if row.quantity.starts_with("extremal_") && !row.quantity.starts_with("extremal_trend_") {
        Some((row.quantity.clone(), row.ratio))
    } else {
        None
    }
}

pub fn report_cmd(runs: &[String], out: Option<&Path>) -> CmdResult {
    let mut loaded = Vec::new();
    for r in runs {
        loaded.push(plain(load(r))?);
    }
    let hashes: Vec<&str> = loaded.iter().map(|(m, _)| m.model.spec_hash.as_str()).collect();
    if hashes.windows(2).any(|w| w[0] != w[1]) {
        let names: Vec<&str> = loaded.iter().map(|(m, _)| m.model.name.as_str()).collect();
        return Err((CliError::Config(format!("runs use different models: {names:?}")), None));
    }

    let mut table = Table::new(&["run_id", "kind", "quantity", "n", "estimate", "se", "bound_or_limit", "ratio", "verdict"]);
    let mut series: BTreeMap<String, BTreeMap<usize, f64>> = BTreeMap::new();
    let mut failures = 0;
    for (_, rep) in &loaded {
        for row in &rep.rows {
            if row.verdict == Verdict::Fail {
                failures += 1;
            }
            table.row(vec![
                rep.run_id.clone(),
                rep.kind.clone(),
                row.quantity.clone(),
                row.n.to_string(),
                fmt_f64(row.estimate),
                fmt_f64(row.se),
                fmt_f64(row.bound_or_limit),
                fmt_f64(row.ratio),
                row.verdict.as_str().into(),
            ]);
            if let Some((key, gap)) = trend_key(row) {
                series.entry(key).or_default().entry(row.n).or_insert(gap);
            }
        }
    }
    let mut lines = Vec::new();
    for (key, by_n) in &series {
        let pts: Vec<(usize, f64)> = by_n.iter().map(|(&n, &g)| (n, g)).collect();
        for w in pts.windows(2) {
            let ((n0, g0), (n1, g1)) = (w[0], w[1]);
            let ok = g1 <= g0 + TREND_SLACK;
            if !ok {
                failures += 1;
            }
            let verdict = Verdict::from_bool(ok);
            table.row(vec![
                "all".into(),
                "trend".into(),
                format!("trend_{key}"),
                n1.to_string(),
                fmt_f64(g1),
                "0".into(),
                fmt_f64(g0 + TREND_SLACK),
                fmt_f64(g1 - g0),
                verdict.as_str().into(),
            ]);
            lines.push(format!("{key}: gap({n1}) <= gap({n0}) + {TREND_SLACK}: {} ({g1:.4} vs {g0:.4})", verdict.as_str()));
        }
    }

    let csv = table.to_csv();
    let path = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let digest = sha256_hex(runs.join("\n").as_bytes());
            results_dir().join("reports").join(format!("summary-{}.csv", &digest[..12]))
        }
    };
    if let Some(parent) = path.parent() {
        plain(std::fs::create_dir_all(parent).map_err(CliError::from))?;
    }
    plain(std::fs::write(&path, &csv).map_err(CliError::from))?;

    println!("{:<28} {:<14} {:<40} {:>5} {:>12} {:>10} {:>12} {}", "run", "kind", "quantity", "n", "estimate", "se", "bound", "verdict");
    for r in &table.rows {
        println!("{:<28} {:<14} {:<40} {:>5} {:>12.12} {:>10.10} {:>12.12} {}", r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[8]);
    }
    for l in &lines {
        println!("{l}");
    }
    println!("{} runs, {} failing rows; table written to {}", loaded.len(), failures, path.display());
    Ok(())
}
