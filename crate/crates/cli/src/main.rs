//! `brwlab`: calibrate models, run experiments, summarize runs.

mod config;
mod error;
mod experiments;
mod summary;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use brwlab::par::{default_workers, McConfig};
use brwlab::report::Verdict;
use brwlab::rng::{purpose, salt_from_label};
use clap::{Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use config::{read_json, resolve_model, results_dir, spec_for_calibration, CalibrateConfig, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "brwlab", version, about = "Branching random walk Monte Carlo laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate a model and write fixtures/models/<name>.json.
    Calibrate {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Run one experiment into <results>/<run_id>/.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the derived run id.
        #[arg(long)]
        run_id: Option<String>,
    },
    /// Merge finished runs into one summary table with trend verdicts.
    Report {
        #[arg(required = true)]
        runs: Vec<String>,
        /// CSV destination; defaults to <results>/reports/summary-<digest>.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Calibrate { config } => calibrate_cmd(&config),
        Command::Run { config, workers, seed, run_id } => run_cmd(&config, workers, seed, run_id),
        Command::Report { runs, out } => summary::report_cmd(&runs, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((e, extra)) => {
            let mut body = json!({ "error": e.message(), "kind": e.kind(), "exit_code": e.exit_code() });
            if let Some(extra) = extra {
                body.as_object_mut().unwrap().extend(extra.as_object().cloned().unwrap_or_default());
            }
            eprintln!("{body}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Error plus optional fields for the machine-readable error line.
type CmdResult = Result<(), (CliError, Option<serde_json::Value>)>;

fn plain<T>(r: Result<T, CliError>) -> Result<T, (CliError, Option<serde_json::Value>)> {
    r.map_err(|e| (e, None))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn calibrate_cmd(path: &Path) -> CmdResult {
    let cfg: CalibrateConfig = plain(read_json(path))?;
    let model = if cfg.model == config::ModelRef::Named("discrete-toy".into()) {
        let mut toy = brwlab::discrete_toy_model();
        if let Some(name) = cfg.name {
            toy.name = name;
        }
        toy
    } else {
        let mut spec = plain(spec_for_calibration(&cfg.model))?;
        if let Some(name) = cfg.name {
            spec.name = name;
        }
        plain(brwlab::calibrate(&spec).map_err(CliError::from))?
    };
    let dir = config::fixtures_dir();
    plain(std::fs::create_dir_all(&dir).map_err(CliError::from))?;
    let file = dir.join(format!("{}.json", model.name));
    let mut text = model.to_json();
    text.push('\n');
    plain(std::fs::write(&file, &text).map_err(CliError::from))?;
    let summary = json!({
        "name": model.name,
        "path": file.display().to_string(),
        "m": model.m,
        "mean_offspring": model.mean_offspring,
        "right_mu": model.spec().map(|s| s.right_mu),
        "p_left": model.p_left,
        "a1": model.a1,
        "a2": model.a2,
        "n_min": model.n_min,
        "tail_compliant": model.tail_compliant,
        "spec_hash": model.spec_hash,
    });
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(())
}

fn run_cmd(path: &Path, workers: Option<usize>, seed: Option<u64>, run_id: Option<String>) -> CmdResult {
    let started = Instant::now();
    let cfg: RunConfig = plain(read_json(path))?;
    plain(cfg.validate())?;
    let (model, source) = plain(resolve_model(&cfg.model))?;
    let seed = seed.or(cfg.seed).unwrap_or(1);
    let workers = workers.unwrap_or_else(default_workers).max(1);
    let resolved = serde_json::to_value(&cfg).unwrap();
    let config_hash = sha256_hex(serde_json::to_string(&resolved).unwrap().as_bytes());
    let run_id = run_id.unwrap_or_else(|| format!("{}-s{seed}-{}", cfg.name, &config_hash[..8]));
    let salt = salt_from_label(&cfg.name);
    let mc = McConfig::new(cfg.reps, seed).workers(workers).salt(salt).pop_cap(cfg.pop_cap);

    let outputs = match experiments::execute(&cfg, &model, &mc) {
        Ok(o) => o,
        Err(e @ CliError::Invariant(_)) => {
            let repro = json!({ "seed": seed, "config": path.display().to_string(), "run_id": run_id });
            return Err((e, Some(repro)));
        }
        Err(e) => return Err((e, None)),
    };

    let dir = results_dir().join(&run_id);
    let tables = dir.join("tables");
    plain(std::fs::create_dir_all(&tables).map_err(CliError::from))?;
    let mut files = Vec::new();
    for (name, text) in &outputs.tables {
        plain(std::fs::write(tables.join(name), text).map_err(CliError::from))?;
        files.push(json!({ "path": format!("tables/{name}"), "sha256": sha256_hex(text.as_bytes()), "bytes": text.len() }));
    }
    let report = json!({
        "run_id": run_id,
        "kind": cfg.experiment.kind(),
        "model": model.name,
        "passed": outputs.report.passed(),
        "rows": outputs.report.rows,
        "notes": outputs.report.notes,
        "source_table": "tables/report.csv",
    });
    let report_text = serde_json::to_string_pretty(&report).unwrap() + "\n";
    plain(std::fs::write(dir.join("report.json"), &report_text).map_err(CliError::from))?;
    files.push(json!({ "path": "report.json", "sha256": sha256_hex(report_text.as_bytes()), "bytes": report_text.len() }));

    let elapsed = started.elapsed().as_secs_f64();
    let over_budget = cfg.wall_budget_secs.is_some_and(|b| elapsed > b);
    let manifest = json!({
        "run_id": run_id,
        "created_utc": now_utc(),
        "artifact_version": env!("CARGO_PKG_VERSION"),
        "config": resolved,
        "config_hash": config_hash,
        "root_seed": seed,
        "workers": workers,
        "streams": {
            "salt": format!("{salt:016x}"),
            "salt_label": cfg.name,
            "rule": "stream_id = hash64(salt, replicate, purpose)",
            "purposes": {
                "tree": purpose::TREE,
                "spine_tree": purpose::SPINE_TREE,
                "walk": purpose::WALK,
                "sampler": purpose::SAMPLER,
                "limit_process": purpose::LIMIT_PROCESS,
                "w_pool": purpose::W_POOL,
                "walk_is": purpose::WALK_IS,
            },
        },
        "model": { "name": model.name, "spec_hash": model.spec_hash, "source": source },
        "replicates": { "requested": outputs.requested, "ok": outputs.requested - outputs.lost, "capacity_error": outputs.lost },
        "status": if over_budget { "over-budget" } else { "complete" },
        "elapsed_secs": elapsed,
        "verdict": if outputs.report.passed() { "pass" } else { "fail" },
        "failed_rows": outputs.report.rows.iter().filter(|r| r.verdict == Verdict::Fail).map(|r| format!("{}@{}", r.quantity, r.n)).collect::<Vec<_>>(),
        "outputs": files,
    });
    let text = serde_json::to_string_pretty(&manifest).unwrap() + "\n";
    plain(std::fs::write(dir.join("manifest.json"), text).map_err(CliError::from))?;
    println!("{}", dir.display());
    if outputs.lost * 10 > outputs.requested {
        let msg = format!("{} of {} replicates lost to the population cap", outputs.lost, outputs.requested);
        return Err((CliError::Capacity(msg), Some(json!({ "run_dir": dir.display().to_string() }))));
    }
    Ok(())
}

fn now_utc() -> String {
    time::OffsetDateTime::now_utc().format(&time::format_description::well_known::Rfc3339).unwrap_or_default()
}
