//! `mmcf`: run flows, build CMC initial surfaces, verify and sweep.
//!
//! Exit codes: 0 converged (or all checks passed), 2 timed out, 1 error or failed checks.

// `!(x > 0.0)` style tests are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod artifacts;
mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use mmcf::Execution;
use serde_json::{json, Value};

use artifacts::{OutputDir, RunStatus};
use commands::Outcome;
use config::{RawConfig, Settings};

/// Environment variable consulted when `--out` is absent.
const OUT_ENV: &str = "MMCF_OUT";

#[derive(Parser)]
#[command(
    name = "mmcf",
    version,
    about = "Modified mean curvature flow of radial graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the flow to stationarity and write the time series, snapshots and manifest.
    Flow(Common),
    /// Build a CMC initial surface by continuation from the horosphere.
    Cmc(Common),
    /// Run a verification suite (oracles, flow or all).
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Sweep over lift heights or grid resolutions.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly decreasing lift heights.
        #[arg(long)]
        eps_list: Option<String>,
        /// Comma-separated node counts.
        #[arg(long)]
        nodes_list: Option<String>,
    },
}

#[derive(Args)]
struct RunFlags {
    /// Output directory (falls back to $MMCF_OUT, then ./mmcf-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Upper bound on concurrently running jobs.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    run: RunFlags,
    /// Override any config key: `key=value` or `section.key=value` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, alias = "N")]
    nodes: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

impl Common {
    fn settings(&self, extra: &[(&str, Option<String>)]) -> Result<Settings> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::default(),
        };
        for s in &self.set {
            raw.set(s)?;
        }
        let named = [
            ("sigma", self.sigma.map(|x| x.to_string())),
            ("sigma0", self.sigma0.map(|x| x.to_string())),
            ("eps", self.eps.map(|x| x.to_string())),
            ("r", self.r.map(|x| x.to_string())),
            ("n", self.n.map(|x| x.to_string())),
            ("nodes", self.nodes.map(|x| x.to_string())),
            ("t_max", self.t_max.map(|x| x.to_string())),
            ("dt", self.dt.map(|x| x.to_string())),
        ];
        for (key, value) in named.iter().chain(extra) {
            if let Some(v) = value {
                raw.set(&format!("{key}={v}"))?;
            }
        }
        Settings::from_raw(&raw)
    }
}

fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("mmcf-out"))
}

fn execution(jobs: Option<usize>) -> Execution {
    match jobs {
        Some(1) => Execution::Sequential,
        _ => Execution::default(),
    }
}

/// Runs `body` on a pool of at most `jobs` threads.
fn with_jobs<T: Send>(jobs: Option<usize>, body: impl FnOnce() -> T + Send) -> Result<T> {
    #[cfg(feature = "parallel")]
    if let Some(k) = jobs {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()?;
        return Ok(pool.install(body));
    }
    let _ = jobs;
    Ok(body())
}

fn run(
    command: &str,
    out: &Path,
    config: Value,
    body: impl FnOnce(&mut OutputDir) -> Result<Outcome>,
) -> Result<RunStatus> {
    let mut dir = OutputDir::create(out)?;
    let (status, error, extra) = match body(&mut dir) {
        Ok(o) => (o.status, None, o.extra),
        Err(e) => (RunStatus::Error, Some(format!("{e:#}")), Value::Null),
    };
    let root = dir.root().to_path_buf();
    let manifest = dir.finish(command, config, status, error.clone(), extra)?;
    if let Some(e) = error {
        eprintln!("error: {e}");
    }
    println!(
        "{command}: {:?} -> {} ({} files, content {})",
        manifest.status,
        root.display(),
        manifest.files.len(),
        &manifest.content_sha256[..16]
    );
    Ok(status)
}

fn dispatch(cli: Cli) -> Result<RunStatus> {
    match cli.command {
        Command::Flow(common) => {
            let settings = common.settings(&[])?;
            let config = serde_json::to_value(&settings)?;
            let jobs = common.run.jobs;
            run("flow", &out_dir(&common.run.out), config, |out| {
                with_jobs(jobs, || commands::flow(&settings, out))?
            })
        }
        Command::Cmc(common) => {
            let settings = common.settings(&[])?;
            let config = serde_json::to_value(&settings)?;
            let jobs = common.run.jobs;
            run("cmc", &out_dir(&common.run.out), config, |out| {
                with_jobs(jobs, || commands::cmc(&settings, out))?
            })
        }
        Command::Verify { suite, run: flags } => {
            if !mmcf::verify::SUITES.contains(&suite.as_str()) {
                anyhow::bail!(
                    "unknown suite `{suite}` (expected one of {})",
                    mmcf::verify::SUITES.join(", ")
                );
            }
            let config = json!({ "suite": suite, "jobs": flags.jobs });
            let exec = execution(flags.jobs);
            run("verify", &out_dir(&flags.out), config, |out| {
                with_jobs(flags.jobs, || commands::verify(&suite, exec, out))?
            })
        }
        Command::Sweep {
            common,
            eps_list,
            nodes_list,
        } => {
            let settings =
                common.settings(&[("eps_list", eps_list), ("nodes_list", nodes_list)])?;
            let config = serde_json::to_value(&settings)?;
            let jobs = common.run.jobs;
            let exec = execution(jobs);
            run("sweep", &out_dir(&common.run.out), config, |out| {
                with_jobs(jobs, || commands::sweep(&settings, exec, out))?
            })
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
