//! `kpp`: command-line front end for the higher-order KPP laboratory.
//!
//! A run is one command (`roots`, `tw`, `scan-max`, `sweep`, `evolve`,
//! `fit-shift`, `verify`) with parameters taken from a `--config` file,
//! inline `key=value` arguments, or both (inline wins). Every run writes
//! its outputs plus a `manifest.json` with content digests into the output
//! directory.
//!
//! Exit codes: 0 success, 2 expected-nonexistence outcome (a scan bracket,
//! a profile past the branch end, finite-time blow-up), 1 tool error.

mod config;
mod manifest;
mod plotdata;
mod tasks;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::Parser;

use config::{Command, Entry, Params};
use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(
    name = "kpp",
    about = "Numerical laboratory for front propagation in higher-order KPP equations",
    disable_help_subcommand = true
)]
struct Cli {
    /// Command: roots | tw | scan-max | sweep | evolve | fit-shift | verify.
    /// May instead come from the [run] section of the config file.
    command: Option<String>,

    /// Inline parameters, e.g. `m=2 lambda=0.5`; these override the
    /// config file.
    #[arg(value_name = "KEY=VALUE")]
    params: Vec<String>,

    /// Configuration file (flat key=value text with [section] headers).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory. Precedence: this flag, then $KPP_OUT, then the
    /// config `out` key, then ./kpp-out.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads for sweep tasks.
    #[arg(long)]
    jobs: Option<usize>,

    /// Seed for randomized perturbation checks in `verify`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("kpp: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn real_main(cli: Cli) -> Result<i32> {
    let mut entries: Vec<Entry> = Vec::new();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        entries = config::scan_entries(&text).map_err(|e| anyhow!(e))?;
    }

    // A first positional that contains '=' is a parameter, not a command.
    let mut inline = cli.params;
    let mut cmd_name = cli.command;
    if let Some(c) = &cmd_name {
        if c.contains('=') {
            inline.insert(0, c.clone());
            cmd_name = None;
        }
    }
    let command = match cmd_name {
        Some(c) => {
            Command::from_name(&c).ok_or_else(|| anyhow!("unknown command `{c}`"))?
        }
        None => {
            let from_file = entries
                .iter()
                .filter(|e| e.section == "run" && e.key == "command")
                .next_back()
                .map(|e| e.value.clone());
            match from_file {
                Some(c) => Command::from_name(&c)
                    .ok_or_else(|| anyhow!("unknown command `{c}` in config"))?,
                None => bail!(
                    "no command given; pass one positionally or set `command` in [run]"
                ),
            }
        }
    };
    for kv in &inline {
        let Some(eq) = kv.find('=') else {
            bail!("inline parameter `{kv}` is not of the form key=value");
        };
        entries.push(Entry {
            section: command.name().to_string(),
            key: kv[..eq].trim().to_string(),
            value: kv[eq + 1..].trim().to_string(),
            line: 0,
        });
    }

    let cfg = config::build_config(command, &entries, cli.out, cli.jobs, cli.seed)
        .map_err(|e| anyhow!(e))?;
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating output directory {}", cfg.out_dir.display()))?;

    let mut man = RunManifest::new(cfg.command.name(), &cfg.echo, cfg.seed);
    for w in &cfg.warnings {
        man.task("config", "ok", format!("warning: {w}"));
    }
    let verdict = match &cfg.params {
        Params::Roots(p) => tasks::run_roots(&cfg, p, &mut man),
        Params::Tw(p) => tasks::run_tw(&cfg, p, &mut man),
        Params::ScanMax(p) => tasks::run_scan_max(&cfg, p, &mut man),
        Params::Sweep(p) => tasks::run_sweep(&cfg, p, &mut man),
        Params::Evolve(p) => tasks::run_evolve(&cfg, p, &mut man),
        Params::FitShift(p) => tasks::run_fit_shift(&cfg, p, &mut man),
        Params::Verify(p) => tasks::run_verify(&cfg, p, &mut man),
    };
    let verdict = match verdict {
        Ok(v) => v,
        Err(e) => {
            // record the failure before surfacing it
            man.task("run", "error", format!("{e:#}"));
            man.finish_and_write(&cfg.out_dir).ok();
            return Err(e);
        }
    };
    let path = man.finish_and_write(&cfg.out_dir)?;
    println!("manifest: {}", path.display());
    Ok(verdict.exit_code())
}
