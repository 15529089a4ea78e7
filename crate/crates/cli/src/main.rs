//! `svi`: run simulation, convergence, temperature and invariant studies from
//! TOML experiment configs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod output;
mod studies;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};

use svi_core::systems::{catalog, ModelKind};

use crate::config::{Overrides, Study};
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "svi", version = svi_core::VERSION, about = "Stochastic variational integrator studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one path and write the trajectory.
    Simulate(RunArgs),
    /// Estimate the mean-square strong order on coupled paths.
    Convergence(RunArgs),
    /// Ensemble kinetic temperature against the bath value.
    Temperature(RunArgs),
    /// Symplecticity, momentum, Legendre, constraint and orthogonality checks.
    Invariants(RunArgs),
    /// Describe the model catalog.
    ListModels {
        /// Print the catalog as TOML.
        #[arg(long)]
        machine: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML); a previous run's summary.txt also works.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for ensembles (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override a config key, e.g. `--set model.params.sigma=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn log(msg: &str) {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    eprintln!("[svi {secs}] {msg}");
}

/// Resolve, compute, then write. The output directory is known once the
/// config resolves; failures before that point have nowhere to leave a marker.
fn run_study(study: Study, args: RunArgs) -> ExitCode {
    let overrides = Overrides {
        seed: args.seed,
        out: args.out.clone(),
        threads: args.threads,
        set: args.set,
    };
    let resolved = config::read_flat(args.config.as_deref())
        .and_then(|mut flat| config::apply_overrides(&mut flat, &overrides).map(|_| flat))
        .and_then(|flat| config::resolve(study, flat));
    let cfg = match resolved {
        Ok(cfg) => cfg,
        Err(e) => {
            if let Some(dir) = &args.out {
                output::mark_failed(dir, &e);
            }
            return fail(&e);
        }
    };
    log(&format!(
        "{} on `{}` with {:?}, seed {}, config {}",
        study.name(),
        cfg.model,
        cfg.integrators.iter().map(|m| m.name()).collect::<Vec<_>>(),
        cfg.seed,
        &cfg.hash()[..12]
    ));
    let threads = (cfg.threads > 0).then_some(cfg.threads);
    let result = svi_core::ensemble::with_threads(threads, || studies::run(&cfg))
        .map_err(CliError::from)
        .and_then(|r| r)
        .and_then(|art| output::write_all(&cfg, &art));
    match result {
        Ok(()) => {
            log(&format!("wrote {}", cfg.outputs.display()));
            ExitCode::SUCCESS
        }
        Err(e) => {
            output::mark_failed(&cfg.outputs, &e);
            fail(&e)
        }
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("svi: error: {e}");
    ExitCode::from(e.exit_code())
}

fn catalog_table() -> Table {
    let mut models = Table::new();
    for m in catalog() {
        let mut params = Table::new();
        for p in m.params {
            let mut t = Table::new();
            t.insert("default".into(), Value::Float(p.default));
            t.insert("doc".into(), Value::String(p.doc.into()));
            params.insert(p.name.into(), Value::Table(t));
        }
        let mut t = Table::new();
        let kind = match m.kind {
            ModelKind::Vector => "vector",
            ModelKind::Rigid => "rigid",
        };
        t.insert("kind".into(), Value::String(kind.into()));
        t.insert("summary".into(), Value::String(m.summary.into()));
        t.insert("anchor".into(), Value::String(m.anchor.into()));
        t.insert("constrained".into(), Value::Boolean(m.constrained));
        t.insert(
            "symmetries".into(),
            Value::Array(m.symmetries.iter().cloned().map(Value::String).collect()),
        );
        t.insert("params".into(), Value::Table(params));
        models.insert(m.name.into(), Value::Table(t));
    }
    let mut root = Table::new();
    root.insert("models".into(), Value::Table(models));
    root
}

fn list_models(machine: bool) -> CliResult<()> {
    if machine {
        print!("{}", catalog_table());
        return Ok(());
    }
    for m in catalog() {
        println!("{} ({:?})", m.name, m.kind);
        println!("  {}", m.summary);
        println!("  anchor: {}", m.anchor);
        let syms = if m.symmetries.is_empty() {
            "none".to_string()
        } else {
            m.symmetries.join(", ")
        };
        println!("  symmetries: {syms}");
        println!("  constrained: {}", m.constrained);
        println!("  params:");
        for p in m.params {
            println!("    {:<20} {:<8} {}", p.name, p.default, p.doc);
        }
        println!();
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let study = match cli.command {
        Command::Simulate(a) => (Study::Simulate, a),
        Command::Convergence(a) => (Study::Convergence, a),
        Command::Temperature(a) => (Study::Temperature, a),
        Command::Invariants(a) => (Study::Invariants, a),
        Command::ListModels { machine } => {
            return match list_models(machine) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(&e),
            };
        }
    };
    run_study(study.0, study.1)
}
