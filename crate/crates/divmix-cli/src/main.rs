use clap::{Parser, Subcommand};
use divmix_core::harness::{self, ExperimentConfig};
use divmix_core::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "divmix", version, about = "Robust divergence-based estimation for two-component mixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte-Carlo experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Result CSV path; overrides the config. Defaults to stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write per-replication JSON reports to this directory.
        #[arg(long)]
        keep_reports: Option<PathBuf>,
    },
    /// Rerun one of the built-in tables next to its published numbers.
    Reproduce {
        table_id: String,
        /// Fraction of the published replication count (at least 25 are run).
        #[arg(long, default_value_t = 0.25)]
        scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV path; defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit one estimator to a data file and print its JSON report.
    Estimate {
        data: PathBuf,
        estimator_config: PathBuf,
        /// Report path; defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Objective trace CSV for proximal runs.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// List the built-in table ids.
    ListTables,
}

fn emit(path: Option<&Path>, text: &str) -> divmix_core::Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cmd: Command) -> divmix_core::Result<()> {
    match cmd {
        Command::Run { config, csv, keep_reports } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = ExperimentConfig::from_json(&text)?;
            let out = harness::run_experiment(&cfg)?;
            let csv_path = csv.or_else(|| cfg.outputs.csv.clone());
            emit(csv_path.as_deref(), &harness::tables_csv(&[out.table.clone()], &[]))?;
            if let Some(dir) = keep_reports.or_else(|| cfg.outputs.reports.clone()) {
                out.write_reports(&dir)?;
            }
        }
        Command::Reproduce { table_id, scale, seed, out } => {
            let r = harness::reproduce_table(&table_id, scale, seed)?;
            emit(out.as_deref(), &r.csv())?;
        }
        Command::Estimate { data, estimator_config, out, trace } => {
            let entry = harness::read_estimator(&estimator_config)?;
            let outcome = harness::estimate_file(&data, &entry)?;
            let json = serde_json::to_string_pretty(&outcome.report).map_err(|e| Error::Io(e.to_string()))?;
            emit(out.as_deref(), &format!("{json}\n"))?;
            if let Some(path) = trace {
                let csv = outcome
                    .trace_csv()
                    .ok_or_else(|| Error::Config("--trace needs a proximal estimator".into()))?;
                emit(Some(&path), &csv)?;
            }
        }
        Command::ListTables => {
            for (id, title) in harness::list_tables() {
                println!("{id}\t{title}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("divmix: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
