mod acquire;
mod analyze;
mod impedance;
mod sources;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Hardware-free EEG acquisition rig: record, serve, check impedance and
/// analyze sessions.
#[derive(Debug, Parser)]
#[command(name = "neurig", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the acquisition loop, recording a session and optionally serving it.
    Acquire(acquire::AcquireArgs),
    /// Measure electrode impedance through lead-off current injection.
    Impedance(impedance::ImpedanceArgs),
    /// Produce filtered traces, band power, scalograms and detections from a session.
    Analyze(analyze::AnalyzeArgs),
    /// Export a session to CSV.
    Export(ExportArgs),
    /// List the built-in emulator scenarios.
    Scenarios(ScenariosArgs),
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Session file, or a directory holding sessions (the latest is used).
    session: PathBuf,
    /// Output CSV path; defaults to the session path with a .csv extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScenariosArgs {
    #[arg(long)]
    json: bool,
}

/// Bad invocation or missing input: exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn export(args: ExportArgs) -> anyhow::Result<()> {
    let path = sources::session_path(&args.session)?;
    let rec = neurig_core::session::read_session(&path, neurig_core::session::ReadMode::Lossy)?;
    if let Some(d) = &rec.damage {
        log::warn!("{}: {d}", path.display());
    }
    let out = args.out.unwrap_or_else(|| path.with_extension("csv"));
    neurig_core::session::export_csv(&rec, &out)?;
    println!("{}", out.display());
    Ok(())
}

fn scenarios(args: ScenariosArgs) -> anyhow::Result<()> {
    let list: Vec<_> = neurig_core::emulator::BUILTIN_SCENARIOS
        .iter()
        .filter_map(|n| neurig_core::emulator::builtin_scenario(n))
        .collect();
    if args.json {
        let items: Vec<_> = list
            .iter()
            .map(
                |s| serde_json::json!({"name": s.name, "duration_s": s.duration_s, "seed": s.seed}),
            )
            .collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({ "scenarios": items }))?
        );
    } else {
        for s in &list {
            println!("{:<16} {:>6.1} s  seed {}", s.name, s.duration_s, s.seed);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Acquire(a) => acquire::run(a),
        Command::Impedance(a) => impedance::run(a),
        Command::Analyze(a) => analyze::run(a),
        Command::Export(a) => export(a),
        Command::Scenarios(a) => scenarios(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
