mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Output, RunError};
use config::{ConfigError, Flags, RunConfig};

/// Symmetric periodic orbits of the planar circular restricted three-body problem.
///
/// Exit status: 0 on success, 1 on numerical failure, 2 on invalid configuration.
/// Set TBP_LOG (error, warn, info, debug) for diagnostics on stderr.
#[derive(Parser)]
#[command(name = "pcrtbp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// The five Lagrange points and their energies
    Lagrange,
    /// Hill's region on a grid (CSV: q1,q2,U,inside,component)
    HillRegion,
    /// The fixed circles L+ and L- on the regularized surface
    Circles,
    /// Scan both fixed circles for symmetric periodic orbits
    FindSymmetric,
    /// Type I/II classification of the scanned orbits
    Classify,
    /// Robbin-Salamon indices and crossings of the scanned orbits
    Index,
    /// Mean indices over iterates
    MeanIndex,
    /// Strict convexity check of the Levi-Civita cover
    Convexity,
    /// Closed Reeb orbits on an ellipsoid
    Ellipsoid,
    /// Rank tables of path spaces and their Floer-type combination
    Homology {
        /// Path-space ranks instead of the combined table
        #[arg(long)]
        table: bool,
    },
    /// Run every end-to-end check
    Verify,
}

fn is_invalid_input(e: &pcrtbp::Error) -> bool {
    use pcrtbp::Error::*;
    matches!(e, InvalidParameter(_) | Unsupported(_) | UnsupportedInvolution(_))
}

fn emit(cfg: &RunConfig, out: Output) -> std::io::Result<()> {
    let text = match out {
        Output::Json(v) => {
            let wrapped = serde_json::json!({ "config": cfg, "result": v });
            serde_json::to_string_pretty(&wrapped).expect("serializable") + "\n"
        }
        Output::Csv(s) => s,
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn run(cli: Cli) -> Result<(), (u8, String)> {
    let cfg = config::resolve(&cli.flags).map_err(|ConfigError(m)| (2, m))?;
    log::info!("config: {}", serde_json::to_string(&cfg).expect("serializable"));
    let fail = |e: RunError| match e {
        RunError::Core(ref c) if is_invalid_input(c) => (2, e.to_string()),
        e => (1, e.to_string()),
    };
    let (out, failed) = match cli.command {
        Command::Lagrange => (commands::lagrange(&cfg), None),
        Command::HillRegion => (commands::hill_region(&cfg), None),
        Command::Circles => (commands::circles(&cfg), None),
        Command::FindSymmetric => (commands::find_symmetric(&cfg), None),
        Command::Classify => (commands::classify(&cfg), None),
        Command::Index => (commands::index(&cfg), None),
        Command::MeanIndex => (commands::mean_index(&cfg), None),
        Command::Convexity => (commands::convexity(&cfg), None),
        Command::Ellipsoid => (commands::ellipsoid(&cfg), None),
        Command::Homology { table } => (commands::homology(&cfg, table), None),
        Command::Verify => match commands::run_verify(&cfg) {
            Ok((o, f)) => (Ok(o), f),
            Err(e) => (Err(e), None),
        },
    };
    emit(&cfg, out.map_err(fail)?).map_err(|e| (1, format!("cannot write output: {e}")))?;
    match failed {
        Some(m) => Err((1, m)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TBP_LOG", "warn")).format_timestamp(None).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
