//! `smooth-arap` command-line tool.

mod serve;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use smooth_arap::harness::{run_bench, run_job, run_trace, BenchConfig, HarnessError, JobConfig, Preset};
use smooth_arap::session::SessionConfig;
use smooth_arap::{DeformError, DeformParams, MeshError};

#[derive(Parser)]
#[command(
    name = "smooth-arap",
    version,
    about = "Smooth as-rigid-as-possible surface deformation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one deformation job described by a JSON config.
    Deform {
        /// Job file, see docs/job.schema.json.
        #[arg(long)]
        config: PathBuf,
    },
    /// Time factorization, solves and handle insertion; writes JSON and CSV.
    Bench {
        /// Bench file, see docs/bench.schema.json.
        #[arg(long)]
        config: PathBuf,
        /// Report path; `.json` and `.csv` are written next to each other.
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-iteration energy traces for both rotation fits.
    Trace {
        #[arg(long, default_value = "spiky-plane")]
        preset: Preset,
        /// Directory for the CSV traces and the summary.
        #[arg(long)]
        out: PathBuf,
        /// Defaults to 0.95.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Interactive session over WebSocket, or newline-delimited JSON on stdio.
    Serve {
        #[arg(long, conflicts_with = "stdio", required_unless_present = "stdio")]
        port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// One JSON message per line on stdin and stdout.
        #[arg(long)]
        stdio: bool,
        /// Initial lambda for new sessions; clients may change it.
        #[arg(long)]
        lambda: Option<f64>,
        /// Iterations run per MoveHandle (default 4).
        #[arg(long)]
        max_iter_per_frame: Option<usize>,
    },
}

/// Failure with the exit code it maps to.
struct Failure {
    exit: u8,
    code: &'static str,
    message: String,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let (exit, code) = match &e {
            HarnessError::Json(_) => (2, "parse_error"),
            HarnessError::Config(_) => (2, "invalid_config"),
            HarnessError::Mesh(MeshError::Parse { .. }) => (2, "parse_error"),
            HarnessError::Mesh(MeshError::Io(_)) => (1, "io_error"),
            HarnessError::Mesh(_) | HarnessError::Deform(DeformError::Mesh(_)) => (1, "invalid_mesh"),
            HarnessError::Deform(DeformError::InvalidParams(_)) => (2, "invalid_params"),
            HarnessError::Deform(_) => (1, "solver_error"),
            HarnessError::Io { .. } | HarnessError::Csv(_) => (1, "io_error"),
        };
        Self {
            exit,
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            exit: 1,
            code: "io_error",
            message: e.to_string(),
        }
    }
}

fn invalid_params(message: String) -> Failure {
    Failure {
        exit: 2,
        code: "invalid_params",
        message,
    }
}

fn print_json(value: serde_json::Value) {
    println!("{value:#}");
}

fn report_paths(out: &Path) -> (PathBuf, PathBuf) {
    let base = match out.extension().and_then(|e| e.to_str()) {
        Some("json" | "csv") => out.with_extension(""),
        _ => out.to_path_buf(),
    };
    (base.with_extension("json"), base.with_extension("csv"))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Deform { config } => {
            let config = JobConfig::from_path(&config)?;
            let report = run_job(&config)?;
            print_json(json!({
                "iterations": report.iterations,
                "converged": report.converged,
                "energies": report.energies,
                "mesh": config.output.mesh,
            }));
        }
        Command::Bench { config, out } => {
            let config = BenchConfig::from_path(&config)?;
            let report = run_bench(&config)?;
            let (json_path, csv_path) = report_paths(&out);
            report.write_json(&json_path)?;
            report.write_csv(&csv_path)?;
            print_json(json!({"json": json_path, "csv": csv_path, "rows": report.rows.len()}));
        }
        Command::Trace {
            preset,
            out,
            lambda,
            max_iterations,
        } => {
            let mut params = DeformParams::default();
            if let Some(l) = lambda {
                params.lambda = l;
            }
            if let Some(m) = max_iterations {
                params.max_iterations = m;
            }
            params.validate().map_err(|e| invalid_params(e.to_string()))?;
            let output = run_trace(preset, &params, &out)?;
            print_json(json!(output));
        }
        Command::Serve {
            port,
            host,
            stdio,
            lambda,
            max_iter_per_frame,
        } => {
            let mut config = SessionConfig::default();
            if let Some(l) = lambda {
                config.params.lambda = l;
            }
            config.params.validate().map_err(|e| invalid_params(e.to_string()))?;
            if let Some(m) = max_iter_per_frame {
                if m == 0 {
                    return Err(invalid_params("max_iter_per_frame must be positive".into()));
                }
                config.max_iter_per_frame = m;
            }
            if stdio {
                serve::stdio(config)?;
            } else {
                let port = port.expect("clap requires --port without --stdio");
                serve::websocket(&host, port, config)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let error = json!({"error": {"code": f.code, "message": f.message}});
            eprintln!("{error}");
            ExitCode::from(f.exit)
        }
    }
}
