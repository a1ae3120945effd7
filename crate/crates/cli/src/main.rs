mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qgdirac::{Error, SolveError};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "qgdirac", version, about = "Dirac operators and nonlinear bound states on periodic metric graphs")]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Versioned TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Proceed even when the model fails the hypothesis checks.
    #[arg(long, global = true)]
    force: bool,
    /// Built-in periodic graph: chain, square or ladder.
    #[arg(long, global = true, conflicts_with = "spec")]
    builtin: Option<String>,
    /// JSON periodic graph spec.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    #[arg(long, global = true)]
    m: Option<f64>,
    #[arg(long, global = true)]
    c: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    omega: Option<f64>,
    #[arg(long, global = true)]
    h_max: Option<f64>,
    #[arg(long, global = true)]
    theta_points: Option<usize>,
    #[arg(long, global = true)]
    n_bands: Option<usize>,
    #[arg(long, global = true)]
    window_cells: Option<usize>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    b: Option<f64>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Floquet–Bloch bands and gap report.
    Bands,
    /// Gap report only.
    Gap,
    /// Compare D² with the Kirchhoff and anti-Kirchhoff Laplacians on the cell.
    SquareCheck,
    /// Find a bound state on a truncated window.
    Solve,
    /// Sample the hypotheses and the linking geometry.
    Check,
    /// Concentration profiles and trichotomy for a sequence of fields.
    Diagnose {
        #[arg(required = true)]
        fields: Vec<PathBuf>,
    },
    #[command(subcommand)]
    Graph(GraphCommand),
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Check freeness, overlap and connectivity of the periodic graph.
    Validate,
    /// Print the graph as a JSON spec.
    Emit {
        /// Write to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure classes and their exit statuses.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Verification(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) | Failure::Verification(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::RankMismatch { .. } | Error::Parse(_) | Error::SpaceMismatch(_) => {
                Failure::Usage(e.to_string())
            }
            Error::Solve(s) => Failure::Numerical(solve_message(&s)),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

fn solve_message(e: &SolveError) -> String {
    let text = e.to_string();
    let class = e.class();
    if text.starts_with(class) {
        text
    } else {
        format!("{class}: {text}")
    }
}

fn build_config(o: &Overrides) -> Result<RunConfig, Failure> {
    let mut cfg = match &o.config {
        Some(path) => RunConfig::load(path).map_err(Failure::Usage)?,
        None => RunConfig::default(),
    };
    if let Some(b) = &o.builtin {
        cfg.graph.builtin = Some(b.clone());
        cfg.graph.spec = None;
    }
    if let Some(s) = &o.spec {
        cfg.graph.spec = Some(s.clone());
        cfg.graph.builtin = None;
    }
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut cfg.physics.m, o.m);
    set(&mut cfg.physics.c, o.c);
    set(&mut cfg.physics.omega, o.omega);
    set(&mut cfg.discretization.h_max, o.h_max);
    set(&mut cfg.model.b, o.b);
    if let Some(v) = o.theta_points {
        cfg.discretization.theta_points = v;
    }
    if let Some(v) = o.n_bands {
        cfg.discretization.n_bands = v;
    }
    if let Some(v) = o.window_cells {
        cfg.discretization.window_cells = v;
    }
    if let Some(v) = &o.model {
        cfg.model.name = v.clone();
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = &o.output_dir {
        cfg.output_dir = Some(v.clone());
    }
    cfg.validate().map_err(Failure::Usage)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = build_config(&cli.opts)?;
    let outcome = match &cli.command {
        Command::Bands => commands::bands(&cfg, true)?,
        Command::Gap => commands::bands(&cfg, false)?,
        Command::SquareCheck => commands::square_check(&cfg)?,
        Command::Solve => commands::solve(&cfg, cli.opts.force)?,
        Command::Check => commands::check(&cfg)?,
        Command::Diagnose { fields } => commands::diagnose(&cfg, fields)?,
        Command::Graph(GraphCommand::Validate) => commands::graph_validate(&cfg)?,
        Command::Graph(GraphCommand::Emit { out }) => {
            let text = commands::graph_emit(&cfg)?;
            return match out {
                Some(path) => output::write_atomic(path, text.as_bytes())
                    .map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
        }
    };
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    outcome
        .outputs
        .commit(&dir)
        .map_err(|e| Failure::Usage(format!("writing to {}: {e}", dir.display())))?;
    for name in outcome.outputs.names() {
        log::info!("wrote {}", dir.join(name).display());
    }
    println!("{}", outcome.summary);
    match outcome.verdict {
        Some(v) => Err(Failure::Verification(v)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.opts.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
