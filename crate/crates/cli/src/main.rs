use clap::{Args, Parser, Subcommand};
use renorm_cli::config::RunConfig;
use renorm_cli::{execute, CliError, Command, EXIT_USAGE};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "renorm", version, about = "Renormalization laboratory for d/dm d/dx on self-similar intervals")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ladder eigenvalues of H_<n> next to the string oracle.
    Spectrum(Opts),
    /// Integrated density of states, Lyapunov exponent and classification on a lambda grid.
    Ids(Opts),
    /// Escape-time data on a rectangle of the affine chart.
    Plane(Opts),
    /// Run the invariant suite.
    Verify(Opts),
    /// Norm-series verdicts for both boundary conditions over an alpha sweep.
    Dichotomy(Opts),
}

/// Every option mirrors a config-file key of the same name.
#[derive(Args, Default)]
struct Opts {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Measure parameter, decimal or p/q.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Comma-separated alphas for `dichotomy`.
    #[arg(long, allow_hyphen_values = true)]
    alphas: Option<String>,
    /// Blow-up prefix with declared tail, e.g. "121:tail=1".
    #[arg(long)]
    blowup: Option<String>,
    #[arg(long)]
    level: Option<String>,
    /// Spectral window "a,b" with a <= b <= 0.
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    escape_radius: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// String depth inside each copy of I.
    #[arg(long)]
    oracle_depth: Option<String>,
    /// neumann or dirichlet.
    #[arg(long)]
    boundary: Option<String>,
    /// Number of lambda samples for `ids`.
    #[arg(long)]
    points: Option<String>,
    /// Points per axis for `plane`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    plane_x: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    plane_y: Option<String>,
    #[arg(long)]
    norm_levels: Option<String>,
    #[arg(long)]
    base_depth: Option<String>,
    /// oracle or labels.
    #[arg(long)]
    ids_method: Option<String>,
    /// Comma-separated check ids for `verify`.
    #[arg(long)]
    checks: Option<String>,
    /// Include per-check wall time in the verify report.
    #[arg(long)]
    timing: bool,
    #[arg(long, hide = true, allow_hyphen_values = true)]
    inject_delta_error: Option<String>,
}

impl Opts {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("alpha", &self.alpha),
            ("alphas", &self.alphas),
            ("blowup", &self.blowup),
            ("level", &self.level),
            ("window", &self.window),
            ("tol", &self.tol),
            ("max_iter", &self.max_iter),
            ("escape_radius", &self.escape_radius),
            ("out", &self.out),
            ("format", &self.format),
            ("jobs", &self.jobs),
            ("seed", &self.seed),
            ("oracle_depth", &self.oracle_depth),
            ("boundary", &self.boundary),
            ("points", &self.points),
            ("grid", &self.grid),
            ("plane_x", &self.plane_x),
            ("plane_y", &self.plane_y),
            ("norm_levels", &self.norm_levels),
            ("base_depth", &self.base_depth),
            ("ids_method", &self.ids_method),
            ("checks", &self.checks),
            ("inject_delta_error", &self.inject_delta_error),
        ]
    }

    fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if self.timing {
            cfg.timing = true;
        }
        Ok(cfg)
    }
}

fn run(command: Command, opts: &Opts) -> Result<i32, CliError> {
    let cfg = opts.config()?;
    let output = execute(command, &cfg)?;
    for note in output.notes() {
        eprintln!("note: {note}");
    }
    match &cfg.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            output.write(cfg.format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            output.write(cfg.format, &mut w)?;
            w.flush()?;
        }
    }
    Ok(output.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let (command, opts) = match &cli.command {
        Cmd::Spectrum(o) => (Command::Spectrum, o),
        Cmd::Ids(o) => (Command::Ids, o),
        Cmd::Plane(o) => (Command::Plane, o),
        Cmd::Verify(o) => (Command::Verify, o),
        Cmd::Dichotomy(o) => (Command::Dichotomy, o),
    };
    match run(command, opts) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
