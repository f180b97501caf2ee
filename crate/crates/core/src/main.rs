use choquard::harness::{self, RunConfig, Status};
use choquard::Error;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Pseudo-spectral lab for the focusing inhomogeneous Choquard equation.
#[derive(Parser)]
#[command(name = "choquard", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print derived exponents and check admissibility.
    Validate(Common),
    /// Solve for the ground state and write thresholds.csv.
    GroundState(Common),
    /// Evolve the configured initial data and classify the run.
    Evolve(Common),
    /// Run the identity and conservation suite.
    Verify(Common),
    /// Evolve c·Q for each amplitude in scan.amplitudes.
    Scan(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long = "grid-M")]
    grid_m: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "T")]
    t_final: Option<f64>,
}

impl Common {
    fn resolve(&self) -> choquard::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(m) = self.grid_m {
            cfg.grid_points = m;
        }
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(t) = self.t_final {
            cfg.t_final = t;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> choquard::Result<Status> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Validate(c) => harness::cmd_validate(&c.resolve()?, &mut stdout),
        Command::GroundState(c) => harness::cmd_ground_state(&c.resolve()?, &c.out, &mut stdout),
        Command::Evolve(c) => harness::cmd_evolve(&c.resolve()?, &c.out, &mut stdout),
        Command::Verify(c) => harness::cmd_verify(&c.resolve()?, &c.out, &mut stdout),
        Command::Scan(c) => harness::cmd_scan(&c.resolve()?, &c.out, &mut stdout),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(1),
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
