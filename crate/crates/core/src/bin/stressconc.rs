use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stressconc::harness::{init_workers, load_config, run, Command, ExperimentConfig, MethodChoice};
use stressconc::solvers::HarmonicPolynomial;

/// Field concentration between two closely spaced stiff inclusions.
#[derive(Parser)]
#[command(name = "stressconc", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Concentration factor from the touching problem over a (rho, N) sweep.
    Alpha(Overrides),
    /// Boundary flux and summary for one gap.
    Solve(Overrides),
    /// Error against a fine reference over an N sweep.
    Convergence(Overrides),
    /// Flux at the closest point over a gap sweep, fitted against eps^(-1/2).
    Fit(Overrides),
    /// Field values on a grid and its level curves.
    Field(Overrides),
    /// Singular values and condition numbers over a gap sweep.
    Spectrum(Overrides),
    /// Print the effective configuration as TOML.
    Config(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// TOML experiment file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    /// Harmonic polynomial, e.g. "x1" or "x1^2 - x2^2".
    #[arg(long)]
    field: Option<HarmonicPolynomial>,
    #[arg(long)]
    method: Option<MethodChoice>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self) -> Result<(ExperimentConfig, String), stressconc::harness::HarnessError> {
        let (mut cfg, source) = match &self.config {
            Some(p) => load_config(p)?,
            None => (ExperimentConfig::default(), String::new()),
        };
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = &self.field {
            cfg.field = v.clone();
        }
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        Ok((cfg, source))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    init_workers();
    let cli = Cli::parse();
    let (command, ov) = match &cli.command {
        Sub::Alpha(o) => (Some(Command::Alpha), o),
        Sub::Solve(o) => (Some(Command::Solve), o),
        Sub::Convergence(o) => (Some(Command::Convergence), o),
        Sub::Fit(o) => (Some(Command::Fit), o),
        Sub::Field(o) => (Some(Command::Field), o),
        Sub::Spectrum(o) => (Some(Command::Spectrum), o),
        Sub::Config(o) => (None, o),
    };
    let result = ov.resolve().and_then(|(cfg, source)| match command {
        Some(c) => run(c, &cfg, &source).map(|r| {
            for f in r.files {
                println!("{}", f.display());
            }
        }),
        None => cfg
            .validate_with(&source, &[])
            .map(|_| print!("{}", cfg.to_toml()))
            .map_err(Into::into),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
