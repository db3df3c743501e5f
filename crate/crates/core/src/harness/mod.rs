//! Experiment runner behind the `stressconc` binary.
//!
//! Each subcommand reads an [`ExperimentConfig`], runs one pipeline and writes CSV/JSON
//! artifacts into `output_dir`. Every CSV starts with a `#` comment line and every JSON
//! document carries a `provenance` object; both record the crate version and the SHA-256
//! of the effective configuration, so reruns of the same config produce identical files.

mod config;

use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{ConfigError, ExperimentConfig, GeometrySpec, GridSpec, MethodChoice, Requirement, Sweeps, TABLE_EPS};

use crate::analysis::{
    conditioning, error_report, export_level_curves, field_grid, fit_blowup, flux_at_closest_point, format_number,
    write_contours_csv, write_grid_csv,
};
use crate::concentration_factor::{alpha_convergence_study, build_touching_pair, compute_alpha};
use crate::solvers::{solve, AppliedField, Discretization, Method, Solution};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Alpha,
    Solve,
    Convergence,
    Fit,
    Field,
    Spectrum,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Alpha,
        Command::Solve,
        Command::Convergence,
        Command::Fit,
        Command::Field,
        Command::Spectrum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Alpha => "alpha",
            Command::Solve => "solve",
            Command::Convergence => "convergence",
            Command::Fit => "fit",
            Command::Field => "field",
            Command::Spectrum => "spectrum",
        }
    }

    pub fn requirements(self) -> &'static [Requirement] {
        match self {
            Command::Alpha | Command::Solve | Command::Fit | Command::Field => &[Requirement::Dumbbell],
            Command::Convergence => &[Requirement::Dumbbell, Requirement::NSweep],
            Command::Spectrum => &[],
        }
    }
}

#[derive(Debug)]
pub enum HarnessError {
    Config(ConfigError),
    Numerical(crate::Error),
    Io { path: PathBuf, source: io::Error },
}

impl HarnessError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config(e) => write!(f, "configuration error: {e}"),
            HarnessError::Numerical(e) => write!(f, "{e}"),
            HarnessError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        HarnessError::Config(e)
    }
}

impl From<crate::Error> for HarnessError {
    fn from(e: crate::Error) -> Self {
        HarnessError::Numerical(e)
    }
}

pub type HarnessResult<T> = Result<T, HarnessError>;

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_sha256: String,
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: T,
}

struct Output {
    dir: PathBuf,
    provenance: Provenance,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(cfg: &ExperimentConfig, command: Command) -> HarnessResult<Self> {
        let dir = cfg.output_dir.clone();
        fs::create_dir_all(&dir).map_err(|source| HarnessError::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(Output {
            dir,
            provenance: Provenance {
                tool: "stressconc",
                version: VERSION,
                command: command.name(),
                config_sha256: cfg.hash(),
            },
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> HarnessResult<()> {
        let path = self.dir.join(name);
        let io_err = |source| HarnessError::Io {
            path: path.clone(),
            source,
        };
        let file = fs::File::create(&path).map_err(io_err)?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(io_err)?;
        self.written.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &str, rows: &[Vec<String>]) -> HarnessResult<()> {
        self.csv_with(name, |w| {
            writeln!(w, "{header}")?;
            for r in rows {
                writeln!(w, "{}", r.join(","))?;
            }
            Ok(())
        })
    }

    fn csv_with(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> HarnessResult<()> {
        let p = self.provenance.clone();
        self.write(name, |w| {
            writeln!(
                w,
                "# {} {} {} config_sha256={}",
                p.tool, p.version, p.command, p.config_sha256
            )?;
            body(w)
        })
    }

    fn json<T: Serialize>(&mut self, name: &str, body: T) -> HarnessResult<()> {
        let p = self.provenance.clone();
        self.write(name, |w| {
            let doc = Document { provenance: &p, body };
            serde_json::to_writer_pretty(&mut *w, &doc).map_err(io::Error::other)?;
            writeln!(w)
        })
    }
}

/// Files produced by one run.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub command: Command,
    pub files: Vec<PathBuf>,
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> HarnessResult<(ExperimentConfig, String)> {
    let source = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg = ExperimentConfig::parse(&source)?;
    Ok((cfg, source))
}

/// Validates `cfg` for `command` and runs it.
pub fn run(command: Command, cfg: &ExperimentConfig, source: &str) -> HarnessResult<RunReport> {
    cfg.validate_with(source, command.requirements())?;
    let mut out = Output::new(cfg, command)?;
    log::info!("{} with config {}", command.name(), out.provenance.config_sha256);
    match command {
        Command::Alpha => run_alpha(cfg, &mut out)?,
        Command::Solve => run_solve(cfg, &mut out)?,
        Command::Convergence => run_convergence(cfg, &mut out)?,
        Command::Fit => run_fit(cfg, &mut out)?,
        Command::Field => run_field(cfg, &mut out)?,
        Command::Spectrum => run_spectrum(cfg, &mut out)?,
    }
    Ok(RunReport {
        command,
        files: out.written,
    })
}

fn discretization(cfg: &ExperimentConfig, eps: f64, n: usize) -> crate::Result<Discretization> {
    let (c1, c2) = cfg.curves(eps)?;
    Discretization::new(&c1, &c2, n)
}

fn field_in(cfg: &ExperimentConfig, disc: &Discretization) -> AppliedField {
    AppliedField::new(cfg.field.clone()).in_frame(&disc.pair.motion)
}

/// `α0` for the configured field: the override if given, zero for a constant field, and
/// otherwise the touching-problem estimate at `(rho, alpha_n)`.
pub fn resolve_alpha0(cfg: &ExperimentConfig, disc: &Discretization) -> crate::Result<f64> {
    if let Some(a) = cfg.alpha0 {
        return Ok(a);
    }
    let h = field_in(cfg, disc);
    if h.is_constant() {
        return Ok(0.0);
    }
    let tp = build_touching_pair(&disc.pair);
    let est = compute_alpha(&tp, &h, cfg.rho, cfg.alpha_n())?;
    log::info!("α0 = {} (ρ = {}, N = {})", est.value, est.rho, est.n);
    Ok(est.value)
}

fn run_alpha(cfg: &ExperimentConfig, out: &mut Output) -> HarnessResult<()> {
    let disc = discretization(cfg, cfg.eps, 16)?;
    let h = field_in(cfg, &disc);
    let tp = build_touching_pair(&disc.pair);
    let rhos = if cfg.sweeps.rho.is_empty() {
        vec![cfg.rho]
    } else {
        cfg.sweeps.rho.clone()
    };
    let ns = if cfg.sweeps.n.is_empty() {
        vec![cfg.alpha_n()]
    } else {
        cfg.sweeps.n.clone()
    };
    let rows = alpha_convergence_study(&tp, &h, &rhos, &ns)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                format_number(r.rho),
                r.n.to_string(),
                format_number(r.alpha),
                format_number(r.rel_err),
                format_number(r.log10_rel_err),
            ]
        })
        .collect();
    out.csv("alpha.csv", "rho,N,alpha,rel_err,log10_rel_err", &table)?;
    #[derive(Serialize)]
    struct Body<'a> {
        field: String,
        rows: &'a [crate::concentration_factor::AlphaRow],
    }
    out.json(
        "alpha.json",
        Body {
            field: cfg.field.to_string(),
            rows: &rows,
        },
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveSummary {
    pub method: Method,
    pub eps: f64,
    pub n: usize,
    pub field: String,
    pub alpha0: f64,
    pub lambda: [f64; 2],
    pub flux_z1: f64,
    pub residual: f64,
}

fn summarize(sol: &Solution, cfg: &ExperimentConfig) -> SolveSummary {
    SolveSummary {
        method: sol.method,
        eps: sol.geometry.eps,
        n: sol.n(),
        field: cfg.field.to_string(),
        alpha0: sol.alpha0(),
        lambda: sol.lambda,
        flux_z1: flux_at_closest_point(sol),
        residual: sol.residual,
    }
}

fn run_solve(cfg: &ExperimentConfig, out: &mut Output) -> HarnessResult<()> {
    let disc = discretization(cfg, cfg.eps, cfg.n)?;
    let h = field_in(cfg, &disc);
    let methods = cfg.method.methods();
    let alpha0 = if methods.contains(&Method::Decomposed) {
        resolve_alpha0(cfg, &disc)?
    } else {
        0.0
    };
    for m in methods {
        let sol = solve(&disc, &h, m, alpha0)?;
        let mut rows = Vec::with_capacity(2 * sol.n());
        for j in 0..2 {
            let flux = sol.boundary_flux(j);
            let b = &sol.boundaries[j];
            for (k, f) in flux.iter().enumerate() {
                rows.push(vec![
                    (j + 1).to_string(),
                    k.to_string(),
                    format_number(b.params[k]),
                    format_number(b.nodes[k].x),
                    format_number(b.nodes[k].y),
                    format_number(*f),
                ]);
            }
        }
        out.csv(&format!("flux_{}.csv", m.name()), "inclusion,k,theta,x1,x2,flux", &rows)?;
        out.json(&format!("summary_{}.json", m.name()), summarize(&sol, cfg))?;
    }
    Ok(())
}

fn run_convergence(cfg: &ExperimentConfig, out: &mut Output) -> HarnessResult<()> {
    let eps_list = if cfg.sweeps.eps.is_empty() {
        vec![cfg.eps]
    } else {
        cfg.sweeps.eps.clone()
    };
    let mut rows = Vec::new();
    for &eps in &eps_list {
        let reference_disc = discretization(cfg, eps, cfg.reference_n)?;
        let alpha0 = if cfg.method == MethodChoice::Direct {
            0.0
        } else {
            resolve_alpha0(cfg, &reference_disc)?
        };
        for m in cfg.method.methods() {
            let h = field_in(cfg, &reference_disc);
            let reference = solve(&reference_disc, &h, m, alpha0)?;
            for &n in &cfg.sweeps.n {
                let disc = discretization(cfg, eps, n)?;
                let sol = solve(&disc, &field_in(cfg, &disc), m, alpha0)?;
                let r = error_report(&sol, &reference)?;
                rows.push(vec![
                    m.name().to_string(),
                    format_number(eps),
                    n.to_string(),
                    cfg.reference_n.to_string(),
                    format_number(flux_at_closest_point(&sol)),
                    r.pointwise_z1.map_or_else(|| "nan".to_string(), format_number),
                    format_number(r.flux_l2),
                    format_number(r.density_l2),
                ]);
            }
        }
    }
    out.csv(
        "convergence.csv",
        "method,eps,N,reference_N,flux_z1,pointwise_z1_err,flux_l2_err,density_l2_err",
        &rows,
    )
}

fn run_fit(cfg: &ExperimentConfig, out: &mut Output) -> HarnessResult<()> {
    let eps_list = if cfg.sweeps.eps.is_empty() {
        TABLE_EPS.to_vec()
    } else {
        cfg.sweeps.eps.clone()
    };
    let method = cfg.method.methods()[0];
    let mut alpha0 = None;
    let mut flux = Vec::with_capacity(eps_list.len());
    for &eps in &eps_list {
        let disc = discretization(cfg, eps, cfg.n)?;
        let a = match (method, alpha0) {
            (Method::Direct, _) => 0.0,
            (_, Some(a)) => a,
            (_, None) => *alpha0.insert(resolve_alpha0(cfg, &disc)?),
        };
        let sol = solve(&disc, &field_in(cfg, &disc), method, a)?;
        flux.push(flux_at_closest_point(&sol));
    }
    let fit = fit_blowup(&eps_list, &flux)?;
    let rows: Vec<Vec<String>> = eps_list
        .iter()
        .zip(&flux)
        .map(|(e, f)| {
            let fixed = fit.fixed.c / e.sqrt() + fit.fixed.c0;
            vec![format_number(*e), format_number(*f), format_number(fixed)]
        })
        .collect();
    out.csv("fit.csv", "eps,flux_z1,fixed_fit", &rows)?;
    out.json("fit.json", &fit)
}

fn run_field(cfg: &ExperimentConfig, out: &mut Output) -> HarnessResult<()> {
    let disc = discretization(cfg, cfg.eps, cfg.n)?;
    let method = cfg.method.methods()[0];
    let alpha0 = if method == Method::Decomposed {
        resolve_alpha0(cfg, &disc)?
    } else {
        0.0
    };
    let sol = solve(&disc, &field_in(cfg, &disc), method, alpha0)?;
    let grid = field_grid(&sol, cfg.grid.bounding_box(), cfg.grid.nx, cfg.grid.ny)?;
    let lines = export_level_curves(&grid, cfg.grid.levels);
    out.csv_with("field_grid.csv", |w| write_grid_csv(&grid, w))?;
    out.csv_with("contours.csv", |w| write_contours_csv(&lines, w))
}

fn run_spectrum(cfg: &ExperimentConfig, out: &mut Output) -> HarnessResult<()> {
    let eps_list = if cfg.sweeps.eps.is_empty() {
        vec![0.08, 0.04, 0.02, 0.01]
    } else {
        cfg.sweeps.eps.clone()
    };
    let mut summary = Vec::new();
    let mut values = Vec::new();
    for &eps in &eps_list {
        let r = conditioning(&discretization(cfg, eps, cfg.n)?)?;
        summary.push(vec![
            format_number(eps),
            r.n.to_string(),
            format_number(r.condition),
            format_number(r.singular_values[0]),
            format_number(*r.singular_values.last().unwrap()),
        ]);
        for (i, s) in r.singular_values.iter().enumerate() {
            values.push(vec![
                format_number(eps),
                r.n.to_string(),
                i.to_string(),
                format_number(*s),
            ]);
        }
    }
    out.csv("spectrum.csv", "eps,N,condition,sigma_max,sigma_min", &summary)?;
    out.csv("singular_values.csv", "eps,N,index,sigma", &values)
}

/// Sizes the global rayon pool from `STRESSCONC_WORKERS` if set.
pub fn init_workers() {
    if let Some(n) = std::env::var("STRESSCONC_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::warn!("worker pool already initialized; STRESSCONC_WORKERS ignored");
        }
    }
}
