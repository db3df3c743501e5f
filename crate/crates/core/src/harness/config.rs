use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::BoundingBox;
use crate::geometry::{closest_points, CurveShape, ParametricCurve, Preset, RigidMotion};
use crate::solvers::{HarmonicPolynomial, Method};

/// Gap values of the reference blow-up table.
pub const TABLE_EPS: [f64; 8] = [0.018, 0.016, 0.014, 0.012, 0.010, 0.008, 0.006, 0.004];

/// Which solver(s) a subcommand runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    Decomposed,
    Direct,
    Both,
}

impl MethodChoice {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodChoice::Decomposed => vec![Method::Decomposed],
            MethodChoice::Direct => vec![Method::Direct],
            MethodChoice::Both => vec![Method::Decomposed, Method::Direct],
        }
    }
}

impl std::str::FromStr for MethodChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "decomposed" => Ok(MethodChoice::Decomposed),
            "direct" => Ok(MethodChoice::Direct),
            "both" => Ok(MethodChoice::Both),
            _ => Err(format!("unknown method `{s}` (expected decomposed, direct or both)")),
        }
    }
}

/// Either a named preset or two explicit curves; explicit curves are moved apart along the
/// line of closest approach until their gap equals `eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<Vec<CurveShape>>,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec {
            preset: Some(Preset::Ellipses),
            curves: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweeps {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rho: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// `[xmin, xmax, ymin, ymax]`.
    pub bbox: [f64; 4],
    pub nx: usize,
    pub ny: usize,
    pub levels: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            bbox: [-3.0, 3.0, -2.0, 2.0],
            nx: 121,
            ny: 81,
            levels: 30,
        }
    }
}

impl GridSpec {
    pub fn bounding_box(&self) -> BoundingBox {
        let [xmin, xmax, ymin, ymax] = self.bbox;
        BoundingBox { xmin, xmax, ymin, ymax }
    }
}

fn default_field() -> HarmonicPolynomial {
    HarmonicPolynomial::x1()
}
fn default_eps() -> f64 {
    0.01
}
fn default_n() -> usize {
    1024
}
fn default_rho() -> f64 {
    0.1
}
fn default_reference_n() -> usize {
    4096
}
fn default_method() -> MethodChoice {
    MethodChoice::Decomposed
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One experiment: geometry, applied field, resolution, sweeps and output location.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_field")]
    pub field: HarmonicPolynomial,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Nodes per inclusion boundary.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Bridge half-width of the touching problem.
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Nodes per retained arc of the dumbbell; defaults to `max(1024, n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_n: Option<usize>,
    /// Skips the touching problem and uses this value of `α0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    /// Resolution of the reference solution in convergence studies.
    #[serde(default = "default_reference_n")]
    pub reference_n: usize,
    #[serde(default = "default_method")]
    pub method: MethodChoice,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub sweeps: Sweeps,
    #[serde(default)]
    pub grid: GridSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

/// A configuration problem, with the 1-based line it refers to when known.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Line of `key = ...` inside `[section]` (`""` for the top level), if present.
fn line_of(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_start_matches('[').trim_end_matches(']').trim().to_string();
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// Which subcommand-specific requirements to check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Requirement {
    Dumbbell,
    EpsSweep,
    NSweep,
}

impl ExperimentConfig {
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(source).map_err(|e| ConfigError {
            line: e.span().map(|s| source[..s.start].matches('\n').count() + 1),
            message: e.message().to_string(),
        })?;
        cfg.validate_with(source, &[])?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self, requirements: &[Requirement]) -> Result<(), ConfigError> {
        self.validate_with("", requirements)
    }

    /// Checks semantic constraints; `source` (the file text, possibly empty) is used to
    /// point at the offending line.
    pub fn validate_with(&self, source: &str, requirements: &[Requirement]) -> Result<(), ConfigError> {
        let err = |section: &str, key: &str, message: String| ConfigError {
            line: line_of(source, section, key),
            message,
        };
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(err("", "eps", format!("eps must be positive, got {}", self.eps)));
        }
        if self.n < 16 || !self.n.is_multiple_of(2) {
            return Err(err("", "n", format!("n must be an even number ≥ 16, got {}", self.n)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(err("", "rho", format!("rho must be positive, got {}", self.rho)));
        }
        if self.reference_n < 16 || !self.reference_n.is_multiple_of(2) {
            return Err(err(
                "",
                "reference_n",
                format!("reference_n must be an even number ≥ 16, got {}", self.reference_n),
            ));
        }
        match (&self.geometry.preset, &self.geometry.curves) {
            (Some(_), Some(_)) => {
                return Err(err(
                    "geometry",
                    "curves",
                    "give either a preset or explicit curves, not both".into(),
                ))
            }
            (None, None) => return Err(err("geometry", "", "geometry needs a preset or two curves".into())),
            (None, Some(c)) if c.len() != 2 => {
                return Err(err(
                    "geometry",
                    "curves",
                    format!("exactly two curves are required, got {}", c.len()),
                ))
            }
            _ => {}
        }
        if let Some(e) = self.sweeps.eps.iter().find(|e| !(**e > 0.0)) {
            return Err(err(
                "sweeps",
                "eps",
                format!("sweep gap values must be positive, got {e}"),
            ));
        }
        if let Some(n) = self.sweeps.n.iter().find(|n| **n < 16 || **n % 2 != 0) {
            return Err(err(
                "sweeps",
                "n",
                format!("sweep node counts must be even and ≥ 16, got {n}"),
            ));
        }
        if let Some(r) = self.sweeps.rho.iter().find(|r| !(**r > 0.0)) {
            return Err(err(
                "sweeps",
                "rho",
                format!("sweep rho values must be positive, got {r}"),
            ));
        }
        let [xmin, xmax, ymin, ymax] = self.grid.bbox;
        if !(xmax > xmin && ymax > ymin) {
            return Err(err(
                "grid",
                "bbox",
                "bbox must be [xmin, xmax, ymin, ymax] with xmin < xmax and ymin < ymax".into(),
            ));
        }
        if self.grid.nx < 16 || self.grid.ny < 16 {
            return Err(err(
                "grid",
                "nx",
                format!("grid must be at least 16×16, got {}×{}", self.grid.nx, self.grid.ny),
            ));
        }
        for r in requirements {
            match r {
                Requirement::Dumbbell => {
                    let an = self.alpha_n();
                    if self.alpha0.is_none() && !an.is_multiple_of(16) {
                        let key = if self.alpha_n.is_some() { "alpha_n" } else { "n" };
                        return Err(err("", key, format!("dumbbell runs need N divisible by 16, got {an}")));
                    }
                    if let Some(n) = self.sweeps.n.iter().find(|n| **n % 16 != 0) {
                        if self.alpha0.is_none() {
                            return Err(err(
                                "sweeps",
                                "n",
                                format!("dumbbell runs need N divisible by 16, got {n}"),
                            ));
                        }
                    }
                }
                Requirement::EpsSweep if self.sweeps.eps.is_empty() => {
                    return Err(err(
                        "sweeps",
                        "eps",
                        "this subcommand needs a non-empty eps sweep".into(),
                    ))
                }
                Requirement::NSweep if self.sweeps.n.is_empty() => {
                    return Err(err("sweeps", "n", "this subcommand needs a non-empty n sweep".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Dumbbell resolution used for `α0`.
    pub fn alpha_n(&self) -> usize {
        self.alpha_n.unwrap_or(self.n.max(1024))
    }

    /// The two curves placed with gap `eps`.
    pub fn curves(&self, eps: f64) -> crate::Result<(ParametricCurve, ParametricCurve)> {
        if let Some(p) = self.geometry.preset {
            return Ok(p.curves(eps));
        }
        let shapes = self.geometry.curves.as_deref().unwrap_or(&[]);
        let [a, b] = shapes else {
            return Err(crate::Error::InvalidInput("exactly two curves are required".into()));
        };
        let c1 = ParametricCurve::new(a.clone());
        let mut c2 = ParametricCurve::new(b.clone());
        c1.validate()?;
        c2.validate()?;
        for _ in 0..20 {
            let cp = closest_points(&c1, &c2)?;
            if (cp.eps - eps).abs() <= 1e-13 * eps.max(1.0) {
                return Ok((c1, c2));
            }
            let dir = if cp.eps > 1e-12 {
                (cp.z2 - cp.z1).normalized()
            } else {
                c1.eval(cp.theta1).normal()
            };
            c2 = c2.transformed(&RigidMotion::translation(dir * (eps - cp.eps)));
        }
        Err(crate::Error::NoConvergence {
            what: "gap adjustment",
            iterations: 20,
            residual: (closest_points(&c1, &c2)?.eps - eps).abs(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;

    const EXAMPLE: &str = r#"
field = "x1 + x2"
eps = 0.004
n = 512
method = "both"
output_dir = "results"

[geometry]
preset = "ellipses"

[sweeps]
eps = [0.018, 0.01, 0.004]
n = [256, 512]

[grid]
bbox = [-1.0, 1.0, -0.5, 0.5]
nx = 32
ny = 16
levels = 10
"#;

    #[test]
    fn parse_and_round_trip() {
        let cfg = ExperimentConfig::parse(EXAMPLE).unwrap();
        assert_eq!(cfg.field.to_string(), "x1 + x2");
        assert_eq!(cfg.method, MethodChoice::Both);
        assert_eq!(cfg.sweeps.n, vec![256, 512]);
        let again = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_eq!(cfg.hash().len(), 64);
        let moved = ExperimentConfig {
            output_dir: "elsewhere".into(),
            ..cfg.clone()
        };
        assert_eq!(moved.hash(), cfg.hash());
        let changed = ExperimentConfig {
            eps: 0.005,
            ..cfg.clone()
        };
        assert_ne!(changed.hash(), cfg.hash());
    }

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.geometry.preset, Some(Preset::Ellipses));
        assert_eq!(cfg.n, 1024);
        assert_eq!(cfg.alpha_n(), 1024);
        assert_eq!(cfg.field.to_string(), "x1");
        assert_eq!(ExperimentConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn errors_point_at_lines() {
        let e = ExperimentConfig::parse("eps = 0.01\nn = 15\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = ExperimentConfig::parse("eps = 0.01\n\n[sweeps]\nn = [64, 33]\n").unwrap_err();
        assert_eq!(e.line, Some(4));
        let e = ExperimentConfig::parse("field = \"x1^2\"\n").unwrap_err();
        assert_eq!(e.line, Some(1));
        assert!(e.message.contains("harmonic"));
        let e = ExperimentConfig::parse("eps = 0.01\nbogus = 3\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = ExperimentConfig::parse("[geometry]\npreset = \"ellipses\"\ncurves = []\n").unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn preset_names_parse() {
        for p in Preset::ALL {
            let cfg = ExperimentConfig::parse(&format!("[geometry]\npreset = \"{}\"\n", p.name())).unwrap();
            assert_eq!(cfg.geometry.preset, Some(p));
        }
    }

    #[test]
    fn subcommand_requirements() {
        let cfg = ExperimentConfig::parse("n = 520\n").unwrap();
        assert!(cfg.validate(&[Requirement::Dumbbell]).is_ok());
        let cfg = ExperimentConfig::parse("n = 1032\nalpha_n = 1032\n").unwrap();
        let e = cfg
            .validate_with("n = 1032\nalpha_n = 1032\n", &[Requirement::Dumbbell])
            .unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(cfg.validate(&[Requirement::EpsSweep]).is_err());
    }

    #[test]
    fn explicit_curves_are_shifted_to_the_gap() {
        let src = r#"
eps = 0.02
[geometry]
curves = [
  { kind = "circle", center = [-1.5, 0.3], radius = 1.0 },
  { kind = "ellipse", center = [2.0, 1.0], semi_a = 1.0, semi_b = 0.5, rotation = 0.4 },
]
"#;
        let cfg = ExperimentConfig::parse(src).unwrap();
        let (a, b) = cfg.curves(0.02).unwrap();
        assert!((closest_points(&a, &b).unwrap().eps - 0.02).abs() < 1e-12);
        assert_eq!(a.point(0.0), Vec2::new(-0.5, 0.3));
    }

    proptest::proptest! {
        #[test]
        fn round_trip_is_identity(
            eps in 1e-4f64..1.0,
            half_n in 8usize..4096,
            rho in 0.01f64..0.5,
            method in 0usize..3,
            sweep in proptest::collection::vec(1e-4f64..1.0, 0..6),
            c in -5.0f64..5.0,
        ) {
            let cfg = ExperimentConfig {
                eps,
                n: 2 * half_n,
                rho,
                method: [MethodChoice::Decomposed, MethodChoice::Direct, MethodChoice::Both][method],
                field: HarmonicPolynomial::x1().add(&HarmonicPolynomial::x2().scaled(c)),
                sweeps: Sweeps { eps: sweep, ..Sweeps::default() },
                ..ExperimentConfig::default()
            };
            let again = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
            proptest::prop_assert_eq!(&again, &cfg);
            proptest::prop_assert_eq!(again.to_toml(), cfg.to_toml());
        }
    }
}
