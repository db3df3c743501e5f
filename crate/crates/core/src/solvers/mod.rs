//! Decomposed and direct boundary integral solvers for the two-inclusion problem.
//!
//! Both represent `u` with mean-zero single-layer densities on `∂D1` and `∂D2`:
//!
//! * decomposed: `u = α0 q + H + S1[φ1] + S2[φ2]`, where `q` absorbs the gap singularity so
//!   `φ_j` stay bounded as `ε → 0`;
//! * direct: `u = H + S1[ψ1] + S2[ψ2]`, where `ψ_j` grow like `ε^{-1/2}` at the gap.
//!
//! Constancy of `u` on each boundary is imposed through the exterior Neumann form
//! `(-½ I + K*)` of the boundary equations, so the boundary values `λ_j` are not unknowns;
//! they are read off afterwards as the mean of the computed trace.

mod field;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use field::{AppliedField, HarmonicPolynomial};

use crate::error::{Error, Result};
use crate::geometry::{
    canonical_frame, discretize_from, CanonicalPair, DiscreteBoundary, OsculatingGeometry, ParametricCurve, Vec2,
};
use crate::layer_potential::{
    apply_kstar_cross, apply_kstar_self, apply_single_layer_cross, apply_single_layer_self, shifted_system,
    single_layer_eval, single_layer_grad, solve_dense, DensityVector, OperatorMatrix, NEAR_FIELD_FACTOR,
};
use crate::singular_term::{interior_extension, resolution_ok, HarmonicExtension, SingularFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Decomposed,
    Direct,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Decomposed => "decomposed",
            Method::Direct => "direct",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decomposed" => Ok(Method::Decomposed),
            "direct" => Ok(Method::Direct),
            _ => Err(Error::InvalidInput(format!("unknown method `{s}`"))),
        }
    }
}

/// Two inclusions in the canonical frame, each discretized with `n` nodes starting at its
/// closest point (node 0 of boundary `j` is `z_j`).
#[derive(Clone, Debug)]
pub struct Discretization {
    pub pair: CanonicalPair,
    pub geometry: OsculatingGeometry,
    pub boundaries: [DiscreteBoundary; 2],
    pub n: usize,
}

impl Discretization {
    pub fn new(c1: &ParametricCurve, c2: &ParametricCurve, n: usize) -> Result<Self> {
        Self::from_pair(canonical_frame(c1, c2)?, n)
    }

    pub fn from_pair(pair: CanonicalPair, n: usize) -> Result<Self> {
        if !n.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!("nodes per boundary must be even, got {n}")));
        }
        for c in [&pair.curve1, &pair.curve2] {
            c.validate()?;
        }
        let geometry = OsculatingGeometry::from_pair(&pair)?;
        let boundaries = [
            discretize_from(&pair.curve1, n, pair.theta1)?,
            discretize_from(&pair.curve2, n, pair.theta2)?,
        ];
        Ok(Discretization {
            pair,
            geometry,
            boundaries,
            n,
        })
    }

    pub fn eps(&self) -> f64 {
        self.pair.eps
    }
}

fn check_len(b: &DiscreteBoundary, v: &[f64]) -> Result<()> {
    if b.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            got: v.len(),
        });
    }
    Ok(())
}

/// `-∂H/∂ν` at the nodes of `b`.
fn field_rhs(b: &DiscreteBoundary, h: &AppliedField) -> Vec<f64> {
    b.nodes
        .iter()
        .zip(&b.normals)
        .map(|(x, nu)| -h.grad(*x).dot(*nu))
        .collect()
}

/// The block system of the direct method.
pub fn assemble_direct(boundaries: [&DiscreteBoundary; 2], h: &AppliedField) -> Result<(OperatorMatrix, Vec<f64>)> {
    let a = shifted_system(&boundaries)?;
    let mut rhs = field_rhs(boundaries[0], h);
    rhs.extend(field_rhs(boundaries[1], h));
    Ok((a, rhs))
}

/// The block system of the decomposed method:
/// `rhs_j = -∂H/∂ν - α0 ∂q_j/∂ν|₋`.
pub fn assemble_decomposed(
    boundaries: [&DiscreteBoundary; 2],
    extensions: [&HarmonicExtension; 2],
    h: &AppliedField,
    alpha0: f64,
) -> Result<(OperatorMatrix, Vec<f64>)> {
    for (b, e) in boundaries.iter().zip(extensions) {
        check_len(b, &e.normal_derivative)?;
    }
    let (a, mut rhs) = assemble_direct(boundaries, h)?;
    let dq = extensions[0]
        .normal_derivative
        .iter()
        .chain(&extensions[1].normal_derivative);
    for (r, d) in rhs.iter_mut().zip(dq) {
        *r -= alpha0 * d;
    }
    Ok((a, rhs))
}

/// Decomposed-method data; absent for the direct method.
#[derive(Clone, Debug)]
pub struct SingularPart {
    pub alpha0: f64,
    pub sf: SingularFunction,
    pub extensions: [HarmonicExtension; 2],
}

/// A solved two-inclusion problem (either method).
#[derive(Clone, Debug)]
pub struct Solution {
    pub method: Method,
    pub boundaries: [DiscreteBoundary; 2],
    pub geometry: OsculatingGeometry,
    pub field: AppliedField,
    /// `φ_j` (decomposed) or `ψ_j` (direct).
    pub densities: [DensityVector; 2],
    pub singular: Option<SingularPart>,
    /// Relative residual of the dense solve.
    pub residual: f64,
    /// `λ_j`: weighted mean of the computed trace on `∂D_j`.
    pub lambda: [f64; 2],
}

fn finish(
    method: Method,
    disc: &Discretization,
    h: &AppliedField,
    x: Vec<f64>,
    residual: f64,
    singular: Option<SingularPart>,
) -> Result<Solution> {
    let n1 = disc.boundaries[0].len();
    let mut d1 = DensityVector::new(x[..n1].to_vec(), 0);
    let mut d2 = DensityVector::new(x[n1..].to_vec(), 1);
    // the deflated system returns mean-zero densities up to rounding; remove the remainder
    d1.project_mean_zero(&disc.boundaries[0]);
    d2.project_mean_zero(&disc.boundaries[1]);
    let mut sol = Solution {
        method,
        boundaries: disc.boundaries.clone(),
        geometry: disc.geometry,
        field: h.clone(),
        densities: [d1, d2],
        singular,
        residual,
        lambda: [0.0; 2],
    };
    for j in 0..2 {
        let t = sol.trace(j)?;
        sol.lambda[j] = sol.boundaries[j].integrate(&t) / sol.boundaries[j].perimeter();
    }
    Ok(sol)
}

pub fn solve_direct(disc: &Discretization, h: &AppliedField) -> Result<Solution> {
    let [b1, b2] = &disc.boundaries;
    let (a, rhs) = assemble_direct([b1, b2], h)?;
    let s = solve_dense(&a.entries, &rhs)?;
    if s.pivot_ratio < 1e-10 {
        log::warn!(
            "direct system is poorly conditioned (pivot ratio {:.2e})",
            s.pivot_ratio
        );
    }
    finish(Method::Direct, disc, h, s.x, s.residual, None)
}

pub fn solve_decomposed(disc: &Discretization, h: &AppliedField, alpha0: f64) -> Result<Solution> {
    let [b1, b2] = &disc.boundaries;
    let g = &disc.geometry;
    resolution_ok(b1, g.z1, g.eps, g.r1);
    resolution_ok(b2, g.z2, g.eps, g.r2);
    let sf = SingularFunction::new(g);
    let extensions = [interior_extension(b1, &sf, 0)?, interior_extension(b2, &sf, 1)?];
    let (a, rhs) = assemble_decomposed([b1, b2], [&extensions[0], &extensions[1]], h, alpha0)?;
    let s = solve_dense(&a.entries, &rhs)?;
    drop(a);
    let singular = SingularPart { alpha0, sf, extensions };
    finish(Method::Decomposed, disc, h, s.x, s.residual, Some(singular))
}

/// Solves with the given method; `alpha0` is ignored by the direct method.
pub fn solve(disc: &Discretization, h: &AppliedField, method: Method, alpha0: f64) -> Result<Solution> {
    match method {
        Method::Decomposed => solve_decomposed(disc, h, alpha0),
        Method::Direct => solve_direct(disc, h),
    }
}

impl Solution {
    pub fn n(&self) -> usize {
        self.boundaries[0].len()
    }

    pub fn alpha0(&self) -> f64 {
        self.singular.as_ref().map_or(0.0, |s| s.alpha0)
    }

    /// Index of the inclusion containing `x`, if any.
    pub fn inclusion_containing(&self, x: Vec2) -> Option<usize> {
        (0..2).find(|&j| self.boundaries[j].contains(x))
    }

    /// True if `x` is within the near-field margin of either boundary.
    pub fn is_near_boundary(&self, x: Vec2) -> bool {
        self.boundaries.iter().any(|b| b.is_near(x, NEAR_FIELD_FACTOR))
    }

    /// `u(x)`; inside an inclusion this is `λ_j`.
    pub fn u_eval(&self, x: Vec2) -> Result<f64> {
        let [b1, b2] = &self.boundaries;
        let s1 = single_layer_eval(b1, &self.densities[0].values, x)?;
        let s2 = single_layer_eval(b2, &self.densities[1].values, x)?;
        if let Some(j) = self.inclusion_containing(x) {
            return Ok(self.lambda[j]);
        }
        let q = match &self.singular {
            Some(s) => s.alpha0 * s.sf.q_eval(x)?,
            None => 0.0,
        };
        Ok(q + self.field.eval(x) + s1 + s2)
    }

    /// `∇u(x)`; zero inside an inclusion.
    pub fn grad_u_eval(&self, x: Vec2) -> Result<Vec2> {
        let [b1, b2] = &self.boundaries;
        let g1 = single_layer_grad(b1, &self.densities[0].values, x)?;
        let g2 = single_layer_grad(b2, &self.densities[1].values, x)?;
        if self.inclusion_containing(x).is_some() {
            return Ok(Vec2::ZERO);
        }
        let gq = match &self.singular {
            Some(s) => s.sf.grad_q(x)? * s.alpha0,
            None => Vec2::ZERO,
        };
        Ok(gq + self.field.grad(x) + g1 + g2)
    }

    /// `u` at the nodes of `∂D_which`, from the exterior representation.
    pub fn trace(&self, which: usize) -> Result<Vec<f64>> {
        let (b, other) = (&self.boundaries[which], &self.boundaries[1 - which]);
        let own = apply_single_layer_self(b, &self.densities[which].values)?;
        let cross = apply_single_layer_cross(b, other, &self.densities[1 - which].values);
        b.nodes
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let q = match &self.singular {
                    Some(s) => s.alpha0 * s.sf.q_eval(*x)?,
                    None => 0.0,
                };
                Ok(q + self.field.eval(*x) + own[k] + cross[k])
            })
            .collect()
    }

    /// `∂u/∂ν|₊` at the nodes of `∂D_which`.
    pub fn boundary_flux(&self, which: usize) -> Vec<f64> {
        let (b, other) = (&self.boundaries[which], &self.boundaries[1 - which]);
        let phi = &self.densities[which].values;
        let k = apply_kstar_self(b, phi);
        let cross = apply_kstar_cross(b, other, &self.densities[1 - which].values);
        (0..b.len())
            .map(|i| {
                let (x, nu) = (b.nodes[i], b.normals[i]);
                let q = match &self.singular {
                    // poles lie strictly inside the inclusions, never on a node
                    Some(s) => s.alpha0 * s.sf.grad_q(x).map_or(0.0, |g| g.dot(nu)),
                    None => 0.0,
                };
                q + self.field.grad(x).dot(nu) + 0.5 * phi[i] + k[i] + cross[i]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::presets;
    use approx::assert_abs_diff_eq;

    fn ellipses(eps: f64, n: usize) -> Discretization {
        let (a, b) = presets::ellipses(eps);
        Discretization::new(&a, &b, n).unwrap()
    }

    #[test]
    fn method_names() {
        for m in [Method::Decomposed, Method::Direct] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("both".parse::<Method>().is_err());
    }

    #[test]
    fn zero_alpha_reduces_to_direct_rhs() {
        let d = ellipses(0.01, 64);
        let h = AppliedField::parse("x1 + 0.3*x2").unwrap();
        let sf = SingularFunction::new(&d.geometry);
        let e = [
            interior_extension(&d.boundaries[0], &sf, 0).unwrap(),
            interior_extension(&d.boundaries[1], &sf, 1).unwrap(),
        ];
        let [b1, b2] = &d.boundaries;
        let (_, r0) = assemble_decomposed([b1, b2], [&e[0], &e[1]], &h, 0.0).unwrap();
        let (_, rd) = assemble_direct([b1, b2], &h).unwrap();
        assert_eq!(r0, rd);
        let (_, r) = assemble_decomposed([b1, b2], [&e[0], &e[1]], &h, 10.3).unwrap();
        for (j, b) in d.boundaries.iter().enumerate() {
            let part = &r[j * 64..(j + 1) * 64];
            assert!(b.integrate(part).abs() < 1e-8);
        }
    }

    #[test]
    fn decomposed_rhs_is_even_in_x2() {
        let d = ellipses(0.01, 128);
        let sf = SingularFunction::new(&d.geometry);
        let e = [
            interior_extension(&d.boundaries[0], &sf, 0).unwrap(),
            interior_extension(&d.boundaries[1], &sf, 1).unwrap(),
        ];
        let [b1, b2] = &d.boundaries;
        let (_, r) = assemble_decomposed([b1, b2], [&e[0], &e[1]], &AppliedField::parse("x1").unwrap(), 10.3).unwrap();
        // node k and node n - k are mirror images in x2 on each boundary
        for j in 0..2 {
            for k in 1..64 {
                assert_abs_diff_eq!(r[j * 128 + k], r[j * 128 + 128 - k], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn constant_field_gives_zero_everything() {
        let d = ellipses(0.01, 64);
        let h = AppliedField::parse("2").unwrap();
        for m in [Method::Direct, Method::Decomposed] {
            let s = solve(&d, &h, m, 0.0).unwrap();
            assert!(s.boundary_flux(0).iter().all(|v| v.abs() < 1e-14));
            assert_abs_diff_eq!(s.lambda[0], 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn isolated_disks_have_analytic_density() {
        // a unit disk in H = x1 alone has ψ = 2 cos θ
        let (a, b) = presets::disks(1.0, 1.0, 40.0);
        let d = Discretization::new(&a, &b, 128).unwrap();
        let s = solve_direct(&d, &AppliedField::parse("x1").unwrap()).unwrap();
        let b1 = &d.boundaries[0];
        let psi = &s.densities[0].values;
        let peak = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (k, v) in psi.iter().enumerate() {
            let c = Vec2::new(-21.0, 0.0);
            let cos = (b1.nodes[k] - c).x;
            assert!((v - 2.0 * cos).abs() <= 0.01 * peak, "{k}: {v} {}", 2.0 * cos);
        }
    }

    #[test]
    fn fluxes_integrate_to_zero_and_traces_are_constant() {
        let d = ellipses(0.05, 512);
        let h = AppliedField::parse("x1").unwrap();
        for m in [Method::Direct, Method::Decomposed] {
            let s = solve(&d, &h, m, 10.312176).unwrap();
            for j in 0..2 {
                assert!(s.boundaries[j].integrate(&s.boundary_flux(j)).abs() < 1e-8);
                assert!(s.densities[j].mean_residual(&s.boundaries[j]) < 1e-10);
            }
            assert_abs_diff_eq!(s.lambda[0], -s.lambda[1], epsilon = 1e-8);
        }
    }

    #[test]
    fn near_boundary_evaluation_is_refused() {
        let d = ellipses(0.01, 64);
        let s = solve_direct(&d, &AppliedField::parse("x1").unwrap()).unwrap();
        assert!(matches!(
            s.u_eval(d.boundaries[0].nodes[5]),
            Err(Error::NearBoundary { .. })
        ));
        assert_eq!(s.u_eval(Vec2::new(-2.0, 0.0)).unwrap(), s.lambda[0]);
        assert_eq!(s.grad_u_eval(Vec2::new(2.0, 0.1)).unwrap(), Vec2::ZERO);
    }
}
