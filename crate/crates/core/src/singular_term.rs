//! The singular function `q` and its harmonic extensions into the inclusions.
//!
//! ```text
//! q(x) = (ln|x - p1| - ln|x - p2| - ln|x - c1| + ln|x - c2|) / 2π
//! ```
//!
//! `p1`, `p2` are the reflection fixed points and `c1`, `c2` the osculating centres. Across
//! the gap `∇q` carries the whole `ε^{-1/2}` blow-up. Inside `D_j`, `q_j` is the harmonic
//! function with trace `q|∂D_j`; its interior normal derivative enters the right-hand side
//! of the decomposed boundary integral equation.

use std::f64::consts::TAU;

use faer::Mat;

use crate::error::{Error, Result};
use crate::geometry::{DiscreteBoundary, OsculatingGeometry, Vec2};
use crate::layer_potential::{apply_kstar_self, single_layer_matrix_self, solve_dense, DensityVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingularFunction {
    pub p1: Vec2,
    pub p2: Vec2,
    pub c1: Vec2,
    pub c2: Vec2,
}

impl SingularFunction {
    pub fn new(geometry: &OsculatingGeometry) -> Self {
        SingularFunction {
            p1: geometry.p1,
            p2: geometry.p2,
            c1: geometry.c1,
            c2: geometry.c2,
        }
    }

    fn poles(&self) -> [(Vec2, f64); 4] {
        [(self.p1, 1.0), (self.p2, -1.0), (self.c1, -1.0), (self.c2, 1.0)]
    }

    pub fn q_eval(&self, x: Vec2) -> Result<f64> {
        let mut v = 0.0;
        for (p, sign) in self.poles() {
            let r2 = (x - p).norm_sq();
            if r2 == 0.0 {
                return Err(Error::AtSingularity(x));
            }
            v += sign * r2.ln();
        }
        Ok(0.5 * v / TAU)
    }

    pub fn grad_q(&self, x: Vec2) -> Result<Vec2> {
        let mut g = Vec2::ZERO;
        for (p, sign) in self.poles() {
            let d = x - p;
            let r2 = d.norm_sq();
            if r2 == 0.0 {
                return Err(Error::AtSingularity(x));
            }
            g += d * (sign / r2);
        }
        Ok(g / TAU)
    }

    /// `q` at the nodes of `b`.
    pub fn trace(&self, b: &DiscreteBoundary) -> Result<Vec<f64>> {
        b.nodes.iter().map(|x| self.q_eval(*x)).collect()
    }

    /// `∂q/∂ν` at the nodes of `b` (outward normal of `b`).
    pub fn normal_derivative(&self, b: &DiscreteBoundary) -> Result<Vec<f64>> {
        b.nodes
            .iter()
            .zip(&b.normals)
            .map(|(x, nu)| Ok(self.grad_q(*x)?.dot(*nu)))
            .collect()
    }
}

/// Interior harmonic extension `S[η] + c` of Dirichlet data on one smooth boundary.
#[derive(Clone, Debug)]
pub struct HarmonicExtension {
    pub density: DensityVector,
    pub constant: f64,
    /// `∂/∂ν` from inside, at the boundary nodes.
    pub normal_derivative: Vec<f64>,
    /// Relative residual of the augmented system.
    pub residual: f64,
}

/// Solves the interior Dirichlet problem with data `g` on `b`.
///
/// The single-layer ansatz is augmented by a constant and the side condition `∫η ds = 0`,
/// which keeps the system uniquely solvable whatever the logarithmic capacity of `b`.
pub fn harmonic_extension(b: &DiscreteBoundary, g: &[f64], boundary_id: usize) -> Result<HarmonicExtension> {
    let n = b.len();
    if g.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: g.len(),
        });
    }
    let s = single_layer_matrix_self(b)?;
    let a = Mat::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
        (true, true) => s.entries[(i, j)],
        (true, false) => 1.0,
        (false, true) => b.weights[j],
        (false, false) => 0.0,
    });
    let mut rhs = g.to_vec();
    rhs.push(0.0);
    let sol = solve_dense(&a, &rhs)?;
    let eta = sol.x[..n].to_vec();
    let k = apply_kstar_self(b, &eta);
    let normal_derivative = eta.iter().zip(&k).map(|(e, ke)| -0.5 * e + ke).collect();
    Ok(HarmonicExtension {
        density: DensityVector::new(eta, boundary_id),
        constant: sol.x[n],
        normal_derivative,
        residual: sol.residual,
    })
}

/// Harmonic extension of `q|∂D_j` into `D_j`.
pub fn interior_extension(
    b: &DiscreteBoundary,
    sf: &SingularFunction,
    boundary_id: usize,
) -> Result<HarmonicExtension> {
    harmonic_extension(b, &sf.trace(b)?, boundary_id)
}

/// True when the node spacing at the closest point `z` resolves the `√(ε r)` scale on
/// which `q|∂D_j` varies; logs a warning otherwise.
pub fn resolution_ok(b: &DiscreteBoundary, z: Vec2, eps: f64, radius: f64) -> bool {
    let (k, _) = b.nearest_node(z);
    let limit = 0.25 * (eps * radius).sqrt();
    let ok = b.weights[k] <= limit;
    if !ok {
        log::warn!(
            "node spacing {:.3e} near the closest point exceeds {:.3e}; refine the boundary",
            b.weights[k],
            limit
        );
    }
    ok
}
