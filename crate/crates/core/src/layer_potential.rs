//! Laplace layer potentials on discretized boundaries.
//!
//! With `Γ(x) = ln|x| / 2π`, the single layer potential is `S[φ](x) = ∫ Γ(x - y) φ(y) ds(y)`
//! and its normal derivative satisfies the jump relation
//! `∂ν S[φ]|± = (±½ I + K*)[φ]`, where `K*` has kernel `⟨ν_x, x - y⟩ / (2π |x - y|²)`.
//!
//! Matrices store `kernel × weight`, so a matrix-vector product with nodal density values
//! is the quadrature of the integral operator. Smooth kernels use the periodic trapezoid
//! rule; the logarithmic self-interaction of `S` uses a product rule that integrates
//! `ln|2 sin((t - τ)/2)|` exactly against trigonometric polynomials.

use std::f64::consts::{PI, TAU};

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::error::{Error, Result};
use crate::geometry::{DiscreteBoundary, Vec2};

/// Field evaluation is refused closer than this many local node spacings to a boundary.
pub const NEAR_FIELD_FACTOR: f64 = 2.0;

/// Relative pivot size below which a factorization is reported singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

/// `Γ(x) = ln|x| / 2π`.
pub fn fundamental_solution(x: Vec2) -> Result<f64> {
    let r2 = x.norm_sq();
    if r2 == 0.0 {
        return Err(Error::AtSingularity(x));
    }
    Ok(0.25 * r2.ln() / PI)
}

/// `∇Γ(x) = x / (2π |x|²)`.
pub fn fundamental_solution_grad(x: Vec2) -> Result<Vec2> {
    let r2 = x.norm_sq();
    if r2 == 0.0 {
        return Err(Error::AtSingularity(x));
    }
    Ok(x / (TAU * r2))
}

/// Density values aligned with the nodes of one boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityVector {
    pub values: Vec<f64>,
    pub boundary_id: usize,
}

impl DensityVector {
    pub fn new(values: Vec<f64>, boundary_id: usize) -> Self {
        DensityVector { values, boundary_id }
    }

    /// `|∫φ ds| / ∫|φ| ds` (zero for the zero density).
    pub fn mean_residual(&self, b: &DiscreteBoundary) -> f64 {
        let total = b.integrate(&self.values);
        let abs: f64 = self.values.iter().zip(&b.weights).map(|(v, w)| v.abs() * w).sum();
        if abs == 0.0 {
            0.0
        } else {
            total.abs() / abs
        }
    }

    /// Subtracts the weighted mean; returns the removed mass `∫φ ds`.
    pub fn project_mean_zero(&mut self, b: &DiscreteBoundary) -> f64 {
        let mass = b.integrate(&self.values);
        let shift = mass / b.perimeter();
        for v in &mut self.values {
            *v -= shift;
        }
        mass
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    SingleLayerSelf,
    KstarSelf,
    KstarCross,
    Block,
}

/// A dense Nyström matrix with the quadrature weights absorbed into its columns.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub kind: OperatorKind,
    pub entries: Mat<f64>,
}

impl OperatorMatrix {
    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        matvec(&self.entries, x)
    }
}

pub(crate) fn matvec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += a[(i, j)] * xj;
        }
    }
    out
}

#[inline]
fn kstar_kernel(x: Vec2, nu: Vec2, y: Vec2) -> f64 {
    let d = x - y;
    nu.dot(d) / (TAU * d.norm_sq())
}

fn check_far(b: &DiscreteBoundary, x: Vec2) -> Result<()> {
    if b.is_near(x, NEAR_FIELD_FACTOR) {
        let (k, _) = b.nearest_node(x);
        return Err(Error::NearBoundary {
            point: x,
            margin: NEAR_FIELD_FACTOR * b.weights[k],
        });
    }
    Ok(())
}

/// `S[φ](x)` by the trapezoid rule, for `x` away from the boundary.
pub fn single_layer_eval(b: &DiscreteBoundary, phi: &[f64], x: Vec2) -> Result<f64> {
    check_far(b, x)?;
    Ok(b.nodes
        .iter()
        .zip(&b.weights)
        .zip(phi)
        .map(|((y, w), p)| 0.25 * (x - *y).norm_sq().ln() / PI * p * w)
        .sum())
}

/// `∇S[φ](x)` by the trapezoid rule, for `x` away from the boundary.
pub fn single_layer_grad(b: &DiscreteBoundary, phi: &[f64], x: Vec2) -> Result<Vec2> {
    check_far(b, x)?;
    let mut g = Vec2::ZERO;
    for ((y, w), p) in b.nodes.iter().zip(&b.weights).zip(phi) {
        let d = x - *y;
        g += d * (p * w / (TAU * d.norm_sq()));
    }
    Ok(g)
}

/// Weights `R_j` of the periodic product rule
/// `∫₀^{2π} ln(4 sin²((t_i - τ)/2)) f(τ) dτ ≈ Σ_j R_{(i-j) mod N} f(τ_j)` for even `N`.
pub fn log_quadrature_weights(n: usize) -> Vec<f64> {
    assert!(n.is_multiple_of(2), "log quadrature needs an even node count");
    let half = n / 2;
    let h = TAU / n as f64;
    (0..n)
        .map(|d| {
            let s = d as f64 * h;
            let mut sum = 0.0;
            for m in 1..half {
                sum += (m as f64 * s).cos() / m as f64;
            }
            -(2.0 * PI / half as f64) * sum - PI / (half * half) as f64 * (half as f64 * s).cos()
        })
        .collect()
}

/// `S` restricted to its own smooth boundary.
pub fn single_layer_matrix_self(b: &DiscreteBoundary) -> Result<OperatorMatrix> {
    let speeds = b.speeds()?;
    let n = b.len();
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidInput(
            "single-layer self matrix needs an even node count".into(),
        ));
    }
    let r = log_quadrature_weights(n);
    let h = TAU / n as f64;
    let entries = Mat::from_fn(n, n, |i, j| {
        let d = (i + n - j) % n;
        let smooth = if i == j {
            speeds[i].ln()
        } else {
            let half_angle = 0.5 * d as f64 * h;
            b.nodes[i].distance(b.nodes[j]).ln() - (2.0 * half_angle.sin()).abs().ln()
        };
        (0.5 * r[d] + h * smooth) * speeds[j] / TAU
    });
    Ok(OperatorMatrix {
        kind: OperatorKind::SingleLayerSelf,
        entries,
    })
}

/// `S[φ]` on its own smooth boundary without storing the matrix.
pub fn apply_single_layer_self(b: &DiscreteBoundary, phi: &[f64]) -> Result<Vec<f64>> {
    let speeds = b.speeds()?;
    let n = b.len();
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidInput(
            "single-layer self operator needs an even node count".into(),
        ));
    }
    let r = log_quadrature_weights(n);
    let h = TAU / n as f64;
    let ln_sin: Vec<f64> = (0..n).map(|d| (2.0 * (0.5 * d as f64 * h).sin()).abs().ln()).collect();
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = (i + n - j) % n;
                    let smooth = if i == j {
                        speeds[i].ln()
                    } else {
                        b.nodes[i].distance(b.nodes[j]).ln() - ln_sin[d]
                    };
                    (0.5 * r[d] + h * smooth) * speeds[j] / TAU * phi[j]
                })
                .sum()
        })
        .collect())
}

fn kstar_self_entry(b: &DiscreteBoundary, i: usize, j: usize) -> f64 {
    if i == j {
        b.curvatures[i] / (2.0 * TAU) * b.weights[i]
    } else {
        kstar_kernel(b.nodes[i], b.normals[i], b.nodes[j]) * b.weights[j]
    }
}

fn check_distinct(b: &DiscreteBoundary) -> Result<()> {
    let n = b.len();
    for i in 0..n {
        let next = (i + 1) % n;
        if b.nodes[i] == b.nodes[next] {
            return Err(Error::InvalidInput(format!("coincident nodes {i} and {next}")));
        }
    }
    Ok(())
}

/// `K*` on its own boundary: curvature limit `κ/4π` on the diagonal.
pub fn kstar_matrix_self(b: &DiscreteBoundary) -> Result<OperatorMatrix> {
    check_distinct(b)?;
    let n = b.len();
    Ok(OperatorMatrix {
        kind: OperatorKind::KstarSelf,
        entries: Mat::from_fn(n, n, |i, j| kstar_self_entry(b, i, j)),
    })
}

/// `∂/∂ν_target S_source`, evaluated at the target nodes.
pub fn kstar_cross_matrix(target: &DiscreteBoundary, source: &DiscreteBoundary) -> Result<OperatorMatrix> {
    warn_if_unresolved(target, source);
    Ok(OperatorMatrix {
        kind: OperatorKind::KstarCross,
        entries: Mat::from_fn(target.len(), source.len(), |i, j| {
            kstar_kernel(target.nodes[i], target.normals[i], source.nodes[j]) * source.weights[j]
        }),
    })
}

fn warn_if_unresolved(target: &DiscreteBoundary, source: &DiscreteBoundary) {
    let mut worst = f64::INFINITY;
    for (x, wx) in target.nodes.iter().zip(&target.weights) {
        for (y, wy) in source.nodes.iter().zip(&source.weights) {
            worst = worst.min(x.distance(*y) / wx.max(*wy));
        }
    }
    if worst < 0.5 {
        log::warn!(
            "boundaries are closer than half a node spacing (ratio {worst:.3}); cross-kernel quadrature is under-resolved"
        );
    }
}

/// `K*[φ]` on a boundary without storing the matrix.
pub fn apply_kstar_self(b: &DiscreteBoundary, phi: &[f64]) -> Vec<f64> {
    (0..b.len())
        .map(|i| (0..b.len()).map(|j| kstar_self_entry(b, i, j) * phi[j]).sum())
        .collect()
}

/// `∂ν_target S_source[φ]` at the target nodes without storing the matrix.
pub fn apply_kstar_cross(target: &DiscreteBoundary, source: &DiscreteBoundary, phi: &[f64]) -> Vec<f64> {
    target
        .nodes
        .iter()
        .zip(&target.normals)
        .map(|(x, nu)| {
            source
                .nodes
                .iter()
                .zip(&source.weights)
                .zip(phi)
                .map(|((y, w), p)| kstar_kernel(*x, *nu, *y) * w * p)
                .sum()
        })
        .collect()
}

/// `S_source[φ]` at the target nodes, by the trapezoid rule.
pub fn apply_single_layer_cross(target: &DiscreteBoundary, source: &DiscreteBoundary, phi: &[f64]) -> Vec<f64> {
    target
        .nodes
        .iter()
        .map(|x| {
            source
                .nodes
                .iter()
                .zip(&source.weights)
                .zip(phi)
                .map(|((y, w), p)| 0.25 * (*x - *y).norm_sq().ln() / PI * w * p)
                .sum()
        })
        .collect()
}

/// The block matrix of `K*` operators over several boundaries (no shift).
pub fn kstar_block(boundaries: &[&DiscreteBoundary]) -> Result<OperatorMatrix> {
    Ok(OperatorMatrix {
        kind: OperatorKind::Block,
        entries: shifted_block_entries(boundaries, 0.0, false)?,
    })
}

/// `-½ I + K*` over several boundaries, plus the rank-one term `1_j w_jᵀ / |∂D_j|` on each
/// diagonal block.
///
/// `-½ I + K*` annihilates each boundary's equilibrium density, so the plain matrix is
/// singular up to discretization error. The rank-one term vanishes on mean-zero densities
/// and removes that null space, making the mean-zero solution the unique solution.
pub fn shifted_system(boundaries: &[&DiscreteBoundary]) -> Result<OperatorMatrix> {
    Ok(OperatorMatrix {
        kind: OperatorKind::Block,
        entries: shifted_block_entries(boundaries, -0.5, true)?,
    })
}

fn shifted_block_entries(boundaries: &[&DiscreteBoundary], shift: f64, deflate: bool) -> Result<Mat<f64>> {
    for b in boundaries {
        check_distinct(b)?;
    }
    for (s, bs) in boundaries.iter().enumerate() {
        for bt in boundaries.iter().skip(s + 1) {
            warn_if_unresolved(bt, bs);
        }
    }
    let offsets: Vec<usize> = boundaries
        .iter()
        .scan(0, |acc, b| {
            let start = *acc;
            *acc += b.len();
            Some(start)
        })
        .collect();
    let total: usize = boundaries.iter().map(|b| b.len()).sum();
    let mut m = Mat::<f64>::zeros(total, total);
    for (t, bt) in boundaries.iter().enumerate() {
        for (s, bs) in boundaries.iter().enumerate() {
            let (r0, c0) = (offsets[t], offsets[s]);
            for j in 0..bs.len() {
                for i in 0..bt.len() {
                    m[(r0 + i, c0 + j)] = if t == s {
                        kstar_self_entry(bt, i, j)
                    } else {
                        kstar_kernel(bt.nodes[i], bt.normals[i], bs.nodes[j]) * bs.weights[j]
                    };
                }
            }
        }
    }
    for k in 0..total {
        m[(k, k)] += shift;
    }
    if deflate {
        for (t, b) in boundaries.iter().enumerate() {
            let o = offsets[t];
            let perimeter = b.perimeter();
            for j in 0..b.len() {
                let wj = b.weights[j] / perimeter;
                for i in 0..b.len() {
                    m[(o + i, o + j)] += wj;
                }
            }
        }
    }
    Ok(m)
}

/// Result of a dense direct solve.
#[derive(Clone, Debug)]
pub struct DenseSolution {
    pub x: Vec<f64>,
    /// `‖Ax - b‖ / ‖b‖` (absolute when `b = 0`).
    pub residual: f64,
    /// `min |U_ii| / max |U_ii|` of the LU factorization.
    pub pivot_ratio: f64,
}

/// LU with partial pivoting.
pub fn solve_dense(a: &Mat<f64>, rhs: &[f64]) -> Result<DenseSolution> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let lu = a.partial_piv_lu();
    let u = lu.U();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for k in 0..n {
        let p = u[(k, k)].abs();
        lo = lo.min(p);
        hi = hi.max(p);
    }
    let pivot_ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(pivot_ratio >= SINGULAR_PIVOT_RATIO) {
        return Err(Error::SingularMatrix { pivot_ratio });
    }
    let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
    let sol = lu.solve(&b);
    let x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    let ax = matvec(a, &x);
    let num = ax.iter().zip(rhs).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let den = rhs.iter().map(|q| q * q).sum::<f64>().sqrt();
    let residual = if den > 0.0 { num / den } else { num };
    Ok(DenseSolution {
        x,
        residual,
        pivot_ratio,
    })
}

/// Singular values (descending) and the 2-norm condition number.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub singular_values: Vec<f64>,
    pub condition: f64,
}

pub fn spectrum(a: &Mat<f64>) -> Result<Spectrum> {
    let mut s = a.singular_values().map_err(|_| Error::NoConvergence {
        what: "singular value decomposition",
        iterations: 0,
        residual: f64::NAN,
    })?;
    s.sort_by(|x, y| y.total_cmp(x));
    let condition = match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    };
    Ok(Spectrum {
        singular_values: s,
        condition,
    })
}
