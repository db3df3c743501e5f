//! Post-processing of solved problems: closest-point flux, error metrics, the `ε^{-1/2}`
//! blow-up fit, conditioning, field grids and contour lines.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DiscreteBoundary, Vec2};
use crate::layer_potential::{shifted_system, spectrum};
use crate::solvers::{Discretization, Solution};

/// Ten significant digits, as used in every exported table.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.9e}")
    } else {
        format!("{v}")
    }
}

/// Value of nodal data `f` at the boundary point `z`: the node value if a node sits on `z`,
/// otherwise linear interpolation between the two nodes around it.
pub fn value_at_point(b: &DiscreteBoundary, f: &[f64], z: Vec2) -> f64 {
    let n = b.len();
    let (k, d) = b.nearest_node(z);
    if d <= 1e-9 * b.weights[k] {
        return f[k];
    }
    let (prev, next) = ((k + n - 1) % n, (k + 1) % n);
    let j = if b.nodes[prev].distance(z) < b.nodes[next].distance(z) {
        prev
    } else {
        next
    };
    let (dk, dj) = (d, b.nodes[j].distance(z));
    (f[k] * dj + f[j] * dk) / (dk + dj)
}

/// `∂u/∂ν|₊` at `z1` on `∂D1`.
pub fn flux_at_closest_point(sol: &Solution) -> f64 {
    value_at_point(&sol.boundaries[0], &sol.boundary_flux(0), sol.geometry.z1)
}

/// Samples of periodic nodal data (equispaced in parameter) moved onto another equispaced
/// grid with the same starting parameter: exact subsampling when the node counts divide,
/// trigonometric interpolation otherwise.
pub fn resample_periodic(f: &[f64], n_out: usize) -> Vec<f64> {
    let m = f.len();
    if m == n_out {
        return f.to_vec();
    }
    if n_out > 0 && m.is_multiple_of(n_out) {
        let step = m / n_out;
        return (0..n_out).map(|k| f[k * step]).collect();
    }
    let half = m / 2;
    let coeffs: Vec<(f64, f64)> = (0..=half)
        .map(|k| {
            let (mut a, mut b) = (0.0, 0.0);
            for (j, v) in f.iter().enumerate() {
                let t = TAU * (k * j) as f64 / m as f64;
                a += v * t.cos();
                b += v * t.sin();
            }
            (a / m as f64, b / m as f64)
        })
        .collect();
    (0..n_out)
        .map(|i| {
            let t = TAU * i as f64 / n_out as f64;
            let mut v = coeffs[0].0;
            for (k, (a, b)) in coeffs.iter().enumerate().skip(1) {
                let (s, c) = (k as f64 * t).sin_cos();
                let factor = if m.is_multiple_of(2) && k == half { 1.0 } else { 2.0 };
                v += factor * (a * c + b * s);
            }
            v
        })
        .collect()
}

/// `Σ_j ‖f_j - g_j‖ / (2‖g_j‖)` in `L²(∂D_j)`, using the nodes of `boundaries`.
pub fn symmetrized_relative_l2(
    boundaries: [&DiscreteBoundary; 2],
    candidate: [&[f64]; 2],
    reference: [&[f64]; 2],
) -> f64 {
    (0..2)
        .map(|j| {
            let b = boundaries[j];
            let g = resample_periodic(reference[j], b.len());
            let diff: Vec<f64> = candidate[j].iter().zip(&g).map(|(x, y)| (x - y) * (x - y)).collect();
            let norm: Vec<f64> = g.iter().map(|y| y * y).collect();
            let (num, den) = (b.integrate(&diff).sqrt(), b.integrate(&norm).sqrt());
            if den == 0.0 {
                if num == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                num / (2.0 * den)
            }
        })
        .sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorReport {
    pub n: usize,
    pub reference_n: usize,
    /// `|f(z1) - f*(z1)| / |f*(z1)|`; `None` when the reference flux vanishes at `z1`.
    pub pointwise_z1: Option<f64>,
    pub flux_l2: f64,
    pub density_l2: f64,
}

pub fn error_report(candidate: &Solution, reference: &Solution) -> Result<ErrorReport> {
    let (n, m) = (candidate.n(), reference.n());
    if m % 2 != 0 || n > m {
        return Err(Error::InvalidInput(format!(
            "reference resolution {m} must be at least the candidate resolution {n}"
        )));
    }
    let (fc, fr) = (
        [candidate.boundary_flux(0), candidate.boundary_flux(1)],
        [reference.boundary_flux(0), reference.boundary_flux(1)],
    );
    let zc = value_at_point(&candidate.boundaries[0], &fc[0], candidate.geometry.z1);
    let zr = value_at_point(&reference.boundaries[0], &fr[0], reference.geometry.z1);
    let pointwise_z1 = if zr != 0.0 {
        Some(((zc - zr) / zr).abs())
    } else {
        log::warn!("reference flux vanishes at z1; pointwise error undefined");
        None
    };
    let bs = [&candidate.boundaries[0], &candidate.boundaries[1]];
    let flux_l2 = symmetrized_relative_l2(bs, [&fc[0], &fc[1]], [&fr[0], &fr[1]]);
    let density_l2 = symmetrized_relative_l2(
        bs,
        [&candidate.densities[0].values, &candidate.densities[1].values],
        [&reference.densities[0].values, &reference.densities[1].values],
    );
    Ok(ErrorReport {
        n,
        reference_n: m,
        pointwise_z1,
        flux_l2,
        density_l2,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedExponentFit {
    pub c: f64,
    pub c0: f64,
    pub residual_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeExponentFit {
    pub c: f64,
    pub p: f64,
    pub c0: f64,
    pub residual_norm: f64,
}

/// Fits of `f(ε) = c ε^{-1/2} + c0` and `f(ε) = c ε^p + c0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupFit {
    pub model: String,
    pub fixed: FixedExponentFit,
    pub free: FreeExponentFit,
    pub eps: Vec<f64>,
    pub flux: Vec<f64>,
}

/// Least squares in the basis `{ε^p, 1}`.
fn linear_fit(eps: &[f64], f: &[f64], p: f64) -> Result<(f64, f64, f64)> {
    let x: Vec<f64> = eps.iter().map(|e| e.powf(p)).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = f.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(f).map(|(v, y)| (v - mx) * (y - my)).sum();
    let scale: f64 = x.iter().map(|v| v * v).sum();
    if !(sxx > 1e-24 * scale) {
        return Err(Error::RankDeficient);
    }
    let c = sxy / sxx;
    let c0 = my - c * mx;
    let res = x
        .iter()
        .zip(f)
        .map(|(v, y)| (c * v + c0 - y).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok((c, c0, res))
}

pub fn fit_blowup(eps: &[f64], flux: &[f64]) -> Result<BlowupFit> {
    if eps.len() != flux.len() {
        return Err(Error::DimensionMismatch {
            expected: eps.len(),
            got: flux.len(),
        });
    }
    if eps.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "blow-up fit needs at least 4 points, got {}",
            eps.len()
        )));
    }
    if eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidInput("gap values must be positive".into()));
    }
    let (lo, hi) = eps
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), e| (a.min(*e), b.max(*e)));
    if hi == lo {
        return Err(Error::RankDeficient);
    }
    if hi < 4.0 * lo {
        return Err(Error::InvalidInput(format!(
            "gap values must span at least a factor 4 (got {lo}..{hi})"
        )));
    }
    let (c, c0, res) = linear_fit(eps, flux, -0.5)?;

    let objective = |p: f64| linear_fit(eps, flux, p).map(|r| r.2).unwrap_or(f64::INFINITY);
    let mut best = (-0.5, objective(-0.5));
    for k in 0..=145 {
        let p = -1.5 + 0.01 * k as f64;
        let r = objective(p);
        if r < best.1 {
            best = (p, r);
        }
    }
    let (mut a, mut b) = (best.0 - 0.01, (best.0 + 0.01).min(-1e-3));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    while b - a > 1e-10 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = objective(x2);
        }
    }
    let p = 0.5 * (a + b);
    let (pc, pc0, pres) = linear_fit(eps, flux, p)?;
    let free = if pres <= best.1 {
        FreeExponentFit {
            c: pc,
            p,
            c0: pc0,
            residual_norm: pres,
        }
    } else {
        let (bc, bc0, bres) = linear_fit(eps, flux, best.0)?;
        FreeExponentFit {
            c: bc,
            p: best.0,
            c0: bc0,
            residual_norm: bres,
        }
    };
    Ok(BlowupFit {
        model: "c*eps^p + c0".into(),
        fixed: FixedExponentFit {
            c,
            c0,
            residual_norm: res,
        },
        free,
        eps: eps.to_vec(),
        flux: flux.to_vec(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub eps: f64,
    pub n: usize,
    pub condition: f64,
    pub singular_values: Vec<f64>,
}

/// Singular values and condition number of the direct block system.
pub fn conditioning(disc: &Discretization) -> Result<ConditionReport> {
    let [b1, b2] = &disc.boundaries;
    let a = shifted_system(&[b1, b2])?;
    let s = spectrum(&a.entries)?;
    Ok(ConditionReport {
        eps: disc.eps(),
        n: disc.n,
        condition: s.condition,
        singular_values: s.singular_values,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mask {
    Exterior,
    Inclusion1,
    Inclusion2,
    NearBoundary,
}

impl Mask {
    pub fn name(self) -> &'static str {
        match self {
            Mask::Exterior => "exterior",
            Mask::Inclusion1 => "inclusion1",
            Mask::Inclusion2 => "inclusion2",
            Mask::NearBoundary => "near_boundary",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

/// `u` sampled on a regular grid, row-major with `x` fastest.
#[derive(Clone, Debug)]
pub struct FieldGrid {
    pub bbox: BoundingBox,
    pub nx: usize,
    pub ny: usize,
    pub mask: Vec<Mask>,
    /// `None` exactly on near-boundary cells.
    pub values: Vec<Option<f64>>,
}

impl FieldGrid {
    pub fn point(&self, i: usize, j: usize) -> Vec2 {
        let b = &self.bbox;
        Vec2::new(
            b.xmin + (b.xmax - b.xmin) * i as f64 / (self.nx - 1) as f64,
            b.ymin + (b.ymax - b.ymin) * j as f64 / (self.ny - 1) as f64,
        )
    }

    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        self.values[j * self.nx + i]
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        let mut it = self.values.iter().flatten();
        let first = *it.next()?;
        Some(it.fold((first, first), |(a, b), v| (a.min(*v), b.max(*v))))
    }
}

pub fn field_grid(sol: &Solution, bbox: BoundingBox, nx: usize, ny: usize) -> Result<FieldGrid> {
    if nx < 16 || ny < 16 {
        return Err(Error::InvalidInput(format!(
            "grid resolution must be at least 16×16, got {nx}×{ny}"
        )));
    }
    if !(bbox.xmax > bbox.xmin && bbox.ymax > bbox.ymin) {
        return Err(Error::InvalidInput("empty bounding box".into()));
    }
    let mut grid = FieldGrid {
        bbox,
        nx,
        ny,
        mask: Vec::new(),
        values: Vec::new(),
    };
    let cells: Vec<(Mask, Option<f64>)> = (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let x = grid.point(k % nx, k / nx);
            if sol.is_near_boundary(x) {
                return Ok((Mask::NearBoundary, None));
            }
            match sol.inclusion_containing(x) {
                Some(0) => Ok((Mask::Inclusion1, Some(sol.lambda[0]))),
                Some(_) => Ok((Mask::Inclusion2, Some(sol.lambda[1]))),
                None => Ok((Mask::Exterior, Some(sol.u_eval(x)?))),
            }
        })
        .collect::<Result<_>>()?;
    (grid.mask, grid.values) = cells.into_iter().unzip();
    Ok(grid)
}

#[derive(Clone, Debug, Serialize)]
pub struct ContourLine {
    pub level: f64,
    pub polylines: Vec<Vec<Vec2>>,
}

/// Levels `min + k (max - min)/(n + 1)`, `k = 1..n`, over the valued cells.
pub fn contour_levels(grid: &FieldGrid, n_levels: usize) -> Vec<f64> {
    match grid.range() {
        Some((lo, hi)) if hi - lo > 1e-12 * hi.abs().max(lo.abs()).max(1e-300) => (1..=n_levels)
            .map(|k| lo + (hi - lo) * k as f64 / (n_levels + 1) as f64)
            .collect(),
        _ => Vec::new(),
    }
}

/// Grid edge identifier: horizontal edges `(i, j, 0)` from `(i, j)` to `(i+1, j)`, vertical
/// edges `(i, j, 1)` from `(i, j)` to `(i, j+1)`.
type Edge = (usize, usize, u8);

fn marching_squares(grid: &FieldGrid, level: f64) -> Vec<Vec<Vec2>> {
    let crossing = |e: Edge| -> Vec2 {
        let (i, j, d) = e;
        let (i2, j2) = if d == 0 { (i + 1, j) } else { (i, j + 1) };
        let (a, b) = (grid.value(i, j).unwrap(), grid.value(i2, j2).unwrap());
        let t = (level - a) / (b - a);
        let (p, q) = (grid.point(i, j), grid.point(i2, j2));
        p + (q - p) * t
    };
    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx - 1 {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let v: Vec<f64> = match corners
                .iter()
                .map(|&(a, b)| grid.value(a, b))
                .collect::<Option<Vec<_>>>()
            {
                Some(v) => v,
                None => continue,
            };
            // cell edges in order bottom, right, top, left
            let edges: [Edge; 4] = [(i, j, 0), (i + 1, j, 1), (i, j + 1, 0), (i, j, 1)];
            let above: Vec<bool> = v.iter().map(|x| *x > level).collect();
            let cut: Vec<usize> = (0..4).filter(|&e| above[e] != above[(e + 1) % 4]).collect();
            match cut.len() {
                2 => segments.push((edges[cut[0]], edges[cut[1]])),
                4 => {
                    let centre = 0.25 * v.iter().sum::<f64>();
                    if (centre > level) == above[0] {
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    } else {
                        segments.push((edges[0], edges[3]));
                        segments.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }
    // join segments that share an edge crossing into polylines
    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        by_edge.entry(*a).or_default().push(k);
        by_edge.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    let next_from = |edge: Edge, used: &[bool]| by_edge[&edge].iter().copied().find(|&s| !used[s]);
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut chain = std::collections::VecDeque::from([a, b]);
        for forward in [true, false] {
            loop {
                let end = if forward {
                    *chain.back().unwrap()
                } else {
                    *chain.front().unwrap()
                };
                let Some(s) = next_from(end, &used) else { break };
                used[s] = true;
                let (p, q) = segments[s];
                let other = if p == end { q } else { p };
                if forward {
                    chain.push_back(other);
                } else {
                    chain.push_front(other);
                }
            }
        }
        lines.push(chain.into_iter().map(crossing).collect());
    }
    lines
}

/// Contour polylines at uniformly spaced levels; empty for a constant field.
pub fn export_level_curves(grid: &FieldGrid, n_levels: usize) -> Vec<ContourLine> {
    contour_levels(grid, n_levels)
        .into_iter()
        .map(|level| ContourLine {
            level,
            polylines: marching_squares(grid, level),
        })
        .collect()
}

/// `x,y,mask,u`; the `u` column is empty on masked cells.
pub fn write_grid_csv(grid: &FieldGrid, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "x,y,mask,u")?;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let p = grid.point(i, j);
            let k = j * grid.nx + i;
            let u = grid.values[k].map(format_number).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{}",
                format_number(p.x),
                format_number(p.y),
                grid.mask[k].name(),
                u
            )?;
        }
    }
    Ok(())
}

/// `level,segment,x,y` with one row per polyline vertex.
pub fn write_contours_csv(lines: &[ContourLine], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "level,segment,x,y")?;
    let mut id = 0usize;
    for line in lines {
        for poly in &line.polylines {
            for p in poly {
                writeln!(
                    w,
                    "{},{},{},{}",
                    format_number(line.level),
                    id,
                    format_number(p.x),
                    format_number(p.y)
                )?;
            }
            id += 1;
        }
    }
    Ok(())
}
