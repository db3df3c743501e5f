//! The stress concentration factor `α0` from the touching problem.
//!
//! The two inclusions are moved together until they touch at the origin and joined by the
//! square `[-ρ, ρ]²`, giving a dumbbell `D_ρ`. With `u_ρ = H + S[ψ]` constant on `∂D_ρ`,
//! the density solves `(-½ I + K*)[ψ] = -∂H/∂ν` and equals `∂u_ρ/∂ν|₊`. The flux of `u_ρ`
//! through the part of `∂D1` outside `[-2ρ, 2ρ]²` converges to `α0` exponentially in `1/ρ`.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryLayout, CanonicalPair, DiscreteBoundary, ParametricCurve, Piece, RigidMotion, Vec2};
use crate::layer_potential::{shifted_system, solve_dense, DensityVector};
use crate::solvers::AppliedField;

const BISECTION_TOL: f64 = 1e-12;
const CROSSING_SCAN: usize = 4096;

/// Two inclusions touching at the origin, with the contact parameters.
#[derive(Clone, Debug)]
pub struct TouchingPair {
    pub curve1: ParametricCurve,
    pub curve2: ParametricCurve,
    pub theta1: f64,
    pub theta2: f64,
}

/// Shifts a canonical pair by `±ε/2` along `x1` so that the closest points meet at the origin.
pub fn build_touching_pair(pair: &CanonicalPair) -> TouchingPair {
    let half = 0.5 * pair.eps;
    TouchingPair {
        curve1: pair.curve1.transformed(&RigidMotion::translation(Vec2::new(half, 0.0))),
        curve2: pair
            .curve2
            .transformed(&RigidMotion::translation(Vec2::new(-half, 0.0))),
        theta1: pair.theta1,
        theta2: pair.theta2,
    }
}

/// The discretized dumbbell boundary.
///
/// Node order: arc of `∂D1` (N nodes), bottom bridge segment (N/16), arc of `∂D2` (N),
/// top bridge segment (N/16).
#[derive(Clone, Debug)]
pub struct DumbbellBoundary {
    pub boundary: DiscreteBoundary,
    pub rho: f64,
    pub n: usize,
    /// Parameters where `∂D1` meets `x2 = ρ` and `x2 = -ρ` (retained arc runs top → bottom).
    pub theta1_top: f64,
    pub theta1_bottom: f64,
    /// Parameters where `∂D2` meets `x2 = -ρ` and `x2 = ρ` (retained arc runs bottom → top).
    pub theta2_bottom: f64,
    pub theta2_top: f64,
    /// Corners in loop order: arc 1 start, arc 1 end, arc 2 start, arc 2 end.
    pub corners: [Vec2; 4],
}

impl DumbbellBoundary {
    pub fn pieces(&self) -> &[Piece] {
        self.boundary.pieces.as_deref().unwrap_or(&[])
    }
}

fn count_crossings(c: &ParametricCurve, level: f64) -> usize {
    let m = CROSSING_SCAN;
    let f = |k: usize| c.point(TAU * k as f64 / m as f64).y - level;
    (0..m).filter(|&k| (f(k) > 0.0) != (f(k + 1) > 0.0)).count()
}

/// First parameter after (`dir = 1`) or before (`dir = -1`) `start` where `x2 = level`.
fn crossing(c: &ParametricCurve, start: f64, level: f64, dir: f64, rho: f64) -> Result<f64> {
    let h = TAU / CROSSING_SCAN as f64;
    let g = |t: f64| c.point(t).y - level;
    let g0 = g(start);
    let mut prev = start;
    for k in 1..=CROSSING_SCAN {
        let t = start + dir * k as f64 * h;
        if (g(t) > 0.0) != (g0 > 0.0) {
            let (mut a, mut b) = (prev, t);
            while (b - a).abs() > BISECTION_TOL {
                let m = 0.5 * (a + b);
                if (g(m) > 0.0) == (g(a) > 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Ok(0.5 * (a + b));
        }
        prev = t;
    }
    Err(Error::RhoTooLarge {
        rho,
        reason: format!("the curve never reaches x2 = {level}"),
    })
}

fn push_arc(b: &mut DiscreteBoundary, c: &ParametricCurve, from: f64, to: f64, n: usize, piece: Piece) -> Result<()> {
    let h = (to - from) / n as f64;
    for k in 0..n {
        let t = from + (k as f64 + 0.5) * h;
        let p = c.eval(t);
        let speed = p.d1.norm();
        if !(speed > 1e-12) {
            return Err(Error::DegenerateCurve { theta: t, speed });
        }
        b.nodes.push(p.pos);
        b.normals.push(p.normal());
        b.weights.push(speed * h);
        b.curvatures.push(p.curvature());
        b.params.push(t);
        b.pieces.as_mut().unwrap().push(piece);
    }
    Ok(())
}

fn push_segment(b: &mut DiscreteBoundary, from: Vec2, to: Vec2, n: usize, normal: Vec2, piece: Piece) {
    let w = from.distance(to) / n as f64;
    for k in 0..n {
        let s = (k as f64 + 0.5) / n as f64;
        b.nodes.push(from + (to - from) * s);
        b.normals.push(normal);
        b.weights.push(w);
        b.curvatures.push(0.0);
        b.params.push(s);
        b.pieces.as_mut().unwrap().push(piece);
    }
}

/// Builds `∂D_ρ` with `N` midpoint nodes per retained arc and `N/16` per bridge segment.
pub fn build_dumbbell(tp: &TouchingPair, rho: f64, n: usize) -> Result<DumbbellBoundary> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidInput(format!("rho must be positive, got {rho}")));
    }
    if n == 0 || !n.is_multiple_of(16) {
        return Err(Error::InvalidInput(format!(
            "dumbbell N must be a positive multiple of 16, got {n}"
        )));
    }
    for (j, c) in [&tp.curve1, &tp.curve2].into_iter().enumerate() {
        for level in [rho, -rho] {
            let k = count_crossings(c, level);
            if k != 2 {
                return Err(Error::RhoTooLarge {
                    rho,
                    reason: format!("inclusion {} crosses x2 = {level} {k} times", j + 1),
                });
            }
        }
    }
    let t1_top = crossing(&tp.curve1, tp.theta1, rho, 1.0, rho)?;
    let t1_bot = crossing(&tp.curve1, tp.theta1, -rho, -1.0, rho)? + TAU;
    let t2_bot = crossing(&tp.curve2, tp.theta2, -rho, 1.0, rho)?;
    let t2_top = crossing(&tp.curve2, tp.theta2, rho, -1.0, rho)? + TAU;
    let corners = [
        tp.curve1.point(t1_top),
        tp.curve1.point(t1_bot),
        tp.curve2.point(t2_bot),
        tp.curve2.point(t2_top),
    ];
    if corners.iter().any(|p| p.x.abs() >= rho) {
        return Err(Error::RhoTooLarge {
            rho,
            reason: "the bridge square does not reach both inclusions".into(),
        });
    }
    if corners[1].x >= corners[2].x || corners[0].x >= corners[3].x {
        return Err(Error::RhoTooLarge {
            rho,
            reason: "bridge segments have non-positive length".into(),
        });
    }
    let m = n / 16;
    let mut b = DiscreteBoundary {
        nodes: Vec::with_capacity(2 * n + 2 * m),
        normals: Vec::new(),
        weights: Vec::new(),
        curvatures: Vec::new(),
        params: Vec::new(),
        pieces: Some(Vec::new()),
        layout: BoundaryLayout::Piecewise,
    };
    push_arc(&mut b, &tp.curve1, t1_top, t1_bot, n, Piece::Arc1)?;
    push_segment(
        &mut b,
        corners[1],
        corners[2],
        m,
        Vec2::new(0.0, -1.0),
        Piece::SegBottom,
    );
    push_arc(&mut b, &tp.curve2, t2_bot, t2_top, n, Piece::Arc2)?;
    push_segment(&mut b, corners[3], corners[0], m, Vec2::new(0.0, 1.0), Piece::SegTop);
    Ok(DumbbellBoundary {
        boundary: b,
        rho,
        n,
        theta1_top: t1_top,
        theta1_bottom: t1_bot,
        theta2_bottom: t2_bot,
        theta2_top: t2_top,
        corners,
    })
}

/// Solution of the touching problem on a dumbbell.
#[derive(Clone, Debug)]
pub struct TouchingSolution {
    /// `ψ = ∂u_ρ/∂ν|₊` at the dumbbell nodes.
    pub psi: DensityVector,
    pub residual: f64,
    pub mean_residual: f64,
}

pub fn solve_touching(db: &DumbbellBoundary, h: &AppliedField) -> Result<TouchingSolution> {
    let b = &db.boundary;
    let rhs: Vec<f64> = b
        .nodes
        .iter()
        .zip(&b.normals)
        .map(|(x, nu)| -h.grad(*x).dot(*nu))
        .collect();
    let a = shifted_system(&[b])?;
    let sol = solve_dense(&a.entries, &rhs)?;
    let psi = DensityVector::new(sol.x, 0);
    Ok(TouchingSolution {
        mean_residual: psi.mean_residual(b),
        psi,
        residual: sol.residual,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaEstimate {
    /// `α_ρ`, oriented so that `u ≈ α q` near the gap (positive for `H = x1` pulling across it).
    pub value: f64,
    pub rho: f64,
    pub n: usize,
    /// `∫ ψ ds` over the retained nodes of `∂D1`, as computed.
    pub flux_d1: f64,
    /// `∫ ψ ds` over the nodes of `∂D2` outside `[-2ρ, 2ρ]²`.
    pub flux_d2: f64,
    pub residual: f64,
    pub mean_residual: f64,
    pub retained_nodes: usize,
}

fn outside_square(x: Vec2, half: f64) -> bool {
    x.x.abs().max(x.y.abs()) > half
}

/// Flux of `u_ρ` through `∂D1` outside `[-2ρ, 2ρ]²`.
///
/// The outward normal of `∂D1` there points away from the gap, so the raw flux is `-α`.
pub fn alpha_rho(sol: &TouchingSolution, db: &DumbbellBoundary) -> Result<AlphaEstimate> {
    let b = &db.boundary;
    let half = 2.0 * db.rho;
    let (mut f1, mut f2, mut retained) = (0.0, 0.0, 0usize);
    for (k, piece) in db.pieces().iter().enumerate() {
        if !outside_square(b.nodes[k], half) {
            continue;
        }
        let v = sol.psi.values[k] * b.weights[k];
        match piece {
            Piece::Arc1 => {
                f1 += v;
                retained += 1;
            }
            Piece::Arc2 => f2 += v,
            _ => {}
        }
    }
    if retained == 0 {
        return Err(Error::RhoTooLarge {
            rho: db.rho,
            reason: "no node of the first inclusion lies outside [-2ρ, 2ρ]²".into(),
        });
    }
    Ok(AlphaEstimate {
        value: -f1,
        rho: db.rho,
        n: db.n,
        flux_d1: f1,
        flux_d2: f2,
        residual: sol.residual,
        mean_residual: sol.mean_residual,
        retained_nodes: retained,
    })
}

/// Touching pipeline for one `(ρ, N)`.
pub fn compute_alpha(tp: &TouchingPair, h: &AppliedField, rho: f64, n: usize) -> Result<AlphaEstimate> {
    let db = build_dumbbell(tp, rho, n)?;
    alpha_rho(&solve_touching(&db, h)?, &db)
}

/// The closed-form factor for two disks touching with field gradient `g` at the contact.
pub fn disk_alpha(r1: f64, r2: f64, normal_gradient: f64) -> f64 {
    2.0 * TAU * r1 * r2 / (r1 + r2) * normal_gradient
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaRow {
    pub rho: f64,
    pub n: usize,
    pub alpha: f64,
    pub rel_err: f64,
    pub log10_rel_err: f64,
}

/// `α_ρ` on every `(ρ, N)` cell, compared against the finest cell (largest N, then smallest ρ).
pub fn alpha_convergence_study(
    tp: &TouchingPair,
    h: &AppliedField,
    rhos: &[f64],
    ns: &[usize],
) -> Result<Vec<AlphaRow>> {
    if rhos.is_empty() || ns.is_empty() {
        return Err(Error::InvalidInput(
            "convergence study needs at least one ρ and one N".into(),
        ));
    }
    let cells: Vec<(f64, usize)> = rhos.iter().flat_map(|&r| ns.iter().map(move |&n| (r, n))).collect();
    let alphas = cells
        .par_iter()
        .map(|&(r, n)| compute_alpha(tp, h, r, n).map(|a| a.value))
        .collect::<Result<Vec<_>>>()?;
    let finest = (0..cells.len())
        .max_by(|&i, &j| cells[i].1.cmp(&cells[j].1).then(cells[j].0.total_cmp(&cells[i].0)))
        .unwrap();
    let reference = alphas[finest];
    Ok(cells
        .iter()
        .zip(&alphas)
        .map(|(&(rho, n), &alpha)| {
            let rel_err = if reference != 0.0 {
                ((alpha - reference) / reference).abs()
            } else {
                (alpha - reference).abs()
            };
            AlphaRow {
                rho,
                n,
                alpha,
                rel_err,
                log10_rel_err: rel_err.log10(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{canonical_frame, closest_points, presets};
    use approx::assert_abs_diff_eq;

    fn touching(curves: (ParametricCurve, ParametricCurve)) -> TouchingPair {
        build_touching_pair(&canonical_frame(&curves.0, &curves.1).unwrap())
    }

    fn x1() -> AppliedField {
        AppliedField::parse("x1").unwrap()
    }

    #[test]
    fn touching_pair_closes_the_gap() {
        let tp = touching(presets::ellipses(0.01));
        assert!(tp.curve1.point(tp.theta1).norm() < 1e-12);
        assert!(tp.curve2.point(tp.theta2).norm() < 1e-12);
        let cp = closest_points(&tp.curve1, &tp.curve2).unwrap();
        assert!(cp.eps < 1e-9);

        let d = touching(presets::disks(1.0, 1.0, 0.01));
        assert!(d.curve1.point(std::f64::consts::PI).distance(Vec2::new(-2.0, 0.0)) < 1e-12);
    }

    #[test]
    fn dumbbell_of_unit_disks() {
        let tp = touching(presets::disks(1.0, 1.0, 0.01));
        let rho = 0.1;
        let db = build_dumbbell(&tp, rho, 256).unwrap();
        assert_eq!(db.boundary.len(), 544);
        // (x1 ± 1)² + ρ² = 1
        let x = 1.0 - (1.0f64 - rho * rho).sqrt();
        assert_abs_diff_eq!(x, 0.0050125628933800, epsilon = 1e-15);
        let expected = [
            Vec2::new(-x, rho),
            Vec2::new(-x, -rho),
            Vec2::new(x, -rho),
            Vec2::new(x, rho),
        ];
        for (c, e) in db.corners.iter().zip(expected) {
            assert!(c.distance(e) < 1e-11, "{c:?} {e:?}");
        }
    }

    #[test]
    fn dumbbell_is_a_closed_loop() {
        let tp = touching(presets::ellipses(0.01));
        let db = build_dumbbell(&tp, 0.05, 128).unwrap();
        let b = &db.boundary;
        let pieces = db.pieces();
        // head-to-tail: piece ends coincide with the corners
        let ends = [
            (tp.curve1.point(db.theta1_top), db.corners[0]),
            (tp.curve1.point(db.theta1_bottom), db.corners[1]),
            (tp.curve2.point(db.theta2_bottom), db.corners[2]),
            (tp.curve2.point(db.theta2_top), db.corners[3]),
        ];
        for (a, c) in ends {
            assert!(a.distance(c) < 1e-10);
        }
        for (k, p) in pieces.iter().enumerate() {
            let x = b.nodes[k];
            match p {
                Piece::Arc1 | Piece::Arc2 => assert!(x.x.abs() >= db.rho || x.y.abs() >= db.rho),
                Piece::SegTop => assert_abs_diff_eq!(x.y, db.rho, epsilon = 1e-10),
                Piece::SegBottom => assert_abs_diff_eq!(x.y, -db.rho, epsilon = 1e-10),
            }
            for c in db.corners {
                assert!(x.distance(c) >= 0.49 * b.weights[k]);
            }
        }
        // positively oriented, simple polygon
        let area: f64 = (0..b.len())
            .map(|k| b.nodes[k].cross(b.nodes[(k + 1) % b.len()]))
            .sum::<f64>()
            / 2.0;
        assert!(area > 0.0);
        assert!(b.contains(Vec2::new(0.0, 0.0)));
        assert!(b.contains(Vec2::new(-2.0, 0.0)));
        assert!(!b.contains(Vec2::new(0.0, 2.0 * db.rho)));
    }

    #[test]
    fn dumbbell_rejects_bad_input() {
        let tp = touching(presets::disks(1.0, 1.0, 0.01));
        assert!(build_dumbbell(&tp, 0.1, 100).is_err());
        assert!(matches!(build_dumbbell(&tp, 1.5, 64), Err(Error::RhoTooLarge { .. })));
        let ellipses = touching(presets::ellipses(0.01));
        assert!(matches!(
            build_dumbbell(&ellipses, 0.9, 64),
            Err(Error::RhoTooLarge { .. })
        ));
        assert!(build_dumbbell(&tp, -0.1, 64).is_err());
    }

    #[test]
    fn constant_field_gives_zero_density() {
        let tp = touching(presets::disks(1.0, 1.0, 0.0));
        let db = build_dumbbell(&tp, 0.1, 64).unwrap();
        let s = solve_touching(&db, &AppliedField::parse("3").unwrap()).unwrap();
        assert!(s.psi.sup_norm() == 0.0);
    }

    #[test]
    fn disks_match_closed_form() {
        for (r1, r2) in [(1.0, 1.0), (1.0, 0.5), (2.0, 0.5)] {
            let tp = touching(presets::disks(r1, r2, 0.01));
            let a = compute_alpha(&tp, &x1(), 0.1, 512).unwrap();
            let exact = disk_alpha(r1, r2, 1.0);
            assert!(
                (a.value / exact - 1.0).abs() < 0.01,
                "{r1} {r2}: {} vs {exact}",
                a.value
            );
            assert!((a.flux_d1 + a.flux_d2).abs() <= 0.05 * a.flux_d1.abs());
            assert!(a.mean_residual < 1e-10);
        }
    }

    #[test]
    fn vertical_field_on_symmetric_pair() {
        let tp = touching(presets::ellipses(0.01));
        let db = build_dumbbell(&tp, 0.1, 256).unwrap();
        let s = solve_touching(&db, &AppliedField::parse("x2").unwrap()).unwrap();
        let a = alpha_rho(&s, &db).unwrap();
        assert!(a.value.abs() < 1e-8);
        assert!(db.boundary.integrate(&s.psi.values).abs() < 1e-10);
        // ψ odd under x2 ↦ -x2: the mirror of node k is found by position
        let b = &db.boundary;
        for k in (0..b.len()).step_by(7) {
            let m = Vec2::new(b.nodes[k].x, -b.nodes[k].y);
            let (j, d) = b.nearest_node(m);
            if d < 1e-9 {
                assert_abs_diff_eq!(s.psi.values[k], -s.psi.values[j], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn alpha_is_linear_in_the_field() {
        let tp = touching(presets::general_shapes(0.01));
        let h1 = AppliedField::parse("x1").unwrap();
        let h2 = AppliedField::parse("x1^2 - x2^2 + 0.5*x2").unwrap();
        let h12 = AppliedField::new(h1.polynomial.add(&h2.polynomial));
        let a = |h: &AppliedField| compute_alpha(&tp, h, 0.1, 128).unwrap().value;
        assert_abs_diff_eq!(a(&h12), a(&h1) + a(&h2), epsilon = 1e-10);
    }

    #[test]
    fn study_table_shape() {
        let tp = touching(presets::disks(1.0, 1.0, 0.0));
        let rows = alpha_convergence_study(&tp, &x1(), &[0.1], &[64]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].rel_err, 0.0);
        let rows = alpha_convergence_study(&tp, &x1(), &[0.2, 0.1], &[64, 128]).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[3].rel_err, 0.0);
        assert!(alpha_convergence_study(&tp, &x1(), &[], &[64]).is_err());
    }
}
