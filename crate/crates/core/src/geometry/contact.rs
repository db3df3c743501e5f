use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{point_in_polygon, ParametricCurve, RigidMotion, Vec2};
use crate::error::{Error, Result};

const SCAN: usize = 256;

/// Closest points `z1 = x1(θ1)`, `z2 = x2(θ2)` of two disjoint curves.
#[derive(Clone, Copy, Debug)]
pub struct ClosestPoints {
    pub theta1: f64,
    pub theta2: f64,
    pub z1: Vec2,
    pub z2: Vec2,
    pub eps: f64,
}

fn samples(c: &ParametricCurve, n: usize) -> Vec<Vec2> {
    (0..n).map(|k| c.point(TAU * k as f64 / n as f64)).collect()
}

fn overlapping(c1: &ParametricCurve, c2: &ParametricCurve) -> bool {
    let (s1, s2) = (samples(c1, 512), samples(c2, 512));
    let strictly_inside =
        |x: Vec2, poly: &[Vec2]| point_in_polygon(x, poly) && poly.iter().all(|v| v.distance(x) > 1e-9);
    s2.iter().any(|&x| strictly_inside(x, &s1)) || s1.iter().any(|&x| strictly_inside(x, &s2))
}

/// Minimizes `|x1(θ1) - x2(θ2)|` by a coarse grid scan followed by damped Newton.
pub fn closest_points(c1: &ParametricCurve, c2: &ParametricCurve) -> Result<ClosestPoints> {
    if overlapping(c1, c2) {
        return Err(Error::Overlapping);
    }
    let (s1, s2) = (samples(c1, SCAN), samples(c2, SCAN));
    let mut best = (0, 0, f64::INFINITY);
    for (i, a) in s1.iter().enumerate() {
        for (j, b) in s2.iter().enumerate() {
            let d = (*a - *b).norm_sq();
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    let step = TAU / SCAN as f64;
    let mut t = [best.0 as f64 * step, best.1 as f64 * step];

    let objective = |t: [f64; 2]| 0.5 * (c1.point(t[0]) - c2.point(t[1])).norm_sq();
    let residual = |t: [f64; 2]| {
        let (p, q) = (c1.eval(t[0]), c2.eval(t[1]));
        let d = p.pos - q.pos;
        (d.dot(p.d1) / p.d1.norm()).abs().max((d.dot(q.d1) / q.d1.norm()).abs())
    };

    let max_iter = 200;
    let mut mu = 1e-6;
    let mut f = objective(t);
    for _ in 0..max_iter {
        let (p, q) = (c1.eval(t[0]), c2.eval(t[1]));
        let d = p.pos - q.pos;
        let g = [d.dot(p.d1), -d.dot(q.d1)];
        if residual(t) <= 1e-15 {
            break;
        }
        let h11 = p.d1.norm_sq() + d.dot(p.d2);
        let h22 = q.d1.norm_sq() - d.dot(q.d2);
        let h12 = -p.d1.dot(q.d1);
        let scale = h11.abs().max(h22.abs()).max(1e-300);
        let mut accepted = false;
        for _ in 0..60 {
            let a11 = h11 + mu * scale;
            let a22 = h22 + mu * scale;
            let det = a11 * a22 - h12 * h12;
            if det > 0.0 && a11 > 0.0 {
                let dt = [-(a22 * g[0] - h12 * g[1]) / det, -(a11 * g[1] - h12 * g[0]) / det];
                let trial = [t[0] + dt[0], t[1] + dt[1]];
                let ft = objective(trial);
                if ft <= f {
                    let stalled = dt[0].abs().max(dt[1].abs()) < 1e-16;
                    t = trial;
                    f = ft;
                    mu = (mu / 4.0).max(1e-14);
                    accepted = !stalled;
                    break;
                }
            }
            mu *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    let r = residual(t);
    if r > 1e-10 {
        return Err(Error::NoConvergence {
            what: "closest-point search",
            iterations: max_iter,
            residual: r,
        });
    }
    let t = [t[0].rem_euclid(TAU), t[1].rem_euclid(TAU)];
    let (z1, z2) = (c1.point(t[0]), c2.point(t[1]));
    Ok(ClosestPoints {
        theta1: t[0],
        theta2: t[1],
        z1,
        z2,
        eps: z1.distance(z2),
    })
}

/// A pair of curves moved so that the midpoint of the closest points is the origin and
/// `z2 - z1` points along `+x1`.
#[derive(Clone, Debug)]
pub struct CanonicalPair {
    pub curve1: ParametricCurve,
    pub curve2: ParametricCurve,
    /// Original coordinates → canonical coordinates.
    pub motion: RigidMotion,
    pub theta1: f64,
    pub theta2: f64,
    pub eps: f64,
}

impl CanonicalPair {
    pub fn z1(&self) -> Vec2 {
        self.curve1.point(self.theta1)
    }

    pub fn z2(&self) -> Vec2 {
        self.curve2.point(self.theta2)
    }
}

pub fn canonical_frame(c1: &ParametricCurve, c2: &ParametricCurve) -> Result<CanonicalPair> {
    let cp = closest_points(c1, c2)?;
    let direction = if cp.eps > 1e-12 {
        cp.z2 - cp.z1
    } else {
        c1.eval(cp.theta1).normal()
    };
    let angle = direction.y.atan2(direction.x);
    let mid = (cp.z1 + cp.z2) * 0.5;
    let motion = RigidMotion {
        rotation: -angle,
        translation: -mid.rotated(-angle),
    };
    Ok(CanonicalPair {
        curve1: c1.transformed(&motion),
        curve2: c2.transformed(&motion),
        motion,
        theta1: cp.theta1,
        theta2: cp.theta2,
        eps: cp.eps,
    })
}

/// A disk, used for osculating circles and inversions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Vec2,
    pub radius: f64,
}

impl Disk {
    /// Inversion in the boundary circle: `c + r²(x - c)/|x - c|²`.
    pub fn reflect(&self, x: Vec2) -> Result<Vec2> {
        let d = x - self.center;
        let n2 = d.norm_sq();
        if n2 == 0.0 {
            return Err(Error::AtSingularity(x));
        }
        Ok(self.center + d * (self.radius * self.radius / n2))
    }
}

/// Free-function form of [`Disk::reflect`].
pub fn reflect(x: Vec2, disk: &Disk) -> Result<Vec2> {
    disk.reflect(x)
}

/// Closest points, gap, and the disks osculating each inclusion there.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OsculatingDisks {
    pub z1: Vec2,
    pub z2: Vec2,
    pub eps: f64,
    pub c1: Vec2,
    pub c2: Vec2,
    pub r1: f64,
    pub r2: f64,
}

impl OsculatingDisks {
    pub fn disk1(&self) -> Disk {
        Disk {
            center: self.c1,
            radius: self.r1,
        }
    }

    pub fn disk2(&self) -> Disk {
        Disk {
            center: self.c2,
            radius: self.r2,
        }
    }
}

pub fn osculating_disks(pair: &CanonicalPair) -> Result<OsculatingDisks> {
    let mut centers = [Vec2::ZERO; 2];
    let mut radii = [0.0; 2];
    let mut zs = [Vec2::ZERO; 2];
    for (j, (curve, theta)) in [(&pair.curve1, pair.theta1), (&pair.curve2, pair.theta2)]
        .into_iter()
        .enumerate()
    {
        let p = curve.eval(theta);
        let kappa = p.curvature();
        if !(kappa > 1e-12) {
            return Err(Error::NonConvexAtContact {
                inclusion: j + 1,
                curvature: kappa,
            });
        }
        radii[j] = 1.0 / kappa;
        centers[j] = p.pos - p.normal() * radii[j];
        zs[j] = p.pos;
    }
    Ok(OsculatingDisks {
        z1: zs[0],
        z2: zs[1],
        eps: pair.eps,
        c1: centers[0],
        c2: centers[1],
        r1: radii[0],
        r2: radii[1],
    })
}

/// `√2·√(r1 r2/(r1 + r2))`, the coefficient of `√ε` in the limit-point asymptotics.
pub fn limit_point_coefficient(r1: f64, r2: f64) -> f64 {
    (2.0 * r1 * r2 / (r1 + r2)).sqrt()
}

/// Fixed points `p1` of `R1∘R2` (inside B1) and `p2` of `R2∘R1` (inside B2), by iteration
/// from the leading-order asymptotic positions.
pub fn fixed_points(disks: &OsculatingDisks) -> Result<(Vec2, Vec2)> {
    let (b1, b2) = (disks.disk1(), disks.disk2());
    let axis = disks.c2 - disks.c1;
    let separation = axis.norm();
    if !(separation > disks.r1 + disks.r2) {
        return Err(Error::InvalidInput("osculating disks are not disjoint".into()));
    }
    let axis = axis / separation;
    let mid = (disks.z1 + disks.z2) * 0.5;
    let offset = limit_point_coefficient(disks.r1, disks.r2) * disks.eps.sqrt();

    let iterate = |first: Disk, second: Disk, start: Vec2| -> Result<Vec2> {
        let max_iter = 1_000_000;
        let mut x = start;
        for _ in 0..max_iter {
            let next = first.reflect(second.reflect(x)?)?;
            let step = next.distance(x);
            x = next;
            if step < 1e-14 {
                return Ok(x);
            }
        }
        Err(Error::NoConvergence {
            what: "reflection fixed-point iteration",
            iterations: max_iter,
            residual: first.reflect(second.reflect(x)?)?.distance(x),
        })
    };
    let p1 = iterate(b1, b2, mid - axis * offset)?;
    let p2 = iterate(b2, b1, mid + axis * offset)?;
    Ok((p1, p2))
}

/// Osculating disks together with the reflection fixed points.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OsculatingGeometry {
    pub z1: Vec2,
    pub z2: Vec2,
    pub eps: f64,
    pub c1: Vec2,
    pub c2: Vec2,
    pub r1: f64,
    pub r2: f64,
    pub p1: Vec2,
    pub p2: Vec2,
}

impl OsculatingGeometry {
    pub fn new(disks: &OsculatingDisks) -> Result<Self> {
        let (p1, p2) = fixed_points(disks)?;
        Ok(OsculatingGeometry {
            z1: disks.z1,
            z2: disks.z2,
            eps: disks.eps,
            c1: disks.c1,
            c2: disks.c2,
            r1: disks.r1,
            r2: disks.r2,
            p1,
            p2,
        })
    }

    pub fn from_pair(pair: &CanonicalPair) -> Result<Self> {
        Self::new(&osculating_disks(pair)?)
    }

    pub fn disks(&self) -> OsculatingDisks {
        OsculatingDisks {
            z1: self.z1,
            z2: self.z2,
            eps: self.eps,
            c1: self.c1,
            c2: self.c2,
            r1: self.r1,
            r2: self.r2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn ellipses(eps: f64) -> (ParametricCurve, ParametricCurve) {
        (
            ParametricCurve::ellipse(Vec2::new(-2.0 - eps / 2.0, 0.0), 2.0, 1.0, 0.0),
            ParametricCurve::ellipse(Vec2::new(2.0 + eps / 2.0, 0.0), 2.0, 1.0, 0.0),
        )
    }

    fn unit_disks(eps: f64) -> (ParametricCurve, ParametricCurve) {
        (
            ParametricCurve::circle(Vec2::new(-1.0 - eps / 2.0, 0.0), 1.0),
            ParametricCurve::circle(Vec2::new(1.0 + eps / 2.0, 0.0), 1.0),
        )
    }

    #[test]
    fn unit_disks_closest_points() {
        let (a, b) = unit_disks(0.01);
        let cp = closest_points(&a, &b).unwrap();
        assert_abs_diff_eq!(cp.z1.distance(Vec2::new(-0.005, 0.0)), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(cp.z2.distance(Vec2::new(0.005, 0.0)), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(cp.eps, 0.01, epsilon = 1e-12);
    }

    #[test]
    fn ellipse_gap_is_exact() {
        let (a, b) = ellipses(0.01);
        let cp = closest_points(&a, &b).unwrap();
        assert_abs_diff_eq!(cp.eps, 0.01, epsilon = 1e-13);
        assert_abs_diff_eq!(cp.z1.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cp.z2.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn general_shape_gap_matches_brute_force() {
        let eps = 0.01;
        let a = ParametricCurve::general_shape_1(eps);
        let b = a.transformed(&RigidMotion::rotation(PI));
        let cp = closest_points(&a, &b).unwrap();
        assert_abs_diff_eq!(cp.eps, eps, epsilon = 1e-8);

        // brute force: dense grid, then a finer local grid around the best cell
        let n = 2048;
        let h = TAU / n as f64;
        let (s1, s2) = (samples(&a, n), samples(&b, n));
        let mut best = (0, 0, f64::INFINITY);
        for (i, p) in s1.iter().enumerate() {
            for (j, q) in s2.iter().enumerate() {
                let d = p.distance(*q);
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        let mut fine = best.2;
        for di in -200..=200 {
            for dj in -200..=200 {
                let t1 = (best.0 as f64 + di as f64 / 100.0) * h;
                let t2 = (best.1 as f64 + dj as f64 / 100.0) * h;
                fine = fine.min(a.point(t1).distance(b.point(t2)));
            }
        }
        assert!(fine >= cp.eps - 1e-12);
        assert_abs_diff_eq!(fine, cp.eps, epsilon = 1e-8);
    }

    #[test]
    fn overlap_is_rejected() {
        let a = ParametricCurve::circle(Vec2::ZERO, 1.0);
        let b = ParametricCurve::circle(Vec2::new(1.0, 0.0), 1.0);
        assert!(matches!(closest_points(&a, &b), Err(Error::Overlapping)));
    }

    #[test]
    fn canonical_identity_for_canonical_input() {
        let (a, b) = ellipses(0.01);
        let pair = canonical_frame(&a, &b).unwrap();
        assert!(pair.motion.is_identity(1e-12));
    }

    #[test]
    fn canonical_frame_undoes_rotation() {
        let eps = 0.01;
        let (a, b) = ellipses(eps);
        let m = RigidMotion {
            rotation: PI / 6.0,
            translation: Vec2::new(0.7, -1.3),
        };
        let pair = canonical_frame(&a.transformed(&m), &b.transformed(&m)).unwrap();
        assert_abs_diff_eq!(pair.z1().distance(Vec2::new(-eps / 2.0, 0.0)), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(pair.z2().distance(Vec2::new(eps / 2.0, 0.0)), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(pair.eps, eps, epsilon = 1e-12);
        // canonical motion undoes m
        assert!(pair.motion.compose(&m).is_identity(1e-10));
        // inverse motion restores every node
        let back = pair.motion.inverse();
        for k in 0..64 {
            let t = TAU * k as f64 / 64.0;
            let orig = a.transformed(&m).point(t);
            assert!(back.apply(pair.curve1.point(t)).distance(orig) < 1e-12);
        }
    }

    #[test]
    fn pure_translation_motion() {
        let (a, b) = unit_disks(0.01);
        let t = Vec2::new(3.0, 4.0);
        let m = RigidMotion::translation(t);
        let pair = canonical_frame(&a.transformed(&m), &b.transformed(&m)).unwrap();
        assert_abs_diff_eq!(pair.motion.rotation, 0.0, epsilon = 1e-12);
        assert!(pair.motion.translation.distance(-t) < 1e-10);
    }

    #[test]
    fn osculating_disks_of_disks_and_ellipses() {
        let (a, b) = unit_disks(0.01);
        let d = osculating_disks(&canonical_frame(&a, &b).unwrap()).unwrap();
        assert_abs_diff_eq!(d.r1, 1.0, epsilon = 1e-10);
        assert!(d.c1.distance(Vec2::new(-1.005, 0.0)) < 1e-10);
        assert!(d.c2.distance(Vec2::new(1.005, 0.0)) < 1e-10);

        let eps = 0.01;
        let (a, b) = ellipses(eps);
        let d = osculating_disks(&canonical_frame(&a, &b).unwrap()).unwrap();
        assert_abs_diff_eq!(d.r1, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(d.r2, 0.5, epsilon = 1e-12);
        assert!(d.c1.distance(Vec2::new(-0.5 - eps / 2.0, 0.0)) < 1e-12);
    }

    #[test]
    fn osculating_radius_matches_tangent_angle_derivative() {
        let eps = 0.01;
        let a = ParametricCurve::general_shape_1(eps);
        let b = a.transformed(&RigidMotion::rotation(PI));
        let pair = canonical_frame(&a, &b).unwrap();
        let d = osculating_disks(&pair).unwrap();
        // curvature = dφ/ds with φ the tangent angle
        let h = 1e-4;
        let angle = |t: f64| {
            let v = pair.curve1.eval(t).d1;
            v.y.atan2(v.x)
        };
        let dphi = (angle(pair.theta1 + h) - angle(pair.theta1 - h)) / (2.0 * h);
        let ds = pair.curve1.eval(pair.theta1).d1.norm();
        assert_abs_diff_eq!(d.r1, ds / dphi, epsilon = 1e-6);
        assert_abs_diff_eq!(d.r1, 4.0 / 9.0, epsilon = 1e-6);
    }

    #[test]
    fn reflection_basics() {
        let disk = Disk {
            center: Vec2::new(1.0, 2.0),
            radius: 0.5,
        };
        let on = disk.center + Vec2::new(0.3, 0.4);
        assert!(disk.reflect(on).unwrap().distance(on) < 1e-15);
        let far = disk.center + Vec2::new(1.0, 0.0);
        assert!(disk.reflect(far).unwrap().distance(disk.center + Vec2::new(0.25, 0.0)) < 1e-15);
        let x = Vec2::new(-0.3, 7.0);
        assert!(disk.reflect(disk.reflect(x).unwrap()).unwrap().distance(x) < 1e-13);
        assert!(disk.reflect(disk.center).is_err());
    }

    fn brute_fixed_point(b1: Disk, b2: Disk) -> Vec2 {
        let mut x = Vec2::new(0.0, 0.0);
        for _ in 0..100_000 {
            x = b1.reflect(b2.reflect(x).unwrap()).unwrap();
        }
        x
    }

    #[test]
    fn unit_disk_fixed_points() {
        let eps = 0.01;
        let (a, b) = unit_disks(eps);
        let g = OsculatingGeometry::from_pair(&canonical_frame(&a, &b).unwrap()).unwrap();
        let x0 = (eps * 1.0 + eps * eps / 4.0).sqrt();
        assert_abs_diff_eq!(x0, 0.1001249219725039, epsilon = 1e-15);
        assert!(g.p1.distance(Vec2::new(-x0, 0.0)) < 1e-12);
        assert!(g.p2.distance(Vec2::new(x0, 0.0)) < 1e-12);
        let brute = brute_fixed_point(g.disks().disk1(), g.disks().disk2());
        assert!(brute.distance(g.p1) < 1e-12);
        // asymptotic leading term √2·√(r1 r2/(r1+r2))·√ε = 0.1
        let lead = limit_point_coefficient(1.0, 1.0) * eps.sqrt();
        assert_abs_diff_eq!(lead, 0.1, epsilon = 1e-15);
        assert!((g.p1.x + lead).abs() < eps);
        // mirror symmetry
        assert!((g.p1 + g.p2).norm() < 1e-14);
    }

    #[test]
    fn fixed_points_relations_and_asymptotic_slope() {
        let mut errs = vec![];
        let epss = [0.02, 0.01, 0.005];
        for &eps in &epss {
            let a = ParametricCurve::ellipse(Vec2::new(-2.0 - eps / 2.0, 0.0), 2.0, 1.0, 0.0);
            let b = ParametricCurve::circle(Vec2::new(1.0 + eps / 2.0, 0.0), 1.0);
            let g = OsculatingGeometry::from_pair(&canonical_frame(&a, &b).unwrap()).unwrap();
            let (b1, b2) = (g.disks().disk1(), g.disks().disk2());
            assert!(b1.reflect(g.p2).unwrap().distance(g.p1) < 1e-12);
            assert!(b2.reflect(g.p1).unwrap().distance(g.p2) < 1e-12);
            assert!(b1.reflect(b2.reflect(g.p1).unwrap()).unwrap().distance(g.p1) < 1e-12);
            assert!(b2.reflect(b1.reflect(g.p2).unwrap()).unwrap().distance(g.p2) < 1e-12);
            assert_abs_diff_eq!(g.p1.y, 0.0, epsilon = 1e-14);
            let lead = limit_point_coefficient(g.r1, g.r2) * eps.sqrt();
            errs.push((g.p1.x + lead).abs());
        }
        let slope = (errs[2] / errs[0]).ln() / (epss[2] / epss[0]).ln();
        assert!((slope - 1.0).abs() < 0.15, "slope {slope}");
    }
}
