use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::Vec2;
use crate::error::{Error, Result};

/// Truncated Fourier series `a0 + Σ_k (cos[k-1]·cos kθ + sin[k-1]·sin kθ)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl FourierSeries {
    /// Value and first two derivatives at `theta`.
    pub fn eval(&self, theta: f64) -> [f64; 3] {
        let mut out = [self.constant, 0.0, 0.0];
        let terms = self.cos.len().max(self.sin.len());
        for k in 1..=terms {
            let a = self.cos.get(k - 1).copied().unwrap_or(0.0);
            let b = self.sin.get(k - 1).copied().unwrap_or(0.0);
            let kf = k as f64;
            let (s, c) = (kf * theta).sin_cos();
            out[0] += a * c + b * s;
            out[1] += kf * (b * c - a * s);
            out[2] -= kf * kf * (a * c + b * s);
        }
        out
    }
}

/// The shape of a closed curve before any rigid motion is applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveShape {
    Circle {
        center: Vec2,
        radius: f64,
    },
    Ellipse {
        center: Vec2,
        semi_a: f64,
        semi_b: f64,
        #[serde(default)]
        rotation: f64,
    },
    Fourier {
        x1: FourierSeries,
        x2: FourierSeries,
    },
}

/// `x ↦ Rot(rotation)·x + translation`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    #[serde(default)]
    pub rotation: f64,
    #[serde(default)]
    pub translation: Vec2,
}

impl RigidMotion {
    pub const IDENTITY: RigidMotion = RigidMotion {
        rotation: 0.0,
        translation: Vec2::ZERO,
    };

    pub fn translation(t: Vec2) -> Self {
        RigidMotion {
            rotation: 0.0,
            translation: t,
        }
    }

    pub fn rotation(angle: f64) -> Self {
        RigidMotion {
            rotation: angle,
            translation: Vec2::ZERO,
        }
    }

    #[inline]
    pub fn apply(&self, x: Vec2) -> Vec2 {
        x.rotated(self.rotation) + self.translation
    }

    #[inline]
    pub fn apply_vector(&self, v: Vec2) -> Vec2 {
        v.rotated(self.rotation)
    }

    pub fn inverse(&self) -> RigidMotion {
        RigidMotion {
            rotation: -self.rotation,
            translation: -self.translation.rotated(-self.rotation),
        }
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &RigidMotion) -> RigidMotion {
        RigidMotion {
            rotation: self.rotation + inner.rotation,
            translation: self.apply(inner.translation),
        }
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        let angle = self.rotation.rem_euclid(TAU);
        (angle < tol || TAU - angle < tol) && self.translation.norm() < tol
    }
}

/// Position and first two parameter derivatives of a curve at one θ.
#[derive(Clone, Copy, Debug)]
pub struct CurvePoint {
    pub pos: Vec2,
    pub d1: Vec2,
    pub d2: Vec2,
}

impl CurvePoint {
    /// Signed curvature, positive for a convex counterclockwise curve.
    pub fn curvature(&self) -> f64 {
        self.d1.cross(self.d2) / self.d1.norm().powi(3)
    }

    /// Unit outward normal of a counterclockwise curve.
    pub fn normal(&self) -> Vec2 {
        Vec2::new(self.d1.y, -self.d1.x).normalized()
    }
}

/// A closed, counterclockwise, 2π-periodic boundary curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParametricCurve {
    pub shape: CurveShape,
    #[serde(default)]
    pub motion: RigidMotion,
}

impl ParametricCurve {
    pub fn new(shape: CurveShape) -> Self {
        ParametricCurve {
            shape,
            motion: RigidMotion::IDENTITY,
        }
    }

    pub fn circle(center: Vec2, radius: f64) -> Self {
        Self::new(CurveShape::Circle { center, radius })
    }

    pub fn ellipse(center: Vec2, semi_a: f64, semi_b: f64, rotation: f64) -> Self {
        Self::new(CurveShape::Ellipse {
            center,
            semi_a,
            semi_b,
            rotation,
        })
    }

    pub fn fourier(x1: FourierSeries, x2: FourierSeries) -> Self {
        Self::new(CurveShape::Fourier { x1, x2 })
    }

    /// The left "general shape" inclusion, touching `x1 = -eps/2` at θ = 0:
    ///
    /// `x1 = -eps/2 - 1 + cos θ`, `x2 = -1/12 + sin θ - sin(2θ)/6 + cos(4θ)/12`.
    pub fn general_shape_1(eps: f64) -> Self {
        Self::fourier(
            FourierSeries {
                constant: -eps / 2.0 - 1.0,
                cos: vec![1.0],
                sin: vec![],
            },
            FourierSeries {
                constant: -1.0 / 12.0,
                cos: vec![0.0, 0.0, 0.0, 1.0 / 12.0],
                sin: vec![1.0, -1.0 / 6.0],
            },
        )
    }

    /// Returns this curve moved by `motion` (applied after the existing one).
    pub fn transformed(&self, motion: &RigidMotion) -> Self {
        ParametricCurve {
            shape: self.shape.clone(),
            motion: motion.compose(&self.motion),
        }
    }

    pub fn eval(&self, theta: f64) -> CurvePoint {
        let (pos, d1, d2) = match &self.shape {
            CurveShape::Circle { center, radius } => {
                let (s, c) = theta.sin_cos();
                (
                    *center + Vec2::new(c, s) * *radius,
                    Vec2::new(-s, c) * *radius,
                    Vec2::new(-c, -s) * *radius,
                )
            }
            CurveShape::Ellipse {
                center,
                semi_a,
                semi_b,
                rotation,
            } => {
                let (s, c) = theta.sin_cos();
                (
                    *center + Vec2::new(semi_a * c, semi_b * s).rotated(*rotation),
                    Vec2::new(-semi_a * s, semi_b * c).rotated(*rotation),
                    Vec2::new(-semi_a * c, -semi_b * s).rotated(*rotation),
                )
            }
            CurveShape::Fourier { x1, x2 } => {
                let a = x1.eval(theta);
                let b = x2.eval(theta);
                (Vec2::new(a[0], b[0]), Vec2::new(a[1], b[1]), Vec2::new(a[2], b[2]))
            }
        };
        CurvePoint {
            pos: self.motion.apply(pos),
            d1: self.motion.apply_vector(d1),
            d2: self.motion.apply_vector(d2),
        }
    }

    #[inline]
    pub fn point(&self, theta: f64) -> Vec2 {
        self.eval(theta).pos
    }

    /// Signed enclosed area, by the (spectrally accurate) periodic trapezoid rule.
    pub fn signed_area(&self) -> f64 {
        let n = 1024;
        let h = TAU / n as f64;
        (0..n)
            .map(|k| {
                let p = self.eval(k as f64 * h);
                0.5 * p.pos.cross(p.d1)
            })
            .sum::<f64>()
            * h
    }

    /// Checks orientation, regularity and simplicity on a sampling of the curve.
    pub fn validate(&self) -> Result<()> {
        let n = 512;
        let h = TAU / n as f64;
        let mut polygon = Vec::with_capacity(n);
        for k in 0..n {
            let theta = k as f64 * h;
            let p = self.eval(theta);
            let speed = p.d1.norm();
            if !(speed > 1e-12) {
                return Err(Error::DegenerateCurve { theta, speed });
            }
            polygon.push(p.pos);
        }
        let area = self.signed_area();
        if !(area > 0.0) {
            return Err(Error::WrongOrientation { area });
        }
        if polygon_self_intersects(&polygon) {
            return Err(Error::SelfIntersecting);
        }
        Ok(())
    }
}

fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn polygon_self_intersects(p: &[Vec2]) -> bool {
    let n = p.len();
    for i in 0..n {
        let (a, b) = (p[i], p[(i + 1) % n]);
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(a, b, p[j], p[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(x: Vec2, polygon: &[Vec2]) -> bool {
    let mut inside = false;
    let n = polygon.len();
    let mut j = n - 1;
    for i in 0..n {
        let (pi, pj) = (polygon[i], polygon[j]);
        if (pi.y > x.y) != (pj.y > x.y) {
            let t = (x.y - pi.y) / (pj.y - pi.y);
            if x.x < pi.x + t * (pj.x - pi.x) {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fourier_matches_circle() {
        let f = ParametricCurve::fourier(
            FourierSeries {
                constant: 0.5,
                cos: vec![2.0],
                sin: vec![],
            },
            FourierSeries {
                constant: 0.0,
                cos: vec![],
                sin: vec![2.0],
            },
        );
        let c = ParametricCurve::circle(Vec2::new(0.5, 0.0), 2.0);
        for k in 0..17 {
            let t = 0.37 * k as f64;
            let (a, b) = (f.eval(t), c.eval(t));
            assert_abs_diff_eq!(a.pos.distance(b.pos), 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(a.d1.distance(b.d1), 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(a.d2.distance(b.d2), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let curves = [
            ParametricCurve::ellipse(Vec2::new(0.3, -1.0), 2.0, 1.0, 0.4),
            ParametricCurve::general_shape_1(0.01),
            ParametricCurve::general_shape_1(0.01).transformed(&RigidMotion {
                rotation: 1.1,
                translation: Vec2::new(0.2, 3.0),
            }),
        ];
        let h = 1e-5;
        for c in &curves {
            for k in 0..11 {
                let t = 0.55 * k as f64;
                let p = c.eval(t);
                let d1 = (c.point(t + h) - c.point(t - h)) / (2.0 * h);
                let d2 = (c.eval(t + h).d1 - c.eval(t - h).d1) / (2.0 * h);
                assert!(p.d1.distance(d1) < 1e-8);
                assert!(p.d2.distance(d2) < 1e-8);
            }
        }
    }

    #[test]
    fn ellipse_tip_curvature() {
        let e = ParametricCurve::ellipse(Vec2::ZERO, 2.0, 1.0, 0.0);
        assert_abs_diff_eq!(e.eval(0.0).curvature(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eval(0.0).normal().x, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn validation() {
        assert!(ParametricCurve::general_shape_1(0.01).validate().is_ok());
        assert!(ParametricCurve::circle(Vec2::ZERO, 1.0).validate().is_ok());
        let clockwise = ParametricCurve::fourier(
            FourierSeries {
                constant: 0.0,
                cos: vec![1.0],
                sin: vec![],
            },
            FourierSeries {
                constant: 0.0,
                cos: vec![],
                sin: vec![-1.0],
            },
        );
        assert!(matches!(clockwise.validate(), Err(Error::WrongOrientation { .. })));
        let looped = ParametricCurve::fourier(
            FourierSeries {
                constant: 0.0,
                cos: vec![1.0, 0.0, 1.5],
                sin: vec![],
            },
            FourierSeries {
                constant: 0.0,
                cos: vec![],
                sin: vec![1.0, 0.0, 1.5],
            },
        );
        assert!(looped.validate().is_err());
        let point = ParametricCurve::circle(Vec2::ZERO, 0.0);
        assert!(matches!(point.validate(), Err(Error::DegenerateCurve { .. })));
    }

    #[test]
    fn motion_inverse_and_compose() {
        let m = RigidMotion {
            rotation: 0.7,
            translation: Vec2::new(1.0, -2.0),
        };
        let x = Vec2::new(0.3, 0.9);
        assert!(m.inverse().apply(m.apply(x)).distance(x) < 1e-15);
        assert!(m.compose(&m.inverse()).is_identity(1e-15));
    }

    #[test]
    fn polygon_inside() {
        let sq = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(point_in_polygon(Vec2::new(0.5, 0.5), &sq));
        assert!(!point_in_polygon(Vec2::new(1.5, 0.5), &sq));
    }
}
