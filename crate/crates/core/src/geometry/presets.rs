use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ParametricCurve, RigidMotion, Vec2};
use crate::error::Error;

/// Named inclusion pairs, all placed with the gap centred on the origin along `x1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Two ellipses with semi-axes 2 and 1, major axes on `x1`.
    Ellipses,
    /// Two unit disks.
    Disks,
    /// A 2×1 ellipse on the left and a unit disk on the right.
    EllipseDisk,
    /// [`ParametricCurve::general_shape_1`] and its point reflection through the origin.
    #[serde(rename = "general_shape_1")]
    GeneralShape1,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Ellipses,
        Preset::Disks,
        Preset::EllipseDisk,
        Preset::GeneralShape1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Ellipses => "ellipses",
            Preset::Disks => "disks",
            Preset::EllipseDisk => "ellipse_disk",
            Preset::GeneralShape1 => "general_shape_1",
        }
    }

    pub fn curves(self, eps: f64) -> (ParametricCurve, ParametricCurve) {
        match self {
            Preset::Ellipses => ellipses(eps),
            Preset::Disks => disks(1.0, 1.0, eps),
            Preset::EllipseDisk => (
                ParametricCurve::ellipse(Vec2::new(-2.0 - eps / 2.0, 0.0), 2.0, 1.0, 0.0),
                ParametricCurve::circle(Vec2::new(1.0 + eps / 2.0, 0.0), 1.0),
            ),
            Preset::GeneralShape1 => general_shapes(eps),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown geometry preset `{s}`")))
    }
}

/// Ellipses `x1²/4 + x2² = 1` centred at `(∓(2 + ε/2), 0)`.
pub fn ellipses(eps: f64) -> (ParametricCurve, ParametricCurve) {
    (
        ParametricCurve::ellipse(Vec2::new(-2.0 - eps / 2.0, 0.0), 2.0, 1.0, 0.0),
        ParametricCurve::ellipse(Vec2::new(2.0 + eps / 2.0, 0.0), 2.0, 1.0, 0.0),
    )
}

/// Disks of radii `r1` (left) and `r2` (right) with gap `eps` centred on the origin.
pub fn disks(r1: f64, r2: f64, eps: f64) -> (ParametricCurve, ParametricCurve) {
    (
        ParametricCurve::circle(Vec2::new(-r1 - eps / 2.0, 0.0), r1),
        ParametricCurve::circle(Vec2::new(r2 + eps / 2.0, 0.0), r2),
    )
}

pub fn general_shapes(eps: f64) -> (ParametricCurve, ParametricCurve) {
    let left = ParametricCurve::general_shape_1(eps);
    let right = left.transformed(&RigidMotion::rotation(std::f64::consts::PI));
    (left, right)
}
