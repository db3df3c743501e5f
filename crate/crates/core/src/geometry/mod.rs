//! Curves, their discretizations, and the local geometry of the narrow gap.
//!
//! Every inclusion boundary is a closed counterclockwise curve `x(θ)`, `θ ∈ [0, 2π)`.
//! After [`canonical_frame`] the closest points sit at `z1 = (-ε/2, 0)` and
//! `z2 = (ε/2, 0)`. The disks osculating each inclusion there and the fixed points of
//! the composed inversions in their boundary circles are collected in
//! [`OsculatingGeometry`].

mod boundary;
mod contact;
mod curve;
pub mod presets;
mod vec2;

pub use boundary::{discretize, discretize_from, BoundaryLayout, DiscreteBoundary, Piece};
pub use contact::{
    canonical_frame, closest_points, fixed_points, limit_point_coefficient, osculating_disks, reflect, CanonicalPair,
    ClosestPoints, Disk, OsculatingDisks, OsculatingGeometry,
};
pub use curve::{point_in_polygon, CurvePoint, CurveShape, FourierSeries, ParametricCurve, RigidMotion};
pub use presets::Preset;
pub use vec2::Vec2;
