use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{ParametricCurve, Vec2};
use crate::error::{Error, Result};

/// Label of a node on a piecewise (dumbbell) boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Piece {
    Arc1,
    Arc2,
    SegTop,
    SegBottom,
}

/// How the nodes of a [`DiscreteBoundary`] were laid out.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryLayout {
    /// `n` nodes equispaced in parameter on one smooth closed curve, starting at `theta0`.
    Smooth { theta0: f64 },
    /// Panel-midpoint nodes on a piecewise curve with corners.
    Piecewise,
}

/// Quadrature nodes on a closed boundary.
///
/// `weights` are arc-length quadrature weights, so `Σ weights` approximates the perimeter
/// and `Σ f_k w_k` approximates `∫ f ds`.
#[derive(Clone, Debug)]
pub struct DiscreteBoundary {
    pub nodes: Vec<Vec2>,
    pub normals: Vec<Vec2>,
    pub weights: Vec<f64>,
    pub curvatures: Vec<f64>,
    pub params: Vec<f64>,
    pub pieces: Option<Vec<Piece>>,
    pub layout: BoundaryLayout,
}

impl DiscreteBoundary {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn perimeter(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `∫ f ds` for nodal samples `f`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self.layout, BoundaryLayout::Smooth { .. })
    }

    /// `|x'(θ_k)|` for a smooth layout.
    pub fn speeds(&self) -> Result<Vec<f64>> {
        match self.layout {
            BoundaryLayout::Smooth { .. } => {
                let h = TAU / self.len() as f64;
                Ok(self.weights.iter().map(|w| w / h).collect())
            }
            BoundaryLayout::Piecewise => Err(Error::NotSmooth),
        }
    }

    /// Index and distance of the node closest to `x`.
    pub fn nearest_node(&self, x: Vec2) -> (usize, f64) {
        self.nodes
            .iter()
            .enumerate()
            .map(|(k, y)| (k, y.distance(x)))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    /// True if `x` lies closer than `factor ×` the local node spacing to some node.
    pub fn is_near(&self, x: Vec2, factor: f64) -> bool {
        self.nodes
            .iter()
            .zip(&self.weights)
            .any(|(y, w)| y.distance(x) < factor * w)
    }

    pub fn contains(&self, x: Vec2) -> bool {
        super::point_in_polygon(x, &self.nodes)
    }

    pub fn max_spacing(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }
}

/// `n` nodes equispaced in parameter starting at θ = 0.
pub fn discretize(curve: &ParametricCurve, n: usize) -> Result<DiscreteBoundary> {
    discretize_from(curve, n, 0.0)
}

/// `n` nodes `θ_k = theta0 + 2πk/n` with trapezoid weights `|x'(θ_k)|·2π/n`.
pub fn discretize_from(curve: &ParametricCurve, n: usize, theta0: f64) -> Result<DiscreteBoundary> {
    if n < 8 {
        return Err(Error::InvalidInput(format!(
            "need at least 8 nodes per boundary, got {n}"
        )));
    }
    let h = TAU / n as f64;
    let mut b = DiscreteBoundary {
        nodes: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
        curvatures: Vec::with_capacity(n),
        params: Vec::with_capacity(n),
        pieces: None,
        layout: BoundaryLayout::Smooth { theta0 },
    };
    for k in 0..n {
        let theta = theta0 + k as f64 * h;
        let p = curve.eval(theta);
        let speed = p.d1.norm();
        if !(speed > 1e-12) {
            return Err(Error::DegenerateCurve { theta, speed });
        }
        b.nodes.push(p.pos);
        b.normals.push(p.normal());
        b.weights.push(speed * h);
        b.curvatures.push(p.curvature());
        b.params.push(theta);
    }
    Ok(b)
}
