//! Field and stress concentration between two closely located stiff inclusions.
//!
//! The exterior problem `Δu = 0` outside `D1 ∪ D2`, `u = λ_j` on `∂D_j` with zero net
//! flux, `u - H = O(|x|⁻¹)` at infinity, is solved with layer potentials after
//! subtracting the explicit singular function `α0·q`:
//!
//! ```text
//! u = α0 q + H + S_{∂D1}[φ1] + S_{∂D2}[φ2]
//! ```
//!
//! The densities `φ_j` stay bounded as the gap `ε → 0`, so regular meshes suffice. The
//! factor `α0` comes from a touching-inclusion ("dumbbell") problem.
//!
//! Module map:
//!
//! * [`geometry`]: curves, discretization, closest points, osculating disks, fixed points
//! * [`layer_potential`]: kernels, Nyström matrices, dense solves and spectra
//! * [`singular_term`]: the singular function `q` and its interior harmonic extensions
//! * [`concentration_factor`]: the dumbbell problem and `α0`
//! * [`solvers`]: decomposed and direct solvers with boundary fluxes and field evaluation
//! * [`analysis`]: closest-point flux, error metrics, blow-up fit, field grids, contours
//! * [`harness`]: configuration-driven experiments behind the `stressconc` binary

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod concentration_factor;
mod error;
pub mod geometry;
pub mod harness;
pub mod layer_potential;
pub mod singular_term;
pub mod solvers;

pub use error::{Error, Result};

// The guide's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/layer_potentials.md")]
    mod layer_potentials {}
    #[doc = include_str!("../../../book/src/singular_term.md")]
    mod singular_term {}
    #[doc = include_str!("../../../book/src/concentration_factor.md")]
    mod concentration_factor {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}
