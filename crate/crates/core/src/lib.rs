//! Lie–Poisson reduction by a subgroup for covariant Hamiltonian field
//! theories on trivial principal bundles `P = M × G`.
//!
//! The crate is organised bottom-up:
//!
//! * [`lie_core`]: structure constants, brackets, coadjoint action, SO(3) and
//!   the affine group SO(3)⋉ℝ³, matrix exponentials and the normal-coordinate
//!   `Z` functions.
//! * [`homogeneous`]: infinitesimal actions on the reduced configuration space
//!   `P/K` and their duals (the `P` and `P⁺` operators).
//! * [`reduced_bracket`]: functional derivatives, the reduced covariant
//!   bracket, the projection `Ψ`, and the unreduced finite-difference oracle.
//! * [`dynamics_ode`]: heavy top, affine and S¹ reduced equations plus RK4.
//! * [`strand_pde`]: the SO(3)-strand with broken symmetry on a periodic grid.
//! * [`reconstruction`]: curvature, parallel transport, holonomy and
//!   reconstruction of unreduced solutions.
//! * [`diagnostics`]: K-invariance checker, conservation monitors and
//!   convergence studies.
//!
//! Sign conventions: momenta are right-trivialised (`μ = Ad*` transport of the
//! body momentum, `μ = R·π` for SO(3) as ℝ³) and a section `R(x)` is parallel
//! for a connection with coefficients `A_i` when `∂_i R = hat(A_i)·R`.

pub mod diagnostics;
pub mod dynamics_ode;
pub mod error;
pub mod homogeneous;
pub mod lie_core;
pub mod reconstruction;
pub mod reduced_bracket;
pub mod strand_pde;

pub use error::{Error, Result};
