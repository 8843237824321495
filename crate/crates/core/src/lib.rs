//! Adaptive HDG solver for linear-quadratic Neumann boundary control
//! problems with bilateral control constraints.
//!
//! The crate discretizes the optimality system of
//!
//! ```text
//! min 1/2 ||y - y_d||^2 + alpha/2 ||u||^2      over  u_a <= u <= u_b,
//! s.t. -Laplace(y) + y = f,   grad(y).n = u + g   on the boundary,
//! ```
//!
//! with a hybridizable discontinuous Galerkin method of degree `k` for the
//! flux, scalar and trace variables, and a variational (projection-based)
//! discretization of the control. On top of the solver sit a residual
//! a posteriori error estimator, data oscillations, true-error reports
//! against manufactured solutions, Dörfler marking and a newest-vertex
//! bisection AFEM driver.
//!
//! Modules follow the pipeline:
//!
//! - [`mesh`]: conforming triangle meshes, refinement, file formats
//! - [`discretization`]: bases, quadrature, projections
//! - [`hdg`]: one reaction-diffusion HDG solve via static condensation
//! - [`control`]: projected fixed-point iteration for the optimality system
//! - [`estimator`]: error estimator, oscillations, true errors
//! - [`adaptivity`]: marking and the AFEM loop
//! - [`problems`]: benchmark problem definitions and data audits

pub mod adaptivity;
pub mod control;
pub mod discretization;
pub mod error;
pub mod estimator;
pub mod hdg;
pub mod mesh;
pub mod problems;

pub use error::{Error, Result};
