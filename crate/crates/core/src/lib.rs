//! Numerical integration of first-order matrix differential equations
//! `Y'(x) = f(x, Y(x))` with piecewise matrix-cubic splines.
//!
//! The approximation is `C²` across knots, collocates the equation at every
//! knot and converges with order four in the step size. Affine right-hand
//! sides (Sylvester equations) can be solved segment by segment directly;
//! everything else goes through a contracting fixed-point iteration.
//!
//! ```
//! use matspline::integrator::{integrate, error_report, SolverConfig};
//! use matspline::problems;
//!
//! let problem = problems::guzman();
//! let run = integrate(&problem, &SolverConfig::with_h(0.1)).unwrap();
//! let exact = problem.exact.clone().unwrap();
//! let report = error_report(&run.spline, |x| exact(x), 101);
//! assert!(report[0].max_error < 3e-6);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod expr;
pub mod integrator;
pub mod matrix;
pub mod problems;
pub mod spline;

pub use integrator::{integrate, IntegratorError, ProblemSpec, SolverConfig};
pub use matrix::Matrix;
pub use spline::MatrixSpline;
