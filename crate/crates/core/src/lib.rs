//! Discontinuous piecewise affine fitting of signals and images.
//!
//! The fit is posed as a mixed-integer linear program over the 4-connected
//! pixel grid: one binary per edge marks a discontinuity, and the consistency
//! of those binaries is enforced lazily with cycle inequalities.
//!
//! ```no_run
//! use pwfit::formulation::{compute_lambda, GridInstance};
//! use pwfit::separation::{cutting_plane_solve, Variant};
//! use pwfit::solver::SolveLimits;
//!
//! let inst = GridInstance::chain(vec![0.0, 0.1, 0.2, 0.9, 1.0]).unwrap();
//! let params = compute_lambda(&inst, 0.5).unwrap();
//! let sol = cutting_plane_solve(&inst, &params, &Variant::Mp.config(), &SolveLimits::default()).unwrap();
//! println!("{} {:?}", sol.objective, sol.x);
//! ```

pub mod affine;
pub mod error;
pub mod formulation;
pub mod grid;
pub mod heuristic;
pub mod io;
pub mod postprocess;
pub mod separation;
pub mod solver;

pub use error::{Error, Result};
