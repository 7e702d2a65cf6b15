//! Nested polarized-traces solver for the 2D Helmholtz equation.
//!
//! The domain is split into horizontal layers coupled through two-line
//! interface traces. The resulting interface system is solved with GMRES,
//! preconditioned by Gauss–Seidel sweeps over the polarized (up/down-going)
//! traces. Each layer may itself be split into cells whose interface-to-interface
//! Green's operators are precomputed, compressed in partitioned low-rank form
//! and applied matrix-free.
//!
//! ```no_run
//! use polarized_traces::prelude::*;
//!
//! let grid = Grid::new(64, 64, 15.0, 12).unwrap();
//! let model = synthetic_model(&ModelSpec::Constant { c: 2000.0 }, &grid).unwrap();
//! let problem = Problem::new(grid, model, 8.0).unwrap();
//! let solver = OuterSolver::build(&problem, &SolverOptions::layered(4)).unwrap();
//! let f = point_source(&grid, 32, 32);
//! let (u, stats) = solver.solve(&f, 1e-5).unwrap();
//! assert!(stats.converged);
//! # let _ = u;
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod assemble;
pub mod bench;
pub mod dense;
pub mod error;
pub mod grid;
pub mod io;
pub mod layered;
pub mod model;
pub mod nested;
pub mod plr;
pub mod sparse;
pub mod sweep;

mod clock;
mod par;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

pub mod prelude {
    pub use crate::assemble::{assemble_helmholtz, point_source, ComplexField, Problem};
    pub use crate::error::{Error, Result};
    pub use crate::grid::{build_grid, Grid, Patch, PmlProfile};
    pub use crate::layered::{OuterSolver, SolverOptions};
    pub use crate::model::{synthetic_model, ModelSpec, SlownessModel};
    pub use crate::nested::InnerStrategy;
    pub use crate::sparse::gmres::GmresStats;
    pub use crate::C64;
}
