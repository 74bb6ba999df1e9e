//! Randomized energy-flow solver for structured-grid PDEs.
//!
//! A random initial field is driven to the discrete solution of a PDE by
//! annealed, semi-implicit descent on the residual energy `½‖r(u)‖²`. Every
//! operator is applied matrix-free; each implicit step is a conjugate
//! gradient solve with the normal operator `I + Δτ JᵀJ`.
//!
//! ```no_run
//! use efp::{grid::{make_grid, GridKind}, problems::make_poisson, solver::{run_solver, SolverConfig}};
//!
//! let grid = make_grid(GridKind::Spatial2D, 64, 64, 1.0).unwrap();
//! let problem = make_poisson(&grid).unwrap();
//! let result = run_solver(&problem, &SolverConfig::default()).unwrap();
//! println!("relative L2 error: {:.4}%", result.final_error());
//! ```

pub mod cli;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod operators;
pub mod problems;
pub mod solver;

pub use error::{Error, Result};
