//! Numerical engines: a dense simplex solver, the one-variable linear-fractional
//! maximizer used by the random-selection analysis, and a brute-force grid search.

mod fractional;
mod grid;
mod lp;

pub use fractional::{fractional_objective, maximize_fractional_1d, FractionalCoeffs, FractionalOutcome};
pub use grid::{grid_search, GridPoint};
pub use lp::{solve_lp, LpProblem, LpSolution, LpStatus, FEASIBILITY_TOL, PIVOT_TOL};
