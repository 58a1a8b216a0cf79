//! In-natura economic planning.
//!
//! Plans gross production directly in physical units from citizen
//! consumption profiles, solving the (possibly output-dependent)
//! input-output system `(I − F(x))x = d`, and executes those plans day by
//! day against an inventory that can run short, be invested in, and leak.
//!
//! * [`economy`]: goods, coefficient matrix, profiles, externalities and
//!   per-unit coefficient curves fitted from production-unit data.
//! * [`solver`]: direct, fixed-point and gradient solvers.
//! * [`sim`]: the closed-loop daily simulation.
//! * [`bench`]: random sparse economies and the solve-time grid.
//! * [`scenario`] / [`output`]: scenario files and CSV output.

pub mod bench;
pub mod economy;
pub mod fixtures;
pub mod matrix;
pub mod output;
pub mod scenario;
pub mod sim;
pub mod solver;

pub use economy::{CoeffEntry, CoeffFn, Economy, Entry, Externalities, GoodId, GoodKind};
pub use matrix::CoeffMatrix;
pub use sim::{SimConfig, SimState, Trajectory};
pub use solver::{Method, PlanSolution, SolverConfig};
