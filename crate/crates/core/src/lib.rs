//! Synthetic concrete mesostructures, a plane-stress damage solver for
//! shrinkage loading, and the metrics used to compare simulated and
//! predicted damage trajectories.

pub mod eval;
pub mod fem;
pub mod grid;
pub mod io;
pub mod microgen;
pub mod scenario;

pub use grid::Grid;
pub use scenario::{Scenario, Wrap};
