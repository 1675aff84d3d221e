//! Plane-stress mesoscale damage solver for shrinkage loading.
//!
//! One bilinear element per pixel, isotropic damage driven by a smoothed
//! Rankine equivalent strain, exponential softening regularised by the crack
//! band, and secant (damage-frozen) equilibrium iterations on a sparse
//! Cholesky factorisation.

mod anderson;
mod bar;
mod cholesky;
mod damage;
mod element;
mod material;
mod model;
mod oracle;
mod profile;
mod sim;

pub use bar::{bar_dissipation, BarResult};
pub use damage::{crack_band_width, equivalent_strain, principal, solve_damage};
pub use element::UnitElement;
pub use material::{MaterialParams, PhaseMaterials};
pub use model::{build_model, CoreTrusses, QuadModel};
pub use profile::{
    row_depth_mm, surface_eigenstrain, ProfileTable, ShrinkageProfile, MAX_EIGENSTRAIN, N_SNAPSHOTS, N_STEPS,
    SNAPSHOT_STRIDE, STEP_EIGENSTRAIN,
};
pub use sim::{
    run, run_model, total_damage, DamageNormalization, ElementState, SimConfig, SimResult, SimSnapshot, SimState,
    Simulator, SolverKind, StepLog,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FemError {
    #[error("damage law did not converge at kappa = {kappa}")]
    NonConvergence { kappa: f64 },
    #[error("equilibrium iterations did not converge at step {step}")]
    StepNonConvergence { step: usize },
    #[error("stiffness matrix is singular")]
    SingularSystem,
    #[error("shrinkage profile table does not fit the mesh: {0}")]
    ProfileTableMismatch(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}
