//! Error metrics between reference and predicted damage trajectories, blur
//! diagnostics and dataset statistics.

mod explore;
mod metrics;
mod summary;

pub use explore::{
    binned_compare, cluster_assign, read_scatter, rgb_code, row_profile, write_scatter, BinMeans, BinRow, Cluster,
    RowProfile, SampleRecord, BIN_WIDTH, N_BINS,
};
pub use metrics::{laplacian_variance, pixel_error, property_errors, relative_error, total_damage_error};
pub use summary::{mean_std, summarize, MeanStd, MetricsRecord, StepErrors, StepSummary, Summary};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("reference value is zero; relative error undefined")]
    ZeroReference,
    #[error("microstructure contains no aggregate")]
    NoAggregate,
    #[error("field shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("malformed scatter table: {0}")]
    Parse(String),
}
