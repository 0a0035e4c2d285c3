//! Domain-based covariance minimization (DCM): kernel subspace learning that
//! keeps directions predictive of the output while suppressing directions
//! that vary across domains, plus a Nyström fast path (FastDCM), a
//! synthetic multi-domain benchmark, and an evaluation harness.

pub mod bench;
pub mod data;
pub mod dcm;
pub mod error;
pub mod eval;
pub mod fast;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod model_io;

pub use data::{load_csv, load_features, split_domains, synth_generate, write_csv, CsvSchema, DataSet, LabelKind, Outputs, SynthConfig};
pub use dcm::{
    build_operator_pair, fit_coir, fit_dcm, fit_kpca, transform, Algorithm, KernelSet, ProjectionModel, SolverMode,
};
pub use error::{Error, Result};
pub use eval::{krr_fit, run_experiment, EvalReport, ExperimentConfig, Method, Metric};
pub use fast::{fit_fastcoir, fit_fastdcm, NystromSketch};
pub use kernels::{GramBundle, KernelKind, KernelSpec};
pub use model_io::{load_model, save_model};
