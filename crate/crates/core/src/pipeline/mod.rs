//! File formats, synthetic data, configuration and the end-to-end driver.

mod config;
mod io;
mod report;
mod run;
mod synth;

pub use config::{
    DataSource, FeIntegrandKind, MeshSource, ModelFamily, OptimizerKind, Overrides, QoiKind, QoiSpec, RunConfig,
    ScalingMode, TimeSet,
};
pub use io::{decode_tensor, encode_tensor, read_tensor, write_tensor, MAGIC, VERSION};
pub use report::{emit_report, relative_sse, QoiSummary, QoiTrajectory, RunReport, Summary, TensorErrors};
pub use run::{build_qois, evaluate_qois, load_data, run_pipeline, Stage};
pub use synth::{synth_generate, SynthSpec};
