//! Desk-scale reproduction of the quantitative surfaces: a throughput-vs-
//! input-size sweep and a VOC-2007-protocol mAP evaluator.

mod map;
mod report;
mod sweep;
mod truth;

pub use map::{
    ApResult, CornerBox, EvalDetection, GroundTruthBox, MapResult, evaluate_map, evaluate_map_with,
};
pub use report::{map_table, sweep_csv, sweep_table};
pub use sweep::{FixedCostEngine, InferenceEngine, ModelEngine, SweepOptions, SweepResult, sweep};
pub use truth::{
    convert_voc_xml, load_detections_file, load_truth_dir, load_truth_sidecar, truth_sidecar_line,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no frames in workload")]
    EmptyWorkload,
    #[error("no ground truth boxes")]
    EmptyTruth,
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Postproc(#[from] crate::postproc::PostprocError),
    #[error("line {line}: {message}")]
    BadTruthLine { line: usize, message: String },
    #[error("unknown class name `{0}` (not in the names file)")]
    UnknownClassName(String),
    #[error("malformed VOC xml: {0}")]
    BadXml(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
