//! Darknet-style model loading: cfg text → layer specs, binary weights →
//! a [`NetworkModel`] that runs the forward pass at a runtime-selected
//! square input resolution.

mod cfg;
mod network;
mod weights;

pub use cfg::{CfgError, LayerSpec, SectionKind, parse_cfg, serialize_cfg};
pub use network::{
    InputResolution, Layer, NetworkModel, RawPrediction, RegionParams, load_class_names,
};
pub use weights::load_weights;

use crate::nnet::NnetError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Cfg(#[from] CfgError),
    #[error("section {section} ([{kind}]): missing required key `{key}`")]
    MissingKey {
        section: usize,
        kind: &'static str,
        key: &'static str,
    },
    #[error("section {section}: invalid value `{value}` for `{key}`")]
    BadValue {
        section: usize,
        key: &'static str,
        value: String,
    },
    #[error("section {section}: unsupported activation `{name}` (expected leaky or linear)")]
    UnsupportedActivation { section: usize, name: String },
    #[error("network input must be square, cfg declares {width}x{height}")]
    NonSquareInput { width: usize, height: usize },
    #[error("network input must have 3 channels, cfg declares {0}")]
    BadChannelCount(usize),
    #[error("input size {side} is not a multiple of 32")]
    InputSizeNotMultiple { side: usize },
    #[error("input size {side} is below the minimum of 64")]
    InputSizeTooSmall { side: usize },
    #[error("the final section must be [region]")]
    RegionNotLast,
    #[error("cfg has no [region] section")]
    MissingRegion,
    #[error("region anchors count {actual} does not match num={num} ({expected} values)")]
    AnchorCount {
        num: usize,
        expected: usize,
        actual: usize,
    },
    #[error("region layer must use coords=4, got {0}")]
    UnsupportedCoords(usize),
    #[error("weights header truncated: {0} bytes")]
    HeaderTruncated(usize),
    #[error("unsupported weights version {major}.{minor}.{revision}")]
    UnsupportedVersion {
        major: i32,
        minor: i32,
        revision: i32,
    },
    #[error(
        "weights file too short: expected {expected} floats, found {actual} (missing {missing})"
    )]
    WeightsMissing {
        expected: usize,
        actual: usize,
        missing: usize,
    },
    #[error(
        "weights file has trailing data: expected {expected} floats, found {actual} \
         ({extra_bytes} extra bytes)"
    )]
    WeightsTrailing {
        expected: usize,
        actual: usize,
        extra_bytes: usize,
    },
    #[error("weights payload is not a whole number of 32-bit floats ({0} bytes)")]
    WeightsUnaligned(usize),
    #[error("non-finite value in weights for layer {layer}")]
    NonFiniteWeights { layer: usize },
    #[error("model input must have shape (1, 3, {side}, {side}), got {shape:?}")]
    BadInputShape { side: usize, shape: [usize; 4] },
    #[error("layer {index} ([{kind}]): {source}")]
    Layer {
        index: usize,
        kind: &'static str,
        source: NnetError,
    },
    #[error("class names count {actual} does not match {expected} classes")]
    ClassNameCount { expected: usize, actual: usize },
    #[error("region output has {actual} channels, expected {expected} (anchors·(5+classes))")]
    BadRegionChannels { expected: usize, actual: usize },
}
