//! Perception offload pipeline: a camera node streams frames over a small
//! broker-based pub/sub network to a detector node running a Darknet-style
//! tiny-YOLO network on CPU, which publishes detections back.
//!
//! The crate is organized along the pipeline:
//!
//! * [`nnet`] — dense tensor kernels (convolution, pooling, activations).
//! * [`model`] — Darknet cfg/weights parsing and the forward pass.
//! * [`postproc`] — anchor-box decoding, NMS, and input resizing.
//! * [`wire`] — framing, messages, broker, and client sessions.
//! * [`nodes`] — the camera / detector / sink runners.
//! * [`bench`] — throughput sweep and VOC-style mAP evaluation.
//! * [`imgio`] — PPM/PNG image I/O, annotation, synthetic patterns.

pub mod bench;
pub mod imgio;
pub mod model;
pub mod nnet;
pub mod nodes;
pub mod postproc;
pub mod wire;

pub use model::{InputResolution, NetworkModel, RawPrediction};
pub use nnet::Tensor;
pub use postproc::{BBox, Detection};
pub use wire::{DetectionMsg, ImageFrame, TopicRegistry};
