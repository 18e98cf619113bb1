use std::time::{Duration, Instant};

use log::warn;

use super::BenchError;
use crate::model::{InputResolution, NetworkModel};
use crate::postproc::{Detection, ResizeMode, decode_region, nms, resize_to_input_mode};
use crate::wire::ImageFrame;

/// Anything the sweep can time: the real model or a fixed-cost stand-in for
/// harness self-tests.
pub trait InferenceEngine {
    fn set_input_side(&mut self, side: usize) -> Result<(), BenchError>;
    fn process_frame(&mut self, frame: &ImageFrame) -> Result<Vec<Detection>, BenchError>;
}

/// Full pipeline per frame: resize → forward → decode → NMS.
pub struct ModelEngine {
    model: NetworkModel,
    conf_threshold: f32,
    nms_threshold: f32,
}

impl ModelEngine {
    pub fn new(model: NetworkModel, conf_threshold: f32, nms_threshold: f32) -> Self {
        Self {
            model,
            conf_threshold,
            nms_threshold,
        }
    }
}

impl InferenceEngine for ModelEngine {
    fn set_input_side(&mut self, side: usize) -> Result<(), BenchError> {
        self.model = self
            .model
            .set_input_size(InputResolution::from_side(side)?)?;
        Ok(())
    }

    fn process_frame(&mut self, frame: &ImageFrame) -> Result<Vec<Detection>, BenchError> {
        let input = resize_to_input_mode(frame, self.model.input_size(), ResizeMode::Stretch)?;
        let pred = self.model.forward(&input)?;
        let candidates = decode_region(
            &pred,
            self.model.anchors(),
            self.model.num_classes(),
            self.conf_threshold,
            self.model.class_names(),
        );
        Ok(nms(&candidates, self.nms_threshold))
    }
}

/// Known-cost engine for timing-harness self-tests.
pub struct FixedCostEngine {
    pub service_time: Duration,
}

impl InferenceEngine for FixedCostEngine {
    fn set_input_side(&mut self, _side: usize) -> Result<(), BenchError> {
        Ok(())
    }

    fn process_frame(&mut self, _frame: &ImageFrame) -> Result<Vec<Detection>, BenchError> {
        std::thread::sleep(self.service_time);
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Frames run and discarded before timing starts.
    pub warmup_frames: usize,
    /// Frames timed per size.
    pub timed_frames: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            warmup_frames: 3,
            timed_frames: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub input_side: usize,
    pub frames_processed: usize,
    pub wall_seconds: f64,
    pub fps: f64,
    pub mean_inference_ms: f64,
    pub p95_inference_ms: f64,
    /// Set when the model rejected this size; the sweep continues.
    pub failed: Option<String>,
}

impl SweepResult {
    fn failure(input_side: usize, reason: String) -> Self {
        Self {
            input_side,
            frames_processed: 0,
            wall_seconds: 0.0,
            fps: 0.0,
            mean_inference_ms: 0.0,
            p95_inference_ms: 0.0,
            failed: Some(reason),
        }
    }
}

/// Nearest-rank percentile of an unsorted sample.
fn percentile(samples: &mut [f64], p: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * samples.len() as f64).ceil() as usize;
    samples[rank.clamp(1, samples.len()) - 1]
}

/// Times the full in-process pipeline over `workload` (cycled) at each input
/// size. Warm-up frames are excluded; network transport is not involved, so
/// the curve isolates inference cost.
pub fn sweep(
    sizes: &[usize],
    workload: &[ImageFrame],
    engine: &mut dyn InferenceEngine,
    options: &SweepOptions,
) -> Result<Vec<SweepResult>, BenchError> {
    if workload.is_empty() {
        return Err(BenchError::EmptyWorkload);
    }
    let timed_frames = options.timed_frames.max(1);
    let mut results = Vec::with_capacity(sizes.len());
    for &side in sizes {
        if let Err(e) = engine.set_input_side(side) {
            warn!("sweep: size {side} rejected: {e}");
            results.push(SweepResult::failure(side, e.to_string()));
            continue;
        }
        let mut frame_iter = workload.iter().cycle();
        let mut outcome = Ok(());
        for _ in 0..options.warmup_frames {
            if let Err(e) = engine.process_frame(frame_iter.next().unwrap()) {
                outcome = Err(e);
                break;
            }
        }
        if let Err(e) = outcome {
            results.push(SweepResult::failure(side, e.to_string()));
            continue;
        }

        let mut per_frame_ms = Vec::with_capacity(timed_frames);
        let started = Instant::now();
        let mut failed = None;
        for _ in 0..timed_frames {
            let t0 = Instant::now();
            if let Err(e) = engine.process_frame(frame_iter.next().unwrap()) {
                failed = Some(e.to_string());
                break;
            }
            per_frame_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        }
        if let Some(reason) = failed {
            results.push(SweepResult::failure(side, reason));
            continue;
        }
        let wall_seconds = started.elapsed().as_secs_f64();
        let frames = per_frame_ms.len();
        let mean = per_frame_ms.iter().sum::<f64>() / frames as f64;
        let p95 = percentile(&mut per_frame_ms, 95.0);
        results.push(SweepResult {
            input_side: side,
            frames_processed: frames,
            wall_seconds,
            fps: frames as f64 / wall_seconds,
            mean_inference_ms: mean,
            p95_inference_ms: p95,
            failed: None,
        });
    }
    Ok(results)
}
