use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use log::{info, warn};
use serde::Serialize;

use super::{NodeError, Shutdown, connect_with_backoff, reconnect_until_stopped};
use crate::imgio::{self, Image};
use crate::postproc::{BBox, Detection};
use crate::wire::{DetectionMsg, ImageFrame, Message};

/// Frames retained for the seq join; detections older than this ring
/// degrade to log-only records.
pub const FRAME_RING_SIZE: usize = 64;

#[derive(Debug, Clone)]
pub struct SinkConfig {
    pub broker: String,
    /// Topic carrying DetectionMsg.
    pub in_topic: String,
    /// Topic carrying ImageFrame.
    pub frames_topic: String,
    pub out_dir: PathBuf,
    /// Also write annotated images for empty detection sets.
    pub emit_empty: bool,
}

#[derive(Debug, Default)]
pub struct SinkStats {
    pub records: AtomicU64,
    pub images_written: AtomicU64,
    pub frames_seen: AtomicU64,
    pub frame_missing: AtomicU64,
}

#[derive(Serialize)]
struct DetectionRecord {
    class_id: u16,
    label: String,
    prob: f32,
    cx: f32,
    cy: f32,
    w: f32,
    h: f32,
}

/// One line of the newline-delimited structured log.
#[derive(Serialize)]
struct LogRecord {
    seq: u32,
    stamp_ns: u64,
    inference_ms: f32,
    count: usize,
    frame_missing: bool,
    detections: Vec<DetectionRecord>,
}

struct FrameRing {
    slots: Vec<Option<ImageFrame>>,
}

impl FrameRing {
    fn new() -> Self {
        Self {
            slots: (0..FRAME_RING_SIZE).map(|_| None).collect(),
        }
    }

    fn insert(&mut self, frame: ImageFrame) {
        let idx = frame.seq as usize % FRAME_RING_SIZE;
        self.slots[idx] = Some(frame);
    }

    fn get(&self, seq: u32) -> Option<&ImageFrame> {
        self.slots[seq as usize % FRAME_RING_SIZE]
            .as_ref()
            .filter(|f| f.seq == seq)
    }
}

/// Joins detection messages to their source frames by `src_seq`, burning
/// boxes into an annotated image and appending one JSON log record per
/// detection set.
pub fn run_sink(
    config: &SinkConfig,
    shutdown: &Shutdown,
    stats: &Arc<SinkStats>,
) -> Result<(), NodeError> {
    std::fs::create_dir_all(&config.out_dir)?;
    let log_path = config.out_dir.join("detections.jsonl");
    let mut log_file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)?;

    let mut client = connect_with_backoff(&config.broker, 6, shutdown)?;
    client.subscribe(&config.frames_topic)?;
    client.subscribe(&config.in_topic)?;
    info!(
        "sink joining '{}' to '{}' into {}",
        config.in_topic,
        config.frames_topic,
        config.out_dir.display()
    );

    let mut ring = FrameRing::new();
    while !shutdown.is_stopped() {
        let msg = match client.recv_timeout(Duration::from_millis(100)) {
            Ok(Some(m)) => m,
            Ok(None) => continue,
            Err(_) => match reconnect_until_stopped(&config.broker, shutdown) {
                Some(fresh) => {
                    let _ = fresh.subscribe(&config.frames_topic);
                    let _ = fresh.subscribe(&config.in_topic);
                    client = fresh;
                    continue;
                }
                None => break,
            },
        };
        let Message::Data { topic, body } = msg else {
            continue;
        };
        if topic == config.frames_topic {
            match ImageFrame::decode(&body) {
                Ok(frame) => {
                    stats.frames_seen.fetch_add(1, Ordering::Relaxed);
                    ring.insert(frame);
                }
                Err(e) => warn!("sink: malformed frame dropped: {e}"),
            }
        } else if topic == config.in_topic {
            match DetectionMsg::decode(&body) {
                Ok(msg) => handle_detections(config, stats, &mut ring, &mut log_file, msg)?,
                Err(e) => warn!("sink: malformed detection message dropped: {e}"),
            }
        }
    }
    Ok(())
}

fn handle_detections(
    config: &SinkConfig,
    stats: &Arc<SinkStats>,
    ring: &mut FrameRing,
    log_file: &mut std::fs::File,
    msg: DetectionMsg,
) -> Result<(), NodeError> {
    let frame = ring.get(msg.src_seq);
    let frame_missing = frame.is_none();
    if frame_missing {
        stats.frame_missing.fetch_add(1, Ordering::Relaxed);
    }

    let record = LogRecord {
        seq: msg.src_seq,
        stamp_ns: msg.stamp_ns,
        inference_ms: msg.inference_ms,
        count: msg.detections.len(),
        frame_missing,
        detections: msg
            .detections
            .iter()
            .map(|d| DetectionRecord {
                class_id: d.class_id,
                label: d.label.clone(),
                prob: d.prob,
                cx: d.cx,
                cy: d.cy,
                w: d.w,
                h: d.h,
            })
            .collect(),
    };
    let line = serde_json::to_string(&record)
        .map_err(|e| NodeError::Other(format!("log serialization failed: {e}")))?;
    writeln!(log_file, "{line}")?;
    stats.records.fetch_add(1, Ordering::Relaxed);

    if let Some(frame) = frame
        && (!msg.detections.is_empty() || config.emit_empty)
    {
        let mut image = Image::from_frame(frame)?;
        let detections: Vec<Detection> = msg
            .detections
            .iter()
            .map(|d| Detection {
                bbox: BBox::new(d.cx, d.cy, d.w, d.h),
                class_id: d.class_id as usize,
                label: d.label.clone(),
                prob: d.prob,
            })
            .collect();
        imgio::annotate(&mut image, &detections);
        let path = config.out_dir.join(format!("frame_{:06}.ppm", msg.src_seq));
        imgio::save_ppm(&image, &path)?;
        stats.images_written.fetch_add(1, Ordering::Relaxed);
    }
    Ok(())
}
