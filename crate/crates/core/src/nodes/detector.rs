use std::sync::Arc;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use log::{info, warn};

use super::mailbox::Mailbox;
use super::{NodeError, Shutdown, connect_with_backoff, now_ns, reconnect_until_stopped};
use crate::model::NetworkModel;
use crate::postproc::{Detection, ResizeMode, decode_region, nms, resize_to_input_mode};
use crate::wire::{DETECTION_MSG_TYPE, DetectionMsg, ImageFrame, Message, WireDetection};

/// Inference strategy behind the detector node. The stub variant is a
/// first-class test instrument.
pub trait DetectorBackend: Send {
    fn process(&mut self, frame: &ImageFrame) -> Result<Vec<Detection>, NodeError>;
    fn describe(&self) -> String;
}

/// Real model inference: resize → forward → decode → NMS.
pub struct ModelBackend {
    model: NetworkModel,
    conf_threshold: f32,
    nms_threshold: f32,
    resize_mode: ResizeMode,
}

impl ModelBackend {
    pub fn new(
        model: NetworkModel,
        conf_threshold: f32,
        nms_threshold: f32,
        resize_mode: ResizeMode,
    ) -> Self {
        Self {
            model,
            conf_threshold,
            nms_threshold,
            resize_mode,
        }
    }
}

impl DetectorBackend for ModelBackend {
    fn process(&mut self, frame: &ImageFrame) -> Result<Vec<Detection>, NodeError> {
        let input = resize_to_input_mode(frame, self.model.input_size(), self.resize_mode)?;
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

    fn describe(&self) -> String {
        format!("model@{}", self.model.input_size())
    }
}

/// Fixed-cost, fixed-output backend for pipeline tests and demos.
pub struct StubBackend {
    pub service_time: Duration,
    pub detections: Vec<Detection>,
}

impl StubBackend {
    pub fn new(service_time: Duration, detections: Vec<Detection>) -> Self {
        Self {
            service_time,
            detections,
        }
    }
}

impl DetectorBackend for StubBackend {
    fn process(&mut self, _frame: &ImageFrame) -> Result<Vec<Detection>, NodeError> {
        if !self.service_time.is_zero() {
            std::thread::sleep(self.service_time);
        }
        Ok(self.detections.clone())
    }

    fn describe(&self) -> String {
        format!("stub@{:?}", self.service_time)
    }
}

#[derive(Debug, Clone)]
pub struct DetectorConfig {
    pub broker: String,
    pub in_topic: String,
    pub out_topic: String,
}

#[derive(Debug, Default)]
pub struct DetectorStats {
    pub received: AtomicU64,
    pub processed: AtomicU64,
    /// Frames displaced from the depth-1 mailbox before processing.
    pub replaced: AtomicU64,
    pub published: AtomicU64,
    pub malformed: AtomicU64,
    /// Worst observed dequeue age (publish stamp to dequeue), nanoseconds.
    pub max_age_ns: AtomicU64,
    pub last_seq: AtomicU64,
}

fn update_max(cell: &AtomicU64, value: u64) {
    let mut current = cell.load(Ordering::Relaxed);
    while value > current {
        match cell.compare_exchange_weak(current, value, Ordering::Relaxed, Ordering::Relaxed) {
            Ok(_) => break,
            Err(seen) => current = seen,
        }
    }
}

/// Consumes frames from `in_topic`, runs the backend, and publishes one
/// [`DetectionMsg`] per processed frame on `out_topic`. Frames arriving while
/// the backend is busy replace the waiting one (latest-wins, depth 1).
pub fn run_detector(
    config: &DetectorConfig,
    mut backend: Box<dyn DetectorBackend>,
    shutdown: &Shutdown,
    stats: &Arc<DetectorStats>,
) -> Result<(), NodeError> {
    let client = connect_with_backoff(&config.broker, 6, shutdown)?;
    client.advertise(&config.out_topic, DETECTION_MSG_TYPE)?;
    client.subscribe(&config.in_topic)?;
    info!(
        "detector ({}) consuming '{}' publishing '{}'",
        backend.describe(),
        config.in_topic,
        config.out_topic
    );

    let mailbox: Arc<Mailbox<ImageFrame>> = Arc::new(Mailbox::new());
    let sender = client.sender();

    // Receive flow: decode frames into the latest-wins mailbox.
    let rx_mailbox = mailbox.clone();
    let rx_shutdown = shutdown.clone();
    let rx_stats = stats.clone();
    let rx_config = config.clone();
    let receiver = std::thread::Builder::new()
        .name("detector-rx".into())
        .spawn(move || {
            let mut client = client;
            loop {
                if rx_shutdown.is_stopped() {
                    break;
                }
                match client.recv_timeout(Duration::from_millis(100)) {
                    Ok(Some(Message::Data { body, .. })) => {
                        rx_stats.received.fetch_add(1, Ordering::Relaxed);
                        match ImageFrame::decode(&body) {
                            Ok(frame) => {
                                if rx_mailbox.put(frame) {
                                    rx_stats.replaced.fetch_add(1, Ordering::Relaxed);
                                }
                            }
                            Err(e) => {
                                warn!("detector: malformed frame dropped: {e}");
                                rx_stats.malformed.fetch_add(1, Ordering::Relaxed);
                            }
                        }
                    }
                    Ok(Some(Message::Nack { reason })) => {
                        warn!("detector received NACK: {reason}");
                    }
                    Ok(Some(_)) | Ok(None) => {}
                    Err(_) => {
                        // Session dropped; re-establish until shutdown.
                        match reconnect_until_stopped(&rx_config.broker, &rx_shutdown) {
                            Some(fresh) => {
                                let _ = fresh.subscribe(&rx_config.in_topic);
                                client = fresh;
                            }
                            None => break,
                        }
                    }
                }
            }
            rx_mailbox.close();
        })?;

    // Process flow: latest frame → backend → publish.
    loop {
        let Some(frame) = mailbox.take_timeout(Duration::from_millis(100)) else {
            if shutdown.is_stopped() || mailbox.is_closed() {
                break;
            }
            continue;
        };
        let age = now_ns().saturating_sub(frame.stamp_ns);
        update_max(&stats.max_age_ns, age);
        let started = Instant::now();
        let detections = match backend.process(&frame) {
            Ok(d) => d,
            Err(e) => {
                warn!("detector: frame {} failed: {e}", frame.seq);
                continue;
            }
        };
        let inference_ms = started.elapsed().as_secs_f64() * 1e3;
        stats.processed.fetch_add(1, Ordering::Relaxed);
        stats.last_seq.store(frame.seq as u64, Ordering::Relaxed);

        let msg = DetectionMsg {
            src_seq: frame.seq,
            stamp_ns: now_ns(),
            inference_ms: inference_ms as f32,
            detections: detections
                .iter()
                .map(|d| WireDetection {
                    class_id: d.class_id as u16,
                    prob: d.prob,
                    cx: d.bbox.cx,
                    cy: d.bbox.cy,
                    w: d.bbox.w,
                    h: d.bbox.h,
                    label: d.label.clone(),
                })
                .collect(),
        };
        match msg.encode() {
            Ok(body) => {
                if sender.publish(&config.out_topic, &body).is_ok() {
                    stats.published.fetch_add(1, Ordering::Relaxed);
                }
            }
            Err(e) => warn!("detector: encode failed: {e}"),
        }
    }

    shutdown.stop();
    sender.close();
    let _ = receiver.join();
    Ok(())
}
