use std::path::PathBuf;
use std::sync::Arc;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use log::{info, warn};

use super::{NodeError, Shutdown, connect_with_backoff, now_ns, reconnect_until_stopped};
use crate::imgio::{self, Image};
use crate::wire::IMAGE_FRAME_TYPE;

/// Resolution/rate budget of the source platform: 640x480 is the highest
/// resolution the robot publishes at ~30 Hz.
pub const RATE_BUDGET: (usize, usize, f64) = (640, 480, 30.0);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CameraSource {
    /// Deterministic synthetic pattern.
    Pattern,
    /// Images from a directory, sorted by name and looped.
    Directory(PathBuf),
}

#[derive(Debug, Clone)]
pub struct CameraConfig {
    pub broker: String,
    pub topic: String,
    pub width: u16,
    pub height: u16,
    pub rate_hz: f64,
    pub source: CameraSource,
}

impl CameraConfig {
    pub fn validate(&self) -> Result<(), NodeError> {
        if self.rate_hz <= 0.0 || !self.rate_hz.is_finite() {
            return Err(NodeError::InvalidConfig(format!(
                "rate must be positive, got {}",
                self.rate_hz
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(NodeError::InvalidConfig(
                "frame size must be positive".into(),
            ));
        }
        if self.exceeds_rate_budget() {
            warn!(
                "{}x{} at {} Hz exceeds the platform budget (max {}x{} at ~{} Hz)",
                self.width, self.height, self.rate_hz, RATE_BUDGET.0, RATE_BUDGET.1, RATE_BUDGET.2
            );
        }
        Ok(())
    }

    pub fn exceeds_rate_budget(&self) -> bool {
        self.width as usize * self.height as usize > RATE_BUDGET.0 * RATE_BUDGET.1
            && self.rate_hz >= RATE_BUDGET.2
    }
}

#[derive(Debug, Default)]
pub struct CameraStats {
    pub published: AtomicU64,
    pub skipped_files: AtomicU64,
    pub reconnects: AtomicU64,
}

enum FrameSource {
    Pattern,
    Images(Vec<Image>),
}

impl FrameSource {
    fn frame(&self, seq: u32, width: usize, height: usize) -> Image {
        match self {
            FrameSource::Pattern => imgio::test_pattern(seq, width, height),
            FrameSource::Images(images) => {
                let img = &images[seq as usize % images.len()];
                imgio::resize_rgb8(img, width, height)
            }
        }
    }
}

fn load_directory(dir: &PathBuf, stats: &CameraStats) -> Result<Vec<Image>, NodeError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("ppm") | Some("png") | Some("jpg") | Some("jpeg")
            )
        })
        .collect();
    paths.sort();
    let mut images = Vec::new();
    for path in paths {
        match imgio::load_image(&path) {
            Ok(img) => images.push(img),
            Err(e) => {
                warn!("skipping unreadable image {}: {e}", path.display());
                stats.skipped_files.fetch_add(1, Ordering::Relaxed);
            }
        }
    }
    if images.is_empty() {
        return Err(NodeError::InvalidConfig(format!(
            "no readable images in {}",
            dir.display()
        )));
    }
    Ok(images)
}

/// Publishes frames at the configured rate with monotonically increasing
/// sequence numbers and wall-clock stamps. Pacing uses absolute deadlines so
/// steady-state error stays within a fraction of the period.
pub fn run_camera(
    config: &CameraConfig,
    shutdown: &Shutdown,
    stats: &Arc<CameraStats>,
) -> Result<(), NodeError> {
    config.validate()?;
    let source = match &config.source {
        CameraSource::Pattern => FrameSource::Pattern,
        CameraSource::Directory(dir) => FrameSource::Images(load_directory(dir, stats)?),
    };

    let client = connect_with_backoff(&config.broker, 6, shutdown)?;
    let mut sender = client.sender();
    sender.advertise(&config.topic, IMAGE_FRAME_TYPE)?;
    info!(
        "camera publishing {}x{} at {} Hz on '{}'",
        config.width, config.height, config.rate_hz, config.topic
    );

    let period = Duration::from_secs_f64(1.0 / config.rate_hz);
    let start = Instant::now();
    let mut seq: u32 = 0;
    loop {
        if shutdown.is_stopped() {
            break;
        }
        let image = source.frame(seq, config.width as usize, config.height as usize);
        let frame = image.to_frame(seq, now_ns())?;
        if let Err(e) = sender.publish(&config.topic, &frame.encode()) {
            warn!("camera publish failed ({e}); reconnecting");
            stats.reconnects.fetch_add(1, Ordering::Relaxed);
            match reconnect_until_stopped(&config.broker, shutdown) {
                Some(client) => {
                    sender = client.sender();
                    sender.advertise(&config.topic, IMAGE_FRAME_TYPE)?;
                    continue; // resend this frame
                }
                None => break,
            }
        }
        stats.published.fetch_add(1, Ordering::Relaxed);
        seq = seq.wrapping_add(1);

        // Absolute schedule: deadline k = start + k·period.
        let deadline = start + period.mul_f64(seq as f64);
        let now = Instant::now();
        if deadline > now {
            std::thread::sleep(deadline - now);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(rate: f64) -> CameraConfig {
        CameraConfig {
            broker: "127.0.0.1:1".into(),
            topic: "camera".into(),
            width: 64,
            height: 48,
            rate_hz: rate,
            source: CameraSource::Pattern,
        }
    }

    #[test]
    fn zero_rate_rejected() {
        assert!(matches!(
            config(0.0).validate(),
            Err(NodeError::InvalidConfig(_))
        ));
    }

    #[test]
    fn budget_flag_trips_above_vga_at_30hz() {
        let mut c = config(30.0);
        c.width = 1280;
        c.height = 720;
        assert!(c.exceeds_rate_budget());
        c.rate_hz = 10.0;
        assert!(!c.exceeds_rate_budget());
        let vga = CameraConfig {
            width: 640,
            height: 480,
            ..config(30.0)
        };
        assert!(!vga.exceeds_rate_budget());
    }
}
