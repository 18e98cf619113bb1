//! The three pipeline runners — camera source, detector, sink — wired
//! through the broker. Each node is internally concurrent: network receive,
//! processing, and publish are separate flows joined by bounded queues.

mod camera;
mod detector;
mod mailbox;
mod sink;

pub use camera::{CameraConfig, CameraSource, CameraStats, run_camera};
pub use detector::{
    DetectorBackend, DetectorConfig, DetectorStats, ModelBackend, StubBackend, run_detector,
};
pub use mailbox::Mailbox;
pub use sink::{SinkConfig, SinkStats, run_sink};

use std::sync::Arc;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use log::warn;
use thiserror::Error;

use crate::wire::{Client, WireError};

#[derive(Debug, Error)]
pub enum NodeError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("broker unreachable at {addr}: {last}")]
    BrokerUnreachable { addr: String, last: String },
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Postproc(#[from] crate::postproc::PostprocError),
    #[error(transparent)]
    Image(#[from] crate::imgio::ImageError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

/// Cooperative stop flag shared between a node's flows.
#[derive(Debug, Clone, Default)]
pub struct Shutdown {
    flag: Arc<AtomicBool>,
}

impl Shutdown {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stop(&self) {
        self.flag.store(true, Ordering::Relaxed);
    }

    pub fn is_stopped(&self) -> bool {
        self.flag.load(Ordering::Relaxed)
    }
}

/// Initial connect with bounded exponential backoff; nodes exit nonzero when
/// the broker never shows up.
pub(crate) fn connect_with_backoff(
    addr: &str,
    attempts: u32,
    shutdown: &Shutdown,
) -> Result<Client, NodeError> {
    let mut delay = Duration::from_millis(100);
    let mut last = String::from("no attempt made");
    for attempt in 0..attempts {
        if shutdown.is_stopped() {
            break;
        }
        match Client::connect(addr) {
            Ok(client) => return Ok(client),
            Err(e) => {
                last = e.to_string();
                if attempt + 1 < attempts {
                    warn!("connect to {addr} failed ({last}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay = (delay * 2).min(Duration::from_secs(2));
                }
            }
        }
    }
    Err(NodeError::BrokerUnreachable {
        addr: addr.to_string(),
        last,
    })
}

/// Reconnect loop used after a session drops mid-run: retries until shutdown,
/// so a restarted broker or peer lets the pipeline resume.
pub(crate) fn reconnect_until_stopped(addr: &str, shutdown: &Shutdown) -> Option<Client> {
    let mut delay = Duration::from_millis(100);
    while !shutdown.is_stopped() {
        match Client::connect(addr) {
            Ok(client) => return Some(client),
            Err(_) => {
                std::thread::sleep(delay);
                delay = (delay * 2).min(Duration::from_secs(2));
            }
        }
    }
    None
}

pub(crate) fn now_ns() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0)
}
