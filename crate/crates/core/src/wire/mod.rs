//! Broker-based pub/sub transport: length-prefixed binary framing over TCP,
//! a topic registry on the MASTER side, and publish/subscribe sessions.
//!
//! All data flows through the broker. Fan-out to slow subscribers never
//! blocks a publisher: each subscriber has a bounded outgoing queue that
//! drops its oldest entry on overflow. All integers are little-endian on
//! the wire.

mod broker;
mod client;
mod frame;
mod message;
mod registry;

pub use broker::{Broker, BrokerConfig, BrokerHandle, BrokerStats};
pub use client::{Client, ClientSender};
pub use frame::{DEFAULT_MAX_PAYLOAD, FRAME_HEADER_LEN, FrameDecoder, MAGIC, encode_frame};
pub use message::{
    DETECTION_MSG_TYPE, DetectionMsg, IMAGE_FRAME_HEADER_LEN, IMAGE_FRAME_TYPE, ImageFrame,
    MSG_ADVERTISE, MSG_DATA, MSG_NACK, MSG_SUBSCRIBE, Message, PixelEncoding, WireDetection,
};
pub use registry::{SessionId, TopicEntry, TopicRegistry, TypeConflict};

use thiserror::Error;

/// Socket buffer size requested on every session. Bursts of small frames
/// otherwise collapse the TCP window under per-segment overhead accounting,
/// and a VGA frame is ~900 KiB on its own.
pub(crate) const SOCKET_BUFFER_SIZE: usize = 4 * 1024 * 1024;

pub(crate) fn tune_stream(stream: &std::net::TcpStream) -> std::io::Result<()> {
    stream.set_nodelay(true)?;
    let sock = socket2::SockRef::from(stream);
    // Best effort: a capped buffer still works, just with more flow control.
    let _ = sock.set_recv_buffer_size(SOCKET_BUFFER_SIZE);
    let _ = sock.set_send_buffer_size(SOCKET_BUFFER_SIZE);
    Ok(())
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("bad magic bytes {found:02x?}")]
    BadMagic { found: [u8; 2] },
    #[error("payload of {len} bytes exceeds maximum {max}")]
    PayloadTooLarge { len: usize, max: usize },
    #[error("message truncated: needed {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("{0} trailing bytes after message body")]
    TrailingBytes(usize),
    #[error("string field is not valid UTF-8")]
    InvalidUtf8,
    #[error("string of {0} bytes exceeds the u16 length prefix")]
    StringTooLong(usize),
    #[error("unknown message type 0x{0:02x}")]
    UnknownMessageType(u8),
    #[error("unknown pixel encoding {0}")]
    UnknownEncoding(u8),
    #[error("frame payload length {actual} does not match geometry ({expected} bytes)")]
    FramePayloadLength { expected: usize, actual: usize },
    #[error("too many detections for one message ({0})")]
    TooManyDetections(usize),
    #[error("connection closed by peer")]
    ConnectionClosed,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
