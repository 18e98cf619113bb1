use super::WireError;

/// Frame preamble: `R` `P`.
pub const MAGIC: [u8; 2] = [0x52, 0x50];
/// Fixed framing overhead: magic, 32-bit payload length, message type.
pub const FRAME_HEADER_LEN: usize = 7;
/// Default cap on payload size; fits 1080p RGB with headroom.
pub const DEFAULT_MAX_PAYLOAD: usize = 16 * 1024 * 1024;

/// Wraps a payload: magic bytes, payload length as little-endian u32, the
/// message type byte, then the payload itself.
pub fn encode_frame(msg_type: u8, payload: &[u8]) -> Result<Vec<u8>, WireError> {
    if payload.len() >= u32::MAX as usize {
        return Err(WireError::PayloadTooLarge {
            len: payload.len(),
            max: u32::MAX as usize - 1,
        });
    }
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.push(msg_type);
    out.extend_from_slice(payload);
    Ok(out)
}

/// Incremental frame decoder. Feed bytes as they arrive; complete frames are
/// handed out in order. An incomplete buffer is not an error — `next_frame`
/// returns `None` until a whole frame is present.
#[derive(Debug)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    start: usize,
    max_payload: usize,
}

impl Default for FrameDecoder {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_PAYLOAD)
    }
}

impl FrameDecoder {
    pub fn new(max_payload: usize) -> Self {
        Self {
            buf: Vec::new(),
            start: 0,
            max_payload,
        }
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if self.start > 0 && self.start == self.buf.len() {
            self.buf.clear();
            self.start = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    /// Bytes buffered but not yet decoded.
    pub fn pending(&self) -> usize {
        self.buf.len() - self.start
    }

    pub fn next_frame(&mut self) -> Result<Option<(u8, Vec<u8>)>, WireError> {
        let pending = &self.buf[self.start..];
        // Validate the magic as soon as it is visible so a corrupt stream
        // fails fast instead of waiting on a bogus length.
        if !pending.is_empty() && pending[0] != MAGIC[0] {
            return Err(WireError::BadMagic {
                found: [pending[0], *pending.get(1).unwrap_or(&0)],
            });
        }
        if pending.len() >= 2 && pending[1] != MAGIC[1] {
            return Err(WireError::BadMagic {
                found: [pending[0], pending[1]],
            });
        }
        if pending.len() < FRAME_HEADER_LEN {
            return Ok(None);
        }
        let len = u32::from_le_bytes(pending[2..6].try_into().unwrap()) as usize;
        if len > self.max_payload {
            return Err(WireError::PayloadTooLarge {
                len,
                max: self.max_payload,
            });
        }
        if pending.len() < FRAME_HEADER_LEN + len {
            return Ok(None);
        }
        let msg_type = pending[6];
        let payload = pending[FRAME_HEADER_LEN..FRAME_HEADER_LEN + len].to_vec();
        self.start += FRAME_HEADER_LEN + len;
        // Reclaim consumed space once it dominates the buffer.
        if self.start > 64 * 1024 && self.start * 2 > self.buf.len() {
            self.buf.drain(..self.start);
            self.start = 0;
        }
        Ok(Some((msg_type, payload)))
    }
}
