use super::WireError;

/// Message type byte for topic advertisement.
pub const MSG_ADVERTISE: u8 = 0x01;
/// Message type byte for topic subscription.
pub const MSG_SUBSCRIBE: u8 = 0x02;
/// Message type byte for topic data.
pub const MSG_DATA: u8 = 0x03;
/// Message type byte for a negative acknowledgement.
pub const MSG_NACK: u8 = 0x7F;

/// Topic type name carried by camera frames.
pub const IMAGE_FRAME_TYPE: &str = "ImageFrame";
/// Topic type name carried by detector results.
pub const DETECTION_MSG_TYPE: &str = "DetectionMsg";

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<(), WireError> {
    let bytes = s.as_bytes();
    if bytes.len() > u16::MAX as usize {
        return Err(WireError::StringTooLong(bytes.len()));
    }
    out.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
    out.extend_from_slice(bytes);
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.pos + n > self.bytes.len() {
            return Err(WireError::Truncated {
                needed: self.pos + n,
                have: self.bytes.len(),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, WireError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, WireError> {
        let len = self.u16()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| WireError::InvalidUtf8)
    }

    fn finish(&self) -> Result<(), WireError> {
        if self.pos != self.bytes.len() {
            return Err(WireError::TrailingBytes(self.bytes.len() - self.pos));
        }
        Ok(())
    }
}

/// Control-plane and data-plane messages exchanged with the broker. Strings
/// are length-prefixed (u16 little-endian) UTF-8.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Advertise { topic: String, type_name: String },
    Subscribe { topic: String },
    Data { topic: String, body: Vec<u8> },
    Nack { reason: String },
}

impl Message {
    pub fn msg_type(&self) -> u8 {
        match self {
            Message::Advertise { .. } => MSG_ADVERTISE,
            Message::Subscribe { .. } => MSG_SUBSCRIBE,
            Message::Data { .. } => MSG_DATA,
            Message::Nack { .. } => MSG_NACK,
        }
    }

    pub fn encode_payload(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::new();
        match self {
            Message::Advertise { topic, type_name } => {
                put_str(&mut out, topic)?;
                put_str(&mut out, type_name)?;
            }
            Message::Subscribe { topic } => put_str(&mut out, topic)?,
            Message::Data { topic, body } => {
                put_str(&mut out, topic)?;
                out.extend_from_slice(body);
            }
            Message::Nack { reason } => put_str(&mut out, reason)?,
        }
        Ok(out)
    }

    /// Full frame bytes for this message.
    pub fn to_frame(&self) -> Result<Vec<u8>, WireError> {
        super::encode_frame(self.msg_type(), &self.encode_payload()?)
    }

    pub fn decode(msg_type: u8, payload: &[u8]) -> Result<Message, WireError> {
        let mut cur = Cursor::new(payload);
        let msg = match msg_type {
            MSG_ADVERTISE => {
                let topic = cur.string()?;
                let type_name = cur.string()?;
                cur.finish()?;
                Message::Advertise { topic, type_name }
            }
            MSG_SUBSCRIBE => {
                let topic = cur.string()?;
                cur.finish()?;
                Message::Subscribe { topic }
            }
            MSG_DATA => {
                let topic = cur.string()?;
                let body = payload[cur.pos..].to_vec();
                Message::Data { topic, body }
            }
            MSG_NACK => {
                let reason = cur.string()?;
                cur.finish()?;
                Message::Nack { reason }
            }
            other => return Err(WireError::UnknownMessageType(other)),
        };
        Ok(msg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum PixelEncoding {
    Rgb8 = 0,
    Gray8 = 1,
}

impl PixelEncoding {
    pub fn bytes_per_pixel(&self) -> usize {
        match self {
            PixelEncoding::Rgb8 => 3,
            PixelEncoding::Gray8 => 1,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self, WireError> {
        match b {
            0 => Ok(PixelEncoding::Rgb8),
            1 => Ok(PixelEncoding::Gray8),
            other => Err(WireError::UnknownEncoding(other)),
        }
    }
}

/// Wire-level camera frame. The pixel payload is row-major with no padding;
/// its length must equal width·height·bytes-per-pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageFrame {
    pub seq: u32,
    pub stamp_ns: u64,
    pub width: u16,
    pub height: u16,
    pub encoding: PixelEncoding,
    pub pixels: Vec<u8>,
}

/// Serialized size of the fixed frame header fields.
pub const IMAGE_FRAME_HEADER_LEN: usize = 4 + 8 + 2 + 2 + 1;

impl ImageFrame {
    pub fn new(
        seq: u32,
        stamp_ns: u64,
        width: u16,
        height: u16,
        encoding: PixelEncoding,
        pixels: Vec<u8>,
    ) -> Result<Self, WireError> {
        let expected = width as usize * height as usize * encoding.bytes_per_pixel();
        if pixels.len() != expected {
            return Err(WireError::FramePayloadLength {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            seq,
            stamp_ns,
            width,
            height,
            encoding,
            pixels,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(IMAGE_FRAME_HEADER_LEN + self.pixels.len());
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&self.stamp_ns.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.push(self.encoding as u8);
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut cur = Cursor::new(bytes);
        let seq = cur.u32()?;
        let stamp_ns = cur.u64()?;
        let width = cur.u16()?;
        let height = cur.u16()?;
        let encoding = PixelEncoding::from_byte(cur.u8()?)?;
        let pixels = bytes[cur.pos..].to_vec();
        Self::new(seq, stamp_ns, width, height, encoding, pixels)
    }
}

/// One detection as carried inside a [`DetectionMsg`].
#[derive(Debug, Clone, PartialEq)]
pub struct WireDetection {
    pub class_id: u16,
    pub prob: f32,
    pub cx: f32,
    pub cy: f32,
    pub w: f32,
    pub h: f32,
    pub label: String,
}

/// Detector answer for one consumed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMsg {
    /// Sequence number of the frame this answers.
    pub src_seq: u32,
    pub stamp_ns: u64,
    pub inference_ms: f32,
    pub detections: Vec<WireDetection>,
}

impl DetectionMsg {
    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        if self.detections.len() > u16::MAX as usize {
            return Err(WireError::TooManyDetections(self.detections.len()));
        }
        let mut out = Vec::new();
        out.extend_from_slice(&self.src_seq.to_le_bytes());
        out.extend_from_slice(&self.stamp_ns.to_le_bytes());
        out.extend_from_slice(&self.inference_ms.to_le_bytes());
        out.extend_from_slice(&(self.detections.len() as u16).to_le_bytes());
        for d in &self.detections {
            out.extend_from_slice(&d.class_id.to_le_bytes());
            out.extend_from_slice(&d.prob.to_le_bytes());
            out.extend_from_slice(&d.cx.to_le_bytes());
            out.extend_from_slice(&d.cy.to_le_bytes());
            out.extend_from_slice(&d.w.to_le_bytes());
            out.extend_from_slice(&d.h.to_le_bytes());
            put_str(&mut out, &d.label)?;
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut cur = Cursor::new(bytes);
        let src_seq = cur.u32()?;
        let stamp_ns = cur.u64()?;
        let inference_ms = cur.f32()?;
        let count = cur.u16()? as usize;
        let mut detections = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            detections.push(WireDetection {
                class_id: cur.u16()?,
                prob: cur.f32()?,
                cx: cur.f32()?,
                cy: cur.f32()?,
                w: cur.f32()?,
                h: cur.f32()?,
                label: cur.string()?,
            });
        }
        cur.finish()?;
        Ok(Self {
            src_seq,
            stamp_ns,
            inference_ms,
            detections,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::{FRAME_HEADER_LEN, FrameDecoder, encode_frame};

    #[test]
    fn control_messages_round_trip() {
        let msgs = [
            Message::Advertise {
                topic: "camera".into(),
                type_name: IMAGE_FRAME_TYPE.into(),
            },
            Message::Subscribe {
                topic: "detections".into(),
            },
            Message::Data {
                topic: "camera".into(),
                body: vec![1, 2, 3],
            },
            Message::Nack {
                reason: "not advertised".into(),
            },
        ];
        for msg in msgs {
            let payload = msg.encode_payload().unwrap();
            assert_eq!(Message::decode(msg.msg_type(), &payload).unwrap(), msg);
        }
    }

    #[test]
    fn vga_frame_size_accounting() {
        let frame =
            ImageFrame::new(1, 2, 640, 480, PixelEncoding::Rgb8, vec![0; 640 * 480 * 3]).unwrap();
        let body = frame.encode();
        assert_eq!(body.len(), IMAGE_FRAME_HEADER_LEN + 921_600);
        assert_eq!(IMAGE_FRAME_HEADER_LEN, 17);
        let framed = encode_frame(MSG_DATA, &body).unwrap();
        assert_eq!(framed.len(), FRAME_HEADER_LEN + 17 + 921_600);
    }

    #[test]
    fn image_frame_round_trip() {
        let frame =
            ImageFrame::new(7, 99, 3, 2, PixelEncoding::Gray8, vec![9, 8, 7, 6, 5, 4]).unwrap();
        assert_eq!(ImageFrame::decode(&frame.encode()).unwrap(), frame);
    }

    #[test]
    fn image_frame_payload_length_enforced() {
        assert!(matches!(
            ImageFrame::new(0, 0, 2, 2, PixelEncoding::Rgb8, vec![0; 5]),
            Err(WireError::FramePayloadLength {
                expected: 12,
                actual: 5
            })
        ));
    }

    #[test]
    fn detection_msg_round_trip() {
        let msg = DetectionMsg {
            src_seq: 41,
            stamp_ns: 123_456_789,
            inference_ms: 12.5,
            detections: vec![
                WireDetection {
                    class_id: 11,
                    prob: 0.78,
                    cx: 0.5,
                    cy: 0.25,
                    w: 0.1,
                    h: 0.2,
                    label: "dog".into(),
                },
                WireDetection {
                    class_id: 6,
                    prob: 0.55,
                    cx: 0.7,
                    cy: 0.6,
                    w: 0.3,
                    h: 0.2,
                    label: "car".into(),
                },
            ],
        };
        assert_eq!(DetectionMsg::decode(&msg.encode().unwrap()).unwrap(), msg);
    }

    #[test]
    fn data_message_survives_framing() {
        let body: Vec<u8> = (0..=255).collect();
        let msg = Message::Data {
            topic: "t".into(),
            body: body.clone(),
        };
        let mut dec = FrameDecoder::default();
        dec.push(&msg.to_frame().unwrap());
        let (t, p) = dec.next_frame().unwrap().unwrap();
        match Message::decode(t, &p).unwrap() {
            Message::Data { topic, body: b } => {
                assert_eq!(topic, "t");
                assert_eq!(b, body);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
