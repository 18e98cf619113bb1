//! Image I/O and drawing: PPM (P6) read/write, optional PNG/JPEG reading,
//! RGB8 bilinear resize, synthetic camera patterns, and detection burn-in.

mod font;

use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::postproc::Detection;
use crate::wire::{ImageFrame, PixelEncoding, WireError};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a P6 PPM file")]
    NotP6,
    #[error("malformed PPM header")]
    BadHeader,
    #[error("unsupported PPM maxval {0} (only 255)")]
    BadMaxval(u32),
    #[error("PPM pixel data truncated: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("image has a zero dimension")]
    EmptyImage,
    #[error("image too large for the frame format ({width}x{height})")]
    TooLarge { width: u32, height: u32 },
    #[error("decode error: {0}")]
    Decode(String),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Plain RGB8 raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage);
        }
        if pixels.len() != width * height * 3 {
            return Err(ImageError::Truncated {
                expected: width * height * 3,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&color);
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    /// Wraps the raster into a wire frame.
    pub fn to_frame(&self, seq: u32, stamp_ns: u64) -> Result<ImageFrame, ImageError> {
        if self.width > u16::MAX as usize || self.height > u16::MAX as usize {
            return Err(ImageError::TooLarge {
                width: self.width as u32,
                height: self.height as u32,
            });
        }
        Ok(ImageFrame::new(
            seq,
            stamp_ns,
            self.width as u16,
            self.height as u16,
            PixelEncoding::Rgb8,
            self.pixels.clone(),
        )?)
    }

    /// Expands a wire frame back to RGB8 (gray frames are replicated).
    pub fn from_frame(frame: &ImageFrame) -> Result<Self, ImageError> {
        let (w, h) = (frame.width as usize, frame.height as usize);
        let pixels = match frame.encoding {
            PixelEncoding::Rgb8 => frame.pixels.clone(),
            PixelEncoding::Gray8 => frame.pixels.iter().flat_map(|&v| [v, v, v]).collect(),
        };
        Image::new(w, h, pixels)
    }
}

/// Parses a binary P6 PPM. Header tokens may be separated by arbitrary
/// whitespace and `#` comments; maxval must be 255.
pub fn decode_ppm(bytes: &[u8]) -> Result<Image, ImageError> {
    if bytes.len() < 2 || &bytes[0..2] != b"P6" {
        return Err(ImageError::NotP6);
    }
    let mut pos = 2usize;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and comments.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(ImageError::BadHeader);
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(ImageError::BadHeader)?;
    }
    // Exactly one whitespace byte separates the header from pixel data.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(ImageError::BadHeader);
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(ImageError::BadMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(ImageError::EmptyImage);
    }
    let expected = width as usize * height as usize * 3;
    let data = &bytes[pos..];
    if data.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            actual: data.len(),
        });
    }
    Image::new(width as usize, height as usize, data[..expected].to_vec())
}

pub fn encode_ppm(image: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + image.pixels.len());
    let _ = write!(out, "P6\n{} {}\n255\n", image.width, image.height);
    out.extend_from_slice(&image.pixels);
    out
}

pub fn load_ppm(path: &Path) -> Result<Image, ImageError> {
    decode_ppm(&std::fs::read(path)?)
}

pub fn save_ppm(image: &Image, path: &Path) -> Result<(), ImageError> {
    Ok(std::fs::write(path, encode_ppm(image))?)
}

/// Loads an image by extension: `.ppm` natively; `.png`, `.jpg`/`.jpeg`
/// through the image crate.
pub fn load_image(path: &Path) -> Result<Image, ImageError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "ppm" => load_ppm(path),
        "png" | "jpg" | "jpeg" => {
            let img = image::open(path)
                .map_err(|e| ImageError::Decode(e.to_string()))?
                .to_rgb8();
            Image::new(img.width() as usize, img.height() as usize, img.into_raw())
        }
        other => Err(ImageError::Decode(format!(
            "unsupported image extension `.{other}` (expected ppm/png/jpg)"
        ))),
    }
}

/// Bilinear resize on raw RGB8, half-pixel-center convention.
pub fn resize_rgb8(src: &Image, width: usize, height: usize) -> Image {
    if width == src.width && height == src.height {
        return src.clone();
    }
    let mut pixels = vec![0u8; width * height * 3];
    for dy in 0..height {
        let sy = ((dy as f32 + 0.5) * src.height as f32 / height as f32 - 0.5)
            .clamp(0.0, (src.height - 1) as f32);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(src.height - 1);
        let fy = sy - y0 as f32;
        for dx in 0..width {
            let sx = ((dx as f32 + 0.5) * src.width as f32 / width as f32 - 0.5)
                .clamp(0.0, (src.width - 1) as f32);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(src.width - 1);
            let fx = sx - x0 as f32;
            for c in 0..3 {
                let p = |x: usize, y: usize| src.pixels[(y * src.width + x) * 3 + c] as f32;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                pixels[(dy * width + dx) * 3 + c] = (v + 0.5) as u8;
            }
        }
    }
    Image {
        width,
        height,
        pixels,
    }
}

/// Deterministic synthetic camera pattern: a moving gradient with a bright
/// block that wanders with the sequence number, so consecutive frames differ.
pub fn test_pattern(seq: u32, width: usize, height: usize) -> Image {
    let mut pixels = vec![0u8; width * height * 3];
    let phase = (seq as usize * 7) % width.max(1);
    for y in 0..height {
        for x in 0..width {
            let idx = (y * width + x) * 3;
            pixels[idx] = (((x + phase) * 255) / width.max(1)) as u8;
            pixels[idx + 1] = ((y * 255) / height.max(1)) as u8;
            pixels[idx + 2] = (seq % 251) as u8;
        }
    }
    // Wandering block.
    let bw = (width / 8).max(1);
    let bh = (height / 8).max(1);
    let bx = (seq as usize * 13) % width.saturating_sub(bw).max(1);
    let by = (seq as usize * 5) % height.saturating_sub(bh).max(1);
    for y in by..(by + bh).min(height) {
        for x in bx..(bx + bw).min(width) {
            let idx = (y * width + x) * 3;
            pixels[idx..idx + 3].copy_from_slice(&[255, 255, 255]);
        }
    }
    Image {
        width,
        height,
        pixels,
    }
}

/// Fixed palette rotated by class id.
fn class_color(class_id: usize) -> [u8; 3] {
    const PALETTE: [[u8; 3]; 10] = [
        [230, 25, 75],
        [60, 180, 75],
        [255, 225, 25],
        [0, 130, 200],
        [245, 130, 48],
        [145, 30, 180],
        [70, 240, 240],
        [240, 50, 230],
        [210, 245, 60],
        [250, 190, 190],
    ];
    PALETTE[class_id % PALETTE.len()]
}

/// Burns detection boxes and labels into the image.
pub fn annotate(image: &mut Image, detections: &[Detection]) {
    let (w, h) = (image.width, image.height);
    for det in detections {
        let color = class_color(det.class_id);
        let (x0, y0, x1, y1) = det.bbox.corners();
        let px0 = ((x0 * w as f32) as isize).clamp(0, w as isize - 1) as usize;
        let py0 = ((y0 * h as f32) as isize).clamp(0, h as isize - 1) as usize;
        let px1 = ((x1 * w as f32) as isize).clamp(0, w as isize - 1) as usize;
        let py1 = ((y1 * h as f32) as isize).clamp(0, h as isize - 1) as usize;
        for t in 0..2usize {
            for x in px0..=px1 {
                for y in [py0 + t, py1.saturating_sub(t)] {
                    if y < h {
                        let idx = (y * w + x) * 3;
                        image.pixels[idx..idx + 3].copy_from_slice(&color);
                    }
                }
            }
            for y in py0..=py1 {
                for x in [px0 + t, px1.saturating_sub(t)] {
                    if x < w {
                        let idx = (y * w + x) * 3;
                        image.pixels[idx..idx + 3].copy_from_slice(&color);
                    }
                }
            }
        }
        let text = format!("{} {:.0}%", det.label, det.prob * 100.0);
        let ty = py0.saturating_sub(9);
        font::draw_text(&mut image.pixels, w, h, px0 + 2, ty, &text, color);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postproc::BBox;

    #[test]
    fn ppm_round_trip() {
        let img = test_pattern(3, 17, 9);
        let decoded = decode_ppm(&encode_ppm(&img)).unwrap();
        assert_eq!(decoded, img);
    }

    #[test]
    fn ppm_header_with_comments() {
        let bytes = b"P6\n# comment\n2 1\n# another\n255\n\x01\x02\x03\x04\x05\x06";
        let img = decode_ppm(bytes).unwrap();
        assert_eq!((img.width, img.height), (2, 1));
        assert_eq!(img.pixels, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn ppm_rejects_wrong_magic_and_maxval() {
        assert!(matches!(
            decode_ppm(b"P5\n1 1\n255\n\x00"),
            Err(ImageError::NotP6)
        ));
        assert!(matches!(
            decode_ppm(b"P6\n1 1\n65535\n\x00\x00\x00"),
            Err(ImageError::BadMaxval(65535))
        ));
    }

    #[test]
    fn ppm_truncated_data() {
        assert!(matches!(
            decode_ppm(b"P6\n2 2\n255\n\x00\x00\x00"),
            Err(ImageError::Truncated {
                expected: 12,
                actual: 3
            })
        ));
    }

    #[test]
    fn resize_identity_is_clone() {
        let img = test_pattern(0, 8, 6);
        assert_eq!(resize_rgb8(&img, 8, 6), img);
    }

    #[test]
    fn pattern_differs_across_seq() {
        assert_ne!(test_pattern(0, 32, 32), test_pattern(1, 32, 32));
    }

    #[test]
    fn frame_round_trip_including_gray() {
        let img = test_pattern(9, 12, 10);
        let frame = img.to_frame(9, 1234).unwrap();
        assert_eq!(Image::from_frame(&frame).unwrap(), img);

        let gray = ImageFrame::new(0, 0, 2, 1, PixelEncoding::Gray8, vec![7, 9]).unwrap();
        let rgb = Image::from_frame(&gray).unwrap();
        assert_eq!(rgb.pixels, vec![7, 7, 7, 9, 9, 9]);
    }

    #[test]
    fn annotate_draws_box_border() {
        let mut img = Image::filled(40, 40, [0, 0, 0]);
        annotate(
            &mut img,
            &[Detection {
                bbox: BBox::new(0.5, 0.5, 0.5, 0.5),
                class_id: 0,
                label: "thing".into(),
                prob: 0.9,
            }],
        );
        // Top-left corner of the box is at (10, 10).
        let idx = (10 * 40 + 10) * 3;
        assert_ne!(&img.pixels[idx..idx + 3], &[0, 0, 0]);
    }
}
