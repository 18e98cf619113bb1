//! Turns raw region-layer output into final detections: anchor-box decoding,
//! confidence thresholding, per-class greedy NMS, plus the bilinear resize
//! that feeds the network.

use thiserror::Error;

use crate::model::RawPrediction;
use crate::nnet::Tensor;
use crate::wire::{ImageFrame, PixelEncoding};

/// Default confidence threshold (Darknet detector default).
pub const DEFAULT_CONF_THRESHOLD: f32 = 0.24;
/// Default NMS IoU threshold (Darknet detector default).
pub const DEFAULT_NMS_THRESHOLD: f32 = 0.45;

#[derive(Debug, Error)]
pub enum PostprocError {
    #[error("image has a zero dimension ({width}x{height})")]
    EmptyImage { width: u16, height: u16 },
    #[error("network input side {0} is not a multiple of 32")]
    SideNotMultiple(usize),
    #[error("frame payload length {actual} does not match {width}x{height} {encoding:?}")]
    PayloadLength {
        width: u16,
        height: u16,
        encoding: PixelEncoding,
        actual: usize,
    },
}

/// Axis-aligned box in center-size form, normalized to [0, 1] relative to
/// the image. Boxes may legally extend past the image edges before clamping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub cx: f32,
    pub cy: f32,
    pub w: f32,
    pub h: f32,
}

impl BBox {
    pub fn new(cx: f32, cy: f32, w: f32, h: f32) -> Self {
        Self { cx, cy, w, h }
    }

    /// From corner-size form (x_min, y_min, width, height).
    pub fn from_corner_size(x: f32, y: f32, w: f32, h: f32) -> Self {
        Self {
            cx: x + w / 2.0,
            cy: y + h / 2.0,
            w,
            h,
        }
    }

    /// (x_min, y_min, x_max, y_max).
    pub fn corners(&self) -> (f32, f32, f32, f32) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f32 {
        self.w * self.h
    }
}

/// One decoded, thresholded detection.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub class_id: usize,
    pub label: String,
    pub prob: f32,
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable softmax.
fn softmax(logits: &mut [f32]) {
    let max = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    if sum > 0.0 {
        for v in logits.iter_mut() {
            *v /= sum;
        }
    }
}

/// Decodes the region-layer input into pre-NMS candidates.
///
/// Per cell (i, j) and anchor (p_w, p_h):
/// cx = (σ(tx)+j)/G, cy = (σ(ty)+i)/G, w = p_w·e^tw/G, h = p_h·e^th/G, and
/// the candidate score is σ(objectness) times the best softmaxed class
/// probability. One candidate per (cell, anchor) is emitted when its score
/// reaches `conf_threshold`; cells iterate row-major with anchors innermost.
pub fn decode_region(
    pred: &RawPrediction,
    anchors: &[(f32, f32)],
    num_classes: usize,
    conf_threshold: f32,
    labels: &[String],
) -> Vec<Detection> {
    let grid_h = pred.grid_h();
    let grid_w = pred.grid_w();
    let mut out = Vec::new();
    let mut class_scores = vec![0.0f32; num_classes];
    for row in 0..grid_h {
        for col in 0..grid_w {
            for (a, &(p_w, p_h)) in anchors.iter().enumerate() {
                let objectness = sigmoid(pred.at(a, 4, row, col));
                for (c, slot) in class_scores.iter_mut().enumerate() {
                    *slot = pred.at(a, 5 + c, row, col);
                }
                softmax(&mut class_scores);
                let (best_class, best_prob) = class_scores.iter().enumerate().fold(
                    (0usize, f32::NEG_INFINITY),
                    |(bi, bv), (i, &v)| {
                        if v > bv { (i, v) } else { (bi, bv) }
                    },
                );
                let score = objectness * best_prob;
                if score >= conf_threshold {
                    out.push(Detection {
                        bbox: BBox {
                            cx: (sigmoid(pred.at(a, 0, row, col)) + col as f32) / grid_w as f32,
                            cy: (sigmoid(pred.at(a, 1, row, col)) + row as f32) / grid_h as f32,
                            w: p_w * pred.at(a, 2, row, col).exp() / grid_w as f32,
                            h: p_h * pred.at(a, 3, row, col).exp() / grid_h as f32,
                        },
                        class_id: best_class,
                        label: labels
                            .get(best_class)
                            .cloned()
                            .unwrap_or_else(|| format!("class{best_class}")),
                        prob: score,
                    });
                }
            }
        }
    }
    out
}

/// Intersection over union; 0 when the union is empty. Areas come from the
/// same corner values as the intersection, so identical boxes of positive
/// area score exactly 1.
pub fn iou(a: &BBox, b: &BBox) -> f32 {
    let (ax0, ay0, ax1, ay1) = a.corners();
    let (bx0, by0, bx1, by1) = b.corners();
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    let area_a = (ax1 - ax0).max(0.0) * (ay1 - ay0).max(0.0);
    let area_b = (bx1 - bx0).max(0.0) * (by1 - by0).max(0.0);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Greedy per-class suppression: candidates are ranked by probability
/// (ties keep their original order), and a box is kept iff its IoU with every
/// higher-ranked kept box of the same class stays below `iou_threshold`.
/// Output is sorted by probability, descending.
pub fn nms(candidates: &[Detection], iou_threshold: f32) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| candidates[b].prob.total_cmp(&candidates[a].prob));
    let mut kept: Vec<&Detection> = Vec::new();
    for &idx in &order {
        let cand = &candidates[idx];
        let suppressed = kept
            .iter()
            .any(|k| k.class_id == cand.class_id && iou(&k.bbox, &cand.bbox) >= iou_threshold);
        if !suppressed {
            kept.push(cand);
        }
    }
    kept.into_iter().cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResizeMode {
    /// Plain stretch to the square input; aspect ratio not preserved.
    #[default]
    Stretch,
    /// Aspect-preserving resize padded with mid-gray.
    Letterbox,
}

/// Resizes a camera frame to the square network input: bilinear
/// interpolation, RGB channel planes, values scaled to [0, 1].
pub fn resize_to_input(image: &ImageFrame, side: usize) -> Result<Tensor, PostprocError> {
    resize_to_input_mode(image, side, ResizeMode::Stretch)
}

pub fn resize_to_input_mode(
    image: &ImageFrame,
    side: usize,
    mode: ResizeMode,
) -> Result<Tensor, PostprocError> {
    if !side.is_multiple_of(32) || side == 0 {
        return Err(PostprocError::SideNotMultiple(side));
    }
    match mode {
        ResizeMode::Stretch => resize_norm(image, side, side),
        ResizeMode::Letterbox => {
            let (w, h) = validate_frame(image)?;
            let scale = (side as f32 / w as f32).min(side as f32 / h as f32);
            let dw = ((w as f32 * scale).round() as usize).clamp(1, side);
            let dh = ((h as f32 * scale).round() as usize).clamp(1, side);
            let inner = resize_norm(image, dw, dh)?;
            let mut out = Tensor::zeros([1, 3, side, side]);
            out.data_mut().fill(0.5);
            let (x_off, y_off) = ((side - dw) / 2, (side - dh) / 2);
            let plane = side * side;
            for c in 0..3 {
                for y in 0..dh {
                    for x in 0..dw {
                        out.data_mut()[c * plane + (y + y_off) * side + (x + x_off)] =
                            inner.data()[(c * dh + y) * dw + x];
                    }
                }
            }
            Ok(out)
        }
    }
}

fn validate_frame(image: &ImageFrame) -> Result<(usize, usize), PostprocError> {
    let (w, h) = (image.width as usize, image.height as usize);
    if w == 0 || h == 0 {
        return Err(PostprocError::EmptyImage {
            width: image.width,
            height: image.height,
        });
    }
    let channels = image.encoding.bytes_per_pixel();
    if image.pixels.len() != w * h * channels {
        return Err(PostprocError::PayloadLength {
            width: image.width,
            height: image.height,
            encoding: image.encoding,
            actual: image.pixels.len(),
        });
    }
    Ok((w, h))
}

/// Bilinear resize of a frame to an arbitrary (1, 3, out_h, out_w) tensor in
/// [0, 1]. Half-pixel-center mapping: identity sizes reproduce the source
/// exactly and a 2x2 -> 1x1 reduction yields the bilinear average of the
/// four source pixels.
pub fn resize_norm(
    image: &ImageFrame,
    out_w: usize,
    out_h: usize,
) -> Result<Tensor, PostprocError> {
    let (w, h) = validate_frame(image)?;
    if out_w == 0 || out_h == 0 {
        return Err(PostprocError::EmptyImage {
            width: out_w as u16,
            height: out_h as u16,
        });
    }
    let channels = image.encoding.bytes_per_pixel();
    let sample = |px: usize, py: usize, c: usize| -> f32 {
        let idx = (py * w + px) * channels;
        let v = match image.encoding {
            PixelEncoding::Rgb8 => image.pixels[idx + c],
            PixelEncoding::Gray8 => image.pixels[idx],
        };
        v as f32 / 255.0
    };

    let mut out = Tensor::zeros([1, 3, out_h, out_w]);
    let plane = out_w * out_h;
    for dy in 0..out_h {
        let sy = ((dy as f32 + 0.5) * h as f32 / out_h as f32 - 0.5).clamp(0.0, (h - 1) as f32);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = sy - y0 as f32;
        for dx in 0..out_w {
            let sx = ((dx as f32 + 0.5) * w as f32 / out_w as f32 - 0.5).clamp(0.0, (w - 1) as f32);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let fx = sx - x0 as f32;
            for c in 0..3 {
                let top = sample(x0, y0, c) * (1.0 - fx) + sample(x1, y0, c) * fx;
                let bottom = sample(x0, y1, c) * (1.0 - fx) + sample(x1, y1, c) * fx;
                out.data_mut()[c * plane + dy * out_w + dx] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RawPrediction;

    fn det(cx: f32, cy: f32, w: f32, h: f32, class_id: usize, prob: f32) -> Detection {
        Detection {
            bbox: BBox::new(cx, cy, w, h),
            class_id,
            label: format!("class{class_id}"),
            prob,
        }
    }

    #[test]
    fn iou_identical_boxes() {
        let b = BBox::new(0.5, 0.5, 0.2, 0.4);
        assert_eq!(iou(&b, &b), 1.0);
    }

    #[test]
    fn iou_disjoint_boxes() {
        let a = BBox::new(0.2, 0.2, 0.1, 0.1);
        let b = BBox::new(0.8, 0.8, 0.1, 0.1);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_corner_overlap_is_one_third() {
        // Corner-size boxes (0,0,2,2) and (1,0,2,2): intersection 2, union 6.
        let a = BBox::from_corner_size(0.0, 0.0, 2.0, 2.0);
        let b = BBox::from_corner_size(1.0, 0.0, 2.0, 2.0);
        let v = iou(&a, &b);
        assert!((v - 1.0 / 3.0).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn iou_zero_union_is_zero() {
        let a = BBox::new(0.5, 0.5, 0.0, 0.0);
        assert_eq!(iou(&a, &a), 0.0);
    }

    #[test]
    fn nms_empty_input() {
        assert!(nms(&[], 0.45).is_empty());
    }

    #[test]
    fn nms_suppresses_overlapping_same_class() {
        let a = det(0.5, 0.5, 0.4, 0.4, 0, 0.8);
        let b = det(0.52, 0.5, 0.4, 0.4, 0, 0.6);
        assert!(iou(&a.bbox, &b.bbox) > 0.8);
        let kept = nms(&[b.clone(), a.clone()], 0.45);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].prob, 0.8);
    }

    #[test]
    fn nms_keeps_overlapping_different_class() {
        let a = det(0.5, 0.5, 0.4, 0.4, 0, 0.8);
        let b = det(0.5, 0.5, 0.4, 0.4, 1, 0.6);
        assert_eq!(nms(&[a, b], 0.45).len(), 2);
    }

    #[test]
    fn nms_tie_break_is_original_order() {
        let a = det(0.3, 0.3, 0.1, 0.1, 0, 0.5);
        let b = det(0.7, 0.7, 0.1, 0.1, 0, 0.5);
        let kept = nms(&[a.clone(), b.clone()], 0.45);
        assert_eq!(kept[0].bbox, a.bbox);
        assert_eq!(kept[1].bbox, b.bbox);
    }

    #[test]
    fn decode_zero_offsets_recover_anchor_geometry() {
        // Grid 13, one anchor (1.08, 1.19). All-zero tx/ty/tw/th at every
        // cell; objectness strongly positive only at cell (0,0).
        let anchors = [(1.08f32, 1.19f32)];
        let classes = 2usize;
        let grid = 13usize;
        let mut data = vec![0.0f32; (5 + classes) * grid * grid];
        data[4 * grid * grid] = 20.0; // objectness logit at (0,0)
        let tensor = Tensor::new([1, 5 + classes, grid, grid], data).unwrap();
        let pred = RawPrediction::new(tensor, 1, classes).unwrap();
        let dets = decode_region(&pred, &anchors, classes, 0.4, &[]);
        assert_eq!(dets.len(), 1);
        let d = &dets[0];
        assert!((d.bbox.cx - 0.5 / 13.0).abs() < 1e-6);
        assert!((d.bbox.cy - 0.5 / 13.0).abs() < 1e-6);
        assert!((d.bbox.w - 1.08 / 13.0).abs() < 1e-6);
        assert!((d.bbox.h - 1.19 / 13.0).abs() < 1e-6);
        assert_eq!(d.label, "class0");
    }

    #[test]
    fn decode_negative_infinity_objectness_suppressed() {
        let anchors = [(1.0f32, 1.0f32)];
        let classes = 2usize;
        let grid = 4usize;
        let mut data = vec![0.0f32; (5 + classes) * grid * grid];
        for v in &mut data[4 * grid * grid..5 * grid * grid] {
            *v = f32::NEG_INFINITY;
        }
        let tensor = Tensor::new([1, 5 + classes, grid, grid], data).unwrap();
        let pred = RawPrediction::new(tensor, 1, classes).unwrap();
        assert!(decode_region(&pred, &anchors, classes, 1e-9, &[]).is_empty());
    }

    #[test]
    fn resize_identity_is_exact() {
        let (w, h) = (32u16, 32u16);
        let pixels: Vec<u8> = (0..w as usize * h as usize * 3)
            .map(|i| (i * 7 % 256) as u8)
            .collect();
        let frame = ImageFrame::new(0, 0, w, h, PixelEncoding::Rgb8, pixels.clone()).unwrap();
        let t = resize_to_input(&frame, 32).unwrap();
        for y in 0..32usize {
            for x in 0..32usize {
                for c in 0..3usize {
                    let orig = pixels[(y * 32 + x) * 3 + c] as f32 / 255.0;
                    let got = t.data()[c * 32 * 32 + y * 32 + x];
                    assert_eq!(got, orig, "pixel ({x},{y},{c})");
                }
            }
        }
    }

    #[test]
    fn resize_2x2_to_1x1_is_the_bilinear_average() {
        // The 1x1 output's half-pixel center lands on source (0.5, 0.5):
        // hand-computed bilinear weights are 1/4 on each source pixel.
        let pixels = vec![
            100, 10, 0, /* */ 200, 20, 0, //
            40, 30, 0, /* */ 60, 40, 0,
        ];
        let frame = ImageFrame::new(0, 0, 2, 2, PixelEncoding::Rgb8, pixels).unwrap();
        let t = resize_norm(&frame, 1, 1).unwrap();
        assert_eq!(t.shape(), [1, 3, 1, 1]);
        let want_r = (100.0 + 200.0 + 40.0 + 60.0) / 4.0 / 255.0;
        let want_g = (10.0 + 20.0 + 30.0 + 40.0) / 4.0 / 255.0;
        assert!((t.data()[0] - want_r).abs() < 1e-6, "got {}", t.data()[0]);
        assert!((t.data()[1] - want_g).abs() < 1e-6, "got {}", t.data()[1]);
    }

    #[test]
    fn resize_640x480_to_160() {
        let frame = ImageFrame::new(
            0,
            0,
            640,
            480,
            PixelEncoding::Rgb8,
            vec![128; 640 * 480 * 3],
        )
        .unwrap();
        let t = resize_to_input(&frame, 160).unwrap();
        assert_eq!(t.shape(), [1, 3, 160, 160]);
        assert!(t.data().iter().all(|&v| (v - 128.0 / 255.0).abs() < 1e-6));
    }

    #[test]
    fn resize_rejects_zero_dimension() {
        let frame = ImageFrame {
            seq: 0,
            stamp_ns: 0,
            width: 0,
            height: 4,
            encoding: PixelEncoding::Rgb8,
            pixels: vec![],
        };
        assert!(matches!(
            resize_to_input(&frame, 160),
            Err(PostprocError::EmptyImage { .. })
        ));
    }

    #[test]
    fn resize_gray_replicates_channels() {
        let frame = ImageFrame::new(0, 0, 4, 4, PixelEncoding::Gray8, vec![51; 16]).unwrap();
        let t = resize_to_input(&frame, 32).unwrap();
        let plane = 32 * 32;
        for i in 0..plane {
            assert_eq!(t.data()[i], t.data()[plane + i]);
            assert_eq!(t.data()[i], t.data()[2 * plane + i]);
        }
    }

    #[test]
    fn letterbox_pads_with_gray() {
        let frame =
            ImageFrame::new(0, 0, 64, 32, PixelEncoding::Rgb8, vec![255; 64 * 32 * 3]).unwrap();
        let t = resize_to_input_mode(&frame, 64, ResizeMode::Letterbox).unwrap();
        assert_eq!(t.data()[0], 0.5);
        assert!((t.data()[32 * 64 + 5] - 1.0).abs() < 1e-6);
    }
}
