use log::warn;

use super::BenchError;
use crate::postproc::{BBox, iou};

/// Box in corner form (x_min, y_min, x_max, y_max), in the same coordinate
/// space as its ground truth (normally source-image pixels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerBox {
    pub x_min: f32,
    pub y_min: f32,
    pub x_max: f32,
    pub y_max: f32,
}

impl CornerBox {
    pub fn new(x_min: f32, y_min: f32, x_max: f32, y_max: f32) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    /// Clamps the box into [0,w]x[0,h].
    pub fn clamped(&self, width: f32, height: f32) -> Self {
        Self {
            x_min: self.x_min.clamp(0.0, width),
            y_min: self.y_min.clamp(0.0, height),
            x_max: self.x_max.clamp(0.0, width),
            y_max: self.y_max.clamp(0.0, height),
        }
    }

    fn to_bbox(self) -> BBox {
        BBox::from_corner_size(
            self.x_min,
            self.y_min,
            self.x_max - self.x_min,
            self.y_max - self.y_min,
        )
    }

    pub fn iou(&self, other: &CornerBox) -> f32 {
        iou(&self.to_bbox(), &other.to_bbox())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthBox {
    pub class_id: usize,
    pub bbox: CornerBox,
    pub difficult: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalDetection {
    pub class_id: usize,
    pub prob: f32,
    pub bbox: CornerBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApResult {
    pub class_id: usize,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapResult {
    /// Per-class AP for every class with at least one non-difficult truth box.
    pub per_class: Vec<ApResult>,
    /// Arithmetic mean of the per-class APs.
    pub map: f64,
    /// Detections whose class id is outside 0..num_classes; they are logged
    /// and belong to no class's precision/recall curve.
    pub unknown_class_detections: usize,
}

/// VOC-2007 11-point interpolated AP per class at the given IoU threshold.
///
/// Detections (per image, paired index-wise with `truth`) are sorted by
/// probability descending and greedily matched to the highest-IoU unmatched
/// truth box of the same class in the same image. Duplicate matches count as
/// false positives. "Difficult" truths neither count as positives nor
/// penalize detections matched to them.
pub fn evaluate_map(
    detections: &[Vec<EvalDetection>],
    truth: &[Vec<GroundTruthBox>],
    iou_threshold: f32,
    num_classes: usize,
) -> Result<MapResult, BenchError> {
    evaluate_map_with(detections, truth, iou_threshold, num_classes, 1)
}

/// As [`evaluate_map`], with per-class work spread over `threads`. Classes
/// are independent, so the result is identical to the serial run.
pub fn evaluate_map_with(
    detections: &[Vec<EvalDetection>],
    truth: &[Vec<GroundTruthBox>],
    iou_threshold: f32,
    num_classes: usize,
    threads: usize,
) -> Result<MapResult, BenchError> {
    assert_eq!(
        detections.len(),
        truth.len(),
        "detections and truth must pair per image"
    );
    if truth.iter().all(|t| t.is_empty()) {
        return Err(BenchError::EmptyTruth);
    }

    let mut unknown = 0usize;
    for (img, dets) in detections.iter().enumerate() {
        for d in dets {
            if d.class_id >= num_classes {
                warn!(
                    "image {img}: detection with unknown class id {} (have {num_classes} classes); \
                     counted as a false positive against no class",
                    d.class_id
                );
                unknown += 1;
            }
        }
    }

    let threads = threads.clamp(1, num_classes.max(1));
    let mut per_class: Vec<ApResult> = if threads == 1 {
        (0..num_classes)
            .filter_map(|c| class_ap(detections, truth, iou_threshold, c))
            .collect()
    } else {
        let mut collected = Vec::new();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    scope.spawn(move || {
                        (t..num_classes)
                            .step_by(threads)
                            .filter_map(|c| class_ap(detections, truth, iou_threshold, c))
                            .collect::<Vec<ApResult>>()
                    })
                })
                .collect();
            for handle in handles {
                collected.extend(handle.join().expect("AP worker panicked"));
            }
        });
        collected
    };
    per_class.sort_by_key(|r| r.class_id);

    let map = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|r| r.ap).sum::<f64>() / per_class.len() as f64
    };
    Ok(MapResult {
        per_class,
        map,
        unknown_class_detections: unknown,
    })
}

/// AP for one class, or None when it has no non-difficult truth box.
fn class_ap(
    detections: &[Vec<EvalDetection>],
    truth: &[Vec<GroundTruthBox>],
    iou_threshold: f32,
    class_id: usize,
) -> Option<ApResult> {
    let npos: usize = truth
        .iter()
        .flatten()
        .filter(|t| t.class_id == class_id && !t.difficult)
        .count();
    if npos == 0 {
        return None;
    }

    // All detections of this class, ranked by probability; ties keep
    // (image, emission) order for determinism.
    let mut ranked: Vec<(usize, &EvalDetection)> = detections
        .iter()
        .enumerate()
        .flat_map(|(img, dets)| {
            dets.iter()
                .filter(|d| d.class_id == class_id)
                .map(move |d| (img, d))
        })
        .collect();
    ranked.sort_by(|a, b| b.1.prob.total_cmp(&a.1.prob));

    let mut matched: Vec<Vec<bool>> = truth.iter().map(|t| vec![false; t.len()]).collect();
    let mut tp = Vec::with_capacity(ranked.len());
    let mut fp = Vec::with_capacity(ranked.len());
    for (img, det) in ranked {
        // Best-overlap truth box of the same class in this image, difficult
        // ones included.
        let mut best: Option<(usize, f32)> = None;
        for (ti, t) in truth[img].iter().enumerate() {
            if t.class_id != class_id {
                continue;
            }
            let overlap = det.bbox.iou(&t.bbox);
            if best.is_none_or(|(_, b)| overlap > b) {
                best = Some((ti, overlap));
            }
        }
        match best {
            Some((ti, overlap)) if overlap >= iou_threshold => {
                if truth[img][ti].difficult {
                    // Ignored: neither TP nor FP.
                    continue;
                }
                if !matched[img][ti] {
                    matched[img][ti] = true;
                    tp.push(1u32);
                    fp.push(0u32);
                } else {
                    tp.push(0);
                    fp.push(1);
                }
            }
            _ => {
                tp.push(0);
                fp.push(1);
            }
        }
    }

    // Cumulative precision/recall, then 11-point interpolation.
    let mut cum_tp = 0u32;
    let mut cum_fp = 0u32;
    let mut prec_rec = Vec::with_capacity(tp.len());
    for i in 0..tp.len() {
        cum_tp += tp[i];
        cum_fp += fp[i];
        let precision = cum_tp as f64 / (cum_tp + cum_fp) as f64;
        let recall = cum_tp as f64 / npos as f64;
        prec_rec.push((recall, precision));
    }
    Some(ApResult {
        class_id,
        ap: eleven_point_ap(&prec_rec),
    })
}

/// Mean over recall thresholds {0, 0.1, …, 1} of the maximum precision at
/// recall ≥ threshold.
fn eleven_point_ap(prec_rec: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    for i in 0..=10 {
        let threshold = i as f64 / 10.0;
        let best = prec_rec
            .iter()
            .filter(|(recall, _)| *recall >= threshold - 1e-12)
            .map(|(_, precision)| *precision)
            .fold(0.0f64, f64::max);
        total += best;
    }
    total / 11.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt(class_id: usize, x0: f32, y0: f32, x1: f32, y1: f32) -> GroundTruthBox {
        GroundTruthBox {
            class_id,
            bbox: CornerBox::new(x0, y0, x1, y1),
            difficult: false,
        }
    }

    fn det(class_id: usize, prob: f32, x0: f32, y0: f32, x1: f32, y1: f32) -> EvalDetection {
        EvalDetection {
            class_id,
            prob,
            bbox: CornerBox::new(x0, y0, x1, y1),
        }
    }

    #[test]
    fn perfect_detections_score_one() {
        let truth = vec![
            vec![gt(0, 10.0, 10.0, 50.0, 50.0), gt(1, 60.0, 60.0, 90.0, 90.0)],
            vec![gt(0, 20.0, 20.0, 80.0, 80.0)],
        ];
        let dets = vec![
            vec![
                det(0, 1.0, 10.0, 10.0, 50.0, 50.0),
                det(1, 1.0, 60.0, 60.0, 90.0, 90.0),
            ],
            vec![det(0, 1.0, 20.0, 20.0, 80.0, 80.0)],
        ];
        let result = evaluate_map(&dets, &truth, 0.5, 2).unwrap();
        assert_eq!(result.per_class.len(), 2);
        for r in &result.per_class {
            assert!((r.ap - 1.0).abs() < 1e-12, "class {}: {}", r.class_id, r.ap);
        }
        assert!((result.map - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_detections_score_zero() {
        let truth = vec![vec![gt(0, 0.0, 0.0, 10.0, 10.0), gt(1, 0.0, 0.0, 5.0, 5.0)]];
        let dets = vec![vec![]];
        let result = evaluate_map(&dets, &truth, 0.5, 2).unwrap();
        for r in &result.per_class {
            assert_eq!(r.ap, 0.0);
        }
        assert_eq!(result.map, 0.0);
    }

    /// Three-image fixture with one duplicate and one miss; the 11-point AP
    /// is enumerated by hand:
    ///
    /// ranked dets → TP/FP: 0.9 TP, 0.8 FP (duplicate), 0.7 TP, 0.6 FP
    /// (stray), 0.5 TP; npos = 4. PR points: (.25,1), (.25,.5), (.5,2/3),
    /// (.5,.5), (.75,.6). Interpolated precision: 1 at r ∈ {0,.1,.2},
    /// 2/3 at r ∈ {.3,.4,.5}, 0.6 at r ∈ {.6,.7}, 0 beyond.
    /// AP = (3·1 + 3·2/3 + 2·0.6)/11 = 6.2/11.
    #[test]
    fn hand_enumerated_duplicate_and_miss_fixture() {
        let truth = vec![
            vec![
                gt(0, 10.0, 10.0, 50.0, 50.0),
                gt(0, 60.0, 60.0, 100.0, 100.0),
            ],
            vec![gt(0, 20.0, 20.0, 80.0, 80.0)],
            vec![gt(0, 30.0, 30.0, 70.0, 70.0)], // missed entirely
        ];
        let dets = vec![
            vec![
                det(0, 0.9, 10.0, 10.0, 50.0, 50.0),   // TP on G1
                det(0, 0.8, 11.0, 11.0, 51.0, 51.0),   // duplicate of G1 → FP
                det(0, 0.5, 60.0, 60.0, 100.0, 100.0), // TP on G2
            ],
            vec![det(0, 0.7, 20.0, 20.0, 80.0, 80.0)], // TP on G3
            vec![det(0, 0.6, 0.0, 0.0, 10.0, 10.0)],   // stray → FP
        ];
        let result = evaluate_map(&dets, &truth, 0.5, 1).unwrap();
        let expected = 6.2 / 11.0;
        assert!(
            (result.per_class[0].ap - expected).abs() < 1e-12,
            "got {}, want {expected}",
            result.per_class[0].ap
        );
    }

    #[test]
    fn difficult_truths_neither_count_nor_penalize() {
        let truth = vec![vec![
            gt(0, 10.0, 10.0, 50.0, 50.0),
            GroundTruthBox {
                class_id: 0,
                bbox: CornerBox::new(60.0, 60.0, 90.0, 90.0),
                difficult: true,
            },
        ]];
        // One perfect detection on the normal box, one on the difficult box.
        let dets = vec![vec![
            det(0, 0.9, 10.0, 10.0, 50.0, 50.0),
            det(0, 0.8, 60.0, 60.0, 90.0, 90.0),
        ]];
        let result = evaluate_map(&dets, &truth, 0.5, 1).unwrap();
        // npos = 1, the difficult match is ignored: AP = 1.
        assert!((result.per_class[0].ap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_class_ids_are_counted_and_ignored() {
        let truth = vec![vec![gt(0, 0.0, 0.0, 10.0, 10.0)]];
        let dets = vec![vec![
            det(0, 1.0, 0.0, 0.0, 10.0, 10.0),
            det(7, 0.9, 0.0, 0.0, 10.0, 10.0),
        ]];
        let result = evaluate_map(&dets, &truth, 0.5, 1).unwrap();
        assert_eq!(result.unknown_class_detections, 1);
        assert!((result.per_class[0].ap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_truth_is_an_error() {
        let result = evaluate_map(&[vec![]], &[vec![]], 0.5, 1);
        assert!(matches!(result, Err(BenchError::EmptyTruth)));
    }

    #[test]
    fn map_is_mean_of_per_class_aps() {
        let truth = vec![vec![
            gt(0, 0.0, 0.0, 10.0, 10.0),
            gt(1, 20.0, 20.0, 30.0, 30.0),
        ]];
        let dets = vec![vec![det(0, 1.0, 0.0, 0.0, 10.0, 10.0)]];
        let result = evaluate_map(&dets, &truth, 0.5, 2).unwrap();
        let mean =
            result.per_class.iter().map(|r| r.ap).sum::<f64>() / result.per_class.len() as f64;
        assert!((result.map - mean).abs() < 1e-12);
    }
}
