//! Property checks of the mAP evaluator: only probability ranks enter the
//! PR curve, and removing detections from a perfect set never raises AP.

use rand::prelude::*;
use scout_core::bench::{CornerBox, EvalDetection, GroundTruthBox, evaluate_map};

fn random_scene(
    rng: &mut StdRng,
    images: usize,
    classes: usize,
) -> (Vec<Vec<EvalDetection>>, Vec<Vec<GroundTruthBox>>) {
    let mut detections = Vec::with_capacity(images);
    let mut truth = Vec::with_capacity(images);
    for _ in 0..images {
        let mut gts = Vec::new();
        for _ in 0..rng.random_range(1..=4) {
            let x = rng.random_range(0.0f32..300.0);
            let y = rng.random_range(0.0f32..300.0);
            let w = rng.random_range(20.0f32..80.0);
            let h = rng.random_range(20.0f32..80.0);
            gts.push(GroundTruthBox {
                class_id: rng.random_range(0..classes),
                bbox: CornerBox::new(x, y, x + w, y + h),
                difficult: rng.random_bool(0.1),
            });
        }
        let mut dets = Vec::new();
        // A mix of near-hits (jittered truths) and strays.
        for gt in &gts {
            if rng.random_bool(0.8) {
                let dx = rng.random_range(-10.0f32..10.0);
                let dy = rng.random_range(-10.0f32..10.0);
                dets.push(EvalDetection {
                    class_id: if rng.random_bool(0.9) {
                        gt.class_id
                    } else {
                        rng.random_range(0..classes)
                    },
                    prob: rng.random_range(0.05f32..0.95),
                    bbox: CornerBox::new(
                        gt.bbox.x_min + dx,
                        gt.bbox.y_min + dy,
                        gt.bbox.x_max + dx,
                        gt.bbox.y_max + dy,
                    ),
                });
            }
        }
        for _ in 0..rng.random_range(0..3) {
            let x = rng.random_range(0.0f32..300.0);
            let y = rng.random_range(0.0f32..300.0);
            dets.push(EvalDetection {
                class_id: rng.random_range(0..classes),
                prob: rng.random_range(0.05f32..0.95),
                bbox: CornerBox::new(x, y, x + 30.0, y + 30.0),
            });
        }
        detections.push(dets);
        truth.push(gts);
    }
    (detections, truth)
}

#[test]
fn ap_is_invariant_under_monotone_probability_transforms() {
    let mut rng = StdRng::seed_from_u64(0x9a9);
    let transforms: [fn(f32) -> f32; 3] = [|p| p / 2.0, |p| p * p * 0.9 + 1e-3, |p| 0.05 + 0.9 * p];
    for case in 0..30 {
        let (detections, truth) = random_scene(&mut rng, 5, 3);
        let baseline = evaluate_map(&detections, &truth, 0.5, 3).unwrap();
        for (ti, transform) in transforms.iter().enumerate() {
            let mapped: Vec<Vec<EvalDetection>> = detections
                .iter()
                .map(|dets| {
                    dets.iter()
                        .map(|d| EvalDetection {
                            prob: transform(d.prob),
                            ..d.clone()
                        })
                        .collect()
                })
                .collect();
            let transformed = evaluate_map(&mapped, &truth, 0.5, 3).unwrap();
            assert_eq!(
                baseline.per_class, transformed.per_class,
                "case {case}, transform {ti}: AP must depend only on ranks"
            );
        }
    }
}

#[test]
fn removing_detections_from_a_perfect_set_never_raises_ap() {
    let mut rng = StdRng::seed_from_u64(0xdead);
    for case in 0..30 {
        let (_, truth) = random_scene(&mut rng, 4, 2);
        // Perfect detections: one exact hit per non-difficult truth box.
        let perfect: Vec<Vec<EvalDetection>> = truth
            .iter()
            .map(|gts| {
                gts.iter()
                    .filter(|g| !g.difficult)
                    .map(|g| EvalDetection {
                        class_id: g.class_id,
                        prob: rng.random_range(0.5f32..1.0),
                        bbox: g.bbox,
                    })
                    .collect()
            })
            .collect();
        if truth.iter().flatten().all(|t| t.difficult) {
            continue;
        }
        let full = evaluate_map(&perfect, &truth, 0.5, 2).unwrap();
        assert!((full.map - 1.0).abs() < 1e-12, "perfect set scores 1.0");

        // Drop detections one image at a time; AP can only fall or stay.
        let mut pruned = perfect.clone();
        let mut last_map = full.map;
        for img in 0..pruned.len() {
            if pruned[img].is_empty() {
                continue;
            }
            pruned[img].pop();
            let result = evaluate_map(&pruned, &truth, 0.5, 2).unwrap();
            assert!(
                result.map <= last_map + 1e-12,
                "case {case}: AP rose from {last_map} to {} after removal",
                result.map
            );
            last_map = result.map;
        }
    }
}

#[test]
fn parallel_evaluation_equals_serial() {
    let mut rng = StdRng::seed_from_u64(0x1234);
    for _ in 0..10 {
        let (detections, truth) = random_scene(&mut rng, 6, 4);
        let serial = evaluate_map(&detections, &truth, 0.5, 4).unwrap();
        for threads in [2usize, 3, 8] {
            let parallel =
                scout_core::bench::evaluate_map_with(&detections, &truth, 0.5, 4, threads).unwrap();
            assert_eq!(serial, parallel, "threads={threads}");
        }
    }
}
