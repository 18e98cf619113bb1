//! Loader and forward-pass contract tests against the reference cfg fixture
//! and synthetic weights files built by independent byte accounting.

use rand::prelude::*;
use scout_core::model::{InputResolution, ModelError, load_class_names, load_weights, parse_cfg};
use scout_core::nnet::Tensor;

const FIXTURE_CFG: &str = include_str!("fixtures/tiny-yolo-voc.cfg");
const VOC_NAMES: &str = include_str!("fixtures/voc.names");

/// Re-derives the float count of each convolutional section straight from
/// the cfg text, separately from the loader's own accounting.
fn predicted_float_count(cfg: &str) -> usize {
    let mut total = 0usize;
    let mut in_channels = 3usize;
    let mut section = String::new();
    let mut filters = 0usize;
    let mut size = 1usize;
    let mut bn = false;
    let flush = |in_c: &mut usize, filters: usize, size: usize, bn: bool, total: &mut usize| {
        *total += filters * if bn { 4 } else { 1 } + filters * *in_c * size * size;
        *in_c = filters;
    };
    for line in cfg.lines().map(str::trim) {
        if line.starts_with('[') {
            if section == "[convolutional]" {
                flush(&mut in_channels, filters, size, bn, &mut total);
            }
            section = line.to_string();
            filters = 0;
            size = 1;
            bn = false;
        } else if let Some((k, v)) = line.split_once('=') {
            match (k.trim(), v.trim()) {
                ("filters", v) => filters = v.parse().unwrap(),
                ("size", v) if section == "[convolutional]" => size = v.parse().unwrap(),
                ("batch_normalize", "1") => bn = true,
                _ => {}
            }
        }
    }
    if section == "[convolutional]" {
        flush(&mut in_channels, filters, size, bn, &mut total);
    }
    total
}

/// Builds a weights byte blob: (major, minor, revision) header, seen counter,
/// then `count` floats produced by `gen`.
fn weights_blob(version: (i32, i32, i32), count: usize, mut value: impl FnMut() -> f32) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(20 + count * 4);
    bytes.extend_from_slice(&version.0.to_le_bytes());
    bytes.extend_from_slice(&version.1.to_le_bytes());
    bytes.extend_from_slice(&version.2.to_le_bytes());
    if version.0 * 10 + version.1 >= 2 {
        bytes.extend_from_slice(&0u64.to_le_bytes());
    } else {
        bytes.extend_from_slice(&0u32.to_le_bytes());
    }
    for _ in 0..count {
        bytes.extend_from_slice(&value().to_le_bytes());
    }
    bytes
}

fn small_cfg() -> &'static str {
    // 32x32 input, two convs + pool + region with 2 anchors and 3 classes:
    // final conv emits 2*(5+3)=16 filters on a 1x1 grid... grid = 32/32 = 1
    // after five pools; use a single pool so grid = 16.
    "[net]\nwidth=64\nheight=64\nchannels=3\n\
     [convolutional]\nbatch_normalize=1\nfilters=4\nsize=3\nstride=1\npad=1\nactivation=leaky\n\
     [maxpool]\nsize=2\nstride=2\n\
     [maxpool]\nsize=2\nstride=2\n\
     [maxpool]\nsize=2\nstride=2\n\
     [maxpool]\nsize=2\nstride=2\n\
     [maxpool]\nsize=2\nstride=2\n\
     [convolutional]\nfilters=16\nsize=1\nstride=1\npad=1\nactivation=linear\n\
     [region]\nanchors=1.0,1.5,2.0,0.5\nnum=2\nclasses=3\ncoords=4\n"
}

#[test]
fn fixture_weights_consume_exactly_the_predicted_count() {
    let specs = parse_cfg(FIXTURE_CFG).unwrap();
    let predicted = predicted_float_count(FIXTURE_CFG);
    // Known parameter count of the reference network.
    assert_eq!(predicted, 15_867_885);
    let mut rng = StdRng::seed_from_u64(11);
    let bytes = weights_blob((0, 2, 0), predicted, || rng.random_range(0.001..0.05));
    let model = load_weights(&specs, &bytes).unwrap();
    assert_eq!(model.param_count(), predicted);
    assert_eq!(model.num_anchors(), 5);
    assert_eq!(model.num_classes(), 20);
    assert_eq!(model.input_size(), 416);
    assert_eq!(model.grid(), 13);
}

#[test]
fn version_0_1_uses_32_bit_seen_counter() {
    let specs = parse_cfg(small_cfg()).unwrap();
    let count = predicted_float_count(small_cfg());
    let bytes = weights_blob((0, 1, 0), count, || 0.0);
    assert!(load_weights(&specs, &bytes).is_ok());
    // The same payload with a (0,2,0) header is 4 bytes short.
    let mut wrong = weights_blob((0, 2, 0), count, || 0.0);
    wrong.truncate(wrong.len() - 4);
    assert!(matches!(
        load_weights(&specs, &wrong),
        Err(ModelError::WeightsMissing { .. })
    ));
}

#[test]
fn unsupported_version_is_explicit() {
    let specs = parse_cfg(small_cfg()).unwrap();
    let bytes = weights_blob((1, 0, 0), predicted_float_count(small_cfg()), || 0.0);
    let err = load_weights(&specs, &bytes).unwrap_err();
    assert!(matches!(
        err,
        ModelError::UnsupportedVersion { major: 1, .. }
    ));
    assert!(err.to_string().contains("unsupported weights version"));
}

#[test]
fn truncated_file_names_the_shortfall() {
    let specs = parse_cfg(small_cfg()).unwrap();
    let count = predicted_float_count(small_cfg());
    let mut bytes = weights_blob((0, 2, 0), count, || 0.0);
    bytes.truncate(bytes.len() - 4);
    match load_weights(&specs, &bytes).unwrap_err() {
        ModelError::WeightsMissing {
            expected,
            actual,
            missing,
        } => {
            assert_eq!(expected, count);
            assert_eq!(actual, count - 1);
            assert_eq!(missing, 1);
        }
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn trailing_bytes_rejected() {
    let specs = parse_cfg(small_cfg()).unwrap();
    let count = predicted_float_count(small_cfg());
    let mut bytes = weights_blob((0, 2, 0), count, || 0.0);
    bytes.extend_from_slice(&[0u8; 8]);
    assert!(matches!(
        load_weights(&specs, &bytes),
        Err(ModelError::WeightsTrailing { extra_bytes: 8, .. })
    ));
}

#[test]
fn set_input_size_follows_the_32x_grid_law() {
    let specs = parse_cfg(FIXTURE_CFG).unwrap();
    let count = predicted_float_count(FIXTURE_CFG);
    let mut rng = StdRng::seed_from_u64(3);
    let bytes = weights_blob((0, 2, 0), count, || rng.random_range(0.001..0.05));
    let model = load_weights(&specs, &bytes).unwrap();

    let at_320 = model
        .set_input_size(InputResolution::from_side(320).unwrap())
        .unwrap();
    assert_eq!(at_320.grid(), 10);
    let at_416 = model
        .set_input_size(InputResolution::from_side(416).unwrap())
        .unwrap();
    assert_eq!(at_416.grid(), 13);

    assert!(matches!(
        InputResolution::from_side(330),
        Err(ModelError::InputSizeNotMultiple { side: 330 })
    ));

    // Retargeting never touches parameters.
    let checksum = model.parameter_checksum();
    assert_eq!(at_320.parameter_checksum(), checksum);
    assert_eq!(at_416.parameter_checksum(), checksum);
}

#[test]
fn schedule_resolutions_are_320_plus_32n() {
    for n in 0..10 {
        let res = InputResolution::from_schedule_index(n);
        assert_eq!(res.side(), 320 + 32 * n);
        assert_eq!(res.side() % 32, 0);
    }
}

#[test]
fn forward_zero_weights_gives_zero_prediction() {
    let specs = parse_cfg(small_cfg()).unwrap();
    let bytes = weights_blob((0, 2, 0), predicted_float_count(small_cfg()), || 0.0);
    let model = load_weights(&specs, &bytes).unwrap();
    let input = Tensor::zeros([1, 3, 64, 64]);
    let pred = model.forward(&input).unwrap();
    assert!(pred.tensor().data().iter().all(|&v| v == 0.0));
}

#[test]
fn forward_output_shape_law_over_sizes() {
    let specs = parse_cfg(small_cfg()).unwrap();
    let count = predicted_float_count(small_cfg());
    let mut rng = StdRng::seed_from_u64(5);
    let bytes = weights_blob((0, 2, 0), count, || rng.random_range(0.001..0.2));
    let model = load_weights(&specs, &bytes).unwrap();

    for side in [64usize, 96, 160, 320] {
        let sized = model
            .set_input_size(InputResolution::from_side(side).unwrap())
            .unwrap();
        let data = (0..3 * side * side)
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let input = Tensor::new([1, 3, side, side], data).unwrap();
        let pred = sized.forward(&input).unwrap();
        let grid = side / 32;
        assert_eq!(
            pred.tensor().shape(),
            [1, 2 * (5 + 3), grid, grid],
            "side {side}"
        );
        assert!(pred.tensor().all_finite());
    }
}

#[test]
fn forward_rejects_wrong_input_shape() {
    let specs = parse_cfg(small_cfg()).unwrap();
    let bytes = weights_blob((0, 2, 0), predicted_float_count(small_cfg()), || 0.0);
    let model = load_weights(&specs, &bytes).unwrap();
    let err = model.forward(&Tensor::zeros([1, 3, 32, 32])).unwrap_err();
    assert!(matches!(err, ModelError::BadInputShape { side: 64, .. }));
}

#[test]
fn class_names_must_match_class_count() {
    let specs = parse_cfg(FIXTURE_CFG).unwrap();
    let count = predicted_float_count(FIXTURE_CFG);
    let bytes = weights_blob((0, 2, 0), count, || 0.0);
    let mut model = load_weights(&specs, &bytes).unwrap();
    let names = load_class_names(VOC_NAMES);
    assert_eq!(names.len(), 20);
    assert_eq!(names[0], "aeroplane");
    assert_eq!(names[19], "tvmonitor");
    model.set_class_names(names).unwrap();
    assert_eq!(model.class_names()[11], "dog");
    assert!(matches!(
        model.set_class_names(vec!["just-one".into()]),
        Err(ModelError::ClassNameCount {
            expected: 20,
            actual: 1
        })
    ));
}

#[test]
fn region_must_be_last_and_present() {
    let cfg_no_region =
        "[net]\nwidth=64\nheight=64\n[convolutional]\nfilters=16\nsize=1\nactivation=linear\n";
    let specs = parse_cfg(cfg_no_region).unwrap();
    let bytes = weights_blob((0, 2, 0), 16 + 16 * 3, || 0.0);
    assert!(matches!(
        load_weights(&specs, &bytes),
        Err(ModelError::MissingRegion)
    ));
}

#[test]
fn region_must_be_the_final_section() {
    let cfg = "[net]\nwidth=64\nheight=64\n\
               [region]\nanchors=1.0,1.0\nnum=1\nclasses=3\n\
               [maxpool]\nsize=2\nstride=2\n";
    let specs = parse_cfg(cfg).unwrap();
    assert!(matches!(
        load_weights(&specs, &weights_blob((0, 2, 0), 0, || 0.0)),
        Err(ModelError::RegionNotLast)
    ));
}

#[test]
fn input_sizes_below_64_are_rejected() {
    assert!(matches!(
        InputResolution::from_side(32),
        Err(ModelError::InputSizeTooSmall { side: 32 })
    ));
    assert!(InputResolution::from_side(64).is_ok());
}
