use std::hint::black_box;

use criterion::{Criterion, criterion_group, criterion_main};
use rand::prelude::*;
use scout_bench::{conv3x3, tensor};
use scout_core::nnet::{PoolParams, conv2d, maxpool2d};
use scout_core::postproc::{BBox, Detection, nms, resize_to_input};
use scout_core::wire::{ImageFrame, PixelEncoding};

fn bench_conv(c: &mut Criterion) {
    let mut group = c.benchmark_group("conv2d");
    // First backbone layer at two input sides of the runtime schedule.
    for side in [160usize, 320] {
        let input = tensor(1, [1, 3, side, side]);
        let params = conv3x3(2, 16, 3);
        group.bench_function(format!("3to16_{side}"), |b| {
            b.iter(|| conv2d(black_box(&input), black_box(&params)).unwrap())
        });
    }
    // Mid-network shape: 128 -> 256 at 20x20.
    let input = tensor(3, [1, 128, 20, 20]);
    let params = conv3x3(4, 256, 128);
    group.bench_function("128to256_20", |b| {
        b.iter(|| conv2d(black_box(&input), black_box(&params)).unwrap())
    });
    group.finish();
}

fn bench_maxpool(c: &mut Criterion) {
    let input = tensor(5, [1, 16, 208, 208]);
    let params = PoolParams::new(2, 2).unwrap();
    c.bench_function("maxpool2d_16x208", |b| {
        b.iter(|| maxpool2d(black_box(&input), black_box(&params)))
    });
}

fn bench_nms(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(9);
    let candidates: Vec<Detection> = (0..50)
        .map(|_| Detection {
            bbox: BBox::new(
                rng.random_range(0.0f32..1.0),
                rng.random_range(0.0f32..1.0),
                rng.random_range(0.05f32..0.4),
                rng.random_range(0.05f32..0.4),
            ),
            class_id: rng.random_range(0..20),
            label: String::new(),
            prob: rng.random_range(0.0f32..1.0),
        })
        .collect();
    c.bench_function("nms_50", |b| {
        b.iter(|| nms(black_box(&candidates), black_box(0.45)))
    });
}

fn bench_resize(c: &mut Criterion) {
    let frame = ImageFrame::new(
        0,
        0,
        640,
        480,
        PixelEncoding::Rgb8,
        vec![127; 640 * 480 * 3],
    )
    .unwrap();
    c.bench_function("resize_vga_to_320", |b| {
        b.iter(|| resize_to_input(black_box(&frame), black_box(320)).unwrap())
    });
}

criterion_group!(benches, bench_conv, bench_maxpool, bench_nms, bench_resize);
criterion_main!(benches);
