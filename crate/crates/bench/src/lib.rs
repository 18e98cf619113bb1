//! Shared builders for the criterion benches: representative layer shapes
//! and synthetic inputs matching the detector's working set.

use rand::prelude::*;
use scout_core::nnet::{Activation, ConvParams, Tensor};

/// Deterministic random tensor in [-1, 1].
pub fn tensor(seed: u64, shape: [usize; 4]) -> Tensor {
    let mut rng = StdRng::seed_from_u64(seed);
    let len = shape.iter().product();
    Tensor::new(
        shape,
        (0..len).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
    )
    .unwrap()
}

/// A 3x3/stride-1/pad-1 leaky conv like the detector's backbone layers.
pub fn conv3x3(seed: u64, out_c: usize, in_c: usize) -> ConvParams {
    let mut rng = StdRng::seed_from_u64(seed);
    ConvParams::new(
        out_c,
        in_c,
        3,
        1,
        1,
        (0..out_c * in_c * 9)
            .map(|_| rng.random_range(-0.2f32..0.2))
            .collect(),
        (0..out_c).map(|_| rng.random_range(-0.1f32..0.1)).collect(),
        Activation::Leaky,
        None,
    )
    .unwrap()
}
