use super::{LEAKY_SLOPE, NnetError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Leaky,
}

/// Per-channel batch-norm statistics as stored in a Darknet weights file.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub mean: Vec<f32>,
    pub variance: Vec<f32>,
}

/// Parameters of one convolutional layer. Weights are laid out
/// (out, in, k, k), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    pub activation: Activation,
    pub batchnorm: Option<BatchNorm>,
}

impl ConvParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_size: usize,
        stride: usize,
        padding: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
        activation: Activation,
        batchnorm: Option<BatchNorm>,
    ) -> Result<Self, NnetError> {
        let params = Self {
            out_channels,
            in_channels,
            kernel_size,
            stride,
            padding,
            weights,
            bias,
            activation,
            batchnorm,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), NnetError> {
        for (v, field) in [
            (self.out_channels, "out_channels"),
            (self.in_channels, "in_channels"),
            (self.kernel_size, "kernel_size"),
            (self.stride, "stride"),
        ] {
            if v == 0 {
                return Err(NnetError::NonPositive { field });
            }
        }
        let k = self.kernel_size;
        let expected_w = self.out_channels * self.in_channels * k * k;
        if self.weights.len() != expected_w {
            return Err(NnetError::ParamLength {
                kind: "weights",
                expected: expected_w,
                actual: self.weights.len(),
            });
        }
        if self.bias.len() != self.out_channels {
            return Err(NnetError::ParamLength {
                kind: "bias",
                expected: self.out_channels,
                actual: self.bias.len(),
            });
        }
        if let Some(bn) = &self.batchnorm {
            for (vec, kind) in [
                (&bn.gamma, "gamma"),
                (&bn.beta, "beta"),
                (&bn.mean, "mean"),
                (&bn.variance, "variance"),
            ] {
                if vec.len() != self.out_channels {
                    return Err(NnetError::ParamLength {
                        kind,
                        expected: self.out_channels,
                        actual: vec.len(),
                    });
                }
            }
            for (channel, &value) in bn.variance.iter().enumerate() {
                if value < 0.0 {
                    return Err(NnetError::NegativeVariance { channel, value });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolParams {
    pub size: usize,
    pub stride: usize,
}

impl PoolParams {
    pub fn new(size: usize, stride: usize) -> Result<Self, NnetError> {
        if size == 0 {
            return Err(NnetError::NonPositive { field: "size" });
        }
        if stride == 0 {
            return Err(NnetError::NonPositive { field: "stride" });
        }
        Ok(Self { size, stride })
    }
}

/// 2-D convolution with zero padding: output spatial size is
/// floor((H + 2·pad − k)/stride) + 1 per axis. Batch norm, when present, is
/// applied as a per-channel scale/shift before the activation.
pub fn conv2d(input: &Tensor, params: &ConvParams) -> Result<Tensor, NnetError> {
    let [batch, in_c, in_h, in_w] = input.shape();
    if in_c != params.in_channels {
        return Err(NnetError::ChannelMismatch {
            expected: params.in_channels,
            actual: in_c,
        });
    }
    let k = params.kernel_size;
    let pad = params.padding;
    let stride = params.stride;
    for extent in [in_h, in_w] {
        if extent + 2 * pad < k {
            return Err(NnetError::KernelTooLarge {
                kernel: k,
                padded: extent + 2 * pad,
            });
        }
    }
    let out_h = (in_h + 2 * pad - k) / stride + 1;
    let out_w = (in_w + 2 * pad - k) / stride + 1;
    let out_c = params.out_channels;

    let mut out = Tensor::zeros([batch, out_c, out_h, out_w]);
    let cols = out_h * out_w;
    let gemm_k = in_c * k * k;
    let mut col_buf = vec![0.0f32; gemm_k * cols];

    for n in 0..batch {
        let image = &input.data()[n * in_c * in_h * in_w..(n + 1) * in_c * in_h * in_w];
        let out_image = &mut out.data_mut()[n * out_c * cols..(n + 1) * out_c * cols];

        // 1x1/stride-1/no-pad kernels are a plain matrix product over the
        // existing layout; skip the im2col copy.
        let col: &[f32] = if k == 1 && stride == 1 && pad == 0 {
            image
        } else {
            im2col(image, in_c, in_h, in_w, k, stride, pad, &mut col_buf);
            &col_buf
        };
        sgemm_row_major(out_c, gemm_k, cols, &params.weights, col, out_image);
    }

    // Per-channel epilogue: bias, optional batch norm, activation.
    let scale_shift: Vec<(f32, f32)> = (0..out_c)
        .map(|c| match &params.batchnorm {
            Some(bn) => {
                let s = bn.gamma[c] / (bn.variance[c] + super::BATCHNORM_EPSILON).sqrt();
                (s, bn.beta[c] + (params.bias[c] - bn.mean[c]) * s)
            }
            None => (1.0, params.bias[c]),
        })
        .collect();
    for n in 0..batch {
        for (c, &(scale, shift)) in scale_shift.iter().enumerate() {
            let base = (n * out_c + c) * cols;
            for v in &mut out.data_mut()[base..base + cols] {
                let y = *v * scale + shift;
                *v = match params.activation {
                    Activation::Linear => y,
                    Activation::Leaky => {
                        if y >= 0.0 {
                            y
                        } else {
                            LEAKY_SLOPE * y
                        }
                    }
                };
            }
        }
    }
    Ok(out)
}

/// Unpacks convolution windows into a (in_c·k·k, out_h·out_w) column matrix.
#[allow(clippy::too_many_arguments)]
fn im2col<'a>(
    image: &[f32],
    in_c: usize,
    in_h: usize,
    in_w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    col: &'a mut [f32],
) -> &'a [f32] {
    let out_h = (in_h + 2 * pad - k) / stride + 1;
    let out_w = (in_w + 2 * pad - k) / stride + 1;
    let cols = out_h * out_w;
    let mut row = 0;
    for c in 0..in_c {
        let chan = &image[c * in_h * in_w..(c + 1) * in_h * in_w];
        for ky in 0..k {
            for kx in 0..k {
                let dst = &mut col[row * cols..(row + 1) * cols];
                row += 1;
                for oy in 0..out_h {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    let dst_row = &mut dst[oy * out_w..(oy + 1) * out_w];
                    if iy < 0 || iy >= in_h as isize {
                        dst_row.fill(0.0);
                        continue;
                    }
                    let src_row = &chan[iy as usize * in_w..(iy as usize + 1) * in_w];
                    for (ox, d) in dst_row.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        *d = if ix < 0 || ix >= in_w as isize {
                            0.0
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
            }
        }
    }
    col
}

/// C(m,n) = A(m,k) · B(k,n), all row-major.
fn sgemm_row_major(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Max pooling with the Darknet "same"-style convention: output size is
/// ceil(H/stride) per axis and windows overrunning the right/bottom edge are
/// padded with −∞.
pub fn maxpool2d(input: &Tensor, params: &PoolParams) -> Tensor {
    let [batch, ch, in_h, in_w] = input.shape();
    let out_h = in_h.div_ceil(params.stride);
    let out_w = in_w.div_ceil(params.stride);
    let mut out = Tensor::zeros([batch, ch, out_h, out_w]);
    for n in 0..batch {
        for c in 0..ch {
            let src = &input.data()[(n * ch + c) * in_h * in_w..(n * ch + c + 1) * in_h * in_w];
            let base = (n * ch + c) * out_h * out_w;
            for oy in 0..out_h {
                for ox in 0..out_w {
                    let y0 = oy * params.stride;
                    let x0 = ox * params.stride;
                    let mut best = f32::NEG_INFINITY;
                    for y in y0..(y0 + params.size).min(in_h) {
                        for x in x0..(x0 + params.size).min(in_w) {
                            let v = src[y * in_w + x];
                            if v > best {
                                best = v;
                            }
                        }
                    }
                    out.data_mut()[base + oy * out_w + ox] = best;
                }
            }
        }
    }
    out
}

/// Elementwise x ↦ x if x ≥ 0 else slope·x. Callers must pass a slope in
/// (0, 1); the network path uses [`LEAKY_SLOPE`].
pub fn leaky_relu(input: &Tensor, slope: f32) -> Tensor {
    debug_assert!(slope > 0.0 && slope < 1.0);
    let mut out = input.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
    out
}

/// Folds batch-norm statistics into the convolution weights and bias so the
/// runtime has a single code path: weights are scaled per output channel by
/// γ/√(var+ε) and the bias becomes β + (b − mean)·γ/√(var+ε).
pub fn fold_batchnorm(params: &ConvParams, epsilon: f32) -> Result<ConvParams, NnetError> {
    let bn = params
        .batchnorm
        .as_ref()
        .ok_or(NnetError::MissingBatchNorm)?;
    params.validate()?;
    let mut folded = params.clone();
    let per_filter = params.in_channels * params.kernel_size * params.kernel_size;
    for c in 0..params.out_channels {
        let scale = bn.gamma[c] / (bn.variance[c] + epsilon).sqrt();
        for w in &mut folded.weights[c * per_filter..(c + 1) * per_filter] {
            *w *= scale;
        }
        folded.bias[c] = bn.beta[c] + (params.bias[c] - bn.mean[c]) * scale;
    }
    folded.batchnorm = None;
    Ok(folded)
}
