use std::sync::Arc;

use super::ModelError;
use crate::nnet::{ConvParams, PoolParams, Tensor, conv2d, maxpool2d};

/// Square network input resolution, always a multiple of 32. The detector's
/// training schedule uses sides of 320 + 32·n, but any multiple of 32 may be
/// set explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputResolution {
    side: usize,
}

impl InputResolution {
    pub const MIN_SIDE: usize = 64;

    pub fn from_side(side: usize) -> Result<Self, ModelError> {
        if !side.is_multiple_of(32) {
            return Err(ModelError::InputSizeNotMultiple { side });
        }
        if side < Self::MIN_SIDE {
            return Err(ModelError::InputSizeTooSmall { side });
        }
        Ok(Self { side })
    }

    /// Resolution n of the 320 + 32·n schedule.
    pub fn from_schedule_index(n: usize) -> Self {
        Self { side: 320 + 32 * n }
    }

    pub fn side(&self) -> usize {
        self.side
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionParams {
    /// Box priors in grid-cell units.
    pub anchors: Vec<(f32, f32)>,
    pub num_classes: usize,
}

#[derive(Debug, Clone)]
pub enum Layer {
    Conv(Arc<ConvParams>),
    Maxpool(PoolParams),
    Region(RegionParams),
}

impl Layer {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "convolutional",
            Layer::Maxpool(_) => "maxpool",
            Layer::Region(_) => "region",
        }
    }
}

/// An immutable, loaded network. `set_input_size` derives a model for a new
/// resolution without touching weights; `forward` is reentrant.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub(crate) layers: Vec<Layer>,
    pub(crate) input_size: usize,
    pub(crate) class_names: Vec<String>,
    /// Per-layer output geometry (channels, height, width) for `input_size`.
    pub(crate) geometry: Vec<(usize, usize, usize)>,
    /// Total floats consumed from the weights file.
    pub(crate) param_count: usize,
}

impl NetworkModel {
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.region().num_classes
    }

    pub fn anchors(&self) -> &[(f32, f32)] {
        &self.region().anchors
    }

    pub fn num_anchors(&self) -> usize {
        self.region().anchors.len()
    }

    /// Grid cells per axis at the current input size.
    pub fn grid(&self) -> usize {
        self.geometry[self.geometry.len() - 1].1
    }

    /// Floats consumed from the weights file at load time.
    pub fn param_count(&self) -> usize {
        self.param_count
    }

    fn region(&self) -> &RegionParams {
        match self.layers.last() {
            Some(Layer::Region(r)) => r,
            _ => unreachable!("constructor guarantees a trailing region layer"),
        }
    }

    /// Recomputes per-layer output geometry for `side`, validating that every
    /// intermediate map stays non-empty.
    pub(crate) fn compute_geometry(
        layers: &[Layer],
        side: usize,
    ) -> Result<Vec<(usize, usize, usize)>, ModelError> {
        let mut geom = Vec::with_capacity(layers.len());
        let (mut c, mut h, mut w) = (3usize, side, side);
        for (index, layer) in layers.iter().enumerate() {
            match layer {
                Layer::Conv(p) => {
                    for extent in [h, w] {
                        if extent + 2 * p.padding < p.kernel_size {
                            return Err(ModelError::Layer {
                                index,
                                kind: "convolutional",
                                source: crate::nnet::NnetError::KernelTooLarge {
                                    kernel: p.kernel_size,
                                    padded: extent + 2 * p.padding,
                                },
                            });
                        }
                    }
                    h = (h + 2 * p.padding - p.kernel_size) / p.stride + 1;
                    w = (w + 2 * p.padding - p.kernel_size) / p.stride + 1;
                    c = p.out_channels;
                }
                Layer::Maxpool(p) => {
                    h = h.div_ceil(p.stride);
                    w = w.div_ceil(p.stride);
                }
                Layer::Region(r) => {
                    let expected = r.anchors.len() * (5 + r.num_classes);
                    if c != expected {
                        return Err(ModelError::BadRegionChannels {
                            expected,
                            actual: c,
                        });
                    }
                }
            }
            geom.push((c, h, w));
        }
        Ok(geom)
    }

    /// Returns a model retargeted to `res`. Weights are shared with the
    /// receiver; only geometry changes.
    pub fn set_input_size(&self, res: InputResolution) -> Result<NetworkModel, ModelError> {
        let geometry = Self::compute_geometry(&self.layers, res.side())?;
        Ok(NetworkModel {
            layers: self.layers.clone(),
            input_size: res.side(),
            class_names: self.class_names.clone(),
            geometry,
            param_count: self.param_count,
        })
    }

    pub fn set_class_names(&mut self, names: Vec<String>) -> Result<(), ModelError> {
        if names.len() != self.num_classes() {
            return Err(ModelError::ClassNameCount {
                expected: self.num_classes(),
                actual: names.len(),
            });
        }
        self.class_names = names;
        Ok(())
    }

    /// Single pass through all layers. Expects a (1, 3, S, S) tensor with
    /// values in [0, 1]; returns the linear region-layer input.
    pub fn forward(&self, image: &Tensor) -> Result<RawPrediction, ModelError> {
        let side = self.input_size;
        if image.shape() != [1, 3, side, side] {
            return Err(ModelError::BadInputShape {
                side,
                shape: image.shape(),
            });
        }
        let mut current = image.clone();
        for (index, layer) in self.layers.iter().enumerate() {
            current = match layer {
                Layer::Conv(p) => conv2d(&current, p).map_err(|source| ModelError::Layer {
                    index,
                    kind: "convolutional",
                    source,
                })?,
                Layer::Maxpool(p) => maxpool2d(&current, p),
                Layer::Region(_) => break,
            };
        }
        RawPrediction::new(current, self.num_anchors(), self.num_classes())
    }

    /// FNV-1a over the bit patterns of every weight and bias, insensitive to
    /// input geometry. Used to check that retargeting never touches weights.
    pub fn parameter_checksum(&self) -> u64 {
        let mut hash = 0xcbf29ce484222325u64;
        let mut mix = |v: f32| {
            for byte in v.to_le_bytes() {
                hash ^= byte as u64;
                hash = hash.wrapping_mul(0x100000001b3);
            }
        };
        for layer in &self.layers {
            if let Layer::Conv(p) = layer {
                p.weights.iter().copied().for_each(&mut mix);
                p.bias.iter().copied().for_each(&mut mix);
            }
        }
        hash
    }
}

/// The region layer's input: a (1, A·(5+C), G, G) tensor holding, per anchor,
/// the raw tx, ty, tw, th, objectness and class logits.
#[derive(Debug, Clone)]
pub struct RawPrediction {
    tensor: Tensor,
    num_anchors: usize,
    num_classes: usize,
}

impl RawPrediction {
    pub fn new(tensor: Tensor, num_anchors: usize, num_classes: usize) -> Result<Self, ModelError> {
        let [_, c, _, _] = tensor.shape();
        let expected = num_anchors * (5 + num_classes);
        if c != expected {
            return Err(ModelError::BadRegionChannels {
                expected,
                actual: c,
            });
        }
        Ok(Self {
            tensor,
            num_anchors,
            num_classes,
        })
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub fn num_anchors(&self) -> usize {
        self.num_anchors
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Grid rows (= cols for square inputs).
    pub fn grid_h(&self) -> usize {
        self.tensor.shape()[2]
    }

    pub fn grid_w(&self) -> usize {
        self.tensor.shape()[3]
    }

    /// Raw value for `entry` of `anchor` at cell (row, col). Entries are
    /// 0..4 = tx, ty, tw, th, 4 = objectness, 5.. = class logits.
    #[inline]
    pub fn at(&self, anchor: usize, entry: usize, row: usize, col: usize) -> f32 {
        self.tensor
            .at(0, anchor * (5 + self.num_classes) + entry, row, col)
    }
}

/// Class-name file: one label per line, index = line number, UTF-8.
/// Trailing blank lines are ignored.
pub fn load_class_names(text: &str) -> Vec<String> {
    let mut names: Vec<String> = text.lines().map(|l| l.trim().to_string()).collect();
    while names.last().is_some_and(|l| l.is_empty()) {
        names.pop();
    }
    names
}
