use std::sync::Arc;

use super::ModelError;
use super::cfg::{LayerSpec, SectionKind};
use super::network::{InputResolution, Layer, NetworkModel, RegionParams};
use crate::nnet::{
    Activation, BATCHNORM_EPSILON, BatchNorm, ConvParams, PoolParams, fold_batchnorm,
};

struct Attr<'a> {
    section: usize,
    kind: &'static str,
    spec: &'a LayerSpec,
}

impl<'a> Attr<'a> {
    fn new(section: usize, spec: &'a LayerSpec) -> Self {
        Self {
            section,
            kind: spec.kind.name(),
            spec,
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &'static str) -> Result<T, ModelError> {
        let raw = self.spec.get(key).ok_or(ModelError::MissingKey {
            section: self.section,
            kind: self.kind,
            key,
        })?;
        raw.parse().map_err(|_| ModelError::BadValue {
            section: self.section,
            key,
            value: raw.to_string(),
        })
    }

    fn optional<T: std::str::FromStr>(
        &self,
        key: &'static str,
        default: T,
    ) -> Result<T, ModelError> {
        match self.spec.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| ModelError::BadValue {
                section: self.section,
                key,
                value: raw.to_string(),
            }),
        }
    }
}

/// Cursor over the float payload of a weights file.
struct FloatReader<'a> {
    bytes: &'a [u8],
    offset: usize,
    expected_total: usize,
    consumed: usize,
}

impl<'a> FloatReader<'a> {
    fn take(&mut self, count: usize) -> Result<Vec<f32>, ModelError> {
        let end = self.offset + count * 4;
        if end > self.bytes.len() {
            let actual = self.bytes.len() / 4;
            return Err(ModelError::WeightsMissing {
                expected: self.expected_total,
                actual,
                missing: self.expected_total.saturating_sub(actual),
            });
        }
        let out = self.bytes[self.offset..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        self.offset = end;
        self.consumed += count;
        Ok(out)
    }
}

/// Number of floats a convolutional section consumes from the weights file.
fn conv_param_count(
    filters: usize,
    in_channels: usize,
    size: usize,
    batch_normalize: bool,
) -> usize {
    let per_filter_stats = if batch_normalize { 4 } else { 1 };
    filters * per_filter_stats + filters * in_channels * size * size
}

/// Builds a [`NetworkModel`] from parsed cfg sections and the raw bytes of a
/// Darknet weights file.
///
/// The header is three 32-bit little-endian signed integers (major, minor,
/// revision) followed by a "seen" counter, 64-bit when major·10+minor ≥ 2 and
/// 32-bit otherwise. Each convolutional layer then stores bias; when
/// batch_normalize=1 also gamma, rolling mean and rolling variance (gamma
/// precedes the rolling stats); and finally the filter weights. Batch norm is
/// folded into the weights immediately, and the file must be consumed exactly.
pub fn load_weights(specs: &[LayerSpec], bytes: &[u8]) -> Result<NetworkModel, ModelError> {
    if specs.is_empty() || specs[0].kind != SectionKind::Net {
        return Err(super::CfgError::MissingNet.into());
    }
    let net = Attr::new(0, &specs[0]);
    let width: usize = net.optional("width", 416)?;
    let height: usize = net.optional("height", 416)?;
    if width != height {
        return Err(ModelError::NonSquareInput { width, height });
    }
    let channels: usize = net.optional("channels", 3)?;
    if channels != 3 {
        return Err(ModelError::BadChannelCount(channels));
    }
    let input = InputResolution::from_side(width)?;

    // Header.
    if bytes.len() < 12 {
        return Err(ModelError::HeaderTruncated(bytes.len()));
    }
    let word = |i: usize| i32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let (major, minor, revision) = (word(0), word(4), word(8));
    if major != 0 || minor < 0 {
        return Err(ModelError::UnsupportedVersion {
            major,
            minor,
            revision,
        });
    }
    let seen_len = if major * 10 + minor >= 2 { 8 } else { 4 };
    let header_len = 12 + seen_len;
    if bytes.len() < header_len {
        return Err(ModelError::HeaderTruncated(bytes.len()));
    }
    let payload = &bytes[header_len..];
    if !payload.len().is_multiple_of(4) {
        return Err(ModelError::WeightsUnaligned(payload.len()));
    }

    // Walk the sections once to know the expected float count up front, so
    // both shortfalls and trailing bytes report expected vs actual.
    let mut expected_total = 0usize;
    let mut in_c = channels;
    for (section, spec) in specs.iter().enumerate().skip(1) {
        if spec.kind == SectionKind::Convolutional {
            let attr = Attr::new(section, spec);
            let filters: usize = attr.required("filters")?;
            let size: usize = attr.optional("size", 1)?;
            let bn: usize = attr.optional("batch_normalize", 0)?;
            expected_total += conv_param_count(filters, in_c, size, bn == 1);
            in_c = filters;
        }
    }
    let actual_total = payload.len() / 4;
    if actual_total < expected_total {
        return Err(ModelError::WeightsMissing {
            expected: expected_total,
            actual: actual_total,
            missing: expected_total - actual_total,
        });
    }
    if actual_total > expected_total {
        return Err(ModelError::WeightsTrailing {
            expected: expected_total,
            actual: actual_total,
            extra_bytes: (actual_total - expected_total) * 4,
        });
    }

    let mut reader = FloatReader {
        bytes: payload,
        offset: 0,
        expected_total,
        consumed: 0,
    };
    let mut layers = Vec::new();
    let mut in_channels = channels;
    let mut region: Option<usize> = None;
    for (section, spec) in specs.iter().enumerate().skip(1) {
        if region.is_some() {
            return Err(ModelError::RegionNotLast);
        }
        match spec.kind {
            SectionKind::Net => return Err(super::CfgError::DuplicateNet { line: 0 }.into()),
            SectionKind::Convolutional => {
                let attr = Attr::new(section, spec);
                let filters: usize = attr.required("filters")?;
                let size: usize = attr.optional("size", 1)?;
                let stride: usize = attr.optional("stride", 1)?;
                let pad_flag: usize = attr.optional("pad", 0)?;
                let mut padding: usize = attr.optional("padding", 0)?;
                if pad_flag == 1 {
                    padding = size / 2;
                }
                let activation = match attr.spec.get("activation").unwrap_or("linear") {
                    "leaky" => Activation::Leaky,
                    "linear" => Activation::Linear,
                    other => {
                        return Err(ModelError::UnsupportedActivation {
                            section,
                            name: other.to_string(),
                        });
                    }
                };
                let batch_normalize: usize = attr.optional("batch_normalize", 0)?;

                let bias = reader.take(filters)?;
                let batchnorm = if batch_normalize == 1 {
                    // The stored "bias" of a batch-normalized layer is the
                    // shift applied after normalization.
                    let gamma = reader.take(filters)?;
                    let mean = reader.take(filters)?;
                    let variance = reader.take(filters)?;
                    Some(BatchNorm {
                        gamma,
                        beta: bias.clone(),
                        mean,
                        variance,
                    })
                } else {
                    None
                };
                let conv_bias = if batchnorm.is_some() {
                    vec![0.0; filters]
                } else {
                    bias
                };
                let weights = reader.take(filters * in_channels * size * size)?;
                let layer_index = layers.len();
                let params = ConvParams::new(
                    filters,
                    in_channels,
                    size,
                    stride,
                    padding,
                    weights,
                    conv_bias,
                    activation,
                    batchnorm,
                )
                .map_err(|source| ModelError::Layer {
                    index: layer_index,
                    kind: "convolutional",
                    source,
                })?;
                let params = if params.batchnorm.is_some() {
                    fold_batchnorm(&params, BATCHNORM_EPSILON).map_err(|source| {
                        ModelError::Layer {
                            index: layer_index,
                            kind: "convolutional",
                            source,
                        }
                    })?
                } else {
                    params
                };
                if !params
                    .weights
                    .iter()
                    .chain(&params.bias)
                    .all(|v| v.is_finite())
                {
                    return Err(ModelError::NonFiniteWeights { layer: layer_index });
                }
                layers.push(Layer::Conv(Arc::new(params)));
                in_channels = filters;
            }
            SectionKind::Maxpool => {
                let attr = Attr::new(section, spec);
                let stride: usize = attr.optional("stride", 1)?;
                let size: usize = attr.optional("size", stride)?;
                let params = PoolParams::new(size, stride).map_err(|source| ModelError::Layer {
                    index: layers.len(),
                    kind: "maxpool",
                    source,
                })?;
                layers.push(Layer::Maxpool(params));
            }
            SectionKind::Region => {
                let attr = Attr::new(section, spec);
                let num: usize = attr.required("num")?;
                let num_classes: usize = attr.required("classes")?;
                let coords: usize = attr.optional("coords", 4)?;
                if coords != 4 {
                    return Err(ModelError::UnsupportedCoords(coords));
                }
                let raw = attr.spec.get("anchors").ok_or(ModelError::MissingKey {
                    section,
                    kind: "region",
                    key: "anchors",
                })?;
                let values: Result<Vec<f32>, _> =
                    raw.split(',').map(|v| v.trim().parse::<f32>()).collect();
                let values = values.map_err(|_| ModelError::BadValue {
                    section,
                    key: "anchors",
                    value: raw.to_string(),
                })?;
                if values.len() != 2 * num {
                    return Err(ModelError::AnchorCount {
                        num,
                        expected: 2 * num,
                        actual: values.len(),
                    });
                }
                let anchors = values.chunks_exact(2).map(|c| (c[0], c[1])).collect();
                region = Some(layers.len());
                layers.push(Layer::Region(RegionParams {
                    anchors,
                    num_classes,
                }));
            }
        }
    }
    if region.is_none() {
        return Err(ModelError::MissingRegion);
    }

    let geometry = NetworkModel::compute_geometry(&layers, input.side())?;
    let num_classes = match layers.last() {
        Some(Layer::Region(r)) => r.num_classes,
        _ => unreachable!(),
    };
    Ok(NetworkModel {
        layers,
        input_size: input.side(),
        class_names: (0..num_classes).map(|i| format!("class{i}")).collect(),
        geometry,
        param_count: reader.consumed,
    })
}
