//! Portable weights file.
//!
//! Layout (all little-endian): the 8-byte magic `OCLRWTS1`; four `i32`
//! header fields (classes, anchors, input channels, input size); then for
//! each convolution layer in index order: bias, and for batch-normed
//! layers gamma, running mean and running variance, followed by the
//! filters in `(out, in, kh, kw)` order, all as `f32`. For batch-normed
//! layers the stored bias is the batch-norm shift (beta); their
//! convolution bias is identically zero.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{LayerKind, ModelT, NetworkConfig, Profile};

pub const WEIGHTS_MAGIC: &[u8; 8] = b"OCLRWTS1";
const HEADER_LEN: usize = 8 + 4 * 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightsHeader {
    pub num_classes: usize,
    pub num_anchors: usize,
    pub input_channels: usize,
    pub input_size: usize,
}

impl WeightsHeader {
    fn of(config: &NetworkConfig) -> Self {
        WeightsHeader {
            num_classes: config.num_classes,
            num_anchors: config.num_anchors,
            input_channels: config.input_channels,
            input_size: config.input_size,
        }
    }

    fn describe(&self) -> String {
        format!(
            "(classes {}, anchors {}, channels {}, size {})",
            self.num_classes, self.num_anchors, self.input_channels, self.input_size
        )
    }
}

fn parse_header(bytes: &[u8]) -> Result<WeightsHeader> {
    if bytes.len() < 8 || &bytes[..8] != WEIGHTS_MAGIC {
        return Err(Error::NotWeightsFile);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedWeights {
            layer: 0,
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let field = |i: usize| -> Result<usize> {
        let off = 8 + 4 * i;
        let v = i32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::format("weights header", format!("negative field {v}")))
    };
    Ok(WeightsHeader {
        num_classes: field(0)?,
        num_anchors: field(1)?,
        input_channels: field(2)?,
        input_size: field(3)?,
    })
}

pub fn read_weights_header(path: impl AsRef<Path>) -> Result<WeightsHeader> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_header(&bytes)
}

/// Floats stored for each convolution block, in block order.
fn block_float_counts(model: &ModelT<f32>) -> Vec<(usize, usize)> {
    model
        .blocks()
        .iter()
        .map(|b| {
            let out = b.conv.out_channels();
            let bn = if b.bn.is_some() { 3 * out } else { 0 };
            (b.layer, out + bn + b.conv.weights.len())
        })
        .collect()
}

fn payload_len(config: &NetworkConfig) -> Result<usize> {
    let specs = super::layer_specs(config)?;
    Ok(specs
        .iter()
        .filter(|l| l.kind == LayerKind::Conv)
        .map(|l| {
            let bn = if l.index == 23 { 0 } else { 3 * l.filters };
            l.filters + bn + l.filters * l.input.c * l.kernel * l.kernel
        })
        .sum::<usize>()
        * 4)
}

fn push_f32s(out: &mut Vec<u8>, vals: &[f32]) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

impl ModelT<f32> {
    pub fn to_weights_bytes(&self) -> Vec<u8> {
        let h = WeightsHeader::of(&self.config);
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.parameter_count());
        out.extend_from_slice(WEIGHTS_MAGIC);
        for v in [h.num_classes, h.num_anchors, h.input_channels, h.input_size] {
            out.extend_from_slice(&(v as i32).to_le_bytes());
        }
        for b in &self.blocks {
            match &b.bn {
                Some(bn) => {
                    push_f32s(&mut out, &bn.beta);
                    push_f32s(&mut out, &bn.gamma);
                    push_f32s(&mut out, &bn.running_mean);
                    push_f32s(&mut out, &bn.running_var);
                }
                None => push_f32s(&mut out, &b.conv.bias),
            }
            push_f32s(&mut out, b.conv.weights.data());
        }
        out
    }

    pub fn save_weights(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_weights_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Overwrites this model's parameters from a serialized weights buffer.
    pub fn load_weights_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let header = parse_header(bytes)?;
        let expected = WeightsHeader::of(&self.config);
        if header != expected {
            return Err(Error::WeightsConfigMismatch {
                expected: expected.describe(),
                found: header.describe(),
            });
        }
        let counts = block_float_counts(self);
        let total = HEADER_LEN + 4 * counts.iter().map(|c| c.1).sum::<usize>();
        let mut consumed = HEADER_LEN;
        for &(layer, floats) in &counts {
            consumed += 4 * floats;
            if bytes.len() < consumed {
                return Err(Error::TruncatedWeights {
                    layer,
                    expected: total,
                    actual: bytes.len(),
                });
            }
        }
        if bytes.len() != total {
            return Err(Error::format(
                "weights file",
                format!("expected {total} bytes, found {} (profile mismatch?)", bytes.len()),
            ));
        }

        let mut cursor = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let mut fill = |dst: &mut [f32]| {
            for d in dst {
                *d = cursor.next().expect("length checked");
            }
        };
        for b in self.blocks.iter_mut() {
            match b.bn.as_mut() {
                Some(bn) => {
                    fill(&mut bn.beta);
                    fill(&mut bn.gamma);
                    fill(&mut bn.running_mean);
                    fill(&mut bn.running_var);
                    b.conv.bias.fill(0.0);
                }
                None => fill(&mut b.conv.bias),
            }
            fill(b.conv.weights.data_mut());
        }
        Ok(())
    }

    pub fn load_weights(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.load_weights_bytes(&bytes)
    }

    /// Reconstructs a model from a weights file alone. The width profile is
    /// recovered from the payload size; anchor priors are not stored and
    /// must be supplied (their count must match the header).
    pub fn from_weights_file(path: impl AsRef<Path>, anchors: Vec<super::Anchor>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let h = parse_header(&bytes)?;
        let payload = bytes.len() - HEADER_LEN;
        let mut last_err = None;
        for profile in [Profile::Full, Profile::Tiny] {
            let config = NetworkConfig {
                num_classes: h.num_classes,
                num_anchors: h.num_anchors,
                input_channels: h.input_channels,
                input_size: h.input_size,
                anchors: anchors.clone(),
                profile,
            };
            match payload_len(&config) {
                Ok(len) if len == payload => {
                    let mut model = ModelT::build(&config, 0)?;
                    model.load_weights_bytes(&bytes)?;
                    return Ok(model);
                }
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.unwrap_or_else(|| {
            Error::format(
                path.display().to_string(),
                format!("payload of {payload} bytes matches no known profile"),
            )
        }))
    }
}
