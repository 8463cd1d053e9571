//! `DNWT` weight files for sequential convolution stacks.
//!
//! Little-endian, no padding: magic `DNWT`, version `u32 = 1`, layer count
//! `u32`; then per layer an activation tag `u8` (0 none, 1 relu), `out_ch`,
//! `in_ch`, `kh`, `kw` as `u32`, `out_ch * in_ch * kh * kw` kernel values
//! (`f32`, out-channel major) and `out_ch` biases (`f32`).

use std::path::Path;

use crate::binio::ByteReader;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DNWT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    None,
    Relu,
}

impl Activation {
    fn tag(self) -> u8 {
        match self {
            Activation::None => 0,
            Activation::Relu => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kh: usize,
    pub kw: usize,
    /// Indexed `[out][in][ky][kx]`.
    pub kernel: Vec<f32>,
    pub bias: Vec<f32>,
    pub activation: Activation,
}

impl ConvLayer {
    pub fn zeros(out_ch: usize, in_ch: usize, k: usize, activation: Activation) -> Self {
        ConvLayer {
            out_ch,
            in_ch,
            kh: k,
            kw: k,
            kernel: vec![0.0; out_ch * in_ch * k * k],
            bias: vec![0.0; out_ch],
            activation,
        }
    }

    pub fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f32 {
        self.kernel[((o * self.in_ch + i) * self.kh + ky) * self.kw + kx]
    }

    pub fn weight_mut(&mut self, o: usize, i: usize, ky: usize, kx: usize) -> &mut f32 {
        &mut self.kernel[((o * self.in_ch + i) * self.kh + ky) * self.kw + kx]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    layers: Vec<ConvLayer>,
}

static BUILTIN: &[u8] = include_bytes!("../../fixtures/residual_denoiser.dnwt");

impl ConvWeights {
    /// Validates channel chaining: one input channel, one output channel,
    /// square odd kernels.
    pub fn new(layers: Vec<ConvLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        let mut channels = 1;
        for (k, l) in layers.iter().enumerate() {
            if l.in_ch != channels {
                return Err(Error::invalid(format!(
                    "layer {k} expects {} input channels, previous layer gives {channels}",
                    l.in_ch
                )));
            }
            if l.kh != l.kw || l.kh % 2 == 0 {
                return Err(Error::invalid(format!(
                    "layer {k} kernel must be square and odd, got {}x{}",
                    l.kh, l.kw
                )));
            }
            if l.kernel.len() != l.out_ch * l.in_ch * l.kh * l.kw || l.bias.len() != l.out_ch {
                return Err(Error::invalid(format!("layer {k} tensor sizes do not match its shape")));
            }
            channels = l.out_ch;
        }
        if channels != 1 {
            return Err(Error::invalid(format!("final layer must have 1 output channel, got {channels}")));
        }
        Ok(ConvWeights { layers })
    }

    /// The committed fixture network (5 layers, 16 channels, 3x3 kernels).
    pub fn builtin() -> Self {
        decode(BUILTIN).expect("builtin fixture is valid")
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            buf.push(l.activation.tag());
            for v in [l.out_ch, l.in_ch, l.kh, l.kw] {
                buf.extend_from_slice(&(v as u32).to_le_bytes());
            }
            for w in l.kernel.iter().chain(&l.bias) {
                buf.extend_from_slice(&w.to_le_bytes());
            }
        }
        buf
    }
}

/// Parses a complete weight file; nothing is returned on any error.
pub fn decode(bytes: &[u8]) -> Result<ConvWeights> {
    let mut rd = ByteReader::new(bytes);
    rd.expect_magic(MAGIC)?;
    let version = rd.u32()?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported DNWT version {version}")));
    }
    let count = rd.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let at = rd.offset();
        let activation = match rd.u8()? {
            0 => Activation::None,
            1 => Activation::Relu,
            t => return Err(Error::format(at, format!("unknown activation tag {t}"))),
        };
        let dims_at = rd.offset();
        let (out_ch, in_ch, kh, kw) = (
            rd.u32()? as usize,
            rd.u32()? as usize,
            rd.u32()? as usize,
            rd.u32()? as usize,
        );
        let n = out_ch
            .checked_mul(in_ch)
            .and_then(|v| v.checked_mul(kh))
            .and_then(|v| v.checked_mul(kw))
            .ok_or_else(|| Error::format(dims_at, "layer shape overflows"))?;
        let mut kernel = Vec::with_capacity(n.min(bytes.len() / 4));
        for _ in 0..n {
            kernel.push(rd.f32()?);
        }
        let mut bias = Vec::with_capacity(out_ch.min(bytes.len() / 4));
        for _ in 0..out_ch {
            bias.push(rd.f32()?);
        }
        layers.push(ConvLayer {
            out_ch,
            in_ch,
            kh,
            kw,
            kernel,
            bias,
            activation,
        });
    }
    rd.expect_end()?;
    ConvWeights::new(layers).map_err(|e| Error::format(rd.offset(), e.to_string()))
}

pub fn load_weights(path: &Path) -> Result<ConvWeights> {
    decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn save_weights(weights: &ConvWeights, path: &Path) -> Result<()> {
    std::fs::write(path, weights.encode()).map_err(|e| Error::io(path, e))
}
