//! Denoisers used as the data-denoising step.
//!
//! Besides the fixed-weight residual network, the module provides classical
//! smoothers and the `gain` surrogate, a deliberately expansive "denoiser"
//! used to reproduce breakdown of unregularized schemes.

mod conv;
mod weights;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

pub use weights::{decode as decode_weights, load_weights, save_weights, Activation, ConvLayer, ConvWeights};

use crate::error::{Error, Result};
use crate::types::Image;

#[derive(Debug, Clone)]
pub enum DenoiserSpec {
    Identity,
    /// Separable Gaussian blur, `sigma` in pixels.
    Gaussian { sigma: f64 },
    /// Median over a `window x window` neighbourhood.
    Median { window: usize },
    /// Multiplies the image by `gain`.
    Gain { gain: f64 },
    /// `x - net(x)`. With `normalize`, the image is mapped to `[0, 1]` before
    /// the network and mapped back afterwards.
    ConvResidual {
        weights: Arc<ConvWeights>,
        normalize: bool,
        label: String,
    },
}

impl DenoiserSpec {
    pub fn builtin_conv() -> Self {
        DenoiserSpec::ConvResidual {
            weights: Arc::new(ConvWeights::builtin()),
            normalize: true,
            label: "builtin".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DenoiserSpec::Gaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(Error::invalid(format!("gaussian sigma must be >= 0, got {sigma}")))
            }
            DenoiserSpec::Median { window } if window == 0 || window % 2 == 0 => {
                Err(Error::invalid(format!("median window must be odd and >= 1, got {window}")))
            }
            DenoiserSpec::Gain { gain } if !gain.is_finite() => {
                Err(Error::invalid(format!("gain must be finite, got {gain}")))
            }
            _ => Ok(()),
        }
    }

    /// Parses `identity`, `gaussian(s)`, `median(k)`, `gain(g)`,
    /// `conv(builtin)`, `conv(<path>)` or `conv_raw(<path>)` (no
    /// normalization). Relative paths resolve against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let text = text.trim();
        let (name, arg) = match text.split_once('(') {
            Some((n, rest)) => {
                let arg = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::invalid(format!("unbalanced parentheses in `{text}`")))?;
                (n.trim(), Some(arg.trim()))
            }
            None => (text, None),
        };
        let number = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::invalid(format!("`{name}` needs a parameter")))?
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad parameter in `{text}`")))
        };
        let spec = match name {
            "identity" => DenoiserSpec::Identity,
            "gaussian" => DenoiserSpec::Gaussian { sigma: number(arg)? },
            "median" => {
                let k = number(arg)?;
                if k.fract() != 0.0 || k < 0.0 {
                    return Err(Error::invalid(format!("median window must be an integer, got {k}")));
                }
                DenoiserSpec::Median { window: k as usize }
            }
            "gain" => DenoiserSpec::Gain { gain: number(arg)? },
            "conv" | "conv_raw" => {
                let arg = arg.unwrap_or("builtin");
                let weights = if arg == "builtin" {
                    ConvWeights::builtin()
                } else {
                    let p = Path::new(arg);
                    let full = match base {
                        Some(b) if p.is_relative() => b.join(p),
                        _ => p.to_path_buf(),
                    };
                    load_weights(&full)?
                };
                DenoiserSpec::ConvResidual {
                    weights: Arc::new(weights),
                    normalize: name == "conv",
                    label: arg.to_string(),
                }
            }
            other => return Err(Error::invalid(format!("unknown denoiser `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for DenoiserSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenoiserSpec::Identity => write!(f, "identity"),
            DenoiserSpec::Gaussian { sigma } => write!(f, "gaussian({sigma})"),
            DenoiserSpec::Median { window } => write!(f, "median({window})"),
            DenoiserSpec::Gain { gain } => write!(f, "gain({gain})"),
            DenoiserSpec::ConvResidual { normalize, label, .. } => {
                write!(f, "{}({label})", if *normalize { "conv" } else { "conv_raw" })
            }
        }
    }
}

pub fn apply_denoiser(spec: &DenoiserSpec, x: &Image) -> Result<Image> {
    spec.validate()?;
    if x.is_empty() {
        return Err(Error::invalid("denoiser input is empty"));
    }
    match spec {
        DenoiserSpec::Identity => Ok(x.clone()),
        DenoiserSpec::Gaussian { sigma } => gaussian_denoise(x, *sigma),
        DenoiserSpec::Median { window } => median_denoise(x, *window),
        DenoiserSpec::Gain { gain } => Ok(x.scaled(*gain)),
        DenoiserSpec::ConvResidual {
            weights, normalize, ..
        } => Ok(conv_residual(weights, x, *normalize)),
    }
}

fn conv_residual(weights: &ConvWeights, x: &Image, normalize: bool) -> Image {
    let (lo, hi) = x.min_max();
    let (offset, scale) = if normalize && hi > lo {
        (lo, hi - lo)
    } else {
        (0.0, 1.0)
    };
    let input: Vec<f32> = x.data().iter().map(|&v| ((v - offset) / scale) as f32).collect();
    let noise = conv::forward(weights, x.rows(), x.cols(), &input);
    let data = input
        .iter()
        .zip(&noise)
        .map(|(&v, &n)| f64::from(v - n) * scale + offset)
        .collect();
    Image::from_raw(x.rows(), x.cols(), data)
}

/// Half-sample symmetric index: `... b a | a b c ... z | z y ...`.
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - 1 - m) as usize
    } else {
        m as usize
    }
}

/// Sampled, normalized Gaussian taps on `[-radius, radius]`, `radius = ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil().max(1.0) as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable Gaussian blur with reflect padding. `sigma = 0` is the identity.
pub fn gaussian_denoise(x: &Image, sigma: f64) -> Result<Image> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("gaussian sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let taps = gaussian_kernel(sigma);
    let radius = (taps.len() / 2) as isize;
    let (rows, cols) = (x.rows(), x.cols());
    let src = x.data();
    let mut tmp = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            tmp[r * cols + c] = taps
                .iter()
                .enumerate()
                .map(|(k, w)| w * src[r * cols + reflect(c as isize + k as isize - radius, cols)])
                .sum();
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = taps
                .iter()
                .enumerate()
                .map(|(k, w)| w * tmp[reflect(r as isize + k as isize - radius, rows) * cols + c])
                .sum();
        }
    }
    Ok(Image::from_raw(rows, cols, out))
}

pub fn median_denoise(x: &Image, window: usize) -> Result<Image> {
    if window.is_multiple_of(2) {
        return Err(Error::invalid(format!("median window must be odd and >= 1, got {window}")));
    }
    let r = (window / 2) as isize;
    let (rows, cols) = (x.rows(), x.cols());
    let mut buf = Vec::with_capacity(window * window);
    let mut out = Vec::with_capacity(rows * cols);
    for y in 0..rows as isize {
        for xx in 0..cols as isize {
            buf.clear();
            for dy in -r..=r {
                let yy = reflect(y + dy, rows);
                for dx in -r..=r {
                    buf.push(x.data()[yy * cols + reflect(xx + dx, cols)]);
                }
            }
            let mid = buf.len() / 2;
            let (_, m, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
            out.push(*m);
        }
    }
    Ok(Image::from_raw(rows, cols, out))
}
