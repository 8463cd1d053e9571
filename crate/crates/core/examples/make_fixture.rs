//! Regenerates `fixtures/residual_denoiser.dnwt`.
//!
//! The network predicts the clipped high-pass component `clip(h, -t, t)` with
//! `h = x - B(x)` and `B` the 3x3 binomial blur, so the residual denoiser
//! `x - net(x)` keeps the smooth part and soft-thresholds fine detail.
//!
//! Usage: `cargo run --example make_fixture -- <out.dnwt>`

use unrollreg::denoiser::{save_weights, Activation, ConvLayer, ConvWeights};

const CHANNELS: usize = 16;
const THRESHOLD: f32 = 0.04;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/core/fixtures/residual_denoiser.dnwt".into());

    let binomial = [1.0f32, 2.0, 1.0];
    let mut highpass = [[0.0f32; 3]; 3];
    for (ky, row) in highpass.iter_mut().enumerate() {
        for (kx, w) in row.iter_mut().enumerate() {
            *w = -binomial[ky] * binomial[kx] / 16.0;
        }
    }
    highpass[1][1] += 1.0;

    let mut first = ConvLayer::zeros(CHANNELS, 1, 3, Activation::Relu);
    // relu(h), relu(-h), relu(h - t), relu(-h - t)
    for (o, sign, bias) in [(0, 1.0, 0.0), (1, -1.0, 0.0), (2, 1.0, -THRESHOLD), (3, -1.0, -THRESHOLD)] {
        for (ky, row) in highpass.iter().enumerate() {
            for (kx, &h) in row.iter().enumerate() {
                *first.weight_mut(o, 0, ky, kx) = sign * h;
            }
        }
        first.bias[o] = bias;
    }

    let mut layers = vec![first];
    for _ in 0..3 {
        let mut pass = ConvLayer::zeros(CHANNELS, CHANNELS, 3, Activation::Relu);
        for c in 0..4 {
            *pass.weight_mut(c, c, 1, 1) = 1.0;
        }
        layers.push(pass);
    }

    let mut last = ConvLayer::zeros(1, CHANNELS, 3, Activation::None);
    for (c, w) in [(0, 1.0), (1, -1.0), (2, -1.0), (3, 1.0)] {
        *last.weight_mut(0, c, 1, 1) = w;
    }
    layers.push(last);

    let weights = ConvWeights::new(layers)?;
    save_weights(&weights, std::path::Path::new(&out))?;
    println!("wrote {out}");
    Ok(())
}
