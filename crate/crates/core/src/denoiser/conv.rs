//! Sequential convolution inference in `f32` with reflect padding.

use super::weights::{Activation, ConvWeights};
use super::reflect;

/// Runs the network on a single-channel `rows x cols` image.
pub fn forward(weights: &ConvWeights, rows: usize, cols: usize, input: &[f32]) -> Vec<f32> {
    let mut channels: Vec<Vec<f32>> = vec![input.to_vec()];
    for layer in weights.layers() {
        let r = layer.kh / 2;
        let (prow, pcol) = (rows + 2 * r, cols + 2 * r);
        let padded: Vec<Vec<f32>> = channels.iter().map(|c| pad(c, rows, cols, r)).collect();
        let mut next = Vec::with_capacity(layer.out_ch);
        for o in 0..layer.out_ch {
            let mut out = vec![layer.bias[o]; rows * cols];
            for (i, src) in padded.iter().enumerate() {
                for ky in 0..layer.kh {
                    for kx in 0..layer.kw {
                        let w = layer.weight(o, i, ky, kx);
                        if w == 0.0 {
                            continue;
                        }
                        for y in 0..rows {
                            let s = &src[(y + ky) * pcol + kx..(y + ky) * pcol + kx + cols];
                            let d = &mut out[y * cols..(y + 1) * cols];
                            for (dv, sv) in d.iter_mut().zip(s) {
                                *dv += w * sv;
                            }
                        }
                    }
                }
            }
            if layer.activation == Activation::Relu {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            next.push(out);
        }
        debug_assert_eq!(prow * pcol, padded.first().map_or(prow * pcol, Vec::len));
        channels = next;
    }
    channels.pop().expect("validated network has one output channel")
}

fn pad(src: &[f32], rows: usize, cols: usize, r: usize) -> Vec<f32> {
    let pcol = cols + 2 * r;
    let mut out = Vec::with_capacity((rows + 2 * r) * pcol);
    for py in 0..rows + 2 * r {
        let y = reflect(py as isize - r as isize, rows);
        for px in 0..pcol {
            let x = reflect(px as isize - r as isize, cols);
            out.push(src[y * cols + x]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::weights::ConvLayer;
    use rand::{Rng as _, SeedableRng};

    /// Direct nested-loop evaluation in f64 with explicit reflect indexing.
    fn oracle(weights: &ConvWeights, rows: usize, cols: usize, input: &[f32]) -> Vec<f64> {
        let mut chans: Vec<Vec<f64>> = vec![input.iter().map(|&v| f64::from(v)).collect()];
        for l in weights.layers() {
            let r = (l.kh / 2) as isize;
            let mut next = vec![vec![0.0; rows * cols]; l.out_ch];
            for (o, out) in next.iter_mut().enumerate() {
                for y in 0..rows {
                    for x in 0..cols {
                        let mut acc = f64::from(l.bias[o]);
                        for (i, ch) in chans.iter().enumerate() {
                            for ky in 0..l.kh {
                                for kx in 0..l.kw {
                                    let sy = reflect(y as isize + ky as isize - r, rows);
                                    let sx = reflect(x as isize + kx as isize - r, cols);
                                    acc += f64::from(l.weight(o, i, ky, kx)) * ch[sy * cols + sx];
                                }
                            }
                        }
                        out[y * cols + x] = if l.activation == Activation::Relu { acc.max(0.0) } else { acc };
                    }
                }
            }
            chans = next;
        }
        chans.pop().unwrap()
    }

    fn random_net(seed: u64) -> ConvWeights {
        let mut rng = crate::Rng::seed_from_u64(seed);
        let shapes = [(6, 1, Activation::Relu), (6, 6, Activation::Relu), (1, 6, Activation::None)];
        let layers = shapes
            .iter()
            .map(|&(o, i, a)| {
                let mut l = ConvLayer::zeros(o, i, 3, a);
                l.kernel.iter_mut().for_each(|w| *w = rng.random_range(-0.3..0.3));
                l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
                l
            })
            .collect();
        ConvWeights::new(layers).unwrap()
    }

    #[test]
    fn matches_nested_loop_oracle() {
        for seed in 0..5 {
            let w = random_net(seed);
            let mut rng = crate::Rng::seed_from_u64(seed + 50);
            let (rows, cols) = (9, 13);
            let input: Vec<f32> = (0..rows * cols).map(|_| rng.random_range(0.0..1.0)).collect();
            let got = forward(&w, rows, cols, &input);
            let want = oracle(&w, rows, cols, &input);
            for (g, o) in got.iter().zip(&want) {
                assert!((f64::from(*g) - o).abs() < 1e-5);
            }
        }
        let builtin = ConvWeights::builtin();
        let input: Vec<f32> = (0..64).map(|i| ((i * 37) % 11) as f32 / 10.0).collect();
        let got = forward(&builtin, 8, 8, &input);
        for (g, o) in got.iter().zip(oracle(&builtin, 8, 8, &input)) {
            assert!((f64::from(*g) - o).abs() < 1e-5);
        }
    }

    #[test]
    fn box_filter_on_ramp() {
        let mut l = ConvLayer::zeros(1, 1, 3, Activation::None);
        l.kernel.iter_mut().for_each(|w| *w = 1.0 / 9.0);
        let w = ConvWeights::new(vec![l]).unwrap();
        let input: Vec<f32> = (0..16).map(|i| (i % 4) as f32).collect();
        let out = forward(&w, 4, 4, &input);
        // reflected columns: [0,0,1], [0,1,2], [1,2,3], [2,3,3]
        let want = [1.0 / 3.0, 1.0, 2.0, 8.0 / 3.0];
        for r in 0..4 {
            for c in 0..4 {
                assert!((out[r * 4 + c] - want[c]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn builtin_soft_thresholds_high_pass() {
        // flat image: no high-pass content, residual is zero
        let out = forward(&ConvWeights::builtin(), 6, 6, &[0.5; 36]);
        assert!(out.iter().all(|v| v.abs() < 1e-6));
        // isolated spike: h at the spike is 0.75 * 0.8, clipped to the threshold
        let mut input = vec![0.0f32; 49];
        input[24] = 0.8;
        let out = forward(&ConvWeights::builtin(), 7, 7, &input);
        assert!((out[24] - 0.04).abs() < 1e-6);
    }
}
