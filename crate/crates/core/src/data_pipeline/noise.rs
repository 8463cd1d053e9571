use rand::SeedableRng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::forward_model::SparseOperator;
use crate::linalg;
use crate::types::{Image, Sinogram};
use crate::Rng;

/// How photon counts are drawn in [`add_poisson_noise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountSampling {
    Poisson,
    /// Replace each draw by its mean. The chain then reproduces its input.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Incident photon count `I0`.
    pub intensity: f64,
    pub seed: u64,
    pub sampling: CountSampling,
}

impl NoiseModel {
    pub fn poisson(intensity: f64, seed: u64) -> Self {
        NoiseModel {
            intensity,
            seed,
            sampling: CountSampling::Poisson,
        }
    }
}

/// Noiseless data `y = T x`.
pub fn synthesize_clean(op: &SparseOperator, phantom: &Image) -> Result<Sinogram> {
    op.apply(phantom)
}

/// Transmission-noise model on a normalized sinogram.
///
/// The sinogram is mapped to `[0, 1]` with its own min/max, turned into
/// counts `I0 exp(-u)`, sampled, log-transformed back and rescaled with the
/// same (clean) min/max. Zero-count draws are clamped to one count.
pub fn add_poisson_noise(y: &Sinogram, model: &NoiseModel) -> Result<Sinogram> {
    if !(model.intensity.is_finite() && model.intensity > 0.0) {
        return Err(Error::invalid(format!(
            "photon intensity must be positive, got {}",
            model.intensity
        )));
    }
    let (lo, hi) = y.min_max();
    if !(hi > lo) {
        return Err(Error::DegenerateInput(
            "sinogram is constant; cannot normalize for the noise model".into(),
        ));
    }
    let range = hi - lo;
    let i0 = model.intensity;
    let mut rng = Rng::seed_from_u64(model.seed);
    let mut out = Vec::with_capacity(y.len());
    for &v in y.data() {
        let u = (v - lo) / range;
        let mean = i0 * (-u).exp();
        let counts = match model.sampling {
            CountSampling::Mean => mean,
            CountSampling::Poisson => {
                let dist = Poisson::new(mean)
                    .map_err(|e| Error::invalid(format!("poisson mean {mean}: {e}")))?;
                dist.sample(&mut rng).max(1.0)
            }
        };
        let noisy = -(counts / i0).ln();
        out.push(noisy * range + lo);
    }
    Sinogram::from_vec(y.rays(), y.angles(), out)
}

/// Euclidean distance `||y_delta - y||`.
pub fn noise_level(y: &Sinogram, y_delta: &Sinogram) -> Result<f64> {
    y.check_same_shape(y_delta, "noise_level")?;
    Ok(linalg::diff_norm(y.data(), y_delta.data()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(m1: usize, m2: usize) -> Sinogram {
        Sinogram::from_vec(m1, m2, (0..m1 * m2).map(|i| (i as f64 * 0.37).sin() * 3.0 + 4.0).collect())
            .unwrap()
    }

    #[test]
    fn mean_draw_reproduces_input() {
        let y = ramp(13, 7);
        let model = NoiseModel {
            intensity: 1e6,
            seed: 3,
            sampling: CountSampling::Mean,
        };
        let out = add_poisson_noise(&y, &model).unwrap();
        for (a, b) in y.data().iter().zip(out.data()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn constant_sinogram_is_degenerate() {
        let y = Sinogram::from_vec(3, 2, vec![2.0; 6]).unwrap();
        assert!(matches!(
            add_poisson_noise(&y, &NoiseModel::poisson(1e6, 0)),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn seeded_noise_is_deterministic() {
        let y = ramp(20, 5);
        let a = add_poisson_noise(&y, &NoiseModel::poisson(1e4, 11)).unwrap();
        let b = add_poisson_noise(&y, &NoiseModel::poisson(1e4, 11)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, y);
    }

    #[test]
    fn tiny_intensity_clamps_zero_counts() {
        let y = ramp(50, 4);
        let out = add_poisson_noise(&y, &NoiseModel::poisson(0.5, 1)).unwrap();
        assert!(out.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn noise_level_basics() {
        let y = ramp(4, 2);
        assert_eq!(noise_level(&y, &y).unwrap(), 0.0);
        let mut e = y.clone();
        e.data_mut()[0] += 1.0;
        assert!((noise_level(&y, &e).unwrap() - 1.0).abs() < 1e-15);
        assert!(noise_level(&y, &ramp(2, 4)).is_err());
    }
}
