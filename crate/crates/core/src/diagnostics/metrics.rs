use crate::error::{Error, Result};
use crate::types::Image;

/// Returned by [`psnr`] when the images are identical.
pub const PSNR_CAP_DB: f64 = 200.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// `10 log10(peak^2 / MSE)` with `peak = max(reference) - min(reference)`,
/// capped at 200 dB.
pub fn psnr(x: &Image, reference: &Image) -> Result<f64> {
    x.check_same_shape(reference, "psnr")?;
    let (lo, hi) = reference.min_max();
    let peak = hi - lo;
    if !(peak > 0.0) {
        return Err(Error::DegenerateInput("psnr reference image is constant".into()));
    }
    let mse = x
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

/// Mean SSIM over all window positions fully inside the image, with the
/// dynamic range taken from the reference.
pub fn ssim(x: &Image, reference: &Image) -> Result<f64> {
    let (lo, hi) = reference.min_max();
    if !(hi > lo) {
        return Err(Error::DegenerateInput(
            "ssim reference image is constant; use ssim_with_range".into(),
        ));
    }
    ssim_with_range(x, reference, hi - lo)
}

/// SSIM with an explicit dynamic range `range`.
pub fn ssim_with_range(x: &Image, reference: &Image, range: f64) -> Result<f64> {
    x.check_same_shape(reference, "ssim")?;
    if x.rows() < SSIM_WINDOW || x.cols() < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::invalid(format!("ssim dynamic range must be > 0, got {range}")));
    }
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let w = window();
    let (rows, cols) = (x.rows(), x.cols());
    let (a, b) = (x.data(), reference.data());
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { a.iter().zip(b).map(|(&p, &q)| f(p, q)).collect() };
    let mu_x = filter_valid(a, rows, cols, &w);
    let mu_y = filter_valid(b, rows, cols, &w);
    let xx = filter_valid(&prod(&|p, _| p * p), rows, cols, &w);
    let yy = filter_valid(&prod(&|_, q| q * q), rows, cols, &w);
    let xy = filter_valid(&prod(&|p, q| p * q), rows, cols, &w);
    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = xx[i] - mx * mx;
        let vy = yy[i] - my * my;
        let cxy = xy[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / mu_x.len() as f64)
}

fn window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let taps: Vec<f64> = (0..SSIM_WINDOW)
        .map(|k| {
            let d = k as f64 - r;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

/// Separable "valid" correlation with the 1-D taps `w` along both axes.
fn filter_valid(src: &[f64], rows: usize, cols: usize, w: &[f64]) -> Vec<f64> {
    let k = w.len();
    let (orows, ocols) = (rows + 1 - k, cols + 1 - k);
    let mut tmp = vec![0.0; rows * ocols];
    for r in 0..rows {
        for c in 0..ocols {
            tmp[r * ocols + c] = w.iter().enumerate().map(|(j, t)| t * src[r * cols + c + j]).sum();
        }
    }
    let mut out = vec![0.0; orows * ocols];
    for r in 0..orows {
        for c in 0..ocols {
            out[r * ocols + c] = w.iter().enumerate().map(|(j, t)| t * tmp[(r + j) * ocols + c]).sum();
        }
    }
    out
}
