use std::fmt;
use std::str::FromStr;

use rand::{Rng as _, SeedableRng};

use crate::error::{Error, Result};
use crate::types::Image;
use crate::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    SheppLogan,
    Disks,
    Bars,
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shepp_logan" => Ok(PhantomKind::SheppLogan),
            "disks" => Ok(PhantomKind::Disks),
            "bars" => Ok(PhantomKind::Bars),
            other => Err(Error::invalid(format!(
                "unknown phantom kind `{other}` (expected shepp_logan, disks or bars)"
            ))),
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhantomKind::SheppLogan => "shepp_logan",
            PhantomKind::Disks => "disks",
            PhantomKind::Bars => "bars",
        })
    }
}

/// Intensity, semi-axes, centre and rotation (degrees) of the modified
/// (high-contrast) Shepp-Logan head, on the `[-1, 1]^2` square.
const SHEPP_LOGAN: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

/// Bar layout used by [`PhantomKind::Bars`]: `(bar_width, first_row, last_row_exclusive)`.
pub fn bar_layout(n1: usize, n2: usize) -> (usize, usize, usize) {
    ((n2 / 8).max(1), n1 / 4, n1 - n1 / 4)
}

/// Synthetic test object with intensities in `[0, 1]`.
///
/// `seed` only affects [`PhantomKind::Disks`].
pub fn make_phantom(kind: PhantomKind, n1: usize, n2: usize, seed: u64) -> Result<Image> {
    if n1 < 8 || n2 < 8 {
        return Err(Error::invalid(format!("phantom needs at least 8x8 pixels, got {n1}x{n2}")));
    }
    let mut data = vec![0.0; n1 * n2];
    match kind {
        PhantomKind::SheppLogan => {
            for_each_pixel(n1, n2, &mut data, |x, y| {
                SHEPP_LOGAN
                    .iter()
                    .filter(|e| inside_ellipse(x, y, e[1], e[2], e[3], e[4], e[5]))
                    .map(|e| e[0])
                    .sum()
            });
        }
        PhantomKind::Disks => {
            let mut rng = Rng::seed_from_u64(seed);
            let disks: Vec<[f64; 4]> = (0..6)
                .map(|_| {
                    let r = rng.random_range(0.06..0.2);
                    let rho = rng.random_range(0.0..(0.75 - r));
                    let phi = rng.random_range(0.0..std::f64::consts::TAU);
                    [rho * phi.cos(), rho * phi.sin(), r, rng.random_range(0.2..0.6)]
                })
                .collect();
            for_each_pixel(n1, n2, &mut data, |x, y| {
                if x * x + y * y > 0.85 * 0.85 {
                    return 0.0;
                }
                0.3 + disks
                    .iter()
                    .filter(|d| (x - d[0]).powi(2) + (y - d[1]).powi(2) <= d[2] * d[2])
                    .map(|d| d[3])
                    .sum::<f64>()
            });
        }
        PhantomKind::Bars => {
            let (w, top, bottom) = bar_layout(n1, n2);
            for r in top..bottom {
                for c in 0..(n2 / w) * w {
                    if (c / w) % 2 == 1 {
                        data[r * n2 + c] = 1.0;
                    }
                }
            }
        }
    }
    data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Image::from_vec(n1, n2, data)
}

fn for_each_pixel(n1: usize, n2: usize, data: &mut [f64], f: impl Fn(f64, f64) -> f64) {
    for r in 0..n1 {
        let y = 1.0 - 2.0 * (r as f64 + 0.5) / n1 as f64;
        for c in 0..n2 {
            let x = 2.0 * (c as f64 + 0.5) / n2 as f64 - 1.0;
            data[r * n2 + c] = f(x, y);
        }
    }
}

fn inside_ellipse(x: f64, y: f64, a: f64, b: f64, x0: f64, y0: f64, phi_deg: f64) -> bool {
    let (s, c) = phi_deg.to_radians().sin_cos();
    let (dx, dy) = (x - x0, y - y0);
    let u = dx * c + dy * s;
    let v = -dx * s + dy * c;
    (u / a).powi(2) + (v / b).powi(2) <= 1.0
}
