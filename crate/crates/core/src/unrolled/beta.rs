//! Cross-validation choice of the per-step combination weight.

use crate::data_pipeline::LeaveOutSplit;
use crate::error::{Error, Result};
use crate::forward_model::SparseOperator;
use crate::types::{Image, Sinogram};

pub const GRID_POINTS: usize = 33;
pub const REFINE_WIDTH: f64 = 1e-4;

/// Held-out residual of `(1 - beta) c + beta l` as a function of `beta`.
#[derive(Debug, Clone)]
pub struct BetaObjective {
    /// `(T c)_s - y_s`
    base: Vec<f64>,
    /// `(T l)_s - (T c)_s`
    slope: Vec<f64>,
}

impl BetaObjective {
    pub fn new(
        op: &SparseOperator,
        classical: &Image,
        learned: &Image,
        y_delta: &Sinogram,
        split: &LeaveOutSplit,
    ) -> Result<Self> {
        classical.check_same_shape(learned, "select_beta")?;
        if split.is_empty() {
            return Err(Error::invalid("beta selection needs a non-empty leave-out split"));
        }
        if split.total() != op.rows() || y_delta.len() != op.rows() || classical.len() != op.cols() {
            return Err(Error::invalid("select_beta: operator, data, image and split sizes disagree"));
        }
        let rows = split.held_out();
        let tc = op.apply_rows(classical.data(), rows);
        let tl = op.apply_rows(learned.data(), rows);
        Ok(BetaObjective {
            base: tc.iter().zip(rows).map(|(t, &i)| t - y_delta.data()[i]).collect(),
            slope: tl.iter().zip(&tc).map(|(l, c)| l - c).collect(),
        })
    }

    pub fn eval(&self, beta: f64) -> f64 {
        self.base
            .iter()
            .zip(&self.slope)
            .map(|(a, b)| {
                let r = a + beta * b;
                r * r
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Minimizes the held-out residual over `beta in [0, 1]`: a 33-point grid
/// scan, then golden-section search on the grid cells around the best point
/// down to width `1e-4`. The refined value replaces the grid point only when
/// strictly better, and the scan keeps the first minimum, so ties go to the
/// smaller `beta`.
pub fn select_beta(
    op: &SparseOperator,
    classical: &Image,
    learned: &Image,
    y_delta: &Sinogram,
    split: &LeaveOutSplit,
) -> Result<f64> {
    let obj = BetaObjective::new(op, classical, learned, y_delta, split)?;
    Ok(minimize(|b| obj.eval(b)))
}

pub(crate) fn minimize(f: impl Fn(f64) -> f64) -> f64 {
    let h = 1.0 / (GRID_POINTS - 1) as f64;
    let mut best_j = 0;
    let mut best = f(0.0);
    for j in 1..GRID_POINTS {
        let v = f(j as f64 * h);
        if v < best {
            best = v;
            best_j = j;
        }
    }
    let best_beta = best_j as f64 * h;
    let mut lo = best_j.saturating_sub(1) as f64 * h;
    let mut hi = ((best_j + 1).min(GRID_POINTS - 1)) as f64 * h;

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > REFINE_WIDTH {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    let refined = 0.5 * (lo + hi);
    if f(refined) < best {
        refined
    } else {
        best_beta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng as _, SeedableRng};

    fn instance(seed: u64) -> (SparseOperator, Image, Image, Sinogram, LeaveOutSplit) {
        let mut rng = crate::Rng::seed_from_u64(seed);
        let (m, n) = (14, 6);
        let dense: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let op = SparseOperator::from_dense(m, n, &dense).unwrap();
        let c = Image::from_vec(2, 3, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let l = Image::from_vec(2, 3, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let y = Sinogram::from_vec(m, 1, (0..m).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let split = LeaveOutSplit::from_indices(m, vec![1, 4, 7, 9, 12]).unwrap();
        (op, c, l, y, split)
    }

    #[test]
    fn equal_candidates_give_zero() {
        let (op, c, _, y, split) = instance(3);
        assert_eq!(select_beta(&op, &c, &c, &y, &split).unwrap(), 0.0);
    }

    #[test]
    fn empty_split_rejected() {
        let (op, c, l, y, _) = instance(3);
        let split = LeaveOutSplit::none(op.rows());
        assert!(matches!(select_beta(&op, &c, &l, &y, &split), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn matches_quadratic_vertex() {
        for seed in 0..25 {
            let (op, c, l, y, split) = instance(seed);
            // r(beta) = a + beta b with a = T_s c - y_s, b = T_s (l - c)
            let dense = op.to_dense(1 << 20).unwrap();
            let n = op.cols();
            let (mut ab, mut bb) = (0.0, 0.0);
            for &i in split.held_out() {
                let row = &dense[i * n..(i + 1) * n];
                let tc: f64 = row.iter().zip(c.data()).map(|(a, b)| a * b).sum();
                let tl: f64 = row.iter().zip(l.data()).map(|(a, b)| a * b).sum();
                let a = tc - y.data()[i];
                let b = tl - tc;
                ab += a * b;
                bb += b * b;
            }
            let vertex = (-ab / bb).clamp(0.0, 1.0);
            let got = select_beta(&op, &c, &l, &y, &split).unwrap();
            assert!((got - vertex).abs() < 1e-3, "seed {seed}: {got} vs {vertex}");
        }
    }

    #[test]
    fn grid_tie_break_prefers_first_minimum() {
        // flat on [0, 0.5], rising afterwards
        let b = minimize(|x| if x <= 0.5 { 1.0 } else { 1.0 + x });
        assert_eq!(b, 0.0);
        let b = minimize(|x| (x - 1.0).abs());
        assert_eq!(b, 1.0);
    }
}
