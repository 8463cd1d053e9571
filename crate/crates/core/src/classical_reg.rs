//! Classical regularization operators and the classical/learned combinations.
//!
//! The iteration count of [`landweber`] plays the role of the regularization
//! parameter; [`tikhonov_solve`] is the variational counterpart with
//! `D(Tx, y) = ||Tx - y||^2` and `R(x) = ||x||^2`.

use crate::error::{Error, Result};
use crate::forward_model::SparseOperator;
use crate::linalg;
use crate::types::{Image, Sinogram};

/// Gradient-descent state for `1/2 ||Tx - y||^2` restricted to the fit rows.
#[derive(Debug, Clone)]
pub struct LandweberState<'a> {
    op: &'a SparseOperator,
    y: &'a [f64],
    fit_mask: Option<&'a [bool]>,
    tau: f64,
    x: Vec<f64>,
    steps_taken: usize,
    residual: Vec<f64>,
    gradient: Vec<f64>,
}

impl<'a> LandweberState<'a> {
    pub fn new(
        op: &'a SparseOperator,
        y: &'a Sinogram,
        x0: &Image,
        tau: f64,
        fit_mask: Option<&'a [bool]>,
    ) -> Result<Self> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::invalid(format!("step size must be finite and >= 0, got {tau}")));
        }
        if x0.len() != op.cols() || y.len() != op.rows() {
            return Err(Error::invalid(format!(
                "landweber: operator is {}x{}, got image of {} and data of {}",
                op.rows(),
                op.cols(),
                x0.len(),
                y.len()
            )));
        }
        if let Some(mask) = fit_mask {
            if mask.len() != op.rows() {
                return Err(Error::invalid(format!(
                    "fit mask has {} rows, operator has {}",
                    mask.len(),
                    op.rows()
                )));
            }
        }
        Ok(LandweberState {
            op,
            y: y.data(),
            fit_mask,
            tau,
            x: x0.data().to_vec(),
            steps_taken: 0,
            residual: vec![0.0; op.rows()],
            gradient: vec![0.0; op.cols()],
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn iterate(&self) -> &[f64] {
        &self.x
    }

    /// One step `x <- x - tau T^T M (T x - y)`, with `M` zeroing held-out rows.
    pub fn step(&mut self) -> Result<()> {
        self.op.apply_into(&self.x, &mut self.residual);
        for (r, y) in self.residual.iter_mut().zip(self.y) {
            *r -= y;
        }
        if let Some(mask) = self.fit_mask {
            for (r, &keep) in self.residual.iter_mut().zip(mask) {
                if !keep {
                    *r = 0.0;
                }
            }
        }
        self.op.adjoint_into(&self.residual, &mut self.gradient);
        linalg::axpy(-self.tau, &self.gradient, &mut self.x);
        self.steps_taken += 1;
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step: self.steps_taken,
                context: "non-finite Landweber iterate".into(),
            });
        }
        Ok(())
    }

    pub fn into_image(self, like: &Image) -> Image {
        Image::from_raw(like.rows(), like.cols(), self.x)
    }
}

/// `steps` Landweber iterations from `x0`.
///
/// Rows where `fit_mask` is `false` do not contribute to the gradient.
pub fn landweber(
    op: &SparseOperator,
    y_delta: &Sinogram,
    x0: &Image,
    steps: usize,
    tau: f64,
    fit_mask: Option<&[bool]>,
) -> Result<Image> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("landweber step size must be > 0, got {tau}")));
    }
    let mut state = LandweberState::new(op, y_delta, x0, tau, fit_mask)?;
    for _ in 0..steps {
        state.step()?;
    }
    Ok(state.into_image(x0))
}

/// Solves `(T^T T + alpha I) x = T^T y` by conjugate gradients on the normal
/// equations, to relative residual `1e-10` or `10 n` iterations.
pub fn tikhonov_solve(op: &SparseOperator, y_delta: &Sinogram, alpha: f64) -> Result<Image> {
    const TOL: f64 = 1e-10;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::invalid(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let rhs = op.apply_adjoint(y_delta)?;
    let (n1, n2) = (rhs.rows(), rhs.cols());
    let b = rhs.into_vec();
    let n = b.len();
    let b_norm = linalg::norm(&b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(Image::from_raw(n1, n2, x));
    }

    let mut tmp = vec![0.0; op.rows()];
    let mut normal = |v: &[f64], out: &mut [f64]| {
        op.apply_into(v, &mut tmp);
        op.adjoint_into(&tmp, out);
        linalg::axpy(alpha, v, out);
    };

    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = linalg::dot(&r, &r);
    let cap = 10 * n.max(1);
    for _ in 0..cap {
        if rr.sqrt() <= TOL * b_norm {
            return Ok(Image::from_raw(n1, n2, x));
        }
        normal(&p, &mut ap);
        let pap = linalg::dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let step = rr / pap;
        linalg::axpy(step, &p, &mut x);
        linalg::axpy(-step, &ap, &mut r);
        let rr_next = linalg::dot(&r, &r);
        let ratio = rr_next / rr;
        rr = rr_next;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + ratio * *pi;
        }
    }
    if rr.sqrt() <= TOL * b_norm {
        return Ok(Image::from_raw(n1, n2, x));
    }
    Err(Error::ConvergenceFailure {
        method: "normal-equation CG",
        iterations: cap,
        residual: rr.sqrt() / b_norm,
    })
}

/// `classical + beta * learned`, with `beta = +inf` selecting `learned` alone.
pub fn additive_learned_combination(classical: &Image, learned: &Image, beta: f64) -> Result<Image> {
    classical.check_same_shape(learned, "additive_learned_combination")?;
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::invalid(format!("beta must be in [0, inf], got {beta}")));
    }
    if beta == f64::INFINITY {
        return Ok(learned.clone());
    }
    let data = classical
        .data()
        .iter()
        .zip(learned.data())
        .map(|(c, l)| c + beta * l)
        .collect();
    Ok(Image::from_raw(classical.rows(), classical.cols(), data))
}

/// Weighted average `(1 - beta) classical + beta learned` for `beta in [0, 1]`.
/// The endpoints return the corresponding input unchanged.
pub fn convex_combination(classical: &Image, learned: &Image, beta: f64) -> Result<Image> {
    classical.check_same_shape(learned, "convex_combination")?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(format!("beta must be in [0, 1], got {beta}")));
    }
    Ok(convex_combination_unchecked(classical, learned, beta))
}

pub(crate) fn convex_combination_unchecked(classical: &Image, learned: &Image, beta: f64) -> Image {
    if beta == 0.0 {
        return classical.clone();
    }
    if beta == 1.0 {
        return learned.clone();
    }
    let data = classical
        .data()
        .iter()
        .zip(learned.data())
        .map(|(c, l)| (1.0 - beta) * c + beta * l)
        .collect();
    Image::from_raw(classical.rows(), classical.cols(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(v: &[f64]) -> Image {
        Image::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    fn sino(v: &[f64]) -> Sinogram {
        Sinogram::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn zero_data_zero_start_stays_zero() {
        let op = SparseOperator::identity(3);
        let x = landweber(&op, &sino(&[0.0; 3]), &img(&[0.0; 3]), 25, 0.5, None).unwrap();
        assert!(x.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_geometric_recursion() {
        let op = SparseOperator::identity(2);
        let y = sino(&[1.0, 2.0]);
        let x1 = landweber(&op, &y, &img(&[0.0, 0.0]), 1, 0.5, None).unwrap();
        assert_eq!(x1.data(), &[0.5, 1.0]);
        for k in 2..8 {
            let xk = landweber(&op, &y, &img(&[0.0, 0.0]), k, 0.5, None).unwrap();
            let f = 1.0 - 0.5f64.powi(k as i32);
            assert!((xk.data()[0] - f).abs() < 1e-15);
            assert!((xk.data()[1] - 2.0 * f).abs() < 1e-15);
        }
    }

    #[test]
    fn masked_rows_do_not_move_the_iterate() {
        let op = SparseOperator::identity(3);
        let y = sino(&[1.0, 5.0, 1.0]);
        let mask = [true, false, true];
        let x = landweber(&op, &y, &img(&[0.0; 3]), 4, 0.5, Some(&mask)).unwrap();
        assert_eq!(x.data()[1], 0.0);
        assert!(x.data()[0] > 0.0);
    }

    #[test]
    fn divergence_names_the_step() {
        let op = SparseOperator::diagonal(&[1e200]).unwrap();
        let err = landweber(&op, &sino(&[1.0]), &img(&[1.0]), 10, 1.0, None).unwrap_err();
        match err {
            Error::Divergence { step, .. } => assert!((1..=10).contains(&step)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn landweber_rejects_bad_arguments() {
        let op = SparseOperator::identity(2);
        assert!(landweber(&op, &sino(&[0.0; 2]), &img(&[0.0; 2]), 1, 0.0, None).is_err());
        assert!(landweber(&op, &sino(&[0.0; 3]), &img(&[0.0; 2]), 1, 0.5, None).is_err());
    }

    #[test]
    fn tikhonov_diagonal_closed_form() {
        let op = SparseOperator::diagonal(&[2.0, 1.0]).unwrap();
        let x = tikhonov_solve(&op, &sino(&[2.0, 1.0]), 1.0).unwrap();
        assert!((x.data()[0] - 0.8).abs() < 1e-12);
        assert!((x.data()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tikhonov_alpha_zero_identity() {
        let op = SparseOperator::identity(4);
        let y = sino(&[1.0, -2.0, 3.0, 0.5]);
        let x = tikhonov_solve(&op, &y, 0.0).unwrap();
        for (a, b) in x.data().iter().zip(y.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tikhonov_large_alpha_shrinks() {
        let op = crate::forward_model::build_parallel_radon(8, 8, 11, 6, 180.0).unwrap();
        let norm_sq = crate::forward_model::operator_norm_sq(&op, 200, 0);
        let y = op.apply(&Image::from_vec(8, 8, vec![1.0; 64]).unwrap()).unwrap();
        let alpha = 1e8 * norm_sq;
        let x = tikhonov_solve(&op, &y, alpha).unwrap();
        let bound = op.apply_adjoint(&y).unwrap().norm() / alpha;
        assert!(x.norm() <= bound * (1.0 + 1e-9));
    }

    #[test]
    fn combination_endpoints_and_errors() {
        let c = img(&[1.0, 2.0]);
        let l = img(&[5.0, -1.0]);
        assert_eq!(convex_combination(&c, &l, 0.0).unwrap(), c);
        assert_eq!(convex_combination(&c, &l, 1.0).unwrap(), l);
        assert!(convex_combination(&c, &l, 1.5).is_err());
        assert!(convex_combination(&c, &l, -0.1).is_err());
        let mid = convex_combination(&img(&[0.0, 0.0]), &img(&[0.0, 2.0]), 0.5).unwrap();
        assert_eq!(mid.data(), &[0.0, 1.0]);

        assert_eq!(additive_learned_combination(&c, &l, 0.0).unwrap(), c);
        assert_eq!(additive_learned_combination(&c, &l, f64::INFINITY).unwrap(), l);
        assert!(additive_learned_combination(&c, &l, -1.0).is_err());
        let full = additive_learned_combination(&img(&[0.0, 0.0]), &l, 1.0).unwrap();
        let half = additive_learned_combination(&img(&[0.0, 0.0]), &l, 0.5).unwrap();
        assert!((half.norm() - full.norm() / 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn convex_combination_is_affine_in_beta(
            pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..40),
            beta in 0.0f64..1.0,
        ) {
            let c = img(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let l = img(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            let r0 = convex_combination(&c, &l, 0.0).unwrap();
            let r1 = convex_combination(&c, &l, 1.0).unwrap();
            let rb = convex_combination(&c, &l, beta).unwrap();
            for i in 0..c.len() {
                let want = r0.data()[i] + beta * (r1.data()[i] - r0.data()[i]);
                let scale = 1.0 + c.data()[i].abs() + l.data()[i].abs();
                prop_assert!((rb.data()[i] - want).abs() <= 1e-12 * scale);
            }
        }
    }
}
