//! Desk-scale CT scenario shared by the integration suites.

#![allow(dead_code)]

use unrollreg::data_pipeline::{add_poisson_noise, make_leaveout_split, make_phantom, synthesize_clean, LeaveOutSplit, NoiseModel, PhantomKind};
use unrollreg::forward_model::{build_parallel_radon, operator_norm_sq};
use unrollreg::{Image, Sinogram, SparseOperator};

pub const N: usize = 64;
pub const RAYS: usize = 91;
pub const VIEWS: usize = 60;
pub const I0: f64 = 1e6;
pub const LEAVEOUT: f64 = 0.01;

pub struct Ct {
    pub op: SparseOperator,
    pub truth: Image,
    pub clean: Sinogram,
    pub tau: f64,
}

impl Ct {
    pub fn new() -> Self {
        let op = build_parallel_radon(N, N, RAYS, VIEWS, 180.0).unwrap();
        let truth = make_phantom(PhantomKind::SheppLogan, N, N, 0).unwrap();
        let clean = synthesize_clean(&op, &truth).unwrap();
        let tau = 1.0 / operator_norm_sq(&op, 100, 0);
        Ct { op, truth, clean, tau }
    }

    pub fn noisy(&self, i0: f64, seed: u64) -> Sinogram {
        add_poisson_noise(&self.clean, &NoiseModel::poisson(i0, seed)).unwrap()
    }

    pub fn split(&self, seed: u64) -> LeaveOutSplit {
        make_leaveout_split(self.op.rows(), LEAVEOUT, seed).unwrap()
    }
}
