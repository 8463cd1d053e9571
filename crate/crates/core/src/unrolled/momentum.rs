use crate::types::Image;

/// Nesterov-style extrapolation state. The counter advances once per outer
/// step, so the first update never extrapolates.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    /// `t_{k-1}`; starts at 1.
    pub t: f64,
    /// The previous (un-extrapolated) layer input.
    pub x_prev: Image,
}

impl MomentumState {
    pub fn new(x0: Image) -> Self {
        MomentumState { t: 1.0, x_prev: x0 }
    }

    /// `(t_next, gamma)` for the next update.
    pub fn coefficients(&self) -> (f64, f64) {
        let t_next = (1.0 + (1.0 + 4.0 * self.t * self.t).sqrt()) / 2.0;
        (t_next, (self.t - 1.0) / t_next)
    }
}

/// Returns `x_new + gamma (x_new - x_prev)` and the advanced state.
pub fn momentum_update(state: MomentumState, x_new: &Image) -> (Image, MomentumState) {
    let (t_next, gamma) = state.coefficients();
    let out = if gamma == 0.0 {
        x_new.clone()
    } else {
        let data = x_new
            .data()
            .iter()
            .zip(state.x_prev.data())
            .map(|(a, b)| a + gamma * (a - b))
            .collect();
        Image::from_raw(x_new.rows(), x_new.cols(), data)
    };
    let next = MomentumState {
        t: t_next,
        x_prev: x_new.clone(),
    };
    (out, next)
}
