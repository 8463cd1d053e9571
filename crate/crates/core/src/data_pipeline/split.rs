use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::Rng;

/// Held-out data rows used by the cross-validation criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaveOutSplit {
    total: usize,
    held_out: Vec<usize>,
    fraction: f64,
}

impl LeaveOutSplit {
    /// A split that holds nothing out.
    pub fn none(total: usize) -> Self {
        LeaveOutSplit {
            total,
            held_out: Vec::new(),
            fraction: 0.0,
        }
    }

    pub fn from_indices(total: usize, mut held_out: Vec<usize>) -> Result<Self> {
        held_out.sort_unstable();
        held_out.dedup();
        if held_out.last().is_some_and(|&i| i >= total) {
            return Err(Error::invalid(format!("held-out index out of range (total = {total})")));
        }
        let fraction = if total == 0 { 0.0 } else { held_out.len() as f64 / total as f64 };
        Ok(LeaveOutSplit {
            total,
            held_out,
            fraction,
        })
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn held_out(&self) -> &[usize] {
        &self.held_out
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn is_empty(&self) -> bool {
        self.held_out.is_empty()
    }

    /// `true` for rows that take part in data-consistency steps.
    pub fn fit_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.total];
        for &i in &self.held_out {
            mask[i] = false;
        }
        mask
    }
}

/// Number of held-out rows: `fraction * m` rounded half-up.
pub fn held_out_count(m: usize, fraction: f64) -> usize {
    (fraction * m as f64 + 0.5).floor() as usize
}

/// Samples `round(fraction * m)` distinct rows uniformly without replacement.
pub fn make_leaveout_split(m: usize, fraction: f64, seed: u64) -> Result<LeaveOutSplit> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::invalid(format!("leave-out fraction must be in [0, 1), got {fraction}")));
    }
    let k = held_out_count(m, fraction).min(m);
    let mut rng = Rng::seed_from_u64(seed);
    let mut held_out = rand::seq::index::sample(&mut rng, m, k).into_vec();
    held_out.sort_unstable();
    Ok(LeaveOutSplit {
        total: m,
        held_out,
        fraction,
    })
}
