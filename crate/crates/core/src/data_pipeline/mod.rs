//! Phantoms, synthetic measurements, the transmission noise model and
//! leave-out splits.

pub mod io;
mod noise;
mod phantom;
mod split;

pub use noise::{add_poisson_noise, noise_level, synthesize_clean, CountSampling, NoiseModel};
pub use phantom::{bar_layout, make_phantom, PhantomKind};
pub use split::{held_out_count, make_leaveout_split, LeaveOutSplit};
