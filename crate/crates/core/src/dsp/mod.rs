//! Signal-processing primitives shared by every stage of the simulator.

mod filter;
mod frame;
mod rng;
mod rrc;
mod xcorr;

pub use filter::{convolve_same, fractional_delay, kaiser_sinc_taps, FRACTIONAL_DELAY_ORDER};
pub use frame::WaveformFrame;
pub use rng::{split_seed, SimRng, RNG_ALGORITHM};
pub use rrc::{rrc_design, RrcFilter};
pub use xcorr::{xcorr_peak, xcorr_peak_around, CorrelationPeak};
pub(crate) use xcorr::correlate_at;

pub use num_complex::Complex64;

/// Mean of |x|^2; zero for an empty slice.
pub fn mean_power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}

/// Sum of |x|^2.
pub fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}
