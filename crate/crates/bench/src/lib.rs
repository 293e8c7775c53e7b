//! Fixtures shared by the benchmarks in `benches/`.

use bcrs_core::{CouplingParams, Mode};
use num_complex::Complex64;

/// Moderate couplings where every degree up to 8 has simple zeros.
pub fn couplings(mode: Mode) -> CouplingParams {
    CouplingParams::new(mode, 0.7, [0.4, 1.3, 0.9, 2.1]).expect("valid couplings")
}

/// A complex evaluation point off the real axis.
pub fn sample_point(mode: Mode) -> Complex64 {
    match mode {
        Mode::Trigonometric => Complex64::new(0.61, 0.2),
        Mode::Rational => Complex64::new(2.3, 0.4),
    }
}
