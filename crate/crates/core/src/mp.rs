//! Complex arithmetic on top of MPFR floats.
//!
//! The hypergeometric sums in this crate cancel catastrophically in double
//! precision, so the series and operator evaluations run here with a working
//! precision picked per call. Values enter as exact doubles and leave rounded
//! to the nearest double.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use rug::ops::Pow;
use rug::Float;

/// Smallest working precision handed out, in bits.
pub(crate) const MIN_PRECISION: u32 = 128;
/// Guard bits kept below the estimated cancellation depth.
pub(crate) const GUARD_BITS: f64 = 120.0;
const MAX_PRECISION: u32 = 1 << 16;

/// Working precision for a computation whose intermediate magnitudes reach
/// `2^log2_scale` relative to the result scale of one.
pub(crate) fn precision_for(log2_scale: f64) -> u32 {
    let extra = if log2_scale.is_finite() {
        log2_scale.max(0.0)
    } else {
        0.0
    };
    ((GUARD_BITS + extra).ceil() as u32).clamp(MIN_PRECISION, MAX_PRECISION)
}

pub(crate) fn real(prec: u32, v: f64) -> Float {
    Float::with_val(prec, v)
}

pub(crate) fn powi(x: &Float, n: usize) -> Float {
    Float::with_val(x.prec(), x.pow(n as u32))
}

#[derive(Clone, Debug)]
pub(crate) struct MpComplex {
    pub re: Float,
    pub im: Float,
}

impl MpComplex {
    pub fn new(prec: u32, re: f64, im: f64) -> Self {
        Self {
            re: Float::with_val(prec, re),
            im: Float::with_val(prec, im),
        }
    }

    pub fn from_c64(prec: u32, z: Complex64) -> Self {
        Self::new(prec, z.re, z.im)
    }

    pub fn from_real(re: Float) -> Self {
        let im = Float::new(re.prec());
        Self { re, im }
    }

    pub fn one(prec: u32) -> Self {
        Self::new(prec, 1.0, 0.0)
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn scale(&self, r: &Float) -> Self {
        let p = self.prec();
        Self {
            re: Float::with_val(p, &self.re * r),
            im: Float::with_val(p, &self.im * r),
        }
    }

    /// `1 - self`.
    pub fn one_minus(&self) -> Self {
        let p = self.prec();
        Self {
            re: Float::with_val(p, 1 - &self.re),
            im: Float::with_val(p, -&self.im),
        }
    }

    pub fn add_real(&self, r: &Float) -> Self {
        let p = self.prec();
        Self {
            re: Float::with_val(p, &self.re + r),
            im: self.im.clone(),
        }
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    pub fn is_negligible(&self, threshold: f64) -> bool {
        self.abs() < threshold
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn sin(&self) -> Self {
        // sin(a + ib) = sin a cosh b + i cos a sinh b
        let p = self.prec();
        let (s, c) = self.re.clone().sin_cos(Float::new(p));
        let (sh, ch) = self.im.clone().sinh_cosh(Float::new(p));
        Self {
            re: Float::with_val(p, &s * &ch),
            im: Float::with_val(p, &c * &sh),
        }
    }

    pub fn cos(&self) -> Self {
        // cos(a + ib) = cos a cosh b - i sin a sinh b
        let p = self.prec();
        let (s, c) = self.re.clone().sin_cos(Float::new(p));
        let (sh, ch) = self.im.clone().sinh_cosh(Float::new(p));
        Self {
            re: Float::with_val(p, &c * &ch),
            im: Float::with_val(p, -(s * sh)),
        }
    }

    /// `exp(2 i self)`.
    pub fn exp_2i(&self) -> Self {
        let p = self.prec();
        let modulus = Float::with_val(p, -2 * &self.im).exp();
        let (s, c) = Float::with_val(p, 2 * &self.re).sin_cos(Float::new(p));
        Self {
            re: Float::with_val(p, &modulus * &c),
            im: modulus * s,
        }
    }

    pub fn recip(&self) -> Self {
        let p = self.prec();
        let den =
            Float::with_val(p, self.re.square_ref()) + Float::with_val(p, self.im.square_ref());
        Self {
            re: Float::with_val(p, &self.re / &den),
            im: -Float::with_val(p, &self.im / &den),
        }
    }
}

impl<'a> Add<&'a MpComplex> for &'a MpComplex {
    type Output = MpComplex;
    fn add(self, o: &MpComplex) -> MpComplex {
        let p = self.prec();
        MpComplex {
            re: Float::with_val(p, &self.re + &o.re),
            im: Float::with_val(p, &self.im + &o.im),
        }
    }
}

impl<'a> Sub<&'a MpComplex> for &'a MpComplex {
    type Output = MpComplex;
    fn sub(self, o: &MpComplex) -> MpComplex {
        let p = self.prec();
        MpComplex {
            re: Float::with_val(p, &self.re - &o.re),
            im: Float::with_val(p, &self.im - &o.im),
        }
    }
}

impl<'a> Mul<&'a MpComplex> for &'a MpComplex {
    type Output = MpComplex;
    fn mul(self, o: &MpComplex) -> MpComplex {
        let p = self.prec();
        let ac = Float::with_val(p, &self.re * &o.re);
        let bd = Float::with_val(p, &self.im * &o.im);
        let ad = Float::with_val(p, &self.re * &o.im);
        let bc = Float::with_val(p, &self.im * &o.re);
        MpComplex {
            re: ac - bd,
            im: ad + bc,
        }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl<'a> Div<&'a MpComplex> for &'a MpComplex {
    type Output = MpComplex;
    fn div(self, o: &MpComplex) -> MpComplex {
        self * &o.recip()
    }
}

impl Neg for &MpComplex {
    type Output = MpComplex;
    fn neg(self) -> MpComplex {
        MpComplex {
            re: Float::with_val(self.prec(), -&self.re),
            im: Float::with_val(self.prec(), -&self.im),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_matches_double_precision() {
        let z = Complex64::new(0.3, -0.7);
        let m = MpComplex::from_c64(200, z);
        assert!((m.sin().to_c64() - z.sin()).norm() < 1e-15);
        assert!((m.cos().to_c64() - z.cos()).norm() < 1e-15);
        let e = (Complex64::new(0.0, 2.0) * z).exp();
        assert!((m.exp_2i().to_c64() - e).norm() < 1e-15);
    }

    #[test]
    fn division_inverts_multiplication() {
        let a = MpComplex::new(256, 1.5, -2.25);
        let b = MpComplex::new(256, -0.125, 3.0);
        let back = &(&a * &b) / &b;
        assert!((back.to_c64() - a.to_c64()).norm() < 1e-30);
    }

    #[test]
    fn precision_has_floor_and_grows_with_scale() {
        assert_eq!(precision_for(-5.0), MIN_PRECISION);
        assert_eq!(precision_for(f64::NAN), MIN_PRECISION);
        assert!(precision_for(400.0) >= 520);
    }
}
