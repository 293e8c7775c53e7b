//! q-shifted factorials, Pochhammer symbols and terminating hypergeometric
//! series.
//!
//! The terminating sums are accumulated with the running ratio of consecutive
//! terms. Because the terms of the Askey-Wilson and Wilson sums grow far beyond
//! the size of the result, the summation itself is carried out in
//! multiprecision (see [`crate::mp`]) and only rounded to a double at the end.

use num_complex::Complex64;
use rug::Float;

use crate::error::{Error, Result};
use crate::mp::{self, MpComplex};

/// Factors whose magnitude falls below this are treated as exact zeros of a
/// denominator.
pub const DENOMINATOR_GUARD: f64 = 1e-300;

/// Default truncation tolerance for infinite products.
pub const DEFAULT_PRODUCT_TOL: f64 = 1e-16;

/// The q-shifted factorial `(a; q)_k`.
pub fn qpochhammer(a: Complex64, q: f64, k: usize) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    let mut qj = 1.0;
    for _ in 0..k {
        acc *= Complex64::new(1.0, 0.0) - a * qj;
        qj *= q;
    }
    acc
}

/// The infinite product `(a; q)_∞`, truncated at the first `K` with
/// `|a| q^K < tol`.
pub fn qpochhammer_inf(a: Complex64, q: f64, tol: f64) -> Result<Complex64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "infinite q-product needs 0 < q < 1, got q = {q}"
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Domain(format!(
            "truncation tolerance must be positive, got {tol}"
        )));
    }
    let mut acc = Complex64::new(1.0, 0.0);
    let mut term = a;
    loop {
        acc *= Complex64::new(1.0, 0.0) - term;
        if term.norm() < tol {
            return Ok(acc);
        }
        term *= q;
    }
}

/// The rising factorial `(a)_k = a (a+1) ... (a+k-1)`.
pub fn pochhammer(a: Complex64, k: usize) -> Complex64 {
    (0..k).fold(Complex64::new(1.0, 0.0), |acc, j| acc * (a + j as f64))
}

/// Which family of terminating series to sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesBasis {
    /// Basic hypergeometric `r+1Φr` with base `q`; the terminating upper
    /// parameter is `q^{-n}`.
    Basic { q: f64 },
    /// Ordinary hypergeometric `r+1Fr`; the terminating upper parameter is `-n`.
    Ordinary,
}

/// A terminating `r+1Φr` or `r+1Fr` series.
///
/// The terminating upper parameter (`q^{-n}` or `-n`) is synthesized from
/// `degree`; `upper` holds the remaining `r` numerator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminatingSeries {
    pub degree: usize,
    pub upper: Vec<Complex64>,
    pub lower: Vec<Complex64>,
    pub argument: Complex64,
    pub basis: SeriesBasis,
}

impl TerminatingSeries {
    fn validate(&self) -> Result<()> {
        if self.upper.len() != self.lower.len() {
            return Err(Error::InvalidParameter(format!(
                "expected as many lower as free upper parameters, got {} and {}",
                self.lower.len(),
                self.upper.len()
            )));
        }
        if let SeriesBasis::Basic { q } = self.basis {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::Domain(format!(
                    "series base must satisfy 0 < q < 1, got {q}"
                )));
            }
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !(self.upper.iter().all(finite)
            && self.lower.iter().all(finite)
            && finite(&self.argument))
        {
            return Err(Error::InvalidParameter(
                "series parameters must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Sum a terminating series. All inputs are taken as exact.
pub fn terminating_series(spec: &TerminatingSeries) -> Result<Complex64> {
    spec.validate()?;
    if spec.degree == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let log2_scale = log2_max_term(
        spec.degree,
        &spec.upper,
        &spec.lower,
        spec.argument,
        spec.basis,
    );
    let prec = mp::precision_for(log2_scale);
    let upper: Vec<_> = spec
        .upper
        .iter()
        .map(|&u| MpComplex::from_c64(prec, u))
        .collect();
    let lower: Vec<_> = spec
        .lower
        .iter()
        .map(|&b| MpComplex::from_c64(prec, b))
        .collect();
    let z = MpComplex::from_c64(prec, spec.argument);
    let sum = match spec.basis {
        SeriesBasis::Basic { q } => {
            let q = mp::real(prec, q);
            sum_terminating(spec.degree, &upper, &lower, &z, MpBasis::Basic(&q))?
        }
        SeriesBasis::Ordinary => {
            sum_terminating(spec.degree, &upper, &lower, &z, MpBasis::Ordinary)?
        }
    };
    Ok(sum.to_c64())
}

pub(crate) enum MpBasis<'a> {
    Basic(&'a Float),
    Ordinary,
}

/// Multiprecision core of [`terminating_series`]. Works at the precision of
/// `z`.
pub(crate) fn sum_terminating(
    n: usize,
    upper: &[MpComplex],
    lower: &[MpComplex],
    z: &MpComplex,
    basis: MpBasis<'_>,
) -> Result<MpComplex> {
    let prec = z.prec();
    let one = MpComplex::one(prec);
    let mut term = one.clone();
    let mut sum = one;
    match basis {
        MpBasis::Basic(q) => {
            let q_neg_n = mp::powi(q, n).recip();
            let mut qk = mp::real(prec, 1.0);
            for k in 0..n {
                let mut num = MpComplex::from_real(Float::with_val(
                    prec,
                    1 - Float::with_val(prec, &q_neg_n * &qk),
                ));
                for u in upper {
                    num = &num * &u.scale(&qk).one_minus();
                }
                let mut den =
                    MpComplex::from_real(Float::with_val(prec, 1 - Float::with_val(prec, q * &qk)));
                for (j, b) in lower.iter().enumerate() {
                    let f = b.scale(&qk).one_minus();
                    if f.is_negligible(DENOMINATOR_GUARD) {
                        return Err(Error::DenominatorVanishes {
                            parameter: j,
                            order: k + 1,
                        });
                    }
                    den = &den * &f;
                }
                term = &(&(&term * &num) / &den) * z;
                sum = &sum + &term;
                qk *= q;
            }
        }
        MpBasis::Ordinary => {
            for k in 0..n {
                let kf = mp::real(prec, k as f64);
                let mut num = MpComplex::new(prec, k as f64 - n as f64, 0.0);
                for u in upper {
                    num = &num * &u.add_real(&kf);
                }
                let mut den = MpComplex::new(prec, (k + 1) as f64, 0.0);
                for (j, b) in lower.iter().enumerate() {
                    let f = b.add_real(&kf);
                    if f.is_negligible(DENOMINATOR_GUARD) {
                        return Err(Error::DenominatorVanishes {
                            parameter: j,
                            order: k + 1,
                        });
                    }
                    den = &den * &f;
                }
                term = &(&(&term * &num) / &den) * z;
                sum = &sum + &term;
            }
        }
    }
    Ok(sum)
}

/// `log2` of the largest term magnitude of a terminating series, estimated in
/// double precision through log-magnitudes so that nothing overflows.
pub(crate) fn log2_max_term(
    n: usize,
    upper: &[Complex64],
    lower: &[Complex64],
    z: Complex64,
    basis: SeriesBasis,
) -> f64 {
    let one = Complex64::new(1.0, 0.0);
    let ln_z = z.norm().ln();
    let mut ln_term = 0.0_f64;
    let mut best = 0.0_f64;
    for k in 0..n {
        let mut delta = ln_z;
        match basis {
            SeriesBasis::Basic { q } => {
                let ln_q = q.ln();
                let ln_big = (k as f64 - n as f64) * ln_q;
                delta += if ln_big > 40.0 {
                    ln_big
                } else {
                    (1.0 - ln_big.exp()).abs().ln()
                };
                let qk = q.powi(k as i32);
                for u in upper {
                    delta += (one - u * qk).norm().ln();
                }
                delta -= (1.0 - q * qk).ln();
                for b in lower {
                    delta -= (one - b * qk).norm().ln();
                }
            }
            SeriesBasis::Ordinary => {
                let kf = k as f64;
                delta += (n as f64 - kf).ln();
                for u in upper {
                    delta += (u + kf).norm().ln();
                }
                delta -= (kf + 1.0).ln();
                for b in lower {
                    delta -= (b + kf).norm().ln();
                }
            }
        }
        ln_term += delta;
        if ln_term.is_finite() {
            best = best.max(ln_term);
        } else if ln_term == f64::NEG_INFINITY {
            break;
        }
    }
    best / std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn qpochhammer_examples() {
        assert_eq!(qpochhammer(c(123.0), 0.7, 0), c(1.0));
        assert_relative_eq!(qpochhammer(c(0.5), 0.25, 2).re, 0.4375, epsilon = 1e-15);
        assert_eq!(qpochhammer(c(4.0), 0.5, 3), c(0.0));
    }

    #[test]
    fn qpochhammer_inf_examples() {
        assert_eq!(qpochhammer_inf(c(0.0), 0.5, 1e-16).unwrap(), c(1.0));
        assert_eq!(qpochhammer_inf(c(1.0), 0.5, 1e-16).unwrap(), c(0.0));
        // Euler function at q = 1/2, reference product taken to 200 factors.
        let reference: f64 = (0..200).map(|k| 1.0 - 0.5f64.powi(k + 1)).product();
        let v = qpochhammer_inf(c(0.5), 0.5, 1e-16).unwrap();
        assert_relative_eq!(v.re, reference, max_relative = 1e-15);
        assert_relative_eq!(v.re, 0.288_788_095_086_602_4, max_relative = 1e-15);
    }

    #[test]
    fn qpochhammer_inf_rejects_bad_base() {
        assert!(matches!(
            qpochhammer_inf(c(0.3), 1.0, 1e-16),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            qpochhammer_inf(c(0.3), -0.2, 1e-16),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn pochhammer_examples() {
        assert_eq!(pochhammer(c(7.5), 0), c(1.0));
        assert_eq!(pochhammer(c(3.0), 3), c(60.0));
        assert_eq!(pochhammer(c(-2.0), 3), c(0.0));
    }

    #[test]
    fn degree_zero_series_is_one() {
        let s = TerminatingSeries {
            degree: 0,
            upper: vec![c(0.2), c(0.3), c(0.4)],
            lower: vec![c(0.5), c(0.6), c(0.7)],
            argument: c(0.9),
            basis: SeriesBasis::Basic { q: 0.3 },
        };
        assert_eq!(terminating_series(&s).unwrap(), c(1.0));
    }

    #[test]
    fn two_term_basic_series_matches_hand_expansion() {
        let q = 0.37;
        let a = [c(0.21), Complex64::new(0.4, 0.3), Complex64::new(0.4, -0.3)];
        let b = [c(0.15), c(-0.6), c(0.72)];
        let s = TerminatingSeries {
            degree: 1,
            upper: a.to_vec(),
            lower: b.to_vec(),
            argument: c(q),
            basis: SeriesBasis::Basic { q },
        };
        let one = c(1.0);
        let num = (one - 1.0 / q) * (one - a[0]) * (one - a[1]) * (one - a[2]);
        let den = (1.0 - q) * (one - b[0]) * (one - b[1]) * (one - b[2]);
        let expected = one + num / den * q;
        let got = terminating_series(&s).unwrap();
        assert!((got - expected).norm() < 1e-14 * expected.norm());
    }

    #[test]
    fn vanishing_denominator_is_reported() {
        let s = TerminatingSeries {
            degree: 2,
            upper: vec![c(0.2), c(0.3), c(0.4)],
            lower: vec![c(1.0), c(0.6), c(0.7)],
            argument: c(0.5),
            basis: SeriesBasis::Basic { q: 0.5 },
        };
        assert_eq!(
            terminating_series(&s),
            Err(Error::DenominatorVanishes {
                parameter: 0,
                order: 1
            })
        );
        let s = TerminatingSeries {
            degree: 3,
            upper: vec![c(0.2)],
            lower: vec![c(-1.0)],
            argument: c(1.0),
            basis: SeriesBasis::Ordinary,
        };
        assert_eq!(
            terminating_series(&s),
            Err(Error::DenominatorVanishes {
                parameter: 0,
                order: 2
            })
        );
    }

    #[test]
    fn mismatched_parameter_lists_are_rejected() {
        let s = TerminatingSeries {
            degree: 2,
            upper: vec![c(0.2), c(0.3)],
            lower: vec![c(0.6)],
            argument: c(1.0),
            basis: SeriesBasis::Ordinary,
        };
        assert!(matches!(
            terminating_series(&s),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn ordinary_series_matches_direct_pochhammer_sum() {
        // 3F2(-4, 1.5, 2.25; 0.75, 3.5; 0.4) summed term by term from factorials.
        let (n, a, b) = (4usize, [1.5, 2.25], [0.75, 3.5]);
        let z: f64 = 0.4;
        let mut expected = 0.0;
        let mut fact = 1.0;
        for k in 0..=n {
            if k > 0 {
                fact *= k as f64;
            }
            let num =
                pochhammer(c(-(n as f64)), k) * pochhammer(c(a[0]), k) * pochhammer(c(a[1]), k);
            let den = pochhammer(c(b[0]), k) * pochhammer(c(b[1]), k) * fact;
            expected += (num / den).re * z.powi(k as i32);
        }
        let s = TerminatingSeries {
            degree: n,
            upper: a.iter().map(|&v| c(v)).collect(),
            lower: b.iter().map(|&v| c(v)).collect(),
            argument: c(z),
            basis: SeriesBasis::Ordinary,
        };
        assert_relative_eq!(
            terminating_series(&s).unwrap().re,
            expected,
            max_relative = 1e-14
        );
    }

    /// Basic 4Φ3 with q = e^{-ε}, a_i = q^{α_i}, b_i = q^{β_i}, z = q against
    /// the ordinary 4F3 at unit argument.
    fn q_to_one_deviation(eps: f64) -> f64 {
        let n = 3;
        let alpha = [0.7, 1.3, 2.1];
        let beta = [1.1, 1.9, 2.6];
        let q = (-eps).exp();
        let basic = TerminatingSeries {
            degree: n,
            upper: alpha.iter().map(|&a| c(q.powf(a))).collect(),
            lower: beta.iter().map(|&b| c(q.powf(b))).collect(),
            argument: c(q),
            basis: SeriesBasis::Basic { q },
        };
        let ordinary = TerminatingSeries {
            degree: n,
            upper: alpha.iter().map(|&a| c(a)).collect(),
            lower: beta.iter().map(|&b| c(b)).collect(),
            argument: c(1.0),
            basis: SeriesBasis::Ordinary,
        };
        let lhs = terminating_series(&basic).unwrap();
        let rhs = terminating_series(&ordinary).unwrap();
        (lhs - rhs).norm() / rhs.norm()
    }

    #[test]
    fn basic_series_degenerates_to_ordinary_as_q_tends_to_one() {
        let d3 = q_to_one_deviation(1e-3);
        let d4 = q_to_one_deviation(1e-4);
        assert!(d3 < 1e-2, "deviation at 1e-3: {d3}");
        // first order in ε: a tenfold smaller ε shrinks the gap about tenfold
        let ratio = d3 / d4;
        assert!((5.0..20.0).contains(&ratio), "shrink ratio {ratio}");
    }

    proptest! {
        #[test]
        fn qpochhammer_recurrence(re in -3.0..3.0f64, im in -3.0..3.0f64, q in -0.99..0.99f64, k in 0usize..25) {
            let a = Complex64::new(re, im);
            let lhs = qpochhammer(a, q, k + 1);
            let rhs = qpochhammer(a, q, k) * (Complex64::new(1.0, 0.0) - a * q.powi(k as i32));
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
        }

        #[test]
        fn q_negative_power_terminates(n in 0usize..=10, k in 0usize..=10, q in 0.1..0.9f64) {
            let v = qpochhammer(c(q.powi(-(n as i32))), q, k);
            if k > n {
                prop_assert!(v.norm() <= 1e-12 * q.powi(-((n * n) as i32)));
            } else {
                prop_assert!(v.norm() > 0.0);
            }
        }

        #[test]
        fn degree_zero_is_one_for_random_parameters(
            params in proptest::collection::vec(-5.0..5.0f64, 7),
            q in 0.05..0.95f64,
        ) {
            let s = TerminatingSeries {
                degree: 0,
                upper: params[..3].iter().map(|&v| c(v)).collect(),
                lower: params[3..6].iter().map(|&v| c(v)).collect(),
                argument: c(params[6]),
                basis: SeriesBasis::Basic { q },
            };
            prop_assert_eq!(terminating_series(&s).unwrap(), c(1.0));
        }
    }
}
