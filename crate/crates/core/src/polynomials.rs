//! Askey-Wilson and Wilson polynomials attached to the BC-type
//! Ruijsenaars-Schneider couplings.
//!
//! Both families are normalized to be monic: the coefficient of `cos(2nx)` is
//! one in the trigonometric case and the coefficient of `x^{2n}` is one in the
//! rational case. Series evaluation goes through [`crate::qseries`] in
//! multiprecision; the factored forms and the Gram-Schmidt construction are
//! independent double-precision routes used to cross-check it.

use std::f64::consts::{FRAC_PI_2, LN_2};
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp::{self, MpComplex};
use crate::qseries::{self, MpBasis, SeriesBasis};
use crate::roots::Configuration;

/// Which degeneration of the model is in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Trigonometric potentials; positions live in `(0, π/2)`.
    Trigonometric,
    /// Rational potentials; positions live in `(0, ∞)`.
    Rational,
}

impl Mode {
    /// Upper wall of the chamber.
    pub fn chamber_end(self) -> f64 {
        match self {
            Mode::Trigonometric => FRAC_PI_2,
            Mode::Rational => f64::INFINITY,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Trigonometric => "trigonometric",
            Mode::Rational => "rational",
        })
    }
}

/// One of the five couplings, used to address a coupling by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    G,
    G1,
    G2,
    G3,
    G4,
}

impl Coupling {
    pub const ALL: [Coupling; 5] = [
        Coupling::G,
        Coupling::G1,
        Coupling::G2,
        Coupling::G3,
        Coupling::G4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Coupling::G => "g",
            Coupling::G1 => "g1",
            Coupling::G2 => "g2",
            Coupling::G3 => "g3",
            Coupling::G4 => "g4",
        }
    }
}

/// Positive interaction coupling `g` and external couplings `g1..g4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingParams {
    mode: Mode,
    g: f64,
    g1: f64,
    g2: f64,
    g3: f64,
    g4: f64,
}

impl CouplingParams {
    /// Rejects any coupling that is not a positive finite number.
    pub fn new(mode: Mode, g: f64, gr: [f64; 4]) -> Result<Self> {
        let values = [g, gr[0], gr[1], gr[2], gr[3]];
        for (coupling, value) in Coupling::ALL.iter().zip(values) {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidCoupling {
                    name: coupling.name(),
                    value,
                });
            }
        }
        Ok(Self {
            mode,
            g,
            g1: gr[0],
            g2: gr[1],
            g3: gr[2],
            g4: gr[3],
        })
    }

    pub fn trigonometric(g: f64, gr: [f64; 4]) -> Result<Self> {
        Self::new(Mode::Trigonometric, g, gr)
    }

    pub fn rational(g: f64, gr: [f64; 4]) -> Result<Self> {
        Self::new(Mode::Rational, g, gr)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn gr(&self) -> [f64; 4] {
        [self.g1, self.g2, self.g3, self.g4]
    }

    pub fn get(&self, coupling: Coupling) -> f64 {
        match coupling {
            Coupling::G => self.g,
            Coupling::G1 => self.g1,
            Coupling::G2 => self.g2,
            Coupling::G3 => self.g3,
            Coupling::G4 => self.g4,
        }
    }

    /// Copy with one coupling replaced.
    pub fn with(&self, coupling: Coupling, value: f64) -> Result<Self> {
        let mut gr = self.gr();
        let mut g = self.g;
        match coupling {
            Coupling::G => g = value,
            Coupling::G1 => gr[0] = value,
            Coupling::G2 => gr[1] = value,
            Coupling::G3 => gr[2] = value,
            Coupling::G4 => gr[3] = value,
        }
        Self::new(self.mode, g, gr)
    }

    /// `ĝ = g1 + g2 + g3 + g4 - g`.
    pub fn ghat(&self) -> f64 {
        self.g1 + self.g2 + self.g3 + self.g4 - self.g
    }

    pub(crate) fn expect(&self, mode: Mode) -> Result<()> {
        if self.mode == mode {
            Ok(())
        } else {
            Err(Error::ModeMismatch {
                expected: mode,
                found: self.mode,
            })
        }
    }
}

/// Askey-Wilson parameters `(q, a, b, c, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AWParams {
    q: f64,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl AWParams {
    /// Requires `0 < q < 1` and `0 < |a|,|b|,|c|,|d| < 1`.
    pub fn new(q: f64, a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < q < 1, got q = {q}"
            )));
        }
        for (name, v) in [("a", a), ("b", b), ("c", c), ("d", d)] {
            if !(v.abs() > 0.0 && v.abs() < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "need 0 < |{name}| < 1, got {v}"
                )));
            }
        }
        Ok(Self { q, a, b, c, d })
    }

    /// `q = e^{-2g}`, `a = e^{-2g1}`, `b = -e^{-2g2}`, `c = e^{-2g3}`, `d = -e^{-2g4}`.
    pub fn from_couplings(c: &CouplingParams) -> Result<Self> {
        c.expect(Mode::Trigonometric)?;
        let [g1, g2, g3, g4] = c.gr();
        Self::new(
            (-2.0 * c.g).exp(),
            (-2.0 * g1).exp(),
            -(-2.0 * g2).exp(),
            (-2.0 * g3).exp(),
            -(-2.0 * g4).exp(),
        )
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn abcd(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Same polynomial family with the four parameters permuted.
    pub fn permuted(&self, order: [usize; 4]) -> Self {
        let v = self.abcd();
        Self {
            q: self.q,
            a: v[order[0]],
            b: v[order[1]],
            c: v[order[2]],
            d: v[order[3]],
        }
    }
}

/// Convenience wrapper for [`AWParams::from_couplings`].
pub fn aw_params_from_couplings(c: &CouplingParams) -> Result<AWParams> {
    AWParams::from_couplings(c)
}

/// Wilson parameters `(a, b, c, d)`, all positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WilsonParams {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl WilsonParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("c", c), ("d", d)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "Wilson parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(Self { a, b, c, d })
    }

    /// Rescaled parameters `g_r / g`.
    pub fn from_couplings(c: &CouplingParams) -> Result<Self> {
        c.expect(Mode::Rational)?;
        let [g1, g2, g3, g4] = c.gr();
        Self::new(g1 / c.g, g2 / c.g, g3 / c.g, g4 / c.g)
    }

    pub fn abcd(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }
}

/// How a polynomial value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalRoute {
    Series,
    Factored,
    OrthogonalizationOracle,
}

/// A polynomial value tagged with its degree and evaluation route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolyEval {
    pub degree: usize,
    pub x: Complex64,
    pub value: Complex64,
    pub route: EvalRoute,
}

// ---------------------------------------------------------------------------
// Askey-Wilson series

struct AwMp {
    q: Float,
    a: Float,
    b: Float,
    c: Float,
    d: Float,
}

impl AwMp {
    fn from_params(p: &AWParams, prec: u32) -> Self {
        Self {
            q: mp::real(prec, p.q),
            a: mp::real(prec, p.a),
            b: mp::real(prec, p.b),
            c: mp::real(prec, p.c),
            d: mp::real(prec, p.d),
        }
    }

    fn from_couplings(cp: &CouplingParams, prec: u32) -> Self {
        let e =
            |g: f64, sign: i32| Float::with_val(prec, Float::with_val(prec, -2.0 * g).exp() * sign);
        let [g1, g2, g3, g4] = cp.gr();
        Self {
            q: e(cp.g, 1),
            a: e(g1, 1),
            b: e(g2, -1),
            c: e(g3, 1),
            d: e(g4, -1),
        }
    }
}

fn ln_qpoch_abs(v: f64, q: f64, n: usize) -> f64 {
    let mut qj = 1.0;
    let mut acc = 0.0;
    for _ in 0..n {
        acc += (1.0 - v * qj).abs().ln();
        qj *= q;
    }
    acc
}

/// `log2` of the largest intermediate magnitude in the series for `p_n(x)`.
fn aw_log2_scale(p: &AWParams, n: usize, x: Complex64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let AWParams { q, a, b, c, d } = *p;
    let e = (Complex64::i() * 2.0 * x).exp();
    let top = a * b * c * d * q.powi(n as i32 - 1);
    let upper = [Complex64::new(top, 0.0), e * a, a / e];
    let lower = [a * b, a * c, a * d].map(|v| Complex64::new(v, 0.0));
    let series = qseries::log2_max_term(
        n,
        &upper,
        &lower,
        Complex64::new(q, 0.0),
        SeriesBasis::Basic { q },
    );
    let pre = ln_qpoch_abs(a * b, q, n) + ln_qpoch_abs(a * c, q, n) + ln_qpoch_abs(a * d, q, n)
        - LN_2
        - n as f64 * a.abs().ln()
        - ln_qpoch_abs(top, q, n);
    series + pre / LN_2
}

fn mp_qpoch(v: &Float, q: &Float, n: usize) -> Float {
    let prec = v.prec();
    let mut acc = mp::real(prec, 1.0);
    let mut qj = mp::real(prec, 1.0);
    for _ in 0..n {
        acc *= Float::with_val(prec, 1 - Float::with_val(prec, v * &qj));
        qj *= q;
    }
    acc
}

fn aw_eval_mp(p: &AwMp, n: usize, x: &MpComplex) -> Result<MpComplex> {
    let prec = x.prec();
    if n == 0 {
        return Ok(MpComplex::one(prec));
    }
    let ab = Float::with_val(prec, &p.a * &p.b);
    let ac = Float::with_val(prec, &p.a * &p.c);
    let ad = Float::with_val(prec, &p.a * &p.d);
    let top = Float::with_val(prec, &ab * &p.c) * &p.d * mp::powi(&p.q, n - 1);
    let e = x.exp_2i();
    let upper = [
        MpComplex::from_real(top.clone()),
        e.scale(&p.a),
        e.recip().scale(&p.a),
    ];
    let lower = [ab.clone(), ac.clone(), ad.clone()].map(MpComplex::from_real);
    let z = MpComplex::from_real(p.q.clone());
    let sum = qseries::sum_terminating(n, &upper, &lower, &z, MpBasis::Basic(&p.q))?;

    let den = Float::with_val(prec, 2 * mp::powi(&p.a, n)) * mp_qpoch(&top, &p.q, n);
    if den.is_zero() || den.clone().abs() < qseries::DENOMINATOR_GUARD {
        return Err(Error::DegenerateParameters(format!(
            "Askey-Wilson prefactor denominator vanishes at degree {n}"
        )));
    }
    let pre = mp_qpoch(&ab, &p.q, n) * mp_qpoch(&ac, &p.q, n) * mp_qpoch(&ad, &p.q, n) / den;
    Ok(sum.scale(&pre))
}

/// Monic Askey-Wilson polynomial `p_n(x)` from its basic hypergeometric
/// representation. Valid for complex `x`.
pub fn aw_eval(p: &AWParams, n: usize, x: Complex64) -> Result<Complex64> {
    let prec = mp::precision_for(aw_log2_scale(p, n, x));
    let params = AwMp::from_params(p, prec);
    Ok(aw_eval_mp(&params, n, &MpComplex::from_c64(prec, x))?.to_c64())
}

/// `2^{2n-1} ∏_k sin(x_k + x) sin(x_k - x)`.
pub fn aw_eval_factored(zeros: &Configuration, x: Complex64) -> Complex64 {
    let n = zeros.len() as i32;
    zeros
        .positions()
        .iter()
        .fold(Complex64::new(2f64.powi(2 * n - 1), 0.0), |acc, &xk| {
            acc * (x + xk).sin() * (-x + xk).sin()
        })
}

// ---------------------------------------------------------------------------
// Weight and Gram-Schmidt oracle

/// Askey-Wilson weight `Δ(x) = 1 / (c(x) c(-x))` on the open interval
/// `(0, π/2)`.
pub fn aw_weight(p: &AWParams, x: f64, tol: f64) -> Result<f64> {
    if !(x > 0.0 && x < FRAC_PI_2) {
        return Err(Error::Domain(format!(
            "weight is evaluated on (0, π/2) only, got x = {x}"
        )));
    }
    let e2 = Complex64::from_polar(1.0, 2.0 * x);
    let num = qseries::qpochhammer_inf(e2 * e2, p.q, tol)?.norm_sqr();
    let mut den = 1.0;
    for v in p.abcd() {
        den *= qseries::qpochhammer_inf(e2 * v, p.q, tol)?.norm_sqr();
    }
    Ok(num / den)
}

/// `Σ_k coeffs[k] cos(2kx)`.
pub fn cosine_series_eval(coeffs: &[f64], x: Complex64) -> Complex64 {
    coeffs
        .iter()
        .enumerate()
        .fold(Complex64::new(0.0, 0.0), |acc, (k, &ck)| {
            acc + (x * (2.0 * k as f64)).cos() * ck
        })
}

/// Monic orthogonal polynomials `p_0..p_n` built by Gram-Schmidt on
/// `1, cos 2x, ..., cos 2nx` with the weighted inner product on `(0, π/2)`,
/// integrated by the composite midpoint rule.
///
/// Entry `k` of the result holds the cosine coefficients of `p_k`, lowest
/// first, with a leading coefficient of one.
pub fn gram_schmidt_oracle(p: &AWParams, n: usize, quad_points: usize) -> Result<Vec<Vec<f64>>> {
    if n > 4 {
        return Err(Error::InvalidParameter(format!(
            "oracle supports degree <= 4, got {n}"
        )));
    }
    if quad_points < 256 {
        return Err(Error::InvalidParameter(format!(
            "need at least 256 quadrature points, got {quad_points}"
        )));
    }
    let h = FRAC_PI_2 / quad_points as f64;
    let nodes: Vec<f64> = (0..quad_points).map(|i| (i as f64 + 0.5) * h).collect();
    let weights = nodes
        .iter()
        .map(|&x| aw_weight(p, x, qseries::DEFAULT_PRODUCT_TOL).map(|w| w * h))
        .collect::<Result<Vec<_>>>()?;
    let basis: Vec<Vec<f64>> = (0..=n)
        .map(|k| nodes.iter().map(|&x| (2.0 * k as f64 * x).cos()).collect())
        .collect();
    let inner = |f: &[f64], g: &[f64]| -> f64 {
        f.iter()
            .zip(g)
            .zip(&weights)
            .map(|((a, b), w)| a * b * w)
            .sum()
    };

    let gram = DMatrix::from_fn(n + 1, n + 1, |i, j| inner(&basis[i], &basis[j]));
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
        (lo.min(v), hi.max(v.abs()))
    });
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > 1e12 {
        return Err(Error::QuadratureFailure { condition });
    }

    let mut polys: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        let mut values = basis[k].clone();
        // modified Gram-Schmidt: project the running remainder
        for (pc, pv) in &polys {
            let t = inner(&values, pv) / inner(pv, pv);
            for (c, v) in coeffs.iter_mut().zip(pc) {
                *c -= t * v;
            }
            for (v, w) in values.iter_mut().zip(pv) {
                *v -= t * w;
            }
        }
        polys.push((coeffs, values));
    }
    Ok(polys.into_iter().map(|(c, _)| c).collect())
}

// ---------------------------------------------------------------------------
// Wilson series

struct WilsonMp {
    a: Float,
    b: Float,
    c: Float,
    d: Float,
}

impl WilsonMp {
    fn from_params(p: &WilsonParams, prec: u32) -> Self {
        let [a, b, c, d] = p.abcd().map(|v| mp::real(prec, v));
        Self { a, b, c, d }
    }

    fn from_couplings(cp: &CouplingParams, prec: u32) -> Self {
        let g = mp::real(prec, cp.g);
        let [a, b, c, d] = cp
            .gr()
            .map(|v| Float::with_val(prec, mp::real(prec, v) / &g));
        Self { a, b, c, d }
    }
}

fn wilson_log2_scale(p: &WilsonParams, n: usize, y: Complex64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let [a, b, c, d] = p.abcd();
    let s = a + b + c + d;
    let iy = Complex64::i() * y;
    let upper = [Complex64::new(n as f64 + s - 1.0, 0.0), iy + a, -iy + a];
    let lower = [a + b, a + c, a + d].map(|v| Complex64::new(v, 0.0));
    let series = qseries::log2_max_term(
        n,
        &upper,
        &lower,
        Complex64::new(1.0, 0.0),
        SeriesBasis::Ordinary,
    );
    let ln_poch = |v: f64| (0..n).map(|j| (v + j as f64).abs().ln()).sum::<f64>();
    let pre = ln_poch(a + b) + ln_poch(a + c) + ln_poch(a + d) - ln_poch(n as f64 + s - 1.0);
    series + pre / LN_2
}

fn mp_poch(v: &Float, n: usize) -> Float {
    let prec = v.prec();
    let mut acc = mp::real(prec, 1.0);
    for j in 0..n {
        acc *= Float::with_val(prec, v + j as f64);
    }
    acc
}

fn wilson_eval_mp(p: &WilsonMp, n: usize, y: &MpComplex) -> Result<MpComplex> {
    let prec = y.prec();
    let s = Float::with_val(prec, &p.a + &p.b) + &p.c + &p.d;
    let top = Float::with_val(prec, &s + (n as f64 - 1.0));
    // a ± i y
    let plus = MpComplex {
        re: Float::with_val(prec, &p.a - &y.im),
        im: y.re.clone(),
    };
    let minus = MpComplex {
        re: Float::with_val(prec, &p.a + &y.im),
        im: Float::with_val(prec, -&y.re),
    };
    let ab = Float::with_val(prec, &p.a + &p.b);
    let ac = Float::with_val(prec, &p.a + &p.c);
    let ad = Float::with_val(prec, &p.a + &p.d);
    let upper = [MpComplex::from_real(top.clone()), plus, minus];
    let lower = [ab.clone(), ac.clone(), ad.clone()].map(MpComplex::from_real);
    let sum =
        qseries::sum_terminating(n, &upper, &lower, &MpComplex::one(prec), MpBasis::Ordinary)?;

    let den = mp_poch(&top, n);
    if den.clone().abs() < qseries::DENOMINATOR_GUARD {
        return Err(Error::DegenerateParameters(format!(
            "Wilson prefactor denominator vanishes at degree {n}"
        )));
    }
    let mut pre = mp_poch(&ab, n) * mp_poch(&ac, n) * mp_poch(&ad, n) / den;
    if n % 2 == 1 {
        pre = -pre;
    }
    Ok(sum.scale(&pre))
}

/// Monic Wilson polynomial `p_n(x)` (a polynomial in `x²`).
pub fn wilson_eval(p: &WilsonParams, n: usize, x: Complex64) -> Result<Complex64> {
    let prec = mp::precision_for(wilson_log2_scale(p, n, x));
    let params = WilsonMp::from_params(p, prec);
    Ok(wilson_eval_mp(&params, n, &MpComplex::from_c64(prec, x))?.to_c64())
}

/// `∏_k (x + x_k)(x - x_k)`.
pub fn wilson_eval_factored(zeros: &Configuration, x: Complex64) -> Complex64 {
    zeros
        .positions()
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, &xk| acc * (x * x - xk * xk))
}

// ---------------------------------------------------------------------------
// The polynomial attached to a coupling set

fn monic_log2_scale(c: &CouplingParams, n: usize, x: Complex64) -> Result<f64> {
    Ok(match c.mode {
        Mode::Trigonometric => aw_log2_scale(&AWParams::from_couplings(c)?, n, x),
        Mode::Rational => {
            wilson_log2_scale(&WilsonParams::from_couplings(c)?, n, x / c.g)
                + 2.0 * n as f64 * c.g.log2()
        }
    })
}

/// Evaluates at the precision of `x`, with the series parameters derived
/// from the couplings inside multiprecision.
fn monic_eval_mp(c: &CouplingParams, n: usize, x: &MpComplex) -> Result<MpComplex> {
    let prec = x.prec();
    match c.mode {
        Mode::Trigonometric => aw_eval_mp(&AwMp::from_couplings(c, prec), n, x),
        Mode::Rational => {
            let g = mp::real(prec, c.g);
            let y = MpComplex {
                re: Float::with_val(prec, &x.re / &g),
                im: Float::with_val(prec, &x.im / &g),
            };
            let v = wilson_eval_mp(&WilsonMp::from_couplings(c, prec), n, &y)?;
            Ok(v.scale(&mp::powi(&g, 2 * n)))
        }
    }
}

/// The monic polynomial whose zeros are the equilibrium positions:
/// the Askey-Wilson `p_n(x)` (trigonometric) or `g^{2n} p_n(x/g)` with the
/// rescaled Wilson parameters `g_r/g` (rational).
pub fn monic_eval(c: &CouplingParams, n: usize, x: Complex64) -> Result<Complex64> {
    let prec = mp::precision_for(monic_log2_scale(c, n, x)?);
    Ok(monic_eval_mp(c, n, &MpComplex::from_c64(prec, x))?.to_c64())
}

/// Extra bits on top of the series precision when refining zeros.
const REFINE_EXTRA_BITS: u32 = 64;

/// Newton iteration in multiprecision for a simple real zero of
/// [`monic_eval`] near `x`.
pub(crate) fn refine_zero_mp(c: &CouplingParams, n: usize, x: f64) -> Result<Float> {
    let prec =
        mp::precision_for(monic_log2_scale(c, n, Complex64::new(x, 0.0))?) + REFINE_EXTRA_BITS;
    let value = |t: &Float| -> Result<Float> {
        let z = MpComplex::from_real(t.clone());
        Ok(monic_eval_mp(c, n, &z)?.re)
    };
    let scale = x.abs().max(1.0);
    // the series loses its scale to cancellation, leaving about
    // GUARD_BITS + REFINE_EXTRA_BITS significant bits in the value
    let spare = (mp::GUARD_BITS as u32 + REFINE_EXTRA_BITS) as i32;
    let h = Float::with_val(prec, Float::i_exp(1, -spare / 3)) * scale;
    let stop = Float::with_val(prec, Float::i_exp(1, -spare / 2)) * scale;
    let mut t = mp::real(prec, x);
    for _ in 0..12 {
        let f = value(&t)?;
        if f.is_zero() {
            break;
        }
        let up = value(&Float::with_val(prec, &t + &h))?;
        let down = value(&Float::with_val(prec, &t - &h))?;
        let slope = Float::with_val(prec, up - down) / Float::with_val(prec, 2 * &h);
        if slope.is_zero() {
            return Err(Error::NotSimple {
                x,
                derivative: 0.0,
                scale: 0.0,
            });
        }
        let step = f / slope;
        t -= &step;
        if step.abs() < stop {
            break;
        }
    }
    Ok(t)
}

/// Factored form over the given zeros, matching [`monic_eval`].
pub fn factored_eval(zeros: &Configuration, x: Complex64) -> Complex64 {
    match zeros.mode() {
        Mode::Trigonometric => aw_eval_factored(zeros, x),
        Mode::Rational => wilson_eval_factored(zeros, x),
    }
}

// ---------------------------------------------------------------------------
// Eigenvalues and difference operators

/// `E_n = (cosh(ĝ + 2ng) - cosh ĝ) / 2`.
pub fn aw_eigenvalue(c: &CouplingParams, n: usize) -> Result<f64> {
    c.expect(Mode::Trigonometric)?;
    let gh = c.ghat();
    Ok(((gh + 2.0 * n as f64 * c.g).cosh() - gh.cosh()) / 2.0)
}

/// `E_n = -n g (n g + ĝ)`.
pub fn wilson_eigenvalue(c: &CouplingParams, n: usize) -> Result<f64> {
    c.expect(Mode::Rational)?;
    let ng = n as f64 * c.g;
    Ok(-ng * (ng + c.ghat()))
}

/// Guard on the denominators of the difference-operator coefficient.
pub const SINGULARITY_GUARD: f64 = 1e-10;

/// Coefficient `W(x)` of the difference operator; the mode decides between
/// the trigonometric and rational forms.
pub fn difference_coefficient(c: &CouplingParams, x: Complex64) -> Result<Complex64> {
    let i = Complex64::i();
    let [g1, g2, g3, g4] = c.gr();
    let g = c.g;
    match c.mode {
        Mode::Trigonometric => {
            let s2 = (x * 2.0).sin();
            let sp = (x * 2.0 + i * g).sin();
            let sm = (x * 2.0 - i * g).sin();
            if s2.norm() < SINGULARITY_GUARD
                || sp.norm() < SINGULARITY_GUARD
                || sm.norm() < SINGULARITY_GUARD
            {
                return Err(Error::Singularity { x });
            }
            let num =
                (x + i * g1).sin() * (x + i * g2).cos() * (x + i * g3).sin() * (x + i * g4).cos();
            Ok(num / (s2 * sp))
        }
        Mode::Rational => {
            let two_x = x * 2.0;
            if x.norm() < SINGULARITY_GUARD
                || (two_x + i * g).norm() < SINGULARITY_GUARD
                || (two_x - i * g).norm() < SINGULARITY_GUARD
            {
                return Err(Error::Singularity { x });
            }
            let num = (x + i * g1) * (x + i * g2) * (x + i * g3) * (x + i * g4);
            Ok(num / (two_x * (two_x + i * g)))
        }
    }
}

fn difference_apply<F>(c: &CouplingParams, f: F, x: Complex64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    let w_plus = difference_coefficient(c, x)?;
    let w_minus = difference_coefficient(c, -x)?;
    let shift = Complex64::new(0.0, c.g);
    let fx = f(x);
    Ok(w_plus * (f(x + shift) - fx) + w_minus * (f(x - shift) - fx))
}

/// `D f(x) = W(x)(f(x + ig) - f(x)) + W(-x)(f(x - ig) - f(x))` with the
/// trigonometric coefficient.
pub fn aw_difference_apply<F>(c: &CouplingParams, f: F, x: Complex64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    c.expect(Mode::Trigonometric)?;
    difference_apply(c, f, x)
}

/// Rational counterpart of [`aw_difference_apply`].
pub fn wilson_difference_apply<F>(c: &CouplingParams, f: F, x: Complex64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    c.expect(Mode::Rational)?;
    difference_apply(c, f, x)
}

fn coefficient_mp(c: &CouplingParams, x: &MpComplex) -> MpComplex {
    let prec = x.prec();
    let shifted = |gr: f64| MpComplex {
        re: x.re.clone(),
        im: Float::with_val(prec, &x.im + gr),
    };
    let two_x = MpComplex {
        re: Float::with_val(prec, 2 * &x.re),
        im: Float::with_val(prec, 2 * &x.im),
    };
    let two_x_g = MpComplex {
        re: two_x.re.clone(),
        im: Float::with_val(prec, &two_x.im + c.g),
    };
    let [g1, g2, g3, g4] = c.gr();
    match c.mode {
        Mode::Trigonometric => {
            let num = &(&(&shifted(g1).sin() * &shifted(g2).cos()) * &shifted(g3).sin())
                * &shifted(g4).cos();
            &num / &(&two_x.sin() * &two_x_g.sin())
        }
        Mode::Rational => {
            let num = &(&(&shifted(g1) * &shifted(g2)) * &shifted(g3)) * &shifted(g4);
            &num / &(&two_x * &two_x_g)
        }
    }
}

fn eigenvalue_mp(c: &CouplingParams, n: usize, prec: u32) -> Float {
    let g = mp::real(prec, c.g);
    let [g1, g2, g3, g4] = c.gr().map(|v| mp::real(prec, v));
    let ghat = Float::with_val(prec, &g1 + &g2) + &g3 + &g4 - &g;
    let ng = Float::with_val(prec, &g * n as f64);
    match c.mode {
        Mode::Trigonometric => {
            let big = Float::with_val(prec, &ghat + Float::with_val(prec, 2 * &ng)).cosh();
            (big - ghat.cosh()) / 2
        }
        Mode::Rational => {
            let t = Float::with_val(prec, &ng + &ghat);
            -(ng * t)
        }
    }
}

/// Relative eigen-equation residual `|D p_n(x) - E_n p_n(x)| / (1 + |p_n(x)|)`
/// for the monic polynomial of the coupling set, computed in multiprecision.
pub fn eigen_residual(c: &CouplingParams, n: usize, x: Complex64) -> Result<f64> {
    let shift = Complex64::new(0.0, c.g);
    // guard check and magnitude estimate in double precision
    let w_plus = difference_coefficient(c, x)?;
    let w_minus = difference_coefficient(c, -x)?;
    let mut log2_scale = 0.0f64;
    for y in [x, x + shift, x - shift] {
        log2_scale = log2_scale.max(monic_log2_scale(c, n, y)?);
    }
    let e = match c.mode {
        Mode::Trigonometric => aw_eigenvalue(c, n)?,
        Mode::Rational => wilson_eigenvalue(c, n)?,
    };
    let log2_w = w_plus.norm().max(w_minus.norm()).log2().max(0.0);
    let log2_e = e.abs().log2().max(0.0);
    let prec = mp::precision_for(log2_scale + log2_w.max(log2_e) + 8.0);

    let xm = MpComplex::from_c64(prec, x);
    let up = MpComplex {
        re: xm.re.clone(),
        im: Float::with_val(prec, &xm.im + c.g),
    };
    let down = MpComplex {
        re: xm.re.clone(),
        im: Float::with_val(prec, &xm.im - c.g),
    };
    let p0 = monic_eval_mp(c, n, &xm)?;
    let pu = monic_eval_mp(c, n, &up)?;
    let pd = monic_eval_mp(c, n, &down)?;
    let wp = coefficient_mp(c, &xm);
    let wm = coefficient_mp(c, &-&xm);
    let applied = &(&wp * &(&pu - &p0)) + &(&wm * &(&pd - &p0));
    let resid = &applied - &p0.scale(&eigenvalue_mp(c, n, prec));
    let denom = Float::with_val(prec, 1 + p0.abs());
    Ok(Float::with_val(prec, resid.abs() / denom).to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ln2_half() -> f64 {
        std::f64::consts::LN_2 / 2.0
    }

    fn sample_trig() -> CouplingParams {
        CouplingParams::trigonometric(0.3, [0.4, 0.5, 0.6, 0.7]).unwrap()
    }

    fn sample_rational() -> CouplingParams {
        CouplingParams::rational(0.8, [1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    fn random_couplings(rng: &mut ChaCha8Rng, mode: Mode) -> CouplingParams {
        let mut draw = || rng.random_range(0.05..5.0);
        CouplingParams::new(mode, draw(), [draw(), draw(), draw(), draw()]).unwrap()
    }

    #[test]
    fn coupling_construction_rejects_nonpositive() {
        assert!(matches!(
            CouplingParams::trigonometric(0.0, [1.0; 4]),
            Err(Error::InvalidCoupling { name: "g", .. })
        ));
        assert!(matches!(
            CouplingParams::rational(1.0, [1.0, -2.0, 1.0, 1.0]),
            Err(Error::InvalidCoupling { name: "g2", .. })
        ));
        assert!(CouplingParams::rational(1.0, [1.0, f64::NAN, 1.0, 1.0]).is_err());
        assert!(CouplingParams::rational(f64::INFINITY, [1.0; 4]).is_err());
    }

    #[test]
    fn ghat_matches_definition() {
        let c = CouplingParams::trigonometric(0.3, [0.4, 0.5, 0.6, 0.7]).unwrap();
        assert_eq!(c.ghat(), 0.4 + 0.5 + 0.6 + 0.7 - 0.3);
        let c = c.with(Coupling::G3, 2.0).unwrap();
        assert_eq!(c.ghat(), 0.4 + 0.5 + 2.0 + 0.7 - 0.3);
        assert!(c.with(Coupling::G, -1.0).is_err());
    }

    #[test]
    fn aw_parameter_substitution() {
        let h = ln2_half();
        let c = CouplingParams::trigonometric(h, [h; 4]).unwrap();
        let p = aw_params_from_couplings(&c).unwrap();
        assert_relative_eq!(p.q(), 0.5, epsilon = 1e-15);
        let [a, b, cc, d] = p.abcd();
        assert_relative_eq!(a, 0.5, epsilon = 1e-15);
        assert_relative_eq!(b, -0.5, epsilon = 1e-15);
        assert_relative_eq!(cc, 0.5, epsilon = 1e-15);
        assert_relative_eq!(d, -0.5, epsilon = 1e-15);
        assert!(matches!(
            aw_params_from_couplings(&sample_rational()),
            Err(Error::ModeMismatch { .. })
        ));
    }

    #[test]
    fn aw_parameters_in_range_for_positive_couplings() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let c = random_couplings(&mut rng, Mode::Trigonometric);
            let p = AWParams::from_couplings(&c).unwrap();
            assert!(p.q() > 0.0 && p.q() < 1.0);
            let [a, b, cc, d] = p.abcd();
            assert!(a > 0.0 && cc > 0.0 && b < 0.0 && d < 0.0);
            assert!([a, b, cc, d].iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn degree_zero_is_one_in_both_families() {
        let p = AWParams::from_couplings(&sample_trig()).unwrap();
        let w = WilsonParams::from_couplings(&sample_rational()).unwrap();
        for x in [Complex64::new(0.3, 0.0), Complex64::new(1.1, -0.4)] {
            assert_eq!(aw_eval(&p, 0, x).unwrap(), Complex64::new(1.0, 0.0));
            assert_eq!(wilson_eval(&w, 0, x).unwrap(), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn aw_is_symmetric_in_its_four_parameters() {
        let p = AWParams::from_couplings(&sample_trig()).unwrap();
        for order in [[1, 0, 2, 3], [2, 3, 0, 1], [3, 2, 1, 0]] {
            for n in [1, 3, 5] {
                let x = Complex64::new(0.61, 0.2);
                let lhs = aw_eval(&p, n, x).unwrap();
                let rhs = aw_eval(&p.permuted(order), n, x).unwrap();
                assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()));
            }
        }
    }

    #[test]
    fn aw_degree_one_is_monic_in_cos_2x() {
        // p_1(x) - cos 2x is constant
        let p = AWParams::from_couplings(&sample_trig()).unwrap();
        let base = aw_eval(&p, 1, Complex64::new(0.0, 0.0)).unwrap() - 1.0;
        for x in [0.2, 0.7, 1.3] {
            let v = aw_eval(&p, 1, Complex64::new(x, 0.0)).unwrap() - (2.0 * x).cos();
            assert!((v - base).norm() < 1e-13);
        }
    }

    #[test]
    fn factored_degree_one_at_origin() {
        let zeros = Configuration::new(Mode::Trigonometric, vec![0.4]).unwrap();
        let v = aw_eval_factored(&zeros, Complex64::new(0.0, 0.0));
        assert_relative_eq!(v.re, 1.0 - (0.8f64).cos(), max_relative = 1e-14);
        assert_relative_eq!(v.re, 2.0 * 0.4f64.sin().powi(2), max_relative = 1e-14);
        let at_zero = aw_eval_factored(&zeros, Complex64::new(0.4, 0.0));
        assert!(at_zero.norm() < 1e-16);
    }

    #[test]
    fn weight_positive_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let c = random_couplings(&mut rng, Mode::Trigonometric);
            let p = AWParams::from_couplings(&c).unwrap();
            let swapped = p.permuted([2, 3, 0, 1]);
            for i in 1..=100 {
                let x = FRAC_PI_2 * i as f64 / 101.0;
                let w = aw_weight(&p, x, 1e-16).unwrap();
                assert!(w > 0.0 && w.is_finite(), "weight {w} at {x}");
                let ws = aw_weight(&swapped, x, 1e-16).unwrap();
                assert_relative_eq!(w, ws, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn weight_rejects_endpoints() {
        let p = AWParams::from_couplings(&sample_trig()).unwrap();
        assert!(matches!(aw_weight(&p, 0.0, 1e-16), Err(Error::Domain(_))));
        assert!(matches!(
            aw_weight(&p, FRAC_PI_2, 1e-16),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn gram_schmidt_degree_one_constant() {
        let p = AWParams::from_couplings(&sample_trig()).unwrap();
        let polys = gram_schmidt_oracle(&p, 1, 512).unwrap();
        assert_eq!(polys[0], vec![1.0]);
        // a0 = -<cos 2x, 1> / <1, 1>, computed here with a separate quadrature
        let nq = 4096;
        let h = FRAC_PI_2 / nq as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..nq {
            let x = (i as f64 + 0.5) * h;
            let w = aw_weight(&p, x, 1e-16).unwrap();
            num += (2.0 * x).cos() * w;
            den += w;
        }
        assert_relative_eq!(polys[1][0], -num / den, max_relative = 1e-10);
        assert_eq!(polys[1][1], 1.0);
    }

    #[test]
    fn gram_schmidt_orthogonality_under_quadrature() {
        let p = AWParams::from_couplings(&sample_trig()).unwrap();
        let polys = gram_schmidt_oracle(&p, 3, 512).unwrap();
        let nq = 512;
        let h = FRAC_PI_2 / nq as f64;
        let mut ip = 0.0;
        let mut norm = 0.0;
        for i in 0..nq {
            let x = (i as f64 + 0.5) * h;
            let w = aw_weight(&p, x, 1e-16).unwrap() * h;
            let p1 = cosine_series_eval(&polys[1], Complex64::new(x, 0.0)).re;
            let p2 = cosine_series_eval(&polys[2], Complex64::new(x, 0.0)).re;
            ip += p1 * p2 * w;
            norm += p1 * p1 * w;
        }
        assert!(ip.abs() < 1e-8 * norm.max(1.0), "inner product {ip}");
    }

    #[test]
    fn gram_schmidt_rejects_bad_arguments() {
        let p = AWParams::from_couplings(&sample_trig()).unwrap();
        assert!(matches!(
            gram_schmidt_oracle(&p, 5, 512),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            gram_schmidt_oracle(&p, 2, 100),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn gram_schmidt_matches_series_degree_two() {
        let h = ln2_half();
        let c = CouplingParams::trigonometric(h, [h; 4]).unwrap();
        let p = AWParams::from_couplings(&c).unwrap();
        let polys = gram_schmidt_oracle(&p, 2, 512).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = Complex64::new(rng.random_range(0.0..FRAC_PI_2), 0.0);
            let series = aw_eval(&p, 2, x).unwrap();
            let oracle = cosine_series_eval(&polys[2], x);
            assert!((series - oracle).norm() < 1e-8 * (1.0 + series.norm()));
        }
    }

    #[test]
    fn aw_eigenvalue_examples_and_monotonicity() {
        let c = CouplingParams::trigonometric(1.0, [1.0; 4]).unwrap();
        assert_eq!(aw_eigenvalue(&c, 0).unwrap(), 0.0);
        assert_relative_eq!(
            aw_eigenvalue(&c, 1).unwrap(),
            (5f64.cosh() - 3f64.cosh()) / 2.0
        );
        // ĝ >= 0: increasing from the start
        let seq: Vec<f64> = (0..=20).map(|n| aw_eigenvalue(&c, n).unwrap()).collect();
        assert!(seq.windows(2).all(|w| w[1] > w[0]));
        // ĝ < 0: increasing once 2ng + ĝ > |ĝ|
        let c = CouplingParams::trigonometric(2.0, [0.1, 0.1, 0.1, 0.1]).unwrap();
        let gh = c.ghat();
        assert!(gh < 0.0);
        let seq: Vec<(usize, f64)> = (0..=20)
            .map(|n| (n, aw_eigenvalue(&c, n).unwrap()))
            .collect();
        for w in seq.windows(2) {
            if 2.0 * w[0].0 as f64 * c.g() + gh > gh.abs() {
                assert!(w[1].1 > w[0].1);
            }
        }
        assert!(aw_eigenvalue(&sample_rational(), 1).is_err());
    }

    #[test]
    fn wilson_eigenvalue_examples_and_rescaling() {
        let c = CouplingParams::rational(1.0, [1.0; 4]).unwrap();
        assert_eq!(wilson_eigenvalue(&c, 0).unwrap(), 0.0);
        assert_eq!(wilson_eigenvalue(&c, 1).unwrap(), -4.0);
        let c = CouplingParams::rational(2.5, [0.3, 1.7, 0.9, 4.1]).unwrap();
        let gr = c.gr().map(|v| v / 2.5);
        let unit = CouplingParams::rational(1.0, gr).unwrap();
        for n in 0..8 {
            assert_relative_eq!(
                wilson_eigenvalue(&c, n).unwrap(),
                6.25 * wilson_eigenvalue(&unit, n).unwrap(),
                max_relative = 1e-13
            );
        }
        assert!(wilson_eigenvalue(&sample_trig(), 1).is_err());
    }

    #[test]
    fn wilson_degree_one_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.05..5.0));
            let p = WilsonParams::new(v[0], v[1], v[2], v[3]).unwrap();
            let e1: f64 = v.iter().sum();
            let e3 =
                v[0] * v[1] * v[2] + v[0] * v[1] * v[3] + v[0] * v[2] * v[3] + v[1] * v[2] * v[3];
            let x = rng.random_range(0.0..6.0);
            let got = wilson_eval(&p, 1, Complex64::new(x, 0.0)).unwrap();
            let expected = x * x - e3 / e1;
            assert!((got.re - expected).abs() < 1e-12 * (1.0 + expected.abs()));
            assert!(got.im.abs() < 1e-12 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn difference_operator_annihilates_constants() {
        for c in [sample_trig(), sample_rational()] {
            for x in [0.37, 1.1] {
                let x = Complex64::new(x, 0.0);
                let v = match c.mode() {
                    Mode::Trigonometric => aw_difference_apply(&c, |_| Complex64::new(1.0, 0.0), x),
                    Mode::Rational => wilson_difference_apply(&c, |_| Complex64::new(1.0, 0.0), x),
                }
                .unwrap();
                assert_eq!(v, Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn difference_operator_singular_at_origin() {
        let zero = Complex64::new(0.0, 0.0);
        assert!(matches!(
            aw_difference_apply(&sample_trig(), |z| z, zero),
            Err(Error::Singularity { .. })
        ));
        assert!(matches!(
            wilson_difference_apply(&sample_rational(), |z| z, zero),
            Err(Error::Singularity { .. })
        ));
        assert!(aw_difference_apply(&sample_rational(), |z| z, Complex64::new(0.5, 0.0)).is_err());
    }

    #[test]
    fn wilson_degree_one_eigen_equation_in_double_precision() {
        // both sides are low-degree rational expressions; no cancellation issue
        let c = CouplingParams::rational(1.3, [0.4, 2.2, 1.1, 0.9]).unwrap();
        let w = WilsonParams::from_couplings(&c).unwrap();
        let g = c.g();
        let p1 = |x: Complex64| wilson_eval(&w, 1, x / g).unwrap() * g * g;
        let e1 = wilson_eigenvalue(&c, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let x = Complex64::new(rng.random_range(0.1..10.0), 0.0);
            let d = wilson_difference_apply(&c, p1, x).unwrap();
            let rhs = p1(x) * e1;
            assert!(
                (d - rhs).norm() < 1e-12 * (1.0 + rhs.norm()),
                "{d} vs {rhs}"
            );
        }
    }

    #[test]
    fn eigen_residuals_small_both_modes() {
        for c in [sample_trig(), sample_rational()] {
            for n in 0..=8 {
                for i in 0..5 {
                    let x = match c.mode() {
                        Mode::Trigonometric => 0.1 + (FRAC_PI_2 - 0.2) * (i as f64 + 0.3) / 5.0,
                        Mode::Rational => 0.1 + 9.9 * (i as f64 + 0.3) / 5.0,
                    };
                    let r = eigen_residual(&c, n, Complex64::new(x, 0.0)).unwrap();
                    assert!(r < 1e-9, "{:?} n={n} x={x} residual {r}", c.mode());
                }
            }
        }
    }

    #[test]
    fn eigen_residual_detects_wrong_polynomial() {
        // a degree-2 polynomial is not an eigenfunction with the degree-3 eigenvalue
        let c = sample_trig();
        let p = AWParams::from_couplings(&c).unwrap();
        let x = Complex64::new(0.5, 0.0);
        let e3 = aw_eigenvalue(&c, 3).unwrap();
        let d = aw_difference_apply(&c, |z| aw_eval(&p, 2, z).unwrap(), x).unwrap();
        let p2 = aw_eval(&p, 2, x).unwrap();
        assert!((d - p2 * e3).norm() / (1.0 + p2.norm()) > 1e-3);
    }
}
