//! Zeros of the monic polynomial attached to a coupling set.
//!
//! Sign changes are bracketed on a uniform grid, tightened by bisection and
//! polished with a safeguarded Newton iteration using a central-difference
//! derivative.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::polynomials::{monic_eval, refine_zero_mp, CouplingParams, Mode};

/// Strictly increasing positions inside the chamber of `mode`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Configuration {
    mode: Mode,
    positions: Vec<f64>,
}

impl Configuration {
    pub fn new(mode: Mode, positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::ChamberViolation(
                "configuration has no particles".into(),
            ));
        }
        let end = mode.chamber_end();
        for (j, &x) in positions.iter().enumerate() {
            if !(x.is_finite() && x > 0.0 && x < end) {
                return Err(Error::ChamberViolation(format!(
                    "x{} = {x} outside the {mode} chamber",
                    j + 1
                )));
            }
        }
        if let Some(j) = positions.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::ChamberViolation(format!(
                "positions not strictly increasing: x{} = {}, x{} = {}",
                j + 1,
                positions[j],
                j + 2,
                positions[j + 1]
            )));
        }
        Ok(Self { mode, positions })
    }

    /// Sorts before validating.
    pub fn sorted(mode: Mode, mut positions: Vec<f64>) -> Result<Self> {
        positions.sort_by(f64::total_cmp);
        Self::new(mode, positions)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn into_positions(self) -> Vec<f64> {
        self.positions
    }

    /// Largest coordinate distance to another configuration of equal length.
    pub fn max_deviation(&self, other: &Configuration) -> f64 {
        self.positions
            .iter()
            .zip(&other.positions)
            .map(|(a, b)| (a - b).abs())
            .fold(
                if self.len() == other.len() {
                    0.0
                } else {
                    f64::INFINITY
                },
                f64::max,
            )
    }
}

/// Grid density and tolerances of the zero finder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootFindSettings {
    points_per_root: usize,
    bisection_tol: f64,
    newton_tol: f64,
    max_newton_steps: usize,
}

impl Default for RootFindSettings {
    fn default() -> Self {
        Self {
            points_per_root: 64,
            bisection_tol: 1e-8,
            newton_tol: 1e-13,
            max_newton_steps: 40,
        }
    }
}

impl RootFindSettings {
    pub fn new(
        points_per_root: usize,
        bisection_tol: f64,
        newton_tol: f64,
        max_newton_steps: usize,
    ) -> Result<Self> {
        if points_per_root == 0 || max_newton_steps == 0 {
            return Err(Error::InvalidParameter(
                "grid density and Newton step budget must be positive".into(),
            ));
        }
        if !(bisection_tol > 0.0 && newton_tol > 0.0 && newton_tol <= bisection_tol) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < newton_tol <= bisection_tol, got {newton_tol} and {bisection_tol}"
            )));
        }
        Ok(Self {
            points_per_root,
            bisection_tol,
            newton_tol,
            max_newton_steps,
        })
    }

    pub fn points_per_root(&self) -> usize {
        self.points_per_root
    }

    pub fn bisection_tol(&self) -> f64 {
        self.bisection_tol
    }

    pub fn newton_tol(&self) -> f64 {
        self.newton_tol
    }

    pub fn max_newton_steps(&self) -> usize {
        self.max_newton_steps
    }
}

struct Bracket {
    lo: f64,
    hi: f64,
    f_lo: f64,
    /// Larger endpoint magnitude over the grid spacing, a local slope scale.
    slope_scale: f64,
}

struct Scan {
    brackets: Vec<Bracket>,
    max_abs: f64,
}

fn scan<F>(f: &F, end: f64, intervals: usize) -> Result<Scan>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let xs: Vec<f64> = (0..=intervals)
        .map(|i| end * i as f64 / intervals as f64)
        .collect();
    let values = xs.par_iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let positive = |v: f64| v >= 0.0;
    let brackets = (0..intervals)
        .filter(|&i| positive(values[i]) != positive(values[i + 1]))
        .map(|i| Bracket {
            lo: xs[i],
            hi: xs[i + 1],
            f_lo: values[i],
            slope_scale: values[i].abs().max(values[i + 1].abs()) / (xs[i + 1] - xs[i]),
        })
        .collect();
    Ok(Scan { brackets, max_abs })
}

fn same_sign(a: f64, b: f64) -> bool {
    (a >= 0.0) == (b >= 0.0)
}

fn bisect<F>(f: &F, b: &mut Bracket, tol: f64) -> Result<()>
where
    F: Fn(f64) -> Result<f64>,
{
    while b.hi - b.lo > tol {
        let mid = 0.5 * (b.lo + b.hi);
        if mid <= b.lo || mid >= b.hi {
            break;
        }
        let fm = f(mid)?;
        if same_sign(fm, b.f_lo) {
            b.lo = mid;
            b.f_lo = fm;
        } else {
            b.hi = mid;
        }
    }
    Ok(())
}

/// Newton iteration confined to the bracket; bisection takes over if an
/// iterate leaves it.
fn polish<F>(f: &F, mut b: Bracket, h: f64, s: &RootFindSettings) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    bisect(f, &mut b, s.bisection_tol)?;
    let mut x = 0.5 * (b.lo + b.hi);
    for _ in 0..s.max_newton_steps {
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if same_sign(fx, b.f_lo) {
            b.lo = x;
            b.f_lo = fx;
        } else {
            b.hi = x;
        }
        let slope = (f(x + h)? - f(x - h)?) / (2.0 * h);
        let next = x - fx / slope;
        if !(next > b.lo && next < b.hi) {
            bisect(f, &mut b, s.newton_tol * x.abs().max(1.0))?;
            return Ok(0.5 * (b.lo + b.hi));
        }
        let step = (next - x).abs();
        x = next;
        if step <= s.newton_tol * x.abs().max(1.0) {
            return Ok(x);
        }
    }
    Ok(x)
}

fn check_simple<F>(f: &F, zeros: &[f64], h: f64, scales: &[f64]) -> Result<()>
where
    F: Fn(f64) -> Result<f64>,
{
    for (&z, &scale) in zeros.iter().zip(scales) {
        let derivative = ((f(z + h)? - f(z - h)?) / (2.0 * h)).abs();
        if derivative.is_nan() || derivative <= 1e-8 * scale {
            return Err(Error::NotSimple {
                x: z,
                derivative,
                scale,
            });
        }
    }
    Ok(())
}

/// Reference magnitude for the simplicity test.
#[derive(Clone, Copy)]
enum SlopeScale {
    /// Largest sample magnitude on the whole grid.
    Global,
    /// Endpoint magnitudes of each zero's own bracket over the grid spacing.
    Local,
}

/// Scan `[0, end]`, refining once on a count mismatch, then polish.
/// `Ok(None)` means too few sign changes even after refinement.
fn zeros_on<F>(
    f: &F,
    n: usize,
    end: f64,
    h: f64,
    s: &RootFindSettings,
    slope: SlopeScale,
) -> Result<Option<Vec<f64>>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let mut density = s.points_per_root * n;
    let mut attempt = scan(f, end, density)?;
    if attempt.brackets.len() != n {
        density *= 2;
        attempt = scan(f, end, density)?;
    }
    let found = attempt.brackets.len();
    if found < n {
        return Ok(None);
    }
    if found > n {
        return Err(Error::RootCount { expected: n, found });
    }
    let scales: Vec<f64> = match slope {
        SlopeScale::Global => vec![attempt.max_abs; n],
        SlopeScale::Local => attempt.brackets.iter().map(|b| b.slope_scale).collect(),
    };
    let zeros = attempt
        .brackets
        .into_par_iter()
        .map(|b| polish(f, b, h, s))
        .collect::<Result<Vec<_>>>()?;
    check_simple(f, &zeros, h, &scales)?;
    Ok(Some(zeros))
}

/// Final Newton pass in multiprecision so that each zero is the double
/// nearest to the exact zero.
fn correctly_rounded(c: &CouplingParams, n: usize, zeros: Vec<f64>) -> Result<Vec<f64>> {
    zeros
        .into_par_iter()
        .map(|x| refine_zero_mp(c, n, x).map(|t| t.to_f64()))
        .collect()
}

fn real_values(c: &CouplingParams, n: usize) -> impl Fn(f64) -> Result<f64> + Sync + '_ {
    move |x| monic_eval(c, n, Complex64::new(x, 0.0)).map(|v| v.re)
}

fn check_degree(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("degree must be at least 1".into()));
    }
    Ok(())
}

/// The `n` zeros of the Askey-Wilson polynomial in `(0, π/2)`.
pub fn find_zeros_trig(
    c: &CouplingParams,
    n: usize,
    s: &RootFindSettings,
) -> Result<Configuration> {
    c.expect(Mode::Trigonometric)?;
    check_degree(n)?;
    let f = real_values(c, n);
    let h = 1e-7 * FRAC_PI_2;
    match zeros_on(&f, n, FRAC_PI_2, h, s, SlopeScale::Global)? {
        Some(zeros) => Configuration::new(Mode::Trigonometric, correctly_rounded(c, n, zeros)?),
        None => {
            let found = scan(&f, FRAC_PI_2, 2 * s.points_per_root * n)?
                .brackets
                .len();
            Err(Error::RootCount { expected: n, found })
        }
    }
}

/// The `n` positive zeros of `x ↦ g^{2n} p_n(x/g)` with Wilson parameters
/// `g_r/g`, searched on `(0, U)` with `U` doubled from
/// `U₀ = max g_r + n g` until all zeros are bracketed.
pub fn find_zeros_rational(
    c: &CouplingParams,
    n: usize,
    s: &RootFindSettings,
) -> Result<Configuration> {
    c.expect(Mode::Rational)?;
    check_degree(n)?;
    let f = real_values(c, n);
    let u0 = c.gr().iter().fold(0.0f64, |m, &v| m.max(v)) + n as f64 * c.g();
    let limit = u0 * 1024.0;
    let mut end = u0;
    while end <= limit {
        // the global magnitude grows like U^{2n} and says nothing about
        // the slope at the small zeros
        if let Some(zeros) = zeros_on(&f, n, end, 1e-7 * end, s, SlopeScale::Local)? {
            return Configuration::new(Mode::Rational, correctly_rounded(c, n, zeros)?);
        }
        end *= 2.0;
    }
    Err(Error::UnboundedSearch { bound: limit })
}

/// Dispatches on the coupling mode.
pub fn find_zeros(c: &CouplingParams, n: usize, s: &RootFindSettings) -> Result<Configuration> {
    match c.mode() {
        Mode::Trigonometric => find_zeros_trig(c, n, s),
        Mode::Rational => find_zeros_rational(c, n, s),
    }
}
