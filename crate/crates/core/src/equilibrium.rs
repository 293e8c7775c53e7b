//! Potentials, Hamiltonian and Bethe-type equations of the BC-type
//! Ruijsenaars-Schneider systems, with solvers for the equilibrium.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mp::{self, MpComplex};
use crate::polynomials::{refine_zero_mp, CouplingParams, Mode};
use crate::roots::Configuration;

mod nelder_mead;
mod oracle;
mod verify;

pub use nelder_mead::{nelder_mead, SimplexOptions, SimplexResult};
pub use oracle::{minimize_hamiltonian_oracle, OracleOptions, OracleOutcome, StartSummary};
pub use verify::{
    rescale_rational_check, verify_configuration, verify_equilibrium, Check, Tolerances,
    VerificationReport, VerifyOptions,
};

/// Momenta and positions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasePoint {
    momenta: Vec<f64>,
    positions: Configuration,
}

impl PhasePoint {
    pub fn new(momenta: Vec<f64>, positions: Configuration) -> Result<Self> {
        if momenta.len() != positions.len() {
            return Err(Error::InvalidParameter(format!(
                "{} momenta for {} positions",
                momenta.len(),
                positions.len()
            )));
        }
        if momenta.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("momenta must be finite".into()));
        }
        Ok(Self { momenta, positions })
    }

    /// Zero momenta at the given positions.
    pub fn at_rest(positions: Configuration) -> Self {
        Self {
            momenta: vec![0.0; positions.len()],
            positions,
        }
    }

    pub fn mode(&self) -> Mode {
        self.positions.mode()
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    pub fn positions(&self) -> &Configuration {
        &self.positions
    }
}

fn pair_factor(mode: Mode, g: f64, x: Complex64) -> Complex64 {
    let i = Complex64::i();
    match mode {
        Mode::Trigonometric => (x + i * g).sin() / x.sin(),
        Mode::Rational => (x + i * g) / x,
    }
}

fn external_factor(c: &CouplingParams, x: Complex64) -> Complex64 {
    let i = Complex64::i();
    let [g1, g2, g3, g4] = c.gr();
    match c.mode() {
        Mode::Trigonometric => {
            let (s, co) = (x.sin(), x.cos());
            (x + i * g1).sin() * (x + i * g2).cos() * (x + i * g3).sin() * (x + i * g4).cos()
                / (s * s * co * co)
        }
        // the overall sign makes V_j positive at the Wilson zeros; with a plus
        // sign every V_j is negative there and H(0, x) never vanishes
        Mode::Rational => -(x + i * g1) * (x + i * g2) * (x + i * g3) * (x + i * g4) / (x * x),
    }
}

/// `arg v(x)`; `v` has positive real part away from its poles.
fn pair_phase(mode: Mode, g: f64, x: f64) -> f64 {
    match mode {
        Mode::Trigonometric => (g.tanh() / x.tan()).atan(),
        Mode::Rational => (g / x).atan(),
    }
}

/// Unwrapped `arg w(x)` as a sum of factor phases.
fn external_phase(c: &CouplingParams, x: f64) -> f64 {
    let [g1, g2, g3, g4] = c.gr();
    match c.mode() {
        Mode::Trigonometric => {
            let (cot, tan) = (1.0 / x.tan(), x.tan());
            (g1.tanh() * cot).atan() - (g2.tanh() * tan).atan() + (g3.tanh() * cot).atan()
                - (g4.tanh() * tan).atan()
        }
        Mode::Rational => {
            [g1, g2, g3, g4]
                .iter()
                .map(|gr| (gr / x).atan())
                .sum::<f64>()
                - std::f64::consts::PI
        }
    }
}

/// Unwrapped phases `θ_j` with `V_j = |V_j| e^{iθ_j}`; the equilibrium has
/// every `θ_j = 0`.
fn phases_unchecked(c: &CouplingParams, xs: &[f64]) -> Vec<f64> {
    let (mode, g) = (c.mode(), c.g());
    (0..xs.len())
        .map(|j| {
            let mut theta = external_phase(c, xs[j]);
            for (k, &xk) in xs.iter().enumerate() {
                if k != j {
                    theta += pair_phase(mode, g, xs[j] + xk) + pair_phase(mode, g, xs[j] - xk);
                }
            }
            theta
        })
        .collect()
}

/// Phases `θ_j = arg V_j(x)`, unwrapped by summing the phases of the factors.
pub fn bethe_phases(c: &CouplingParams, x: &Configuration) -> Result<Vec<f64>> {
    checked(c, x)?;
    Ok(phases_unchecked(c, x.positions()))
}

/// `V_j` for every particle, after checking the positions form a
/// configuration.
fn potentials_unchecked(c: &CouplingParams, xs: &[f64], sign: f64) -> Vec<Complex64> {
    let (mode, g) = (c.mode(), c.g());
    (0..xs.len())
        .map(|j| {
            let xj = Complex64::new(sign * xs[j], 0.0);
            let mut v = external_factor(c, xj);
            for (k, &xk) in xs.iter().enumerate() {
                if k != j {
                    let xk = Complex64::new(sign * xk, 0.0);
                    v *= pair_factor(mode, g, xj + xk) * pair_factor(mode, g, xj - xk);
                }
            }
            v
        })
        .collect()
}

fn checked(c: &CouplingParams, x: &Configuration) -> Result<()> {
    c.expect(x.mode())
}

/// `V_j(±x) = w(±x_j) ∏_{k≠j} v(±x_j ± x_k) v(±x_j ∓ x_k)`; `j` counts
/// from zero and `sign` is `1` or `-1`.
pub fn potential(c: &CouplingParams, x: &Configuration, j: usize, sign: i32) -> Result<Complex64> {
    checked(c, x)?;
    if j >= x.len() {
        return Err(Error::InvalidParameter(format!(
            "particle index {j} out of range for n = {}",
            x.len()
        )));
    }
    let s = match sign {
        1 => 1.0,
        -1 => -1.0,
        _ => {
            return Err(Error::InvalidParameter(format!(
                "sign must be 1 or -1, got {sign}"
            )))
        }
    };
    Ok(potentials_unchecked(c, x.positions(), s)[j])
}

/// All `V_j(x)`.
pub fn potentials(c: &CouplingParams, x: &Configuration) -> Result<Vec<Complex64>> {
    checked(c, x)?;
    Ok(potentials_unchecked(c, x.positions(), 1.0))
}

/// `|V| - Re V`, without cancellation when `Re V > 0`.
fn defect(v: Complex64) -> f64 {
    let r = v.norm();
    if v.re > 0.0 {
        v.im * v.im / (r + v.re)
    } else {
        r - v.re
    }
}

/// `H = Σ_j cosh(p_j) |V_j(x)| - Re V_j(x)`.
pub fn hamiltonian(c: &CouplingParams, pt: &PhasePoint) -> Result<f64> {
    checked(c, pt.positions())?;
    let vs = potentials_unchecked(c, pt.positions().positions(), 1.0);
    Ok(hamiltonian_from(&vs, pt.momenta()))
}

fn hamiltonian_from(vs: &[Complex64], momenta: &[f64]) -> f64 {
    vs.iter()
        .zip(momenta)
        .map(|(v, p)| {
            let sh = (0.5 * p).sinh();
            2.0 * sh * sh * v.norm() + defect(*v)
        })
        .sum()
}

/// `H(0, x)` computed in multiprecision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroundEnergy {
    pub value: f64,
    /// Whether the value was taken at the exact zeros that the given
    /// positions round to, rather than at the positions themselves.
    pub refined: bool,
}

/// Distance, in units of `|x| ε`, within which a position counts as a
/// rounding of an exact zero.
pub const REFINE_WINDOW_ULPS: f64 = 4.0;

const ENERGY_PRECISION: u32 = 256;

fn mp_factor(re: Float, im: Float) -> MpComplex {
    MpComplex { re, im }
}

fn pair_factor_mp(mode: Mode, g: &Float, y: &Float) -> MpComplex {
    let p = g.prec();
    match mode {
        Mode::Trigonometric => mp_factor(
            Float::with_val(p, g.cosh_ref()),
            Float::with_val(p, g.sinh_ref()) * Float::with_val(p, y.cot_ref()),
        ),
        Mode::Rational => mp_factor(Float::with_val(p, 1), Float::with_val(p, g / y)),
    }
}

fn external_factor_mp(mode: Mode, gr: &[Float; 4], x: &Float) -> MpComplex {
    let p = x.prec();
    match mode {
        Mode::Trigonometric => {
            let (cot, tan) = (
                Float::with_val(p, x.cot_ref()),
                Float::with_val(p, x.tan_ref()),
            );
            let mut w = MpComplex::one(p);
            for (r, g) in gr.iter().enumerate() {
                let (ch, sh) = (
                    Float::with_val(p, g.cosh_ref()),
                    Float::with_val(p, g.sinh_ref()),
                );
                let f = if r % 2 == 0 {
                    mp_factor(ch, sh * &cot)
                } else {
                    mp_factor(ch, -sh * &tan)
                };
                w = &w * &f;
            }
            w
        }
        Mode::Rational => {
            let mut w = MpComplex::from_real(-Float::with_val(p, x * x));
            for g in gr {
                w = &w * &mp_factor(Float::with_val(p, 1), Float::with_val(p, g / x));
            }
            w
        }
    }
}

fn ground_energy_mp(c: &CouplingParams, xs: &[Float]) -> f64 {
    let prec = xs
        .iter()
        .map(Float::prec)
        .max()
        .unwrap_or(ENERGY_PRECISION)
        .max(ENERGY_PRECISION);
    let xs: Vec<Float> = xs.iter().map(|x| Float::with_val(prec, x)).collect();
    let g = mp::real(prec, c.g());
    let gr = c.gr().map(|v| mp::real(prec, v));
    let mut total = Float::with_val(prec, 0);
    for (j, xj) in xs.iter().enumerate() {
        let mut v = external_factor_mp(c.mode(), &gr, xj);
        for (k, xk) in xs.iter().enumerate() {
            if k != j {
                v = &v * &pair_factor_mp(c.mode(), &g, &Float::with_val(prec, xj + xk));
                v = &v * &pair_factor_mp(c.mode(), &g, &Float::with_val(prec, xj - xk));
            }
        }
        let r = v.abs();
        total += if v.re.is_sign_positive() {
            Float::with_val(prec, v.im.square_ref()) / (r + &v.re)
        } else {
            r - &v.re
        };
    }
    total.to_f64()
}

/// `H(0, x)` in multiprecision. When every position lies within
/// [`REFINE_WINDOW_ULPS`] of an exact zero of the monic polynomial of degree
/// `n`, the energy is taken at those exact zeros; otherwise at the positions
/// as given.
pub fn ground_state_energy(c: &CouplingParams, x: &Configuration) -> Result<GroundEnergy> {
    checked(c, x)?;
    let n = x.len();
    let refined: Option<Vec<Float>> = x
        .positions()
        .iter()
        .map(|&xj| {
            let r = refine_zero_mp(c, n, xj).ok()?;
            let window = REFINE_WINDOW_ULPS * xj.abs() * f64::EPSILON;
            (Float::with_val(r.prec(), &r - xj).abs().to_f64() <= window).then_some(r)
        })
        .collect();
    Ok(match refined {
        Some(zs) => GroundEnergy {
            value: ground_energy_mp(c, &zs),
            refined: true,
        },
        None => {
            let zs: Vec<Float> = x
                .positions()
                .iter()
                .map(|&v| mp::real(ENERGY_PRECISION, v))
                .collect();
            GroundEnergy {
                value: ground_energy_mp(c, &zs),
                refined: false,
            }
        }
    })
}

/// `R_j = Im V_j(x)`; zero exactly when `V_j(x) = V_j(-x)`.
pub fn bethe_residual(c: &CouplingParams, x: &Configuration) -> Result<Vec<f64>> {
    Ok(potentials(c, x)?.iter().map(|v| v.im).collect())
}

/// `max_j |Im V_j| / (1 + |V_j|)`.
pub fn bethe_residual_normalized(c: &CouplingParams, x: &Configuration) -> Result<f64> {
    Ok(normalized(&potentials(c, x)?))
}

fn normalized(vs: &[Complex64]) -> f64 {
    vs.iter()
        .map(|v| v.im.abs() / (1.0 + v.norm()))
        .fold(0.0, f64::max)
}

/// Evenly spaced starting configuration for [`solve_bethe_newton`].
pub fn default_guess(c: &CouplingParams, n: usize) -> Result<Configuration> {
    if n == 0 {
        return Err(Error::InvalidParameter("degree must be at least 1".into()));
    }
    let positions = match c.mode() {
        Mode::Trigonometric => (1..=n)
            .map(|j| j as f64 * FRAC_PI_2 / (n as f64 + 1.0))
            .collect(),
        Mode::Rational => {
            let top = c.gr().iter().fold(0.0f64, |m, &v| m.max(v));
            (1..=n)
                .map(|j| j as f64 * (c.g() + top) / n as f64)
                .collect()
        }
    };
    Configuration::new(c.mode(), positions)
}

pub const NEWTON_MAX_ITERATIONS: usize = 200;
const BACKTRACK_LIMIT: usize = 60;

fn admissible(mode: Mode, xs: &[f64]) -> bool {
    let end = mode.chamber_end();
    xs.iter().all(|&x| x.is_finite() && x > 0.0 && x < end) && xs.windows(2).all(|w| w[0] < w[1])
}

/// Damped Newton iteration for the Bethe-type equations with a
/// central-difference Jacobian.
///
/// The iteration runs on the unwrapped phases `θ_j = arg V_j`, which vanish
/// exactly where `Im V_j = 0` with `Re V_j > 0` and, unlike `Im V_j`, share
/// a common scale across particles. Converges when both `max_j |θ_j|` and
/// `max_j |Im V_j| / (1 + |V_j|)` fall below `tol`.
pub fn solve_bethe_newton(
    c: &CouplingParams,
    n: usize,
    x0: Option<&Configuration>,
    tol: f64,
) -> Result<Configuration> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let start = match x0 {
        Some(x) => {
            checked(c, x)?;
            if x.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "start has {} particles, expected {n}",
                    x.len()
                )));
            }
            x.clone()
        }
        None => default_guess(c, n)?,
    };
    let mode = c.mode();
    let mut xs = start.into_positions();
    let mut theta = phases_unchecked(c, &xs);
    let norm2 = |t: &[f64]| t.iter().map(|v| v * v).sum::<f64>().sqrt();
    let done = |xs: &[f64], theta: &[f64]| {
        theta.iter().all(|t| t.abs() < tol) && normalized(&potentials_unchecked(c, xs, 1.0)) < tol
    };

    for _ in 0..NEWTON_MAX_ITERATIONS {
        if done(&xs, &theta) {
            return Configuration::sorted(mode, xs);
        }
        let width = match mode {
            Mode::Trigonometric => FRAC_PI_2,
            Mode::Rational => xs[n - 1],
        };
        let h = 1e-6 * width;
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut up = xs.clone();
            let mut down = xs.clone();
            up[k] += h;
            down[k] -= h;
            let (tu, td) = (phases_unchecked(c, &up), phases_unchecked(c, &down));
            for j in 0..n {
                jac[(j, k)] = (tu[j] - td[j]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_iterator(n, theta.iter().map(|t| -t));
        let step = jac.lu().solve(&rhs).ok_or_else(|| Error::NonConvergence {
            iterations: NEWTON_MAX_ITERATIONS,
            residual: norm2(&theta),
        })?;

        let current = norm2(&theta);
        let mut scale = 1.0;
        let mut any_admissible = false;
        let mut accepted = None;
        for _ in 0..BACKTRACK_LIMIT {
            let trial: Vec<f64> = xs
                .iter()
                .zip(step.iter())
                .map(|(x, d)| x + scale * d)
                .collect();
            if admissible(mode, &trial) {
                any_admissible = true;
                let tt = phases_unchecked(c, &trial);
                if norm2(&tt) < current {
                    accepted = Some((trial, tt));
                    break;
                }
            }
            scale *= 0.5;
        }
        match accepted {
            Some((trial, tt)) => {
                xs = trial;
                theta = tt;
            }
            None if !any_admissible => {
                return Err(Error::ChamberViolation(
                    "no admissible Newton step keeps the configuration ordered".into(),
                ))
            }
            None => break,
        }
    }
    if done(&xs, &theta) {
        return Configuration::sorted(mode, xs);
    }
    Err(Error::NonConvergence {
        iterations: NEWTON_MAX_ITERATIONS,
        residual: norm2(&theta),
    })
}
