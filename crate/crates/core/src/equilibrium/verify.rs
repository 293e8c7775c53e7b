//! Bundled checks that a configuration is the ground-state equilibrium.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::Serialize;

use super::{defect, ground_state_energy, normalized, potentials_unchecked};
use crate::error::{Error, Result};
use crate::polynomials::{
    difference_coefficient, eigen_residual, factored_eval, monic_eval, Coupling, CouplingParams,
    Mode,
};
use crate::roots::{find_zeros, find_zeros_rational, Configuration, RootFindSettings};

/// Thresholds of the individual checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub bethe: f64,
    pub hamiltonian: f64,
    pub difference_equation: f64,
    pub factorization: f64,
    pub vanishing_identity: f64,
    pub rescale: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            bethe: 1e-10,
            hamiltonian: 1e-10,
            difference_equation: 1e-9,
            factorization: 1e-9,
            vanishing_identity: 1e-9,
            rescale: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VerifyOptions {
    pub tolerances: Tolerances,
    pub roots: RootFindSettings,
    /// Rational mode only: also compare the zeros at this `g` with the
    /// rescaled zeros at `g = 1`.
    pub rescale_g: Option<f64>,
}

/// One named comparison of a residual against its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes when `residual < tolerance`. A positive tolerance below machine
    /// epsilon cannot be certified by double-precision residuals and fails.
    fn new(name: &'static str, residual: f64, tolerance: f64) -> Self {
        let reachable = !(tolerance > 0.0 && tolerance < f64::EPSILON);
        let passed = residual.is_finite() && residual < tolerance && reachable;
        let detail =
            (!reachable).then(|| format!("tolerance {tolerance:e} is below machine precision"));
        Self {
            name,
            residual,
            tolerance,
            passed,
            detail,
        }
    }

    fn failed(name: &'static str, tolerance: f64, err: &Error) -> Self {
        Self {
            name,
            residual: f64::NAN,
            tolerance,
            passed: false,
            detail: Some(err.to_string()),
        }
    }

    fn from_result(name: &'static str, residual: Result<f64>, tolerance: f64) -> Self {
        match residual {
            Ok(r) => Self::new(name, r, tolerance),
            Err(e) => Self::failed(name, tolerance, &e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub couplings: CouplingParams,
    pub n: usize,
    pub zeros: Vec<f64>,
    /// `V_j(x)` at the zeros.
    pub potentials: Vec<Complex64>,
    /// `Im V_j(x)` at the zeros.
    pub bethe_residuals: Vec<f64>,
    /// `H(0, x)` from [`ground_state_energy`].
    pub hamiltonian: Option<f64>,
    /// `H(0, x)` in double precision at the positions as given.
    pub hamiltonian_double: Option<f64>,
    pub difference_equation_max: Option<f64>,
    pub factorization_max: Option<f64>,
    pub vanishing_identity_max: Option<f64>,
    pub rescale_deviation: Option<f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const DIFFERENCE_POINTS: usize = 20;
const FACTORIZATION_POINTS: usize = 50;

/// Sample points away from the operator's singularities.
fn difference_points(mode: Mode) -> Vec<f64> {
    let (lo, hi) = match mode {
        Mode::Trigonometric => (0.1, FRAC_PI_2 - 0.1),
        Mode::Rational => (0.1, 10.0),
    };
    (0..DIFFERENCE_POINTS)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / DIFFERENCE_POINTS as f64)
        .collect()
}

/// Real points across the zero range and complex points off the axis.
fn factorization_points(c: &CouplingParams, zeros: &[f64]) -> Vec<Complex64> {
    let end = match c.mode() {
        Mode::Trigonometric => FRAC_PI_2,
        Mode::Rational => 1.25 * zeros[zeros.len() - 1],
    };
    let half = FACTORIZATION_POINTS / 2;
    let mut pts: Vec<Complex64> = (0..half)
        .map(|i| Complex64::new(end * (i as f64 + 0.37) / half as f64, 0.0))
        .collect();
    pts.extend((0..FACTORIZATION_POINTS - half).map(|i| {
        let t = (i as f64 + 0.5) / (FACTORIZATION_POINTS - half) as f64;
        let im = 2.0 * c.g() * (2.0 * t - 1.0);
        Complex64::new(end * t, if im == 0.0 { c.g() } else { im })
    }));
    pts
}

/// `max |Dp - Ep| / (1 + |p|)` over the fixed sample points.
pub(crate) fn difference_equation_max(c: &CouplingParams, n: usize) -> Result<f64> {
    difference_points(c.mode())
        .into_iter()
        .map(|x| eigen_residual(c, n, Complex64::new(x, 0.0)))
        .try_fold(0.0f64, |m, r| r.map(|r| m.max(r)))
}

/// Relative deviation of the series from the factored form over the zeros.
pub(crate) fn factorization_max(c: &CouplingParams, zeros: &Configuration) -> Result<f64> {
    let n = zeros.len();
    factorization_points(c, zeros.positions())
        .into_iter()
        .map(|x| {
            let series = monic_eval(c, n, x)?;
            let factored = factored_eval(zeros, x);
            Ok((series - factored).norm()
                / series.norm().max(factored.norm()).max(f64::MIN_POSITIVE))
        })
        .try_fold(0.0f64, |m, r: Result<f64>| r.map(|r| m.max(r)))
}

/// `|W(x_j) p(x_j + ig) + W(-x_j) p(x_j - ig)| / (|first| + |second|)`
/// maximized over the zeros, with `p` in factored form.
pub(crate) fn vanishing_identity_max(c: &CouplingParams, zeros: &Configuration) -> Result<f64> {
    let shift = Complex64::new(0.0, c.g());
    zeros.positions().iter().try_fold(0.0f64, |m, &xj| {
        let x = Complex64::new(xj, 0.0);
        let a = difference_coefficient(c, x)? * factored_eval(zeros, x + shift);
        let b = difference_coefficient(c, -x)? * factored_eval(zeros, x - shift);
        Ok(m.max((a + b).norm() / (a.norm() + b.norm())))
    })
}

/// `max_j |x_j(g) - g x_j(1)|` where `x(1)` are the zeros for the couplings
/// `(1, g_r / g)`.
pub fn rescale_rational_check(c: &CouplingParams, n: usize, s: &RootFindSettings) -> Result<f64> {
    c.expect(Mode::Rational)?;
    let g = c.g();
    let unit = CouplingParams::rational(1.0, c.gr().map(|v| v / g))?;
    let at_g = find_zeros_rational(c, n, s)?;
    let at_one = find_zeros_rational(&unit, n, s)?;
    Ok(at_g
        .positions()
        .iter()
        .zip(at_one.positions())
        .map(|(a, b)| (a - g * b).abs())
        .fold(0.0, f64::max))
}

/// Checks a candidate equilibrium without locating zeros first.
pub fn verify_configuration(
    c: &CouplingParams,
    positions: &[f64],
    opts: &VerifyOptions,
) -> VerificationReport {
    let tol = &opts.tolerances;
    let n = positions.len();
    let mut report = VerificationReport {
        couplings: *c,
        n,
        zeros: positions.to_vec(),
        potentials: Vec::new(),
        bethe_residuals: Vec::new(),
        hamiltonian: None,
        hamiltonian_double: None,
        difference_equation_max: None,
        factorization_max: None,
        vanishing_identity_max: None,
        rescale_deviation: None,
        checks: Vec::new(),
        passed: false,
    };

    let config = Configuration::new(c.mode(), positions.to_vec());
    match &config {
        Ok(x) => {
            let vs = potentials_unchecked(c, x.positions(), 1.0);
            report.bethe_residuals = vs.iter().map(|v| v.im).collect();
            report
                .checks
                .push(Check::new("bethe", normalized(&vs), tol.bethe));
            let min_re = vs
                .iter()
                .map(|v| v.re / (1.0 + v.norm()))
                .fold(f64::INFINITY, f64::min);
            let mut positivity = Check::new("positivity", -min_re, 0.0);
            positivity.detail = Some("residual is -min_j Re V_j / (1 + |V_j|)".into());
            report.checks.push(positivity);
            report.hamiltonian_double = Some(vs.iter().map(|v| defect(*v)).sum());
            let energy = ground_state_energy(c, x);
            report.hamiltonian = energy.as_ref().ok().map(|e| e.value);
            let mut check = Check::from_result(
                "hamiltonian",
                energy.as_ref().map(|e| e.value).map_err(Clone::clone),
                tol.hamiltonian,
            );
            if let Ok(e) = energy {
                let at = if e.refined {
                    "exact zeros nearest the positions"
                } else {
                    "positions as given"
                };
                check
                    .detail
                    .get_or_insert_with(|| format!("evaluated at the {at}"));
            }
            report.checks.push(check);
            report.potentials = vs;
        }
        Err(e) => {
            for (name, t) in [
                ("bethe", tol.bethe),
                ("positivity", 0.0),
                ("hamiltonian", tol.hamiltonian),
            ] {
                report.checks.push(Check::failed(name, t, e));
            }
        }
    }

    let diffeq = difference_equation_max(c, n);
    report.difference_equation_max = diffeq.as_ref().ok().copied();
    report.checks.push(Check::from_result(
        "difference_equation",
        diffeq,
        tol.difference_equation,
    ));

    let (factorization, vanishing) = match &config {
        Ok(x) => (factorization_max(c, x), vanishing_identity_max(c, x)),
        Err(e) => (Err(e.clone()), Err(e.clone())),
    };
    report.factorization_max = factorization.as_ref().ok().copied();
    report.checks.push(Check::from_result(
        "factorization",
        factorization,
        tol.factorization,
    ));
    report.vanishing_identity_max = vanishing.as_ref().ok().copied();
    report.checks.push(Check::from_result(
        "vanishing_identity",
        vanishing,
        tol.vanishing_identity,
    ));

    if let Some(g) = opts.rescale_g {
        let deviation = c
            .with(Coupling::G, g)
            .and_then(|cg| rescale_rational_check(&cg, n, &opts.roots));
        report.rescale_deviation = deviation.as_ref().ok().copied();
        report
            .checks
            .push(Check::from_result("rescale", deviation, tol.rescale));
    }

    report.passed = report.checks.iter().all(|c| c.passed);
    report
}

/// Locates the zeros for `(c, n)` and runs every check on them.
pub fn verify_equilibrium(
    c: &CouplingParams,
    n: usize,
    opts: &VerifyOptions,
) -> VerificationReport {
    match find_zeros(c, n, &opts.roots) {
        Ok(zeros) => {
            let mut report = verify_configuration(c, zeros.positions(), opts);
            report.checks.insert(0, Check::new("roots", 0.0, 0.5));
            report.checks[0].detail = Some(format!("{n} simple zeros located"));
            report
        }
        Err(e) => {
            let mut report = verify_configuration(c, &[], opts);
            report.n = n;
            report.checks.insert(0, Check::failed("roots", 0.5, &e));
            report.passed = false;
            report
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generic(mode: Mode) -> CouplingParams {
        CouplingParams::new(mode, 0.3, [0.4, 0.5, 0.6, 0.7]).unwrap()
    }

    #[test]
    fn generic_couplings_pass_in_both_modes() {
        for mode in [Mode::Trigonometric, Mode::Rational] {
            let r = verify_equilibrium(&generic(mode), 4, &VerifyOptions::default());
            assert!(r.passed, "{:#?}", r.checks);
            assert_eq!(r.zeros.len(), 4);
            assert!(r.checks.iter().all(|c| c.residual.is_finite()));
        }
    }

    #[test]
    fn perturbed_zero_fails() {
        for mode in [Mode::Trigonometric, Mode::Rational] {
            let c = generic(mode);
            let zeros = find_zeros(&c, 4, &RootFindSettings::default()).unwrap();
            let mut xs = zeros.into_positions();
            xs[0] += 1e-3;
            let r = verify_configuration(&c, &xs, &VerifyOptions::default());
            assert!(!r.passed);
            assert!(!r.check("bethe").unwrap().passed);
            assert!(!r.check("hamiltonian").unwrap().passed);
        }
    }

    #[test]
    fn unreachable_tolerance_fails() {
        let mut opts = VerifyOptions::default();
        opts.tolerances.bethe = 1e-18;
        let r = verify_equilibrium(&generic(Mode::Trigonometric), 4, &opts);
        assert!(!r.passed);
        let bethe = r.check("bethe").unwrap();
        assert!(!bethe.passed && bethe.detail.is_some());
        assert!(r.check("hamiltonian").unwrap().passed);
    }

    #[test]
    fn invalid_configuration_becomes_failed_checks() {
        let c = generic(Mode::Trigonometric);
        let r = verify_configuration(&c, &[0.5, 0.4], &VerifyOptions::default());
        assert!(!r.passed);
        assert!(r
            .check("bethe")
            .unwrap()
            .detail
            .as_deref()
            .unwrap()
            .contains("increasing"));
        assert!(r.check("difference_equation").unwrap().passed);
    }

    #[test]
    fn rescale_check_and_identity_case() {
        let c = CouplingParams::rational(2.0, [1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = RootFindSettings::default();
        assert!(rescale_rational_check(&c, 3, &s).unwrap() < 1e-10);
        let one = CouplingParams::rational(1.0, [1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(rescale_rational_check(&one, 3, &s).unwrap(), 0.0);
        // n = 1 closed form at scaled parameters
        let a = c.gr().map(|v| v / 2.0);
        let e1: f64 = a.iter().sum();
        let e3 = a[0] * a[1] * a[2] + a[0] * a[1] * a[3] + a[0] * a[2] * a[3] + a[1] * a[2] * a[3];
        let z = find_zeros_rational(&c, 1, &s).unwrap();
        assert!((z.positions()[0] - 2.0 * (e3 / e1).sqrt()).abs() < 1e-12);
        assert!(rescale_rational_check(&generic(Mode::Trigonometric), 2, &s).is_err());
    }

    #[test]
    fn optional_rescale_check_is_reported() {
        let opts = VerifyOptions {
            rescale_g: Some(2.0),
            ..Default::default()
        };
        let r = verify_equilibrium(&generic(Mode::Rational), 3, &opts);
        assert!(r.passed);
        assert!(r.rescale_deviation.unwrap() < 1e-10);
        let r = verify_equilibrium(&generic(Mode::Trigonometric), 3, &opts);
        assert!(!r.check("rescale").unwrap().passed);
    }
}
