//! Multi-start simplex minimization of the Hamiltonian, independent of the
//! polynomial route.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::nelder_mead::{nelder_mead, SimplexOptions};
use super::{hamiltonian_from, potentials_unchecked, PhasePoint};
use crate::error::{Error, Result};
use crate::polynomials::{CouplingParams, Mode};
use crate::roots::Configuration;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub simplex: SimplexOptions,
    /// Simplex runs per start; each run restarts from the previous best.
    pub runs_per_start: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            simplex: SimplexOptions::default(),
            runs_per_start: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartSummary {
    pub start: usize,
    pub value: f64,
    pub iterations: usize,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleOutcome {
    pub point: PhasePoint,
    pub value: f64,
    pub starts: Vec<StartSummary>,
}

/// Smooth bijection from `ℝⁿ` onto ordered chamber configurations.
#[derive(Clone, Copy)]
struct ChamberMap {
    mode: Mode,
    /// Length unit of the rational gaps.
    unit: f64,
}

impl ChamberMap {
    fn new(c: &CouplingParams, n: usize) -> Self {
        let top = c.gr().iter().fold(0.0f64, |m, &v| m.max(v));
        Self {
            mode: c.mode(),
            unit: (top + n as f64 * c.g()) / n as f64,
        }
    }

    fn positions(&self, u: &[f64]) -> Vec<f64> {
        let mut prev = 0.0;
        u.iter()
            .map(|&t| {
                prev += match self.mode {
                    Mode::Trigonometric => (FRAC_PI_2 - prev) / (1.0 + (-t).exp()),
                    Mode::Rational => self.unit * t.exp(),
                };
                prev
            })
            .collect()
    }

    fn coordinates(&self, xs: &[f64]) -> Vec<f64> {
        let mut prev = 0.0;
        xs.iter()
            .map(|&x| {
                let t = match self.mode {
                    Mode::Trigonometric => {
                        let r = (x - prev) / (FRAC_PI_2 - prev);
                        (r / (1.0 - r)).ln()
                    }
                    Mode::Rational => ((x - prev) / self.unit).ln(),
                };
                prev = x;
                t
            })
            .collect()
    }

    fn random_start(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let end = match self.mode {
            Mode::Trigonometric => FRAC_PI_2,
            Mode::Rational => 2.0 * n as f64 * self.unit,
        };
        let mut xs: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0.02 * end..0.98 * end))
            .collect();
        xs.sort_by(f64::total_cmp);
        for j in 1..n {
            // keep the draw strictly ordered
            if xs[j] <= xs[j - 1] {
                xs[j] = xs[j - 1] + 1e-3 * end;
            }
        }
        self.coordinates(&xs)
    }
}

fn objective(c: &CouplingParams, map: &ChamberMap, n: usize, z: &[f64]) -> f64 {
    let (p, u) = z.split_at(n);
    let xs = map.positions(u);
    let end = c.mode().chamber_end();
    let ordered = xs.windows(2).all(|w| w[0] < w[1]);
    if !(ordered && xs[0] > 0.0 && xs[n - 1] < end && xs.iter().all(|x| x.is_finite())) {
        return f64::INFINITY;
    }
    hamiltonian_from(&potentials_unchecked(c, &xs, 1.0), p)
}

/// Runs `starts` seeded simplex minimizations of `(p, x) ↦ H` over
/// `ℝⁿ × chamber` and returns the best point. Start `i` draws its initial
/// point from a ChaCha8 stream selected by `(seed, i)`, so the outcome does
/// not depend on how the starts are scheduled.
pub fn minimize_hamiltonian_oracle(
    c: &CouplingParams,
    n: usize,
    starts: usize,
    seed: u64,
    opts: &OracleOptions,
) -> Result<OracleOutcome> {
    if n == 0 || starts == 0 {
        return Err(Error::InvalidParameter(
            "degree and number of starts must be positive".into(),
        ));
    }
    let map = ChamberMap::new(c, n);
    let f = |z: &[f64]| objective(c, &map, n, z);
    let results: Vec<(Vec<f64>, f64, StartSummary)> = (0..starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            z.extend(map.random_start(&mut rng, n));
            let mut value = f(&z);
            let mut iterations = 0;
            let mut runs = 0;
            while runs < opts.runs_per_start {
                runs += 1;
                let r = nelder_mead(f, &z, &opts.simplex);
                iterations += r.iterations;
                let improved = r.value < value;
                if improved {
                    z = r.point;
                    value = r.value;
                }
                if !improved || value == 0.0 {
                    break;
                }
            }
            (
                z,
                value,
                StartSummary {
                    start: i,
                    value,
                    iterations,
                    runs,
                },
            )
        })
        .collect();

    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.1 < results[best].1 {
            best = i;
        }
    }
    let (z, value, _) = &results[best];
    let (p, u) = z.split_at(n);
    let positions = Configuration::new(c.mode(), map.positions(u))?;
    let point = PhasePoint::new(p.to_vec(), positions)?;
    Ok(OracleOutcome {
        point,
        value: *value,
        starts: results.into_iter().map(|r| r.2).collect(),
    })
}
