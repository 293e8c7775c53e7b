use std::fmt;
use std::path::Path;

use bcrs_core::equilibrium::{
    bethe_residual_normalized, ground_state_energy, minimize_hamiltonian_oracle,
    verify_equilibrium, Check, OracleOptions, VerifyOptions,
};
use bcrs_core::polynomials::monic_eval;
use bcrs_core::roots::find_zeros;
use bcrs_core::{Configuration, Coupling, CouplingParams, Mode, RootFindSettings};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::args::{Cli, Command, Common, Format, MinimizeArgs, SweepArgs, VerifyArgs};
use crate::canonical::{self, format_float};
use crate::output::emit;

/// Minimization agrees with the zeros when these hold.
const ORACLE_DEVIATION_TOL: f64 = 1e-5;
const ORACLE_ENERGY_TOL: f64 = 1e-8;
const ORACLE_MOMENTUM_TOL: f64 = 1e-5;

#[derive(Debug)]
pub enum CliError {
    /// Invalid request, detected before any computation (exit 2).
    Usage(String),
    /// The computation itself failed (exit 1).
    Compute(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Compute(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// A completed run; `passed` is false when a check or a sweep row failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub passed: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

fn compute<E: fmt::Display>(e: E) -> CliError {
    CliError::Compute(e.to_string())
}

fn couplings(a: &Common) -> Result<CouplingParams, CliError> {
    CouplingParams::new(a.mode.into(), a.g, [a.g1, a.g2, a.g3, a.g4])
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn degree(a: &Common) -> usize {
    a.n as usize
}

fn couplings_json(c: &CouplingParams) -> Value {
    let mut m = Map::new();
    for k in Coupling::ALL {
        m.insert(k.name().into(), json!(c.get(k)));
    }
    Value::Object(m)
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Trigonometric => "trigonometric",
        Mode::Rational => "rational",
    }
}

fn record(
    c: &CouplingParams,
    n: usize,
    zeros: &[f64],
    residuals: Value,
    checks: Value,
) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("mode".into(), json!(mode_name(c.mode())));
    m.insert("couplings".into(), couplings_json(c));
    m.insert("n".into(), json!(n));
    m.insert("zeros".into(), json!(zeros));
    m.insert("residuals".into(), residuals);
    m.insert("checks".into(), checks);
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m
}

fn check_json(
    name: &str,
    residual: f64,
    tolerance: f64,
    passed: bool,
    detail: Option<&str>,
) -> Value {
    let mut m = Map::new();
    m.insert("name".into(), json!(name));
    m.insert("residual".into(), json!(residual));
    m.insert("tolerance".into(), json!(tolerance));
    m.insert("passed".into(), json!(passed));
    if let Some(d) = detail {
        m.insert("detail".into(), json!(d));
    }
    Value::Object(m)
}

fn core_check_json(c: &Check) -> Value {
    check_json(
        c.name,
        c.residual,
        c.tolerance,
        c.passed,
        c.detail.as_deref(),
    )
}

fn csv_float(x: f64) -> String {
    if x.is_finite() {
        format_float(x)
    } else {
        x.to_string()
    }
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).map_err(compute)?;
    for r in rows {
        w.write_record(r).map_err(compute)?;
    }
    let bytes = w.into_inner().map_err(compute)?;
    String::from_utf8(bytes).map_err(compute)
}

fn positions_header(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |j| format!("{prefix}{j}"))
}

fn write_out(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    emit(text, path).map_err(|e| CliError::Compute(format!("cannot write output: {e}")))
}

fn write_json(m: Map<String, Value>, path: Option<&Path>) -> Result<(), CliError> {
    write_out(&canonical::to_string(&Value::Object(m)), path)
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Zeros(a) => cmd_zeros(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Minimize(a) => cmd_minimize(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

fn cmd_zeros(a: &Common) -> Result<Outcome, CliError> {
    let c = couplings(a)?;
    let n = degree(a);
    let zeros = find_zeros(&c, n, &RootFindSettings::default()).map_err(compute)?;
    let residual_max = zeros
        .positions()
        .iter()
        .map(|&x| monic_eval(&c, n, Complex64::new(x, 0.0)).map(|v| v.norm()))
        .try_fold(0.0f64, |m, r| r.map(|r| m.max(r)))
        .map_err(compute)?;
    let bethe = bethe_residual_normalized(&c, &zeros).map_err(compute)?;
    let path = a.output.as_deref();
    match a.format.unwrap_or(Format::Json) {
        Format::Json => {
            let residuals = json!({ "residual_max": residual_max, "bethe_residual_max": bethe });
            write_json(record(&c, n, zeros.positions(), residuals, json!([])), path)?;
        }
        Format::Csv => {
            let mut header: Vec<String> = ["mode", "n", "g", "g1", "g2", "g3", "g4"]
                .map(String::from)
                .to_vec();
            header.extend(positions_header("x", n));
            header.extend(["residual_max".into(), "bethe_residual_max".into()]);
            let mut row = vec![mode_name(c.mode()).to_string(), n.to_string()];
            row.extend(Coupling::ALL.iter().map(|&k| csv_float(c.get(k))));
            row.extend(zeros.positions().iter().map(|&x| csv_float(x)));
            row.extend([csv_float(residual_max), csv_float(bethe)]);
            write_out(&csv_text(&header, &[row])?, path)?;
        }
    }
    Ok(Outcome { passed: true })
}

fn tolerance(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!(
            "{name} must be a positive number, got {v}"
        )))
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let c = couplings(&a.common)?;
    let n = degree(&a.common);
    let mut opts = VerifyOptions::default();
    opts.tolerances.bethe = tolerance("--tol-bethe", a.tol_bethe)?;
    opts.tolerances.difference_equation = tolerance("--tol-diffeq", a.tol_diffeq)?;
    if a.check_rescale {
        if c.mode() != Mode::Rational {
            return Err(CliError::Usage(
                "--check-rescale applies to --mode rational only".into(),
            ));
        }
        c.with(Coupling::G, a.rescale_g)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        opts.rescale_g = Some(a.rescale_g);
    }
    let report = verify_equilibrium(&c, n, &opts);
    let path = a.common.output.as_deref();
    match a.common.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut residuals = Map::new();
            let mut put = |k: &str, v: Option<f64>| {
                if let Some(v) = v {
                    residuals.insert(k.into(), json!(v));
                }
            };
            put(
                "bethe_residual_max",
                report.check("bethe").map(|c| c.residual),
            );
            put("hamiltonian", report.hamiltonian);
            put("hamiltonian_double", report.hamiltonian_double);
            put("difference_equation_max", report.difference_equation_max);
            put("factorization_max", report.factorization_max);
            put("vanishing_identity_max", report.vanishing_identity_max);
            put("rescale_deviation", report.rescale_deviation);
            let checks = Value::Array(report.checks.iter().map(core_check_json).collect());
            let mut m = record(&c, n, &report.zeros, Value::Object(residuals), checks);
            m.insert("passed".into(), json!(report.passed));
            m.insert(
                "potentials".into(),
                Value::Array(
                    report
                        .potentials
                        .iter()
                        .map(|v| json!([v.re, v.im]))
                        .collect(),
                ),
            );
            write_json(m, path)?;
        }
        Format::Csv => {
            let header = ["check", "residual", "tolerance", "passed", "detail"].map(String::from);
            let rows: Vec<Vec<String>> = report
                .checks
                .iter()
                .map(|k| {
                    vec![
                        k.name.to_string(),
                        csv_float(k.residual),
                        csv_float(k.tolerance),
                        k.passed.to_string(),
                        k.detail.clone().unwrap_or_default(),
                    ]
                })
                .collect();
            write_out(&csv_text(&header, &rows)?, path)?;
        }
    }
    Ok(Outcome {
        passed: report.passed,
    })
}

fn cmd_minimize(a: &MinimizeArgs) -> Result<Outcome, CliError> {
    let c = couplings(&a.common)?;
    let n = degree(&a.common);
    let zeros = find_zeros(&c, n, &RootFindSettings::default()).map_err(compute)?;
    let out =
        minimize_hamiltonian_oracle(&c, n, a.starts as usize, a.seed, &OracleOptions::default())
            .map_err(compute)?;
    let positions = out.point.positions();
    let deviation = zeros.max_deviation(positions);
    let momentum = out
        .point
        .momenta()
        .iter()
        .fold(0.0f64, |m, p| m.max(p.abs()));
    let checks = [
        ("zero_deviation", deviation, ORACLE_DEVIATION_TOL),
        ("hamiltonian", out.value, ORACLE_ENERGY_TOL),
        ("momentum_max", momentum, ORACLE_MOMENTUM_TOL),
    ];
    let passed = checks.iter().all(|(_, r, t)| r < t);
    let path = a.common.output.as_deref();
    match a.common.format.unwrap_or(Format::Json) {
        Format::Json => {
            let residuals = json!({ "hamiltonian": out.value, "zero_deviation": deviation, "momentum_max": momentum });
            let checks = Value::Array(
                checks
                    .iter()
                    .map(|&(k, r, t)| check_json(k, r, t, r < t, None))
                    .collect(),
            );
            let mut m = record(&c, n, zeros.positions(), residuals, checks);
            let starts: Vec<Value> = out
                .starts
                .iter()
                .map(|s| json!({ "start": s.start, "hamiltonian": s.value, "iterations": s.iterations, "runs": s.runs }))
                .collect();
            m.insert(
                "minimization".into(),
                json!({
                    "seed": a.seed,
                    "hamiltonian": out.value,
                    "positions": positions.positions(),
                    "momenta": out.point.momenta(),
                    "starts": starts,
                }),
            );
            m.insert("passed".into(), json!(passed));
            write_json(m, path)?;
        }
        Format::Csv => {
            let mut header: Vec<String> = ["hamiltonian", "zero_deviation", "momentum_max"]
                .map(String::from)
                .to_vec();
            header.extend(positions_header("x", n));
            header.extend(positions_header("p", n));
            let mut row = vec![
                csv_float(out.value),
                csv_float(deviation),
                csv_float(momentum),
            ];
            row.extend(positions.positions().iter().map(|&x| csv_float(x)));
            row.extend(out.point.momenta().iter().map(|&p| csv_float(p)));
            write_out(&csv_text(&header, &[row])?, path)?;
        }
    }
    Ok(Outcome { passed })
}

/// Header of the sweep CSV.
pub fn sweep_header(n: usize) -> Vec<String> {
    let mut h = vec!["sweep_value".to_string()];
    h.extend(positions_header("x", n));
    h.extend(["hamiltonian", "bethe_residual_max", "error"].map(String::from));
    h
}

struct SweepRow {
    value: f64,
    result: Result<(Configuration, f64, f64), String>,
}

fn sweep_row(c: &CouplingParams, axis: Coupling, n: usize, value: f64) -> SweepRow {
    let result = (|| {
        let cv = c.with(axis, value)?;
        let zeros = find_zeros(&cv, n, &RootFindSettings::default())?;
        let energy = ground_state_energy(&cv, &zeros)?.value;
        let bethe = bethe_residual_normalized(&cv, &zeros)?;
        Ok::<_, bcrs_core::Error>((zeros, energy, bethe))
    })();
    SweepRow {
        value,
        result: result.map_err(|e| e.to_string()),
    }
}

fn cmd_sweep(a: &SweepArgs) -> Result<Outcome, CliError> {
    let c = couplings(&a.common)?;
    let n = degree(&a.common);
    let axis: Coupling = a.sweep_axis.into();
    let (from, to) = (a.sweep_from, a.sweep_to);
    if !(from.is_finite() && to.is_finite() && from < to) {
        return Err(CliError::Usage(format!(
            "sweep range must satisfy from < to, got [{from}, {to}]"
        )));
    }
    for end in [from, to] {
        c.with(axis, end)
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let steps = a.sweep_steps as usize;
    let values: Vec<f64> = (0..steps)
        .map(|i| {
            if i + 1 == steps {
                to
            } else {
                from + (to - from) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&v| sweep_row(&c, axis, n, v))
        .collect();
    let passed = rows.iter().all(|r| r.result.is_ok());
    let path = a.common.output.as_deref();
    match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let lines: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let mut line = vec![csv_float(r.value)];
                    match &r.result {
                        Ok((zeros, h, b)) => {
                            line.extend(zeros.positions().iter().map(|&x| csv_float(x)));
                            line.extend([csv_float(*h), csv_float(*b), String::new()]);
                        }
                        Err(e) => {
                            line.extend(std::iter::repeat(String::new()).take(n + 2));
                            line.push(e.clone());
                        }
                    }
                    line
                })
                .collect();
            write_out(&csv_text(&sweep_header(n), &lines)?, path)?;
        }
        Format::Json => {
            let json_rows: Vec<Value> = rows
                .iter()
                .map(|r| match &r.result {
                    Ok((zeros, h, b)) => json!({
                        "sweep_value": r.value,
                        "zeros": zeros.positions(),
                        "hamiltonian": h,
                        "bethe_residual_max": b,
                    }),
                    Err(e) => json!({ "sweep_value": r.value, "error": e }),
                })
                .collect();
            let ok = rows.iter().filter_map(|r| r.result.as_ref().ok());
            let (hmax, bmax) = ok.fold((0.0f64, 0.0f64), |(h, b), r| (h.max(r.1), b.max(r.2)));
            let residuals = json!({ "hamiltonian_max": hmax, "bethe_residual_max": bmax });
            let mut m = record(&c, n, &[], residuals, json!([]));
            m.insert(
                "sweep".into(),
                json!({ "axis": axis.name(), "rows": json_rows }),
            );
            m.insert("passed".into(), json!(passed));
            write_json(m, path)?;
        }
    }
    Ok(Outcome { passed })
}
