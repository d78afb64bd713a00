use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use oqmetro::estimation::{run_trials, Domain, Sampling, TrialConfig, CSV_HEADER};
use oqmetro::matrix::PSD_TOL;
use oqmetro::measurement::{hovm_is_povm, sequential_hovm, Povm};
use oqmetro::sweep::{advantage_map as map_cells, compat_report, fi_sweep as sweep_rows};
use oqmetro::{Error, ProbeParams, Target};

use crate::output::{csv_num, emit, json_num, json_opt};
use crate::values::{parse_interval, parse_values, parse_vec3};
use crate::{AdvantageMapArgs, CliError, CompatArgs, EstimateArgs, FiSweepArgs, Format, MeasurementArgs};

const FI_SWEEP_SCHEMA: &str = "oqmetro fi-sweep v1";
const ADVANTAGE_MAP_SCHEMA: &str = "oqmetro advantage-map v1";
const ESTIMATE_SCHEMA: &str = "oqmetro estimate v1";
const COMPAT_SCHEMA: &str = "oqmetro compat v1";

fn values_or(arg: &Option<String>, default: &str, name: &str) -> Result<Vec<f64>, CliError> {
    let text = arg.as_deref().unwrap_or(default);
    let v = parse_values(text).map_err(|e| CliError::Config(format!("--{name}: {e}")))?;
    if v.is_empty() {
        return Err(CliError::Config(format!("--{name}: no values")));
    }
    Ok(v)
}

fn single(values: Vec<f64>, name: &str) -> Result<f64, CliError> {
    match values.as_slice() {
        &[x] => Ok(x),
        _ => Err(CliError::Config(format!("--{name} takes a single value here"))),
    }
}

fn target_str(t: Target) -> &'static str {
    t.as_str()
}

pub fn fi_sweep(args: &FiSweepArgs) -> Result<(), CliError> {
    let c = &args.common;
    let lambdas = values_or(&c.lambda, "0:0.995:0.005", "lambda")?;
    let thetas = values_or(&c.theta, "pi/2", "theta")?;
    let phis = values_or(&c.phi, "0", "phi")?;
    let target: Target = c.target.into();
    let rows = sweep_rows(&lambdas, &thetas, &phis, target)?;

    let text = match c.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = format!("# {FI_SWEEP_SCHEMA}\nlambda,theta,phi,target,oqfi,qfi,negativity,positive\n");
            for r in &rows {
                let fi = r.oqfi.map(|f| f.to_string()).unwrap_or_default();
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    r.lambda,
                    r.theta,
                    r.phi,
                    target_str(r.target),
                    fi,
                    r.qfi,
                    r.negativity,
                    r.positive
                );
            }
            s
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "lambda": r.lambda,
                        "theta": r.theta,
                        "phi": r.phi,
                        "target": target_str(r.target),
                        "oqfi": json_opt(r.oqfi.map(|f| f.value)),
                        "qfi": r.qfi,
                        "negativity": r.negativity,
                        "positive": r.positive,
                    })
                })
                .collect();
            json!({ "schema": FI_SWEEP_SCHEMA, "rows": rows }).to_string() + "\n"
        }
    };
    emit(c.out.as_deref(), &text)
}

pub fn advantage_map(args: &AdvantageMapArgs) -> Result<(), CliError> {
    let c = &args.common;
    let lambda = single(values_or(&c.lambda, "0.995", "lambda")?, "lambda")?;
    let thetas = values_or(&c.theta, "0:pi:pi/100", "theta")?;
    let phis = values_or(&c.phi, "0:pi:pi/100", "phi")?;
    let target: Target = c.target.into();
    let cells = map_cells(lambda, &thetas, &phis, target)?;

    let text = match c.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = format!("# {ADVANTAGE_MAP_SCHEMA} lambda={lambda} target={}\n", target_str(target));
            s.push_str("theta,phi,advantage,negativity\n");
            for cell in &cells {
                let adv = cell.advantage.map(csv_num).unwrap_or_default();
                let _ = writeln!(s, "{},{},{},{}", cell.theta, cell.phi, adv, cell.negativity);
            }
            s
        }
        Format::Json => {
            let cells: Vec<Value> = cells
                .iter()
                .map(|cell| {
                    json!({
                        "theta": cell.theta,
                        "phi": cell.phi,
                        "advantage": json_opt(cell.advantage),
                        "negativity": cell.negativity,
                    })
                })
                .collect();
            json!({
                "schema": ADVANTAGE_MAP_SCHEMA,
                "lambda": lambda,
                "target": target_str(target),
                "cells": cells,
            })
            .to_string()
                + "\n"
        }
    };
    emit(c.out.as_deref(), &text)
}

fn read_povm(path: &Path) -> Result<Povm, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Povm::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

enum Pair {
    Bloch([f64; 3], [f64; 3]),
    General(Povm, Povm),
}

/// The custom measurement pair, if one was given.
fn custom_pair(m: &MeasurementArgs) -> Result<Option<Pair>, CliError> {
    if let (Some(mu), Some(nu)) = (&m.mu, &m.nu) {
        let mu = parse_vec3(mu).map_err(|e| CliError::Config(format!("--mu: {e}")))?;
        let nu = parse_vec3(nu).map_err(|e| CliError::Config(format!("--nu: {e}")))?;
        return Ok(Some(Pair::Bloch(mu, nu)));
    }
    if let (Some(pa), Some(pb)) = (&m.povm_a, &m.povm_b) {
        let (a, b) = (read_povm(pa)?, read_povm(pb)?);
        return Ok(Some(match (a.bloch_vector(), b.bloch_vector()) {
            (Some(mu), Some(nu)) => Pair::Bloch(mu, nu),
            _ => Pair::General(a, b),
        }));
    }
    Ok(None)
}

/// Pairs up θ and φ values; a single value on either side is broadcast.
fn segment(thetas: &[f64], phis: &[f64]) -> Result<Vec<(f64, f64)>, CliError> {
    match (thetas.len(), phis.len()) {
        (1, _) => Ok(phis.iter().map(|&p| (thetas[0], p)).collect()),
        (_, 1) => Ok(thetas.iter().map(|&t| (t, phis[0])).collect()),
        (m, n) if m == n => Ok(thetas.iter().copied().zip(phis.iter().copied()).collect()),
        (m, n) => Err(CliError::Config(format!(
            "--theta has {m} values and --phi has {n}; lengths must match or one must be a single value"
        ))),
    }
}

pub fn estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let c = &args.common;
    let target: Target = c.target.into();
    let (Some(theta), Some(phi)) = (&c.theta, &c.phi) else {
        return Err(CliError::Config("estimate needs both --theta and --phi".into()));
    };
    let points = segment(
        &values_or(&Some(theta.clone()), "", "theta")?,
        &values_or(&Some(phi.clone()), "", "phi")?,
    )?;
    let lambda = single(values_or(&c.lambda, "0.995", "lambda")?, "lambda")?;
    let bloch = match custom_pair(&args.measurement)? {
        None => None,
        Some(Pair::Bloch(mu, nu)) => Some((mu, nu)),
        Some(Pair::General(..)) => {
            return Err(CliError::Config(
                "estimation supports two-outcome qubit measurements of the form (1 ± m·σ)/2 only".into(),
            ))
        }
    };
    let domain = match &args.domain {
        Some(text) => {
            let (lo, hi) = parse_interval(text).map_err(|e| CliError::Config(format!("--domain: {e}")))?;
            Domain::new(lo, hi)
        }
        None => Domain::full(),
    };

    let configs: Vec<TrialConfig> = points
        .iter()
        .map(|&(theta, phi)| {
            let mut cfg = TrialConfig::new(ProbeParams::new(theta, phi, target), lambda, c.n, c.trials, c.seed);
            cfg.bloch = bloch;
            cfg.domain = domain;
            cfg.sampling = if args.expected { Sampling::Expected } else { Sampling::Monte };
            cfg.validate().map(|()| cfg)
        })
        .collect::<Result<_, _>>()?;

    let mut csv = format!("# {ESTIMATE_SCHEMA}\n{CSV_HEADER},advantage\n");
    let mut json_points = Vec::new();
    let mut failed = Vec::new();
    for cfg in &configs {
        let (theta, phi) = (cfg.params.theta, cfg.params.phi);
        match run_trials(cfg) {
            Ok(summary) => {
                let adv = csv_num(summary.advantage);
                for line in summary.csv_rows().lines() {
                    let _ = writeln!(csv, "{line},{adv}");
                }
                let estimators: Vec<Value> = summary
                    .estimators()
                    .iter()
                    .map(|s| {
                        json!({
                            "estimator": s.estimator.as_str(),
                            "completed": s.completed,
                            "mean_estimate": json_num(s.mean_estimate),
                            "emp_var": json_num(s.emp_var),
                            "pred_var": json_num(s.pred_var),
                            "omission_rate": s.omission_rate,
                            "ratio": json_num(s.ratio),
                            "emp_ratio": json_num(s.emp_ratio),
                        })
                    })
                    .collect();
                json_points.push(json!({
                    "theta0": theta,
                    "phi0": phi,
                    "status": "ok",
                    "advantage": json_num(summary.advantage),
                    "qfi": summary.qfi,
                    "negative_count_rate": summary.negative_count_rate,
                    "estimators": estimators,
                }));
            }
            Err(Error::AllTrialsOmitted) => {
                let _ = writeln!(csv, "# all trials omitted at theta0={theta},phi0={phi}");
                json_points.push(json!({ "theta0": theta, "phi0": phi, "status": "all_trials_omitted" }));
                failed.push((theta, phi));
            }
            Err(e) => return Err(e.into()),
        }
    }

    let text = match c.format.unwrap_or(Format::Csv) {
        Format::Csv => csv,
        Format::Json => {
            let lambda_field = match bloch {
                Some((mu, nu)) => json!({ "mu": mu, "nu": nu }),
                None => json!(lambda),
            };
            json!({
                "schema": ESTIMATE_SCHEMA,
                "target": target_str(target),
                "lambda": lambda_field,
                "n": c.n,
                "trials": c.trials,
                "seed": c.seed,
                "points": json_points,
            })
            .to_string()
                + "\n"
        }
    };
    emit(c.out.as_deref(), &text)?;
    if failed.is_empty() {
        Ok(())
    } else {
        let list: Vec<String> = failed.iter().map(|(t, p)| format!("({t}, {p})")).collect();
        Err(CliError::Statistical(format!("all trials omitted at {}", list.join(", "))))
    }
}

pub fn compat(args: &CompatArgs) -> Result<(), CliError> {
    let c = &args.common;
    let (busch, hovm_povm, boundary) = match custom_pair(&args.measurement)? {
        Some(Pair::Bloch(mu, nu)) => {
            let r = compat_report(mu, nu)?;
            (Some(r.busch), r.hovm_povm, r.boundary_lambda)
        }
        Some(Pair::General(a, b)) => {
            let w = sequential_hovm(&a, &b)?;
            (None, hovm_is_povm(&w, PSD_TOL), None)
        }
        None => {
            let Some(text) = &c.lambda else {
                return Err(CliError::Config("compat needs --lambda, --mu/--nu or --povm-a/--povm-b".into()));
            };
            let lambda = single(values_or(&Some(text.clone()), "", "lambda")?, "lambda")?;
            if !(0.0..=1.0).contains(&lambda) {
                return Err(Error::BlochNormExceeded(lambda).into());
            }
            let r = compat_report([0.0, 0.0, lambda], [lambda, 0.0, 0.0])?;
            (Some(r.busch), r.hovm_povm, r.boundary_lambda)
        }
    };
    if busch.is_some_and(|b| b != hovm_povm) {
        return Err(CliError::Statistical(format!(
            "compatibility verdicts disagree: busch={} hovm_povm={hovm_povm}",
            busch.unwrap_or_default()
        )));
    }

    let text = match c.format.unwrap_or(Format::Json) {
        Format::Json => {
            json!({ "busch": busch, "hovm_povm": hovm_povm, "boundary_lambda": json_opt(boundary) }).to_string() + "\n"
        }
        Format::Csv => {
            let opt = |b: Option<bool>| b.map(|b| b.to_string()).unwrap_or_default();
            format!(
                "# {COMPAT_SCHEMA}\nbusch,hovm_povm,boundary_lambda\n{},{},{}\n",
                opt(busch),
                hovm_povm,
                boundary.map(csv_num).unwrap_or_default()
            )
        }
    };
    emit(c.out.as_deref(), &text)
}
