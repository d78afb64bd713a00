//! Browser bindings: FI curves, advantage heatmaps and compatibility checks.
//!
//! Results come back as flat `Float64Array`s. `NaN` marks points where no
//! OQFI or advantage is defined (negative OQ table, or vanishing QFI) and
//! `Infinity` marks divergent information.

use oqmetro::sweep::{advantage_map, compat_report, fi_sweep};
use oqmetro::Target;
use wasm_bindgen::prelude::*;

fn parse_target(target: &str) -> Result<Target, String> {
    target.parse::<Target>().map_err(|e| e.to_string())
}

fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo];
    }
    (0..steps).map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64).collect()
}

/// `[λ…, oqfi…, qfi…]`, three blocks of `steps` values each, λ from 0 to `lambda_max`.
pub fn fi_curve_values(theta: f64, phi: f64, target: &str, lambda_max: f64, steps: usize) -> Result<Vec<f64>, String> {
    if !(0.0..=1.0).contains(&lambda_max) || steps < 2 {
        return Err("need 0 <= lambda_max <= 1 and at least 2 steps".into());
    }
    let lambdas = grid(0.0, lambda_max, steps);
    let rows = fi_sweep(&lambdas, &[theta], &[phi], parse_target(target)?).map_err(|e| e.to_string())?;
    let mut out = lambdas;
    out.extend(rows.iter().map(|r| r.oqfi.map_or(f64::NAN, |f| f.value)));
    out.extend(rows.iter().map(|r| r.qfi));
    Ok(out)
}

/// Advantage over a `steps × steps` grid with θ ∈ [0, π] along rows and
/// φ ∈ [0, π] along columns.
pub fn advantage_grid_values(lambda: f64, target: &str, steps: usize) -> Result<Vec<f64>, String> {
    if !(2..=400).contains(&steps) {
        return Err("steps must be between 2 and 400".into());
    }
    let axis = grid(0.0, std::f64::consts::PI, steps);
    let cells = advantage_map(lambda, &axis, &axis, parse_target(target)?).map_err(|e| e.to_string())?;
    Ok(cells.iter().map(|c| c.advantage.unwrap_or(f64::NAN)).collect())
}

/// `[busch, hovm_povm, boundary]` with booleans as 0/1 and `NaN` when no
/// boundary applies.
pub fn compat_values(mu: [f64; 3], nu: [f64; 3]) -> Result<Vec<f64>, String> {
    let r = compat_report(mu, nu).map_err(|e| e.to_string())?;
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    Ok(vec![flag(r.busch), flag(r.hovm_povm), r.boundary_lambda.unwrap_or(f64::NAN)])
}

#[wasm_bindgen]
pub fn fi_curve(theta: f64, phi: f64, target: &str, lambda_max: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    fi_curve_values(theta, phi, target, lambda_max, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn advantage_grid(lambda: f64, target: &str, steps: usize) -> Result<Vec<f64>, JsError> {
    advantage_grid_values(lambda, target, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn compat_check(mx: f64, my: f64, mz: f64, nx: f64, ny: f64, nz: f64) -> Result<Vec<f64>, JsError> {
    compat_values([mx, my, mz], [nx, ny, nz]).map_err(|e| JsError::new(&e))
}
