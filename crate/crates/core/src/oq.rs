//! Operational quasiprobability `𝒲(a,b) = ⟨ψ|W_ab|ψ⟩` and its negativity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::Hovm;
use crate::probe::ProbeState;

/// Default tolerance on negativity for calling a table positive.
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Imaginary residue above which `⟨ψ|W|ψ⟩` is rejected as non-real.
pub const IMAG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OqDistribution {
    pub d: usize,
    pub values: Vec<Vec<f64>>,
    pub negativity: f64,
}

impl OqDistribution {
    pub fn from_values(values: Vec<Vec<f64>>) -> Self {
        let d = values.len();
        let abs_sum: f64 = values.iter().flatten().map(|v| v.abs()).sum();
        // Σ|𝒲| ≥ Σ𝒲 = 1; anything below zero here is rounding
        let negativity = (abs_sum - 1.0).max(0.0);
        Self { d, values, negativity }
    }

    pub fn value(&self, a: usize, b: usize) -> f64 {
        self.values[a][b]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().flatten().sum()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Σ_b 𝒲(a,b)` for each `a`.
    pub fn marginal_first(&self) -> Vec<f64> {
        self.values.iter().map(|row| row.iter().sum()).collect()
    }

    /// `Σ_a 𝒲(a,b)` for each `b`.
    pub fn marginal_second(&self) -> Vec<f64> {
        (0..self.d).map(|b| self.values.iter().map(|row| row[b]).sum()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }
}

fn check_dims(state: &ProbeState, w: &Hovm) -> Result<()> {
    if w.dim() != state.amplitudes.len() {
        return Err(Error::DimensionMismatch(state.amplitudes.len(), w.dim()));
    }
    Ok(())
}

pub fn evaluate_oq(state: &ProbeState, w: &Hovm) -> Result<OqDistribution> {
    check_dims(state, w)?;
    let psi = &state.amplitudes;
    let d = w.d();
    let mut values = vec![vec![0.0; d]; d];
    for (a, row) in values.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            let z = w.element(a, b).sandwich(psi, psi);
            if z.im.abs() > IMAG_TOL {
                return Err(Error::NonRealValue(z.im));
            }
            *cell = z.re;
        }
    }
    Ok(OqDistribution::from_values(values))
}

/// Cell values together with their derivatives `2 Re⟨∂ψ|W_ab|ψ⟩` along the
/// probe's target parameter, flattened row-major.
pub fn oq_with_derivatives(state: &ProbeState, w: &Hovm) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dims(state, w)?;
    let psi = &state.amplitudes;
    let dpsi = &state.derivative;
    let mut values = Vec::with_capacity(w.elements().len());
    let mut derivs = Vec::with_capacity(w.elements().len());
    for e in w.elements() {
        let z = e.sandwich(psi, psi);
        if z.im.abs() > IMAG_TOL {
            return Err(Error::NonRealValue(z.im));
        }
        values.push(z.re);
        derivs.push(2.0 * e.sandwich(dpsi, psi).re);
    }
    Ok((values, derivs))
}

pub fn is_positive(oq: &OqDistribution, tol: f64) -> bool {
    oq.negativity <= tol
}
