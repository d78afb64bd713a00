//! Grid drivers behind the command-line tool and the browser demo.
//!
//! Rows come back in grid order regardless of how they were computed.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{advantage, oqfi, qfi_pure, FisherResult};
use crate::measurement::{
    boundary_sharpness, busch_compatible, bloch_povm, hovm_is_povm, mutually_unbiased_pair,
    sequential_hovm, Hovm,
};
use crate::matrix::PSD_TOL;
use crate::oq::{evaluate_oq, POSITIVITY_TOL};
use crate::probe::{make_state, ProbeParams, Target};

fn map_ordered<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// One point of an FI-versus-sharpness curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiSweepRow {
    pub lambda: f64,
    pub theta: f64,
    pub phi: f64,
    pub target: Target,
    /// `None` on negative tables, where the OQFI is undefined.
    pub oqfi: Option<FisherResult>,
    pub qfi: f64,
    pub negativity: f64,
    pub positive: bool,
}

fn unbiased_hovm(lambda: f64) -> Result<Hovm> {
    let (a, b) = mutually_unbiased_pair(lambda)?;
    sequential_hovm(&a, &b)
}

pub fn fi_point(lambda: f64, params: &ProbeParams) -> Result<FiSweepRow> {
    let w = unbiased_hovm(lambda)?;
    let oq = evaluate_oq(&make_state(params)?, &w)?;
    let positive = oq.negativity <= POSITIVITY_TOL;
    let fi = if positive { Some(oqfi(params, &w)?) } else { None };
    Ok(FiSweepRow {
        lambda,
        theta: params.theta,
        phi: params.phi,
        target: params.target,
        oqfi: fi,
        qfi: qfi_pure(params)?,
        negativity: oq.negativity,
        positive,
    })
}

/// OQFI and QFI over every `(θ, φ, λ)` combination, λ varying fastest.
pub fn fi_sweep(lambdas: &[f64], thetas: &[f64], phis: &[f64], target: Target) -> Result<Vec<FiSweepRow>> {
    let mut points = Vec::with_capacity(lambdas.len() * thetas.len() * phis.len());
    for &theta in thetas {
        for &phi in phis {
            for &lambda in lambdas {
                points.push((lambda, ProbeParams::new(theta, phi, target)));
            }
        }
    }
    map_ordered(points, |(l, p)| fi_point(l, &p)).into_iter().collect()
}

/// One cell of an advantage map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageCell {
    pub theta: f64,
    pub phi: f64,
    /// `None` where the table is negative or the QFI vanishes.
    pub advantage: Option<f64>,
    pub negativity: f64,
}

pub fn advantage_cell(w: &Hovm, params: &ProbeParams) -> Result<AdvantageCell> {
    let oq = evaluate_oq(&make_state(params)?, w)?;
    let value = if oq.negativity > POSITIVITY_TOL {
        None
    } else {
        match advantage(params, w) {
            Ok(a) => Some(a),
            Err(Error::ZeroQfi) => None,
            Err(e) => return Err(e),
        }
    };
    Ok(AdvantageCell { theta: params.theta, phi: params.phi, advantage: value, negativity: oq.negativity })
}

/// Advantage over a `θ × φ` grid, φ varying fastest.
pub fn advantage_map(lambda: f64, thetas: &[f64], phis: &[f64], target: Target) -> Result<Vec<AdvantageCell>> {
    let w = unbiased_hovm(lambda)?;
    let points: Vec<ProbeParams> = thetas
        .iter()
        .flat_map(|&t| phis.iter().map(move |&p| ProbeParams::new(t, p, target)))
        .collect();
    map_ordered(points, |p| advantage_cell(&w, &p)).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatReport {
    pub busch: bool,
    pub hovm_povm: bool,
    /// Bisected sharpness threshold, reported when both vectors share a norm.
    pub boundary_lambda: Option<f64>,
}

/// Both compatibility verdicts for `(μ, ν)`, plus the threshold sharpness of
/// the same geometry when the two measurements are equally sharp.
pub fn compat_report(mu: [f64; 3], nu: [f64; 3]) -> Result<CompatReport> {
    let busch = busch_compatible(mu, nu)?;
    let w = sequential_hovm(&bloch_povm(mu)?, &bloch_povm(nu)?)?;
    let hovm_povm = hovm_is_povm(&w, PSD_TOL);
    let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let (nm, nn) = (norm(mu), norm(nu));
    let boundary_lambda = if nm > 0.0 && (nm - nn).abs() <= 1e-12 {
        boundary_sharpness(mu, nu, 1e-12)?
    } else {
        None
    };
    Ok(CompatReport { busch, hovm_povm, boundary_lambda })
}
