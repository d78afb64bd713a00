//! Fisher information of discrete models and of the OQ model, the pure-state
//! quantum Fisher information, Cramér–Rao bounds and the advantage figure.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::Hovm;
use crate::oq::{oq_with_derivatives, OqDistribution, POSITIVITY_TOL};
use crate::probe::{make_state, ProbeParams};

/// Cells with probability at or below this are treated as zero.
pub const ZERO_PROB: f64 = 1e-12;
/// A zero cell with a slope above this makes the information diverge.
pub const ZERO_SLOPE: f64 = 1e-9;
const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    /// `f64::INFINITY` when `diverged`.
    pub value: f64,
    pub diverged: bool,
}

impl FisherResult {
    pub fn finite(value: f64) -> Self {
        Self { value, diverged: false }
    }

    pub fn divergent() -> Self {
        Self { value: f64::INFINITY, diverged: true }
    }
}

impl fmt::Display for FisherResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.diverged {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.value)
        }
    }
}

/// `Σ_x (∂p_x)² / p_x` with the zero-cell conventions above.
pub fn fisher_discrete(probs: &[f64], derivs: &[f64]) -> Result<FisherResult> {
    if probs.len() != derivs.len() {
        return Err(Error::DimensionMismatch(probs.len(), derivs.len()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::NotNormalized(total));
    }
    let slope: f64 = derivs.iter().sum();
    if slope.abs() > SUM_TOL {
        return Err(Error::DerivativeNotTraceless(slope));
    }
    if let Some(&p) = probs.iter().find(|&&p| p < -POSITIVITY_TOL) {
        return Err(Error::NegativeOq(-p));
    }
    let mut acc = 0.0;
    for (&p, &dp) in probs.iter().zip(derivs) {
        if p <= ZERO_PROB {
            if dp.abs() > ZERO_SLOPE {
                return Ok(FisherResult::divergent());
            }
            continue;
        }
        acc += dp * dp / p;
    }
    Ok(FisherResult::finite(acc))
}

/// Fisher information of the OQ model along `params.target`. Refused on
/// negative tables.
pub fn oqfi(params: &ProbeParams, w: &Hovm) -> Result<FisherResult> {
    let state = make_state(params)?;
    let (values, derivs) = oq_with_derivatives(&state, w)?;
    let table = OqDistribution::from_values(values.chunks(w.d()).map(<[f64]>::to_vec).collect());
    if table.negativity > POSITIVITY_TOL {
        return Err(Error::NegativeOq(table.negativity));
    }
    fisher_discrete(&values, &derivs)
}

/// `4(⟨∂ψ|∂ψ⟩ − |⟨ψ|∂ψ⟩|²)` for the pure probe.
pub fn qfi_pure(params: &ProbeParams) -> Result<f64> {
    let s = make_state(params)?;
    let dd: f64 = s.derivative.iter().map(|z| z.norm_sqr()).sum();
    Ok(4.0 * (dd - s.overlap_with_derivative().norm_sqr()))
}

/// `log₁₀(ℐ_OQ / 2ℐ_Q)`; `+∞` when the OQFI diverges.
pub fn advantage(params: &ProbeParams, w: &Hovm) -> Result<f64> {
    let qfi = qfi_pure(params)?;
    if qfi <= ZERO_PROB {
        return Err(Error::ZeroQfi);
    }
    let fi = oqfi(params, w)?;
    if fi.diverged {
        return Ok(f64::INFINITY);
    }
    Ok((fi.value / (2.0 * qfi)).log10())
}

/// Cramér–Rao variance bound `1/(n ℐ)`; zero for divergent information.
pub fn cri_bound(fi: &FisherResult, n: u64) -> Result<f64> {
    if fi.diverged {
        return Ok(0.0);
    }
    if !(fi.value > 0.0) || n == 0 {
        return Err(Error::ZeroInformation);
    }
    Ok(1.0 / (n as f64 * fi.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{mutually_unbiased_pair, sequential_hovm};
    use crate::oq::evaluate_oq;
    use crate::probe::Target;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn example(lambda: f64) -> Hovm {
        let (a, b) = mutually_unbiased_pair(lambda).unwrap();
        sequential_hovm(&a, &b).unwrap()
    }

    #[test]
    fn discrete_examples() {
        let c = 0.3;
        let fi = fisher_discrete(&[0.5, 0.5], &[c, -c]).unwrap();
        assert!((fi.value - 4.0 * c * c).abs() < 1e-15);
        assert_eq!(fisher_discrete(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), FisherResult::finite(0.0));
        assert!(fisher_discrete(&[1.0, 0.0], &[0.1, -0.1]).unwrap().diverged);
    }

    #[test]
    fn discrete_errors() {
        assert!(matches!(fisher_discrete(&[0.5, 0.4], &[0.0, 0.0]), Err(Error::NotNormalized(_))));
        assert!(matches!(
            fisher_discrete(&[0.5, 0.5], &[0.1, 0.0]),
            Err(Error::DerivativeNotTraceless(_))
        ));
        assert!(matches!(fisher_discrete(&[1.0], &[0.0, 0.0]), Err(Error::DimensionMismatch(1, 2))));
    }

    #[test]
    fn oqfi_equator_closed_form() {
        for k in 0..=99 {
            let lambda = 0.99 * k as f64 / 99.0;
            let p = ProbeParams::new(FRAC_PI_2, 0.0, Target::Polar);
            let fi = oqfi(&p, &example(lambda)).unwrap();
            let expected = lambda * lambda / (1.0 - lambda * lambda);
            assert!((fi.value - expected).abs() <= 1e-9, "{lambda}");
        }
        let p = ProbeParams::new(FRAC_PI_2, 0.0, Target::Polar);
        let fi = oqfi(&p, &example(FRAC_1_SQRT_2)).unwrap();
        assert!((fi.value - 1.0).abs() < 1e-12);
        assert_eq!(oqfi(&p, &example(0.0)).unwrap().value, 0.0);
    }

    #[test]
    fn oqfi_diverges_for_sharp_measurements() {
        let p = ProbeParams::new(FRAC_PI_2, 0.0, Target::Polar);
        let fi = oqfi(&p, &example(1.0)).unwrap();
        assert!(fi.diverged);
        assert_eq!(advantage(&p, &example(1.0)).unwrap(), f64::INFINITY);
        assert_eq!(fi.to_string(), "inf");
    }

    #[test]
    fn oqfi_refuses_negative_tables() {
        let p = ProbeParams::new(PI / 4.0, 0.0, Target::Polar);
        assert!(matches!(oqfi(&p, &example(1.0)), Err(Error::NegativeOq(_))));
    }

    #[test]
    fn qfi_examples() {
        let p = ProbeParams::new(0.3, 2.0, Target::Polar);
        assert!((qfi_pure(&p).unwrap() - 1.0).abs() < 1e-12);
        let t = 0.7 * PI;
        let q = qfi_pure(&ProbeParams::new(t, 1.0, Target::Azimuthal)).unwrap();
        assert!((q - t.sin().powi(2)).abs() < 1e-12);
        assert!((q - 0.654).abs() < 1e-3);
        assert_eq!(qfi_pure(&ProbeParams::new(0.0, 1.0, Target::Azimuthal)).unwrap(), 0.0);
    }

    #[test]
    fn advantage_examples() {
        let p = ProbeParams::new(FRAC_PI_2, 0.0, Target::Polar);
        let a = advantage(&p, &example((2.0f64 / 3.0).sqrt())).unwrap();
        assert!(a.abs() < 1e-9);
        let a = advantage(&p, &example(FRAC_1_SQRT_2)).unwrap();
        assert!((a - 0.5f64.log10()).abs() < 1e-9);
        let pole = ProbeParams::new(0.0, 0.0, Target::Azimuthal);
        assert!(matches!(advantage(&pole, &example(0.5)), Err(Error::ZeroQfi)));
    }

    #[test]
    fn cri_examples() {
        assert!((cri_bound(&FisherResult::finite(1.0), 100_000).unwrap() - 1e-5).abs() < 1e-20);
        assert!((cri_bound(&FisherResult::finite(2.0), 100_000).unwrap() - 5e-6).abs() < 1e-20);
        let l2 = 0.81;
        let v = cri_bound(&FisherResult::finite(l2 / (1.0 - l2)), 100_000).unwrap();
        assert!((v - (1.0 - l2) / (l2 * 1e5)).abs() < 1e-18);
        assert!((v - 2.346e-6).abs() < 1e-9);
        assert_eq!(cri_bound(&FisherResult::divergent(), 10).unwrap(), 0.0);
        assert!(matches!(cri_bound(&FisherResult::finite(0.0), 10), Err(Error::ZeroInformation)));
    }

    #[test]
    fn oqfi_agrees_with_generic_discrete_route() {
        let w = example(0.9);
        let p = ProbeParams::new(1.3, 1.2, Target::Azimuthal);
        let oq = evaluate_oq(&make_state(&p).unwrap(), &w).unwrap();
        assert!(oq.negativity <= 1e-10);
        let h = 1e-6;
        let plus = evaluate_oq(&make_state(&p.with_value(p.phi + h)).unwrap(), &w).unwrap();
        let minus = evaluate_oq(&make_state(&p.with_value(p.phi - h)).unwrap(), &w).unwrap();
        let probs: Vec<f64> = oq.values.iter().flatten().copied().collect();
        let derivs: Vec<f64> = plus
            .values
            .iter()
            .flatten()
            .zip(minus.values.iter().flatten())
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        let numeric = fisher_discrete(&probs, &derivs).unwrap().value;
        let analytic = oqfi(&p, &w).unwrap().value;
        assert!((numeric - analytic).abs() / analytic < 1e-7);
    }
}
