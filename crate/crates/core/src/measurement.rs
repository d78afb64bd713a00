//! POVMs, HOVMs and the qubit compatibility predicates.
//!
//! A HOVM built from local measurements `A`, `B` and a conjunction `C` is
//!
//! ```text
//! W_ab = C_ab + (A_a - Σ_b C_ab)/d + (B_b - Σ_a C_ab)/d
//! ```
//!
//! and reproduces `A` and `B` as marginals for any conjunction. Whether it is
//! also positive decides compatibility; for two-outcome qubit measurements
//! with the sequential conjunction that coincides with the Busch criterion.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, PSD_TOL};

/// Tolerance for POVM/HOVM validity checks (Hermiticity, positivity, completeness).
pub const VALIDITY_TOL: f64 = 1e-10;
/// Slack on the Busch inequality.
pub const BUSCH_TOL: f64 = 1e-12;

/// Generalized measurement: PSD effects summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    dim: usize,
    effects: Vec<ComplexMatrix>,
}

/// Hermitian operator-valued measure on a `d × d` outcome grid, stored
/// row-major so element `(a, b)` sits at `a * d + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hovm {
    d: usize,
    dim: usize,
    elements: Vec<ComplexMatrix>,
}

fn completeness_defect(dim: usize, ops: &[ComplexMatrix]) -> f64 {
    let sum = ops.iter().fold(ComplexMatrix::zeros(dim), |acc, e| acc.add_ref(e));
    sum.max_abs_diff(&ComplexMatrix::identity(dim))
}

impl Povm {
    pub fn new(effects: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = effects
            .first()
            .map(ComplexMatrix::dim)
            .ok_or_else(|| Error::InvalidPovm("no effects".into()))?;
        for (k, e) in effects.iter().enumerate() {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch(dim, e.dim()));
            }
            let defect = e.hermiticity_defect();
            if defect > VALIDITY_TOL {
                return Err(Error::InvalidPovm(format!("effect {k} not Hermitian ({defect:e})")));
            }
            let min = e.min_eigenvalue()?;
            if min < -VALIDITY_TOL {
                return Err(Error::InvalidPovm(format!("effect {k} has eigenvalue {min:e}")));
            }
        }
        let defect = completeness_defect(dim, &effects);
        if defect > VALIDITY_TOL {
            return Err(Error::InvalidPovm(format!("effects sum to identity only within {defect:e}")));
        }
        Ok(Self { dim, effects })
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn effect(&self, k: usize) -> &ComplexMatrix {
        &self.effects[k]
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    /// Outcome probabilities `⟨ψ|E_k|ψ⟩` for a pure state.
    pub fn probabilities(&self, psi: &[Complex64]) -> Vec<f64> {
        self.effects.iter().map(|e| e.sandwich(psi, psi).re).collect()
    }

    /// Bloch vector `μ` when this is a two-outcome qubit POVM of the form
    /// `{(𝟙 ± μ·σ)/2}`; `None` for anything else.
    pub fn bloch_vector(&self) -> Option<[f64; 3]> {
        if self.dim != 2 || self.outcomes() != 2 {
            return None;
        }
        let e = &self.effects[0];
        let mu = [
            e.matmul(&ComplexMatrix::pauli_x()).trace().re,
            e.matmul(&ComplexMatrix::pauli_y()).trace().re,
            e.matmul(&ComplexMatrix::pauli_z()).trace().re,
        ];
        let rebuilt = bloch_povm(mu).ok()?;
        (rebuilt.effect(0).max_abs_diff(e) <= VALIDITY_TOL).then_some(mu)
    }

    pub fn to_json(&self) -> String {
        MeasurementJson::encode(self.outcomes(), self.dim, &self.effects).to_string()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire = MeasurementJson::parse(text)?;
        if wire.effects.len() != wire.d {
            return Err(Error::OutcomeCountMismatch { expected: wire.d, got: wire.effects.len() });
        }
        Self::new(wire.matrices()?)
    }
}

impl Hovm {
    pub fn new(d: usize, elements: Vec<ComplexMatrix>) -> Result<Self> {
        if d == 0 || elements.len() != d * d {
            return Err(Error::OutcomeCountMismatch { expected: d * d, got: elements.len() });
        }
        let dim = elements[0].dim();
        for (k, e) in elements.iter().enumerate() {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch(dim, e.dim()));
            }
            let defect = e.hermiticity_defect();
            if defect > VALIDITY_TOL {
                return Err(Error::InvalidHovm(format!("element {k} not Hermitian ({defect:e})")));
            }
        }
        let defect = completeness_defect(dim, &elements);
        if defect > VALIDITY_TOL {
            return Err(Error::InvalidHovm(format!("elements sum to identity only within {defect:e}")));
        }
        Ok(Self { d, dim, elements })
    }

    /// Outcomes per local measurement.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn element(&self, a: usize, b: usize) -> &ComplexMatrix {
        &self.elements[a * self.d + b]
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    /// Returns a copy with `delta` added to element `(a, b)`. The result is not
    /// revalidated; used to probe the marginality check.
    pub fn perturbed(&self, a: usize, b: usize, delta: &ComplexMatrix) -> Self {
        let mut out = self.clone();
        out.elements[a * self.d + b] = out.elements[a * self.d + b].add_ref(delta);
        out
    }

    pub fn to_json(&self) -> String {
        MeasurementJson::encode(self.d, self.dim, &self.elements).to_string()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire = MeasurementJson::parse(text)?;
        Self::new(wire.d, wire.matrices()?)
    }
}

/// Wire form `{"d": int, "dim": int, "effects": [[[re, im], ...], ...]}` with
/// each matrix flattened row-major.
#[derive(Debug, Serialize, Deserialize)]
struct MeasurementJson {
    d: usize,
    dim: usize,
    effects: Vec<Vec<[f64; 2]>>,
}

impl MeasurementJson {
    fn encode(d: usize, dim: usize, ops: &[ComplexMatrix]) -> serde_json::Value {
        let effects = ops
            .iter()
            .map(|m| m.as_slice().iter().map(|z| [z.re, z.im]).collect())
            .collect();
        serde_json::to_value(MeasurementJson { d, dim, effects }).expect("plain data serializes")
    }

    fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    fn matrices(&self) -> Result<Vec<ComplexMatrix>> {
        self.effects
            .iter()
            .map(|flat| {
                let data = flat.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
                ComplexMatrix::new(self.dim, data)
            })
            .collect()
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn check_bloch(v: [f64; 3]) -> Result<()> {
    let n = norm3(v);
    // tiny slack so that unit vectors built from trig functions are accepted
    if !(n <= 1.0 + 1e-12) {
        return Err(Error::BlochNormExceeded(n));
    }
    Ok(())
}

/// Two-outcome qubit POVM `{(𝟙 + bloch·σ)/2, (𝟙 − bloch·σ)/2}`.
pub fn bloch_povm(bloch: [f64; 3]) -> Result<Povm> {
    check_bloch(bloch)?;
    let id = ComplexMatrix::identity(2);
    let s = ComplexMatrix::bloch_operator(bloch);
    Povm::new(vec![id.add_ref(&s).scale(0.5), id.sub_ref(&s).scale(0.5)])
}

/// `A` along z and `B` along x, both with sharpness `lambda`.
pub fn mutually_unbiased_pair(lambda: f64) -> Result<(Povm, Povm)> {
    Ok((bloch_povm([0.0, 0.0, lambda])?, bloch_povm([lambda, 0.0, 0.0])?))
}

/// Lüders-type sequential measurement: `√A_a B_b √A_a`, outcome `(a, b)` at
/// index `a * second.outcomes() + b`.
pub fn sequential_povm(first: &Povm, second: &Povm) -> Result<Povm> {
    if first.dim() != second.dim() {
        return Err(Error::DimensionMismatch(first.dim(), second.dim()));
    }
    let mut effects = Vec::with_capacity(first.outcomes() * second.outcomes());
    for a in first.effects() {
        let root = a.psd_sqrt_with_tol(PSD_TOL)?;
        for b in second.effects() {
            effects.push(root.matmul(b).matmul(&root));
        }
    }
    Povm::new(effects)
}

/// HOVM from local measurements `a`, `b` and any `d²`-outcome conjunction `c`.
pub fn build_hovm(a: &Povm, b: &Povm, c: &Povm) -> Result<Hovm> {
    let d = a.outcomes();
    if b.outcomes() != d {
        return Err(Error::OutcomeCountMismatch { expected: d, got: b.outcomes() });
    }
    if c.outcomes() != d * d {
        return Err(Error::OutcomeCountMismatch { expected: d * d, got: c.outcomes() });
    }
    let dim = a.dim();
    for other in [b.dim(), c.dim()] {
        if other != dim {
            return Err(Error::DimensionMismatch(dim, other));
        }
    }
    let inv_d = 1.0 / d as f64;
    let c_at = |i: usize, j: usize| c.effect(i * d + j);
    let row_sums: Vec<ComplexMatrix> = (0..d)
        .map(|i| (0..d).fold(ComplexMatrix::zeros(dim), |acc, j| acc.add_ref(c_at(i, j))))
        .collect();
    let col_sums: Vec<ComplexMatrix> = (0..d)
        .map(|j| (0..d).fold(ComplexMatrix::zeros(dim), |acc, i| acc.add_ref(c_at(i, j))))
        .collect();
    let a_residual: Vec<ComplexMatrix> =
        (0..d).map(|i| a.effect(i).sub_ref(&row_sums[i]).scale(inv_d)).collect();
    let b_residual: Vec<ComplexMatrix> =
        (0..d).map(|j| b.effect(j).sub_ref(&col_sums[j]).scale(inv_d)).collect();

    let mut elements = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            elements.push(c_at(i, j).add_ref(&a_residual[i]).add_ref(&b_residual[j]));
        }
    }
    Hovm::new(d, elements)
}

/// HOVM of `(A, B, S_{A→B})`.
pub fn sequential_hovm(a: &Povm, b: &Povm) -> Result<Hovm> {
    build_hovm(a, b, &sequential_povm(a, b)?)
}

/// Largest deviation of the HOVM marginals from `a` and `b`.
pub fn marginality_defect(w: &Hovm, a: &Povm, b: &Povm) -> Result<f64> {
    let d = w.d();
    for m in [a, b] {
        if m.outcomes() != d {
            return Err(Error::OutcomeCountMismatch { expected: d, got: m.outcomes() });
        }
        if m.dim() != w.dim() {
            return Err(Error::DimensionMismatch(w.dim(), m.dim()));
        }
    }
    let zero = ComplexMatrix::zeros(w.dim());
    let mut worst = 0.0f64;
    for i in 0..d {
        let row = (0..d).fold(zero.clone(), |acc, j| acc.add_ref(w.element(i, j)));
        worst = worst.max(row.max_abs_diff(a.effect(i)));
    }
    for j in 0..d {
        let col = (0..d).fold(zero.clone(), |acc, i| acc.add_ref(w.element(i, j)));
        worst = worst.max(col.max_abs_diff(b.effect(j)));
    }
    Ok(worst)
}

/// True iff every HOVM element is PSD within `tol`, i.e. `w` is itself a joint POVM.
pub fn hovm_is_povm(w: &Hovm, tol: f64) -> bool {
    w.elements().iter().all(|e| {
        e.min_eigenvalue()
            .expect("HOVM elements are Hermitian by construction")
            >= -tol
    })
}

/// Busch criterion for two-outcome qubit measurements with Bloch vectors `mu`, `nu`.
pub fn busch_compatible(mu: [f64; 3], nu: [f64; 3]) -> Result<bool> {
    check_bloch(mu)?;
    check_bloch(nu)?;
    let plus = [mu[0] + nu[0], mu[1] + nu[1], mu[2] + nu[2]];
    let minus = [mu[0] - nu[0], mu[1] - nu[1], mu[2] - nu[2]];
    Ok(norm3(plus) + norm3(minus) <= 2.0 + BUSCH_TOL)
}

/// Evaluates both compatibility routes independently and reports whether they agree.
pub fn busch_equiv_hovm_check(mu: [f64; 3], nu: [f64; 3]) -> Result<bool> {
    let busch = busch_compatible(mu, nu)?;
    let w = sequential_hovm(&bloch_povm(mu)?, &bloch_povm(nu)?)?;
    Ok(busch == hovm_is_povm(&w, PSD_TOL))
}

/// Common sharpness `λ` at which the sequential HOVM of `(λ·mu_dir, λ·nu_dir)`
/// stops being a POVM, located by bisection to `tol`. `None` when the pair stays
/// compatible up to `λ = 1`.
pub fn boundary_sharpness(mu_dir: [f64; 3], nu_dir: [f64; 3], tol: f64) -> Result<Option<f64>> {
    let unit = |v: [f64; 3]| -> Result<[f64; 3]> {
        let n = norm3(v);
        if n == 0.0 {
            return Err(Error::ParamOutOfRange("direction must be nonzero".into()));
        }
        Ok([v[0] / n, v[1] / n, v[2] / n])
    };
    let (mu_dir, nu_dir) = (unit(mu_dir)?, unit(nu_dir)?);
    let positive_at = |lambda: f64| -> Result<bool> {
        let s = |v: [f64; 3]| [lambda * v[0], lambda * v[1], lambda * v[2]];
        let w = sequential_hovm(&bloch_povm(s(mu_dir))?, &bloch_povm(s(nu_dir))?)?;
        Ok(hovm_is_povm(&w, PSD_TOL))
    };
    if positive_at(1.0)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if positive_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}
