//! Monte-Carlo estimation on the OQ model.
//!
//! Two settings are sampled per trial: `B` alone and the sequential
//! measurement `S_{A→B}`, `n` shots each. Their counts are combined into
//!
//! ```text
//! c(a,b|W) = c(a,b|S) + (c(b|B) − Σ_a c(a,b|S)) / d
//! ```
//!
//! which is an unbiased estimate of `n·𝒲(a,b)`. The `A`-alone setting is not
//! needed because its contribution cancels against the marginal of `S`.
//!
//! Two estimators run on the same tables: maximum likelihood on the OQ model
//! and linear error propagation through `Ô = Σ (−1)^{ab} Ŵ_ab`.
//!
//! The variance each estimator reports for itself (`(n ℐ_obs)⁻¹` and the
//! error-propagation formula) describes the OQ model, not the two-setting data
//! that was actually drawn, so in the incompatible region it can be far below
//! the empirical spread of the estimates. Both figures are reported.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{advantage, qfi_pure};
use crate::measurement::{bloch_povm, mutually_unbiased_pair, sequential_povm, sequential_hovm, Hovm, Povm};
use crate::oq::oq_with_derivatives;
use crate::probe::{make_state, make_state_unchecked, ProbeParams, Target, ANGLE_SLACK};

/// Floor applied to model cells inside the logarithm.
pub const LOG_FLOOR: f64 = 1e-12;
/// `|∂⟨Ô⟩|` at or below this makes the error-propagation formula singular.
pub const SLOPE_TOL: f64 = 1e-9;
/// Observed FI at or below this counts as a flat likelihood. The central
/// second difference of a constant carries round-off of order 1e-8.
pub const FLAT_TOL: f64 = 1e-6;

pub const CSV_HEADER: &str =
    "target,theta0,phi0,lambda,n,trials,estimator,mean_estimate,emp_var,pred_var,omission_rate,ratio";

/// Raw and assembled counts for one trial. Sampled tables hold integral
/// values; expected-count tables hold `n` times the exact probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub n: u64,
    /// `c(b|B)`.
    pub counts_b: Vec<f64>,
    /// `c(a,b|S_{A→B})`, indexed `[a][b]`.
    pub counts_seq: Vec<Vec<f64>>,
    /// `c(a,b|W)`, indexed `[a][b]`.
    pub counts_w: Vec<Vec<f64>>,
}

impl CountTable {
    /// Builds `counts_w` from the two sampled settings.
    pub fn assemble(n: u64, counts_b: Vec<f64>, counts_seq: Vec<Vec<f64>>) -> Result<Self> {
        let d = counts_b.len();
        if counts_seq.len() != d || counts_seq.iter().any(|row| row.len() != d) {
            return Err(Error::OutcomeCountMismatch { expected: d, got: counts_seq.len() });
        }
        let inv_d = 1.0 / d as f64;
        let col_sums: Vec<f64> = (0..d).map(|b| counts_seq.iter().map(|row| row[b]).sum()).collect();
        let counts_w = counts_seq
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(b, &c)| c + (counts_b[b] - col_sums[b]) * inv_d)
                    .collect()
            })
            .collect();
        Ok(Self { n, counts_b, counts_seq, counts_w })
    }

    /// Noise-free table: every setting returns exactly `n` times its probabilities.
    pub fn expected(params: &ProbeParams, a: &Povm, b: &Povm, n: u64) -> Result<Self> {
        let (p_b, p_seq) = setting_probabilities(params, a, b)?;
        let nf = n as f64;
        Self::assemble(
            n,
            p_b.iter().map(|p| p * nf).collect(),
            p_seq.iter().map(|row| row.iter().map(|p| p * nf).collect()).collect(),
        )
    }

    pub fn d(&self) -> usize {
        self.counts_b.len()
    }

    pub fn min_w(&self) -> f64 {
        self.counts_w.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn total_w(&self) -> f64 {
        self.counts_w.iter().flatten().sum()
    }

    fn require_nonnegative(&self) -> Result<()> {
        let min = self.min_w();
        if min < 0.0 {
            return Err(Error::NegativeCounts(min));
        }
        Ok(())
    }
}

/// Outcome probabilities of `B` alone and of `S_{A→B}` for the probe.
fn setting_probabilities(params: &ProbeParams, a: &Povm, b: &Povm) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let psi = make_state(params)?.amplitudes;
    let seq = sequential_povm(a, b)?;
    let d = b.outcomes();
    let p_b = b.probabilities(&psi);
    let flat = seq.probabilities(&psi);
    let p_seq = flat.chunks(d).map(<[f64]>::to_vec).collect();
    Ok((p_b, p_seq))
}

/// Generator for substream `stream` of the master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Multinomial draw by sequential conditional binomials.
fn multinomial<R: rand::Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = probs.iter().map(|p| p.max(0.0)).collect();
    let mut mass_left: f64 = clamped.iter().sum();
    let mut left = n;
    let mut out = Vec::with_capacity(probs.len());
    for (k, &p) in clamped.iter().enumerate() {
        let draw = if k + 1 == clamped.len() {
            left
        } else if left == 0 || p <= 0.0 {
            0
        } else {
            let q = (p / mass_left).clamp(0.0, 1.0);
            Binomial::new(left, q).expect("probability clamped to [0, 1]").sample(rng)
        };
        out.push(draw as f64);
        left -= draw;
        mass_left -= p;
    }
    out
}

fn sample_with_streams(
    params: &ProbeParams,
    a: &Povm,
    b: &Povm,
    n: u64,
    seed: u64,
    trial: u64,
) -> Result<CountTable> {
    let (p_b, p_seq) = setting_probabilities(params, a, b)?;
    let d = p_b.len();
    let mut rng_b = stream_rng(seed, 2 * trial);
    let mut rng_s = stream_rng(seed, 2 * trial + 1);
    let counts_b = multinomial(&mut rng_b, n, &p_b);
    let flat: Vec<f64> = p_seq.iter().flatten().copied().collect();
    let counts_seq = multinomial(&mut rng_s, n, &flat).chunks(d).map(<[f64]>::to_vec).collect();
    CountTable::assemble(n, counts_b, counts_seq)
}

/// Draws `n` shots of `B` and `n` shots of `S_{A→B}` on the probe. Deterministic in `seed`.
pub fn sample_counts(params: &ProbeParams, a: &Povm, b: &Povm, n: u64, seed: u64) -> Result<CountTable> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    sample_with_streams(params, a, b, n, seed, 0)
}

/// OQ cells as a function of the estimated parameter.
struct Model<'a> {
    w: &'a Hovm,
    target: Target,
    fixed_other: f64,
}

impl Model<'_> {
    fn params(&self, g: f64) -> ProbeParams {
        ProbeParams::from_target(self.target, g, self.fixed_other)
    }

    fn cells_into(&self, g: f64, out: &mut Vec<f64>) {
        out.clear();
        let psi: [Complex64; 2] = make_state_unchecked(&self.params(g)).amplitudes;
        out.extend(self.w.elements().iter().map(|e| e.sandwich(&psi, &psi).re));
    }

    fn log_likelihood(&self, counts: &CountTable, g: f64, scratch: &mut Vec<f64>) -> f64 {
        self.cells_into(g, scratch);
        let n = counts.n as f64;
        counts
            .counts_w
            .iter()
            .flatten()
            .zip(scratch.iter())
            .map(|(c, p)| c * p.max(LOG_FLOOR).ln())
            .sum::<f64>()
            / n
    }

    fn observable_mean(&self, g: f64, scratch: &mut Vec<f64>) -> f64 {
        self.cells_into(g, scratch);
        let d = self.w.d();
        scratch.iter().enumerate().map(|(k, p)| parity(k / d, k % d) * p).sum()
    }

    fn check_dims(&self, counts: &CountTable) -> Result<()> {
        if counts.d() != self.w.d() {
            return Err(Error::OutcomeCountMismatch { expected: self.w.d(), got: counts.d() });
        }
        if self.w.dim() != 2 {
            return Err(Error::DimensionMismatch(2, self.w.dim()));
        }
        Ok(())
    }
}

/// `(−1)^{ab}`.
fn parity(a: usize, b: usize) -> f64 {
    if (a * b).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Closed search interval for the estimated parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// `[0, π]`, used for both angles.
    pub fn full() -> Self {
        Self { lo: 0.0, hi: PI }
    }

    pub fn contains(&self, g: f64) -> bool {
        (self.lo..=self.hi).contains(&g)
    }

    pub fn validate(&self, target: Target) -> Result<()> {
        let upper = match target {
            Target::Polar => PI,
            Target::Azimuthal => 2.0 * PI,
        };
        if !(self.lo < self.hi) || self.lo < -ANGLE_SLACK || self.hi > upper + ANGLE_SLACK {
            return Err(Error::InvalidConfig(format!(
                "search domain [{}, {}] invalid for {target}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

impl Default for Domain {
    fn default() -> Self {
        Self::full()
    }
}

/// Numerical knobs shared by both estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    /// Coarse grid spacing in radians.
    pub grid_step: f64,
    /// Final bracket width of the golden-section refinement.
    pub tol: f64,
    /// Step of the central second difference for the observed FI.
    pub curvature_step: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self { grid_step: 1e-3, tol: 1e-8, curvature_step: 1e-4 }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        // ties keep the lower bracket so plateaus resolve toward smaller values
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Grid scan followed by golden-section refinement around the best grid point.
/// Ties on the grid go to the smallest parameter.
fn grid_then_golden<F: FnMut(f64) -> f64>(mut f: F, domain: Domain, opts: &EstimatorOptions) -> f64 {
    let steps = ((domain.hi - domain.lo) / opts.grid_step).ceil().max(1.0) as usize;
    let at = |k: usize| (domain.lo + k as f64 * opts.grid_step).min(domain.hi);
    let mut best_k = 0;
    let mut best = f(at(0));
    for k in 1..=steps {
        let v = f(at(k));
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let lo = at(best_k.saturating_sub(1));
    let hi = at((best_k + 1).min(steps));
    let refined = golden_section_max(&mut f, lo, hi, opts.tol);
    // keep the grid point if refinement wandered onto a lower value
    if f(refined) >= best {
        refined
    } else {
        at(best_k)
    }
}

/// Per-trial estimator output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub estimate: f64,
    pub observed_fi: f64,
    pub variance_estimate: f64,
    pub omitted: bool,
}

impl TrialResult {
    pub fn omitted() -> Self {
        Self { estimate: f64::NAN, observed_fi: f64::NAN, variance_estimate: f64::NAN, omitted: true }
    }
}

/// `(1/n) Σ c(a,b|W) log max(𝒲(a,b|ψ_g), 1e-12)`.
pub fn log_likelihood(counts: &CountTable, g: f64, fixed_other: f64, target: Target, w: &Hovm) -> Result<f64> {
    let model = Model { w, target, fixed_other };
    model.check_dims(counts)?;
    counts.require_nonnegative()?;
    Ok(model.log_likelihood(counts, g, &mut Vec::with_capacity(4)))
}

pub fn mle_estimate(
    counts: &CountTable,
    target: Target,
    fixed_other: f64,
    w: &Hovm,
    domain: Domain,
) -> Result<TrialResult> {
    mle_estimate_with(counts, target, fixed_other, w, domain, &EstimatorOptions::default())
}

pub fn mle_estimate_with(
    counts: &CountTable,
    target: Target,
    fixed_other: f64,
    w: &Hovm,
    domain: Domain,
    opts: &EstimatorOptions,
) -> Result<TrialResult> {
    let model = Model { w, target, fixed_other };
    model.check_dims(counts)?;
    domain.validate(target)?;
    counts.require_nonnegative()?;
    let mut scratch = Vec::with_capacity(4);
    let mut ll = |g: f64| model.log_likelihood(counts, g, &mut scratch);
    let estimate = grid_then_golden(&mut ll, domain, opts);
    let h = opts.curvature_step;
    let curvature = (ll(estimate + h) - 2.0 * ll(estimate) + ll(estimate - h)) / (h * h);
    let observed_fi = -curvature;
    if !(observed_fi > FLAT_TOL) {
        return Err(Error::FlatLikelihood(observed_fi));
    }
    Ok(TrialResult {
        estimate,
        observed_fi,
        variance_estimate: 1.0 / (counts.n as f64 * observed_fi),
        omitted: false,
    })
}

/// `⟨Ô⟩_g` and `∂_g⟨Ô⟩_g` for `Ô = Σ (−1)^{ab} Ŵ_ab`.
pub fn observable_mean_and_slope(params: &ProbeParams, w: &Hovm) -> Result<(f64, f64)> {
    let (values, derivs) = oq_with_derivatives(&make_state(params)?, w)?;
    let d = w.d();
    let mut mean = 0.0;
    let mut slope = 0.0;
    for k in 0..values.len() {
        let s = parity(k / d, k % d);
        mean += s * values[k];
        slope += s * derivs[k];
    }
    Ok((mean, slope))
}

/// `(1/n) Σ (−1)^{ab} c(a,b|W)`.
pub fn observed_mean(counts: &CountTable) -> f64 {
    let mut acc = 0.0;
    for (a, row) in counts.counts_w.iter().enumerate() {
        for (b, c) in row.iter().enumerate() {
            acc += parity(a, b) * c;
        }
    }
    acc / counts.n as f64
}

pub fn lep_estimate(
    counts: &CountTable,
    target: Target,
    fixed_other: f64,
    w: &Hovm,
    domain: Domain,
) -> Result<TrialResult> {
    lep_estimate_with(counts, target, fixed_other, w, domain, &EstimatorOptions::default())
}

pub fn lep_estimate_with(
    counts: &CountTable,
    target: Target,
    fixed_other: f64,
    w: &Hovm,
    domain: Domain,
    opts: &EstimatorOptions,
) -> Result<TrialResult> {
    let model = Model { w, target, fixed_other };
    model.check_dims(counts)?;
    domain.validate(target)?;
    counts.require_nonnegative()?;
    let observed = observed_mean(counts);
    let mut scratch = Vec::with_capacity(4);
    let neg_residual = |g: f64| {
        let r = model.observable_mean(g, &mut scratch) - observed;
        -(r * r)
    };
    let estimate = grid_then_golden(neg_residual, domain, opts);
    let (mean, slope) = observable_mean_and_slope(&model.params(estimate), w)?;
    if slope.abs() <= SLOPE_TOL {
        return Err(Error::ZeroSlope(slope));
    }
    // outcome labels (−1)^{ab} square to one
    let spread = 1.0 - mean * mean;
    Ok(TrialResult {
        estimate,
        observed_fi: f64::NAN,
        variance_estimate: spread / (counts.n as f64 * slope * slope),
        omitted: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    Mle,
    Lep,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Mle => "mle",
            Estimator::Lep => "lep",
        }
    }
}

/// How count tables are produced in a trial run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampling {
    /// Seeded multinomial draws.
    Monte,
    /// Exact expected counts, no noise.
    Expected,
}

/// A Monte-Carlo experiment at one true parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    /// True probe; `params.target` selects the estimated angle.
    pub params: ProbeParams,
    /// Sharpness of the mutually unbiased pair (ignored when `bloch` is set).
    pub lambda: f64,
    /// Optional custom Bloch vectors `(μ, ν)` for `A` and `B`.
    pub bloch: Option<([f64; 3], [f64; 3])>,
    pub n: u64,
    pub trials: usize,
    pub seed: u64,
    pub domain: Domain,
    pub sampling: Sampling,
    pub options: EstimatorOptions,
}

impl TrialConfig {
    pub fn new(params: ProbeParams, lambda: f64, n: u64, trials: usize, seed: u64) -> Self {
        Self {
            params,
            lambda,
            bloch: None,
            n,
            trials,
            seed,
            domain: Domain::full(),
            sampling: Sampling::Monte,
            options: EstimatorOptions::default(),
        }
    }

    /// Checks everything `run_trials` would reject before sampling.
    pub fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return Err(Error::InvalidConfig("at least 2 trials are needed for a variance".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        self.params.validate()?;
        self.domain.validate(self.params.target)?;
        self.measurements()?;
        Ok(())
    }

    pub fn measurements(&self) -> Result<(Povm, Povm)> {
        match self.bloch {
            Some((mu, nu)) => Ok((bloch_povm(mu)?, bloch_povm(nu)?)),
            None => mutually_unbiased_pair(self.lambda),
        }
    }
}

/// Aggregate over the completed trials of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub completed: usize,
    pub mean_estimate: f64,
    /// Sample variance of the estimates (unbiased, `trials − 1` denominator).
    pub emp_var: f64,
    /// Mean of the per-trial variance estimates.
    pub pred_var: f64,
    pub omission_rate: f64,
    /// `log₁₀(Δ²g_Q / 2·pred_var)` with `Δ²g_Q = (n ℐ_Q)⁻¹`.
    pub ratio: f64,
    /// Same ratio computed from `emp_var`.
    pub emp_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub config: TrialConfig,
    /// Theoretic advantage at the true point.
    pub advantage: f64,
    pub qfi: f64,
    /// Fraction of trials whose assembled counts went negative.
    pub negative_count_rate: f64,
    pub mle: EstimatorSummary,
    pub lep: EstimatorSummary,
}

impl TrialSummary {
    pub fn estimators(&self) -> [&EstimatorSummary; 2] {
        [&self.mle, &self.lep]
    }

    /// CSV rows (no header), one per estimator.
    pub fn csv_rows(&self) -> String {
        let c = &self.config;
        let lambda = match c.bloch {
            Some((mu, _)) => (mu[0] * mu[0] + mu[1] * mu[1] + mu[2] * mu[2]).sqrt(),
            None => c.lambda,
        };
        let mut out = String::new();
        for s in self.estimators() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                c.params.target,
                c.params.theta,
                c.params.phi,
                lambda,
                c.n,
                c.trials,
                s.estimator.as_str(),
                s.mean_estimate,
                s.emp_var,
                s.pred_var,
                s.omission_rate,
                s.ratio
            );
        }
        out
    }
}

/// Neumaier-compensated sum.
fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn summarize(estimator: Estimator, results: &[TrialResult], trials: usize, n: u64, qfi: f64) -> Result<EstimatorSummary> {
    let done: Vec<&TrialResult> = results.iter().filter(|r| !r.omitted).collect();
    if done.is_empty() {
        return Err(Error::AllTrialsOmitted);
    }
    let k = done.len() as f64;
    let mean = compensated_sum(done.iter().map(|r| r.estimate)) / k;
    let emp_var = if done.len() > 1 {
        compensated_sum(done.iter().map(|r| (r.estimate - mean).powi(2))) / (k - 1.0)
    } else {
        f64::NAN
    };
    let pred_var = compensated_sum(done.iter().map(|r| r.variance_estimate)) / k;
    let quantum_bound = 1.0 / (n as f64 * qfi);
    Ok(EstimatorSummary {
        estimator,
        completed: done.len(),
        mean_estimate: mean,
        emp_var,
        pred_var,
        omission_rate: 1.0 - k / trials as f64,
        ratio: (quantum_bound / (2.0 * pred_var)).log10(),
        emp_ratio: (quantum_bound / (2.0 * emp_var)).log10(),
    })
}

fn one_trial(
    config: &TrialConfig,
    a: &Povm,
    b: &Povm,
    w: &Hovm,
    trial: u64,
) -> Result<(bool, TrialResult, TrialResult)> {
    let counts = match config.sampling {
        Sampling::Monte => sample_with_streams(&config.params, a, b, config.n, config.seed, trial)?,
        Sampling::Expected => CountTable::expected(&config.params, a, b, config.n)?,
    };
    if counts.min_w() < 0.0 {
        return Ok((true, TrialResult::omitted(), TrialResult::omitted()));
    }
    let target = config.params.target;
    let other = config.params.fixed_other();
    let run = |r: Result<TrialResult>| -> Result<TrialResult> {
        match r {
            Ok(t) => Ok(t),
            Err(Error::NegativeCounts(_) | Error::FlatLikelihood(_) | Error::ZeroSlope(_)) => {
                Ok(TrialResult::omitted())
            }
            Err(e) => Err(e),
        }
    };
    let mle = run(mle_estimate_with(&counts, target, other, w, config.domain, &config.options))?;
    let lep = run(lep_estimate_with(&counts, target, other, w, config.domain, &config.options))?;
    Ok((false, mle, lep))
}

/// Runs `config.trials` independent trials of both estimators.
///
/// Trial `t` draws its `B` counts from substream `2t` and its sequential counts
/// from substream `2t + 1` of the master seed, so results do not depend on
/// scheduling. Trials with negative assembled counts are dropped and show up
/// in the omission rates.
pub fn run_trials(config: &TrialConfig) -> Result<TrialSummary> {
    config.validate()?;
    let (a, b) = config.measurements()?;
    let w = sequential_hovm(&a, &b)?;
    let qfi = qfi_pure(&config.params)?;
    if qfi <= 0.0 {
        return Err(Error::ZeroQfi);
    }
    let adv = advantage(&config.params, &w)?;

    let trial_ids = 0..config.trials as u64;
    #[cfg(feature = "parallel")]
    let outcomes: Vec<Result<(bool, TrialResult, TrialResult)>> =
        trial_ids.into_par_iter().map(|t| one_trial(config, &a, &b, &w, t)).collect();
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Result<(bool, TrialResult, TrialResult)>> =
        trial_ids.map(|t| one_trial(config, &a, &b, &w, t)).collect();

    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let negative = outcomes.iter().filter(|o| o.0).count();
    let mle: Vec<TrialResult> = outcomes.iter().map(|o| o.1).collect();
    let lep: Vec<TrialResult> = outcomes.iter().map(|o| o.2).collect();
    Ok(TrialSummary {
        config: config.clone(),
        advantage: adv,
        qfi,
        negative_count_rate: negative as f64 / config.trials as f64,
        mle: summarize(Estimator::Mle, &mle, config.trials, config.n, qfi)?,
        lep: summarize(Estimator::Lep, &lep, config.trials, config.n, qfi)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::oqfi;
    use crate::oq::evaluate_oq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn pair(lambda: f64) -> (Povm, Povm, Hovm) {
        let (a, b) = mutually_unbiased_pair(lambda).unwrap();
        let w = sequential_hovm(&a, &b).unwrap();
        (a, b, w)
    }

    #[test]
    fn assembled_counts_follow_the_recipe() {
        let t = CountTable::assemble(10, vec![7.0, 3.0], vec![vec![2.0, 3.0], vec![4.0, 1.0]]).unwrap();
        // column sums of seq: (6, 4); residual (7-6, 3-4)/2 = (0.5, -0.5)
        assert_eq!(t.counts_w, vec![vec![2.5, 2.5], vec![4.5, 0.5]]);
        assert_eq!(t.total_w(), 10.0);
        assert!(CountTable::assemble(10, vec![10.0], vec![vec![5.0, 5.0]]).is_err());
    }

    #[test]
    fn uniform_measurements_give_balanced_counts() {
        let (a, b, _) = pair(0.0);
        let n = 10_000;
        let p = ProbeParams::new(1.2, 0.7, Target::Polar);
        let t = sample_counts(&p, &a, &b, n, 11).unwrap();
        let band = |m: f64, pr: f64| 4.0 * (n as f64 * pr * (1.0 - pr)).sqrt() + 0.0 * m;
        for &c in &t.counts_b {
            assert!((c - 5000.0).abs() <= band(c, 0.5));
        }
        for &c in t.counts_seq.iter().flatten() {
            assert!((c - 2500.0).abs() <= band(c, 0.25));
        }
        assert_eq!(t.counts_b.iter().sum::<f64>(), n as f64);
        assert_eq!(t.counts_seq.iter().flatten().sum::<f64>(), n as f64);
        assert_eq!(t.total_w(), n as f64);
    }

    #[test]
    fn sharp_x_measurement_on_plus_state() {
        let (a, b, _) = pair(1.0);
        let p = ProbeParams::new(FRAC_PI_2, 0.0, Target::Polar);
        let t = sample_counts(&p, &a, &b, 5000, 3).unwrap();
        assert_eq!(t.counts_b, vec![5000.0, 0.0]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let (a, b, _) = pair(0.9);
        let p = ProbeParams::new(1.0, 0.5, Target::Azimuthal);
        let t1 = sample_counts(&p, &a, &b, 1000, 42).unwrap();
        let t2 = sample_counts(&p, &a, &b, 1000, 42).unwrap();
        assert_eq!(t1, t2);
        let t3 = sample_counts(&p, &a, &b, 1000, 43).unwrap();
        assert_ne!(t1, t3);
    }

    #[test]
    fn likelihood_peaks_at_truth_on_expected_counts() {
        let (a, b, w) = pair(0.9);
        let p = ProbeParams::new(1.1, 1.2, Target::Polar);
        let t = CountTable::expected(&p, &a, &b, 100_000).unwrap();
        let at_truth = log_likelihood(&t, 1.1, 1.2, Target::Polar, &w).unwrap();
        for dg in [-0.1, -0.01, 0.01, 0.1] {
            assert!(log_likelihood(&t, 1.1 + dg, 1.2, Target::Polar, &w).unwrap() < at_truth);
        }
    }

    #[test]
    fn likelihood_is_flat_for_random_measurements() {
        let (_, _, w) = pair(0.0);
        let n = 4000;
        let t = CountTable::assemble(n, vec![2000.0, 2000.0], vec![vec![1000.0; 2]; 2]).unwrap();
        for g in [0.0, 0.5, 2.0, 3.0] {
            let l = log_likelihood(&t, g, 0.3, Target::Polar, &w).unwrap();
            assert!((l - 0.25f64.ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn negative_counts_are_refused() {
        let (_, _, w) = pair(0.9);
        let t = CountTable::assemble(10, vec![0.0, 10.0], vec![vec![8.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert!(t.min_w() < 0.0);
        assert!(matches!(log_likelihood(&t, 1.0, 0.0, Target::Polar, &w), Err(Error::NegativeCounts(_))));
        assert!(matches!(
            mle_estimate(&t, Target::Polar, 0.0, &w, Domain::full()),
            Err(Error::NegativeCounts(_))
        ));
        assert!(matches!(
            lep_estimate(&t, Target::Polar, 0.0, &w, Domain::full()),
            Err(Error::NegativeCounts(_))
        ));
    }

    #[test]
    fn mle_recovers_truth_from_expected_counts() {
        let (a, b, w) = pair(0.9);
        for (theta, phi, target) in [
            (1.1, 1.2, Target::Polar),
            (FRAC_PI_2, 0.3, Target::Polar),
            (1.4, 0.9, Target::Azimuthal),
        ] {
            let p = ProbeParams::new(theta, phi, target);
            let t = CountTable::expected(&p, &a, &b, 100_000).unwrap();
            let r = mle_estimate(&t, target, p.fixed_other(), &w, Domain::full()).unwrap();
            assert!((r.estimate - p.value()).abs() < 1e-6, "{r:?}");
            let fi = oqfi(&p, &w).unwrap().value;
            assert!((r.observed_fi - fi).abs() / fi < 1e-3, "{} vs {fi}", r.observed_fi);
            assert!((r.variance_estimate - 1.0 / (1e5 * r.observed_fi)).abs() < 1e-18);
        }
    }

    #[test]
    fn lep_inverts_exact_observable() {
        let (a, b, w) = pair(0.9);
        let p = ProbeParams::new(1.0, 2.0, Target::Azimuthal);
        let t = CountTable::expected(&p, &a, &b, 100_000).unwrap();
        let r = lep_estimate(&t, Target::Azimuthal, 1.0, &w, Domain::full()).unwrap();
        assert!((r.estimate - 2.0).abs() < 1e-6);
        let (mean, slope) = observable_mean_and_slope(&p, &w).unwrap();
        assert!((observed_mean(&t) - mean).abs() < 1e-12);
        let expected_var = (1.0 - mean * mean) / (1e5 * slope * slope);
        assert!((r.variance_estimate - expected_var).abs() / expected_var < 1e-5);
    }

    #[test]
    fn lep_fails_on_flat_observable() {
        let (a, b, w) = pair(0.0);
        let p = ProbeParams::new(1.0, 0.5, Target::Polar);
        let (mean, slope) = observable_mean_and_slope(&p, &w).unwrap();
        assert!((mean - 0.5).abs() < 1e-15 && slope.abs() < 1e-15);
        let t = CountTable::expected(&p, &a, &b, 1000).unwrap();
        assert!(matches!(lep_estimate(&t, Target::Polar, 0.5, &w, Domain::full()), Err(Error::ZeroSlope(_))));
    }

    #[test]
    fn mle_flat_likelihood_is_reported() {
        let (a, b, w) = pair(0.0);
        let p = ProbeParams::new(1.0, 0.5, Target::Polar);
        let t = CountTable::expected(&p, &a, &b, 1000).unwrap();
        assert!(matches!(
            mle_estimate(&t, Target::Polar, 0.5, &w, Domain::full()),
            Err(Error::FlatLikelihood(_))
        ));
    }

    #[test]
    fn domain_checks() {
        let (a, b, w) = pair(0.5);
        let p = ProbeParams::new(1.0, 0.5, Target::Polar);
        let t = CountTable::expected(&p, &a, &b, 1000).unwrap();
        for d in [Domain::new(1.0, 0.5), Domain::new(-0.1, 1.0), Domain::new(0.0, 4.0)] {
            assert!(matches!(mle_estimate(&t, Target::Polar, 0.5, &w, d), Err(Error::InvalidConfig(_))));
        }
        // a restricted interval clips the estimate
        let r = mle_estimate(&t, Target::Polar, 0.5, &w, Domain::new(1.5, 2.5)).unwrap();
        assert!((r.estimate - 1.5).abs() < 1e-6);
    }

    #[test]
    fn golden_section_on_parabola() {
        let x = golden_section_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-9);
    }

    #[test]
    fn run_trials_rejects_single_trial() {
        let cfg = TrialConfig::new(ProbeParams::new(1.0, 0.5, Target::Polar), 0.9, 100, 1, 0);
        assert!(matches!(run_trials(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn expected_injection_reproduces_advantage() {
        let p = ProbeParams::new(FRAC_PI_2, FRAC_PI_4, Target::Polar);
        let mut cfg = TrialConfig::new(p, 0.95, 100_000, 2, 0);
        cfg.sampling = Sampling::Expected;
        let s = run_trials(&cfg).unwrap();
        assert!((s.mle.ratio - s.advantage).abs() < 1e-3, "{} vs {}", s.mle.ratio, s.advantage);
        assert_eq!(s.mle.emp_var, 0.0);
        assert_eq!(s.mle.omission_rate, 0.0);
    }

    #[test]
    fn run_trials_is_deterministic_and_csv_is_stable() {
        let p = ProbeParams::new(1.3, 0.8, Target::Polar);
        let cfg = TrialConfig::new(p, 0.8, 2000, 8, 77);
        let s1 = run_trials(&cfg).unwrap();
        let s2 = run_trials(&cfg).unwrap();
        assert_eq!(s1, s2);
        let rows = s1.csv_rows();
        assert_eq!(rows.lines().count(), 2);
        assert!(rows.starts_with("theta,1.3,0.8,0.8,2000,8,mle,"));
        assert_eq!(CSV_HEADER.split(',').count(), rows.lines().next().unwrap().split(',').count());
    }

    #[test]
    fn all_omitted_is_an_error() {
        // λ = 0 leaves the LEP observable flat, so every LEP trial is dropped
        let p = ProbeParams::new(1.0, 0.5, Target::Polar);
        let cfg = TrialConfig::new(p, 0.0, 100, 3, 1);
        assert!(matches!(run_trials(&cfg), Err(Error::AllTrialsOmitted)));
    }

    #[test]
    fn counts_average_to_quasiprobability() {
        let (a, b, w) = pair(0.9);
        let p = ProbeParams::new(1.2, 0.4, Target::Polar);
        let oq = evaluate_oq(&make_state(&p).unwrap(), &w).unwrap();
        let n = 200u64;
        let reps = 10_000u64;
        let mut sum = [[0.0f64; 2]; 2];
        let mut sum_sq = [[0.0f64; 2]; 2];
        for t in 0..reps {
            let table = sample_with_streams(&p, &a, &b, n, 9, t).unwrap();
            assert_eq!(table.total_w(), n as f64);
            for i in 0..2 {
                for j in 0..2 {
                    let x = table.counts_w[i][j] / n as f64;
                    sum[i][j] += x;
                    sum_sq[i][j] += x * x;
                }
            }
        }
        let r = reps as f64;
        for i in 0..2 {
            for j in 0..2 {
                let mean = sum[i][j] / r;
                let var = sum_sq[i][j] / r - mean * mean;
                let se = (var / r).sqrt();
                assert!((mean - oq.value(i, j)).abs() <= 4.0 * se, "cell ({i},{j})");
            }
        }
    }
}
