//! Pure qubit probes `|ψ⟩ = cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which angle is being estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    /// Polar angle θ.
    Polar,
    /// Azimuthal angle φ.
    Azimuthal,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Polar => "theta",
            Target::Azimuthal => "phi",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" | "polar" => Ok(Target::Polar),
            "phi" | "azimuthal" => Ok(Target::Azimuthal),
            other => Err(Error::Parse(format!("unknown target `{other}` (expected theta|phi)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub theta: f64,
    pub phi: f64,
    pub target: Target,
}

impl ProbeParams {
    pub fn new(theta: f64, phi: f64, target: Target) -> Self {
        Self { theta, phi, target }
    }

    /// Value of the estimated parameter.
    pub fn value(&self) -> f64 {
        match self.target {
            Target::Polar => self.theta,
            Target::Azimuthal => self.phi,
        }
    }

    /// Value of the parameter held fixed.
    pub fn fixed_other(&self) -> f64 {
        match self.target {
            Target::Polar => self.phi,
            Target::Azimuthal => self.theta,
        }
    }

    /// Same probe with the estimated parameter replaced by `g`.
    pub fn with_value(&self, g: f64) -> Self {
        match self.target {
            Target::Polar => Self { theta: g, ..*self },
            Target::Azimuthal => Self { phi: g, ..*self },
        }
    }

    /// Builds parameters from the estimated value `g` and the fixed one.
    pub fn from_target(target: Target, g: f64, fixed_other: f64) -> Self {
        match target {
            Target::Polar => Self::new(g, fixed_other, target),
            Target::Azimuthal => Self::new(fixed_other, g, target),
        }
    }

    /// Angles may overshoot their interval by `ANGLE_SLACK`, so grid
    /// endpoints such as `π·k/k` that round past `π` are accepted.
    pub fn validate(&self) -> Result<()> {
        if !(-ANGLE_SLACK..=PI + ANGLE_SLACK).contains(&self.theta) {
            return Err(Error::ParamOutOfRange(format!("theta = {} not in [0, π]", self.theta)));
        }
        if !(-ANGLE_SLACK..2.0 * PI).contains(&self.phi) {
            return Err(Error::ParamOutOfRange(format!("phi = {} not in [0, 2π)", self.phi)));
        }
        Ok(())
    }
}

/// Absolute tolerance on the angle domains.
pub const ANGLE_SLACK: f64 = 1e-12;

/// Normalized amplitudes together with their analytic derivative along the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeState {
    pub amplitudes: [Complex64; 2],
    pub derivative: [Complex64; 2],
}

pub fn make_state(p: &ProbeParams) -> Result<ProbeState> {
    p.validate()?;
    Ok(make_state_unchecked(p))
}

/// `make_state` without the range check, for search loops that already
/// clamp to a valid domain.
pub(crate) fn make_state_unchecked(p: &ProbeParams) -> ProbeState {
    let (s, c) = (0.5 * p.theta).sin_cos();
    let phase = Complex64::from_polar(1.0, p.phi);
    let amplitudes = [Complex64::new(c, 0.0), phase * s];
    let derivative = match p.target {
        Target::Polar => [Complex64::new(-0.5 * s, 0.0), phase * (0.5 * c)],
        Target::Azimuthal => [Complex64::new(0.0, 0.0), Complex64::i() * phase * s],
    };
    ProbeState { amplitudes, derivative }
}

impl ProbeState {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(Complex64::norm_sqr).sum()
    }

    /// `⟨ψ|∂ψ⟩`.
    pub fn overlap_with_derivative(&self) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&self.derivative)
            .map(|(a, d)| a.conj() * d)
            .sum()
    }
}

/// `⟨ψ|σ⃗|ψ⟩`.
pub fn bloch_vector(s: &ProbeState) -> [f64; 3] {
    let [c0, c1] = s.amplitudes;
    let coh = c0.conj() * c1;
    [2.0 * coh.re, 2.0 * coh.im, c0.norm_sqr() - c1.norm_sqr()]
}
