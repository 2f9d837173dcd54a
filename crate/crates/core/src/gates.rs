//! Gate functions applied to importance sampling ratios.
//!
//! A gate `f` replaces hard ratio clipping inside a surrogate objective:
//! the objective uses `f(r)` and the per-token gradient is weighted by
//! `f'(r)`. Every smooth gate here is normalized so that its derivative
//! peaks at exactly 1 when the ratio is 1 (the on-policy point) and decays
//! monotonically away from it. The decay is exponential for the sigmoid,
//! Gaussian for the erf gate, and polynomial for arctan and softsign.
//!
//! The smooth gates are, with u = tau * (x - 1):
//!
//! * sigmoid:  f(x) = sigma(u) * 4/tau          f'(x) = 4 sigma(u)(1 - sigma(u))
//! * erf:      f(x) = sqrt(pi/(2 tau^2)) (1 + erf(u/sqrt(2))) + 1 - sqrt(pi/(2 tau^2)),
//!   f'(x) = exp(-u^2/2)
//! * arctan:   f(x) = 1 + arctan(u)/tau         f'(x) = 1/(1 + u^2)
//! * softsign: f(x) = 1 + (x-1)/sqrt(1 + u^2)   f'(x) = 1/(1 + u^2)^(3/2)
//!
//! The additive constants keep the erf/arctan/softsign values positive on
//! [0, inf) and pin them through the point (1, 1); they do not affect the
//! gradients. Hard clipping is not a single-valued gate (its surrogate
//! depends on the advantage sign), so the scalar operations below reject
//! `HardClip`; the objective module owns the clipped surrogate.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::math::{erf, sigmoid};

/// Gate family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    /// PPO-style hard ratio clipping; carries a clip width via [`GateSpec`].
    HardClip,
    Sigmoid,
    Erf,
    Arctan,
    Softsign,
}

impl GateKind {
    /// All five families, in canonical order.
    pub const ALL: [GateKind; 5] = [
        GateKind::HardClip,
        GateKind::Sigmoid,
        GateKind::Erf,
        GateKind::Arctan,
        GateKind::Softsign,
    ];

    /// The four smooth families (everything except hard clipping).
    pub const SMOOTH: [GateKind; 4] = [
        GateKind::Sigmoid,
        GateKind::Erf,
        GateKind::Arctan,
        GateKind::Softsign,
    ];

    pub fn is_smooth(self) -> bool {
        !matches!(self, GateKind::HardClip)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::HardClip => "hard_clip",
            GateKind::Sigmoid => "sigmoid",
            GateKind::Erf => "erf",
            GateKind::Arctan => "arctan",
            GateKind::Softsign => "softsign",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = GateError;

    fn from_str(s: &str) -> Result<Self, GateError> {
        match s {
            "hard_clip" => Ok(GateKind::HardClip),
            "sigmoid" => Ok(GateKind::Sigmoid),
            "erf" => Ok(GateKind::Erf),
            "arctan" => Ok(GateKind::Arctan),
            "softsign" => Ok(GateKind::Softsign),
            other => Err(GateError::UnknownGate(other.to_string())),
        }
    }
}

/// Errors from gate construction and evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GateError {
    #[error("hard clip has no single-valued gate function; use the clipped surrogate instead")]
    HardClipUnsupported,
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("gate argument must be nonnegative and finite, got {0}")]
    InvalidArgument(f64),
    #[error("clip epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("unknown gate kind {0:?}")]
    UnknownGate(String),
}

/// Sign-dependent temperature pair: `tau_pos` applies to tokens with
/// positive advantage, `tau_neg` to everything else.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Temperature {
    tau_pos: f64,
    tau_neg: f64,
}

impl Temperature {
    pub fn new(tau_pos: f64, tau_neg: f64) -> Result<Self, GateError> {
        for tau in [tau_pos, tau_neg] {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(GateError::InvalidTemperature(tau));
            }
        }
        Ok(Self { tau_pos, tau_neg })
    }

    /// Same temperature on both advantage signs.
    pub fn symmetric(tau: f64) -> Result<Self, GateError> {
        Self::new(tau, tau)
    }

    pub fn tau_pos(&self) -> f64 {
        self.tau_pos
    }

    pub fn tau_neg(&self) -> f64 {
        self.tau_neg
    }

    /// Temperature selected by the advantage sign; an advantage of exactly
    /// zero falls through to `tau_neg`.
    pub fn select(&self, advantage: f64) -> f64 {
        if advantage > 0.0 {
            self.tau_pos
        } else {
            self.tau_neg
        }
    }
}

/// A fully parameterized gate: family plus temperatures, or hard clipping
/// plus its clip width. The clip width is present if and only if the kind
/// is `HardClip`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    kind: GateKind,
    temperature: Temperature,
    clip_epsilon: Option<f64>,
}

impl GateSpec {
    /// A smooth gate with the given temperatures.
    pub fn smooth(kind: GateKind, temperature: Temperature) -> Result<Self, GateError> {
        if !kind.is_smooth() {
            return Err(GateError::HardClipUnsupported);
        }
        Ok(Self {
            kind,
            temperature,
            clip_epsilon: None,
        })
    }

    /// Hard clipping with width `epsilon` in (0, 1).
    pub fn hard_clip(epsilon: f64) -> Result<Self, GateError> {
        if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < 1.0) {
            return Err(GateError::InvalidEpsilon(epsilon));
        }
        Ok(Self {
            kind: GateKind::HardClip,
            // Unused for hard clip; kept valid so accessors stay total.
            temperature: Temperature {
                tau_pos: 1.0,
                tau_neg: 1.0,
            },
            clip_epsilon: Some(epsilon),
        })
    }

    /// Same spec with replaced temperatures. For hard clipping the
    /// temperature is carried but unused.
    pub fn with_temperature(mut self, temperature: Temperature) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn temperature(&self) -> Temperature {
        self.temperature
    }

    pub fn clip_epsilon(&self) -> Option<f64> {
        self.clip_epsilon
    }

    pub fn is_smooth(&self) -> bool {
        self.kind.is_smooth()
    }
}

fn validate_smooth_args(kind: GateKind, tau: f64, x: f64) -> Result<(), GateError> {
    if !kind.is_smooth() {
        return Err(GateError::HardClipUnsupported);
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(GateError::InvalidTemperature(tau));
    }
    if !(x.is_finite() && x >= 0.0) {
        return Err(GateError::InvalidArgument(x));
    }
    Ok(())
}

/// Gate value f(x) for a smooth gate at temperature `tau`.
pub fn gate_value(kind: GateKind, tau: f64, x: f64) -> Result<f64, GateError> {
    validate_smooth_args(kind, tau, x)?;
    let u = tau * (x - 1.0);
    Ok(match kind {
        GateKind::Sigmoid => sigmoid(u) * 4.0 / tau,
        GateKind::Erf => {
            // sqrt(pi/(2 tau^2)) (1 + erf(u/sqrt 2)) + 1 - sqrt(pi/(2 tau^2)),
            // folded so the (1, 1) anchor is exact.
            let scale = (std::f64::consts::PI / 2.0).sqrt() / tau;
            1.0 + scale * erf(u / SQRT_2)
        }
        GateKind::Arctan => 1.0 + u.atan() / tau,
        GateKind::Softsign => 1.0 + (x - 1.0) / (1.0 + u * u).sqrt(),
        GateKind::HardClip => unreachable!(),
    })
}

/// Analytic derivative f'(x) for a smooth gate at temperature `tau`.
///
/// Every family satisfies f'(1) = 1 exactly and 0 < f'(x) <= 1.
pub fn gate_derivative(kind: GateKind, tau: f64, x: f64) -> Result<f64, GateError> {
    validate_smooth_args(kind, tau, x)?;
    let u = tau * (x - 1.0);
    Ok(match kind {
        GateKind::Sigmoid => {
            let s = sigmoid(u);
            4.0 * s * (1.0 - s)
        }
        // exp underflows to 0 in the far tail, which is the correct limit.
        GateKind::Erf => (-0.5 * u * u).exp(),
        GateKind::Arctan => 1.0 / (1.0 + u * u),
        GateKind::Softsign => (1.0 + u * u).powf(-1.5),
        GateKind::HardClip => unreachable!(),
    })
}

/// Gradient weight for one token: the gate derivative evaluated at the
/// token's ratio, with the temperature picked by the advantage sign.
pub fn gate_weight_for_token(
    spec: &GateSpec,
    ratio: f64,
    advantage: f64,
) -> Result<f64, GateError> {
    let tau = spec.temperature().select(advantage);
    gate_derivative(spec.kind(), tau, ratio)
}
