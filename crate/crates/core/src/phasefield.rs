//! Profile function, double-well potential, phase-field initialisation and the
//! obstacle projection.

use serde::{Deserialize, Serialize};

use crate::constraints::ObstaclePair;
use crate::distance::signed_distance;
use crate::error::{Error, Result};
use crate::grid::{BinaryVolume, ScalarField3D};

/// Arguments of the profile are clamped to this range before exponentiation.
const PROFILE_ARG_LIMIT: f64 = 50.0;

/// Interface width and fattening exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseFieldParams {
    pub epsilon: f64,
    pub alpha: f64,
}

impl PhaseFieldParams {
    pub const DEFAULT_ALPHA: f64 = 0.5;

    pub fn new(epsilon: f64, alpha: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!("alpha must lie in [0,1], got {alpha}")));
        }
        Ok(PhaseFieldParams { epsilon, alpha })
    }

    /// Fattening thickness `h = ε^α`.
    pub fn thickness(&self) -> f64 {
        self.epsilon.powf(self.alpha)
    }
}

/// Logistic profile `q(x) = ½(1 − tanh(x/2)) = 1/(1 + eˣ)`.
#[inline]
pub fn profile_q(x: f64) -> f64 {
    1.0 / (1.0 + x.clamp(-PROFILE_ARG_LIMIT, PROFILE_ARG_LIMIT).exp())
}

/// `W(u) = ½u²(1−u)²` with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleWell {
    pub w: f64,
    pub w1: f64,
    pub w2: f64,
}

#[inline]
pub fn double_well(u: f64) -> DoubleWell {
    let v = u * (1.0 - u);
    DoubleWell {
        w: 0.5 * v * v,
        w1: u * (u - 1.0) * (2.0 * u - 1.0),
        w2: 1.0 - 6.0 * u + 6.0 * u * u,
    }
}

/// `u₀ = q(𝒹(ξ, E₀)/ε)`.
pub fn init_phase_field(e0: &BinaryVolume, params: &PhaseFieldParams) -> Result<ScalarField3D> {
    if e0.is_empty_set() || e0.is_full_set() {
        return Err(Error::Degenerate(
            "initial set must be neither empty nor the whole domain".into(),
        ));
    }
    let d = signed_distance(e0)?;
    let eps = params.epsilon;
    Ok(d.map(|v| profile_q(v / eps)))
}

/// `max(min(u, upper), lower)`.
pub fn project_obstacle(u: &ScalarField3D, obstacles: &ObstaclePair) -> Result<ScalarField3D> {
    obstacles.check_compatible(u.spec())?;
    let mut out = u.clone();
    project_in_place(&mut out, obstacles);
    Ok(out)
}

/// In-place projection; `obstacles` must already be validated against `u`'s grid.
pub(crate) fn project_in_place(u: &mut ScalarField3D, obstacles: &ObstaclePair) {
    let lo = obstacles.lower().data();
    let hi = obstacles.upper().data();
    for ((v, &l), &h) in u.data_mut().iter_mut().zip(lo).zip(hi) {
        *v = v.min(h).max(l);
    }
}
