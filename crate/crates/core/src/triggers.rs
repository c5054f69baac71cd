// SPDX-License-Identifier: MIT
//! Event-triggered sampling state machine and self-triggered next-instant
//! rule.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{min_eig, wnorm2};

/// Parameters of the dynamic event trigger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTriggerParams {
    pub eps1: f64,
    pub eps2: f64,
    pub xi1: DMatrix<f64>,
    pub xi2: DMatrix<f64>,
    pub mu: f64,
    pub g: f64,
    /// Sampling interval ϑ in plant steps.
    pub theta: usize,
    pub alpha0: f64,
}

impl EventTriggerParams {
    /// Validates ranges, shapes and the non-negativity prerequisite.
    pub fn validate(&self) -> Result<()> {
        let n = self.xi1.nrows();
        if self.xi1.shape() != (n, n) || self.xi2.shape() != (n, n) {
            return Err(dim_err(
                "trigger weights",
                format!("{n}x{n}"),
                format!("{:?}", self.xi2.shape()),
            ));
        }
        if !(0.0..=1.0).contains(&self.eps1) || !(0.0..=1.0).contains(&self.eps2) {
            return Err(Error::InvalidParameter(
                "eps1, eps2 must lie in [0, 1]".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return Err(Error::InvalidParameter("mu must lie in [0, 1)".into()));
        }
        if !(self.g >= 0.0) || !(self.alpha0 >= 0.0) {
            return Err(Error::InvalidParameter("g and alpha0 must be ≥ 0".into()));
        }
        if self.theta < 1 {
            return Err(Error::InvalidParameter("theta must be ≥ 1".into()));
        }
        if min_eig(&self.xi1) < 0.0 || min_eig(&self.xi2) < 0.0 {
            return Err(Error::InvalidParameter(
                "trigger weights must be PSD".into(),
            ));
        }
        Ok(())
    }

    /// `1 − μ − 1/g ≥ 0` (vacuous for `g = 0`).
    pub fn nonnegativity_prerequisite(&self) -> bool {
        self.g == 0.0 || 1.0 - self.mu - 1.0 / self.g >= 0.0
    }
}

/// Mutable state of the event trigger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTriggerState {
    pub alpha: f64,
    pub last_tx_state: DVector<f64>,
    pub last_tx_time: usize,
    /// Samples taken since the last transmission.
    pub sample_phase: usize,
}

impl EventTriggerState {
    /// State right after the initial transmission at `k = 0`.
    pub fn initial(params: &EventTriggerParams, x0: &DVector<f64>) -> Self {
        Self {
            alpha: params.alpha0,
            last_tx_state: x0.clone(),
            last_tx_time: 0,
            sample_phase: 0,
        }
    }
}

/// `β = ε₁‖x − x*‖²_{Ξ₁} + ε₂‖x_q − x*‖²_{Ξ₁} − ‖x − x_q‖²_{Ξ₂}`.
pub fn et_beta(
    params: &EventTriggerParams,
    x_now: &DVector<f64>,
    x_last_tx: &DVector<f64>,
    x_star: &DVector<f64>,
) -> f64 {
    params.eps1 * wnorm2(&(x_now - x_star), &params.xi1)
        + params.eps2 * wnorm2(&(x_last_tx - x_star), &params.xi1)
        - wnorm2(&(x_now - x_last_tx), &params.xi2)
}

/// One sampling instant of the event trigger at plant step `k`.
///
/// Fires when `α + g·β < 0` with the current `α`. Without a transmission
/// `α⁺ = (1 − μ)α + β`; on a transmission the held state is replaced first
/// and `β` is re-evaluated against it before advancing `α`.
pub fn et_step(
    params: &EventTriggerParams,
    state: &EventTriggerState,
    x_sample: &DVector<f64>,
    x_star: &DVector<f64>,
    k: usize,
) -> (bool, EventTriggerState) {
    let beta = et_beta(params, x_sample, &state.last_tx_state, x_star);
    let fire = state.alpha + params.g * beta < 0.0;
    if fire {
        let beta_tx = et_beta(params, x_sample, x_sample, x_star);
        (
            true,
            EventTriggerState {
                alpha: (1.0 - params.mu) * state.alpha + beta_tx,
                last_tx_state: x_sample.clone(),
                last_tx_time: k,
                sample_phase: 0,
            },
        )
    } else {
        (
            false,
            EventTriggerState {
                alpha: (1.0 - params.mu) * state.alpha + beta,
                last_tx_state: state.last_tx_state.clone(),
                last_tx_time: state.last_tx_time,
                sample_phase: state.sample_phase + 1,
            },
        )
    }
}

/// Parameters of the static self trigger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTriggerParams {
    pub eps1c: f64,
    pub eps2c: f64,
    pub xi1c: DMatrix<f64>,
    pub xi2c: DMatrix<f64>,
    pub s_bar: usize,
}

impl SelfTriggerParams {
    pub fn validate(&self) -> Result<()> {
        let n = self.xi1c.nrows();
        if self.xi1c.shape() != (n, n) || self.xi2c.shape() != (n, n) {
            return Err(dim_err(
                "self-trigger weights",
                format!("{n}x{n}"),
                format!("{:?}", self.xi2c.shape()),
            ));
        }
        if !(0.0..=1.0).contains(&self.eps1c) || !(0.0..=1.0).contains(&self.eps2c) {
            return Err(Error::InvalidParameter(
                "eps1c, eps2c must lie in [0, 1]".into(),
            ));
        }
        if self.s_bar < 2 {
            return Err(Error::InvalidParameter("s_bar must be ≥ 2".into()));
        }
        Ok(())
    }

    /// Block weight `[[ě₁Ξ̌₁ − Ξ̌₂, Ξ̌₂], [Ξ̌₂, ě₂Ξ̌₁ − Ξ̌₂]]`.
    pub fn block_weight(&self) -> DMatrix<f64> {
        let a = &self.xi1c * self.eps1c - &self.xi2c;
        let d = &self.xi1c * self.eps2c - &self.xi2c;
        let n = self.xi1c.nrows();
        let mut w = DMatrix::zeros(2 * n, 2 * n);
        w.view_mut((0, 0), (n, n)).copy_from(&a);
        w.view_mut((0, n), (n, n)).copy_from(&self.xi2c);
        w.view_mut((n, 0), (n, n)).copy_from(&self.xi2c);
        w.view_mut((n, n), (n, n)).copy_from(&d);
        w
    }
}

/// Self-trigger quadratic form on `Col(x_pred − x*, x_last_tx − x*)`.
pub fn st_condition(
    params: &SelfTriggerParams,
    x_pred: &DVector<f64>,
    x_last_tx: &DVector<f64>,
    x_star: &DVector<f64>,
) -> f64 {
    let n = x_pred.len();
    let mut v = DVector::zeros(2 * n);
    v.rows_mut(0, n).copy_from(&(x_pred - x_star));
    v.rows_mut(n, n).copy_from(&(x_last_tx - x_star));
    wnorm2(&v, &params.block_weight())
}

/// Largest `s ∈ [1, s̄]` with a non-negative condition, or 1 when none.
pub fn st_next<F>(
    params: &SelfTriggerParams,
    mut predictor: F,
    x_last_tx: &DVector<f64>,
    x_star: &DVector<f64>,
) -> usize
where
    F: FnMut(usize) -> DVector<f64>,
{
    let mut best = None;
    for s in 1..=params.s_bar {
        let x = predictor(s);
        if st_condition(params, &x, x_last_tx, x_star) >= 0.0 {
            best = Some(s);
        }
    }
    best.unwrap_or(1)
}

/// Largest `s` whose precomputed condition value is non-negative, or 1.
pub fn st_next_from_values(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= 0.0)
        .map(|(i, _)| i + 1)
        .max()
        .unwrap_or(1)
}

/// Transmission efficiency `1 − tx/samples`.
pub fn efficiency(samples: usize, transmissions: usize) -> f64 {
    1.0 - transmissions as f64 / samples as f64
}

/// Efficiency in percent with two decimals, rounded half up on the exact
/// rational value.
pub fn efficiency_percent(samples: usize, transmissions: usize) -> String {
    assert!(
        samples > 0 && transmissions <= samples,
        "need 0 ≤ tx ≤ samples, samples > 0"
    );
    let num = 10_000u128 * (samples - transmissions) as u128;
    let den = samples as u128;
    let hundredths = (2 * num + den) / (2 * den);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}
