//! MMSE estimate, estimation error and age bookkeeping for one source.

use serde::Serialize;

use crate::stochastic::SourceParams;
use crate::Error;

/// A sample as seen by the estimator. Sampling and transmission start coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRecord {
    pub source: usize,
    pub sampled_at: f64,
    pub start: f64,
    pub delivered_at: f64,
    pub value: f64,
}

impl SampleRecord {
    pub fn new(source: usize, sampled_at: f64, delivered_at: f64, value: f64) -> Result<Self, Error> {
        if !(delivered_at >= sampled_at) {
            return Err(Error::Domain(format!(
                "delivery {delivered_at} precedes sampling {sampled_at}"
            )));
        }
        Ok(SampleRecord {
            source,
            sampled_at,
            start: sampled_at,
            delivered_at,
            value,
        })
    }
}

/// Per-source state: error `ε(t)`, age `Δ(t)`, service-elapsed time `γ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BanditState {
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
    pub xhat: f64,
}

impl BanditState {
    pub fn in_service(&self) -> bool {
        self.gamma > 0.0
    }
}

/// Row emitted by the simulator's trace hook.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub t: f64,
    pub source: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
    pub index: f64,
    pub action: u8,
}

/// `E[X_t | last delivered sample]`.
pub fn mmse_estimate(last: &SampleRecord, t: f64, params: &SourceParams) -> Result<f64, Error> {
    if t < last.delivered_at {
        return Err(Error::Domain(format!(
            "estimate requested at {t}, before delivery at {}",
            last.delivered_at
        )));
    }
    Ok(propagate_mean(last.value, t - last.sampled_at, params))
}

#[inline]
pub(crate) fn propagate_mean(value: f64, elapsed: f64, params: &SourceParams) -> f64 {
    if params.is_wiener() {
        value
    } else {
        let a = (-params.theta * elapsed).exp();
        value * a + params.mu * (1.0 - a)
    }
}

/// Recomputes `ε` and `Δ` at time `t`; `γ` is carried over unchanged.
pub fn advance_error(
    state: &BanditState,
    x_true: f64,
    t: f64,
    last: &SampleRecord,
    params: &SourceParams,
) -> BanditState {
    let xhat = propagate_mean(last.value, t - last.sampled_at, params);
    BanditState {
        epsilon: x_true - xhat,
        delta: t - last.sampled_at,
        gamma: state.gamma,
        xhat,
    }
}

/// Mean-squared error of a signal-agnostic estimate at age `δ`.
pub fn age_penalty(delta: f64, params: &SourceParams) -> Result<f64, Error> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("age must be nonnegative, got {delta}")));
    }
    Ok(params.transition_variance(delta))
}
