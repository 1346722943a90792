//! Gauss-Markov sources, transmission-time models, and path sampling.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::special::THETA_SWITCH;
use crate::Error;

/// Parameters of `dX = θ(μ - X)dt + σ dW` plus the source weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub theta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub weight: f64,
}

impl SourceParams {
    pub fn new(theta: f64, mu: f64, sigma: f64, weight: f64) -> Result<Self, Error> {
        let p = SourceParams {
            theta,
            mu,
            sigma,
            weight,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !self.theta.is_finite() || !self.mu.is_finite() {
            return Err(Error::Domain("theta and mu must be finite".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::Domain(format!("weight must be positive, got {}", self.weight)));
        }
        Ok(())
    }

    pub fn is_wiener(&self) -> bool {
        self.theta.abs() < THETA_SWITCH
    }

    /// Variance of `X_{t+dt}` given `X_t`; equals the age penalty `p(dt)`.
    pub fn transition_variance(&self, dt: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        if self.is_wiener() {
            s2 * dt
        } else {
            // (σ²/2θ)(1 - e^{-2θdt}) for either sign of θ
            -s2 * (-2.0 * self.theta * dt).exp_m1() / (2.0 * self.theta)
        }
    }

    /// `e^{-θ dt}`, the conditional-mean decay over `dt`.
    pub fn decay(&self, dt: f64) -> f64 {
        if self.is_wiener() {
            1.0
        } else {
            (-self.theta * dt).exp()
        }
    }
}

/// Seeded random stream; `(seed, stream)` pairs are independent and reproducible.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.gen()
    }

    pub(crate) fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Exact transition of the source over `dt`.
pub fn step_process(x: f64, dt: f64, params: &SourceParams, rng: &mut RngStream) -> Result<f64, Error> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {dt}")));
    }
    if !x.is_finite() {
        return Err(Error::Domain("state must be finite".into()));
    }
    Ok(transition(x, dt, params, rng.normal()))
}

#[inline]
pub(crate) fn transition(x: f64, dt: f64, params: &SourceParams, z: f64) -> f64 {
    let a = params.decay(dt);
    x * a + params.mu * (1.0 - a) + params.transition_variance(dt).sqrt() * z
}

/// One draw of the zero-started, zero-mean process at time `t`.
pub fn sample_o_at(t: f64, params: &SourceParams, rng: &mut RngStream) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    params.transition_variance(t).sqrt() * rng.normal()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingSample {
    pub tau: f64,
    pub endpoint: f64,
    pub integral_sq: f64,
}

pub const DEFAULT_STEP_BUDGET: u64 = 100_000_000;

/// Runs the zero-mean process from `start` on a `dt` grid until `|O| ≥ threshold`.
///
/// Returns the grid exit time, the (overshooting) exit value and the
/// trapezoidal estimate of `∫₀^τ O² ds`.
pub fn hitting_time_mc(
    start: f64,
    threshold: f64,
    params: &SourceParams,
    dt: f64,
    step_budget: u64,
    rng: &mut RngStream,
) -> Result<HittingSample, Error> {
    if !(threshold > 0.0) || !(dt > 0.0) {
        return Err(Error::Domain("threshold and dt must be positive".into()));
    }
    if start.abs() > threshold {
        return Err(Error::Domain(format!("start {start} lies outside the threshold {threshold}")));
    }
    let centered = SourceParams { mu: 0.0, ..*params };
    let a = centered.decay(dt);
    let sd = centered.transition_variance(dt).sqrt();
    let mut o = start;
    let mut integral = 0.0;
    let mut steps = 0u64;
    while o.abs() < threshold {
        if steps >= step_budget {
            return Err(Error::Timeout { steps });
        }
        let next = o * a + sd * rng.normal();
        integral += 0.5 * dt * (o * o + next * next);
        o = next;
        steps += 1;
    }
    Ok(HittingSample {
        tau: steps as f64 * dt,
        endpoint: o,
        integral_sq: integral,
    })
}

/// Distribution of the i.i.d. transmission times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransmissionModel {
    Constant { value: f64 },
    Exponential { mean: f64 },
    /// `Y = e^{ρG} / E[e^{ρG}]` with `G` standard normal, so `E[Y] = 1`.
    NormalizedLognormal { rho: f64 },
}

/// Draws used for the fixed-seed log-normal moment.
pub const MOMENT_DRAWS: usize = 1_000_000;
const MOMENT_SEED: u64 = 0x5eed_0f_e2;

impl TransmissionModel {
    pub fn validate(&self) -> Result<(), Error> {
        let ok = match *self {
            TransmissionModel::Constant { value } => value > 0.0 && value.is_finite(),
            TransmissionModel::Exponential { mean } => mean > 0.0 && mean.is_finite(),
            TransmissionModel::NormalizedLognormal { rho } => rho > 0.0 && rho.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid transmission model {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            TransmissionModel::Constant { value } => value,
            TransmissionModel::Exponential { mean } => mean,
            TransmissionModel::NormalizedLognormal { .. } => 1.0,
        }
    }

    /// `E[Y²]`.
    pub fn second_moment(&self) -> f64 {
        match *self {
            TransmissionModel::Constant { value } => value * value,
            TransmissionModel::Exponential { mean } => 2.0 * mean * mean,
            TransmissionModel::NormalizedLognormal { rho } => (rho * rho).exp(),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            TransmissionModel::Constant { value } => value,
            TransmissionModel::Exponential { mean } => {
                let e: f64 = Exp::new(1.0 / mean).expect("validated").sample(rng.rng());
                // Exp can return exactly 0 with vanishing probability
                e.max(f64::MIN_POSITIVE)
            }
            TransmissionModel::NormalizedLognormal { rho } => (rho * rng.normal() - 0.5 * rho * rho).exp(),
        }
    }

    /// `E[e^{-2θY}]`.
    pub fn moment_e2theta(&self, theta: f64) -> Result<f64, Error> {
        if theta.abs() < THETA_SWITCH {
            return Ok(1.0);
        }
        match *self {
            TransmissionModel::Constant { value } => Ok((-2.0 * theta * value).exp()),
            TransmissionModel::Exponential { mean } => {
                let denom = 1.0 + 2.0 * theta * mean;
                if denom <= 0.0 {
                    Err(Error::Domain(format!(
                        "E[exp(-2θY)] diverges for exponential Y with mean {mean} and θ = {theta}"
                    )))
                } else {
                    Ok(1.0 / denom)
                }
            }
            TransmissionModel::NormalizedLognormal { rho } => Ok(lognormal_moment(rho, theta)),
        }
    }

    /// True when `E[e^{-2θY}]` is infinite although [`check_moment`](Self::check_moment)
    /// accepts the model (lognormal delays feeding an unstable source).
    pub fn moment_diverges(&self, theta: f64) -> bool {
        matches!(self, TransmissionModel::NormalizedLognormal { .. }) && theta <= -THETA_SWITCH
    }

    /// Rejects models whose `E[e^{-2θY}]` is known to diverge.
    pub fn check_moment(&self, theta: f64) -> Result<(), Error> {
        self.moment_e2theta(theta).map(|_| ())
    }
}

fn lognormal_moment(rho: f64, theta: f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (rho.to_bits(), theta.to_bits());
    if let Some(v) = cache.lock().expect("moment cache poisoned").get(&key) {
        return *v;
    }
    let model = TransmissionModel::NormalizedLognormal { rho };
    let mut rng = RngStream::new(MOMENT_SEED, 0);
    let mut sum = 0.0;
    for _ in 0..MOMENT_DRAWS {
        sum += (-2.0 * theta * model.sample(&mut rng)).exp();
    }
    let v = sum / MOMENT_DRAWS as f64;
    cache.lock().expect("moment cache poisoned").insert(key, v);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn params_validation() {
        assert!(SourceParams::new(0.1, 0.0, 0.0, 1.0).is_err());
        assert!(SourceParams::new(0.1, 0.0, 1.0, -1.0).is_err());
        assert!(SourceParams::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(SourceParams::new(-0.3, 2.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn step_rejects_bad_dt() {
        let p = SourceParams::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        assert!(step_process(0.0, 0.0, &p, &mut rng).is_err());
        assert!(step_process(0.0, -1.0, &p, &mut rng).is_err());
    }

    #[test]
    fn wiener_step_moments() {
        let p = SourceParams::new(0.0, 0.0, 1.5, 1.0).unwrap();
        let mut rng = RngStream::new(7, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| step_process(0.0, 0.4, &p, &mut rng).unwrap()).collect();
        let (m, v) = mean_var(&xs);
        let var: f64 = 1.5 * 1.5 * 0.4;
        assert!(m.abs() < 3.0 * (var / 1e5).sqrt());
        assert!((v / var - 1.0).abs() < 0.02);
    }

    #[test]
    fn ou_step_mean() {
        let p = SourceParams::new(0.5, 0.0, 1.0, 1.0).unwrap();
        let mut rng = RngStream::new(11, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| step_process(1.0, 1.0, &p, &mut rng).unwrap()).collect();
        let (m, v) = mean_var(&xs);
        let se = (v / 1e5).sqrt();
        assert!((m - (-0.5f64).exp()).abs() < 3.0 * se);
    }

    #[test]
    fn tiny_step_is_nearly_identity() {
        let p = SourceParams::new(0.3, 1.0, 2.0, 1.0).unwrap();
        let mut rng = RngStream::new(3, 0);
        let y = step_process(0.7, 1e-14, &p, &mut rng).unwrap();
        assert!((y - 0.7).abs() < 1e-5);
    }

    #[test]
    fn o_variance_both_signs() {
        for &(theta, expect) in &[(0.1, 5.0 * (1.0 - (-0.4f64).exp())), (-0.1, 5.0 * ((0.4f64).exp() - 1.0))] {
            let p = SourceParams::new(theta, 3.0, 1.0, 1.0).unwrap();
            let mut rng = RngStream::new(5, 1);
            let xs: Vec<f64> = (0..100_000).map(|_| sample_o_at(2.0, &p, &mut rng)).collect();
            let (_, v) = mean_var(&xs);
            assert!((v / expect - 1.0).abs() < 0.02, "theta {theta}: {v} vs {expect}");
        }
        let p = SourceParams::new(0.1, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(sample_o_at(0.0, &p, &mut RngStream::new(1, 1)), 0.0);
    }

    #[test]
    fn streams_reproduce_and_differ() {
        let mut a = RngStream::new(42, 3);
        let mut b = RngStream::new(42, 3);
        let mut c = RngStream::new(42, 4);
        let va: Vec<f64> = (0..10).map(|_| a.normal()).collect();
        let vb: Vec<f64> = (0..10).map(|_| b.normal()).collect();
        let vc: Vec<f64> = (0..10).map(|_| c.normal()).collect();
        assert_eq!(va, vb);
        assert_ne!(va, vc);
    }

    #[test]
    fn hitting_immediate_exit_and_timeout() {
        let p = SourceParams::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        let h = hitting_time_mc(1.0, 1.0, &p, 1e-3, 10, &mut rng).unwrap();
        assert_eq!(h.tau, 0.0);
        assert_eq!(h.integral_sq, 0.0);
        let stable = SourceParams::new(2.0, 0.0, 0.1, 1.0).unwrap();
        assert!(matches!(
            hitting_time_mc(0.0, 5.0, &stable, 1e-3, 1000, &mut rng),
            Err(Error::Timeout { .. })
        ));
    }

    #[test]
    fn transmission_samples_positive() {
        let mut rng = RngStream::new(9, 2);
        for tm in [
            TransmissionModel::Constant { value: 0.5 },
            TransmissionModel::Exponential { mean: 2.0 },
            TransmissionModel::NormalizedLognormal { rho: 1.5 },
        ] {
            for _ in 0..10_000 {
                assert!(tm.sample(&mut rng) > 0.0);
            }
        }
    }

    #[test]
    fn lognormal_has_unit_mean() {
        let tm = TransmissionModel::NormalizedLognormal { rho: 0.5 };
        let mut rng = RngStream::new(17, 0);
        let n = 200_000;
        let m = (0..n).map(|_| tm.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m - 1.0).abs() < 0.01);
    }

    #[test]
    fn moments() {
        let c = TransmissionModel::Constant { value: 0.7 };
        assert!((c.second_moment() - 0.49).abs() < 1e-15);
        let mut rng = RngStream::new(3, 3);
        let ln = TransmissionModel::NormalizedLognormal { rho: 0.5 };
        let m2 = (0..200_000).map(|_| ln.sample(&mut rng).powi(2)).sum::<f64>() / 2e5;
        assert!((m2 / ln.second_moment() - 1.0).abs() < 0.02);
        assert!((c.moment_e2theta(0.2).unwrap() - (-0.28f64).exp()).abs() < 1e-15);
        assert_eq!(c.moment_e2theta(0.0).unwrap(), 1.0);
        let e = TransmissionModel::Exponential { mean: 2.0 };
        assert!((e.moment_e2theta(0.1).unwrap() - 1.0 / 1.4).abs() < 1e-15);
        assert!(e.moment_e2theta(-0.3).is_err());
        assert!(e.moment_e2theta(-0.2).is_ok());

        // independent Monte-Carlo oracle, different seed than the cached value
        let ln = TransmissionModel::NormalizedLognormal { rho: 1.5 };
        let cached = ln.moment_e2theta(0.1).unwrap();
        let mut rng = RngStream::new(2024, 9);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| (-0.2 * ln.sample(&mut rng)).exp()).collect();
        let (m, v) = mean_var(&draws);
        assert!((cached - m).abs() < 4.0 * (2.0 * v / n as f64).sqrt());
        assert_eq!(cached, ln.moment_e2theta(0.1).unwrap());
    }
}
