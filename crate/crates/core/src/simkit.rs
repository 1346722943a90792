//! Discrete-time multi-source, multi-channel scheduling simulator.
//!
//! Time advances on a grid of step `T_s`. Each step the processes move by one
//! exact transition, deliveries falling inside the step are applied at its
//! end, then idle channels are assigned in id order.
//!
//! The loop works in error coordinates: it carries `ε(t) = X_t - X̂_t` and, for
//! a sample in flight since `S`, `η(t) = X_t - E[X_t | X_S]`. Both obey the
//! centred transition with the same noise, and delivery sets `ε ← η`. This is
//! exact and stays finite for unstable sources whose `X_t` itself overflows.

use crate::estimator::{BanditState, TraceRecord};
use crate::singlesource::Mode;
use crate::stochastic::{RngStream, SourceParams, TransmissionModel};
use crate::whittle::{IndexTable, IndexValue};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    WhittleSignalAware,
    WhittleAge,
    MafZw,
    /// Sample whenever `|ε| ≥ v` and the (single) channel is idle.
    SingleThreshold(f64),
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::WhittleSignalAware => "whittle_signal_aware",
            PolicyKind::WhittleAge => "whittle_age",
            PolicyKind::MafZw => "maf_zw",
            PolicyKind::SingleThreshold(_) => "single_threshold",
        }
    }

    /// Table mode needed by the policy, if any.
    pub fn table_mode(&self) -> Option<Mode> {
        match self {
            PolicyKind::WhittleSignalAware => Some(Mode::SignalAware),
            PolicyKind::WhittleAge => Some(Mode::SignalAgnostic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    pub id: usize,
    pub busy: bool,
    pub serving: Option<usize>,
    pub remaining: f64,
}

impl ChannelState {
    pub fn idle(id: usize) -> Self {
        ChannelState {
            id,
            busy: false,
            serving: None,
            remaining: 0.0,
        }
    }
}

/// Policy plus whatever it needs to compute indices.
#[derive(Debug, Clone)]
pub struct Scheduler {
    pub kind: PolicyKind,
    tables: Vec<IndexTable>,
}

impl Scheduler {
    pub fn new(kind: PolicyKind, tables: Vec<IndexTable>) -> Result<Self> {
        if let Some(mode) = kind.table_mode() {
            if let Some(t) = tables.iter().find(|t| t.mode != mode) {
                return Err(Error::Config(format!(
                    "{} needs {mode:?} tables, source {} has {:?}",
                    kind.name(),
                    t.source,
                    t.mode
                )));
            }
        }
        if let PolicyKind::SingleThreshold(v) = kind {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("threshold must be finite and nonnegative, got {v}")));
            }
        }
        Ok(Scheduler { kind, tables })
    }

    /// Index of every source; sources in flight get `InService`.
    pub fn indices(&self, states: &[BanditState], serving: &[bool]) -> Result<Vec<IndexValue>> {
        states
            .iter()
            .enumerate()
            .map(|(n, s)| {
                if serving[n] || s.in_service() {
                    return Ok(IndexValue::InService);
                }
                Ok(IndexValue::Finite(match self.kind {
                    PolicyKind::WhittleSignalAware => self.tables[n].lookup(s.epsilon)?,
                    PolicyKind::WhittleAge => self.tables[n].lookup(s.delta)?,
                    PolicyKind::MafZw => s.delta,
                    PolicyKind::SingleThreshold(v) => s.epsilon.abs() - v,
                }))
            })
            .collect()
    }

    /// Whittle and threshold policies only activate nonnegative indices.
    pub fn guarded(&self) -> bool {
        !matches!(self.kind, PolicyKind::MafZw)
    }
}

/// Greedy assignment of idle channels (in id order) to the highest remaining
/// index; ties go to the lowest source id.
pub fn assign(indices: &[IndexValue], channels: &[ChannelState], guarded: bool) -> Vec<(usize, usize)> {
    let mut taken = vec![false; indices.len()];
    let mut out = Vec::new();
    for ch in channels.iter().filter(|c| !c.busy) {
        let mut best: Option<usize> = None;
        for (n, &a) in indices.iter().enumerate() {
            if taken[n] || !a.is_finite() {
                continue;
            }
            if best.map_or(true, |b| a > indices[b]) {
                best = Some(n);
            }
        }
        let Some(n) = best else { break };
        if guarded && indices[n].as_f64() < 0.0 {
            break;
        }
        taken[n] = true;
        out.push((n, ch.id));
    }
    out
}

/// One scheduling decision: `(source, channel)` activations.
pub fn decision_step(
    states: &[BanditState],
    channels: &[ChannelState],
    scheduler: &Scheduler,
) -> Result<Vec<(usize, usize)>> {
    let mut serving = vec![false; states.len()];
    for c in channels {
        if let Some(n) = c.serving {
            serving[n] = true;
        }
    }
    let idx = scheduler.indices(states, &serving)?;
    Ok(assign(&idx, channels, scheduler.guarded()))
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub sources: Vec<SourceParams>,
    pub transmission: Vec<TransmissionModel>,
    pub channels: usize,
    pub horizon: f64,
    /// Grid step; defaults to `0.01·min E[Y]`.
    pub step: Option<f64>,
    /// Defaults to `5·max E[Y]`.
    pub warmup: Option<f64>,
    pub seed: u64,
    pub trace: bool,
}

impl SimConfig {
    pub fn step(&self) -> f64 {
        self.step.unwrap_or_else(|| {
            0.01 * self
                .transmission
                .iter()
                .map(|t| t.mean())
                .fold(f64::INFINITY, f64::min)
        })
    }

    pub fn warmup(&self) -> f64 {
        self.warmup
            .unwrap_or_else(|| 5.0 * self.transmission.iter().map(|t| t.mean()).fold(0.0, f64::max))
    }

    pub fn validate(&self, policy: &PolicyKind) -> Result<()> {
        let n = self.sources.len();
        if n == 0 {
            return Err(Error::Config("at least one source is required".into()));
        }
        if self.transmission.len() != n {
            return Err(Error::Config(format!(
                "{} transmission models for {n} sources",
                self.transmission.len()
            )));
        }
        if self.channels == 0 || self.channels > n {
            return Err(Error::Config(format!("channels must lie in 1..={n}, got {}", self.channels)));
        }
        for (k, (p, t)) in self.sources.iter().zip(&self.transmission).enumerate() {
            p.validate().map_err(|e| Error::Config(format!("source {}: {e}", k + 1)))?;
            t.validate().map_err(|e| Error::Config(format!("source {} transmission: {e}", k + 1)))?;
        }
        let step = self.step();
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Config(format!("step must be positive, got {step}")));
        }
        let warmup = self.warmup();
        if !(warmup >= 0.0) || !(self.horizon > warmup + step) {
            return Err(Error::Config(format!(
                "horizon {} must exceed warmup {warmup}",
                self.horizon
            )));
        }
        if matches!(policy, PolicyKind::SingleThreshold(_)) && !(n == 1 && self.channels == 1) {
            return Err(Error::Config("single_threshold requires one source and one channel".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub policy: PolicyKind,
    pub horizon: f64,
    pub step: f64,
    pub warmup: f64,
    /// Time average of `w_n ε_n²` over `[warmup, T]`.
    pub per_source_mse: Vec<f64>,
    pub total_weighted_mse: f64,
    /// Time average of `w_n p_n(Δ_n)`: what a signal-agnostic estimator would pay.
    pub per_source_age_penalty: Vec<f64>,
    /// Samples handed to a channel after warmup.
    pub sample_counts: Vec<u64>,
    /// Sampling instants (all of them) per source.
    pub sample_times: Vec<Vec<f64>>,
    /// Total over the first half of the averaging window, a convergence diagnostic.
    pub first_half_total: f64,
    pub trace: Vec<TraceRecord>,
}

impl SimReport {
    /// `|first half − full| / full`.
    pub fn convergence_gap(&self) -> f64 {
        ((self.first_half_total - self.total_weighted_mse) / self.total_weighted_mse).abs()
    }
}

struct Source {
    params: SourceParams,
    tm: TransmissionModel,
    eps: f64,
    // sampling time of the freshest delivered sample
    sampled_at: f64,
    // in flight: (η, sampled_at)
    flight: Option<(f64, f64)>,
    proc_rng: RngStream,
    tx_rng: RngStream,
}

/// Runs one replication. `scheduler` must carry one table per source for the
/// Whittle policies.
pub fn run_sim(cfg: &SimConfig, scheduler: &Scheduler) -> Result<SimReport> {
    cfg.validate(&scheduler.kind)?;
    let n = cfg.sources.len();
    if scheduler.kind.table_mode().is_some() && scheduler.tables.len() != n {
        return Err(Error::Config(format!(
            "{} index tables for {n} sources",
            scheduler.tables.len()
        )));
    }
    let dt = cfg.step();
    let warmup = cfg.warmup();
    let steps = (cfg.horizon / dt).round() as u64;
    let warm_steps = (warmup / dt).ceil() as u64;
    let mid_step = warm_steps + (steps - warm_steps) / 2;

    let mut src: Vec<Source> = cfg
        .sources
        .iter()
        .zip(&cfg.transmission)
        .enumerate()
        .map(|(k, (p, t))| Source {
            params: *p,
            tm: *t,
            eps: 0.0,
            sampled_at: 0.0,
            flight: None,
            proc_rng: RngStream::new(cfg.seed, 2 * k as u64),
            tx_rng: RngStream::new(cfg.seed, 2 * k as u64 + 1),
        })
        .collect();
    let mut channels: Vec<ChannelState> = (0..cfg.channels).map(ChannelState::idle).collect();
    let mut states = vec![BanditState::default(); n];

    let mut err_sum = vec![0.0; n];
    let mut err_half = vec![0.0; n];
    let mut age_sum = vec![0.0; n];
    let mut counts = vec![0u64; n];
    let mut times: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut trace = Vec::new();
    let mut serving = vec![false; n];

    // exact one-step transition of the centred process: ε' = aε + sd·Z
    let trans: Vec<(f64, f64)> = cfg
        .sources
        .iter()
        .map(|p| (p.decay(dt), p.transition_variance(dt).sqrt()))
        .collect();

    for k in 0..=steps {
        let t = k as f64 * dt;
        if k > 0 {
            for (s, &(a, sd)) in src.iter_mut().zip(&trans) {
                let z = s.proc_rng.normal();
                s.eps = a * s.eps + sd * z;
                if let Some((eta, _)) = s.flight.as_mut() {
                    *eta = a * *eta + sd * z;
                }
            }
            for ch in channels.iter_mut().filter(|c| c.busy) {
                ch.remaining -= dt;
                // delivery snapped to the first grid point at or after start + Y
                if ch.remaining <= 1e-9 * dt {
                    let m = ch.serving.take().expect("busy channel serves a source");
                    let s = &mut src[m];
                    let (eta, at) = s.flight.take().expect("in-flight sample");
                    s.eps = eta;
                    s.sampled_at = at;
                    ch.busy = false;
                    ch.remaining = 0.0;
                    serving[m] = false;
                }
            }
        }

        for (m, s) in src.iter().enumerate() {
            states[m] = BanditState {
                epsilon: s.eps,
                delta: t - s.sampled_at,
                gamma: s.flight.map_or(0.0, |(_, at)| t - at),
                // the estimate itself is never materialized
                xhat: f64::NAN,
            };
        }

        if k > warm_steps {
            for (m, s) in src.iter().enumerate() {
                let w = s.params.weight;
                let e2 = w * states[m].epsilon * states[m].epsilon;
                err_sum[m] += e2;
                if k <= mid_step {
                    err_half[m] += e2;
                }
                age_sum[m] += w * s.params.transition_variance(states[m].delta);
            }
        }

        if k == steps {
            break;
        }

        let idx = scheduler.indices(&states, &serving)?;
        let acts = assign(&idx, &channels, scheduler.guarded());
        if cfg.trace {
            for (m, st) in states.iter().enumerate() {
                trace.push(TraceRecord {
                    t,
                    source: m,
                    epsilon: st.epsilon,
                    delta: st.delta,
                    gamma: st.gamma,
                    index: idx[m].as_f64(),
                    action: acts.iter().any(|&(a, _)| a == m) as u8,
                });
            }
        }
        for (m, c) in acts {
            let s = &mut src[m];
            let y = s.tm.sample(&mut s.tx_rng);
            s.flight = Some((0.0, t));
            let ch = &mut channels[c];
            ch.busy = true;
            ch.serving = Some(m);
            ch.remaining = y;
            serving[m] = true;
            times[m].push(t);
            if k >= warm_steps {
                counts[m] += 1;
            }
        }
        let busy = channels.iter().filter(|c| c.busy).count();
        assert!(busy <= cfg.channels, "channel capacity exceeded");
    }

    let len = (steps - warm_steps) as f64;
    let half = (mid_step - warm_steps) as f64;
    let per_source_mse: Vec<f64> = err_sum.iter().map(|s| s / len).collect();
    Ok(SimReport {
        policy: scheduler.kind,
        horizon: cfg.horizon,
        step: dt,
        warmup,
        total_weighted_mse: per_source_mse.iter().sum(),
        per_source_mse,
        per_source_age_penalty: age_sum.iter().map(|s| s / len).collect(),
        sample_counts: counts,
        sample_times: times,
        first_half_total: err_half.iter().sum::<f64>() / half,
        trace,
    })
}
