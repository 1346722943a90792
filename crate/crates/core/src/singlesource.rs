//! Per-bandit problem with activation cost `λ`: optimal threshold and the
//! fixed point `β(λ)`, for signal-aware and age-based (signal-agnostic) sampling.
//!
//! Cycle expectations come from Monte Carlo over scalar random variables only
//! (`Y_i`, `O_{Y_i}`, `Y_{i+1}`, fresh noise over `Y_{i+1}`). All evaluations on a
//! [`BanditModel`] share one draw set, so `f(β)` is a deterministic function and
//! bisection on it is well defined.

use serde::{Deserialize, Serialize};

use crate::special::{k_inverse, q_inverse, R1, R2, R3};
use crate::stochastic::{RngStream, SourceParams, TransmissionModel};
use crate::{Error, Result};

pub const DEFAULT_MC_BUDGET: usize = 200_000;
pub const DEFAULT_DELAY_QUANTILE: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SignalAware,
    SignalAgnostic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub mc_budget: usize,
    pub seed: u64,
    /// Relative bisection tolerance on β.
    pub rel_tol: f64,
    pub max_expansions: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mc_budget: DEFAULT_MC_BUDGET,
            seed: 0x0b5e_55ed,
            rel_tol: 1e-6,
            max_expansions: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSolution {
    /// Optimal long-run average cost of the per-bandit problem.
    pub beta: f64,
    /// Error threshold (signal-aware) or age threshold in time units
    /// (age-based); infinite when never sampling is optimal.
    pub v: f64,
    pub lambda: f64,
    pub mode: Mode,
    /// `w·E[∫] - β·E[cycle] + λ·E[Y]` at the returned β, divided by `E[cycle]`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleExpectations {
    pub cycle: f64,
    pub cycle_se: f64,
    pub integral: f64,
    pub integral_se: f64,
}

fn mean_se_from_sums(n: usize, sum: f64, sum_sq: f64) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0).max(1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Draws sorted by a key, with prefix sums of four per-draw quantities used
/// below a cut and suffix sums of four used at or above it. Any sample mean
/// that is piecewise in `key < cut` then costs one binary search.
#[derive(Debug, Clone)]
struct SortedSums {
    keys: Vec<f64>,
    below: Vec<[f64; 4]>,
    above: Vec<[f64; 4]>,
}

impl SortedSums {
    fn new(mut rows: Vec<(f64, [f64; 4], [f64; 4])>) -> Self {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = rows.len();
        let mut below = vec![[0.0; 4]; n + 1];
        let mut above = vec![[0.0; 4]; n + 1];
        for i in 0..n {
            below[i + 1] = std::array::from_fn(|j| below[i][j] + rows[i].1[j]);
        }
        for i in (0..n).rev() {
            above[i] = std::array::from_fn(|j| above[i + 1][j] + rows[i].2[j]);
        }
        SortedSums {
            keys: rows.into_iter().map(|r| r.0).collect(),
            below,
            above,
        }
    }

    /// `(k, Σ_{key<cut} below, Σ_{key≥cut} above)`.
    fn split(&self, cut: f64) -> (usize, [f64; 4], [f64; 4]) {
        let k = self.keys.partition_point(|&x| x < cut);
        (k, self.below[k], self.above[k])
    }
}

/// One source together with its transmission model, moments and CRN draws.
#[derive(Debug, Clone)]
pub struct BanditModel {
    pub params: SourceParams,
    pub tm: TransmissionModel,
    mean_y: f64,
    /// `E[e^{-2θY}]`
    moment: f64,
    /// `E[Y²]`
    second_y: f64,
    mc_budget: usize,
    /// Draws ordered by `|O_Y|`; below: `y - R1(O)`, its square, `R2(O)`, its
    /// square; above: `y`, `y²`, `O²`, `O⁴`.
    by_error: SortedSums,
    /// Draws ordered by `Y`; below: `R3(Y)`, its square; above: `y`, `y²`,
    /// `E[R3(Y + Y')] - R3(Y)`, its square.
    by_delay: SortedSums,
    seed: u64,
}

impl BanditModel {
    pub fn new(params: SourceParams, tm: TransmissionModel, mc_budget: usize, seed: u64) -> Result<Self> {
        let mut rng = RngStream::new(seed, 0xc1c1e);
        Self::with_rng(params, tm, mc_budget, &mut rng)
    }

    pub fn with_rng(params: SourceParams, tm: TransmissionModel, mc_budget: usize, rng: &mut RngStream) -> Result<Self> {
        let (ys, zs) = Self::draws(&params, &tm, mc_budget, rng)?;
        // Without a closed form, M is taken from the model's own draws so that
        // every expectation refers to the same (empirical) delay distribution.
        let empirical = matches!(tm, TransmissionModel::NormalizedLognormal { .. });
        Self::from_draws(params, tm, ys, zs, empirical, rng.seed())
    }

    /// Like [`new`](Self::new), but delays above the empirical `quantile` of
    /// the draws are clamped to it and every delay moment is taken from the
    /// clamped draws. Only the index model sees the cap; it exists for
    /// heavy-tailed delays whose `E[e^{-2θY}]` diverges.
    /// Model used to build a scheduling index. Where `E[e^{-2θY}]` is
    /// infinite the index would be degenerate, so the delay draws are
    /// winsorized at `quantile` instead; otherwise this is [`new`](Self::new).
    pub fn for_index(
        params: SourceParams,
        tm: TransmissionModel,
        mc_budget: usize,
        seed: u64,
        quantile: f64,
    ) -> Result<Self> {
        if tm.moment_diverges(params.theta) {
            Self::with_delay_cap(params, tm, mc_budget, seed, quantile)
        } else {
            Self::new(params, tm, mc_budget, seed)
        }
    }

    pub fn with_delay_cap(
        params: SourceParams,
        tm: TransmissionModel,
        mc_budget: usize,
        seed: u64,
        quantile: f64,
    ) -> Result<Self> {
        if !(quantile > 0.0 && quantile <= 1.0) {
            return Err(Error::Domain(format!("delay quantile must lie in (0, 1], got {quantile}")));
        }
        let mut rng = RngStream::new(seed, 0xc1c1e);
        let (mut ys, zs) = Self::draws(&params, &tm, mc_budget, &mut rng)?;
        let mut sorted = ys.clone();
        sorted.sort_by(f64::total_cmp);
        let k = ((quantile * mc_budget as f64).ceil() as usize).clamp(1, mc_budget) - 1;
        let cap = sorted[k];
        for y in ys.iter_mut() {
            *y = y.min(cap);
        }
        Self::from_draws(params, tm, ys, zs, true, seed)
    }

    fn draws(
        params: &SourceParams,
        tm: &TransmissionModel,
        mc_budget: usize,
        rng: &mut RngStream,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        params.validate()?;
        tm.validate()?;
        if mc_budget < 1000 {
            return Err(Error::Domain(format!("mc_budget {mc_budget} below 1000")));
        }
        tm.check_moment(params.theta)?;
        let mut ys = Vec::with_capacity(mc_budget);
        let mut zs = Vec::with_capacity(mc_budget);
        for _ in 0..mc_budget {
            ys.push(tm.sample(rng));
            zs.push(rng.normal());
        }
        Ok((ys, zs))
    }

    fn from_draws(
        params: SourceParams,
        tm: TransmissionModel,
        y_first: Vec<f64>,
        zs: Vec<f64>,
        empirical: bool,
        seed: u64,
    ) -> Result<Self> {
        let n = y_first.len() as f64;
        let o_first: Vec<f64> = y_first
            .iter()
            .zip(&zs)
            .map(|(&y, &z)| params.transition_variance(y).sqrt() * z)
            .collect();
        let (mean_y, second_y, moment) = if empirical {
            (
                y_first.iter().sum::<f64>() / n,
                y_first.iter().map(|y| y * y).sum::<f64>() / n,
                if params.is_wiener() {
                    1.0
                } else {
                    y_first.iter().map(|&y| (-2.0 * params.theta * y).exp()).sum::<f64>() / n
                },
            )
        } else {
            (tm.mean(), tm.second_moment(), tm.moment_e2theta(params.theta)?)
        };
        let mut by_error = Vec::with_capacity(y_first.len());
        for (&y, &o) in y_first.iter().zip(&o_first) {
            let a = y - R1(o, &params)?;
            let r2 = R2(o, &params)?;
            let o2 = o * o;
            by_error.push((o.abs(), [a, a * a, r2, r2 * r2], [y, y * y, o2, o2 * o2]));
        }
        let mut model = BanditModel {
            params,
            tm,
            mean_y,
            moment,
            second_y,
            mc_budget: y_first.len(),
            by_error: SortedSums::new(by_error),
            by_delay: SortedSums::new(Vec::new()),
            seed,
        };
        let mut by_delay = Vec::with_capacity(y_first.len());
        for &y in &y_first {
            let r3 = R3(y, &params)?;
            let h = model.r3_after(y) - r3;
            by_delay.push((y, [r3, r3 * r3, 0.0, 0.0], [y, y * y, h, h * h]));
        }
        model.by_delay = SortedSums::new(by_delay);
        Ok(model)
    }

    pub fn params(&self) -> &SourceParams {
        &self.params
    }

    pub fn transmission(&self) -> &TransmissionModel {
        &self.tm
    }

    pub fn mc_budget(&self) -> usize {
        self.mc_budget
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mean_y(&self) -> f64 {
        self.mean_y
    }

    pub fn moment(&self) -> f64 {
        self.moment
    }

    fn w(&self) -> f64 {
        self.params.weight
    }

    fn s2(&self) -> f64 {
        self.params.sigma * self.params.sigma
    }

    /// `w·E[p(Y)]`: below this β the threshold is zero (zero-wait).
    pub fn beta_floor(&self) -> f64 {
        let th = self.params.theta;
        if self.params.is_wiener() {
            self.w() * self.s2() * self.mean_y
        } else {
            self.w() * self.s2() * (1.0 - self.moment) / (2.0 * th)
        }
    }

    /// `wσ²/2θ` for stable sources: β must stay below it.
    pub fn beta_cap(&self) -> Option<f64> {
        (self.params.theta > 0.0 && !self.params.is_wiener())
            .then(|| self.w() * self.s2() / (2.0 * self.params.theta))
    }

    /// Optimal error threshold `v(β)`.
    pub fn threshold_of_beta(&self, beta: f64) -> Result<f64> {
        if !beta.is_finite() {
            return Err(Error::Domain(format!("beta must be finite, got {beta}")));
        }
        if let Some(cap) = self.beta_cap() {
            if beta >= cap {
                return Err(Error::Domain(format!(
                    "stable branch requires beta < w·sigma²/(2·theta) = {cap}, got {beta}"
                )));
            }
        }
        if beta <= self.beta_floor() {
            return Ok(0.0);
        }
        let p = &self.params;
        let w = self.w();
        if p.is_wiener() {
            return Ok((3.0 * (beta - w * self.s2() * self.mean_y) / w).sqrt());
        }
        let c = w * self.s2() / (2.0 * p.theta);
        let arg = c * self.moment / (c - beta);
        if p.theta > 0.0 {
            Ok(p.sigma / p.theta.sqrt() * q_inverse(arg.max(1.0))?)
        } else {
            Ok(p.sigma / (-p.theta).sqrt() * k_inverse(arg.min(1.0))?)
        }
    }

    /// Inverse of [`threshold_of_beta`](Self::threshold_of_beta) on `v > 0`.
    pub fn beta_of_threshold(&self, v: f64) -> f64 {
        let p = &self.params;
        let v = v.abs();
        if p.is_wiener() {
            return self.w() * (v * v / 3.0 + self.s2() * self.mean_y);
        }
        let c = self.w() * self.s2() / (2.0 * p.theta);
        let ratio = if p.theta > 0.0 {
            crate::special::Q(p.theta.sqrt() * v / p.sigma)
        } else {
            crate::special::K((-p.theta).sqrt() * v / p.sigma)
        };
        c * (1.0 - self.moment / ratio)
    }

    /// `E[R3(a + Y')]` for a fresh transmission time `Y'`.
    fn r3_after(&self, a: f64) -> f64 {
        let p = &self.params;
        let s2 = self.s2();
        if p.is_wiener() {
            0.5 * s2 * (a * a + 2.0 * a * self.mean_y + self.second_y)
        } else {
            let th = p.theta;
            s2 / (2.0 * th) * (a + self.mean_y - (1.0 - (-2.0 * th * a).exp() * self.moment) / (2.0 * th))
        }
    }

    /// `E[(1 - e^{-2θY})/(2θ)]` and `E[R3(Y)]` for a fresh transmission time.
    fn fresh_delay_terms(&self) -> (f64, f64) {
        let p = &self.params;
        if p.is_wiener() {
            (self.mean_y, 0.5 * self.s2() * self.second_y)
        } else {
            let g = (1.0 - self.moment) / (2.0 * p.theta);
            (g, self.s2() / (2.0 * p.theta) * (self.mean_y - g))
        }
    }

    /// Expected cycle length and error integral under the threshold `v`.
    ///
    /// Both are conditioned on everything but the first delay's endpoint
    /// `O_Y`: the exit from `(-v, v)` contributes `R(v) - R(O_Y)` and the
    /// next delay contributes its Gaussian mean. `R1`/`R2` at the raw
    /// endpoint would have infinite variance for stable sources.
    pub fn per_cycle_expectations(&self, v: f64) -> Result<CycleExpectations> {
        if !(v >= 0.0) {
            return Err(Error::Domain(format!("threshold must be nonnegative, got {v}")));
        }
        let p = &self.params;
        let (r1v, r2v) = (R1(v, p)?, R2(v, p)?);
        let (g_next, r3_next) = self.fresh_delay_terms();
        let n = self.mc_budget;
        let (k, lo, hi) = self.by_error.split(v);
        let kf = k as f64;
        let [a, a2, r2, r2sq] = lo;
        let [y, y2, o2, o4] = hi;
        let cycle_sum = a + kf * r1v + y;
        let cycle_sq = a2 + 2.0 * r1v * a + kf * r1v * r1v + y2;
        let cb = r2v + v * v * g_next + r3_next;
        let int_sum = kf * cb - r2 + g_next * o2 + (n - k) as f64 * r3_next;
        let int_sq = kf * cb * cb - 2.0 * cb * r2 + r2sq
            + g_next * g_next * o4
            + 2.0 * g_next * r3_next * o2
            + (n - k) as f64 * r3_next * r3_next;
        let (cycle, cycle_se) = mean_se_from_sums(n, cycle_sum, cycle_sq);
        let (integral, integral_se) = mean_se_from_sums(n, int_sum, int_sq);
        Ok(CycleExpectations {
            cycle,
            cycle_se,
            integral,
            integral_se,
        })
    }

    /// Smallest age `δ` with `w·E[p(δ + Y)] ≥ β`, clamped at 0.
    pub fn age_threshold_of_beta(&self, beta: f64) -> Result<f64> {
        if !beta.is_finite() {
            return Err(Error::Domain(format!("beta must be finite, got {beta}")));
        }
        if let Some(cap) = self.beta_cap() {
            if beta >= cap {
                return Err(Error::Domain(format!(
                    "stable branch requires beta < w·sigma²/(2·theta) = {cap}, got {beta}"
                )));
            }
        }
        if beta <= self.beta_floor() {
            return Ok(0.0);
        }
        let p = &self.params;
        let w = self.w();
        let d = if p.is_wiener() {
            beta / (w * self.s2()) - self.mean_y
        } else {
            let r = (1.0 - 2.0 * p.theta * beta / (w * self.s2())) / self.moment;
            -r.ln() / (2.0 * p.theta)
        };
        Ok(d.max(0.0))
    }

    /// `E[p(δ + Y)]` (unweighted).
    pub fn expected_penalty_after(&self, delta: f64) -> f64 {
        let p = &self.params;
        if p.is_wiener() {
            self.s2() * (delta + self.mean_y)
        } else {
            self.s2() / (2.0 * p.theta) * (1.0 - (-2.0 * p.theta * delta).exp() * self.moment)
        }
    }

    /// Cycle expectations when sampling once the age reaches `δ`.
    pub fn age_cycle_expectations(&self, delta: f64) -> Result<CycleExpectations> {
        if !(delta >= 0.0) {
            return Err(Error::Domain(format!("age threshold must be nonnegative, got {delta}")));
        }
        let n = self.mc_budget;
        let (k, lo, hi) = self.by_delay.split(delta);
        let kf = k as f64;
        let [r3, r3sq, _, _] = lo;
        let [y, y2, h, h2] = hi;
        let c = self.r3_after(delta);
        let (cycle, cycle_se) = mean_se_from_sums(n, kf * delta + y, kf * delta * delta + y2);
        let (integral, integral_se) =
            mean_se_from_sums(n, kf * c - r3 + h, kf * c * c - 2.0 * c * r3 + r3sq + h2);
        Ok(CycleExpectations {
            cycle,
            cycle_se,
            integral,
            integral_se,
        })
    }

    fn expectations(&self, mode: Mode, beta: f64) -> Result<(f64, CycleExpectations)> {
        match mode {
            Mode::SignalAware => {
                let v = self.threshold_of_beta(beta)?;
                Ok((v, self.per_cycle_expectations(v)?))
            }
            Mode::SignalAgnostic => {
                let d = self.age_threshold_of_beta(beta)?;
                Ok((d, self.age_cycle_expectations(d)?))
            }
        }
    }

    /// Solves `w·E[∫] - β·E[cycle] + λ·E[Y] = 0` for β by bisection.
    pub fn solve(&self, mode: Mode, lambda: f64, cfg: &SolverConfig) -> Result<ThresholdSolution> {
        if !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be finite, got {lambda}")));
        }
        let w = self.w();
        let ey = self.mean_y;
        let f = |beta: f64| -> Result<(f64, f64, CycleExpectations)> {
            let (v, e) = self.expectations(mode, beta)?;
            Ok((w * e.integral - beta * e.cycle + lambda * ey, v, e))
        };

        let floor = self.beta_floor();
        let (f_floor, _, zero_wait) = f(floor)?;
        if f_floor <= 0.0 {
            // root lies on the zero-wait segment, where f is affine in β
            let beta = (w * zero_wait.integral + lambda * ey) / zero_wait.cycle;
            return Ok(ThresholdSolution {
                beta,
                v: 0.0,
                lambda,
                mode,
                residual: (w * zero_wait.integral - beta * zero_wait.cycle + lambda * ey) / zero_wait.cycle,
            });
        }

        let scale = floor.abs().max(w * self.s2() * ey).max(1e-12);
        let mut lo = floor;
        let mut hi = floor;
        let mut found = false;
        for k in 1..=cfg.max_expansions {
            hi = match self.beta_cap() {
                Some(cap) => floor + (cap - floor) * (1.0 - 0.5f64.powi(k as i32)),
                None => floor + scale * 2f64.powi(k as i32 - 1),
            };
            if !hi.is_finite() || hi <= lo {
                break;
            }
            if self.beta_cap().is_some_and(|cap| hi >= cap) {
                // f stays positive up to the stationary cost: never sampling is optimal
                return Ok(ThresholdSolution {
                    beta: hi,
                    v: f64::INFINITY,
                    lambda,
                    mode,
                    residual: 0.0,
                });
            }
            if f(hi)?.0 < 0.0 {
                found = true;
                break;
            }
            lo = hi;
        }
        if !found {
            return Err(Error::Solver(format!(
                "no sign change for lambda = {lambda} within {} bracket expansions",
                cfg.max_expansions
            )));
        }
        while hi - lo > cfg.rel_tol * hi.abs().max(lo.abs()).max(1e-300) {
            let mid = 0.5 * (lo + hi);
            if f(mid)?.0 > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let beta = 0.5 * (lo + hi);
        let (fv, v, e) = f(beta)?;
        Ok(ThresholdSolution {
            beta,
            v,
            lambda,
            mode,
            residual: fv / e.cycle,
        })
    }

    pub fn solve_beta(&self, lambda: f64, cfg: &SolverConfig) -> Result<ThresholdSolution> {
        self.solve(Mode::SignalAware, lambda, cfg)
    }

    pub fn solve_beta_age(&self, lambda: f64, cfg: &SolverConfig) -> Result<ThresholdSolution> {
        self.solve(Mode::SignalAgnostic, lambda, cfg)
    }
}

/// Optimal threshold `v(β)` for one source.
pub fn threshold_of_beta(beta: f64, params: &SourceParams, tm: &TransmissionModel) -> Result<f64> {
    // the closed form needs only E[Y] and E[e^{-2θY}]; a minimal draw set suffices
    BanditModel::new(*params, *tm, 1000, 0)?.threshold_of_beta(beta)
}

/// Lemma-style cycle expectations under threshold `v` with `mc_budget` scalar draws.
pub fn per_cycle_expectations(
    v: f64,
    params: &SourceParams,
    tm: &TransmissionModel,
    mc_budget: usize,
    rng: &mut RngStream,
) -> Result<CycleExpectations> {
    BanditModel::with_rng(*params, *tm, mc_budget, rng)?.per_cycle_expectations(v)
}

pub fn solve_beta(lambda: f64, params: &SourceParams, tm: &TransmissionModel, cfg: &SolverConfig) -> Result<ThresholdSolution> {
    BanditModel::new(*params, *tm, cfg.mc_budget, cfg.seed)?.solve_beta(lambda, cfg)
}

pub fn solve_beta_age(
    lambda: f64,
    params: &SourceParams,
    tm: &TransmissionModel,
    cfg: &SolverConfig,
) -> Result<ThresholdSolution> {
    BanditModel::new(*params, *tm, cfg.mc_budget, cfg.seed)?.solve_beta_age(lambda, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(theta: f64, sigma: f64, w: f64) -> SourceParams {
        SourceParams::new(theta, 0.0, sigma, w).unwrap()
    }

    fn cfg(budget: usize) -> SolverConfig {
        SolverConfig {
            mc_budget: budget,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn wiener_threshold_by_hand() {
        let tm = TransmissionModel::Exponential { mean: 1.0 };
        let p = src(0.0, 1.0, 1.0);
        assert!((threshold_of_beta(4.0 / 3.0, &p, &tm).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(threshold_of_beta(1.0, &p, &tm).unwrap(), 0.0);
        assert_eq!(threshold_of_beta(0.5, &p, &tm).unwrap(), 0.0);
    }

    #[test]
    fn threshold_increasing_in_beta() {
        let tm = TransmissionModel::Exponential { mean: 2.0 };
        for &th in &[0.1, -0.2] {
            let m = BanditModel::new(src(th, 1.0, 1.0), tm, 1000, 1).unwrap();
            let lo = m.beta_floor();
            let hi = m.beta_cap().unwrap_or(lo + 20.0);
            let mut prev = -1.0;
            for i in 1..60 {
                let b = lo + (hi - lo) * i as f64 / 61.0;
                let v = m.threshold_of_beta(b).unwrap();
                assert!(v > prev, "theta {th}: v({b}) = {v} not above {prev}");
                prev = v;
                assert!((m.beta_of_threshold(v) / b - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn stable_branch_rejects_beta_at_cap() {
        let tm = TransmissionModel::Exponential { mean: 2.0 };
        let m = BanditModel::new(src(0.1, 1.0, 1.0), tm, 1000, 1).unwrap();
        let cap = m.beta_cap().unwrap();
        assert!((cap - 5.0).abs() < 1e-12);
        let err = m.threshold_of_beta(cap).unwrap_err();
        assert!(err.to_string().contains("stable branch"));
        assert!(m.threshold_of_beta(f64::NAN).is_err());
    }

    #[test]
    fn zero_threshold_is_zero_wait() {
        let tm = TransmissionModel::Exponential { mean: 1.0 };
        let m = BanditModel::new(src(0.3, 1.0, 1.0), tm, 20_000, 3).unwrap();
        let e = m.per_cycle_expectations(0.0).unwrap();
        // zero wait: E[cycle] = E[R1(|O_Y|)] = E[Y]
        assert!((e.cycle - 1.0).abs() < 3.0 * e.cycle_se + 1e-3);
    }

    #[test]
    fn wiener_constant_delay_cycle() {
        // θ=0, σ=1, Y≡1, v=1: E[cycle] = E[max(1, W₁²)]
        let tm = TransmissionModel::Constant { value: 1.0 };
        let m = BanditModel::new(src(0.0, 1.0, 1.0), tm, 200_000, 5).unwrap();
        let e = m.per_cycle_expectations(1.0).unwrap();
        // E[max(1, Z²)] = 1 + E[(Z²-1)⁺] = 1 + 2(φ(1) + ... ) computed by quadrature
        let oracle = {
            let n = 200_000;
            let h = 12.0 / n as f64;
            let mut s = 0.0;
            for i in 0..n {
                let z = -6.0 + (i as f64 + 0.5) * h;
                s += (z * z).max(1.0) * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() * h;
            }
            s
        };
        assert!((e.cycle - oracle).abs() < 3.0 * e.cycle_se);
    }

    #[test]
    fn solve_returns_small_residual() {
        let tm = TransmissionModel::Exponential { mean: 2.0 };
        for &th in &[-0.2, 0.0, 0.1] {
            let m = BanditModel::new(src(th, 1.0, 1.0), tm, 20_000, 9).unwrap();
            let s = m.solve_beta(0.0, &cfg(20_000)).unwrap();
            assert!(s.residual.abs() < 1e-3, "theta {th}: residual {}", s.residual);
            assert!(s.v > 0.0);
        }
    }

    #[test]
    fn beta_increases_with_lambda() {
        let tm = TransmissionModel::Exponential { mean: 1.0 };
        let m = BanditModel::new(src(0.2, 1.0, 1.0), tm, 20_000, 4).unwrap();
        let b0 = m.solve_beta(0.0, &cfg(20_000)).unwrap();
        let b1 = m.solve_beta(5.0, &cfg(20_000)).unwrap();
        assert!(b1.beta > b0.beta);
        assert!(b1.v > b0.v);
    }

    #[test]
    fn weight_homogeneity() {
        let tm = TransmissionModel::Exponential { mean: 2.0 };
        let a = BanditModel::new(src(0.1, 1.0, 1.0), tm, 20_000, 4).unwrap();
        let b = BanditModel::new(src(0.1, 1.0, 3.0), tm, 20_000, 4).unwrap();
        let sa = a.solve_beta(0.0, &cfg(20_000)).unwrap();
        let sb = b.solve_beta(0.0, &cfg(20_000)).unwrap();
        assert!((sb.beta / sa.beta - 3.0).abs() < 1e-4);
        assert!((sb.v / sa.v - 1.0).abs() < 1e-4);
        let ga = a.solve_beta_age(0.0, &cfg(20_000)).unwrap();
        let gb = b.solve_beta_age(0.0, &cfg(20_000)).unwrap();
        assert!((gb.beta / ga.beta - 3.0).abs() < 1e-4);
    }

    #[test]
    fn age_solver_never_samples_above_bounded_index() {
        let p = SourceParams::new(0.1, 0.0, 1.0, 1.0).unwrap();
        let tm = TransmissionModel::Exponential { mean: 2.0 };
        let m = std::sync::Arc::new(BanditModel::new(p, tm, 20_000, 3).unwrap());
        // the age index saturates: E[p(δ + Y)] tends to σ²/(2θ)
        let far = crate::whittle::AgeIndex::new(m.clone()).index(60.0, 0.0).unwrap().as_f64();
        assert!(far < 20.0, "{far}");
        let s = m.solve_beta_age(20.0, &SolverConfig::default()).unwrap();
        assert!(s.v.is_infinite());
        assert!((s.beta - 5.0).abs() < 1e-9);
        assert!(m.solve_beta_age(0.5 * far, &SolverConfig::default()).unwrap().v.is_finite());
    }

    #[test]
    fn index_model_caps_divergent_delays_only() {
        let unstable = SourceParams::new(-0.4, 0.0, 1.0, 1.0).unwrap();
        let ln = TransmissionModel::NormalizedLognormal { rho: 1.5 };
        let capped = BanditModel::for_index(unstable, ln, 20_000, 4, 0.99).unwrap();
        // every draw is at most about the 99% quantile exp(ρ·2.326 - ρ²/2) ≈ 10.6
        assert!(capped.moment() < (0.8f64 * 11.0).exp());
        assert!(BanditModel::for_index(unstable, ln, 20_000, 4, 0.0).is_err());

        let stable = SourceParams::new(0.3, 0.0, 1.0, 1.0).unwrap();
        let a = BanditModel::for_index(stable, ln, 20_000, 4, 0.5).unwrap();
        let b = BanditModel::new(stable, ln, 20_000, 4).unwrap();
        assert_eq!(a.moment(), b.moment());
    }

    #[test]
    fn age_constant_delay_zero_wait() {
        // Y ≡ c, θ = 0, σ = 1: β_age = (∫_c^{2c} s ds)/c = 3c/2
        let c = 0.8;
        let tm = TransmissionModel::Constant { value: c };
        let m = BanditModel::new(src(0.0, 1.0, 1.0), tm, 1000, 2).unwrap();
        let s = m.solve_beta_age(0.0, &cfg(1000)).unwrap();
        assert!((s.beta / (1.5 * c) - 1.0).abs() < 1e-5);
        // δ* = c/2 lies below the age at delivery, so sampling is zero-wait
        assert!((s.v - 0.5 * c).abs() < 1e-5);
        assert!(s.v < c);
        assert!((m.age_threshold_of_beta(1.5 * c).unwrap() - 0.5 * c).abs() < 1e-12);
    }

    #[test]
    fn small_mc_budget_rejected() {
        let tm = TransmissionModel::Exponential { mean: 1.0 };
        assert!(BanditModel::new(src(0.0, 1.0, 1.0), tm, 10, 0).is_err());
        assert!(BanditModel::new(src(-0.6, 1.0, 1.0), tm, 1000, 0).is_err());
    }
}
