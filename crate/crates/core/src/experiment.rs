//! Experiment configuration, sweeps, CSV output and self-checks.
//!
//! Configurations are TOML; see the repository README for the grammar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::simkit::{run_sim, PolicyKind, Scheduler, SimConfig, SimReport};
use crate::singlesource::{BanditModel, Mode, SolverConfig, DEFAULT_DELAY_QUANTILE, DEFAULT_MC_BUDGET};
use crate::special::{self, SpecialError};
use crate::stochastic::{hitting_time_mc, RngStream, SourceParams, TransmissionModel, DEFAULT_STEP_BUDGET};
use crate::whittle::{AgeIndex, GridSpec, IndexEvaluator, IndexTable, SignalAwareIndex};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    WhittleSignalAware,
    WhittleAge,
    MafZw,
    SingleThreshold(f64),
}

impl From<PolicySpec> for PolicyKind {
    fn from(p: PolicySpec) -> Self {
        match p {
            PolicySpec::WhittleSignalAware => PolicyKind::WhittleSignalAware,
            PolicySpec::WhittleAge => PolicyKind::WhittleAge,
            PolicySpec::MafZw => PolicyKind::MafZw,
            PolicySpec::SingleThreshold(v) => PolicyKind::SingleThreshold(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub theta: f64,
    #[serde(default)]
    pub mu: f64,
    pub sigma: f64,
    pub weight: f64,
    /// Overrides the experiment-wide transmission model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmission: Option<TransmissionModel>,
}

impl SourceSpec {
    pub fn params(&self) -> Result<SourceParams> {
        SourceParams::new(self.theta, self.mu, self.sigma, self.weight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Sigma,
    Theta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    /// 1-based source number.
    pub source: usize,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn label(&self) -> String {
        let v = match self.variable {
            SweepVariable::Sigma => "sigma",
            SweepVariable::Theta => "theta",
        };
        format!("{v}_{}", self.source)
    }
}

fn one() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_budget() -> usize {
    DEFAULT_MC_BUDGET
}

fn default_quantile() -> f64 {
    DEFAULT_DELAY_QUANTILE
}

fn check_quantile(q: f64) -> Result<()> {
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("index_delay_quantile must lie in (0, 1], got {q}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channels: usize,
    pub policies: Vec<PolicySpec>,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<f64>,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_budget")]
    pub mc_budget: usize,
    #[serde(default = "default_quantile")]
    pub index_delay_quantile: f64,
    #[serde(default)]
    pub trace: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmission: Option<TransmissionModel>,
    #[serde(rename = "source")]
    pub sources: Vec<SourceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sources.len();
        if n == 0 {
            return Err(Error::Config("at least one [[source]] is required".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("policies must not be empty".into()));
        }
        check_quantile(self.index_delay_quantile)?;
        for (k, s) in self.sources.iter().enumerate() {
            s.params()
                .map_err(|e| Error::Config(format!("source {}: {e}", k + 1)))?;
            if s.transmission.is_none() && self.transmission.is_none() {
                return Err(Error::Config(format!(
                    "source {}: missing field `transmission` (and no experiment-wide [transmission])",
                    k + 1
                )));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.source == 0 || sw.source > n {
                return Err(Error::Config(format!(
                    "sweep.source = {} does not name one of the {n} sources",
                    sw.source
                )));
            }
            if sw.values.is_empty() || sw.values.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Config("sweep.values must be nonempty and strictly increasing".into()));
            }
        }
        for k in 0..self.points() {
            let sim = self.sim_config(k, self.seed)?;
            for p in &self.policies {
                sim.validate(&(*p).into())?;
            }
        }
        Ok(())
    }

    /// Number of sweep points (1 without a sweep).
    pub fn points(&self) -> usize {
        self.sweep.as_ref().map_or(1, |s| s.values.len())
    }

    /// Source parameters at sweep point `k`.
    pub fn sources_at(&self, k: usize) -> Result<(Vec<SourceParams>, Vec<TransmissionModel>)> {
        let mut ps = Vec::with_capacity(self.sources.len());
        let mut ts = Vec::with_capacity(self.sources.len());
        for (i, s) in self.sources.iter().enumerate() {
            let mut spec = s.clone();
            if let Some(sw) = &self.sweep {
                if sw.source == i + 1 {
                    match sw.variable {
                        SweepVariable::Sigma => spec.sigma = sw.values[k],
                        SweepVariable::Theta => spec.theta = sw.values[k],
                    }
                }
            }
            ps.push(
                spec.params()
                    .map_err(|e| Error::Config(format!("source {}: {e}", i + 1)))?,
            );
            let tm = s
                .transmission
                .or(self.transmission)
                .ok_or_else(|| Error::Config(format!("source {}: missing field `transmission`", i + 1)))?;
            tm.validate()
                .map_err(|e| Error::Config(format!("source {} transmission: {e}", i + 1)))?;
            ts.push(tm);
        }
        Ok((ps, ts))
    }

    pub fn sim_config(&self, k: usize, seed: u64) -> Result<SimConfig> {
        let (sources, transmission) = self.sources_at(k)?;
        Ok(SimConfig {
            sources,
            transmission,
            channels: self.channels,
            horizon: self.horizon,
            step: self.step,
            warmup: self.warmup,
            seed,
            trace: self.trace,
        })
    }

    pub fn replication_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }

    /// Seed for the index table of source `n` (0-based); independent of the
    /// sweep point so unchanged sources share tables.
    pub fn table_seed(&self, n: usize) -> u64 {
        self.seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(0x7ab1e + n as u64)
    }
}

/// One summary row: one (policy, sweep point, replication) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub policy: String,
    pub sweep_var: String,
    pub sweep_value: Option<f64>,
    pub replication: usize,
    pub seed: u64,
    pub report: SimReport,
}

#[derive(Debug, Clone, PartialEq)]
struct TableKey {
    source: usize,
    params: [u64; 4],
    tm: String,
    mode: Mode,
}

/// Builds (or reuses) index tables for every source at every sweep point.
fn build_tables(cfg: &ExperimentConfig, mode: Mode) -> Result<Vec<Vec<IndexTable>>> {
    let mut cache: Vec<(TableKey, IndexTable)> = Vec::new();
    let mut out = Vec::with_capacity(cfg.points());
    for k in 0..cfg.points() {
        let (ps, ts) = cfg.sources_at(k)?;
        let mut row = Vec::with_capacity(ps.len());
        for (n, (p, tm)) in ps.iter().zip(&ts).enumerate() {
            let key = TableKey {
                source: n,
                params: [p.theta.to_bits(), p.mu.to_bits(), p.sigma.to_bits(), p.weight.to_bits()],
                tm: format!("{tm:?}"),
                mode,
            };
            if let Some((_, t)) = cache.iter().find(|(c, _)| *c == key) {
                row.push(t.clone());
                continue;
            }
            let seed = cfg.table_seed(n);
            let model = BanditModel::for_index(*p, *tm, cfg.mc_budget, seed, cfg.index_delay_quantile)?;
            let t = IndexTable::for_model(n, Arc::new(model), mode, None, seed)?;
            cache.push((key, t.clone()));
            row.push(t);
        }
        out.push(row);
    }
    Ok(out)
}

/// Runs every (sweep point, policy, replication) combination. Rows come back
/// in that nesting order regardless of thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRow>> {
    cfg.validate()?;
    let mut sa = None;
    let mut age = None;
    for p in &cfg.policies {
        match PolicyKind::from(*p).table_mode() {
            Some(Mode::SignalAware) if sa.is_none() => sa = Some(build_tables(cfg, Mode::SignalAware)?),
            Some(Mode::SignalAgnostic) if age.is_none() => {
                age = Some(build_tables(cfg, Mode::SignalAgnostic)?)
            }
            _ => {}
        }
    }
    let mut jobs = Vec::new();
    for k in 0..cfg.points() {
        for p in &cfg.policies {
            let kind = PolicyKind::from(*p);
            let tables = match kind.table_mode() {
                Some(Mode::SignalAware) => sa.as_ref().expect("built")[k].clone(),
                Some(Mode::SignalAgnostic) => age.as_ref().expect("built")[k].clone(),
                None => Vec::new(),
            };
            let sched = Arc::new(Scheduler::new(kind, tables)?);
            for r in 0..cfg.replications {
                jobs.push((k, sched.clone(), r));
            }
        }
    }
    let label = cfg.sweep.as_ref().map_or_else(|| "none".to_string(), |s| s.label());
    jobs.into_par_iter()
        .map(|(k, sched, r)| {
            let seed = cfg.replication_seed(r);
            let sim = cfg.sim_config(k, seed)?;
            let report = run_sim(&sim, &sched)?;
            Ok(RunRow {
                policy: sched.kind.name().to_string(),
                sweep_var: label.clone(),
                sweep_value: cfg.sweep.as_ref().map(|s| s.values[k]),
                replication: r,
                seed,
                report,
            })
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

/// `policy, sweep_var, sweep_value, replication, seed, total_weighted_mse,
/// per_source_mse_1..N, samples_sent_1..N`.
pub fn write_summary<W: Write>(rows: &[RunRow], out: W) -> Result<()> {
    let n = rows.first().map_or(0, |r| r.report.per_source_mse.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["policy", "sweep_var", "sweep_value", "replication", "seed", "total_weighted_mse"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=n).map(|i| format!("per_source_mse_{i}")));
    header.extend((1..=n).map(|i| format!("samples_sent_{i}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.policy.clone(),
            r.sweep_var.clone(),
            fmt_opt(r.sweep_value),
            r.replication.to_string(),
            r.seed.to_string(),
            format!("{}", r.report.total_weighted_mse),
        ];
        rec.extend(r.report.per_source_mse.iter().map(|v| format!("{v}")));
        rec.extend(r.report.sample_counts.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Horizon, step, warmup and the half-window convergence gap of each run.
pub fn write_run_info<W: Write>(rows: &[RunRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "policy",
        "sweep_value",
        "replication",
        "horizon",
        "step",
        "warmup",
        "convergence_gap",
    ])?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            fmt_opt(r.sweep_value),
            r.replication.to_string(),
            format!("{}", r.report.horizon),
            format!("{}", r.report.step),
            format!("{}", r.report.warmup),
            format!("{}", r.report.convergence_gap()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(report: &SimReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for rec in &report.trace {
        w.serialize(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `summary.csv`, `runs.csv` and (if tracing) one trace per run into
/// `dir`. Returns the summary path.
pub fn write_outputs(rows: &[RunRow], dir: &Path, trace: bool) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let summary = dir.join("summary.csv");
    write_summary(rows, fs::File::create(&summary)?)?;
    write_run_info(rows, fs::File::create(dir.join("runs.csv"))?)?;
    if trace {
        for (i, r) in rows.iter().enumerate() {
            let name = format!("trace_{:04}_{}_r{}.csv", i, r.policy, r.replication);
            write_trace(&r.report, fs::File::create(dir.join(name))?)?;
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexCurveConfig {
    pub mode: Mode,
    #[serde(default = "default_budget")]
    pub mc_budget: usize,
    #[serde(default = "default_quantile")]
    pub index_delay_quantile: f64,
    #[serde(default)]
    pub seed: u64,
    pub source: SourceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmission: Option<TransmissionModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
}

impl IndexCurveConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: IndexCurveConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.source.params()?;
        cfg.transmission()?.validate()?;
        check_quantile(cfg.index_delay_quantile)?;
        if let Some(g) = &cfg.grid {
            if g.points == 0 || (g.points > 1 && !(g.hi > g.lo)) {
                return Err(Error::Config(format!("invalid grid {g:?}")));
            }
            if cfg.mode == Mode::SignalAgnostic && g.lo < 0.0 {
                return Err(Error::Config("age grid must start at or above 0".into()));
            }
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn transmission(&self) -> Result<TransmissionModel> {
        self.source
            .transmission
            .or(self.transmission)
            .ok_or_else(|| Error::Config("missing field `transmission`".into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexCurve {
    pub points: Vec<(f64, f64)>,
    pub zero_crossings: Vec<f64>,
}

fn sign_changes(points: &[(f64, f64)]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for k in 1..points.len() {
        let (x0, a) = points[k - 1];
        let (x1, b) = points[k];
        if (a < 0.0) != (b < 0.0) {
            out.push((k, x0 + (x1 - x0) * a / (a - b)));
        }
    }
    out
}

/// α(state, 0) on the configured grid. Signal-aware grids default to the
/// symmetric range `[-hi, hi]` so both crossings `±v` show up.
pub fn index_curve(cfg: &IndexCurveConfig) -> Result<IndexCurve> {
    let p = cfg.source.params()?;
    let tm = cfg.transmission()?;
    let model = Arc::new(BanditModel::for_index(p, tm, cfg.mc_budget, cfg.seed, cfg.index_delay_quantile)?);
    let (eval, grid): (Arc<dyn IndexEvaluator>, GridSpec) = match cfg.mode {
        Mode::SignalAware => {
            let d = GridSpec::default_signal_aware(&p, &tm);
            (
                Arc::new(SignalAwareIndex::new(model)),
                GridSpec {
                    lo: -d.hi,
                    hi: d.hi,
                    points: d.points + 1,
                },
            )
        }
        Mode::SignalAgnostic => (Arc::new(AgeIndex::new(model)), GridSpec::default_age(&tm)),
    };
    let grid = cfg.grid.as_ref().map_or(grid, |g| GridSpec {
        lo: g.lo,
        hi: g.hi,
        points: g.points,
    });
    let xs: Vec<f64> = if grid.points == 1 {
        vec![grid.lo]
    } else {
        let h = (grid.hi - grid.lo) / (grid.points - 1) as f64;
        (0..grid.points).map(|i| grid.lo + h * i as f64).collect()
    };
    let points: Vec<(f64, f64)> = xs
        .par_iter()
        .map(|&x| Ok((x, eval.evaluate(x.abs())?)))
        .collect::<Result<_>>()?;
    let zero_crossings = sign_changes(&points).into_iter().map(|(_, x)| x).collect();
    Ok(IndexCurve { points, zero_crossings })
}

/// `state, alpha, zero_crossing`; the last column holds the interpolated
/// crossing on the row just past each sign change.
pub fn write_index_curve<W: Write>(curve: &IndexCurve, out: W) -> Result<()> {
    let marks = sign_changes(&curve.points);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state", "alpha", "zero_crossing"])?;
    for (k, (x, a)) in curve.points.iter().enumerate() {
        let mark = marks.iter().find(|(j, _)| *j == k).map(|(_, c)| format!("{c}"));
        w.write_record([format!("{x}"), format!("{a}"), mark.unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}

pub type RFn = fn(f64, &SourceParams) -> std::result::Result<f64, SpecialError>;

/// Functions under test; swap one out to check that the self-test notices.
#[derive(Clone, Copy)]
pub struct SelftestHooks {
    pub r1: RFn,
    pub r2: RFn,
}

impl Default for SelftestHooks {
    fn default() -> Self {
        SelftestHooks {
            r1: special::R1,
            r2: special::R2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            passed: value.is_finite() && value <= tolerance,
        }
    }
}

/// Worst relative residual of `(σ²/2)R'' − θεR' = rhs(ε)` over `ε ∈ [0.1, 2]`.
/// Central differences at `h` and `2h` are Richardson-combined so the
/// truncation error is `O(h⁴)`; near `ε = 0.1` the plain `O(h²)` term alone
/// is comparable to the tolerance.
pub fn ode_residual(r: RFn, rhs: fn(f64) -> f64, p: &SourceParams) -> Result<f64> {
    let mut worst = 0.0f64;
    let h = 1e-3;
    let diffs = |e: f64, h: f64| -> Result<(f64, f64)> {
        let (a, b, c) = (r(e - h, p)?, r(e, p)?, r(e + h, p)?);
        Ok(((c - a) / (2.0 * h), (c - 2.0 * b + a) / (h * h)))
    };
    for i in 0..=38 {
        let e = 0.1 + 0.05 * i as f64;
        let (d1h, d2h) = diffs(e, h)?;
        let (d1w, d2w) = diffs(e, 2.0 * h)?;
        let d1 = (4.0 * d1h - d1w) / 3.0;
        let d2 = (4.0 * d2h - d2w) / 3.0;
        let lhs = 0.5 * p.sigma * p.sigma * d2 - p.theta * e * d1;
        worst = worst.max(((lhs - rhs(e)) / rhs(e)).abs());
    }
    Ok(worst)
}

/// `(|MC − R(v)| / combined SE)` for `E[τ]` and `E[∫O²]`.
pub fn dynkin_zscores(
    p: &SourceParams,
    v: f64,
    n: usize,
    dt: f64,
    seed: u64,
    hooks: &SelftestHooks,
) -> Result<(f64, f64)> {
    let samples: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i as u64);
            hitting_time_mc(0.0, v, p, dt, DEFAULT_STEP_BUDGET, &mut rng)
        })
        .collect::<Result<_>>()?;
    let stats = |f: &dyn Fn(usize) -> f64| {
        let m = (0..n).map(f).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (f(i) - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (m, (var / n as f64).sqrt())
    };
    let (tau, tau_se) = stats(&|i| samples[i].tau);
    let (int, int_se) = stats(&|i| samples[i].integral_sq);
    Ok((
        (tau - (hooks.r1)(v, p)?).abs() / tau_se,
        (int - (hooks.r2)(v, p)?).abs() / int_se,
    ))
}

/// Runs the quick self-checks: special-function identities, ODE residuals,
/// Dynkin oracles, and the β fixed point of the single-source problem.
pub fn selftest(hooks: &SelftestHooks, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let ident = [
        (special::Q(0.0) - 1.0).abs(),
        (special::K(0.0) - 1.0).abs(),
        (special::hyp2f2_1132_2(0.0)? - 1.0).abs(),
        (special::Q(special::q_inverse(2.5)?) / 2.5 - 1.0).abs(),
        (special::K(special::k_inverse(0.4)?) / 0.4 - 1.0).abs(),
    ];
    out.push(Check::new("special_identities", ident.iter().cloned().fold(0.0, f64::max), 1e-9));

    for &th in &[-0.3, 0.3] {
        let p = SourceParams::new(th, 0.0, 1.0, 1.0)?;
        out.push(Check::new(format!("ode_r1_theta_{th}"), ode_residual(hooks.r1, |_| 1.0, &p)?, 1e-5));
        out.push(Check::new(format!("ode_r2_theta_{th}"), ode_residual(hooks.r2, |e| e * e, &p)?, 1e-5));
    }

    for (k, &(th, sigma, v)) in [(0.0, 1.0, 1.0), (0.3, 1.0, 1.0), (-0.2, 1.0, 0.8)].iter().enumerate() {
        let p = SourceParams::new(th, 0.0, sigma, 1.0)?;
        let (zt, zi) = dynkin_zscores(&p, v, 4000, 2.5e-5, seed.wrapping_add(k as u64), hooks)?;
        out.push(Check::new(format!("dynkin_tau_theta_{th}"), zt, 4.0));
        out.push(Check::new(format!("dynkin_integral_theta_{th}"), zi, 4.0));
    }

    let p = SourceParams::new(0.1, 0.0, 1.0, 1.0)?;
    let tm = TransmissionModel::Exponential { mean: 2.0 };
    let model = BanditModel::new(p, tm, 20_000, seed)?;
    let cfg = SolverConfig {
        mc_budget: 20_000,
        seed,
        ..SolverConfig::default()
    };
    let s = model.solve_beta(0.0, &cfg)?;
    let e = model.per_cycle_expectations(s.v)?;
    let balance = ((p.weight * e.integral - s.beta * e.cycle) / (s.beta * e.cycle)).abs();
    out.push(Check::new("fixed_point_balance", balance, 1e-4));
    let idx = SignalAwareIndex::new(Arc::new(model));
    let (lo, hi) = (idx.evaluate(0.98 * s.v)?, idx.evaluate(1.02 * s.v)?);
    let straddle = if lo < 0.0 && hi > 0.0 { 0.0 } else { 1.0 };
    out.push(Check::new("index_root_at_threshold", straddle, 0.0));
    Ok(out)
}

pub fn write_checks<W: Write>(checks: &[Check], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{:<32} {:>14} {:>12}  status", "check", "value", "tolerance")?;
    for c in checks {
        writeln!(
            out,
            "{:<32} {:>14.6e} {:>12.3e}  {}",
            c.name,
            c.value,
            c.tolerance,
            if c.passed { "PASS" } else { "FAIL" }
        )?;
    }
    Ok(())
}
