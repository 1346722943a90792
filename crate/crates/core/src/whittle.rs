//! Whittle indices for the signal-aware (error-based) and signal-agnostic
//! (age-based) bandits, and tabulated versions for use inside the simulator.

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::estimator::BanditState;
use crate::singlesource::{BanditModel, Mode};
use crate::stochastic::{RngStream, SourceParams, TransmissionModel};
use crate::{Error, Result};

/// Whittle index value. `InService` is the `-∞` of a source whose sample is
/// still in flight; it orders below every finite value.
#[derive(Debug, Clone, Copy)]
pub enum IndexValue {
    InService,
    Finite(f64),
}

impl IndexValue {
    pub fn as_f64(self) -> f64 {
        match self {
            IndexValue::InService => f64::NEG_INFINITY,
            IndexValue::Finite(v) => v,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, IndexValue::Finite(_))
    }
}

impl PartialEq for IndexValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for IndexValue {}

impl PartialOrd for IndexValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for IndexValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (IndexValue::InService, IndexValue::InService) => Ordering::Equal,
            (IndexValue::InService, _) => Ordering::Less,
            (_, IndexValue::InService) => Ordering::Greater,
            (IndexValue::Finite(a), IndexValue::Finite(b)) => a.total_cmp(b),
        }
    }
}

/// Index of the always-idle dummy bandits.
pub fn dummy_index() -> f64 {
    0.0
}

/// Something that maps a bandit state abscissa (`|ε|` or `Δ`) to `α(·, 0)`.
pub trait IndexEvaluator: Send + Sync + std::fmt::Debug {
    fn mode(&self) -> Mode;
    /// Index at `γ = 0` for the state abscissa.
    fn evaluate(&self, x: f64) -> Result<f64>;

    fn abscissa(&self, state: &BanditState) -> f64 {
        match self.mode() {
            Mode::SignalAware => state.epsilon.abs(),
            Mode::SignalAgnostic => state.delta,
        }
    }
}

/// Signal-aware index evaluated from cycle expectations at threshold `|ε|`.
#[derive(Debug, Clone)]
pub struct SignalAwareIndex {
    model: Arc<BanditModel>,
}

impl SignalAwareIndex {
    pub fn new(model: Arc<BanditModel>) -> Self {
        SignalAwareIndex { model }
    }

    pub fn model(&self) -> &BanditModel {
        &self.model
    }

    pub fn index(&self, eps: f64, gamma: f64) -> Result<IndexValue> {
        if gamma > 0.0 {
            return Ok(IndexValue::InService);
        }
        Ok(IndexValue::Finite(self.evaluate(eps.abs())?))
    }
}

impl IndexEvaluator for SignalAwareIndex {
    fn mode(&self) -> Mode {
        Mode::SignalAware
    }

    fn evaluate(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite error state {x}")));
        }
        let m = &self.model;
        let v = x.abs();
        let e = m.per_cycle_expectations(v)?;
        let w = m.params.weight;
        // β(v)/w is the bracketed factor of the closed form in each θ regime
        let level = m.beta_of_threshold(v) / w;
        Ok(w / m.mean_y() * (e.cycle * level - e.integral))
    }
}

/// Age-based index evaluated from the age-threshold cycle expectations.
#[derive(Debug, Clone)]
pub struct AgeIndex {
    model: Arc<BanditModel>,
}

impl AgeIndex {
    pub fn new(model: Arc<BanditModel>) -> Self {
        AgeIndex { model }
    }

    pub fn model(&self) -> &BanditModel {
        &self.model
    }

    pub fn index(&self, delta: f64, gamma: f64) -> Result<IndexValue> {
        if gamma > 0.0 {
            return Ok(IndexValue::InService);
        }
        Ok(IndexValue::Finite(self.evaluate(delta)?))
    }
}

impl IndexEvaluator for AgeIndex {
    fn mode(&self) -> Mode {
        Mode::SignalAgnostic
    }

    fn evaluate(&self, delta: f64) -> Result<f64> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Domain(format!("age must be finite and nonnegative, got {delta}")));
        }
        let m = &self.model;
        let e = m.age_cycle_expectations(delta)?;
        let w = m.params.weight;
        Ok(w / m.mean_y() * (e.cycle * m.expected_penalty_after(delta) - e.integral))
    }
}

/// Signal-aware Whittle index `α(ε, γ)` with a fresh draw set of `mc_budget`.
pub fn whittle_signal_aware(
    eps: f64,
    gamma: f64,
    params: &SourceParams,
    tm: &TransmissionModel,
    mc_budget: usize,
    rng: &mut RngStream,
) -> Result<IndexValue> {
    if gamma > 0.0 {
        return Ok(IndexValue::InService);
    }
    let model = BanditModel::with_rng(*params, *tm, mc_budget, rng)?;
    SignalAwareIndex::new(Arc::new(model)).index(eps, gamma)
}

/// Age-based Whittle index `α_age(δ, γ)` with a fresh draw set of `mc_budget`.
pub fn whittle_age(
    delta: f64,
    gamma: f64,
    params: &SourceParams,
    tm: &TransmissionModel,
    mc_budget: usize,
    rng: &mut RngStream,
) -> Result<IndexValue> {
    if gamma > 0.0 {
        return Ok(IndexValue::InService);
    }
    let model = BanditModel::with_rng(*params, *tm, mc_budget, rng)?;
    AgeIndex::new(Arc::new(model)).index(delta, gamma)
}

/// Evenly spaced abscissae `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

pub const DEFAULT_GRID_POINTS: usize = 512;

impl GridSpec {
    /// `|ε| ∈ [0, 6σ√max(1, 1/(2|θ|))]`; Wiener sources use the variance at age `10·E[Y]`.
    pub fn default_signal_aware(params: &SourceParams, tm: &TransmissionModel) -> Self {
        let scale = if params.is_wiener() {
            (10.0 * tm.mean()).max(1.0)
        } else {
            (1.0 / (2.0 * params.theta.abs())).max(1.0)
        };
        GridSpec {
            lo: 0.0,
            hi: 6.0 * params.sigma * scale.sqrt(),
            points: DEFAULT_GRID_POINTS,
        }
    }

    /// `δ ∈ [0, 10·E[Y]]`.
    pub fn default_age(tm: &TransmissionModel) -> Self {
        GridSpec {
            lo: 0.0,
            hi: 10.0 * tm.mean(),
            points: DEFAULT_GRID_POINTS,
        }
    }

    pub fn abscissae(&self) -> Result<Vec<f64>> {
        if self.points == 1 {
            return Ok(vec![self.lo]);
        }
        if self.points == 0 || !(self.hi > self.lo) || self.lo < 0.0 {
            return Err(Error::Table(format!("invalid grid {self:?}")));
        }
        let h = (self.hi - self.lo) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.lo + h * i as f64).collect())
    }
}

/// Nondecreasing least-squares projection (pool adjacent violators).
pub fn isotonic_nondecreasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let n = n1 + n2;
            *blocks.last_mut().expect("nonempty") = ((m1 * n1 as f64 + m2 * n2 as f64) / n as f64, n);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, n)| std::iter::repeat(m).take(n))
        .collect()
}

/// Largest drop `raw[i] - raw[j]`, `i < j`, along the grid.
pub fn max_monotonicity_violation(values: &[f64]) -> f64 {
    let mut running = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &v in values {
        running = running.max(v);
        worst = worst.max(running - v);
    }
    worst
}

/// Tabulated index curve with linear interpolation.
#[derive(Debug, Clone)]
pub struct IndexTable {
    pub source: usize,
    pub mode: Mode,
    pub grid: Vec<f64>,
    /// Smoothed (isotonic) values used for lookup.
    pub values: Vec<f64>,
    /// Raw Monte-Carlo evaluations before smoothing.
    pub raw: Vec<f64>,
    pub mc_budget: usize,
    pub seed: u64,
    evaluator: Option<Arc<dyn IndexEvaluator>>,
}

/// Raw drops larger than this fraction of the table's value range fail the build.
pub const DEFAULT_VIOLATION_TOLERANCE: f64 = 0.05;

impl IndexTable {
    pub fn build(
        source: usize,
        evaluator: Arc<dyn IndexEvaluator>,
        grid: &GridSpec,
        mc_budget: usize,
        seed: u64,
    ) -> Result<Self> {
        let xs = grid.abscissae()?;
        let raw: Vec<f64> = xs
            .par_iter()
            .map(|&x| evaluator.evaluate(x))
            .collect::<Result<_>>()?;
        if let Some(bad) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::Table(format!(
                "non-finite index {} at state {}",
                raw[bad], xs[bad]
            )));
        }
        let range = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - raw.iter().cloned().fold(f64::INFINITY, f64::min);
        let violation = max_monotonicity_violation(&raw);
        if violation > DEFAULT_VIOLATION_TOLERANCE * range {
            return Err(Error::Table(format!(
                "raw index drops by {violation} (range {range}); increase the Monte-Carlo budget"
            )));
        }
        Ok(IndexTable {
            source,
            mode: evaluator.mode(),
            values: isotonic_nondecreasing(&raw),
            grid: xs,
            raw,
            mc_budget,
            seed,
            evaluator: Some(evaluator),
        })
    }

    /// Builds the model and table for one source with the default grid.
    pub fn for_source(
        source: usize,
        params: &SourceParams,
        tm: &TransmissionModel,
        mode: Mode,
        grid: Option<GridSpec>,
        mc_budget: usize,
        seed: u64,
    ) -> Result<Self> {
        let model = Arc::new(BanditModel::new(*params, *tm, mc_budget, seed)?);
        Self::for_model(source, model, mode, grid, seed)
    }

    /// Like [`for_source`](Self::for_source) over an already-built model.
    pub fn for_model(
        source: usize,
        model: Arc<BanditModel>,
        mode: Mode,
        grid: Option<GridSpec>,
        seed: u64,
    ) -> Result<Self> {
        let (params, tm, mc_budget) = (*model.params(), *model.transmission(), model.mc_budget());
        let (evaluator, default): (Arc<dyn IndexEvaluator>, GridSpec) = match mode {
            Mode::SignalAware => (
                Arc::new(SignalAwareIndex::new(model)),
                GridSpec::default_signal_aware(&params, &tm),
            ),
            Mode::SignalAgnostic => (Arc::new(AgeIndex::new(model)), GridSpec::default_age(&tm)),
        };
        Self::build(source, evaluator, &grid.unwrap_or(default), mc_budget, seed)
    }

    pub fn evaluator(&self) -> Option<&Arc<dyn IndexEvaluator>> {
        self.evaluator.as_ref()
    }

    /// Index at a state abscissa; `|ε|` is taken for signal-aware tables.
    pub fn lookup(&self, state: f64) -> Result<f64> {
        let x = match self.mode {
            Mode::SignalAware => state.abs(),
            Mode::SignalAgnostic => state,
        };
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite state {state}")));
        }
        let n = self.grid.len();
        if n == 1 || x <= self.grid[0] {
            return Ok(self.values[0]);
        }
        let last = self.grid[n - 1];
        if x > last {
            return match &self.evaluator {
                Some(e) => e.evaluate(x),
                None => {
                    let slope = (self.values[n - 1] - self.values[n - 2]) / (last - self.grid[n - 2]);
                    Ok(self.values[n - 1] + slope * (x - last))
                }
            };
        }
        let j = self.grid.partition_point(|&g| g < x);
        if self.grid[j] == x {
            return Ok(self.values[j]);
        }
        let (x0, x1) = (self.grid[j - 1], self.grid[j]);
        let t = (x - x0) / (x1 - x0);
        Ok(self.values[j - 1] + t * (self.values[j] - self.values[j - 1]))
    }

    /// Linear-interpolated zero crossings on the abscissa axis.
    pub fn zero_crossings(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for k in 1..self.grid.len() {
            let (a, b) = (self.values[k - 1], self.values[k]);
            if a < 0.0 && b >= 0.0 {
                out.push(self.grid[k - 1] + (self.grid[k] - self.grid[k - 1]) * (-a) / (b - a));
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state", "alpha"])?;
        for (x, v) in self.grid.iter().zip(&self.values) {
            w.write_record([format!("{x}"), format!("{v}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `state,alpha` table. Imported tables extrapolate linearly.
    pub fn read_csv<R: Read>(source: usize, mode: Mode, input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Table(format!("missing column {i}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Table(e.to_string()))
            };
            grid.push(parse(0)?);
            values.push(parse(1)?);
        }
        if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Table("grid must be nonempty and strictly increasing".into()));
        }
        Ok(IndexTable {
            source,
            mode,
            raw: values.clone(),
            values,
            grid,
            mc_budget: 0,
            seed: 0,
            evaluator: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinel_orders_below_everything() {
        let mut v = [
            IndexValue::Finite(-1e300),
            IndexValue::InService,
            IndexValue::Finite(0.0),
            IndexValue::Finite(f64::NEG_INFINITY),
        ];
        v.sort();
        assert!(matches!(v[0], IndexValue::InService));
        assert!(IndexValue::InService < IndexValue::Finite(f64::NEG_INFINITY));
        assert_eq!(dummy_index(), 0.0);
    }

    #[test]
    fn in_service_is_minus_infinity() {
        let p = SourceParams::new(0.1, 0.0, 1.0, 1.0).unwrap();
        let tm = TransmissionModel::Exponential { mean: 2.0 };
        let mut rng = RngStream::new(1, 1);
        let a = whittle_signal_aware(0.7, 0.5, &p, &tm, 1000, &mut rng).unwrap();
        assert!(matches!(a, IndexValue::InService));
        let b = whittle_age(3.0, 0.1, &p, &tm, 1000, &mut rng).unwrap();
        assert_eq!(b.as_f64(), f64::NEG_INFINITY);
    }

    #[test]
    fn signal_aware_index_even() {
        let p = SourceParams::new(0.1, 0.0, 1.0, 1.0).unwrap();
        let tm = TransmissionModel::Exponential { mean: 2.0 };
        let m = Arc::new(BanditModel::new(p, tm, 5000, 3).unwrap());
        let idx = SignalAwareIndex::new(m);
        for &e in &[0.3, 1.1, 2.5] {
            assert_eq!(idx.index(e, 0.0).unwrap(), idx.index(-e, 0.0).unwrap());
        }
    }

    #[test]
    fn zero_error_index_matches_zero_wait_cost() {
        // at v = 0 every cycle is zero-wait; for exponential Y the cycle
        // integral is c(E[Y] - M(1-M)/(2θ)) with c = σ²/(2θ), M = E[e^{-2θY}]
        let (th, mean) = (0.1, 2.0);
        let p = SourceParams::new(th, 0.0, 1.0, 1.0).unwrap();
        let tm = TransmissionModel::Exponential { mean };
        let c = 1.0 / (2.0 * th);
        let m = 1.0 / (1.0 + 2.0 * th * mean);
        let exact = (mean * c * (1.0 - m) - c * (mean - m * (1.0 - m) / (2.0 * th))) / mean;
        for seed in 0..3 {
            let model = Arc::new(BanditModel::new(p, tm, 20_000, seed).unwrap());
            let a = SignalAwareIndex::new(model).evaluate(0.0).unwrap();
            assert!((a / exact - 1.0).abs() < 0.05, "{a} vs {exact}");
        }
    }

    #[test]
    fn isotonic_projection() {
        assert_eq!(isotonic_nondecreasing(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic_nondecreasing(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(max_monotonicity_violation(&[1.0, 3.0, 2.0, 4.0, 0.5]), 3.5);
    }

    fn linear_table() -> IndexTable {
        let csv = "state,alpha\n0,-1\n1,1\n2,3\n";
        IndexTable::read_csv(0, Mode::SignalAware, csv.as_bytes()).unwrap()
    }

    #[test]
    fn lookup_interpolates() {
        let t = linear_table();
        assert_eq!(t.lookup(1.0).unwrap(), 1.0);
        assert_eq!(t.lookup(0.5).unwrap(), 0.0);
        assert_eq!(t.lookup(-0.5).unwrap(), 0.0);
        assert_eq!(t.lookup(3.0).unwrap(), 5.0);
        assert_eq!(t.zero_crossings(), vec![0.5]);
    }

    #[test]
    fn csv_roundtrip() {
        let t = linear_table();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = IndexTable::read_csv(0, Mode::SignalAware, buf.as_slice()).unwrap();
        assert_eq!(back.grid, t.grid);
        assert_eq!(back.values, t.values);
        assert!(IndexTable::read_csv(0, Mode::SignalAware, "state,alpha\n1,0\n0,1\n".as_bytes()).is_err());
    }

    #[test]
    fn single_point_grid() {
        let p = SourceParams::new(0.1, 0.0, 1.0, 1.0).unwrap();
        let tm = TransmissionModel::Exponential { mean: 2.0 };
        let grid = GridSpec { lo: 0.0, hi: 0.0, points: 1 };
        let t = IndexTable::for_source(0, &p, &tm, Mode::SignalAware, Some(grid), 2000, 1).unwrap();
        assert_eq!(t.grid, vec![0.0]);
        assert!(t.values[0] < 0.0);
    }

    #[test]
    fn table_build_deterministic() {
        let p = SourceParams::new(0.2, 0.0, 1.0, 1.0).unwrap();
        let tm = TransmissionModel::Exponential { mean: 1.0 };
        let g = GridSpec { lo: 0.0, hi: 4.0, points: 33 };
        let a = IndexTable::for_source(0, &p, &tm, Mode::SignalAware, Some(g), 4000, 11).unwrap();
        let b = IndexTable::for_source(0, &p, &tm, Mode::SignalAware, Some(g), 4000, 11).unwrap();
        assert_eq!(a.raw, b.raw);
        let c = IndexTable::for_source(0, &p, &tm, Mode::SignalAgnostic, Some(g), 4000, 11).unwrap();
        assert!(c.values.windows(2).all(|w| w[0] <= w[1]));
    }
}
