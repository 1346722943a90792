//! Special functions used by the threshold and index formulas.
//!
//! `Q` and `K` are the scaled error-function ratios
//!
//! ```text
//! Q(x) = (√π/2) e^{x²} erf(x) / x,      K(x) = (√π/2) e^{-x²} erfi(x) / x,
//! ```
//!
//! both extended by continuity with `Q(0) = K(0) = 1`. `Q` increases and `K`
//! decreases on `[0, ∞)`, so both have well-defined inverses there.
//!
//! `R1`/`R2` are the expected exit time and the expected integrated square of
//! the zero-mean Gauss-Markov process leaving `(-ε, ε)`; `R3` is the
//! antiderivative of the age penalty.

use std::f64::consts::PI;
use std::sync::OnceLock;

use thiserror::Error;

use crate::stochastic::SourceParams;

/// Below this `|θ|` the Wiener formulas are used in place of the `₂F₂` forms.
pub const THETA_SWITCH: f64 = 1e-9;

/// Largest `|x|` accepted by [`erfi`]; `e^{x²}` leaves double range beyond it.
pub const ERFI_GUARD: f64 = 26.0;

/// Absolute tolerance on `x` for [`q_inverse`] / [`k_inverse`].
pub const INVERSE_TOL: f64 = 1e-12;

// Past this |z| the alternating series for negative arguments loses too many
// digits; the Dawson-integral route takes over.
const NEG_SERIES_LIMIT: f64 = 10.0;
// Beyond this abscissa the Dawson integral uses its asymptotic antiderivative.
const DAWSON_ASYMPTOTIC_FROM: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecialError {
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },
    #[error("series did not converge after {terms} terms (partial sum {partial})")]
    NonConvergence { partial: f64, terms: usize },
}

fn domain(func: &'static str, detail: impl Into<String>) -> SpecialError {
    SpecialError::Domain {
        func,
        detail: detail.into(),
    }
}

/// Convergence control for the hypergeometric series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            rel_tol: 1e-12,
            max_terms: 500,
        }
    }
}

impl SeriesControl {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self, SpecialError> {
        if !(rel_tol > 0.0 && rel_tol <= 1e-6) {
            return Err(domain("SeriesControl", format!("rel_tol {rel_tol} not in (0, 1e-6]")));
        }
        if max_terms < 50 {
            return Err(domain("SeriesControl", format!("max_terms {max_terms} < 50")));
        }
        Ok(SeriesControl { rel_tol, max_terms })
    }
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Imaginary error function `(2/√π)∫₀ˣ e^{t²} dt` for `|x| ≤ 26`.
pub fn erfi(x: f64) -> Result<f64, SpecialError> {
    if !x.is_finite() || x.abs() > ERFI_GUARD {
        return Err(domain("erfi", format!("|x| = {} exceeds guard {ERFI_GUARD}", x.abs())));
    }
    let ax = x.abs();
    let v = if ax <= 6.0 {
        erfi_series(ax)
    } else {
        // erfi(x) = (2/√π) e^{x²} D(x)
        2.0 / PI.sqrt() * (ax * ax).exp() * dawson_asymptotic(ax)
    };
    Ok(v.copysign(x))
}

// Maclaurin series; every term is positive so no cancellation.
fn erfi_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut power = x; // x^{2k+1}/k!
    let mut sum = x;
    let mut k = 0.0;
    loop {
        k += 1.0;
        power *= x2 / k;
        let term = power / (2.0 * k + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    2.0 / PI.sqrt() * sum
}

fn dawson_asymptotic(x: f64) -> f64 {
    // D(x) ~ 1/(2x) Σ (2k-1)!! / (2x²)^k
    let inv = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        let next = term * (2.0 * k - 1.0) * inv;
        if next >= term || next < 1e-17 * sum {
            break;
        }
        term = next;
        sum += term;
        k += 1.0;
    }
    sum / (2.0 * x)
}

/// Dawson's function `D(x) = e^{-x²}∫₀ˣ e^{t²} dt`, total on the reals.
pub fn dawson(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= 6.0 {
        PI.sqrt() / 2.0 * (-ax * ax).exp() * erfi_series(ax)
    } else {
        dawson_asymptotic(ax)
    };
    v.copysign(x)
}

/// `Q(x) = (√π/2) e^{x²} erf(x)/x`, with `Q(0) = 1`. Overflows to `+∞` past `|x| ≈ 26.6`.
#[allow(non_snake_case)]
pub fn Q(x: f64) -> f64 {
    let ax = x.abs();
    if ax == 0.0 {
        return 1.0;
    }
    if ax < 1e-4 {
        // 1 + 2x²/3 + 4x⁴/15
        let x2 = ax * ax;
        return 1.0 + x2 * (2.0 / 3.0 + x2 * 4.0 / 15.0);
    }
    PI.sqrt() / 2.0 * (ax * ax).exp() * erf(ax) / ax
}

/// `K(x) = (√π/2) e^{-x²} erfi(x)/x = D(x)/x`, with `K(0) = 1`.
///
/// Evaluated through Dawson's function, so it stays finite for any `x`.
#[allow(non_snake_case)]
pub fn K(x: f64) -> f64 {
    let ax = x.abs();
    if ax == 0.0 {
        return 1.0;
    }
    if ax < 1e-4 {
        let x2 = ax * ax;
        return 1.0 - x2 * (2.0 / 3.0 - x2 * 4.0 / 15.0);
    }
    dawson(ax) / ax
}

/// Bisection on an increasing function with an expanding upper bracket.
fn invert_increasing(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) < target {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > INVERSE_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Unique `x ≥ 0` with `Q(x) = y`, for `y ≥ 1`.
pub fn q_inverse(y: f64) -> Result<f64, SpecialError> {
    if !(y >= 1.0) || y.is_infinite() {
        return Err(domain("q_inverse", format!("argument {y} outside [1, ∞)")));
    }
    if y == 1.0 {
        return Ok(0.0);
    }
    Ok(invert_increasing(Q, y))
}

/// Unique `x ≥ 0` with `K(x) = y`, for `y ∈ (0, 1]`.
pub fn k_inverse(y: f64) -> Result<f64, SpecialError> {
    if !(y > 0.0 && y <= 1.0) {
        return Err(domain("k_inverse", format!("argument {y} outside (0, 1]")));
    }
    if y == 1.0 {
        return Ok(0.0);
    }
    Ok(invert_increasing(|x| -K(x), -y))
}

/// Sum of `₂F₂(1,1;3/2,2;z) - 1`, i.e. the series with its leading 1 removed.
///
/// Term ratio: `t_{n+1}/t_n = (n+1) z / ((n+3/2)(n+2))`.
fn hyp_series_tail(z: f64, ctrl: SeriesControl) -> Result<f64, SpecialError> {
    if z == 0.0 {
        return Ok(0.0);
    }
    let mut term = z / 3.0;
    let mut sum = term;
    for n in 1..ctrl.max_terms {
        let nf = n as f64;
        term *= (nf + 1.0) * z / ((nf + 1.5) * (nf + 2.0));
        sum += term;
        if term.abs() <= ctrl.rel_tol * sum.abs() {
            return Ok(sum);
        }
    }
    Err(SpecialError::NonConvergence {
        partial: 1.0 + sum,
        terms: ctrl.max_terms,
    })
}

/// `₂F₂(1,1;3/2,2;z)` by its defining series.
pub fn hyp2f2_1132_2(z: f64) -> Result<f64, SpecialError> {
    hyp2f2_with(z, SeriesControl::default())
}

pub fn hyp2f2_with(z: f64, ctrl: SeriesControl) -> Result<f64, SpecialError> {
    if !z.is_finite() {
        return Err(domain("hyp2f2", format!("non-finite argument {z}")));
    }
    Ok(1.0 + hyp_series_tail(z, ctrl)?)
}

/// `₂F₂(1,1;3/2,2;z) - 1` evaluated without cancellation near `z = 0`,
/// switching to the Dawson-integral identity for large negative `z`.
fn hyp_minus_one(z: f64) -> Result<f64, SpecialError> {
    if z < -NEG_SERIES_LIMIT {
        // ₂F₂(1,1;3/2,2;-s) = (2/s) ∫₀^{√s} D(y) dy
        let s = -z;
        Ok(2.0 / s * dawson_integral(s.sqrt()) - 1.0)
    } else {
        hyp_series_tail(z, SeriesControl::default())
    }
}

fn hyp_value(z: f64) -> Result<f64, SpecialError> {
    if z < -NEG_SERIES_LIMIT {
        let s = -z;
        Ok(2.0 / s * dawson_integral(s.sqrt()))
    } else {
        Ok(1.0 + hyp_series_tail(z, SeriesControl::default())?)
    }
}

/// Gauss–Legendre nodes/weights on [-1, 1].
fn gauss_legendre_16() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = 16usize;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        out
    })
}

fn integrate_dawson(a: f64, b: f64) -> f64 {
    let panels = ((b - a) / 0.25).ceil().max(1.0) as usize;
    let h = (b - a) / panels as f64;
    let nodes = gauss_legendre_16();
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let s: f64 = nodes.iter().map(|&(x, w)| w * dawson(mid + 0.5 * h * x)).sum();
        total += 0.5 * h * s;
    }
    total
}

/// `∫₀^Y D(y) dy` for `Y ≥ √10`.
fn dawson_integral(y: f64) -> f64 {
    let y0 = NEG_SERIES_LIMIT.sqrt();
    // The series is accurate at z = -10: ∫₀^{y0} D = (y0²/2) ₂F₂(…; -y0²).
    let base = || {
        0.5 * NEG_SERIES_LIMIT
            * (1.0 + hyp_series_tail(-NEG_SERIES_LIMIT, SeriesControl::default()).unwrap_or(f64::NAN))
    };
    if y <= DAWSON_ASYMPTOTIC_FROM {
        return base() + integrate_dawson(y0, y);
    }
    static AT_BREAK: OnceLock<f64> = OnceLock::new();
    let at_break = *AT_BREAK.get_or_init(|| base() + integrate_dawson(y0, DAWSON_ASYMPTOTIC_FROM));
    at_break + dawson_antiderivative_asymptotic(y) - dawson_antiderivative_asymptotic(DAWSON_ASYMPTOTIC_FROM)
}

// ½ ln y - Σ_{k≥1} (2k-1)!! / (2^{k+1} · 2k · y^{2k})
fn dawson_antiderivative_asymptotic(y: f64) -> f64 {
    let inv = 1.0 / (y * y);
    let mut coeff = 1.0; // (2k-1)!! / 2^{k+1}, starting at k = 0 -> 1/2 handled below
    let mut pow = 1.0;
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        coeff *= (2.0 * kf - 1.0) / 2.0;
        pow *= inv;
        let term = 0.5 * coeff * pow / (2.0 * kf);
        if term >= prev || term < 1e-18 {
            break;
        }
        sum += term;
        prev = term;
    }
    0.5 * y.ln() - sum
}

/// Expected time for the zero-mean process started at 0 to leave `(-|ε|, |ε|)`.
#[allow(non_snake_case)]
pub fn R1(eps: f64, params: &SourceParams) -> Result<f64, SpecialError> {
    if !eps.is_finite() {
        return Err(domain("R1", format!("non-finite argument {eps}")));
    }
    let s2 = params.sigma * params.sigma;
    let e2 = eps * eps;
    if params.theta.abs() < THETA_SWITCH {
        return Ok(e2 / s2);
    }
    let z = params.theta * e2 / s2;
    Ok(e2 / s2 * hyp_value(z)?)
}

/// Expected integral of the squared process up to the exit time of `(-|ε|, |ε|)`.
#[allow(non_snake_case)]
pub fn R2(eps: f64, params: &SourceParams) -> Result<f64, SpecialError> {
    if !eps.is_finite() {
        return Err(domain("R2", format!("non-finite argument {eps}")));
    }
    let s2 = params.sigma * params.sigma;
    let e2 = eps * eps;
    if params.theta.abs() < THETA_SWITCH {
        return Ok(e2 * e2 / (6.0 * s2));
    }
    let z = params.theta * e2 / s2;
    Ok(e2 / (2.0 * params.theta) * hyp_minus_one(z)?)
}

/// `∫₀^δ p(s) ds` for the age penalty `p`.
#[allow(non_snake_case)]
pub fn R3(delta: f64, params: &SourceParams) -> Result<f64, SpecialError> {
    if !(delta >= 0.0) {
        return Err(domain("R3", format!("negative or NaN age {delta}")));
    }
    let s2 = params.sigma * params.sigma;
    let th = params.theta;
    if th.abs() < THETA_SWITCH {
        return Ok(0.5 * s2 * delta * delta);
    }
    // δ - (1 - e^{-2θδ})/(2θ)
    let inner = delta + (-2.0 * th * delta).exp_m1() / (2.0 * th);
    Ok(s2 / (2.0 * th) * inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(theta: f64, sigma: f64) -> SourceParams {
        SourceParams::new(theta, 0.0, sigma, 1.0).unwrap()
    }

    // Composite Simpson on a smooth integrand.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn erf_matches_quadrature() {
        let oracle = 2.0 / PI.sqrt() * simpson(|t| (-t * t).exp(), 0.0, 1.0, 2000);
        assert!((oracle - 0.8427007929).abs() < 1e-10);
        assert!((erf(1.0) - oracle).abs() < 1e-12);
        assert_eq!(erf(0.0), 0.0);
        assert_eq!(erf(-1.0), -erf(1.0));
    }

    #[test]
    fn erfi_matches_quadrature_and_series() {
        let oracle = 2.0 / PI.sqrt() * simpson(|t| (t * t).exp(), 0.0, 1.0, 2000);
        assert!((oracle - 1.6504257588).abs() < 1e-9);
        assert!((erfi(1.0).unwrap() - oracle).abs() < 1e-11);
        assert_eq!(erfi(0.0).unwrap(), 0.0);

        let x: f64 = 0.5;
        let mut s = 0.0;
        let mut fact = 1.0;
        for k in 0..30 {
            if k > 0 {
                fact *= k as f64;
            }
            s += x.powi(2 * k + 1) / (fact * (2 * k + 1) as f64);
        }
        assert!((erfi(0.5).unwrap() - 2.0 / PI.sqrt() * s).abs() < 1e-15);
    }

    #[test]
    fn erfi_branches_agree_at_switch() {
        let below = erfi_series(6.0);
        let above = 2.0 / PI.sqrt() * 36f64.exp() * dawson_asymptotic(6.0);
        assert!((below / above - 1.0).abs() < 1e-13);
    }

    #[test]
    fn erfi_guard() {
        assert!(erfi(26.0).is_ok());
        assert!(matches!(erfi(26.5), Err(SpecialError::Domain { .. })));
        assert!(erfi(f64::NAN).is_err());
    }

    #[test]
    fn q_and_k_limits_and_parity() {
        assert_eq!(Q(0.0), 1.0);
        assert_eq!(K(0.0), 1.0);
        for &x in &[0.3, 1.0, 2.7] {
            assert_eq!(Q(x), Q(-x));
            assert_eq!(K(x), K(-x));
        }
        let expect = PI.sqrt() / 2.0 * 1f64.exp() * erf(1.0);
        assert!((Q(1.0) - expect).abs() < 1e-14);
        let expect_k = PI.sqrt() / 2.0 * (-4f64).exp() / 2.0 * erfi(2.0).unwrap();
        assert!((K(2.0) - expect_k).abs() < 1e-14);
    }

    #[test]
    fn k_is_q_series_with_negated_argument() {
        // Q(x) = Σ (2x²)^n/(2n+1)!!, K(x) = Σ (-2x²)^n/(2n+1)!!
        for &x in &[0.2, 0.7, 1.5, 2.0] {
            let (mut tq, mut tk) = (1.0, 1.0);
            let (mut sq, mut sk) = (1.0, 1.0);
            for n in 1..120 {
                let d = (2 * n + 1) as f64;
                tq *= 2.0 * x * x / d;
                tk *= -2.0 * x * x / d;
                sq += tq;
                sk += tk;
            }
            assert!((Q(x) / sq - 1.0).abs() < 1e-12, "Q({x})");
            assert!((K(x) - sk).abs() < 1e-11, "K({x})");
        }
    }

    #[test]
    fn inverses() {
        assert_eq!(q_inverse(1.0).unwrap(), 0.0);
        assert_eq!(k_inverse(1.0).unwrap(), 0.0);
        assert!((q_inverse(Q(1.3)).unwrap() - 1.3).abs() < 1e-9);
        assert!((k_inverse(K(1.3)).unwrap() - 1.3).abs() < 1e-9);
        assert!(q_inverse(0.5).is_err());
        assert!(k_inverse(1.5).is_err());
        assert!(k_inverse(0.0).is_err());
        // K decays like 1/(2x²), far outside the erfi guard
        let x = k_inverse(1e-6).unwrap();
        assert!((K(x) / 1e-6 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hyp_series_basics() {
        assert_eq!(hyp2f2_1132_2(0.0).unwrap(), 1.0);
        let z = 1e-4;
        let v = hyp2f2_1132_2(z).unwrap();
        assert!((v - (1.0 + z / 3.0)).abs() < 1e-8);
        // brute force: 200 terms of (1)_n(1)_n / ((3/2)_n (2)_n n!) z^n
        let z: f64 = -1.0;
        let mut sum = 0.0;
        for n in 0..200u32 {
            let mut c = 1.0;
            for k in 0..n {
                let kf = k as f64;
                c *= (1.0 + kf) * (1.0 + kf) / ((1.5 + kf) * (2.0 + kf) * (kf + 1.0));
            }
            sum += c * z.powi(n as i32);
        }
        assert!((hyp2f2_1132_2(-1.0).unwrap() - sum).abs() < 1e-14);
    }

    #[test]
    fn hyp_nonconvergence_reports_partial() {
        let ctrl = SeriesControl::new(1e-12, 50).unwrap();
        match hyp2f2_with(200.0, ctrl) {
            Err(SpecialError::NonConvergence { terms, partial }) => {
                assert_eq!(terms, 50);
                assert!(partial > 1.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
        assert!(SeriesControl::new(1e-3, 500).is_err());
        assert!(SeriesControl::new(1e-12, 10).is_err());
    }

    #[test]
    fn dawson_route_continuous_with_series() {
        // both routes at the switch point and a little inside it
        for &s in &[9.0f64, 10.0] {
            let series = 1.0 + hyp_series_tail(-s, SeriesControl::default()).unwrap();
            let quad = 2.0 / s * (0.5 * 10.0 * (1.0 + hyp_series_tail(-10.0, SeriesControl::default()).unwrap())
                - integrate_dawson(s.sqrt(), 10f64.sqrt()));
            assert!((series / quad - 1.0).abs() < 1e-10, "s={s}");
        }
        let a = hyp_value(-10.0 - 1e-9).unwrap();
        let b = hyp_value(-10.0 + 1e-9).unwrap();
        assert!((a / b - 1.0).abs() < 1e-9);
        let c = hyp_value(-64.0 - 1e-9).unwrap();
        let d = hyp_value(-64.0 + 1e-9).unwrap();
        assert!((c / d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dawson_integral_against_simpson() {
        let oracle = simpson(dawson, 0.0, 12.0, 20000);
        assert!((dawson_integral(12.0) - oracle).abs() < 1e-10);
    }

    #[test]
    fn r_functions_wiener_branch() {
        let p = params(0.0, 1.0);
        assert_eq!(R1(2.0, &p).unwrap(), 4.0);
        assert!((R2(2.0, &p).unwrap() - 16.0 / 6.0).abs() < 1e-15);
        let tiny = params(1e-12, 1.0);
        assert!((R1(1.0, &tiny).unwrap() - 1.0).abs() < 1e-6);
        let small = params(1e-7, 1.0);
        assert!((R1(1.0, &small).unwrap() - 1.0).abs() < 1e-6);
        assert!((R2(1.0, &small).unwrap() - 1.0 / 6.0).abs() < 1e-6);
    }

    #[test]
    fn r_functions_even_and_zero_at_origin() {
        for &th in &[-0.3, 0.0, 0.3] {
            let p = params(th, 1.2);
            assert_eq!(R1(0.0, &p).unwrap(), 0.0);
            assert_eq!(R2(0.0, &p).unwrap(), 0.0);
            for &e in &[0.4, 1.7, 5.0] {
                assert_eq!(R1(e, &p).unwrap(), R1(-e, &p).unwrap());
                assert_eq!(R2(e, &p).unwrap(), R2(-e, &p).unwrap());
            }
        }
    }

    #[test]
    fn r1_unstable_grows_logarithmically() {
        // R1 ~ ln(ε)/|θ| for θ < 0; reference values from 30-digit 2F2
        let p = params(-0.4, 1.0);
        let a = R1(1e3, &p).unwrap();
        let b = R1(1e6, &p).unwrap();
        assert!((a / 18.578_410_752_636_497 - 1.0).abs() < 1e-10, "{a}");
        assert!((b / 35.847_800_512_593_206 - 1.0).abs() < 1e-10, "{b}");
        assert!(((b - a) - (1e3f64).ln() / 0.4).abs() < 1e-5);
        let huge = R2(1e80, &p).unwrap();
        assert!(huge.is_finite() && huge > 0.0);
    }

    #[test]
    fn r3_values() {
        let w = params(0.0, 1.0);
        assert_eq!(R3(0.0, &w).unwrap(), 0.0);
        assert_eq!(R3(2.0, &w).unwrap(), 2.0);
        let p = params(0.5, 1.0);
        let pen = |s: f64| (1.0 - (-2.0 * 0.5 * s).exp()) / (2.0 * 0.5);
        let oracle = simpson(pen, 0.0, 1.0, 2000);
        assert!((R3(1.0, &p).unwrap() - oracle).abs() < 1e-12);
        assert!(R3(-0.1, &p).is_err());
    }
}
