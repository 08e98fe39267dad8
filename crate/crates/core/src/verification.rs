//! Independent oracles and Monte Carlo estimators.
//!
//! Exact oracles: full enumeration of the Curie-Weiss law, the de Finetti
//! integral, log-space binomial tails, closed-form conditional moments and the
//! exact mean of a `Y_N` entry at small `N`. Monte Carlo estimators return a
//! [`VerificationReport`] with the sample mean and its standard error
//! `sd / sqrt(replicas)`; unless an exact bound applies, a report passes when
//! the estimate is within [`SE_MULTIPLIER`] standard errors of its target.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use statrs::function::erf::erfc;
use statrs::function::factorial::ln_factorial;

use crate::ensemble::{build_y, sample_signs, sample_spin_matrix};
use crate::error::{Error, Result};
use crate::experiments::fmt_real;
use crate::measure::{weighted_integral, DeFinettiMeasure, EDGE_EPS};
use crate::quadrature::{KahanSum, Tolerance};
use crate::rng;
use crate::scalar;

/// Number of standard errors allowed between a Monte Carlo estimate and its target.
pub const SE_MULTIPLIER: f64 = 3.0;
/// Largest number of spins enumerated exhaustively.
pub const MAX_BRUTEFORCE_SPINS: usize = 20;
/// Largest number of Bernoulli trials in an exact binomial tail.
pub const MAX_BINOMIAL_TRIALS: u64 = 1_000_000;
/// Largest matrix size for [`exact_y_mean_small_n`].
pub const MAX_EXACT_Y_N: usize = 12;
/// Fewest replicas accepted by the moment estimators.
pub const MIN_REPLICAS: u64 = 1000;

// ---------------------------------------------------------------------------
// Reports

/// Outcome of one verification, exact or Monte Carlo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub params: Map<String, Value>,
    pub estimate: f64,
    /// Standard error; zero for exact entries.
    pub se: f64,
    pub bound: f64,
    pub pass: bool,
    pub replicas: u64,
    pub seed: Option<u64>,
}

/// How a Monte Carlo estimate is judged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Check {
    /// `|estimate - target| <= 3 se`.
    Target(f64),
    /// `|estimate| <= bound + 3 se`.
    Bound(f64),
}

impl Check {
    fn judge(self, estimate: f64, se: f64) -> (f64, bool) {
        match self {
            Check::Target(v) => (v, (estimate - v).abs() <= SE_MULTIPLIER * se),
            Check::Bound(b) => (b, estimate.abs() <= b + SE_MULTIPLIER * se),
        }
    }
}

impl VerificationReport {
    /// An exact (zero standard error) entry.
    pub fn exact(name: impl Into<String>, params: Value, estimate: f64, bound: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            params: into_map(params),
            estimate,
            se: 0.0,
            bound,
            pass,
            replicas: 0,
            seed: None,
        }
    }

    fn monte_carlo(name: &str, params: Value, samples: &[f64], check: Check, seed: u64) -> Self {
        let (estimate, se) = mean_se(samples);
        let (bound, pass) = check.judge(estimate, se);
        Self {
            name: name.to_string(),
            params: into_map(params),
            estimate,
            se,
            bound,
            pass,
            replicas: samples.len() as u64,
            seed: Some(seed),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub const CSV_HEADER: [&'static str; 8] =
        ["name", "params", "estimate", "se", "bound", "pass", "replicas", "seed"];

    /// Fields in [`Self::CSV_HEADER`] order; `params` is compact JSON.
    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.name.clone(),
            Value::Object(self.params.clone()).to_string(),
            fmt_real(self.estimate),
            fmt_real(self.se),
            fmt_real(self.bound),
            self.pass.to_string(),
            self.replicas.to_string(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
        ]
    }
}

fn into_map(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        Value::Null => Map::new(),
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    }
}

/// Sample mean and `sd / sqrt(n)` with the unbiased sample variance.
pub fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut sum = KahanSum::default();
    samples.iter().for_each(|&x| sum.add(x));
    let mean = sum.total() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let mut ss = KahanSum::default();
    samples.iter().for_each(|&x| ss.add((x - mean) * (x - mean)));
    let var = ss.total() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Contract(format!(
            "slope fit needs two equally long series of length >= 2, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) || !sxy.is_finite() {
        return Err(Error::Numeric("degenerate slope fit".into()));
    }
    Ok(sxy / sxx)
}

// ---------------------------------------------------------------------------
// Curie-Weiss enumeration and the de Finetti integral

/// `E[phi(xi)]` under the Curie-Weiss law on `m_spins` spins,
/// `P(xi) ~ exp(beta/(2M) (sum xi)^2)`, by full enumeration.
pub fn cw_expectation_bruteforce<F>(m_spins: usize, beta: f64, observable: F) -> Result<f64>
where
    F: Fn(&[i8]) -> f64,
{
    if m_spins > MAX_BRUTEFORCE_SPINS {
        return Err(Error::Capacity(format!(
            "enumeration supports at most {MAX_BRUTEFORCE_SPINS} spins, got {m_spins}"
        )));
    }
    if m_spins == 0 {
        return Err(Error::Parameter("need at least one spin".into()));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("beta must be finite and >= 0, got {beta}")));
    }
    let m = m_spins as f64;
    let top = 0.5 * beta * m;
    let mut spins = vec![0i8; m_spins];
    let mut num = KahanSum::default();
    let mut den = KahanSum::default();
    for mask in 0u32..(1u32 << m_spins) {
        for (k, s) in spins.iter_mut().enumerate() {
            *s = if mask >> k & 1 == 1 { 1 } else { -1 };
        }
        let total = 2.0 * mask.count_ones() as f64 - m;
        let w = (0.5 * beta / m * total * total - top).exp();
        num.add(w * observable(&spins));
        den.add(w);
    }
    Ok(num.total() / den.total())
}

/// `xi_1 xi_2 ... xi_degree`, for use with [`cw_expectation_bruteforce`].
pub fn site_monomial(sites: &[usize]) -> impl Fn(&[i8]) -> f64 + '_ {
    move |x: &[i8]| sites.iter().map(|&k| x[k] as f64).product()
}

/// Coefficients of `t^degree`, the conditional mean of a product over
/// `degree` distinct sites.
pub fn monomial_poly(degree: usize) -> Vec<f64> {
    let mut c = vec![0.0; degree + 1];
    c[degree] = 1.0;
    c
}

/// The de Finetti side of the Curie-Weiss identity: `int p(t) w(t) dt / int w(t) dt`
/// with `w(t) = exp(-M F_beta(t)/2) / (1 - t^2)` and `p` given by its
/// coefficients in increasing degree.
pub fn definetti_expectation_quadrature(m_spins: usize, beta: f64, poly: &[f64]) -> Result<f64> {
    if m_spins == 0 {
        return Err(Error::Parameter("need at least one spin".into()));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("quadrature needs beta > 0, got {beta}")));
    }
    let x = m_spins as f64;
    let m = if beta > 1.0 {
        Some(scalar::solve_magnetization(beta)?.m)
    } else {
        None
    };
    let anchor = m.unwrap_or(0.0);
    let mut breaks = vec![0.0];
    for k in 1..=12 {
        let e = 10f64.powi(-k).max(EDGE_EPS);
        breaks.extend([-1.0 + e, 1.0 - e]);
    }
    if let Some(m) = m {
        breaks.extend([-m, m]);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let tol = Tolerance {
        abs: 1e-300,
        rel: 1e-13,
        max_panels: 100_000,
    };
    let eval = |t: f64| poly.iter().rev().fold(0.0, |acc, &c| acc * t + c);
    // Halves are integrated separately: odd observables cancel to ~0 overall,
    // where a relative tolerance is unattainable.
    let zero = breaks.iter().position(|&b| b == 0.0).expect("0 is a breakpoint");
    let (left, right) = (&breaks[..=zero], &breaks[zero..]);
    let half = |g: &dyn Fn(f64) -> f64| -> Result<f64> {
        Ok(weighted_integral(beta, x, anchor, g, left, tol)?
            + weighted_integral(beta, x, anchor, g, right, tol)?)
    };
    let num = half(&eval)?;
    let den = half(&|_| 1.0)?;
    Ok(num / den)
}

/// `|a - b| <= rel * max(|a|, |b|)`, with an absolute floor of `1e-14` for
/// values that vanish by symmetry.
pub fn agree(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= (rel * a.abs().max(b.abs())).max(1e-14)
}

// ---------------------------------------------------------------------------
// Binomial tails

#[derive(Clone, Copy)]
struct Bernoulli {
    p: f64,
    q: f64,
}

impl Bernoulli {
    fn from_t(t: f64) -> Self {
        Self {
            p: 0.5 * (1.0 + t),
            q: 0.5 * (1.0 - t),
        }
    }
}

fn ln_pmf(n: u64, b: Bernoulli, j: u64) -> f64 {
    ln_factorial(n) - ln_factorial(j) - ln_factorial(n - j)
        + j as f64 * b.p.ln()
        + (n - j) as f64 * b.q.ln()
}

/// `ln sum_{j <= start} pmf(j)` for `start` at or below the mode, summed
/// downward relative to `pmf(start)` until the geometric remainder is negligible.
fn ln_sum_down(n: u64, b: Bernoulli, start: u64) -> f64 {
    let mut rel = 1.0;
    let mut sum = KahanSum::default();
    sum.add(1.0);
    let mut j = start;
    while j > 0 {
        let r = j as f64 * b.q / ((n - j + 1) as f64 * b.p);
        rel *= r;
        sum.add(rel);
        if rel == 0.0 || (r < 1.0 && rel * r / (1.0 - r) < 1e-17 * sum.total()) {
            break;
        }
        j -= 1;
    }
    ln_pmf(n, b, start) + sum.total().ln()
}

/// Mirror of [`ln_sum_down`] for `start` at or above the mode.
fn ln_sum_up(n: u64, b: Bernoulli, start: u64) -> f64 {
    let mut rel = 1.0;
    let mut sum = KahanSum::default();
    sum.add(1.0);
    let mut j = start;
    while j < n {
        let r = (n - j) as f64 * b.p / ((j + 1) as f64 * b.q);
        rel *= r;
        sum.add(rel);
        if rel == 0.0 || (r < 1.0 && rel * r / (1.0 - r) < 1e-17 * sum.total()) {
            break;
        }
        j += 1;
    }
    ln_pmf(n, b, start) + sum.total().ln()
}

fn ln_one_minus_exp(x: f64) -> f64 {
    (-x.exp_m1()).ln()
}

fn mode(n: u64, b: Bernoulli) -> u64 {
    (((n + 1) as f64 * b.p).floor() as u64).min(n)
}

fn ln_cdf(n: u64, b: Bernoulli, k: i64) -> f64 {
    if k < 0 {
        return f64::NEG_INFINITY;
    }
    let k = k as u64;
    if k >= n || b.p == 0.0 {
        return 0.0;
    }
    if b.q == 0.0 {
        return f64::NEG_INFINITY;
    }
    if k <= mode(n, b) {
        ln_sum_down(n, b, k)
    } else {
        ln_one_minus_exp(ln_sum_up(n, b, k + 1))
    }
}

fn ln_sf(n: u64, b: Bernoulli, k: i64) -> f64 {
    if k <= 0 {
        return 0.0;
    }
    let k = k as u64;
    if k > n || b.p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if b.q == 0.0 {
        return 0.0;
    }
    if k >= mode(n, b) {
        ln_sum_up(n, b, k)
    } else {
        ln_one_minus_exp(ln_sum_down(n, b, k - 1))
    }
}

fn check_trials(n: u64) -> Result<()> {
    if n > MAX_BINOMIAL_TRIALS {
        return Err(Error::Capacity(format!(
            "exact binomial tails support at most {MAX_BINOMIAL_TRIALS} trials, got {n}"
        )));
    }
    Ok(())
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("success probability must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// `ln P(J <= k)` for `J ~ Bin(n, p)`, exact up to rounding.
pub fn ln_binomial_cdf(n: u64, p: f64, k: i64) -> Result<f64> {
    check_trials(n)?;
    check_probability(p)?;
    Ok(ln_cdf(n, Bernoulli { p, q: 1.0 - p }, k))
}

/// `ln P(J >= k)` for `J ~ Bin(n, p)`.
pub fn ln_binomial_sf(n: u64, p: f64, k: i64) -> Result<f64> {
    check_trials(n)?;
    check_probability(p)?;
    Ok(ln_sf(n, Bernoulli { p, q: 1.0 - p }, k))
}

/// Number of upper-triangle entries of an `n x n` matrix.
pub fn upper_len(n: usize) -> u64 {
    (n as u64) * (n as u64 + 1) / 2
}

fn check_t(t: f64) -> Result<()> {
    if !(t.abs() <= 1.0) {
        return Err(Error::Domain(format!("mixing parameter must satisfy |t| <= 1, got {t}")));
    }
    Ok(())
}

/// `ln P_t(S_N <= 0) = ln P(Bin(K, (1+t)/2) <= K/2)` with `K = n(n+1)/2`.
pub fn large_deviation_exact_ln(n: usize, t: f64) -> Result<f64> {
    let k = upper_len(n);
    check_trials(k)?;
    check_t(t)?;
    Ok(ln_cdf(k, Bernoulli::from_t(t), (k / 2) as i64))
}

/// `P_t(S_N <= 0)`.
pub fn large_deviation_exact(n: usize, t: f64) -> Result<f64> {
    Ok(large_deviation_exact_ln(n, t)?.exp())
}

/// `-q_a n^2`.
pub fn ld_bound_ln(n: usize, a: f64) -> Result<f64> {
    Ok(-scalar::ld_rate(a)? * (n * n) as f64)
}

/// `exp(-q_a n^2)`.
pub fn ld_bound(n: usize, a: f64) -> Result<f64> {
    Ok(ld_bound_ln(n, a)?.exp())
}

/// Positive root of `tanh(beta x) = x` by plain bisection on `(0, 1]`, run
/// until the bracket stops shrinking. Independent of the Newton solver.
pub fn magnetization_bisection(beta: f64) -> Result<f64> {
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("bisection oracle needs beta > 1, got {beta}")));
    }
    let h = |x: f64| (beta * x).tanh() - x;
    // h > 0 just right of 0 since h'(0) = beta - 1 > 0.
    let (mut lo, mut hi) = ((1e-3 * (beta - 1.0)).min(1e-3), 1.0);
    if !(h(lo) > 0.0) {
        return Err(Error::Numeric(format!("bisection oracle not bracketed at beta = {beta}")));
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            return Ok(0.5 * (lo + hi));
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

// ---------------------------------------------------------------------------
// Conditional moments

/// Which magnetization branch is subtracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `X - m`.
    Plus,
    /// `X + m`.
    Minus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

fn check_m(m: f64) -> Result<()> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::Parameter(format!("magnetization must lie in (0, 1), got {m}")));
    }
    Ok(())
}

/// `E_t prod_{nu <= ell} (X(i_nu, j_nu) -+ m)^2 = (1 + m^2 -+ 2 m t)^ell` over
/// distinct entries.
pub fn conditional_h_moment(t: f64, m: f64, ell: u32, branch: Branch) -> Result<f64> {
    check_t(t)?;
    check_m(m)?;
    Ok((1.0 + m * m - branch.sign() * 2.0 * m * t).powi(ell as i32))
}

/// Monte Carlo estimate of [`conditional_h_moment`] from `draws` samples of
/// `ell` independent entries with parameter `t`.
pub fn mc_conditional_h_moment(
    t: f64,
    m: f64,
    ell: u32,
    branch: Branch,
    draws: u64,
    seed: u64,
) -> Result<VerificationReport> {
    let exact = conditional_h_moment(t, m, ell, branch)?;
    let shift = branch.sign() * m;
    let samples: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, r);
            sample_signs(t, ell as usize, &mut g)
                .into_iter()
                .map(|x| (x as f64 - shift).powi(2))
                .product()
        })
        .collect();
    let params = serde_json::json!({ "t": t, "m": m, "ell": ell, "branch": branch });
    Ok(VerificationReport::monte_carlo(
        "conditional_h_moment",
        params,
        &samples,
        Check::Target(exact),
        seed,
    ))
}

/// `E_t Y(i, j)` for an `n x n` matrix, exactly: conditions on the entry and
/// uses binomial tails for the sum of the other `K - 1` entries.
pub fn conditional_y_mean(n: usize, t: f64, m: f64) -> Result<f64> {
    check_t(t)?;
    check_m(m)?;
    let k = upper_len(n);
    check_trials(k)?;
    if n == 0 {
        return Err(Error::Parameter("matrix size must be positive".into()));
    }
    Ok(conditional_y_mean_unchecked(k, t, m))
}

fn conditional_y_mean_unchecked(k: u64, t: f64, m: f64) -> f64 {
    let b = Bernoulli::from_t(t);
    let rest = k - 1;
    // S' = 2J - rest. S > 0 given X = +1 iff S' >= 0; given X = -1 iff S' >= 2.
    let need = |s: i64| (rest as i64 + s + 1).div_euclid(2);
    // Both sides of each split come from tails directly; no 1 - P cancellation.
    let (ap, bp) = (
        b.p * ln_sf(rest, b, need(0)).exp(),
        b.p * ln_cdf(rest, b, need(0) - 1).exp(),
    );
    let (am, bm) = (
        b.q * ln_sf(rest, b, need(2)).exp(),
        b.q * ln_cdf(rest, b, need(2) - 1).exp(),
    );
    // Entry value x on the plus branch contributes x - m, on the minus branch x + m.
    let plus = ap * (1.0 - m) + am * (-1.0 - m);
    let minus = bp * (1.0 + m) + bm * (-1.0 + m);
    (plus + minus) / (1.0 - m * m).sqrt()
}

/// `P_t(S_N = 0)`; zero when `K` is odd.
pub fn conditional_tie_probability(n: usize, t: f64) -> Result<f64> {
    check_t(t)?;
    let k = upper_len(n);
    check_trials(k)?;
    if k % 2 == 1 {
        return Ok(0.0);
    }
    let b = Bernoulli::from_t(t);
    if b.p == 0.0 || b.q == 0.0 {
        return Ok(0.0);
    }
    Ok(ln_pmf(k, b, k / 2).exp())
}

// ---------------------------------------------------------------------------
// Moment specifications and Monte Carlo moment estimates

/// Index pairs of a mixed moment: `prod X(i,j)^a prod X(u,v)^b`.
///
/// Indices are one-based with `i <= j`; all pairs are distinct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentSpec {
    distinct_pairs: Vec<(usize, usize)>,
    repeated_pairs: Vec<(usize, usize)>,
    distinct_power: u32,
    repeated_power: u32,
}

impl MomentSpec {
    pub fn new(
        distinct_pairs: Vec<(usize, usize)>,
        repeated_pairs: Vec<(usize, usize)>,
        distinct_power: u32,
        repeated_power: u32,
    ) -> Result<Self> {
        for p in [distinct_power, repeated_power] {
            if p != 1 && p != 2 {
                return Err(Error::Contract(format!("powers must be 1 or 2, got {p}")));
            }
        }
        let mut all: Vec<(usize, usize)> = Vec::new();
        for &(i, j) in distinct_pairs.iter().chain(&repeated_pairs) {
            if i == 0 || i > j {
                return Err(Error::Contract(format!(
                    "pairs must be one-based with i <= j, got ({i}, {j})"
                )));
            }
            if all.contains(&(i, j)) {
                return Err(Error::Contract(format!("pair ({i}, {j}) is repeated")));
            }
            all.push((i, j));
        }
        if distinct_pairs.is_empty() && repeated_pairs.is_empty() {
            return Err(Error::Contract("moment needs at least one pair".into()));
        }
        Ok(Self {
            distinct_pairs,
            repeated_pairs,
            distinct_power,
            repeated_power,
        })
    }

    /// `E prod X(i_nu, j_nu) prod X(u_rho, v_rho)`, all to the first power.
    pub fn decay(distinct: Vec<(usize, usize)>, repeated: Vec<(usize, usize)>) -> Result<Self> {
        Self::new(distinct, repeated, 1, 1)
    }

    /// `E prod X(i_nu, j_nu)^2`.
    pub fn second_moment(pairs: Vec<(usize, usize)>) -> Result<Self> {
        Self::new(pairs, Vec::new(), 2, 1)
    }

    /// `ell` distinct pairs followed by `p` further pairs, drawn uniformly
    /// without replacement from the upper triangle of an `n x n` matrix.
    pub fn random<R: Rng + ?Sized>(
        n: usize,
        ell: usize,
        p: usize,
        distinct_power: u32,
        rng: &mut R,
    ) -> Result<Self> {
        let total = upper_len(n) as usize;
        if ell + p > total {
            return Err(Error::Contract(format!(
                "{} pairs requested from an upper triangle with {total} entries",
                ell + p
            )));
        }
        let picks = rand::seq::index::sample(rng, total, ell + p);
        let pairs: Vec<(usize, usize)> = picks.iter().map(|k| unpack(n, k)).collect();
        Self::new(pairs[..ell].to_vec(), pairs[ell..].to_vec(), distinct_power, 1)
    }

    pub fn distinct_pairs(&self) -> &[(usize, usize)] {
        &self.distinct_pairs
    }

    pub fn repeated_pairs(&self) -> &[(usize, usize)] {
        &self.repeated_pairs
    }

    pub fn distinct_power(&self) -> u32 {
        self.distinct_power
    }

    pub fn ell(&self) -> usize {
        self.distinct_pairs.len()
    }

    /// Every pair with its power.
    pub fn factors(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        let d = self.distinct_pairs.iter().map(|&(i, j)| (i, j, self.distinct_power));
        let r = self.repeated_pairs.iter().map(|&(i, j)| (i, j, self.repeated_power));
        d.chain(r)
    }

    /// Number of factors with power one; sets the decay order `N^{-order/2}`.
    pub fn odd_factors(&self) -> usize {
        self.factors().filter(|f| f.2 == 1).count()
    }

    pub fn check_size(&self, n: usize) -> Result<()> {
        match self.factors().find(|&(_, j, _)| j > n) {
            Some((i, j, _)) => Err(Error::Contract(format!(
                "pair ({i}, {j}) lies outside a {n} x {n} matrix"
            ))),
            None => Ok(()),
        }
    }

    /// Compact form such as `(1,1)(1,2)^2|(3,4)`.
    pub fn label(&self) -> String {
        let block = |pairs: &[(usize, usize)], pow: u32| {
            pairs
                .iter()
                .map(|(i, j)| if pow == 1 { format!("({i},{j})") } else { format!("({i},{j})^{pow}") })
                .collect::<String>()
        };
        let mut s = block(&self.distinct_pairs, self.distinct_power);
        if !self.repeated_pairs.is_empty() {
            s.push('|');
            s.push_str(&block(&self.repeated_pairs, self.repeated_power));
        }
        s
    }
}

/// One-based `(i, j)` of the `k`-th packed upper-triangle entry.
fn unpack(n: usize, mut k: usize) -> (usize, usize) {
    for i in 0..n {
        let row = n - i;
        if k < row {
            return (i + 1, i + k + 1);
        }
        k -= row;
    }
    unreachable!("index within the upper triangle")
}

/// Matrix whose entries a moment is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentTarget {
    /// The raw spin matrix `X_N`.
    X,
    /// The branch-centred `Y_N`.
    Y,
}

/// Monte Carlo estimate of `E prod entries` over fresh samples of the ensemble.
///
/// For `X` only the entries named by `spec` are drawn; `Y` needs the sign of
/// `S_N` and so samples full matrices.
pub fn mc_moment_estimate(
    measure: &DeFinettiMeasure,
    spec: &MomentSpec,
    target: MomentTarget,
    replicas: u64,
    base_seed: u64,
    check: Check,
) -> Result<VerificationReport> {
    let mut v = mc_moment_estimates(measure, &[(spec.clone(), check)], target, replicas, base_seed)?;
    Ok(v.remove(0))
}

/// Several moments from the same replicas: each replica draws one `t` (and
/// for `Y` one full matrix) and evaluates every spec on it.
pub fn mc_moment_estimates(
    measure: &DeFinettiMeasure,
    specs: &[(MomentSpec, Check)],
    target: MomentTarget,
    replicas: u64,
    base_seed: u64,
) -> Result<Vec<VerificationReport>> {
    if replicas < MIN_REPLICAS {
        return Err(Error::Parameter(format!(
            "moment estimates need at least {MIN_REPLICAS} replicas, got {replicas}"
        )));
    }
    let n = measure.params().n;
    for (spec, _) in specs {
        spec.check_size(n)?;
    }
    let m = measure.m();
    let factors: Vec<Vec<(usize, usize, u32)>> = specs.iter().map(|(s, _)| s.factors().collect()).collect();
    let rows: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let mut g = rng::stream(base_seed, r);
            let t = measure.sample_t(&mut g);
            Ok(match target {
                MomentTarget::X => factors
                    .iter()
                    .map(|fs| {
                        sample_signs(t, fs.len(), &mut g)
                            .iter()
                            .zip(fs)
                            .map(|(&v, f)| (v as f64).powi(f.2 as i32))
                            .product()
                    })
                    .collect(),
                MomentTarget::Y => {
                    let x = sample_spin_matrix(t, n, &mut g)?;
                    let y = build_y(&x, m)?;
                    factors
                        .iter()
                        .map(|fs| {
                            fs.iter()
                                .map(|&(i, j, p)| y.entry(i - 1, j - 1).powi(p as i32))
                                .product()
                        })
                        .collect()
                }
            })
        })
        .collect::<Result<_>>()?;
    let p = measure.params();
    Ok(specs
        .iter()
        .enumerate()
        .map(|(k, (spec, check))| {
            let samples: Vec<f64> = rows.iter().map(|row| row[k]).collect();
            let params = serde_json::json!({
                "beta": p.beta,
                "alpha": p.alpha,
                "n": n,
                "target": target,
                "spec": spec.label(),
            });
            VerificationReport::monte_carlo("moment", params, &samples, *check, base_seed)
        })
        .collect())
}

/// Exact `E Y(i, j)` for small `N`: `int E_t Y(i, j) d nu_N(t)` with the
/// conditional mean from [`conditional_y_mean`].
pub fn exact_y_mean_small_n(measure: &DeFinettiMeasure, pair: (usize, usize)) -> Result<f64> {
    let n = measure.params().n;
    if n > MAX_EXACT_Y_N {
        return Err(Error::Capacity(format!(
            "exact Y mean supports N <= {MAX_EXACT_Y_N}, got {n}"
        )));
    }
    MomentSpec::decay(vec![pair], Vec::new())?.check_size(n)?;
    let k = upper_len(n);
    let m = measure.m();
    // The integrand is odd up to tie terms; integrate the halves separately.
    let g = |t: f64| conditional_y_mean_unchecked(k, t, m);
    Ok(measure.expectation(g, -1.0, 0.0)? + measure.expectation(g, 0.0, 1.0)?)
}

/// `E Y(i, j) = m P(S_N = 0) / sqrt(1 - m^2)`, from the global spin-flip
/// symmetry of the ensemble. Exactly zero when `N(N+1)/2` is odd.
pub fn y_mean_from_ties(measure: &DeFinettiMeasure) -> Result<f64> {
    let n = measure.params().n;
    let k = upper_len(n);
    check_trials(k)?;
    if k % 2 == 1 {
        return Ok(0.0);
    }
    let m = measure.m();
    let tie = measure.expectation(
        |t| conditional_tie_probability(n, t).unwrap_or(0.0),
        -1.0,
        1.0,
    )?;
    Ok(m * tie / (1.0 - m * m).sqrt())
}

/// Monte Carlo estimate of `E_nu |E_t Y(i, j)|`, the averaged conditional
/// bias of a `Y_N` entry. Each replica draws `t ~ nu_N` and evaluates the
/// conditional mean exactly, so the estimate has no entry-level noise.
pub fn mc_conditional_y_bias(
    measure: &DeFinettiMeasure,
    replicas: u64,
    base_seed: u64,
) -> Result<VerificationReport> {
    if replicas < MIN_REPLICAS {
        return Err(Error::Parameter(format!(
            "moment estimates need at least {MIN_REPLICAS} replicas, got {replicas}"
        )));
    }
    let n = measure.params().n;
    let k = upper_len(n);
    check_trials(k)?;
    let m = measure.m();
    let samples: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(base_seed, r);
            let t = measure.sample_t(&mut g);
            conditional_y_mean_unchecked(k, t, m).abs()
        })
        .collect();
    let p = measure.params();
    let params = serde_json::json!({ "beta": p.beta, "alpha": p.alpha, "n": n });
    let bound = 5.0 / (n as f64).sqrt();
    Ok(VerificationReport::monte_carlo(
        "conditional_y_bias",
        params,
        &samples,
        Check::Bound(bound),
        base_seed,
    ))
}

/// Number of replicas with `t > m/2` but `S_N <= 0`, i.e. where the sign
/// indicator picks the wrong branch.
pub fn indicator_failures(measure: &DeFinettiMeasure, replicas: u64, base_seed: u64) -> Result<u64> {
    let n = measure.params().n;
    let m = measure.m();
    let fails: Vec<bool> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<bool> {
            let mut g = rng::stream(base_seed, r);
            let t = measure.sample_t(&mut g);
            let x = sample_spin_matrix(t, n, &mut g)?;
            Ok(t > 0.5 * m && x.s_n() <= 0)
        })
        .collect::<Result<_>>()?;
    Ok(fails.into_iter().filter(|&f| f).count() as u64)
}

// ---------------------------------------------------------------------------
// Rejection sampler and two-sample KS

/// Independent sampler for `nu_N`: proposals from two Gaussians at `+-m` with
/// variance `2 / (N^alpha F''(m))` truncated to `(-1, 1)`, mixed with 1%
/// uniform, accepted against the exact density.
#[derive(Debug, Clone)]
pub struct RejectionSampler<'a> {
    measure: &'a DeFinettiMeasure,
    sd: f64,
    truncated_mass: f64,
    ratio_bound: f64,
}

const UNIFORM_WEIGHT: f64 = 0.01;

impl<'a> RejectionSampler<'a> {
    pub fn new(measure: &'a DeFinettiMeasure) -> Result<Self> {
        let p = measure.params();
        let m = measure.m();
        let curvature = scalar::f_beta_d2(m, p.beta)?;
        let sd = (2.0 / (p.n_alpha() * curvature)).sqrt();
        // Both components lose the same mass to truncation by symmetry.
        let phi = |z: f64| 0.5 * erfc(-z / std::f64::consts::SQRT_2);
        let truncated_mass = phi((1.0 - m) / sd) - phi((-1.0 - m) / sd);
        let mut s = Self {
            measure,
            sd,
            truncated_mass,
            ratio_bound: 1.0,
        };
        let mut worst: f64 = 0.0;
        let grid = measure
            .nodes()
            .iter()
            .copied()
            .chain((1..20_000).map(|k| -1.0 + k as f64 / 10_000.0));
        for t in grid {
            let g = s.proposal_density(t);
            if g > 0.0 {
                worst = worst.max(measure.density(t) / g);
            }
        }
        if !(worst.is_finite() && worst > 0.0) {
            return Err(Error::Numeric("rejection envelope ratio is not finite".into()));
        }
        s.ratio_bound = 1.5 * worst;
        Ok(s)
    }

    /// `sup f/g` used for acceptance, with a 1.5 safety factor.
    pub fn ratio_bound(&self) -> f64 {
        self.ratio_bound
    }

    pub fn proposal_density(&self, t: f64) -> f64 {
        if t.abs() >= 1.0 {
            return 0.0;
        }
        let m = self.measure.m();
        let norm = 1.0 / (self.sd * (2.0 * std::f64::consts::PI).sqrt() * self.truncated_mass);
        let gauss = |c: f64| norm * (-0.5 * ((t - c) / self.sd).powi(2)).exp();
        (1.0 - UNIFORM_WEIGHT) * 0.5 * (gauss(m) + gauss(-m)) + UNIFORM_WEIGHT * 0.5
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.random::<f64>() < UNIFORM_WEIGHT {
            return rng.random_range(-1.0..1.0);
        }
        let centre = if rng.random::<bool>() {
            self.measure.m()
        } else {
            -self.measure.m()
        };
        loop {
            let z: f64 = StandardNormal.sample(rng);
            let t = centre + self.sd * z;
            if t.abs() < 1.0 {
                return t;
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let t = self.propose(rng);
            let accept = self.measure.density(t) / (self.ratio_bound * self.proposal_density(t));
            if rng.random::<f64>() < accept {
                return t;
            }
        }
    }
}

/// `sup_x |F_a(x) - F_b(x)|` between two empirical distributions.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample KS statistic at `level`:
/// `sqrt(-ln(level/2)/2) sqrt((n+m)/(nm))`.
pub fn ks_two_sample_critical(n: usize, m: usize, level: f64) -> f64 {
    let c = (-(0.5 * level).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}
