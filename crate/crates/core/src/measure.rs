//! The de Finetti mixing measure `nu_N` of a generalized Curie-Weiss ensemble.
//!
//! `d nu_N(t) = exp(-N^alpha F_beta(t) / 2) / (1 - t^2) dt / Z_N` on `(-1, 1)`.
//!
//! Every density in this module carries the constant factor
//! `exp(N^alpha F_beta(m) / 2)`, so the stored normalization is
//! `Z_N exp(N^alpha F_beta(m) / 2)`. The shift is recorded in the measure and
//! cancels in every probability and expectation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};
use crate::scalar::{self, Magnetization, ModelParams};

/// Distance of the outermost integration nodes from `+-1`.
pub const EDGE_EPS: f64 = 1e-12;

/// Nodes of the sampling table per Laplace width `sigma*` around each of `+-m`.
const NODES_PER_WIDTH: usize = 64;
/// Half-width of the refined zone around `+-m`, in units of `sigma*`.
const REFINED_WIDTHS: usize = 12;
/// Uniform background nodes across `(-1, 1)`.
const BACKGROUND_NODES: usize = 1024;

fn normalize_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-300,
        rel: 1e-10,
        max_panels: 50_000,
    }
}

/// Log of the shifted, unnormalized mixing density for an arbitrary rate
/// function: `-x (rate(t) - shift) / 2 - ln(1 - t^2)`.
///
/// This is the hook for rate functions other than `F_beta`; only `F_beta` is
/// shipped.
#[inline]
pub fn shifted_log_weight(rate: f64, x: f64, shift: f64, t: f64) -> f64 {
    let log_one_minus_t2 = t.ln_1p() + (-t).ln_1p();
    -0.5 * x * (rate - shift) - log_one_minus_t2
}

/// `-x (F_beta(t) - F_beta(anchor)) / 2 - ln(1 - t^2)`, with the gap taken
/// from [`scalar::f_beta_gap`] so that large `x` does not amplify rounding.
#[inline]
fn log_weight(t: f64, anchor: f64, beta: f64, x: f64) -> f64 {
    -0.5 * x * scalar::f_beta_gap_unchecked(t, anchor, beta) - (t.ln_1p() + (-t).ln_1p())
}

/// `-N^alpha (F_beta(t) - F_beta(m)) / 2 - ln(1 - t^2)`.
pub fn unnormalized_log_density(t: f64, params: &ModelParams) -> Result<f64> {
    params.require_subcritical()?;
    if t.abs() >= 1.0 {
        return Err(Error::Domain(format!("mixing density requires |t| < 1, got {t}")));
    }
    let m = scalar::solve_magnetization(params.beta)?.m;
    Ok(log_weight(t, m, params.beta, params.n_alpha()))
}

/// Integral of `g(t) exp(-x (F_beta(t) - F_beta(anchor))/2) / (1 - t^2)` over
/// `[a, b]` for any `beta > 0`.
pub fn weighted_integral<G: Fn(f64) -> f64>(
    beta: f64,
    x: f64,
    anchor: f64,
    g: G,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<f64> {
    let integrand = |t: f64| {
        if t.abs() >= 1.0 {
            return 0.0;
        }
        g(t) * log_weight(t, anchor, beta, x).exp()
    };
    Ok(quadrature::integrate(integrand, breaks, tol)?.value)
}

/// `Gamma(k/2)` for positive integers `k`.
pub(crate) fn gamma_half(k: u32) -> f64 {
    assert!(k > 0, "Gamma(k/2) needs k >= 1");
    let (mut value, mut arg) = if k.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    let target = k as f64 / 2.0;
    while arg < target {
        value *= arg;
        arg += 1.0;
    }
    value
}

/// One-sided Laplace approximant `(Q/kappa) Gamma(lambda/kappa) (2/(x P))^(lambda/kappa)`
/// for `int_a^b exp(-x (F(t) - F(a))/2) phi(t) dt` with `F(t) - F(a) ~ P (t-a)^kappa`
/// and `phi(t) ~ Q (t-a)^(lambda-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceApprox {
    pub kappa: f64,
    pub p: f64,
    pub lambda: f64,
    pub q: f64,
    /// Sum of the one-sided approximants over all the monotone pieces that
    /// contribute, already multiplied out.
    pub value: f64,
}

fn laplace_one_sided(kappa: u32, p: f64, lambda: u32, q: f64, x: f64) -> f64 {
    let ratio = lambda as f64 / kappa as f64;
    // Gamma(lambda/kappa) with lambda/kappa a positive multiple of 1/2 here.
    let gamma = gamma_half(2 * lambda / kappa);
    debug_assert!((2 * lambda).is_multiple_of(kappa));
    q / kappa as f64 * gamma * (2.0 / (x * p)).powf(ratio)
}

/// Laplace approximant of the shifted normalization constant.
///
/// Four monotone pieces contribute, each with `kappa = 2`, `P = F''(m)/2`,
/// `lambda = 1`, `Q = 1/(1-m^2)`, giving
/// `2 Gamma(1/2) / (1-m^2) * (4 / (F''(m) N^alpha))^(1/2)`.
pub fn laplace_z_approx(params: &ModelParams) -> Result<LaplaceApprox> {
    params.require_subcritical()?;
    let m = scalar::solve_magnetization(params.beta)?.m;
    let p = scalar::f_beta_d2(m, params.beta)? / 2.0;
    let q = 1.0 / (1.0 - m * m);
    let value = 4.0 * laplace_one_sided(2, p, 1, q, params.n_alpha());
    Ok(LaplaceApprox {
        kappa: 2.0,
        p,
        lambda: 1.0,
        q,
        value,
    })
}

/// Laplace approximant of the shifted mass of `[-m/2, m/2]` (before division
/// by `Z_N`): two pieces with `kappa = 1`, `P = F'(-m/2)`, `Q = 1/(1-m^2/4)`,
/// times `exp(-N^alpha (F(m/2) - F(m))/2)`.
pub fn laplace_central_approx(params: &ModelParams) -> Result<LaplaceApprox> {
    params.require_subcritical()?;
    let beta = params.beta;
    let m = scalar::solve_magnetization(beta)?.m;
    let p = scalar::f_beta_d1(-m / 2.0, beta)?;
    let q = 1.0 / (1.0 - m * m / 4.0);
    let x = params.n_alpha();
    let gap = scalar::f_beta(m / 2.0, beta)? - scalar::f_beta(m, beta)?;
    let value = 2.0 * laplace_one_sided(1, p, 1, q, x) * (-0.5 * x * gap).exp();
    Ok(LaplaceApprox {
        kappa: 1.0,
        p,
        lambda: 1.0,
        q,
        value,
    })
}

/// `delta = (F(m/2) - F(m)) / 2`, the exponential decay rate of the central mass.
pub fn central_decay_rate(beta: f64) -> Result<f64> {
    let m = scalar::solve_magnetization(beta)?.m;
    Ok(0.5 * (scalar::f_beta(m / 2.0, beta)? - scalar::f_beta(m, beta)?))
}

/// The normalized mixing measure with its sampling table.
#[derive(Debug, Clone, PartialEq)]
pub struct DeFinettiMeasure {
    params: ModelParams,
    magnetization: Magnetization,
    shift: f64,
    z_shifted: f64,
    sigma_star: f64,
    nodes: Vec<f64>,
    cdf: Vec<f64>,
}

impl DeFinettiMeasure {
    /// Builds `nu_N`: computes the shifted `Z_N` by adaptive quadrature over
    /// panels anchored at `+-m`, `+-m/2`, `0` and `+-m +- k sigma*`, and
    /// tabulates the CDF.
    pub fn normalize(params: ModelParams) -> Result<Self> {
        let params = ModelParams::new(params.beta, params.alpha, params.n)?;
        params.require_subcritical()?;
        let magnetization = scalar::solve_magnetization(params.beta)?;
        let m = magnetization.m;
        let beta = params.beta;
        let x = params.n_alpha();
        let shift = scalar::f_beta(m, beta)?;
        let sigma_star = (x * scalar::f_beta_d2(m, beta)? / 4.0).powf(-0.5);

        let breaks = anchor_breaks(m, sigma_star);
        let z_shifted = weighted_integral(beta, x, m, |_| 1.0, &breaks, normalize_tolerance())?;
        if !(z_shifted > 0.0 && z_shifted.is_finite()) {
            return Err(Error::Numeric(format!(
                "normalization constant {z_shifted:e} is not positive and finite for {params:?}"
            )));
        }

        let nodes = table_nodes(m, sigma_star);
        // Panels far in the tails carry no mass at this scale.
        let seg_tol = Tolerance {
            abs: (1e-15 * z_shifted).max(1e-300),
            rel: 1e-10,
            max_panels: 2_000,
        };
        let mut cdf = Vec::with_capacity(nodes.len());
        let mut acc = quadrature::KahanSum::default();
        cdf.push(0.0);
        for w in nodes.windows(2) {
            let piece = weighted_integral(beta, x, m, |_| 1.0, w, seg_tol)?;
            acc.add(piece);
            cdf.push(acc.total());
        }
        let table_total = acc.total();
        let reintegrated = table_total / z_shifted;
        if (reintegrated - 1.0).abs() > 1e-9 {
            return Err(Error::Numeric(format!(
                "re-integrated mass {reintegrated} differs from 1 by more than 1e-9 for {params:?}"
            )));
        }
        for c in cdf.iter_mut() {
            *c /= table_total;
        }
        let last = cdf.len() - 1;
        cdf[last] = 1.0;
        strictly_increasing_cdf(&mut cdf);

        Ok(Self {
            params,
            magnetization,
            shift,
            z_shifted,
            sigma_star,
            nodes,
            cdf,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn magnetization(&self) -> Magnetization {
        self.magnetization
    }

    pub fn m(&self) -> f64 {
        self.magnetization.m
    }

    /// `Z_N exp(N^alpha F_beta(m) / 2)`.
    pub fn z_shifted(&self) -> f64 {
        self.z_shifted
    }

    /// The subtracted constant `F_beta(m)`.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `ln Z_N` of the unshifted measure.
    pub fn ln_z(&self) -> f64 {
        self.z_shifted.ln() - 0.5 * self.params.n_alpha() * self.shift
    }

    /// Laplace width `(N^alpha F''(m) / 4)^(-1/2)`.
    pub fn sigma_star(&self) -> f64 {
        self.sigma_star
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn cdf_table(&self) -> &[f64] {
        &self.cdf
    }

    /// Normalized density of `nu_N`.
    pub fn density(&self, t: f64) -> f64 {
        if t.abs() >= 1.0 {
            return 0.0;
        }
        log_weight(t, self.m(), self.params.beta, self.params.n_alpha()).exp() / self.z_shifted
    }

    /// `int_a^b g(t) d nu_N(t)` by adaptive quadrature.
    pub fn expectation<G: Fn(f64) -> f64>(&self, g: G, a: f64, b: f64) -> Result<f64> {
        let lo = a.max(-1.0 + EDGE_EPS);
        let hi = b.min(1.0 - EDGE_EPS);
        if !(hi > lo) {
            return Ok(0.0);
        }
        let mut breaks = vec![lo, hi];
        breaks.extend(anchor_breaks(self.m(), self.sigma_star).into_iter().filter(|&p| p > lo && p < hi));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let raw = weighted_integral(
            self.params.beta,
            self.params.n_alpha(),
            self.m(),
            g,
            &breaks,
            normalize_tolerance(),
        )?;
        Ok(raw / self.z_shifted)
    }

    /// `nu_N([a, b])`.
    pub fn probability(&self, a: f64, b: f64) -> Result<f64> {
        self.expectation(|_| 1.0, a, b)
    }

    /// Tabulated CDF at `t`, by linear interpolation.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= self.nodes[0] {
            return 0.0;
        }
        if t >= self.nodes[self.nodes.len() - 1] {
            return 1.0;
        }
        let i = self.nodes.partition_point(|&x| x <= t) - 1;
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        c0 + (c1 - c0) * (t - x0) / (x1 - x0)
    }

    /// Inverse of the tabulated CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1) - 1;
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        x0 + (x1 - x0) * frac.clamp(0.0, 1.0)
    }

    /// Draws `t ~ nu_N` by inverse-CDF lookup.
    pub fn sample_t<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u)
    }

    /// `nu_N([-m/2, m/2])`.
    pub fn central_mass(&self) -> Result<f64> {
        let m = self.m();
        self.probability(-m / 2.0, m / 2.0)
    }

    /// `int_{m/2}^1 |t - m|^ell d nu_N(t)`.
    pub fn abs_moment_right(&self, ell: u32) -> Result<f64> {
        if ell == 0 {
            return Err(Error::Parameter("ell must be at least 1".into()));
        }
        let m = self.m();
        self.expectation(|t| (t - m).abs().powi(ell as i32), m / 2.0, 1.0)
    }

    /// `int_{m/2}^1 (1 + m^2 - 2 m t)^ell d nu_N(t)`.
    pub fn mixed_moment_right(&self, ell: u32) -> Result<f64> {
        if ell == 0 {
            return Err(Error::Parameter("ell must be at least 1".into()));
        }
        let m = self.m();
        self.expectation(|t| (1.0 + m * m - 2.0 * m * t).powi(ell as i32), m / 2.0, 1.0)
    }

    pub fn to_document(&self) -> MeasureDocument {
        MeasureDocument {
            format: MEASURE_FORMAT.to_string(),
            beta: self.params.beta,
            alpha: self.params.alpha,
            n: self.params.n,
            m: self.magnetization.m,
            m_residual: self.magnetization.residual,
            z_n_shifted: self.z_shifted,
            shift: self.shift,
            sigma_star: self.sigma_star,
            grid: self.nodes.clone(),
            cdf: self.cdf.clone(),
        }
    }

    pub fn from_document(doc: MeasureDocument) -> Result<Self> {
        if doc.format != MEASURE_FORMAT {
            return Err(Error::Format(format!(
                "unsupported measure format {:?}, expected {MEASURE_FORMAT:?}",
                doc.format
            )));
        }
        let params = ModelParams::new(doc.beta, doc.alpha, doc.n)?;
        params.require_subcritical()?;
        if doc.grid.len() != doc.cdf.len() || doc.grid.len() < 2 {
            return Err(Error::Format("grid and cdf must have equal length >= 2".into()));
        }
        if doc.grid.windows(2).any(|w| !(w[1] > w[0])) || doc.cdf.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Format("grid and cdf must be strictly increasing".into()));
        }
        if doc.cdf[0] != 0.0 || doc.cdf[doc.cdf.len() - 1] != 1.0 {
            return Err(Error::Format("cdf must run from 0 to 1".into()));
        }
        if !(doc.z_n_shifted > 0.0) || !(doc.m > 0.0 && doc.m < 1.0) {
            return Err(Error::Format("invalid normalization or magnetization".into()));
        }
        Ok(Self {
            params,
            magnetization: Magnetization {
                m: doc.m,
                residual: doc.m_residual,
            },
            shift: doc.shift,
            z_shifted: doc.z_n_shifted,
            sigma_star: doc.sigma_star,
            nodes: doc.grid,
            cdf: doc.cdf,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&self.to_document()).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: MeasureDocument = serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        Self::from_document(doc)
    }
}

pub const MEASURE_FORMAT: &str = "cwsc-measure/1";

/// JSON cache document for a [`DeFinettiMeasure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDocument {
    pub format: String,
    pub beta: f64,
    pub alpha: f64,
    pub n: usize,
    pub m: f64,
    pub m_residual: f64,
    pub z_n_shifted: f64,
    pub shift: f64,
    pub sigma_star: f64,
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
}

fn anchor_breaks(m: f64, sigma_star: f64) -> Vec<f64> {
    let lo = -1.0 + EDGE_EPS;
    let hi = 1.0 - EDGE_EPS;
    let mut breaks = vec![lo, -m, -m / 2.0, 0.0, m / 2.0, m, hi];
    for k in [1.0, 2.0, 4.0, 7.0, 10.0, 20.0, 40.0] {
        for c in [-m, m] {
            for s in [-1.0, 1.0] {
                let p = c + s * k * sigma_star;
                if p > lo && p < hi {
                    breaks.push(p);
                }
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks
}

fn table_nodes(m: f64, sigma_star: f64) -> Vec<f64> {
    let lo = -1.0 + EDGE_EPS;
    let hi = 1.0 - EDGE_EPS;
    let mut nodes: Vec<f64> = (0..=BACKGROUND_NODES)
        .map(|i| lo + (hi - lo) * i as f64 / BACKGROUND_NODES as f64)
        .collect();
    let half = (NODES_PER_WIDTH * REFINED_WIDTHS) as i64;
    let step = sigma_star / NODES_PER_WIDTH as f64;
    for c in [-m, m] {
        for k in -half..=half {
            let p = c + k as f64 * step;
            if p > lo && p < hi {
                nodes.push(p);
            }
        }
    }
    nodes.extend([-m, -m / 2.0, 0.0, m / 2.0, m]);
    nodes.sort_by(f64::total_cmp);
    // Drop nodes closer than the resolution at which segments stay meaningful.
    let mut out: Vec<f64> = Vec::with_capacity(nodes.len());
    for x in nodes {
        match out.last() {
            Some(&prev) if x - prev <= 1e-14 => {}
            _ => out.push(x),
        }
    }
    let last = out.len() - 1;
    out[last] = hi;
    out
}

/// Tail segments can carry zero mass in floating point; nudge them so the
/// table stays strictly increasing and inverse lookups remain well defined.
fn strictly_increasing_cdf(cdf: &mut [f64]) {
    let n = cdf.len();
    for i in 1..n {
        if cdf[i] <= cdf[i - 1] {
            cdf[i] = next_up(cdf[i - 1]);
        }
    }
    if cdf[n - 1] > 1.0 {
        // Walk back from the top so the last entry is exactly 1.
        cdf[n - 1] = 1.0;
        for i in (1..n - 1).rev() {
            if cdf[i] >= cdf[i + 1] {
                cdf[i] = next_down(cdf[i + 1]);
            } else {
                break;
            }
        }
    }
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        return f64::from_bits(1);
    }
    f64::from_bits(x.to_bits() + 1)
}

fn next_down(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(beta: f64, alpha: f64, n: usize) -> ModelParams {
        ModelParams::new(beta, alpha, n).unwrap()
    }

    /// Brute-force trapezoid rule of `g * shifted weight` on a uniform grid
    /// over `[a, b]`, independent of the adaptive integrator.
    fn trapezoid<G: Fn(f64) -> f64>(p: &ModelParams, g: G, a: f64, b: f64, points: usize) -> f64 {
        let m = scalar::solve_magnetization(p.beta).unwrap().m;
        let shift = scalar::f_beta(m, p.beta).unwrap();
        let x = p.n_alpha();
        let h = (b - a) / (points - 1) as f64;
        let f = |t: f64| {
            if t.abs() >= 1.0 {
                0.0
            } else {
                let fb = (t.atanh()).powi(2) / p.beta + (1.0 - t * t).ln();
                g(t) * (-0.5 * x * (fb - shift)).exp() / (1.0 - t * t)
            }
        };
        let mut s = 0.5 * (f(a) + f(b));
        for i in 1..points - 1 {
            s += f(a + i as f64 * h);
        }
        s * h
    }

    #[test]
    fn log_density_at_minimum_and_symmetry() {
        let p = params(2.0, 2.0, 10);
        let m = scalar::solve_magnetization(2.0).unwrap().m;
        let v = unnormalized_log_density(m, &p).unwrap();
        assert!((v + (1.0 - m * m).ln()).abs() < 1e-12);
        for &t in &[0.1, 0.5, 0.9, 0.99] {
            assert_eq!(
                unnormalized_log_density(t, &p).unwrap(),
                unnormalized_log_density(-t, &p).unwrap()
            );
        }
        // At t = 0 only the exponent term remains: -N^alpha (0 - F(m)) / 2 < 0.
        let v0 = unnormalized_log_density(0.0, &p).unwrap();
        let fm = scalar::f_beta(m, 2.0).unwrap();
        assert!(fm < 0.0);
        assert!((v0 - 0.5 * 100.0 * fm).abs() < 1e-10);
        assert!(v0 < 0.0);
        assert!(unnormalized_log_density(1.0, &p).is_err());
    }

    #[test]
    fn gamma_half_values() {
        assert!((gamma_half(1) - std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half(2), 1.0);
        assert!((gamma_half(3) - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half(6), 2.0);
    }

    #[test]
    fn normalization_and_symmetry() {
        let nu = DeFinettiMeasure::normalize(params(2.0, 2.0, 8)).unwrap();
        let total = nu.probability(-1.0, 1.0).unwrap();
        assert!((total - 1.0).abs() < 1e-9);
        let right = nu.probability(0.0, 1.0).unwrap();
        let left = nu.probability(-1.0, 0.0).unwrap();
        assert!((right - 0.5).abs() < 1e-9);
        assert!((left - 0.5).abs() < 1e-9);
        for &t in &[0.0, 0.3, 0.9, 0.95, 0.999] {
            let (a, b) = (nu.density(t), nu.density(-t));
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
        let cdf = nu.cdf_table();
        assert_eq!(cdf[0], 0.0);
        assert_eq!(cdf[cdf.len() - 1], 1.0);
        assert!(cdf.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn z_matches_trapezoid_oracle() {
        let p = params(2.0, 2.0, 8);
        let nu = DeFinettiMeasure::normalize(p).unwrap();
        let oracle = trapezoid(&p, |_| 1.0, -1.0, 1.0, 1_000_001);
        assert!((nu.z_shifted() / oracle - 1.0).abs() < 1e-7, "{} vs {oracle}", nu.z_shifted());
    }

    #[test]
    fn functionals_match_trapezoid_oracle() {
        let p = params(2.0, 2.0, 8);
        let nu = DeFinettiMeasure::normalize(p).unwrap();
        let m = nu.m();
        let z = trapezoid(&p, |_| 1.0, -1.0, 1.0, 1_000_001);
        let central = trapezoid(&p, |_| 1.0, -m / 2.0, m / 2.0, 1_000_001) / z;
        assert!((nu.central_mass().unwrap() / central - 1.0).abs() < 1e-7);
        let abs2 = trapezoid(&p, |t| (t - m).powi(2), m / 2.0, 1.0, 1_000_001) / z;
        assert!((nu.abs_moment_right(2).unwrap() / abs2 - 1.0).abs() < 1e-6);
        let mixed = trapezoid(&p, |t| 1.0 + m * m - 2.0 * m * t, m / 2.0, 1.0, 1_000_001) / z;
        assert!((nu.mixed_moment_right(1).unwrap() / mixed - 1.0).abs() < 1e-6);
    }

    #[test]
    fn functional_edge_cases() {
        let nu = DeFinettiMeasure::normalize(params(2.0, 2.0, 8)).unwrap();
        assert!(nu.central_mass().unwrap() <= 1.0);
        assert!(nu.abs_moment_right(1).unwrap() >= 0.0);
        assert!(nu.abs_moment_right(0).is_err());
        assert!(nu.mixed_moment_right(0).is_err());
    }

    #[test]
    fn rejects_supercritical_temperature() {
        assert!(DeFinettiMeasure::normalize(ModelParams {
            beta: 1.0,
            alpha: 2.0,
            n: 8
        })
        .is_err());
        assert!(laplace_z_approx(&ModelParams {
            beta: 0.5,
            alpha: 2.0,
            n: 8
        })
        .is_err());
    }

    #[test]
    fn laplace_parameters_for_normalization() {
        let a = laplace_z_approx(&params(2.0, 2.0, 8)).unwrap();
        assert_eq!(a.kappa, 2.0);
        assert_eq!(a.lambda, 1.0);
        let m = scalar::solve_magnetization(2.0).unwrap().m;
        let d2 = scalar::f_beta_d2(m, 2.0).unwrap();
        let closed = 2.0 * std::f64::consts::PI.sqrt() / (1.0 - m * m) * (4.0 / (d2 * 64.0)).sqrt();
        assert!((a.value / closed - 1.0).abs() < 1e-14);
    }

    #[test]
    fn laplace_ratio_approaches_one() {
        let ratios: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let p = params(2.0, 2.0, n);
                DeFinettiMeasure::normalize(p).unwrap().z_shifted() / laplace_z_approx(&p).unwrap().value
            })
            .collect();
        let devs: Vec<f64> = ratios.iter().map(|r| (r - 1.0).abs()).collect();
        assert!(devs.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
        assert!(devs[2] < 0.01, "{ratios:?}");
    }

    #[test]
    fn sampler_matches_table_and_symmetry() {
        let nu = DeFinettiMeasure::normalize(params(2.0, 2.0, 8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut draws: Vec<f64> = (0..100_000).map(|_| nu.sample_t(&mut rng)).collect();
        assert!(draws.iter().all(|t| t.abs() < 1.0));
        let pos = draws.iter().filter(|&&t| t > 0.0).count() as f64 / draws.len() as f64;
        assert!((pos - 0.5).abs() < 0.01);
        draws.sort_by(f64::total_cmp);
        let n = draws.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &t) in draws.iter().enumerate() {
            let c = nu.cdf(t);
            d = d.max((c - i as f64 / n).abs()).max(((i + 1) as f64 / n - c).abs());
        }
        assert!(d < 0.01, "KS distance {d}");
    }

    #[test]
    fn sampler_concentrates_within_laplace_width() {
        let nu = DeFinettiMeasure::normalize(params(2.0, 2.0, 32)).unwrap();
        let (m, s) = (nu.m(), nu.sigma_star());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inside = (0..100_000)
            .filter(|_| {
                let t = nu.sample_t(&mut rng);
                (t - m).abs() <= 4.0 * s || (t + m).abs() <= 4.0 * s
            })
            .count();
        assert!(inside as f64 / 100_000.0 >= 0.99);
    }

    #[test]
    fn table_resolution_near_minima() {
        let nu = DeFinettiMeasure::normalize(params(2.0, 2.0, 32)).unwrap();
        let (m, s) = (nu.m(), nu.sigma_star());
        for c in [-m, m] {
            let inside = nu.nodes().iter().filter(|&&x| (x - c).abs() <= 0.5 * s).count();
            assert!(inside >= 64, "{inside} nodes within sigma* of {c}");
        }
    }

    #[test]
    fn json_round_trip() {
        let nu = DeFinettiMeasure::normalize(params(1.5, 1.0, 20)).unwrap();
        let back = DeFinettiMeasure::from_json(&nu.to_json().unwrap()).unwrap();
        assert_eq!(nu, back);
        let mut doc = nu.to_document();
        doc.format = "other".into();
        assert!(DeFinettiMeasure::from_document(doc).is_err());
    }
}
