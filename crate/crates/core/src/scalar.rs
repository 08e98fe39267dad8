//! Scalar functions of the model: the rate function `F_beta` and its
//! derivatives, the magnetization, the large-deviation tilt and rate, and the
//! semicircle reference law.
//!
//! All functions are pure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inverse temperature `beta`, size exponent `alpha` and matrix dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub alpha: f64,
    pub n: usize,
}

impl ModelParams {
    pub fn new(beta: f64, alpha: f64, n: usize) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
        }
        if n == 0 {
            return Err(Error::Parameter("n must be at least 1".into()));
        }
        Ok(Self { beta, alpha, n })
    }

    /// `N^alpha`, the large parameter of the mixing measure.
    pub fn n_alpha(&self) -> f64 {
        (self.n as f64).powf(self.alpha)
    }

    pub(crate) fn require_subcritical(&self) -> Result<()> {
        if self.beta > 1.0 {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "subcritical temperature required (beta > 1), got beta = {}",
                self.beta
            )))
        }
    }
}

/// Positive root of `tanh(beta m) = m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Magnetization {
    pub m: f64,
    /// `|tanh(beta m) - m|` at the returned root.
    pub residual: f64,
}

fn check_open_unit(t: f64, what: &str) -> Result<()> {
    if t.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} requires |t| < 1, got {t}")))
    }
}

/// `artanh(t)` and `ln(1 - t^2)` evaluated without cancellation near `|t| = 1`.
#[inline]
fn artanh_and_log1mt2(t: f64) -> (f64, f64) {
    let lp = t.ln_1p();
    let lm = (-t).ln_1p();
    (0.5 * (lp - lm), lp + lm)
}

/// `F_beta(t) = artanh(t)^2 / beta + ln(1 - t^2)`.
pub fn f_beta(t: f64, beta: f64) -> Result<f64> {
    check_open_unit(t, "F_beta")?;
    Ok(f_beta_unchecked(t, beta))
}

#[inline]
pub(crate) fn f_beta_unchecked(t: f64, beta: f64) -> f64 {
    let (a, l) = artanh_and_log1mt2(t);
    a * a / beta + l
}

/// `F_beta(t) - F_beta(a)` without cancellation.
///
/// Evaluated at `|t|`, `|a|` (F is even) through
/// `artanh t - artanh a = artanh((t - a)/(1 - t a))` and
/// `ln((1 - t^2)/(1 - a^2)) = ln1p((a - t)(a + t)/(1 - a^2))`. The absolute
/// error is a few ulps of `|t - a|` rather than of `F_beta(t)`; at a minimum
/// the first-order terms of the two pieces still cancel. The mixing density
/// multiplies the gap by `N^alpha`, so near `+-m` its relative noise drops
/// from `eps N^alpha` to about `eps sqrt(N^alpha)`.
pub fn f_beta_gap(t: f64, a: f64, beta: f64) -> Result<f64> {
    check_open_unit(t, "F_beta")?;
    check_open_unit(a, "F_beta")?;
    Ok(f_beta_gap_unchecked(t, a, beta))
}

#[inline]
pub(crate) fn f_beta_gap_unchecked(t: f64, a: f64, beta: f64) -> f64 {
    let (t, a) = (t.abs(), a.abs());
    let diff = ((t - a) / (1.0 - t * a)).atanh();
    let sum = artanh_and_log1mt2(t).0 + artanh_and_log1mt2(a).0;
    let arg = (a - t) * (a + t) / ((1.0 - a) * (1.0 + a));
    let log = if arg.abs() < 0.5 {
        arg.ln_1p()
    } else {
        (t.ln_1p() + (-t).ln_1p()) - (a.ln_1p() + (-a).ln_1p())
    };
    diff * sum / beta + log
}

/// `F'_beta(t) = 2 (artanh(t) - beta t) / (beta (1 - t^2))`.
pub fn f_beta_d1(t: f64, beta: f64) -> Result<f64> {
    check_open_unit(t, "F'_beta")?;
    let (a, _) = artanh_and_log1mt2(t);
    let w = (1.0 - t) * (1.0 + t);
    Ok(2.0 * (a - beta * t) / (beta * w))
}

/// Second derivative of `F_beta`, in closed form:
///
/// `F''(t) = 4 t (artanh t - beta t) / (beta (1-t^2)^2) + 2 (1/(1-t^2) - beta) / (beta (1-t^2))`.
pub fn f_beta_d2(t: f64, beta: f64) -> Result<f64> {
    check_open_unit(t, "F''_beta")?;
    let (a, _) = artanh_and_log1mt2(t);
    let w = (1.0 - t) * (1.0 + t);
    Ok(4.0 * t * (a - beta * t) / (beta * w * w) + 2.0 * (1.0 / w - beta) / (beta * w))
}

/// Solves `tanh(beta m) = m` for the strictly positive root.
///
/// Bisection on `[1e-8, 1 - 1e-8]` down to a `1e-6` bracket, then Newton steps
/// kept inside the bracket.
pub fn solve_magnetization(beta: f64) -> Result<Magnetization> {
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!(
            "no positive magnetization for beta = {beta} (need beta > 1)"
        )));
    }
    let g = |m: f64| (beta * m).tanh() - m;
    let (mut lo, mut hi) = (1e-8_f64, 1.0 - 1e-8);
    if g(lo) <= 0.0 || g(hi) >= 0.0 {
        return Err(Error::Numeric(format!(
            "magnetization root not bracketed for beta = {beta}"
        )));
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut m = 0.5 * (lo + hi);
    for _ in 0..50 {
        let val = g(m);
        if val > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
        let sech = 1.0 / (beta * m).cosh();
        let slope = beta * sech * sech - 1.0;
        let mut next = m - val / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - m).abs() <= 1e-16 * m.max(1e-300) {
            m = next;
            break;
        }
        m = next;
    }
    let residual = g(m).abs();
    if residual > 1e-12 {
        return Err(Error::Numeric(format!(
            "magnetization residual {residual:e} exceeds 1e-12 at beta = {beta}"
        )));
    }
    Ok(Magnetization { m, residual })
}

/// `e^{9 beta / 2} (1 - |t|)`, an upper bound for `exp(-F_beta(t)/2)`.
pub fn envelope_bound(t: f64, beta: f64) -> Result<f64> {
    check_open_unit(t, "envelope bound")?;
    Ok((4.5 * beta).exp() * (1.0 - t.abs()))
}

/// Exponential tilt `lambda(t) = ln((1-t)/(1+t)) / 2`.
pub fn tilt_parameter(t: f64) -> Result<f64> {
    check_open_unit(t, "tilt parameter")?;
    Ok(0.5 * ((-t).ln_1p() - t.ln_1p()))
}

/// Large-deviation rate `q_a = -ln(1 - a^2) / 4`.
pub fn ld_rate(a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain(format!("rate q_a requires 0 < a < 1, got {a}")));
    }
    Ok(-0.25 * (-a * a).ln_1p())
}

/// The semicircle law on `[-2, 2]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SemicircleMeasure;

impl SemicircleMeasure {
    pub fn density(&self, x: f64) -> f64 {
        semicircle_density(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        semicircle_cdf(x)
    }

    pub fn moment(&self, k: u32) -> f64 {
        semicircle_moment(k)
    }
}

pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - x * x).sqrt() / (2.0 * std::f64::consts::PI)
    }
}

pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        let v = 0.5
            + (x * (4.0 - x * x).sqrt()) / (4.0 * std::f64::consts::PI)
            + (0.5 * x).asin() / std::f64::consts::PI;
        v.clamp(0.0, 1.0)
    }
}

/// Catalan number `C_k` via `C_{k+1} = C_k 2(2k+1)/(k+2)` in exact integers.
///
/// Exact for `k <= 30`; returns `None` beyond that.
pub fn catalan(k: u32) -> Option<u64> {
    if k > 30 {
        return None;
    }
    let mut c: u128 = 1;
    for j in 0..k as u128 {
        c = c * 2 * (2 * j + 1) / (j + 2);
    }
    Some(c as u64)
}

/// `k`-th moment of the semicircle law: zero for odd `k`, `C_{k/2}` for even `k`.
///
/// Valid for `k <= 30`; larger even orders fall back to floating point.
pub fn semicircle_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    match catalan(k / 2) {
        Some(c) => c as f64,
        None => {
            let mut c = 1.0_f64;
            for j in 0..(k / 2) as u64 {
                c = c * 2.0 * (2 * j + 1) as f64 / (j + 2) as f64;
            }
            c
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // mpmath, 200 digits: tanh(beta m) = m.
    const M2: f64 = 0.957_504_024_077_268_7;
    const M15: f64 = 0.858_559_636_640_110_4;

    #[test]
    fn f_beta_at_zero_vanishes() {
        assert_eq!(f_beta(0.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn f_beta_matches_high_precision_value() {
        // artanh(0.5)^2/2 + ln(0.75), evaluated at 200 digits
        let expected = -0.136_813_452_350_208_18;
        assert_relative_eq!(f_beta(0.5, 2.0).unwrap(), expected, max_relative = 1e-14);
    }

    #[test]
    fn f_beta_is_even() {
        for &beta in &[1.2, 2.0, 5.0] {
            for i in 0..1000 {
                let t = -0.999 + 1.998 * i as f64 / 999.0;
                assert_eq!(f_beta(t, beta).unwrap(), f_beta(-t, beta).unwrap());
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(f_beta(1.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(f_beta_d1(-1.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(f_beta_d2(1.5, 2.0), Err(Error::Domain(_))));
        assert!(matches!(tilt_parameter(1.0), Err(Error::Domain(_))));
        assert!(matches!(envelope_bound(-1.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(ld_rate(0.0), Err(Error::Domain(_))));
        assert!(matches!(ld_rate(1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn first_derivative_zeros_and_sign() {
        assert_eq!(f_beta_d1(0.0, 2.0).unwrap(), 0.0);
        let m = solve_magnetization(2.0).unwrap().m;
        assert!(f_beta_d1(m, 2.0).unwrap().abs() < 1e-10);
        assert!(f_beta_d1(-m, 2.0).unwrap().abs() < 1e-10);
        assert!(f_beta_d1(0.1, 2.0).unwrap() < 0.0);
    }

    #[test]
    fn second_derivative_values() {
        let m = solve_magnetization(2.0).unwrap().m;
        assert!(f_beta_d2(m, 2.0).unwrap() > 0.0);
        // 2 (1/beta - 1) at t = 0
        assert_relative_eq!(f_beta_d2(0.0, 2.0).unwrap(), -1.0, max_relative = 1e-15);
        // F''(m) = 2 (1/(1-m^2) - beta) / (beta (1-m^2)) since artanh(m) = beta m
        let w = 1.0 - m * m;
        assert_relative_eq!(
            f_beta_d2(m, 2.0).unwrap(),
            2.0 * (1.0 / w - 2.0) / (2.0 * w),
            max_relative = 1e-9
        );
    }

    #[test]
    fn derivatives_agree_with_central_differences() {
        let h = 1e-5;
        for &beta in &[1.2, 2.0, 5.0] {
            for i in 1..40 {
                let t = -0.95 + 1.9 * i as f64 / 40.0;
                let fd1 = (f_beta(t + h, beta).unwrap() - f_beta(t - h, beta).unwrap()) / (2.0 * h);
                let d1 = f_beta_d1(t, beta).unwrap();
                assert!(
                    (fd1 - d1).abs() <= 1e-6 * d1.abs().max(1.0),
                    "F' mismatch at t={t}, beta={beta}: {d1} vs {fd1}"
                );
                let fd2 =
                    (f_beta_d1(t + h, beta).unwrap() - f_beta_d1(t - h, beta).unwrap()) / (2.0 * h);
                let d2 = f_beta_d2(t, beta).unwrap();
                assert!(
                    (fd2 - d2).abs() <= 1e-6 * d2.abs().max(1.0),
                    "F'' mismatch at t={t}, beta={beta}: {d2} vs {fd2}"
                );
            }
        }
    }

    #[test]
    fn magnetization_values() {
        let mag = solve_magnetization(2.0).unwrap();
        assert!((mag.m - M2).abs() < 1e-12);
        assert!(mag.residual <= 1e-12);
        let mag = solve_magnetization(1.5).unwrap();
        assert!((mag.m - M15).abs() < 1e-12);
        assert!(solve_magnetization(1.01).unwrap().m < 0.2);
        for &beta in &[1.1, 1.5, 2.0, 5.0] {
            let mag = solve_magnetization(beta).unwrap();
            assert!(mag.m > 0.0 && mag.m < 1.0);
            assert!(((beta * mag.m).tanh() - mag.m).abs() <= 1e-12);
        }
    }

    #[test]
    fn magnetization_rejects_critical_and_hot() {
        assert!(matches!(solve_magnetization(1.0), Err(Error::Parameter(_))));
        assert!(matches!(solve_magnetization(0.5), Err(Error::Parameter(_))));
    }

    #[test]
    fn envelope_dominates_near_edges() {
        assert_relative_eq!(envelope_bound(0.0, 2.0).unwrap(), 9.0_f64.exp());
        let t = 0.999;
        assert!((-f_beta(t, 2.0).unwrap() / 2.0).exp() <= envelope_bound(t, 2.0).unwrap());
        for &beta in &[1.2, 2.0, 5.0] {
            for &t in &[1.0 - 1e-6, -(1.0 - 1e-6)] {
                assert!((-f_beta(t, beta).unwrap() / 2.0).exp() <= envelope_bound(t, beta).unwrap());
            }
        }
    }

    #[test]
    fn tilt_values() {
        assert_eq!(tilt_parameter(0.0).unwrap(), 0.0);
        assert_relative_eq!(tilt_parameter(0.5).unwrap(), 0.5 * (1.0_f64 / 3.0).ln());
        let t = 0.7;
        let lam = tilt_parameter(t).unwrap();
        let mgf = 0.5 * lam.exp() * (1.0 + t) + 0.5 * (-lam).exp() * (1.0 - t);
        assert!((mgf - (1.0 - t * t).sqrt()).abs() < 1e-12);
        assert!(tilt_parameter(0.3).unwrap() < 0.0 && tilt_parameter(-0.3).unwrap() > 0.0);
    }

    #[test]
    fn rate_values() {
        assert_relative_eq!(ld_rate(0.5).unwrap(), -0.25 * 0.75_f64.ln(), max_relative = 1e-15);
        assert!((ld_rate(0.5).unwrap() - 0.0719).abs() < 1e-4);
        assert!(ld_rate(1e-9).unwrap() > 0.0 && ld_rate(1e-9).unwrap() < 1e-17);
        let a = 0.01;
        assert!((ld_rate(a).unwrap() / (a * a / 4.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn semicircle_basics() {
        assert_eq!(semicircle_moment(0), 1.0);
        assert_eq!(semicircle_moment(1), 0.0);
        assert_eq!(semicircle_moment(2), 1.0);
        assert_eq!(semicircle_moment(4), 2.0);
        assert_eq!(semicircle_moment(6), 5.0);
        assert_eq!(semicircle_cdf(0.0), 0.5);
        assert_eq!(semicircle_cdf(-2.0), 0.0);
        assert_eq!(semicircle_cdf(2.0), 1.0);
        assert_eq!(semicircle_density(2.5), 0.0);
        assert_eq!(catalan(30), Some(3_814_986_502_092_304));
        assert_eq!(catalan(31), None);
    }

    #[test]
    fn f_beta_gap_matches_high_precision_oracle() {
        // 40-digit values at the exact binary inputs.
        let m = 0.957_504_024_077_268_7;
        let cases = [
            (m + 1e-6, 6.023_542_421_964_457_6e-11),
            (m - 3e-4, 5.381_386_280_888_520_2e-6),
            (m + 0.02, 0.045_070_954_534_095_703),
            (-0.3, 0.606_638_288_075_631_89),
        ];
        for (t, want) in cases {
            let got = f_beta_gap(t, m, 2.0).unwrap();
            let tol = 1e-13 * want + 1e-13 * (t.abs() - m).abs();
            assert!((got - want).abs() < tol, "t = {t}: {got} vs {want}");
            assert_eq!(got, f_beta_gap(-t, -m, 2.0).unwrap());
        }
        assert_eq!(f_beta_gap(m, m, 2.0).unwrap(), 0.0);
        let naive = f_beta(0.1, 0.7).unwrap() - f_beta(0.0, 0.7).unwrap();
        assert!((f_beta_gap(0.1, 0.0, 0.7).unwrap() - naive).abs() < 1e-16);
    }
}
