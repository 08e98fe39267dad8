//! Eigenvalues of real symmetric matrices and empirical spectral
//! distributions compared against the semicircle law.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::SemicircleMeasure;

/// Dense real symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    /// Validates shape and symmetry (entrywise within `1e-12`).
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Contract(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if (a - b).abs() > 1e-12 {
                    return Err(Error::Contract(format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub(crate) fn from_row_major_unchecked(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            data[i * n + i] = d;
        }
        Self { n, data }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc: f64, x| acc.max(x.abs()))
    }

    /// `self + c * u u^T`.
    pub fn rank_one_update(&self, c: f64, u: &[f64]) -> Result<Self> {
        if u.len() != self.n {
            return Err(Error::Contract("rank-one vector has wrong length".into()));
        }
        let n = self.n;
        let mut data = self.data.clone();
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] += c * u[i] * u[j];
            }
        }
        Ok(Self { n, data })
    }

    /// `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::Contract("matrix sizes differ".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { n: self.n, data })
    }

    /// Numerical rank: number of singular values above `tol * max|entry| * n`,
    /// via the eigenvalues of the (symmetric) matrix.
    pub fn rank(&self, tol: f64) -> Result<usize> {
        let scale = self.max_abs() * self.n as f64;
        if scale == 0.0 {
            return Ok(0);
        }
        let spec = eigenvalues(self)?;
        Ok(spec.values().iter().filter(|l| l.abs() > tol * scale).count())
    }
}

/// Sorted eigenvalues of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    source: String,
}

impl Spectrum {
    pub fn new(mut eigenvalues: Vec<f64>, source: impl Into<String>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        Self {
            eigenvalues,
            source: source.into(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    /// Number of eigenvalues in the closed interval `[lo, hi]`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        let a = self.eigenvalues.partition_point(|&x| x < lo);
        let b = self.eigenvalues.partition_point(|&x| x <= hi);
        b.saturating_sub(a)
    }

    pub fn esd(&self) -> Esd<'_> {
        Esd { spectrum: self }
    }
}

/// Empirical spectral distribution: mass `1/n` at each eigenvalue.
#[derive(Debug, Clone, Copy)]
pub struct Esd<'a> {
    spectrum: &'a Spectrum,
}

impl Esd<'_> {
    pub fn spectrum(&self) -> &Spectrum {
        self.spectrum
    }

    /// `#{lambda_i <= x} / n`.
    pub fn cdf(&self, x: f64) -> f64 {
        let v = self.spectrum.values();
        if v.is_empty() {
            return 0.0;
        }
        v.partition_point(|&l| l <= x) as f64 / v.len() as f64
    }
}

/// All eigenvalues of a symmetric matrix: Householder reduction to
/// tridiagonal form followed by implicit-shift QL iterations.
pub fn eigenvalues(matrix: &SymmetricMatrix) -> Result<Spectrum> {
    let n = matrix.n;
    if n == 0 {
        return Ok(Spectrum::new(Vec::new(), "empty"));
    }
    let mut a = matrix.data.clone();
    let (mut d, mut e) = tridiagonalize(&mut a, n);
    tridiagonal_ql(&mut d, &mut e)?;
    Ok(Spectrum::new(d, format!("dense {n}x{n}")))
}

/// Reduces `a` (row-major, symmetric) to tridiagonal form in place and
/// returns the diagonal `d` and the sub-diagonal `e` (`e[i]` couples
/// `i-1` and `i`, `e[0] = 0`).
fn tridiagonalize(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut p = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        d[i] = a[i * n + i];
        if l == 0 {
            e[i] = a[i * n];
            continue;
        }
        let row = &a[i * n..i * n + i];
        let scale: f64 = row.iter().map(|x| x.abs()).sum();
        if scale == 0.0 {
            e[i] = a[i * n + l];
            continue;
        }
        let mut h = 0.0;
        for k in 0..i {
            u[k] = a[i * n + k] / scale;
            h += u[k] * u[k];
        }
        let f = u[l];
        let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
        e[i] = scale * g;
        h -= f * g;
        u[l] = f - g;
        // p = A u / h on the leading i x i block
        let mut up = 0.0;
        for j in 0..i {
            let rj = &a[j * n..j * n + i];
            let s: f64 = rj.iter().zip(&u[..i]).map(|(x, y)| x * y).sum();
            p[j] = s / h;
            up += u[j] * p[j];
        }
        let kk = up / (2.0 * h);
        for j in 0..i {
            p[j] -= kk * u[j];
        }
        // A <- A - u q^T - q u^T with q = p - K u
        for j in 0..i {
            let (uj, qj) = (u[j], p[j]);
            let rj = &mut a[j * n..j * n + i];
            for ((x, &uk), &qk) in rj.iter_mut().zip(&u[..i]).zip(&p[..i]) {
                *x -= uj * qk + qj * uk;
            }
        }
        for k in 0..i {
            a[i * n + k] = 0.0;
            a[k * n + i] = 0.0;
        }
    }
    d[0] = a[0];
    e[0] = 0.0;
    (d, e)
}

/// Implicit-shift QL on a symmetric tridiagonal matrix; eigenvalues are
/// left in `d` (unsorted).
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Numeric(format!(
                    "QL iteration did not converge for eigenvalue {l} of {n}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// `sup_x |ESD(x) - F_sc(x)|`, evaluated on both sides of every jump.
pub fn ks_distance(esd: &Esd<'_>, reference: &SemicircleMeasure) -> f64 {
    ks_distance_to(esd, |x| reference.cdf(x))
}

/// KS distance from an ESD to any continuous CDF.
pub fn ks_distance_to<F: Fn(f64) -> f64>(esd: &Esd<'_>, cdf: F) -> f64 {
    let v = esd.spectrum.values();
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |acc: f64, (i, &x)| {
        let c = cdf(x);
        acc.max((c - i as f64 / n).abs()).max(((i + 1) as f64 / n - c).abs())
    })
}

/// Levy distance between an ESD and the semicircle law, by bisection on `eps`.
pub fn levy_distance(esd: &Esd<'_>, reference: &SemicircleMeasure) -> f64 {
    let v = esd.spectrum.values();
    let n = v.len();
    if n == 0 {
        return 1.0;
    }
    let ok = |eps: f64| {
        // G(x) <= F(x + eps) + eps: worst at each jump, where G = (i+1)/n.
        // F(x - eps) - eps <= G(x): worst just before each jump and before the first.
        for (i, &x) in v.iter().enumerate() {
            let g_right = (i + 1) as f64 / n as f64;
            if g_right > reference.cdf(x + eps) + eps {
                return false;
            }
            let g_left = i as f64 / n as f64;
            if reference.cdf(x - eps) - eps > g_left {
                return false;
            }
        }
        true
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `(1/n) sum lambda_i^k`. Intended for `k <= 12`.
pub fn esd_moment(esd: &Esd<'_>, k: u32) -> f64 {
    let v = esd.spectrum.values();
    if v.is_empty() {
        return 0.0;
    }
    v.iter().map(|l| l.powi(k as i32)).sum::<f64>() / v.len() as f64
}

/// `|#{eigenvalues of a in [lo, hi]} - #{eigenvalues of b in [lo, hi]}|`.
pub fn interlacing_defect(a: &Spectrum, b: &Spectrum, lo: f64, hi: f64) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "spectra have different lengths: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.count_in(lo, hi).abs_diff(b.count_in(lo, hi)))
}

/// CSV export of labelled spectra: `# key=value` metadata lines, then
/// `replica,index,eigenvalue` rows.
pub fn write_spectra_csv<W: Write>(
    mut w: W,
    metadata: &[(&str, String)],
    spectra: &[(u64, &Spectrum)],
) -> std::io::Result<()> {
    for (k, v) in metadata {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "replica,index,eigenvalue")?;
    for (replica, s) in spectra {
        for (i, x) in s.values().iter().enumerate() {
            writeln!(w, "{replica},{i},{}", crate::experiments::fmt_real(*x))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::AllOnes;
    use crate::rng;
    use rand::Rng;

    fn random_symmetric(n: usize, seed: u64) -> SymmetricMatrix {
        let mut r = rng::stream(seed, 0);
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = r.random_range(-1.0..1.0);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        SymmetricMatrix::from_row_major(n, data).unwrap()
    }

    #[test]
    fn diagonal_and_all_ones() {
        let s = eigenvalues(&SymmetricMatrix::from_diagonal(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        for n in [1, 2, 7, 40] {
            let s = eigenvalues(&AllOnes { n }.to_dense()).unwrap();
            let expected = AllOnes { n }.eigenvalues();
            for (a, b) in s.values().iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12 * n as f64, "{a} vs {b}");
            }
        }
    }

    /// Roots of the characteristic polynomial of a 5x5 matrix, computed from
    /// Faddeev-LeVerrier coefficients and sign-change bisection.
    fn charpoly_roots(m: &SymmetricMatrix) -> Vec<f64> {
        let n = m.n();
        let mul = |a: &[f64], b: &[f64]| {
            let mut c = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    for j in 0..n {
                        c[i * n + j] += a[i * n + k] * b[k * n + j];
                    }
                }
            }
            c
        };
        let a = m.as_slice().to_vec();
        let mut coeffs = vec![1.0];
        let mut mk = vec![0.0; n * n];
        for k in 1..=n {
            let mut prod = mul(&a, &mk);
            for i in 0..n {
                prod[i * n + i] += coeffs[k - 1];
            }
            mk = prod;
            let am = mul(&a, &mk);
            let tr: f64 = (0..n).map(|i| am[i * n + i]).sum();
            coeffs.push(-tr / k as f64);
        }
        let poly = |x: f64| coeffs.iter().fold(0.0, |acc, c| acc * x + c);
        let bound = 1.0 + coeffs.iter().skip(1).fold(0.0_f64, |a, c| a.max(c.abs()));
        let steps = 200_000;
        let mut roots = Vec::new();
        let mut prev = -bound;
        for s in 1..=steps {
            let x = -bound + 2.0 * bound * s as f64 / steps as f64;
            if poly(prev).signum() != poly(x).signum() {
                let (mut lo, mut hi) = (prev, x);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if poly(lo).signum() == poly(mid).signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            prev = x;
        }
        roots
    }

    #[test]
    fn matches_characteristic_polynomial_roots() {
        let m = random_symmetric(5, 17);
        let roots = charpoly_roots(&m);
        assert_eq!(roots.len(), 5);
        let s = eigenvalues(&m).unwrap();
        for (a, b) in s.values().iter().zip(&roots) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn matches_nalgebra() {
        for (n, seed) in [(13, 1), (64, 2), (150, 3)] {
            let m = random_symmetric(n, seed);
            let na = nalgebra::DMatrix::from_row_slice(n, n, m.as_slice());
            let mut reference: Vec<f64> = na.symmetric_eigenvalues().iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            let s = eigenvalues(&m).unwrap();
            for (a, b) in s.values().iter().zip(&reference) {
                assert!((a - b).abs() < 1e-10 * n as f64, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn trace_and_frobenius_identities() {
        for (n, seed) in [(10, 5), (100, 6), (257, 7)] {
            let m = random_symmetric(n, seed);
            let s = eigenvalues(&m).unwrap();
            assert!(s.values().windows(2).all(|w| w[0] <= w[1]));
            let scale = m.max_abs().max(1.0);
            let tol = n as f64 * 1e-9 * scale;
            let sum: f64 = s.values().iter().sum();
            let sq: f64 = s.values().iter().map(|x| x * x).sum();
            assert!((sum - m.trace()).abs() <= tol);
            assert!((sq - m.frobenius_sq()).abs() <= tol * scale);
        }
    }

    #[test]
    fn rejects_non_symmetric() {
        assert!(SymmetricMatrix::from_row_major(2, vec![1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(SymmetricMatrix::from_row_major(2, vec![1.0, 2.0, 2.0]).is_err());
    }

    #[test]
    fn ks_of_zero_matrix() {
        let s = eigenvalues(&SymmetricMatrix::zeros(10)).unwrap();
        assert_eq!(ks_distance(&s.esd(), &SemicircleMeasure), 0.5);
        assert_eq!(esd_moment(&s.esd(), 2), 0.0);
        assert_eq!(esd_moment(&s.esd(), 0), 1.0);
    }

    #[test]
    fn ks_of_semicircle_quantiles() {
        // Quantile construction: lambda_i = F^{-1}((i + 1/2)/n) by bisection.
        let n = 1000;
        let q = |u: f64| {
            let (mut lo, mut hi) = (-2.0, 2.0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if crate::scalar::semicircle_cdf(mid) < u {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let vals: Vec<f64> = (0..n).map(|i| q((i as f64 + 0.5) / n as f64)).collect();
        let s = Spectrum::new(vals, "quantiles");
        let d = ks_distance(&s.esd(), &SemicircleMeasure);
        assert!(d <= 1.0 / n as f64 + 1e-9, "{d}");
        assert!(levy_distance(&s.esd(), &SemicircleMeasure) <= d + 1e-9);
        assert!((esd_moment(&s.esd(), 2) - 1.0).abs() < 1e-3);
        assert!((esd_moment(&s.esd(), 4) - 2.0).abs() < 1e-2);
    }

    #[test]
    fn interlacing_examples() {
        let a = eigenvalues(&SymmetricMatrix::zeros(6)).unwrap();
        let b = eigenvalues(&AllOnes { n: 6 }.to_dense()).unwrap();
        assert_eq!(interlacing_defect(&a, &a, -1.0, 1.0).unwrap(), 0);
        assert_eq!(interlacing_defect(&a, &b, -0.5, 0.5).unwrap(), 1);
        let short = Spectrum::new(vec![0.0], "x");
        assert!(interlacing_defect(&a, &short, 0.0, 1.0).is_err());
    }

    #[test]
    fn rank_one_perturbations_interlace() {
        let mut r = rng::stream(99, 0);
        for trial in 0..100 {
            let m = random_symmetric(50, 1000 + trial);
            let u: Vec<f64> = (0..50).map(|_| r.random_range(-1.0..1.0)).collect();
            let c: f64 = r.random_range(-3.0..3.0);
            let p = m.rank_one_update(c, &u).unwrap();
            let (sa, sb) = (eigenvalues(&m).unwrap(), eigenvalues(&p).unwrap());
            for _ in 0..200 {
                let x: f64 = r.random_range(-4.0..4.0);
                let y: f64 = r.random_range(-4.0..4.0);
                let (lo, hi) = if x < y { (x, y) } else { (y, x) };
                assert!(interlacing_defect(&sa, &sb, lo, hi).unwrap() <= 2);
            }
        }
    }

    #[test]
    fn spectra_csv_layout() {
        let s = Spectrum::new(vec![0.5, -0.25], "t");
        let mut buf = Vec::new();
        write_spectra_csv(&mut buf, &[("n", "2".into())], &[(3, &s)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# n=2\nreplica,index,eigenvalue\n3,0,-2.5000000000000000e-1\n3,1,5.0000000000000000e-1\n"
        );
    }
}
