//! Spin matrices of the generalized Curie-Weiss ensemble and the matrices
//! derived from them.

use std::io::{Read, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::measure::DeFinettiMeasure;
use crate::spectral::SymmetricMatrix;

/// Symmetric `n x n` matrix with entries in `{-1, +1}`, stored as the packed
/// upper triangle (row-major, diagonal included).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinMatrix {
    n: usize,
    t: OrderedT,
    upper: Vec<i8>,
}

/// `t` wrapped so `SpinMatrix` can derive `Eq`; compared bitwise.
#[derive(Debug, Clone, Copy)]
struct OrderedT(f64);

impl PartialEq for OrderedT {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}
impl Eq for OrderedT {}

#[inline]
fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Row `i` of the packed triangle starts at `i n - i (i - 1) / 2`.
#[inline]
fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

impl SpinMatrix {
    /// Builds a matrix from its packed upper triangle.
    pub fn from_upper(n: usize, t: f64, upper: Vec<i8>) -> Result<Self> {
        if upper.len() != packed_len(n) {
            return Err(Error::Contract(format!(
                "upper triangle of a {n}x{n} matrix has {} entries, got {}",
                packed_len(n),
                upper.len()
            )));
        }
        if upper.iter().any(|&x| x != 1 && x != -1) {
            return Err(Error::Contract("spin entries must be +1 or -1".into()));
        }
        Ok(Self {
            n,
            t: OrderedT(t),
            upper,
        })
    }

    /// Matrix with every entry equal to `sign`.
    pub fn constant(n: usize, sign: i8, t: f64) -> Result<Self> {
        Self::from_upper(n, t, vec![sign; packed_len(n)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Mixing parameter the matrix was drawn with. Metadata only.
    pub fn t(&self) -> f64 {
        self.t.0
    }

    pub fn upper(&self) -> &[i8] {
        &self.upper
    }

    /// Entry `(i, j)`, zero-based; symmetric.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> i8 {
        self.upper[packed_index(self.n, i, j)]
    }

    /// Flips entry `(i, j)` (and its mirror).
    pub fn flip(&mut self, i: usize, j: usize) {
        let k = packed_index(self.n, i, j);
        self.upper[k] = -self.upper[k];
    }

    /// `S_N`, the sum of the upper-triangle entries.
    pub fn s_n(&self) -> i64 {
        self.upper.iter().map(|&x| x as i64).sum()
    }

    /// `1` iff `S_N > 0`; a tie at zero counts as minus.
    pub fn indicator_plus(&self) -> u8 {
        u8::from(self.s_n() > 0)
    }

    pub fn indicator_minus(&self) -> u8 {
        1 - self.indicator_plus()
    }

    pub fn to_dense(&self) -> SymmetricMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                let v = self.upper[k] as f64;
                data[i * n + j] = v;
                data[j * n + i] = v;
                k += 1;
            }
        }
        SymmetricMatrix::from_row_major_unchecked(n, data)
    }

    /// Writes the versioned binary format:
    ///
    /// ```text
    /// magic  b"CWSM"      4 bytes
    /// version u16 LE      (= 1)
    /// n      u32 LE
    /// t      f64 LE
    /// seed   u64 LE
    /// payload ceil(n(n+1)/2 / 8) bytes, bit k = 1 iff upper entry k is +1,
    ///         least significant bit first
    /// ```
    pub fn write_binary<W: Write>(&self, mut w: W, seed: u64) -> std::io::Result<()> {
        w.write_all(SPIN_MAGIC)?;
        w.write_all(&SPIN_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&self.t.0.to_le_bytes())?;
        w.write_all(&seed.to_le_bytes())?;
        let mut payload = vec![0u8; self.upper.len().div_ceil(8)];
        for (k, &x) in self.upper.iter().enumerate() {
            if x > 0 {
                payload[k / 8] |= 1 << (k % 8);
            }
        }
        w.write_all(&payload)
    }

    /// Reads the binary format; returns the matrix and the recorded seed.
    pub fn read_binary<R: Read>(mut r: R) -> Result<(Self, u64)> {
        let io = |e: std::io::Error| Error::Format(format!("truncated spin matrix: {e}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != SPIN_MAGIC {
            return Err(Error::Format("bad magic number for spin matrix".into()));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2).map_err(io)?;
        let version = u16::from_le_bytes(b2);
        if version != SPIN_VERSION {
            return Err(Error::Format(format!("unsupported spin matrix version {version}")));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(io)?;
        let n = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8).map_err(io)?;
        let t = f64::from_le_bytes(b8);
        r.read_exact(&mut b8).map_err(io)?;
        let seed = u64::from_le_bytes(b8);
        let len = packed_len(n);
        let mut payload = vec![0u8; len.div_ceil(8)];
        r.read_exact(&mut payload).map_err(io)?;
        let upper = (0..len)
            .map(|k| if payload[k / 8] >> (k % 8) & 1 == 1 { 1 } else { -1 })
            .collect();
        Ok((Self::from_upper(n, t, upper)?, seed))
    }

    /// Debug CSV: header `i,j,x` and one row per upper-triangle entry (one-based indices).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,j,x")?;
        for i in 0..self.n {
            for j in i..self.n {
                writeln!(w, "{},{},{}", i + 1, j + 1, self.entry(i, j))?;
            }
        }
        Ok(())
    }
}

pub const SPIN_MAGIC: &[u8; 4] = b"CWSM";
pub const SPIN_VERSION: u16 = 1;

/// Draws a spin matrix with i.i.d. upper entries, `+1` with probability `(1+t)/2`.
pub fn sample_spin_matrix<R: Rng + ?Sized>(t: f64, n: usize, rng: &mut R) -> Result<SpinMatrix> {
    if !(t.abs() <= 1.0) {
        return Err(Error::Domain(format!("mixing parameter must satisfy |t| <= 1, got {t}")));
    }
    let p = 0.5 * (1.0 + t);
    let upper = (0..packed_len(n))
        .map(|_| if rng.random::<f64>() < p { 1 } else { -1 })
        .collect();
    Ok(SpinMatrix {
        n,
        t: OrderedT(t),
        upper,
    })
}

/// Draws `count` i.i.d. biased signs with parameter `t`.
pub fn sample_signs<R: Rng + ?Sized>(t: f64, count: usize, rng: &mut R) -> Vec<i8> {
    let p = 0.5 * (1.0 + t);
    (0..count)
        .map(|_| if rng.random::<f64>() < p { 1 } else { -1 })
        .collect()
}

/// Draws `t ~ nu_N` and then a spin matrix with that `t`.
pub fn sample_ensemble<R: Rng + ?Sized>(measure: &DeFinettiMeasure, rng: &mut R) -> SpinMatrix {
    let t = measure.sample_t(rng);
    sample_spin_matrix(t, measure.params().n, rng).expect("sampled t lies in (-1, 1)")
}

/// Which matrix a [`DerivedMatrix`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivedKind {
    /// `X / sqrt(N (1 - m^2))`.
    A,
    /// `(X - m E) 1{S_N > 0} / sqrt(1 - m^2)`.
    YPlus,
    /// `(X + m E) 1{S_N <= 0} / sqrt(1 - m^2)`.
    YMinus,
    /// `Y_plus + Y_minus`.
    Y,
}

/// A matrix derived entrywise from a spin matrix; materialized on demand.
#[derive(Debug, Clone, Copy)]
pub struct DerivedMatrix<'a> {
    kind: DerivedKind,
    base: &'a SpinMatrix,
    m: f64,
    plus: bool,
}

fn check_m(m: f64) -> Result<()> {
    if m > 0.0 && m < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("magnetization must lie in (0, 1), got {m}")))
    }
}

impl<'a> DerivedMatrix<'a> {
    pub fn new(kind: DerivedKind, base: &'a SpinMatrix, m: f64) -> Result<Self> {
        check_m(m)?;
        Ok(Self {
            kind,
            base,
            m,
            plus: base.indicator_plus() == 1,
        })
    }

    pub fn kind(&self) -> DerivedKind {
        self.kind
    }

    pub fn base(&self) -> &SpinMatrix {
        self.base
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// Whether the sign indicator selected the `+m` branch.
    pub fn plus_branch(&self) -> bool {
        self.plus
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let x = self.base.entry(i, j) as f64;
        let sd = (1.0 - self.m * self.m).sqrt();
        match self.kind {
            DerivedKind::A => x / (self.base.n as f64 * (1.0 - self.m * self.m)).sqrt(),
            DerivedKind::YPlus if self.plus => (x - self.m) / sd,
            DerivedKind::YMinus if !self.plus => (x + self.m) / sd,
            DerivedKind::YPlus | DerivedKind::YMinus => 0.0,
            DerivedKind::Y => {
                if self.plus {
                    (x - self.m) / sd
                } else {
                    (x + self.m) / sd
                }
            }
        }
    }

    /// Dense matrix of `scale * entry(i, j)`.
    pub fn to_dense_scaled(&self, scale: f64) -> SymmetricMatrix {
        let n = self.base.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = scale * self.entry(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        SymmetricMatrix::from_row_major_unchecked(n, data)
    }

    pub fn to_dense(&self) -> SymmetricMatrix {
        self.to_dense_scaled(1.0)
    }
}

/// `A_N = X_N / sqrt(N (1 - m^2))`.
pub fn build_a(x: &SpinMatrix, m: f64) -> Result<DerivedMatrix<'_>> {
    DerivedMatrix::new(DerivedKind::A, x, m)
}

/// `Y_N = (X_N -+ m E_N) / sqrt(1 - m^2)`, sign chosen by the indicator.
pub fn build_y(x: &SpinMatrix, m: f64) -> Result<DerivedMatrix<'_>> {
    DerivedMatrix::new(DerivedKind::Y, x, m)
}

/// `B_N = Y_N / sqrt(N)` as a dense matrix.
pub fn build_b_dense(x: &SpinMatrix, m: f64) -> Result<SymmetricMatrix> {
    Ok(build_y(x, m)?.to_dense_scaled(1.0 / (x.n() as f64).sqrt()))
}

/// The constant `c` with `A_N - Y_N / sqrt(N) = c E_N`:
/// `+- m / sqrt(N (1 - m^2))`, positive on the plus branch.
pub fn rank_one_offset(x: &SpinMatrix, m: f64) -> Result<f64> {
    check_m(m)?;
    let c = m / (x.n() as f64 * (1.0 - m * m)).sqrt();
    Ok(if x.indicator_plus() == 1 { c } else { -c })
}

/// The `n x n` all-ones matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllOnes {
    pub n: usize,
}

impl AllOnes {
    pub fn to_dense(&self) -> SymmetricMatrix {
        SymmetricMatrix::from_row_major_unchecked(self.n, vec![1.0; self.n * self.n])
    }

    /// `{n, 0, ..., 0}` in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        if let Some(last) = v.last_mut() {
            *last = self.n as f64;
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::scalar::{solve_magnetization, ModelParams};

    #[test]
    fn packed_indexing_covers_triangle() {
        let n = 7;
        let mut seen = vec![false; packed_len(n)];
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                let idx = packed_index(n, i, j);
                assert_eq!(idx, k);
                assert_eq!(idx, packed_index(n, j, i));
                seen[idx] = true;
                k += 1;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn extreme_t_gives_constant_matrices() {
        let mut r = rng::stream(1, 0);
        let x = sample_spin_matrix(1.0, 20, &mut r).unwrap();
        assert!(x.upper().iter().all(|&v| v == 1));
        assert_eq!(x.s_n(), 210);
        let x = sample_spin_matrix(-1.0, 20, &mut r).unwrap();
        assert!(x.upper().iter().all(|&v| v == -1));
        assert!(sample_spin_matrix(1.5, 3, &mut r).is_err());
    }

    #[test]
    fn entry_means_match_binomial() {
        let n = 50;
        let k = packed_len(n) as f64;
        let mut r = rng::stream(2, 0);
        for &t in &[0.0, 0.5] {
            let x = sample_spin_matrix(t, n, &mut r).unwrap();
            let mean = x.s_n() as f64 / k;
            let sd = ((1.0 - t * t) / k).sqrt();
            assert!((mean - t).abs() <= 3.0 * sd, "t={t}: mean {mean}");
        }
    }

    #[test]
    fn s_n_parity_and_flip() {
        let mut r = rng::stream(3, 0);
        let mut x = sample_spin_matrix(0.2, 9, &mut r).unwrap();
        let k = packed_len(9) as i64;
        let s = x.s_n();
        assert!(s.abs() <= k);
        assert_eq!((s - k).rem_euclid(2), 0);
        x.flip(2, 5);
        assert_eq!((x.s_n() - s).abs(), 2);
        assert_eq!(x.entry(2, 5), x.entry(5, 2));
    }

    #[test]
    fn indicator_ties_go_to_minus() {
        let plus = SpinMatrix::constant(4, 1, 1.0).unwrap();
        let minus = SpinMatrix::constant(4, -1, -1.0).unwrap();
        assert_eq!(plus.indicator_plus(), 1);
        assert_eq!(minus.indicator_plus(), 0);
        // n = 3 has six entries; three of each sign gives S_N = 0.
        let tie = SpinMatrix::from_upper(3, 0.0, vec![1, 1, 1, -1, -1, -1]).unwrap();
        assert_eq!(tie.s_n(), 0);
        assert_eq!(tie.indicator_plus(), 0);
        assert_eq!(tie.indicator_minus(), 1);
        assert_eq!(tie.indicator_plus() + tie.indicator_minus(), 1);
    }

    #[test]
    fn derived_matrices_relate_by_rank_one_shift() {
        let m = solve_magnetization(2.0).unwrap().m;
        let mut r = rng::stream(4, 0);
        for &t in &[m, -m, 0.0] {
            let x = sample_spin_matrix(t, 12, &mut r).unwrap();
            let a = build_a(&x, m).unwrap();
            let y = build_y(&x, m).unwrap();
            let c = rank_one_offset(&x, m).unwrap();
            let sqrt_n = (12.0_f64).sqrt();
            let sd = (1.0 - m * m).sqrt();
            for i in 0..12 {
                for j in 0..12 {
                    let diff = a.entry(i, j) - y.entry(i, j) / sqrt_n;
                    assert!((diff - c).abs() < 1e-14);
                    let v = y.entry(i, j);
                    let support = if y.plus_branch() {
                        [(-1.0 - m) / sd, (1.0 - m) / sd]
                    } else {
                        [(-1.0 + m) / sd, (1.0 + m) / sd]
                    };
                    assert!(support.iter().any(|s| (s - v).abs() < 1e-14));
                }
            }
            let yp = DerivedMatrix::new(DerivedKind::YPlus, &x, m).unwrap();
            let ym = DerivedMatrix::new(DerivedKind::YMinus, &x, m).unwrap();
            for i in 0..12 {
                for j in 0..12 {
                    assert_eq!(y.entry(i, j), yp.entry(i, j) + ym.entry(i, j));
                    // exactly one branch is active
                    assert!(yp.entry(i, j) == 0.0 || ym.entry(i, j) == 0.0);
                }
            }
        }
        let x = SpinMatrix::constant(3, 1, 1.0).unwrap();
        assert!(build_y(&x, 0.0).is_err());
        assert!(build_a(&x, 1.0).is_err());
    }

    #[test]
    fn conditional_entry_mean_of_y() {
        // E_t[(X - m)/sqrt(1-m^2)] = (t - m)/sqrt(1-m^2), checked by exact
        // expectation over the two-point law of X.
        let m = solve_magnetization(2.0).unwrap().m;
        let t = 0.6;
        let sd = (1.0 - m * m).sqrt();
        let exact = 0.5 * (1.0 + t) * (1.0 - m) / sd + 0.5 * (1.0 - t) * (-1.0 - m) / sd;
        assert!((exact - (t - m) / sd).abs() < 1e-15);
        let exact = 0.5 * (1.0 + t) * (1.0 + m) / sd + 0.5 * (1.0 - t) * (-1.0 + m) / sd;
        assert!((exact - (t + m) / sd).abs() < 1e-15);
    }

    #[test]
    fn ensemble_pair_moment_matches_quadrature() {
        let nu = DeFinettiMeasure::normalize(ModelParams::new(2.0, 2.0, 8).unwrap()).unwrap();
        let target = nu.expectation(|t| t * t, -1.0, 1.0).unwrap();
        let reps = 10_000;
        let (mut s1, mut s2, mut mean) = (0.0, 0.0, 0.0);
        for r in 0..reps {
            let x = sample_ensemble(&nu, &mut rng::stream(5, r));
            let v = (x.entry(0, 0) * x.entry(0, 1)) as f64;
            s1 += v;
            s2 += v * v;
            mean += x.entry(0, 1) as f64;
        }
        let est = s1 / reps as f64;
        let se = ((s2 / reps as f64 - est * est) / reps as f64).sqrt();
        assert!((est - target).abs() <= 3.0 * se, "{est} vs {target} (se {se})");
        assert!((mean / reps as f64).abs() <= 3.0 / (reps as f64).sqrt());
    }

    #[test]
    fn s_n_positive_at_magnetization() {
        let m = solve_magnetization(2.0).unwrap().m;
        let positive = (0..10_000)
            .filter(|&r| {
                sample_spin_matrix(m, 30, &mut rng::stream(6, r))
                    .unwrap()
                    .indicator_plus()
                    == 1
            })
            .count();
        assert!(positive as f64 >= 0.999 * 10_000.0);
    }

    #[test]
    fn binary_and_csv_formats() {
        let x = sample_spin_matrix(0.3, 11, &mut rng::stream(7, 0)).unwrap();
        let mut buf = Vec::new();
        x.write_binary(&mut buf, 99).unwrap();
        assert_eq!(&buf[..4], SPIN_MAGIC);
        assert_eq!(buf.len(), 4 + 2 + 4 + 8 + 8 + packed_len(11).div_ceil(8));
        let (back, seed) = SpinMatrix::read_binary(&buf[..]).unwrap();
        assert_eq!(back, x);
        assert_eq!(seed, 99);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(SpinMatrix::read_binary(&bad[..]).is_err());
        assert!(SpinMatrix::read_binary(&buf[..buf.len() - 1]).is_err());

        let mut csv = Vec::new();
        x.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + packed_len(11));
        assert!(text.starts_with("i,j,x\n"));
    }

    #[test]
    fn all_ones_spectrum() {
        let e = AllOnes { n: 5 };
        assert_eq!(e.eigenvalues(), vec![0.0, 0.0, 0.0, 0.0, 5.0]);
        assert_eq!(e.to_dense().get(2, 3), 1.0);
    }
}
