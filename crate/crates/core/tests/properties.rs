use cwsc::scalar;
use cwsc::spectral::{self, SymmetricMatrix};
use cwsc::verification as verify;
use proptest::prelude::*;

fn symmetric(n: usize, entries: &[f64]) -> SymmetricMatrix {
    let mut data = vec![0.0; n * n];
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            data[i * n + j] = entries[k];
            data[j * n + i] = entries[k];
            k += 1;
        }
    }
    SymmetricMatrix::from_row_major(n, data).unwrap()
}

fn matrix_and_vector() -> impl Strategy<Value = (SymmetricMatrix, Vec<f64>)> {
    (2usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0..1.0f64, n * (n + 1) / 2),
            prop::collection::vec(-2.0..2.0f64, n),
        )
            .prop_map(move |(e, u)| (symmetric(n, &e), u))
    })
}

proptest! {
    #[test]
    fn f_beta_is_even(t in -0.999..0.999f64, beta in 0.2..8.0f64) {
        let a = scalar::f_beta(t, beta).unwrap();
        let b = scalar::f_beta(-t, beta).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn spectrum_preserves_trace_and_frobenius((a, _) in matrix_and_vector()) {
        let s = spectral::eigenvalues(&a).unwrap();
        let tr: f64 = s.values().iter().sum();
        let fr: f64 = s.values().iter().map(|x| x * x).sum();
        prop_assert!((tr - a.trace()).abs() < 1e-10);
        prop_assert!((fr - a.frobenius_sq()).abs() < 1e-9 * a.frobenius_sq().max(1.0));
    }

    #[test]
    fn rank_one_update_interlaces((a, u) in matrix_and_vector(), c in -3.0..3.0f64, lo in -6.0..6.0f64, w in 0.0..6.0f64) {
        let b = a.rank_one_update(c, &u).unwrap();
        let (sa, sb) = (spectral::eigenvalues(&a).unwrap(), spectral::eigenvalues(&b).unwrap());
        prop_assert!(spectral::interlacing_defect(&sa, &sb, lo, lo + w).unwrap() <= 2);
    }

    #[test]
    fn binomial_tails_are_complementary(n in 1u64..400, p in 0.01..0.99f64, frac in 0.0..1.0f64) {
        let k = (frac * n as f64) as i64;
        let lower = verify::ln_binomial_cdf(n, p, k).unwrap().exp();
        let upper = verify::ln_binomial_sf(n, p, k + 1).unwrap().exp();
        prop_assert!((lower + upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_deviation_bound_holds(n in 2usize..30, a in 0.05..0.99f64) {
        let exact = verify::large_deviation_exact_ln(n, a).unwrap();
        prop_assert!(exact <= verify::ld_bound_ln(n, a).unwrap());
    }
}
