//! A_N and Y_N/sqrt(N) differ by a rank-one matrix, so their eigenvalue
//! counts on any interval differ by at most two.

use cwsc::ensemble::{self, build_a, build_b_dense};
use cwsc::measure::DeFinettiMeasure;
use cwsc::{rng, scalar::ModelParams, spectral};

fn main() -> cwsc::Result<()> {
    let nu = DeFinettiMeasure::normalize(ModelParams::new(2.0, 2.0, 50)?)?;
    let x = ensemble::sample_ensemble(&nu, &mut rng::stream(5, 0));
    let a = build_a(&x, nu.m())?.to_dense();
    let b = build_b_dense(&x, nu.m())?;
    println!("rank(A - B) = {}", a.sub(&b)?.rank(1e-9)?);
    let (sa, sb) = (spectral::eigenvalues(&a)?, spectral::eigenvalues(&b)?);
    for (lo, hi) in [(-4.0, 4.0), (-1.0, 1.0), (0.0, 0.5), (1.5, 2.5)] {
        println!(
            "[{lo:+.1}, {hi:+.1}]: {} vs {} eigenvalues, defect {}",
            sa.count_in(lo, hi),
            sb.count_in(lo, hi),
            spectral::interlacing_defect(&sa, &sb, lo, hi)?
        );
    }
    Ok(())
}
