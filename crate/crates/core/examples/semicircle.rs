//! Spectrum of A_N against the semicircle law, with a coarse text histogram.

use cwsc::ensemble::{self, build_a, build_b_dense};
use cwsc::experiments::emit_histogram;
use cwsc::measure::DeFinettiMeasure;
use cwsc::scalar::{ModelParams, SemicircleMeasure};
use cwsc::{rng, spectral};

fn main() -> cwsc::Result<()> {
    let n = 400;
    let nu = DeFinettiMeasure::normalize(ModelParams::new(2.0, 2.0, n)?)?;
    let x = ensemble::sample_ensemble(&nu, &mut rng::stream(1, 0));
    let a = spectral::eigenvalues(&build_a(&x, nu.m())?.to_dense())?;
    let b = spectral::eigenvalues(&build_b_dense(&x, nu.m())?)?;

    let esd = a.esd();
    println!("N = {n}: KS = {:.4}, Levy = {:.4}", spectral::ks_distance(&esd, &SemicircleMeasure), spectral::levy_distance(&esd, &SemicircleMeasure));
    println!("largest eigenvalue of A_N (the rank-one outlier): {:.2}", a.values()[n - 1]);
    for k in [2, 4, 6] {
        println!("moment {k}: Y_N/sqrt(N) {:.4}, semicircle {}", spectral::esd_moment(&b.esd(), k), SemicircleMeasure.moment(k));
    }

    let hist = emit_histogram(a.values(), 20, -2.5, 2.5)?;
    for r in &hist.rows {
        let (lo, dens, sc) = (r[0].as_real().unwrap(), r[3].as_real().unwrap(), r[4].as_real().unwrap());
        println!("{lo:+.2} {:<40} {sc:.3}", "#".repeat((dens * 100.0).round() as usize));
    }
    Ok(())
}
