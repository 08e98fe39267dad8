//! Magnetization and the rate function F_beta across temperatures.

use cwsc::scalar;

fn main() -> cwsc::Result<()> {
    println!("{:>6} {:>20} {:>10} {:>12} {:>12}", "beta", "m", "residual", "F''(m)", "q_m");
    for beta in [1.05, 1.1, 1.5, 2.0, 3.0, 5.0] {
        let sol = scalar::solve_magnetization(beta)?;
        let curvature = scalar::f_beta_d2(sol.m, beta)?;
        println!(
            "{beta:>6} {:>20.17} {:>10.1e} {curvature:>12.4} {:>12.6}",
            sol.m,
            sol.residual,
            scalar::ld_rate(sol.m)?
        );
    }

    let beta = 2.0;
    let m = scalar::solve_magnetization(beta)?.m;
    println!("\nF_2 near its minimum:");
    for k in -4..=4 {
        let t = m + 0.01 * k as f64;
        println!("  t = {t:.4}  F = {:+.6}  F' = {:+.6}", scalar::f_beta(t, beta)?, scalar::f_beta_d1(t, beta)?);
    }
    Ok(())
}
