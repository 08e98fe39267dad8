//! Monte Carlo mixed moments: X_N entries are correlated, Y_N entries nearly not.

use cwsc::measure::DeFinettiMeasure;
use cwsc::scalar::ModelParams;
use cwsc::verification::{self as verify, Check, MomentSpec, MomentTarget};

fn main() -> cwsc::Result<()> {
    let nu = DeFinettiMeasure::normalize(ModelParams::new(2.0, 2.0, 100)?)?;
    let m = nu.m();
    let pair = MomentSpec::decay(vec![(1, 1), (1, 2)], Vec::new())?;

    let x = verify::mc_moment_estimate(&nu, &pair, MomentTarget::X, 10_000, 3, Check::Target(m * m))?;
    println!("E[X(1,1) X(1,2)] = {:.4} +- {:.4}   (m^2 = {:.4})", x.estimate, x.se, m * m);

    let y = verify::mc_moment_estimate(&nu, &pair, MomentTarget::Y, 10_000, 3, Check::Bound(5.0 / 100.0))?;
    println!("E[Y(1,1) Y(1,2)] = {:.4} +- {:.4}", y.estimate, y.se);

    let squares = MomentSpec::second_moment(vec![(1, 1), (1, 2)])?;
    let s = verify::mc_moment_estimate(&nu, &squares, MomentTarget::Y, 10_000, 4, Check::Target(1.0))?;
    println!("E[Y(1,1)^2 Y(1,2)^2] = {:.3} +- {:.3}", s.estimate, s.se);

    let small = DeFinettiMeasure::normalize(ModelParams::new(2.0, 2.0, 8)?)?;
    println!("exact E[Y(1,2)] at N = 8: {:.3e}", verify::exact_y_mean_small_n(&small, (1, 2))?);
    Ok(())
}
