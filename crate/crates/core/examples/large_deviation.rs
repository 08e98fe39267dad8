//! Exact probability that S_N <= 0 under P_t against exp(-q_a n^2).

use cwsc::{scalar, verification as verify};

fn main() -> cwsc::Result<()> {
    let m = scalar::solve_magnetization(2.0)?.m;
    for a in [0.3, 0.5, m] {
        println!("a = {a:.4}, q_a = {:.6}", scalar::ld_rate(a)?);
        for n in [4, 8, 12, 16] {
            let exact = verify::large_deviation_exact_ln(n, a)?;
            let bound = verify::ld_bound_ln(n, a)?;
            println!("  n = {n:>2}: ln P = {exact:>10.3}  ln bound = {bound:>10.3}");
        }
    }
    Ok(())
}
