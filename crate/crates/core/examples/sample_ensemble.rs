//! Draw one Curie-Weiss spin matrix and build A_N and Y_N from it.

use cwsc::ensemble::{self, build_a, build_y, SpinMatrix};
use cwsc::measure::DeFinettiMeasure;
use cwsc::{rng, scalar::ModelParams};

fn main() -> cwsc::Result<()> {
    let nu = DeFinettiMeasure::normalize(ModelParams::new(2.0, 1.0, 8)?)?;
    let seed = 7;
    let x = ensemble::sample_ensemble(&nu, &mut rng::stream(seed, 0));
    let m = nu.m();
    println!("t = {:+.4}, S_N = {}, plus branch = {}", x.t(), x.s_n(), x.indicator_plus() == 1);
    for i in 0..x.n() {
        let row: String = (0..x.n()).map(|j| if x.entry(i, j) > 0 { " +" } else { " -" }).collect();
        println!("  {row}");
    }

    let a = build_a(&x, m)?;
    let y = build_y(&x, m)?;
    println!("A(0,1) = {:+.4}, Y(0,1) = {:+.4}", a.entry(0, 1), y.entry(0, 1));
    println!("offset A - Y/sqrt(N) on every entry: {:+.6}", ensemble::rank_one_offset(&x, m)?);

    let mut buf = Vec::new();
    x.write_binary(&mut buf, seed).expect("in-memory write");
    let (back, s) = SpinMatrix::read_binary(&buf[..])?;
    assert_eq!(back, x);
    println!("binary record: {} bytes, seed {s}", buf.len());
    Ok(())
}
