//! Normalize the de Finetti mixing measure, compare Z_N with its Laplace
//! approximant, draw from it and save it as JSON.

use cwsc::measure::{self, DeFinettiMeasure};
use cwsc::{rng, scalar::ModelParams};

fn main() -> cwsc::Result<()> {
    let params = ModelParams::new(2.0, 2.0, 32)?;
    let nu = DeFinettiMeasure::normalize(params)?;
    let laplace = measure::laplace_z_approx(&params)?;
    println!("beta = 2, alpha = 2, N = 32 (N^alpha = {})", params.n_alpha());
    println!("m = {:.12}, sigma* = {:.3e}", nu.m(), nu.sigma_star());
    println!("Z (shifted) = {:.10e}, Laplace = {:.10e}, ratio = {:.6}", nu.z_shifted(), laplace.value, nu.z_shifted() / laplace.value);
    println!("mass of [-m/2, m/2] = {:.3e}", nu.central_mass()?);
    for ell in 1..=3 {
        println!("int_(m/2)^1 |t-m|^{ell} dnu = {:.4e}", nu.abs_moment_right(ell)?);
    }

    let mut g = rng::stream(42, 0);
    let draws: Vec<f64> = (0..10).map(|_| nu.sample_t(&mut g)).collect();
    println!("ten draws of t: {draws:.4?}");

    let path = std::env::temp_dir().join("cwsc-measure.json");
    std::fs::write(&path, nu.to_json()?).expect("write measure file");
    let back = DeFinettiMeasure::from_json(&std::fs::read_to_string(&path).unwrap())?;
    println!("saved to {} and reloaded (m = {:.12})", path.display(), back.m());
    Ok(())
}
