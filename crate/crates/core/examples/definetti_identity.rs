//! Curie-Weiss expectations by enumerating all 2^M spin configurations,
//! against the one-dimensional de Finetti integral.

use cwsc::verification as verify;

fn main() -> cwsc::Result<()> {
    for m_spins in [4, 9, 16] {
        for beta in [0.5, 1.5, 2.0] {
            for degree in [2, 4] {
                let sites: Vec<usize> = (0..degree).collect();
                let brute = verify::cw_expectation_bruteforce(m_spins, beta, verify::site_monomial(&sites))?;
                let quad = verify::definetti_expectation_quadrature(m_spins, beta, &verify::monomial_poly(degree))?;
                println!("M = {m_spins:>2} beta = {beta} degree {degree}: {brute:.12} vs {quad:.12}");
            }
        }
    }
    Ok(())
}
