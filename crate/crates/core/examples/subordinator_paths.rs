//! Tempered stable subordinator: Laplace exponent, Levy density and sampled paths.

use btsfpp::subordinator::PathGrid;
use btsfpp::SubordinatorSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> btsfpp::Result<()> {
    let s = SubordinatorSpec::tempered_stable(0.6, 1.0)?;
    for u in [0.5, 1.0, 2.0, 4.0] {
        println!("psi({u}) = {:.12}", s.laplace_exponent(u)?);
    }
    println!("levy density at 0.1: {:.6e}", s.levy_density(0.1)?);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = PathGrid::uniform(2.0, 8)?;
    for _ in 0..3 {
        let path = s.sample_path(&grid, &mut rng)?;
        let cells: Vec<String> = path.iter().map(|x| format!("{x:.4}")).collect();
        println!("{}", cells.join(" "));
    }

    // empirical E[exp(-u S(1))] against exp(-psi(u))
    let n = 50_000;
    let u = 1.0;
    let mut acc = 0.0;
    for _ in 0..n {
        acc += (-u * s.sample_increment(1.0, &mut rng)?).exp();
    }
    println!("E exp(-S(1)): empirical {:.5}, exact {:.5}", acc / n as f64, (-s.laplace_exponent(u)?).exp());
    Ok(())
}
