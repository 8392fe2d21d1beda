//! Event-driven paths of the bivariate counting process.

use btsfpp::process::SubordinatedPoisson;
use btsfpp::SubordinatorSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> btsfpp::Result<()> {
    let sys = SubordinatedPoisson::new(SubordinatorSpec::tempered_stable(0.5, 1.0)?, 1.0, 2.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let path = sys.simulate_events(3.0, &mut rng)?;
    for t in [0.5, 1.0, 2.0, 3.0] {
        let k = path.counts_at(t);
        println!("t={t}: N1={} N2={}", k.k1, k.k2);
    }

    // several units can arrive in one jump of the subordinator
    let masses = sys.jump_masses(6);
    println!("jump rate {:.6}", sys.jump_rate());
    for (j, m) in masses.iter().enumerate().skip(1) {
        println!("P(jump of {j}) = {m:.6}");
    }
    Ok(())
}
