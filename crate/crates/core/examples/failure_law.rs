//! Failure law when the threshold must be hit exactly versus crossed.

use btsfpp::process::SubordinatedPoisson;
use btsfpp::shock::hit_probability;
use btsfpp::{FailureLaw, FailureSemantics, SubordinatorSpec, ThresholdDist};

fn main() -> btsfpp::Result<()> {
    let sys = SubordinatedPoisson::new(SubordinatorSpec::tempered_stable(0.6, 1.0)?, 1.0, 2.0)?;
    let d = ThresholdDist::Deterministic { m: 3 };
    let times = [0.25, 0.5, 1.0, 2.0, 4.0];
    for semantics in [FailureSemantics::Crossing, FailureSemantics::Hitting] {
        let law = FailureLaw::compute(&sys, &d, &times, semantics)?;
        println!("{semantics:?}");
        for (i, t) in times.iter().enumerate() {
            println!(
                "  t={t:<5} R={:.8} f={:.8} g1+g2={:.8}",
                law.reliability[i],
                law.density[i],
                law.g1[i] + law.g2[i]
            );
        }
    }
    // jumps that overshoot 3 never register a hit
    println!("P(the path ever sits at exactly 3) = {:.10}", hit_probability(&sys, &d)?);
    Ok(())
}
