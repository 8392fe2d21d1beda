//! Shock-type hazards and the probability that each type causes failure.

use btsfpp::shock::{
    failure_cause_prob, failure_cause_prob_by_integration, hazard_of_t, hazard_rate, hazard_rate_closed,
};
use btsfpp::{BivariateCount, ProcessParams, ThresholdDist};

fn main() -> btsfpp::Result<()> {
    let p = ProcessParams::new(0.7, 0.5, 1.0, 2.0)?;
    for n in [1, 2] {
        let c = hazard_rate_closed(&p, n)?;
        // the conditional hazard does not depend on the current state
        let h = hazard_rate(&p, n, BivariateCount::new(2, 1), 1.5)?;
        println!("type {n}: hazard {c:.12} (from state (2,1) at t=1.5: {h:.12})");
    }

    let d = ThresholdDist::Geometric { p: 0.4 };
    let (a, b) = (failure_cause_prob(&p, &d, 1)?, failure_cause_prob(&p, &d, 2)?);
    println!("cause probabilities {a:.10} + {b:.10} = {:.10}", a + b);
    println!("type 1 by integrating its density: {:.10}", failure_cause_prob_by_integration(&p, &d, 1)?);
    println!("hazard of the failure time is flat for geometric thresholds:");
    for t in [0.5, 1.0, 3.0] {
        println!("  r({t}) = {:.12}", hazard_of_t(&p, &d, t)?);
    }
    Ok(())
}
