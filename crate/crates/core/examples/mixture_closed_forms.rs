//! Geometric thresholds with a random parameter: closed forms against quadrature.

use btsfpp::shock::{
    reliability_lomax_closed, reliability_mixture, reliability_uniform_closed, reliability_weibull_closed,
};
use btsfpp::{MixingLaw, ProcessParams};

fn main() -> btsfpp::Result<()> {
    let p = ProcessParams::new(0.5, 1.0, 1.0, 1.0)?;
    let s = p.subordinator();
    let lomax = MixingLaw::lomax_for(&p)?;
    let weibull = MixingLaw::weibull_for(&p);
    println!("{:>5} {:>14} {:>14} {:>14} {:>14}", "t", "uniform", "quad", "lomax", "weibull");
    for t in [0.25, 0.5, 1.0, 2.0, 4.0] {
        println!(
            "{t:>5} {:>14.10} {:>14.10} {:>14.2e} {:>14.2e}",
            reliability_uniform_closed(&p, t)?,
            reliability_mixture(&s, 1.0, 1.0, &MixingLaw::Uniform, t)?,
            reliability_lomax_closed(&p, t)? - reliability_mixture(&s, 1.0, 1.0, &lomax, t)?,
            reliability_weibull_closed(&p, t)? - reliability_mixture(&s, 1.0, 1.0, &weibull, t)?,
        );
    }
    println!("(lomax and weibull columns show closed form minus quadrature)");
    Ok(())
}
