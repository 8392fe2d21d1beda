//! Reliability of the shock model for several threshold laws.

use btsfpp::shock::{reliability, reliability_general_geometric, reliability_yule_simon};
use btsfpp::{ProcessParams, ThresholdDist};

fn main() -> btsfpp::Result<()> {
    let p = ProcessParams::new(0.7, 0.5, 1.0, 2.0)?;
    let laws = [
        ("geometric p=0.3", ThresholdDist::Geometric { p: 0.3 }),
        ("deterministic 4", ThresholdDist::Deterministic { m: 4 }),
        ("yule-simon 2", ThresholdDist::YuleSimon { rho: 2.0 }),
        ("empirical", ThresholdDist::Empirical { pmf: vec![0.0, 0.2, 0.5, 0.3] }),
    ];
    for t in [0.5, 1.0, 2.0, 4.0] {
        let row: Vec<String> = laws
            .iter()
            .map(|(name, d)| Ok(format!("{name}: {:.6}", reliability(&p, d, t)?)))
            .collect::<btsfpp::Result<_>>()?;
        println!("t={t}  {}", row.join("  "));
    }

    // two closed forms
    let s = p.subordinator();
    println!("geometric closed form at t=1: {:.12}", reliability_general_geometric(&s, 1.0, 2.0, 0.3, 1.0)?);
    println!("yule-simon integral at t=1:   {:.12}", reliability_yule_simon(&p, 2.0, 1.0)?);
    Ok(())
}
