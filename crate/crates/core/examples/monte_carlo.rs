//! Monte Carlo checks of the analytic results, reproducible from one seed.

use btsfpp::montecarlo::{estimate_failure_law, estimate_pmf, estimate_subordinator_laplace, SimConfig};
use btsfpp::process::SubordinatedPoisson;
use btsfpp::{ProcessParams, SubordinatorSpec, ThresholdDist};

fn main() -> btsfpp::Result<()> {
    let cfg = SimConfig::new(40_000, 42);
    let p = ProcessParams::new(0.6, 1.0, 1.0, 2.0)?;
    let reports = [
        estimate_pmf(&p, 1.0, &cfg)?,
        estimate_failure_law(
            &SubordinatedPoisson::new(SubordinatorSpec::tempered_stable(0.7, 1.0)?, 1.0, 1.0)?,
            &ThresholdDist::Geometric { p: 0.4 },
            &[0.5, 1.0, 2.0],
            &cfg,
        )?,
        estimate_subordinator_laplace(&SubordinatorSpec::tempered_stable(0.5, 1.0)?, 1.0, &[0.5, 1.0, 2.0], &cfg)?,
    ];
    for r in &reports {
        println!("{}: {} comparisons, max |z| = {:.2}, all pass: {}", r.quantity, r.comparisons.len(), r.max_abs_z(), r.all_pass());
        for c in r.comparisons.iter().take(3) {
            println!("  {:<24} analytic {:.6} empirical {:.6} z {:+.2}", c.name, c.analytic, c.empirical, c.z_score);
        }
    }
    Ok(())
}
