//! Joint pmf of the bivariate process by the three evaluation routes.

use btsfpp::process::{btsfpp_pmf, btsfpp_pmf_derivative, btsfpp_pmf_wright, total_count_pmf};
use btsfpp::{BivariateCount, ProcessParams};

fn main() -> btsfpp::Result<()> {
    let p = ProcessParams::new(0.7, 0.5, 1.0, 2.0)?;
    let t = 1.0;
    println!("{:>3} {:>3} {:>22} {:>22} {:>22}", "k1", "k2", "recursion", "wright", "derivative");
    for k in BivariateCount::lattice(3) {
        println!(
            "{:>3} {:>3} {:>22.15e} {:>22.15e} {:>22.15e}",
            k.k1,
            k.k2,
            btsfpp_pmf(&p, k, t)?,
            btsfpp_pmf_wright(&p, k, t)?,
            btsfpp_pmf_derivative(&p, k, t)?
        );
    }

    // the total count, summed far enough that the remaining mass is tiny
    let total = total_count_pmf(&p, t, 200)?;
    let mass: f64 = total.iter().sum();
    println!("P(Z <= 200) = {mass:.15}");
    Ok(())
}
