//! Reliability curves for the three mixing laws, written as CSV to stdout.

use btsfpp::cli::{figure_tables, parse_grid};

fn main() -> btsfpp::Result<()> {
    let grid = parse_grid("0:4:9")?;
    for figure in 1..=3 {
        let (left, right) = figure_tables(figure, &grid)?;
        println!("# figure {figure}, alpha sweep");
        print!("{}", left.to_csv());
        println!("# figure {figure}, theta sweep");
        print!("{}", right.to_csv());
    }
    Ok(())
}
