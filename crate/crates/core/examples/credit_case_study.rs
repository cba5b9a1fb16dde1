//! Five trials of 1000 households over 2002-2020 on the bundled synthetic
//! income table. Prints each race's pooled default rate across trials.
//!
//! `cargo run --release --example credit_case_study -- [seed]`

use equal_impact::credit::{run_experiment, IncomeTable, SimConfig};
use equal_impact::fairness::dispersion;

fn main() -> equal_impact::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2002);
    let cfg = SimConfig { seed, ..SimConfig::default() };
    let result = run_experiment(&cfg, &IncomeTable::bundled())?;

    print!("year ");
    for race in &cfg.races {
        print!("  {race:>18}");
    }
    println!();
    for (k, year) in cfg.years().enumerate() {
        print!("{year}");
        for d in result.dispersion.iter().flatten() {
            print!("   {:.4} +- {:.4}  ", d.mean[k], d.std[k]);
        }
        println!();
    }

    let spread = |k: usize| -> equal_impact::Result<f64> {
        let means: Vec<Vec<f64>> = result.dispersion.iter().flatten().map(|d| vec![d.mean[k]]).collect();
        Ok(dispersion(&means)?.std[0])
    };
    let last = cfg.horizon() - 1;
    println!("\nstd across races: {:.4} in {}, {:.4} in {}", spread(2)?, cfg.start_year + 2, spread(last)?, cfg.end_year);
    println!(
        "households denied in the final year: {}",
        result.trials.iter().flat_map(|t| &t.households).filter(|h| !h.decision[last]).count()
    );
    Ok(())
}
