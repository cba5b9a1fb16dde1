//! Normal CDF values and a small logistic fit.
//!
//! Run with `cargo run --example normal_and_logit`.

use equal_impact::numerics::{fit_logit_with, std_normal_cdf, LogitOptions, SeededRng};
use nalgebra::DMatrix;

fn main() -> equal_impact::Result<()> {
    for t in [-3.0, -1.0, 0.0, 1.0, 2.0, 3.622] {
        println!("F({t:>6}) = {:.10}", std_normal_cdf(t)?);
    }

    // labels drawn from a known model: logit p = -1 + 2 a - 3 b
    let mut rng = SeededRng::new(42, 0);
    let n = 5000;
    let x = DMatrix::from_fn(n, 2, |_, _| rng.uniform_in(-1.0, 1.0));
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let z = -1.0 + 2.0 * x[(i, 0)] - 3.0 * x[(i, 1)];
            let p = 1.0 / (1.0 + (-z).exp());
            f64::from(u8::from(rng.uniform() < p))
        })
        .collect();

    let fit = fit_logit_with(&x, &y, &LogitOptions::default())?;
    println!(
        "\nfit after {} Newton steps (converged: {}): intercept {:.3}, weights {:.3?}",
        fit.iterations, fit.converged, fit.model.intercept, fit.model.weights
    );
    println!("objective trace: {:.4?}", fit.objective_trace);
    Ok(())
}
