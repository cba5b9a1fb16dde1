//! Bernoulli convolution x -> x/2, x -> x/2 + 1/2.
//!
//! Pushes a cloud of particles forward and prints its histogram, which
//! flattens towards the uniform invariant measure, then compares long-run
//! averages from two starts.

use equal_impact::markov::{push_forward, simulate, AffineMap, MarkovSystem, MarkovSystemSpec, Region};
use equal_impact::numerics::SeededRng;

fn histogram(xs: &[Vec<f64>], bins: usize) -> Vec<usize> {
    let mut h = vec![0; bins];
    for x in xs {
        h[((x[0] * bins as f64) as usize).min(bins - 1)] += 1;
    }
    h
}

fn main() -> equal_impact::Result<()> {
    let spec = MarkovSystemSpec::ifs(
        Region::interval(0.0, 1.0),
        [(0.5, AffineMap::scalar(0.5, 0.0)), (0.5, AffineMap::scalar(0.5, 0.5))],
    );
    let sys = MarkovSystem::new(spec)?;
    let mut rng = SeededRng::new(1, 0);

    // everyone starts at 0
    let mut cloud = vec![vec![0.0]; 20_000];
    for step in 0..=8 {
        if step % 2 == 0 {
            println!("step {step}: {:?}", histogram(&cloud, 10));
        }
        cloud = push_forward(&cloud, &sys, &mut rng)?;
    }

    for x0 in [0.0, 1.0] {
        let t = simulate(&sys, &[x0], 100_000, 0, &mut rng)?;
        println!("start {x0}: mean of 100000 steps = {:.5}", t.final_mean());
    }
    Ok(())
}
