//! Twenty users facing a broadcast price signal.
//!
//! Each user consumes one unit with a probability that depends on the signal
//! (0 = cheap, 1 = expensive). The operator raises the price whenever the
//! smoothed aggregate demand exceeds a target, which regulates demand around it.

use equal_impact::closed_loop::{run_loop, FilterSpec, OutputMap, ThresholdPolicy, UserSpec};
use equal_impact::fairness::{cesaro, check_equal_treatment, ClassPartition};
use equal_impact::markov::AffineMap;

fn user(eagerness: f64) -> equal_impact::Result<UserSpec> {
    UserSpec::new(
        1,
        vec![AffineMap::identity(1)],
        vec![OutputMap::Constant(0.0), OutputMap::Constant(1.0)],
        vec![vec![1.0], vec![1.0]],
        vec![
            vec![1.0 - eagerness, eagerness],
            vec![1.0 - eagerness / 3.0, eagerness / 3.0],
        ],
        Some(vec![0.0, 1.0]),
    )
}

fn main() -> equal_impact::Result<()> {
    let users = (0..20)
        .map(|i| user(0.5 + 0.02 * i as f64))
        .collect::<equal_impact::Result<Vec<_>>>()?;
    let policy = ThresholdPolicy { threshold: 7.0, below: 0, above: 1 };
    let trace = run_loop(&users, &policy, FilterSpec::Ema { alpha: 0.2 }, &vec![vec![0.0]; 20], 20_000, 9)?;

    let expensive = trace.signals.iter().filter(|s| s[0] == 1).count();
    println!("expensive signal on {expensive} of {} steps", trace.steps());
    println!("mean aggregate demand: {:.3}", cesaro(&trace.aggregate)?.last().unwrap());
    for i in [0, 10, 19] {
        let r = cesaro(&trace.user_actions(i))?;
        println!("user {i:>2}: long-run consumption {:.3}", r.last().unwrap());
    }

    let t = check_equal_treatment(&trace, &ClassPartition::single(20), 0.01)?;
    println!(
        "signal violations: {}, identical action distributions: {}",
        t.signal_violations.len(),
        t.classes[0].distribution_equal
    );
    Ok(())
}
