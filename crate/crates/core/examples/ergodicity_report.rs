use std::path::Path;

use equal_impact::markov::{read_spec, ErgodicityReport, MarkovSystem};
use equal_impact::numerics::SeededRng;

fn main() -> equal_impact::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/specs");
    for name in ["bernoulli_convolution", "two_cycle", "primitive_pair"] {
        let sys = MarkovSystem::new(read_spec(dir.join(format!("{name}.spec")))?)?;
        let report = ErgodicityReport::analyze(&sys, 500, &mut SeededRng::new(0, 0));
        println!("{name}:\n{}\n", serde_json::to_string_pretty(&report)?);
    }

    // broken specs come back with every violation listed
    let bad = equal_impact::markov::parse_spec("VERTEX 1 1\nREGION 1 0 1\nEDGE 1 1 0.7 A 0.5 B 0.8\n")?;
    if let Err(e) = MarkovSystem::new(bad) {
        println!("{e}");
    }
    Ok(())
}
