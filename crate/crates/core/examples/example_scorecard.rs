//! The two-feature example scorecard: -8.17 per unit of previous default rate,
//! +5.77 for income above $15K, approve when the score exceeds 0.4.

use equal_impact::credit::{decide, latent_state, ScorecardModel, SimConfig};

fn main() -> equal_impact::Result<()> {
    let cfg = SimConfig::default();
    let card = ScorecardModel::example(cfg.cutoff);
    for (income, adr) in [(50.0, 0.1), (10.0, 0.6), (15.0, 0.0), (15.5, 0.7)] {
        let d = decide(&card, income, adr, &cfg);
        println!(
            "income {income:>5}K, adr {adr:.1}: score {:>7.3} -> {}, latent state {:+.4}",
            d.score.unwrap(),
            if d.approve { "approve" } else { "deny" },
            latent_state(income, &cfg)?
        );
    }
    Ok(())
}
