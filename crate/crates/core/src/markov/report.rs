use serde::Serialize;

use super::{average_contraction, is_primitive, strongly_connected, MarkovSystem};
use crate::numerics::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Contractive, strongly connected and primitive: a unique attractive
    /// invariant measure.
    UniqueErgodicSufficient,
    /// Contractive and strongly connected: an invariant measure exists.
    InvariantExistsSufficient,
    Inconclusive,
}

/// Sufficient-condition summary for a Markov system.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErgodicityReport {
    pub strongly_connected: bool,
    pub primitive: bool,
    pub primitivity_exponent: Option<usize>,
    pub contraction_estimate: f64,
    pub contraction_bound: f64,
    pub contraction_exact: bool,
    pub verdict: Verdict,
}

impl ErgodicityReport {
    pub fn analyze(sys: &MarkovSystem, pair_samples: usize, rng: &mut SeededRng) -> Self {
        let strongly_connected = strongly_connected(sys.spec());
        let prim = is_primitive(sys.spec());
        let contraction = average_contraction(sys, pair_samples, rng);
        let verdict = match (contraction.is_contractive(), strongly_connected, prim.primitive) {
            (true, true, true) => Verdict::UniqueErgodicSufficient,
            (true, true, false) => Verdict::InvariantExistsSufficient,
            _ => Verdict::Inconclusive,
        };
        let report = ErgodicityReport {
            strongly_connected,
            primitive: prim.primitive,
            primitivity_exponent: prim.exponent,
            contraction_estimate: contraction.sampled,
            contraction_bound: contraction.bound,
            contraction_exact: contraction.exact,
            verdict,
        };
        debug_assert!(!report.primitive || report.strongly_connected);
        report
    }
}
