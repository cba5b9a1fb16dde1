//! Trajectories, particle push-forward, contraction estimates and the coupling probe.

use serde::Serialize;

use super::MarkovSystem;
use crate::error::{Error, Result};
use crate::numerics::{categorical_unchecked, pick_index, SeededRng};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A sampled path of the Markov process together with the running Cesàro means
/// of one state coordinate.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    /// Vertex occupied at each step, `0..=K`.
    pub vertices: Vec<usize>,
    pub states: Vec<Vec<f64>>,
    /// `cesaro[k]` is the mean of the observable over steps `0..=k`.
    pub cesaro: Vec<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_mean(&self) -> f64 {
        *self.cesaro.last().expect("trajectory holds the initial state")
    }
}

/// One step from vertex `v`: draws an outgoing edge and applies its map.
fn step(sys: &MarkovSystem, v: usize, x: &[f64], rng: &mut SeededRng) -> (usize, Vec<f64>) {
    let k = categorical_unchecked(sys.out_probs(v), rng);
    let e = sys.edge(sys.out_edges(v)[k]);
    (e.target, e.map.apply(x))
}

fn locate(sys: &MarkovSystem, x: &[f64]) -> Result<usize> {
    sys.locate(x)
        .ok_or_else(|| Error::domain(format!("state {x:?} lies in no region")))
}

/// Runs `steps` transitions from `x0`, recording states and the Cesàro means of
/// coordinate `observable`.
pub fn simulate(
    sys: &MarkovSystem,
    x0: &[f64],
    steps: usize,
    observable: usize,
    rng: &mut SeededRng,
) -> Result<Trajectory> {
    let mut v = locate(sys, x0)?;
    let min_dim = (0..sys.vertex_count()).map(|v| sys.region(v).dim()).min().unwrap_or(0);
    if observable >= min_dim {
        return Err(Error::domain(format!(
            "observable coordinate {observable} out of range for state dimension {min_dim}"
        )));
    }
    let mut x = x0.to_vec();
    let mut vertices = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut cesaro = Vec::with_capacity(steps + 1);
    let mut sum = 0.0;
    for k in 0..=steps {
        sum += x[observable];
        cesaro.push(sum / (k + 1) as f64);
        vertices.push(v);
        states.push(x.clone());
        if k < steps {
            let (nv, nx) = step(sys, v, &x, rng);
            v = nv;
            x = nx;
        }
    }
    Ok(Trajectory {
        vertices,
        states,
        cesaro,
    })
}

/// Advances every particle one step independently: an empirical application of
/// the adjoint operator to the particles' empirical measure.
pub fn push_forward(
    particles: &[Vec<f64>],
    sys: &MarkovSystem,
    rng: &mut SeededRng,
) -> Result<Vec<Vec<f64>>> {
    particles
        .iter()
        .map(|x| {
            let v = locate(sys, x)?;
            Ok(step(sys, v, x, rng).1)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionEstimate {
    /// Largest sampled ratio `sum_e p_e d(w_e x, w_e y) / d(x, y)` over all regions.
    pub sampled: f64,
    /// `max_v sum_{e out of v} p_e ||A_e||`, an upper bound on the true factor.
    pub bound: f64,
    /// The sampled value equals the supremum (every region one-dimensional, or
    /// the sample attained the bound).
    pub exact: bool,
}

impl ContractionEstimate {
    /// The bound certifies average contractivity.
    pub fn is_contractive(&self) -> bool {
        self.bound < 1.0
    }
}

/// Estimates the average contraction factor.
///
/// For affine maps `d(w_e x, w_e y) = |A_e (x - y)|`, which is evaluated directly
/// so nearby pairs do not lose precision.
pub fn average_contraction(
    sys: &MarkovSystem,
    pair_samples: usize,
    rng: &mut SeededRng,
) -> ContractionEstimate {
    let mut sampled = 0.0_f64;
    let mut bound = 0.0_f64;
    let mut all_one_dim = true;
    for v in 0..sys.vertex_count() {
        let region = sys.region(v);
        let edges: Vec<_> = sys
            .out_edges(v)
            .iter()
            .map(|e| sys.edge(*e))
            .collect();
        let vb: f64 = edges.iter().map(|e| e.prob * e.map.lipschitz()).sum();
        bound = bound.max(vb);
        if region.dim() != 1 {
            all_one_dim = false;
        }
        let widths: Vec<f64> = region.lo.iter().zip(&region.hi).map(|(l, h)| h - l).collect();
        if widths.iter().all(|w| *w == 0.0) {
            continue;
        }
        for _ in 0..pair_samples.max(1) {
            let x: Vec<f64> = region.lo.iter().zip(&widths).map(|(l, w)| l + w * rng.uniform()).collect();
            let y: Vec<f64> = region.lo.iter().zip(&widths).map(|(l, w)| l + w * rng.uniform()).collect();
            let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let d = norm(&diff);
            if d == 0.0 {
                continue;
            }
            let num: f64 = edges.iter().map(|e| e.prob * norm(&e.map.linear(&diff))).sum();
            sampled = sampled.max(num / d);
        }
    }
    let exact = all_one_dim || (bound - sampled).abs() <= 1e-12 * bound.max(1.0);
    if all_one_dim {
        // in one dimension every pair attains sum_e p_e |a_e|
        sampled = bound;
    }
    ContractionEstimate {
        sampled,
        bound,
        exact,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CouplingTrace {
    /// `d(x_k, x'_k)` for `k = 0..=K`.
    pub distances: Vec<f64>,
    /// Steps at which the two copies occupied the same vertex (and so shared an edge).
    pub shared_steps: usize,
}

impl CouplingTrace {
    /// Per-step ratios `d_{k+1} / d_k` over steps with positive normal `d_k`.
    pub fn ratios(&self) -> Vec<f64> {
        self.distances
            .windows(2)
            .filter(|w| w[0] >= f64::MIN_POSITIVE)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// Runs two copies from `x0` and `x0_prime` under synchronous coupling: each step
/// draws one uniform shared by both copies, and each selects its edge by inverse
/// CDF in its own vertex. While both copies share a vertex they take the same
/// affine map, and their difference is propagated through the linear part of that
/// map, which avoids cancellation once the copies are close.
///
/// This is an empirical diagnostic, not a stability certificate.
pub fn coupling_probe(
    sys: &MarkovSystem,
    x0: &[f64],
    x0_prime: &[f64],
    steps: usize,
    rng: &mut SeededRng,
) -> Result<CouplingTrace> {
    let mut v = locate(sys, x0)?;
    let mut vp = locate(sys, x0_prime)?;
    if v != vp {
        return Err(Error::domain("coupled starts must lie in the same region"));
    }
    let mut x = x0.to_vec();
    let mut delta: Vec<f64> = x0_prime.iter().zip(x0).map(|(a, b)| a - b).collect();
    let mut distances = Vec::with_capacity(steps + 1);
    distances.push(norm(&delta));
    let mut shared_steps = 0;
    for _ in 0..steps {
        let (pv, pvp) = (sys.out_probs(v), sys.out_probs(vp));
        let u = if pv.len() > 1 || pvp.len() > 1 { rng.uniform() } else { 0.0 };
        let e = sys.edge(sys.out_edges(v)[pick_index(pv, u)]);
        let ep = sys.edge(sys.out_edges(vp)[pick_index(pvp, u)]);
        let nx = e.map.apply(&x);
        if v == vp {
            shared_steps += 1;
            delta = e.map.linear(&delta);
        } else {
            let xp: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + d).collect();
            let nxp = ep.map.apply(&xp);
            if nxp.len() != nx.len() {
                return Err(Error::domain("coupled copies reached regions of different dimension"));
            }
            delta = nxp.iter().zip(&nx).map(|(a, b)| a - b).collect();
        }
        x = nx;
        v = e.target;
        vp = ep.target;
        distances.push(norm(&delta));
    }
    Ok(CouplingTrace {
        distances,
        shared_steps,
    })
}
