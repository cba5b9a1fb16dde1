//! The feedback loop between a population of stochastic users and a decision
//! policy.
//!
//! At every step the policy emits a signal (one for everybody, or one per user),
//! each user independently picks a state transition and an output according to
//! signal-dependent probabilities, the outputs are summed, and a filter condenses
//! the history into the value the policy sees next. Users never observe each
//! other; each one draws from its own random stream.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::AffineMap;
use crate::numerics::{categorical_unchecked, check_distribution, SeededRng, StreamKey};

/// Index into the finite signal alphabet.
pub type Signal = usize;

/// Map from a user's private state to a demand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OutputMap {
    Constant(f64),
    /// `weights . x + offset`
    Affine { weights: Vec<f64>, offset: f64 },
    /// `above` when `x[coord] > threshold`, else `below`.
    Threshold {
        coord: usize,
        threshold: f64,
        below: f64,
        above: f64,
    },
}

impl OutputMap {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            OutputMap::Constant(c) => *c,
            OutputMap::Affine { weights, offset } => {
                offset + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            }
            OutputMap::Threshold {
                coord,
                threshold,
                below,
                above,
            } => {
                if x[*coord] > *threshold {
                    *above
                } else {
                    *below
                }
            }
        }
    }

    /// Values the map can take, when that set is finite.
    fn finite_range(&self) -> Option<Vec<f64>> {
        match self {
            OutputMap::Constant(c) => Some(vec![*c]),
            OutputMap::Threshold { below, above, .. } => Some(vec![*below, *above]),
            OutputMap::Affine { .. } => None,
        }
    }
}

/// One user's stochastic response model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UserSpec {
    pub state_dim: usize,
    pub transitions: Vec<AffineMap>,
    pub outputs: Vec<OutputMap>,
    /// `transition_probs[signal][j]`
    pub transition_probs: Vec<Vec<f64>>,
    /// `output_probs[signal][l]`
    pub output_probs: Vec<Vec<f64>>,
    /// Finite demand set; when present every output must land in it.
    pub demands: Option<Vec<f64>>,
}

impl UserSpec {
    pub fn new(
        state_dim: usize,
        transitions: Vec<AffineMap>,
        outputs: Vec<OutputMap>,
        transition_probs: Vec<Vec<f64>>,
        output_probs: Vec<Vec<f64>>,
        demands: Option<Vec<f64>>,
    ) -> Result<Self> {
        let spec = UserSpec {
            state_dim,
            transitions,
            outputs,
            transition_probs,
            output_probs,
            demands,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn signal_count(&self) -> usize {
        self.transition_probs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.transitions.is_empty() || self.outputs.is_empty() {
            return Err(Error::domain("user needs at least one transition and one output map"));
        }
        for (j, m) in self.transitions.iter().enumerate() {
            if m.input_dim() != self.state_dim || m.output_dim() != self.state_dim {
                return Err(Error::domain(format!(
                    "transition map {j} is {}x{}, state dimension is {}",
                    m.output_dim(),
                    m.input_dim(),
                    self.state_dim
                )));
            }
        }
        if self.transition_probs.is_empty() || self.transition_probs.len() != self.output_probs.len() {
            return Err(Error::domain(
                "transition and output probability tables must cover the same non-empty signal alphabet",
            ));
        }
        for (s, (tp, op)) in self.transition_probs.iter().zip(&self.output_probs).enumerate() {
            if tp.len() != self.transitions.len() || op.len() != self.outputs.len() {
                return Err(Error::domain(format!(
                    "probability rows for signal {s} do not match the number of maps"
                )));
            }
            check_distribution(tp)
                .and_then(|_| check_distribution(op))
                .map_err(|e| Error::domain(format!("signal {s}: {e}")))?;
        }
        for (l, m) in self.outputs.iter().enumerate() {
            match m {
                OutputMap::Affine { weights, .. } if weights.len() != self.state_dim => {
                    return Err(Error::domain(format!("output map {l} has wrong dimension")))
                }
                OutputMap::Threshold { coord, .. } if *coord >= self.state_dim => {
                    return Err(Error::domain(format!("output map {l} reads a missing coordinate")))
                }
                _ => {}
            }
            if let (Some(d), Some(range)) = (&self.demands, m.finite_range()) {
                if let Some(v) = range.iter().find(|v| !d.contains(v)) {
                    return Err(Error::domain(format!(
                        "output map {l} can emit {v}, which is not in the demand set"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Advances one user: draws transition `j` and output `l` independently under
/// `signal`, returns `(w_j(x), w'_l(x))`. The output reads the pre-transition state.
pub fn step_user(
    user: &UserSpec,
    x: &[f64],
    signal: Signal,
    rng: &mut SeededRng,
) -> Result<(Vec<f64>, f64)> {
    let (Some(tp), Some(op)) = (user.transition_probs.get(signal), user.output_probs.get(signal)) else {
        return Err(Error::domain(format!("unknown signal {signal}")));
    };
    if x.len() != user.state_dim {
        return Err(Error::domain(format!(
            "state has dimension {}, user expects {}",
            x.len(),
            user.state_dim
        )));
    }
    let j = categorical_unchecked(tp, rng);
    let l = categorical_unchecked(op, rng);
    let y = user.outputs[l].eval(x);
    if let Some(d) = &user.demands {
        if !d.contains(&y) {
            return Err(Error::domain(format!("output {y} is not in the demand set")));
        }
    }
    Ok((user.transitions[j].apply(x), y))
}

pub fn aggregate(actions: &[f64]) -> f64 {
    actions.iter().sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FilterSpec {
    Identity,
    CumulativeMean,
    Ema { alpha: f64 },
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            FilterSpec::Ema { alpha } if !(*alpha > 0.0 && *alpha <= 1.0) => {
                Err(Error::domain(format!("EMA weight {alpha} outside (0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// Streaming form of a filter.
#[derive(Clone, Debug)]
pub struct FilterState {
    spec: FilterSpec,
    value: Option<f64>,
    sum: f64,
    count: usize,
}

impl FilterState {
    pub fn new(spec: FilterSpec) -> Self {
        FilterState {
            spec,
            value: None,
            sum: 0.0,
            count: 0,
        }
    }

    pub fn push(&mut self, v: f64) -> f64 {
        let out = match (self.spec, self.value) {
            (FilterSpec::Identity, _) => v,
            (FilterSpec::CumulativeMean, _) => {
                self.sum += v;
                self.count += 1;
                self.sum / self.count as f64
            }
            (FilterSpec::Ema { .. }, None) => v,
            (FilterSpec::Ema { alpha }, Some(prev)) => alpha * v + (1.0 - alpha) * prev,
        };
        self.value = Some(out);
        out
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }
}

/// Filter output after consuming the whole `history`. The EMA is seeded with
/// the first value.
pub fn apply_filter(filter: FilterSpec, history: &[f64]) -> Result<f64> {
    filter.validate()?;
    let mut state = FilterState::new(filter);
    history
        .iter()
        .map(|v| state.push(*v))
        .last()
        .ok_or_else(|| Error::domain("filter applied to an empty history"))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SignalAssignment {
    Broadcast(Signal),
    PerUser(Vec<Signal>),
}

/// What the policy is allowed to see at a step.
#[derive(Clone, Copy, Debug)]
pub struct PolicyInput<'a> {
    pub step: usize,
    pub users: usize,
    /// Filtered aggregate from `step - delay`, if that step exists.
    pub filtered_aggregate: Option<f64>,
    /// Per-user filtered own-action history from `step - delay`.
    pub filtered_per_user: Option<&'a [f64]>,
}

pub trait Policy {
    fn assign(&self, input: &PolicyInput<'_>) -> SignalAssignment;
}

impl<F> Policy for F
where
    F: Fn(&PolicyInput<'_>) -> SignalAssignment,
{
    fn assign(&self, input: &PolicyInput<'_>) -> SignalAssignment {
        self(input)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantPolicy(pub Signal);

impl Policy for ConstantPolicy {
    fn assign(&self, _: &PolicyInput<'_>) -> SignalAssignment {
        SignalAssignment::Broadcast(self.0)
    }
}

/// Broadcasts `above` when the filtered aggregate exceeds `threshold`, `below`
/// otherwise (and before any value is available).
#[derive(Clone, Copy, Debug)]
pub struct ThresholdPolicy {
    pub threshold: f64,
    pub below: Signal,
    pub above: Signal,
}

impl Policy for ThresholdPolicy {
    fn assign(&self, input: &PolicyInput<'_>) -> SignalAssignment {
        SignalAssignment::Broadcast(match input.filtered_aggregate {
            Some(v) if v > self.threshold => self.above,
            _ => self.below,
        })
    }
}

/// Per-user variant of [`ThresholdPolicy`] on each user's own filtered history.
#[derive(Clone, Copy, Debug)]
pub struct PerUserThresholdPolicy {
    pub threshold: f64,
    pub below: Signal,
    pub above: Signal,
}

impl Policy for PerUserThresholdPolicy {
    fn assign(&self, input: &PolicyInput<'_>) -> SignalAssignment {
        let pick = |v: Option<f64>| match v {
            Some(v) if v > self.threshold => self.above,
            _ => self.below,
        };
        SignalAssignment::PerUser(
            (0..input.users)
                .map(|i| pick(input.filtered_per_user.map(|f| f[i])))
                .collect(),
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LoopOptions {
    pub filter: FilterSpec,
    /// Steps between a filter output and the policy decision that sees it.
    pub delay: usize,
}

impl Default for LoopOptions {
    fn default() -> Self {
        LoopOptions {
            filter: FilterSpec::Identity,
            delay: 1,
        }
    }
}

/// Full record of one closed-loop run. Per-step vectors are indexed `[k][i]`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct LoopTrace {
    /// Whether step `k` used a broadcast signal.
    pub broadcast: Vec<bool>,
    pub signals: Vec<Vec<Signal>>,
    /// `states[k]` holds `x_i(k)` for `k = 0..=K`.
    pub states: Vec<Vec<Vec<f64>>>,
    pub actions: Vec<Vec<f64>>,
    pub aggregate: Vec<f64>,
    pub filtered: Vec<f64>,
    pub filtered_per_user: Vec<Vec<f64>>,
}

impl LoopTrace {
    pub fn steps(&self) -> usize {
        self.actions.len()
    }

    pub fn users(&self) -> usize {
        self.actions.first().map_or(0, Vec::len)
    }

    /// Action series of user `i`.
    pub fn user_actions(&self, i: usize) -> Vec<f64> {
        self.actions.iter().map(|a| a[i]).collect()
    }
}

/// Runs `steps` iterations with user `i` drawing from stream `(seed, user i)`.
pub fn run_loop(
    users: &[UserSpec],
    policy: &dyn Policy,
    filter: FilterSpec,
    x0: &[Vec<f64>],
    steps: usize,
    seed: u64,
) -> Result<LoopTrace> {
    let rngs = (0..users.len())
        .map(|i| StreamKey::new(0, i, 0).map(|k| SeededRng::for_key(seed, k)))
        .collect::<Result<Vec<_>>>()?;
    let opts = LoopOptions {
        filter,
        ..LoopOptions::default()
    };
    run_loop_with(users, policy, &opts, x0, steps, rngs)
}

/// As [`run_loop`] with explicit per-user random streams.
pub fn run_loop_with(
    users: &[UserSpec],
    policy: &dyn Policy,
    opts: &LoopOptions,
    x0: &[Vec<f64>],
    steps: usize,
    mut rngs: Vec<SeededRng>,
) -> Result<LoopTrace> {
    let n = users.len();
    if x0.len() != n || rngs.len() != n {
        return Err(Error::domain(format!(
            "{n} users but {} initial states and {} random streams",
            x0.len(),
            rngs.len()
        )));
    }
    opts.filter.validate()?;
    if opts.delay == 0 {
        return Err(Error::domain("policy delay must be at least one step"));
    }
    for u in users {
        u.validate()?;
    }

    let mut trace = LoopTrace::default();
    let mut x: Vec<Vec<f64>> = x0.to_vec();
    let mut agg_filter = FilterState::new(opts.filter);
    let mut user_filters = vec![FilterState::new(opts.filter); n];
    trace.states.push(x.clone());

    for k in 0..steps {
        let seen = k.checked_sub(opts.delay);
        let input = PolicyInput {
            step: k,
            users: n,
            filtered_aggregate: seen.map(|j| trace.filtered[j]),
            filtered_per_user: seen.map(|j| trace.filtered_per_user[j].as_slice()),
        };
        let (broadcast, signals) = match policy.assign(&input) {
            SignalAssignment::Broadcast(s) => (true, vec![s; n]),
            SignalAssignment::PerUser(v) if v.len() == n => (false, v),
            SignalAssignment::PerUser(v) => {
                return Err(Error::domain(format!(
                    "policy assigned {} signals to {n} users",
                    v.len()
                )))
            }
        };
        let mut actions = Vec::with_capacity(n);
        for i in 0..n {
            let (nx, y) = step_user(&users[i], &x[i], signals[i], &mut rngs[i])?;
            x[i] = nx;
            actions.push(y);
        }
        let total = aggregate(&actions);
        trace.filtered.push(agg_filter.push(total));
        trace
            .filtered_per_user
            .push(user_filters.iter_mut().zip(&actions).map(|(f, y)| f.push(*y)).collect());
        trace.aggregate.push(total);
        trace.actions.push(actions);
        trace.signals.push(signals);
        trace.broadcast.push(broadcast);
        trace.states.push(x.clone());
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// x -> x + 1, output 2x, a single signal.
    fn counter() -> UserSpec {
        UserSpec::new(
            1,
            vec![AffineMap::scalar(1.0, 1.0)],
            vec![OutputMap::Affine { weights: vec![2.0], offset: 0.0 }],
            vec![vec![1.0]],
            vec![vec![1.0]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn deterministic_step() {
        let mut rng = SeededRng::new(0, 0);
        let (x, y) = step_user(&counter(), &[3.0], 0, &mut rng).unwrap();
        assert_eq!((x, y), (vec![4.0], 6.0));
        assert!(step_user(&counter(), &[3.0], 1, &mut rng).is_err());
    }

    #[test]
    fn signal_selects_branch() {
        let user = UserSpec::new(
            1,
            vec![AffineMap::scalar(1.0, 0.0), AffineMap::scalar(1.0, 1.0)],
            vec![OutputMap::Constant(0.0)],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0], vec![1.0]],
            Some(vec![0.0, 1.0]),
        )
        .unwrap();
        let mut rng = SeededRng::new(9, 0);
        for _ in 0..100 {
            assert_eq!(step_user(&user, &[0.0], 1, &mut rng).unwrap().0, vec![1.0]);
            assert_eq!(step_user(&user, &[0.0], 0, &mut rng).unwrap().0, vec![0.0]);
        }
    }

    #[test]
    fn branch_frequencies() {
        let user = UserSpec::new(
            1,
            vec![AffineMap::scalar(0.0, 0.0), AffineMap::scalar(0.0, 1.0)],
            vec![OutputMap::Constant(1.0)],
            vec![vec![0.5, 0.5]],
            vec![vec![1.0]],
            None,
        )
        .unwrap();
        let mut rng = SeededRng::new(21, 0);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| step_user(&user, &[0.0], 0, &mut rng).unwrap().0[0] == 1.0)
            .count();
        let f = ones as f64 / n as f64;
        assert!((f - 0.5).abs() <= 0.01, "{f}");
    }

    #[test]
    fn invalid_tables_rejected() {
        let bad = UserSpec::new(
            1,
            vec![AffineMap::scalar(1.0, 0.0)],
            vec![OutputMap::Constant(2.0)],
            vec![vec![1.0]],
            vec![vec![1.0]],
            Some(vec![0.0, 1.0]),
        );
        assert!(bad.is_err());
        let bad = UserSpec::new(
            1,
            vec![AffineMap::scalar(1.0, 0.0), AffineMap::scalar(1.0, 0.0)],
            vec![OutputMap::Constant(0.0)],
            vec![vec![0.7, 0.7]],
            vec![vec![1.0]],
            None,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(aggregate(&[1.0, 1.0, 0.0, 1.0]), 3.0);
        assert_eq!(aggregate(&vec![1.0; 1000]), 1000.0);
    }

    #[test]
    fn filter_examples() {
        assert_eq!(apply_filter(FilterSpec::CumulativeMean, &[2.0, 4.0]).unwrap(), 3.0);
        assert_eq!(apply_filter(FilterSpec::Identity, &[5.0, 7.0]).unwrap(), 7.0);
        assert_eq!(apply_filter(FilterSpec::Ema { alpha: 0.5 }, &[0.0, 1.0, 1.0]).unwrap(), 0.75);
        assert!(apply_filter(FilterSpec::Identity, &[]).is_err());
        assert!(apply_filter(FilterSpec::Ema { alpha: 0.0 }, &[1.0]).is_err());
    }

    #[test]
    fn threshold_policy_hand_trace() {
        // x -> x + 1 under signal 0 (x -> x under 1); output x.
        let user = UserSpec::new(
            1,
            vec![AffineMap::scalar(1.0, 1.0), AffineMap::scalar(1.0, 0.0)],
            vec![OutputMap::Affine { weights: vec![1.0], offset: 0.0 }],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0], vec![1.0]],
            None,
        )
        .unwrap();
        let policy = ThresholdPolicy { threshold: 2.5, below: 0, above: 1 };
        let t = run_loop(&[user], &policy, FilterSpec::Identity, &[vec![0.0]], 5, 1).unwrap();
        // k : signal (sees y(k-1)) : x(k) : y(k)
        // 0 : 0 (none)             : 0    : 0
        // 1 : 0 (0)                : 1    : 1
        // 2 : 0 (1)                : 2    : 2
        // 3 : 0 (2)                : 3    : 3
        // 4 : 1 (3 > 2.5)          : 4    : 4
        assert_eq!(t.signals, vec![vec![0], vec![0], vec![0], vec![0], vec![1]]);
        assert_eq!(t.aggregate, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.states.last().unwrap(), &vec![vec![4.0]]);
    }

    #[test]
    fn aggregate_conserved_and_broadcast_uniform() {
        let coin = UserSpec::new(
            1,
            vec![AffineMap::scalar(1.0, 0.0)],
            vec![OutputMap::Constant(0.0), OutputMap::Constant(1.0)],
            vec![vec![1.0], vec![1.0]],
            vec![vec![0.3, 0.7], vec![0.8, 0.2]],
            Some(vec![0.0, 1.0]),
        )
        .unwrap();
        let users = vec![coin; 5];
        let policy = ThresholdPolicy { threshold: 2.0, below: 0, above: 1 };
        let opts = LoopOptions { filter: FilterSpec::Ema { alpha: 0.3 }, delay: 2 };
        let rngs = (0..5).map(|i| SeededRng::new(4, i)).collect();
        let t = run_loop_with(&users, &policy, &opts, &vec![vec![0.0]; 5], 300, rngs).unwrap();
        for k in 0..t.steps() {
            assert_eq!(t.aggregate[k], t.actions[k].iter().sum::<f64>());
            assert!(t.broadcast[k]);
            assert!(t.signals[k].iter().all(|s| *s == t.signals[k][0]));
        }
    }
}
