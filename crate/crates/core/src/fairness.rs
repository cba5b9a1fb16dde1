//! Equal-treatment and equal-impact diagnostics, default-rate metrics, and the
//! dispersion and density summaries used by the reporters.

use serde::Serialize;

use crate::closed_loop::{LoopTrace, Signal};
use crate::error::{Error, Result};
use crate::numerics::normal_cdf;

/// Default coincidence tolerance for equal-impact checks.
pub const DEFAULT_EPSILON: f64 = 0.02;

/// Running means `out[k] = (s[0] + .. + s[k]) / (k + 1)`.
pub fn cesaro(series: &[f64]) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::domain("Cesaro mean of an empty series"));
    }
    let mut sum = 0.0;
    Ok(series
        .iter()
        .enumerate()
        .map(|(k, v)| {
            sum += v;
            sum / (k + 1) as f64
        })
        .collect())
}

/// Class (non-protected attributes) and group (protected attribute) of every user.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassPartition {
    pub class_of: Vec<usize>,
    pub group_of: Vec<usize>,
}

impl ClassPartition {
    pub fn new(class_of: Vec<usize>, group_of: Vec<usize>) -> Result<Self> {
        if class_of.len() != group_of.len() {
            return Err(Error::domain("class and group labels cover different users"));
        }
        Ok(ClassPartition { class_of, group_of })
    }

    /// Everyone in class 0 and group 0.
    pub fn single(users: usize) -> Self {
        ClassPartition {
            class_of: vec![0; users],
            group_of: vec![0; users],
        }
    }

    pub fn users(&self) -> usize {
        self.class_of.len()
    }

    fn members(labels: &[usize]) -> Vec<Vec<usize>> {
        let n = labels.iter().max().map_or(0, |m| m + 1);
        let mut out = vec![Vec::new(); n];
        for (i, c) in labels.iter().enumerate() {
            out[*c].push(i);
        }
        out
    }

    pub fn classes(&self) -> Vec<Vec<usize>> {
        Self::members(&self.class_of)
    }

    pub fn groups(&self) -> Vec<Vec<usize>> {
        Self::members(&self.group_of)
    }

    fn check_covers(&self, users: usize) -> Result<()> {
        if self.users() != users {
            return Err(Error::domain(format!(
                "partition labels {} users, trace has {users}",
                self.users()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SignalViolation {
    pub step: usize,
    pub class: usize,
    pub signals: Vec<Signal>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassTreatment {
    pub class: usize,
    pub users: usize,
    /// Every recorded action in the class equals one constant.
    pub literal_constant: bool,
    pub constant: Option<f64>,
    /// Pairwise two-proportion tests run for this class.
    pub tests: usize,
    pub min_p_value: Option<f64>,
    /// No test rejects at the Bonferroni-corrected level `alpha / tests`.
    pub distribution_equal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreatmentReport {
    pub alpha: f64,
    pub signal_violations: Vec<SignalViolation>,
    pub classes: Vec<ClassTreatment>,
}

impl TreatmentReport {
    pub fn signals_uniform(&self) -> bool {
        self.signal_violations.is_empty()
    }
}

/// Two-sided p-value of the pooled two-proportion z-test.
pub fn two_proportion_p(hits_a: usize, n_a: usize, hits_b: usize, n_b: usize) -> f64 {
    let (na, nb) = (n_a as f64, n_b as f64);
    let pooled = (hits_a + hits_b) as f64 / (na + nb);
    let var = pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb);
    if var <= 0.0 {
        return 1.0;
    }
    let z = (hits_a as f64 / na - hits_b as f64 / nb) / var.sqrt();
    (2.0 * normal_cdf(-z.abs())).min(1.0)
}

fn distinct(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Checks signal uniformity within classes, the literal constant-action
/// condition, and equality of per-user action distributions.
///
/// The distributional check runs, for every pair of users in a class and every
/// distinct action value (one value suffices for a binary alphabet), a test of
/// equal frequency of that value.
pub fn check_equal_treatment(
    trace: &LoopTrace,
    partition: &ClassPartition,
    alpha: f64,
) -> Result<TreatmentReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("test level {alpha} outside (0, 1)")));
    }
    partition.check_covers(trace.users())?;
    let classes = partition.classes();

    let mut signal_violations = Vec::new();
    for (step, signals) in trace.signals.iter().enumerate() {
        for (class, members) in classes.iter().enumerate() {
            let mut seen: Vec<Signal> = members.iter().map(|i| signals[*i]).collect();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() > 1 {
                signal_violations.push(SignalViolation {
                    step,
                    class,
                    signals: seen,
                });
            }
        }
    }

    let steps = trace.steps();
    let mut reports = Vec::with_capacity(classes.len());
    for (class, members) in classes.iter().enumerate() {
        let values = distinct(members.iter().flat_map(|i| trace.actions.iter().map(move |a| a[*i])));
        let literal_constant = values.len() <= 1;
        let tested: &[f64] = match values.len() {
            0 | 1 => &[],
            2 => &values[..1],
            _ => &values,
        };
        let mut tests = 0;
        let mut min_p: Option<f64> = None;
        for v in tested {
            let hits: Vec<usize> = members
                .iter()
                .map(|i| trace.actions.iter().filter(|a| a[*i] == *v).count())
                .collect();
            for a in 0..hits.len() {
                for b in a + 1..hits.len() {
                    let p = two_proportion_p(hits[a], steps, hits[b], steps);
                    tests += 1;
                    min_p = Some(min_p.map_or(p, |m| m.min(p)));
                }
            }
        }
        reports.push(ClassTreatment {
            class,
            users: members.len(),
            literal_constant,
            constant: if literal_constant { values.first().copied() } else { None },
            tests,
            min_p_value: min_p,
            distribution_equal: min_p.is_none_or(|p| p >= alpha / tests as f64),
        });
    }
    Ok(TreatmentReport {
        alpha,
        signal_violations,
        classes: reports,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImpactReport {
    pub epsilon: f64,
    /// Final Cesaro mean `[run][user]`.
    pub user_limits: Vec<Vec<f64>>,
    /// Final pooled value `[run][group]`.
    pub group_limits: Vec<Vec<f64>>,
    /// Largest within-class gap between user limits, over all runs.
    pub coincidence_spread: f64,
    /// Largest gap between group limits within a run.
    pub group_spread: f64,
    /// Largest change of one limit across runs.
    pub initial_condition_spread: f64,
    pub converged: bool,
}

fn range(values: impl IntoIterator<Item = f64>) -> f64 {
    let (lo, hi) = values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

/// Equal-impact diagnostics over runs of the same users from different
/// initial conditions.
pub fn check_equal_impact(
    traces: &[LoopTrace],
    partition: &ClassPartition,
    epsilon: f64,
) -> Result<ImpactReport> {
    if traces.len() < 2 {
        return Err(Error::domain("equal impact needs at least two runs"));
    }
    let horizon = traces[0].steps();
    if horizon == 0 || traces.iter().any(|t| t.steps() != horizon) {
        return Err(Error::domain("runs have mismatched or empty horizons"));
    }
    let users = traces[0].users();
    partition.check_covers(users)?;
    for t in traces {
        partition.check_covers(t.users())?;
    }
    let user_limits: Vec<Vec<f64>> = traces
        .iter()
        .map(|t| {
            (0..users)
                .map(|i| t.actions.iter().map(|a| a[i]).sum::<f64>() / horizon as f64)
                .collect()
        })
        .collect();
    let groups = partition.groups();
    let group_limits: Vec<Vec<f64>> = user_limits
        .iter()
        .map(|lim| {
            groups
                .iter()
                .map(|m| m.iter().map(|i| lim[*i]).sum::<f64>() / m.len().max(1) as f64)
                .collect()
        })
        .collect();
    let classes = partition.classes();
    let coincidence_spread = user_limits
        .iter()
        .flat_map(|lim| classes.iter().map(move |m| range(m.iter().map(|i| lim[*i]))))
        .fold(0.0, f64::max);
    let group_spread = group_limits.iter().map(|g| range(g.iter().copied())).fold(0.0, f64::max);
    let initial_condition_spread = (0..users)
        .map(|i| range(user_limits.iter().map(|lim| lim[i])))
        .fold(0.0, f64::max);
    Ok(ImpactReport {
        epsilon,
        user_limits,
        group_limits,
        coincidence_spread,
        group_spread,
        initial_condition_spread,
        converged: coincidence_spread <= epsilon && initial_condition_spread <= epsilon,
    })
}

/// Group-level impact from already-averaged series `[run][group][k]`, e.g. the
/// pooled default rate of each group in independent trials.
pub fn check_group_impact(series: &[Vec<Vec<f64>>], epsilon: f64) -> Result<ImpactReport> {
    let Some(first) = series.first() else {
        return Err(Error::domain("group impact needs at least one run"));
    };
    let horizon = first.first().map_or(0, Vec::len);
    if horizon == 0
        || series
            .iter()
            .any(|run| run.len() != first.len() || run.iter().any(|s| s.len() != horizon))
    {
        return Err(Error::domain("group series have mismatched or empty horizons"));
    }
    let group_limits: Vec<Vec<f64>> = series
        .iter()
        .map(|run| run.iter().map(|s| s[horizon - 1]).collect())
        .collect();
    let group_spread = group_limits.iter().map(|g| range(g.iter().copied())).fold(0.0, f64::max);
    let initial_condition_spread = (0..first.len())
        .map(|g| range(group_limits.iter().map(|lim| lim[g])))
        .fold(0.0, f64::max);
    Ok(ImpactReport {
        epsilon,
        user_limits: Vec::new(),
        group_limits,
        coincidence_spread: group_spread,
        group_spread,
        initial_condition_spread,
        converged: group_spread <= epsilon && initial_condition_spread <= epsilon,
    })
}

/// Running default-rate tally for one borrower.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AdrCounter {
    pub approvals: u64,
    pub repaid: u64,
}

impl AdrCounter {
    pub fn record(&mut self, decision: bool, repaid: bool) -> Result<f64> {
        if repaid && !decision {
            return Err(Error::domain("repayment recorded without an approval"));
        }
        self.approvals += u64::from(decision);
        self.repaid += u64::from(repaid);
        Ok(self.value())
    }

    /// `1 - repaid / approvals`, or 0 before the first approval.
    pub fn value(&self) -> f64 {
        adr_from_counts(self.repaid, self.approvals)
    }
}

fn adr_from_counts(repaid: u64, approvals: u64) -> f64 {
    if approvals == 0 {
        0.0
    } else {
        1.0 - repaid as f64 / approvals as f64
    }
}

/// Average default rate after each step.
pub fn adr_user(decisions: &[bool], repayments: &[bool]) -> Result<Vec<f64>> {
    if decisions.len() != repayments.len() {
        return Err(Error::domain("decision and repayment series differ in length"));
    }
    let mut counter = AdrCounter::default();
    decisions
        .iter()
        .zip(repayments)
        .map(|(d, r)| counter.record(*d, *r))
        .collect()
}

fn check_histories(decisions: &[Vec<bool>], repayments: &[Vec<bool>], members: &[usize]) -> Result<usize> {
    let Some(&first) = members.first() else {
        return Err(Error::domain("empty group"));
    };
    if decisions.len() != repayments.len() {
        return Err(Error::domain("decision and repayment histories cover different users"));
    }
    let horizon = decisions.get(first).map_or(0, Vec::len);
    for &i in members {
        let (Some(d), Some(r)) = (decisions.get(i), repayments.get(i)) else {
            return Err(Error::domain(format!("unknown user {i}")));
        };
        if d.len() != horizon || r.len() != horizon {
            return Err(Error::domain("histories differ in length"));
        }
        if d.iter().zip(r).any(|(d, r)| *r && !*d) {
            return Err(Error::domain(format!("user {i} repaid without an approval")));
        }
    }
    Ok(horizon)
}

/// Pooled group default rate: total repayments over total approvals.
pub fn adr_group(decisions: &[Vec<bool>], repayments: &[Vec<bool>], members: &[usize]) -> Result<Vec<f64>> {
    let horizon = check_histories(decisions, repayments, members)?;
    let (mut app, mut rep) = (0u64, 0u64);
    Ok((0..horizon)
        .map(|k| {
            for &i in members {
                app += u64::from(decisions[i][k]);
                rep += u64::from(repayments[i][k]);
            }
            adr_from_counts(rep, app)
        })
        .collect())
}

/// Mean of the member default rates, the unpooled alternative to [`adr_group`].
pub fn adr_group_mean(
    decisions: &[Vec<bool>],
    repayments: &[Vec<bool>],
    members: &[usize],
) -> Result<Vec<f64>> {
    let horizon = check_histories(decisions, repayments, members)?;
    let mut total = vec![0.0; horizon];
    for &i in members {
        for (t, a) in total.iter_mut().zip(adr_user(&decisions[i], &repayments[i])?) {
            *t += a;
        }
    }
    Ok(total.into_iter().map(|t| t / members.len() as f64).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dispersion {
    pub mean: Vec<f64>,
    /// Sample (n - 1) standard deviation; 0 for a single series.
    pub std: Vec<f64>,
}

pub fn dispersion(series: &[Vec<f64>]) -> Result<Dispersion> {
    let Some(first) = series.first() else {
        return Err(Error::domain("dispersion of no series"));
    };
    let len = first.len();
    if series.iter().any(|s| s.len() != len) {
        return Err(Error::domain("series differ in length"));
    }
    let n = series.len() as f64;
    let mut mean = Vec::with_capacity(len);
    let mut std = Vec::with_capacity(len);
    for k in 0..len {
        let m = series.iter().map(|s| s[k]).sum::<f64>() / n;
        let ss: f64 = series.iter().map(|s| (s[k] - m).powi(2)).sum();
        mean.push(m);
        std.push(if series.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 });
    }
    Ok(Dispersion { mean, std })
}

/// Number of bins of width `width` covering [0, 1].
pub fn bin_count(width: f64) -> Result<usize> {
    if !(width > 0.0 && width <= 1.0) {
        return Err(Error::domain(format!("bin width {width} outside (0, 1]")));
    }
    Ok(((1.0 / width) - 1e-9).ceil().max(1.0) as usize)
}

/// `[lower, upper)` of bin `b`; the last bin is closed at 1. Bounds are
/// rounded to 12 decimals so `3 * 0.1` reads as 0.3.
pub fn bin_bounds(width: f64, b: usize) -> (f64, f64) {
    let r = |v: f64| (v * 1e12).round() / 1e12;
    (r(b as f64 * width), r((b + 1) as f64 * width).min(1.0))
}

/// Histogram of values in [0, 1] with fixed-width bins.
pub fn density_bins(values: &[f64], width: f64) -> Result<Vec<usize>> {
    let n = bin_count(width)?;
    let mut counts = vec![0; n];
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::domain(format!("value {v} outside [0, 1]")));
        }
        counts[((v / width).floor() as usize).min(n - 1)] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_loop::LoopTrace;
    use crate::numerics::{bernoulli, SeededRng};

    fn trace(actions: Vec<Vec<f64>>, signals: Vec<Vec<Signal>>) -> LoopTrace {
        let n = actions.len();
        LoopTrace {
            broadcast: vec![false; n],
            aggregate: actions.iter().map(|a| a.iter().sum()).collect(),
            actions,
            signals,
            ..LoopTrace::default()
        }
    }

    #[test]
    fn cesaro_examples() {
        assert_eq!(cesaro(&[0.3; 3]).unwrap(), vec![0.3; 3]);
        assert_eq!(cesaro(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 1.5, 2.0]);
        let alt: Vec<f64> = (0..1000).map(|k| (k % 2) as f64).collect();
        assert!((cesaro(&alt).unwrap()[999] - 0.5).abs() <= 1e-3);
        assert!(cesaro(&[]).is_err());
    }

    #[test]
    fn per_user_signals_flagged() {
        let t = trace(vec![vec![1.0, 0.0], vec![1.0, 1.0]], vec![vec![1, 0], vec![1, 1]]);
        let r = check_equal_treatment(&t, &ClassPartition::single(2), 0.01).unwrap();
        assert_eq!(r.signal_violations, vec![SignalViolation { step: 0, class: 0, signals: vec![0, 1] }]);
        assert!(!r.classes[0].literal_constant);
        let r = check_equal_treatment(&t, &ClassPartition::new(vec![0, 1], vec![0, 0]).unwrap(), 0.01).unwrap();
        assert!(r.signals_uniform());
        assert!(r.classes[0].literal_constant);
        assert_eq!(r.classes[0].constant, Some(1.0));
        assert!(!r.classes[1].literal_constant);
        assert!(check_equal_treatment(&t, &ClassPartition::single(3), 0.01).is_err());
    }

    #[test]
    fn identical_bernoulli_users_pass() {
        let mut rng = SeededRng::new(17, 0);
        let actions: Vec<Vec<f64>> = (0..10_000)
            .map(|_| (0..2).map(|_| f64::from(u8::from(bernoulli(0.7, &mut rng).unwrap()))).collect())
            .collect();
        let t = trace(actions, vec![vec![0, 0]; 10_000]);
        let r = check_equal_treatment(&t, &ClassPartition::single(2), 0.01).unwrap();
        assert_eq!(r.classes[0].tests, 1);
        assert!(r.classes[0].distribution_equal);
    }

    #[test]
    fn proportion_test_oracle() {
        // 60/100 vs 40/100: pooled 0.5, se = sqrt(0.25 * 0.02), z = 2.828..
        let p = two_proportion_p(60, 100, 40, 100);
        let z: f64 = 0.2 / (0.25f64 * 0.02).sqrt();
        assert!((p - 2.0 * normal_cdf(-z)).abs() < 1e-15);
        assert!((p - 0.004677734981047).abs() < 1e-9);
        assert_eq!(two_proportion_p(0, 10, 0, 10), 1.0);
    }

    #[test]
    fn impact_examples() {
        let ones = trace(vec![vec![1.0, 1.0]; 10], vec![vec![0, 0]; 10]);
        let r = check_equal_impact(&[ones.clone(), ones], &ClassPartition::single(2), 0.0).unwrap();
        assert_eq!((r.coincidence_spread, r.initial_condition_spread), (0.0, 0.0));
        assert!(r.converged);

        let split = trace(vec![vec![0.0, 1.0]; 10], vec![vec![0, 0]; 10]);
        let r = check_equal_impact(&[split.clone(), split], &ClassPartition::single(2), 0.02).unwrap();
        assert_eq!(r.coincidence_spread, 1.0);
        assert!(!r.converged);

        let short = trace(vec![vec![0.0, 1.0]; 5], vec![vec![0, 0]; 5]);
        let long = trace(vec![vec![0.0, 1.0]; 6], vec![vec![0, 0]; 6]);
        assert!(check_equal_impact(&[short, long], &ClassPartition::single(2), 0.1).is_err());
    }

    #[test]
    fn adr_examples() {
        assert_eq!(adr_user(&[true, true], &[true, true]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(adr_user(&[true, true], &[true, false]).unwrap(), vec![0.0, 0.5]);
        let a = adr_user(&[true; 4], &[true, true, true, false]).unwrap();
        assert_eq!(a[3], 0.25);
        assert!(adr_user(&[false], &[true]).is_err());
        assert_eq!(adr_user(&[false, true], &[false, false]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn group_adr_examples() {
        let d = vec![vec![true, true], vec![true, true]];
        let r = vec![vec![true, true], vec![true, false]];
        assert_eq!(adr_group(&d, &r, &[0, 1]).unwrap()[1], 0.25);
        assert_eq!(adr_group(&d, &d, &[0, 1]).unwrap(), vec![0.0, 0.0]);
        let none = vec![vec![false, false]];
        assert_eq!(adr_group(&none, &none, &[0]).unwrap(), vec![0.0, 0.0]);
        assert!(adr_group(&d, &r, &[]).is_err());
        assert_eq!(adr_group_mean(&d, &r, &[0, 1]).unwrap(), vec![0.0, 0.25]);
    }

    #[test]
    fn dispersion_examples() {
        let d = dispersion(&[vec![0.2, 0.4], vec![0.2, 0.4]]).unwrap();
        assert_eq!(d.std, vec![0.0, 0.0]);
        let d = dispersion(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(d.mean, vec![0.5, 0.5]);
        assert!((d.std[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(dispersion(&[vec![0.0], vec![0.0, 1.0]]).is_err());
        assert_eq!(dispersion(&[vec![0.3]]).unwrap().std, vec![0.0]);
    }

    #[test]
    fn density_examples() {
        assert_eq!(density_bins(&[0.1, 0.6, 0.7], 0.5).unwrap(), vec![1, 2]);
        assert_eq!(density_bins(&[0.0, 1.0], 0.1).unwrap().len(), 10);
        assert_eq!(density_bins(&[1.0], 0.1).unwrap()[9], 1);
        assert!(density_bins(&[1.5], 0.1).is_err());
        assert_eq!(bin_bounds(0.3, 3), (0.9, 1.0));
        assert_eq!(bin_bounds(0.1, 2), (0.2, 0.3));
    }
}
