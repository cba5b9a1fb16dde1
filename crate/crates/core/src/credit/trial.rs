use rayon::prelude::*;
use serde::Serialize;

use super::{
    decide, income_code, latent_state, repayment, train_scorecard, IncomeMode, IncomeTable, Observation,
    ScorecardModel, SimConfig,
};
use crate::closed_loop::LoopTrace;
use crate::error::Result;
use crate::fairness::{adr_group, check_group_impact, dispersion, AdrCounter, ClassPartition, Dispersion, ImpactReport, DEFAULT_EPSILON};
use crate::numerics::{categorical_unchecked, SeededRng, StreamKey};

/// One simulated applicant; yearly series are indexed by `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Household {
    pub id: usize,
    pub race: usize,
    pub income: Vec<f64>,
    pub decision: Vec<bool>,
    pub repaid: Vec<bool>,
    /// Default rate after year `k`.
    pub adr: Vec<f64>,
    /// Scorecard score, absent in approve-all years.
    pub score: Vec<Option<f64>>,
}

impl Household {
    /// Default rate known when deciding year `k`.
    pub fn adr_before(&self, k: usize) -> f64 {
        k.checked_sub(1).map_or(0.0, |j| self.adr[j])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub start_year: i32,
    pub races: Vec<String>,
    pub households: Vec<Household>,
    /// Scorecard used in each year.
    pub scorecards: Vec<ScorecardModel>,
    pub training_sizes: Vec<usize>,
    /// Pooled default rate per race, `None` when no household has that race.
    pub group_adr: Vec<Option<Vec<f64>>>,
}

impl TrialResult {
    pub fn horizon(&self) -> usize {
        self.scorecards.len()
    }

    pub fn members(&self, race: usize) -> Vec<usize> {
        self.households.iter().filter(|h| h.race == race).map(|h| h.id).collect()
    }

    /// All households in one class, grouped by race.
    pub fn partition(&self) -> ClassPartition {
        ClassPartition {
            class_of: vec![0; self.households.len()],
            group_of: self.households.iter().map(|h| h.race).collect(),
        }
    }

    /// The trial as a closed-loop trace: signal = decision, action = repayment,
    /// state and per-user filter = default rate.
    pub fn to_loop_trace(&self) -> LoopTrace {
        let hs = &self.households;
        let k_max = self.horizon();
        let mut trace = LoopTrace {
            states: vec![vec![vec![0.0]; hs.len()]],
            ..LoopTrace::default()
        };
        let (mut app, mut rep) = (0u64, 0u64);
        for k in 0..k_max {
            let actions: Vec<f64> = hs.iter().map(|h| f64::from(u8::from(h.repaid[k]))).collect();
            app += hs.iter().filter(|h| h.decision[k]).count() as u64;
            rep += hs.iter().filter(|h| h.repaid[k]).count() as u64;
            trace.broadcast.push(false);
            trace.signals.push(hs.iter().map(|h| usize::from(h.decision[k])).collect());
            trace.aggregate.push(actions.iter().sum());
            trace.actions.push(actions);
            trace.filtered.push(if app == 0 { 0.0 } else { 1.0 - rep as f64 / app as f64 });
            trace.filtered_per_user.push(hs.iter().map(|h| h.adr[k]).collect());
            trace.states.push(hs.iter().map(|h| vec![h.adr[k]]).collect());
        }
        trace
    }
}

/// Runs trial `trial` of the experiment. Household `i` draws its race (and
/// income rank) from a setup stream and year `k` from stream `(trial, i, k)`,
/// income first, then repayment.
pub fn run_trial(cfg: &SimConfig, table: &IncomeTable, trial: usize) -> Result<TrialResult> {
    cfg.validate()?;
    cfg.check_table(table)?;
    let n = cfg.users;
    let horizon = cfg.horizon();

    let mut ranks = Vec::with_capacity(n);
    let mut households: Vec<Household> = (0..n)
        .map(|i| {
            let mut rng = SeededRng::for_key(cfg.seed, StreamKey::setup(trial as u16, i as u32));
            let race = categorical_unchecked(&cfg.race_distribution, &mut rng);
            ranks.push(rng.uniform());
            Household {
                id: i,
                race,
                income: Vec::with_capacity(horizon),
                decision: Vec::with_capacity(horizon),
                repaid: Vec::with_capacity(horizon),
                adr: Vec::with_capacity(horizon),
                score: Vec::with_capacity(horizon),
            }
        })
        .collect();
    let mut counters = vec![AdrCounter::default(); n];
    let mut scorecards = Vec::with_capacity(horizon);
    let mut training_sizes = Vec::with_capacity(horizon);

    for (k, year) in cfg.years().enumerate() {
        let card = if k < cfg.free_approval_steps || k == 0 {
            training_sizes.push(0);
            ScorecardModel::approve_all(cfg.cutoff)
        } else {
            let history: Vec<Observation> = households
                .iter()
                .filter(|h| h.decision[k - 1] || cfg.include_denied_as_default)
                .map(|h| Observation {
                    income_code: income_code(h.income[k - 1], cfg),
                    prev_adr: h.adr_before(k - 1),
                    repaid: h.repaid[k - 1],
                })
                .collect();
            training_sizes.push(history.len());
            train_scorecard(&history, cfg)?
        };

        for (i, h) in households.iter_mut().enumerate() {
            let dist = table.get(year, &cfg.races[h.race])?;
            let mut rng = SeededRng::for_key(cfg.seed, StreamKey::new(trial, i, k)?);
            let z = match cfg.income_mode {
                IncomeMode::Independent => dist.sample(cfg.top_bin_cap, &mut rng),
                IncomeMode::Comonotonic => dist.quantile(ranks[i], cfg.top_bin_cap),
            }
            // the lowest bin starts at 0
            .max(f64::MIN_POSITIVE);
            let x = latent_state(z, cfg)?;
            let d = decide(&card, z, h.adr_before(k), cfg);
            let y = repayment(x, d.approve, cfg, &mut rng)?;
            h.income.push(z);
            h.decision.push(d.approve);
            h.repaid.push(y);
            h.score.push(d.score);
            h.adr.push(counters[i].record(d.approve, y)?);
        }
        scorecards.push(card);
    }

    let decisions: Vec<Vec<bool>> = households.iter().map(|h| h.decision.clone()).collect();
    let repaid: Vec<Vec<bool>> = households.iter().map(|h| h.repaid.clone()).collect();
    let group_adr = (0..cfg.races.len())
        .map(|r| {
            let members: Vec<usize> = households.iter().filter(|h| h.race == r).map(|h| h.id).collect();
            if members.is_empty() {
                Ok(None)
            } else {
                adr_group(&decisions, &repaid, &members).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(TrialResult {
        trial,
        start_year: cfg.start_year,
        races: cfg.races.clone(),
        households,
        scorecards,
        training_sizes,
        group_adr,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub trials: Vec<TrialResult>,
    /// Cross-trial mean and spread of each race's pooled default rate.
    pub dispersion: Vec<Option<Dispersion>>,
    pub impact: ImpactReport,
}

impl ExperimentResult {
    /// Group-level equal-impact report over the races present in every trial.
    pub fn impact(trials: &[TrialResult], epsilon: f64) -> Result<ImpactReport> {
        let races = trials.first().map_or(0, |t| t.group_adr.len());
        let present: Vec<usize> = (0..races)
            .filter(|r| trials.iter().all(|t| t.group_adr[*r].is_some()))
            .collect();
        let series: Vec<Vec<Vec<f64>>> = trials
            .iter()
            .map(|t| present.iter().map(|r| t.group_adr[*r].clone().unwrap_or_default()).collect())
            .collect();
        check_group_impact(&series, epsilon)
    }
}

/// Runs all trials in parallel; results come back in trial order.
pub fn run_experiment(cfg: &SimConfig, table: &IncomeTable) -> Result<ExperimentResult> {
    cfg.validate()?;
    cfg.check_table(table)?;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, table, t))
        .collect::<Result<Vec<_>>>()?;
    let dispersion = (0..cfg.races.len())
        .map(|r| {
            let series: Vec<Vec<f64>> = trials.iter().filter_map(|t| t.group_adr[r].clone()).collect();
            if series.is_empty() {
                Ok(None)
            } else {
                dispersion(&series).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let impact = ExperimentResult::impact(&trials, DEFAULT_EPSILON)?;
    Ok(ExperimentResult {
        trials,
        dispersion,
        impact,
    })
}
