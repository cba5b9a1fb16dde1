//! Mortgage-lending case study: simulated households apply for credit every
//! year, a logistic scorecard retrained on last year's outcomes decides, and
//! each household's average default rate feeds back into the next decision.
//!
//! Money is in thousands of dollars throughout.

mod income;
mod trial;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bernoulli, check_distribution, fit_logit, normal_cdf, LogitModel, SeededRng, DEFAULT_L2_LAMBDA};

pub use income::{IncomeBin, IncomeDist, IncomeTable, BUNDLED_TABLE};
pub use trial::{run_experiment, run_trial, ExperimentResult, Household, TrialResult};

pub const DEFAULT_RACES: [&str; 3] = ["BLACK ALONE", "WHITE ALONE", "ASIAN ALONE"];

/// How a household's income evolves across years.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IncomeMode {
    /// Fresh independent draw every year.
    #[default]
    Independent,
    /// One persistent quantile per household, mapped through each year's table.
    Comonotonic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub users: usize,
    pub start_year: i32,
    pub end_year: i32,
    pub races: Vec<String>,
    pub race_distribution: Vec<f64>,
    pub mortgage_multiple: f64,
    pub annual_rate: f64,
    pub living_cost: f64,
    pub income_threshold: f64,
    pub bernoulli_slope: f64,
    pub cutoff: f64,
    pub free_approval_steps: usize,
    pub trials: usize,
    pub l2_lambda: f64,
    pub top_bin_cap: f64,
    pub include_denied_as_default: bool,
    pub income_mode: IncomeMode,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            users: 1000,
            start_year: 2002,
            end_year: 2020,
            races: DEFAULT_RACES.map(String::from).into(),
            race_distribution: vec![0.1235, 0.8406, 0.0359],
            mortgage_multiple: 3.5,
            annual_rate: 0.0216,
            living_cost: 10.0,
            income_threshold: 15.0,
            bernoulli_slope: 5.0,
            cutoff: 0.4,
            free_approval_steps: 2,
            trials: 5,
            l2_lambda: DEFAULT_L2_LAMBDA,
            top_bin_cap: 300.0,
            include_denied_as_default: false,
            income_mode: IncomeMode::Independent,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn years(&self) -> std::ops::RangeInclusive<i32> {
        self.start_year..=self.end_year
    }

    pub fn horizon(&self) -> usize {
        (self.end_year - self.start_year + 1).max(0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.users == 0 || self.users > u32::MAX as usize {
            return bad(format!("users must be in 1..={}", u32::MAX));
        }
        if self.trials == 0 || self.trials > u16::MAX as usize {
            return bad(format!("trials must be in 1..={}", u16::MAX));
        }
        if self.end_year < self.start_year || self.horizon() >= u16::MAX as usize {
            return bad(format!("invalid year range {}..{}", self.start_year, self.end_year));
        }
        if self.races.is_empty() || self.races.len() != self.race_distribution.len() {
            return bad("races and race_distribution must be non-empty and of equal length".into());
        }
        check_distribution(&self.race_distribution)
            .map_err(|e| Error::Config(format!("race_distribution: {e}")))?;
        for (name, v) in [
            ("mortgage_multiple", self.mortgage_multiple),
            ("annual_rate", self.annual_rate),
            ("living_cost", self.living_cost),
            ("income_threshold", self.income_threshold),
            ("l2_lambda", self.l2_lambda),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !self.bernoulli_slope.is_finite() || !self.cutoff.is_finite() {
            return bad("bernoulli_slope and cutoff must be finite".into());
        }
        if !(self.top_bin_cap.is_finite() && self.top_bin_cap > 0.0) {
            return bad(format!("top_bin_cap must be positive, got {}", self.top_bin_cap));
        }
        Ok(())
    }

    /// Checks the table covers the horizon and the open bins lie below the cap.
    pub fn check_table(&self, table: &IncomeTable) -> Result<()> {
        table.check_coverage(self.years(), &self.races)?;
        for year in self.years() {
            for race in &self.races {
                if let Some(lo) = table.get(year, race)?.top_lower() {
                    if lo >= self.top_bin_cap {
                        return Err(Error::Config(format!(
                            "top_bin_cap {} does not exceed the open bin at {lo} ({year} {race})",
                            self.top_bin_cap
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Share of income left after living cost and mortgage interest.
pub fn latent_state(z: f64, cfg: &SimConfig) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::domain(format!("income must be positive, got {z}")));
    }
    Ok((z - cfg.living_cost - cfg.mortgage_multiple * cfg.annual_rate * z) / z)
}

/// Zero without an approval or when income does not cover costs, otherwise a
/// Bernoulli draw with probability `F(slope * x)`.
pub fn repayment(x: f64, decision: bool, cfg: &SimConfig, rng: &mut SeededRng) -> Result<bool> {
    if !decision || x <= 0.0 {
        return Ok(false);
    }
    bernoulli(normal_cdf(cfg.bernoulli_slope * x), rng)
}

pub fn income_code(z: f64, cfg: &SimConfig) -> f64 {
    if z > cfg.income_threshold {
        1.0
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scorecard {
    /// Logistic model over `[previous ADR, income code]`.
    Linear { model: LogitModel },
    ApproveAll,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScorecardModel {
    pub rule: Scorecard,
    pub cutoff: f64,
}

impl ScorecardModel {
    pub fn approve_all(cutoff: f64) -> Self {
        ScorecardModel {
            rule: Scorecard::ApproveAll,
            cutoff,
        }
    }

    pub fn linear(model: LogitModel, cutoff: f64) -> Result<Self> {
        if model.dim() != 2 {
            return Err(Error::domain("scorecard models take two features"));
        }
        Ok(ScorecardModel {
            rule: Scorecard::Linear { model },
            cutoff,
        })
    }

    /// The published example card: -8.17 per unit of default rate, +5.77 above
    /// $15K, no intercept.
    pub fn example(cutoff: f64) -> Self {
        ScorecardModel {
            rule: Scorecard::Linear {
                model: LogitModel {
                    weights: vec![-8.17, 5.77],
                    intercept: 0.0,
                    l2_lambda: 0.0,
                },
            },
            cutoff,
        }
    }

    /// Linear score, `None` for an approve-all card.
    pub fn score(&self, prev_adr: f64, code: f64) -> Option<f64> {
        match &self.rule {
            Scorecard::Linear { model } => Some(model.intercept + model.weights[0] * prev_adr + model.weights[1] * code),
            Scorecard::ApproveAll => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub approve: bool,
    pub score: Option<f64>,
}

/// Approve iff the raw linear score is strictly above the cut-off.
pub fn decide(model: &ScorecardModel, z: f64, prev_adr: f64, cfg: &SimConfig) -> Decision {
    let score = model.score(prev_adr, income_code(z, cfg));
    Decision {
        approve: score.is_none_or(|s| s > model.cutoff),
        score,
    }
}

/// One labelled row of scorecard training data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub income_code: f64,
    pub prev_adr: f64,
    pub repaid: bool,
}

/// Fits the scorecard; without both label values the fit is undefined and an
/// approve-all card is returned.
pub fn train_scorecard(history: &[Observation], cfg: &SimConfig) -> Result<ScorecardModel> {
    let repaid = history.iter().filter(|o| o.repaid).count();
    if repaid == 0 || repaid == history.len() {
        return Ok(ScorecardModel::approve_all(cfg.cutoff));
    }
    let x = DMatrix::from_fn(history.len(), 2, |i, j| {
        if j == 0 {
            history[i].prev_adr
        } else {
            history[i].income_code
        }
    });
    let y: Vec<f64> = history.iter().map(|o| f64::from(u8::from(o.repaid))).collect();
    ScorecardModel::linear(fit_logit(&x, &y, cfg.l2_lambda)?, cfg.cutoff)
}
