//! Configuration, orchestration and result files behind the command line.

mod analyze;
mod config;
mod output;

use std::path::Path;

use serde::Serialize;

pub use analyze::{analyze, analyze_dir, Analysis, CrossCheck, CROSS_CHECK_TOL};
pub use config::{Paths, ReportOptions, RunConfig};
pub use output::{
    fmt_f64, write_atomic, ResultBundle, RunStamp, ANALYSIS_JSON, DENSITY_CSV, DENSITY_HEADER, GROUPS_CSV,
    GROUPS_HEADER, REPORT_JSON, SUMMARY_CSV, SUMMARY_HEADER, USERS_CSV, USERS_HEADER, VERSION,
};

use crate::credit::run_experiment;
use crate::error::{Error, Result};
use crate::markov::{read_spec, simulate as simulate_markov, ErgodicityReport, MarkovSystem};
use crate::numerics::SeededRng;

/// Runs the experiment and writes the result files to `out`. Nothing is
/// written unless the whole run succeeds.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<ResultBundle> {
    let table = cfg.income_table()?;
    let exp = run_experiment(&cfg.simulation, &table)?;
    let bundle = ResultBundle::render(cfg, &exp)?;
    bundle.write(out)?;
    Ok(bundle)
}

/// Parses `"0,1"` as two scalar starts and `"0,0;1,1"` as two vector starts.
pub fn parse_starts(text: &str) -> Result<Vec<Vec<f64>>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("invalid start coordinate `{s}`")))
    };
    let starts: Vec<Vec<f64>> = if text.contains(';') {
        text.split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.split(',').map(num).collect())
            .collect::<Result<_>>()?
    } else {
        text.split(',').map(|s| num(s).map(|v| vec![v])).collect::<Result<_>>()?
    };
    if starts.is_empty() {
        return Err(Error::Config("no start points given".into()));
    }
    Ok(starts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StartSummary {
    pub start: Vec<f64>,
    pub cesaro_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErgodicityRun {
    pub report: ErgodicityReport,
    pub steps: usize,
    pub seed: u64,
    pub observable: usize,
    pub starts: Vec<StartSummary>,
    /// Largest gap between the final Cesaro means of different starts.
    pub cross_start_spread: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct ErgodicityOptions {
    pub steps: usize,
    pub seed: u64,
    pub observable: usize,
    pub pair_samples: usize,
}

impl Default for ErgodicityOptions {
    fn default() -> Self {
        ErgodicityOptions {
            steps: 100_000,
            seed: 0,
            observable: 0,
            pair_samples: 1000,
        }
    }
}

/// Diagnostics plus one long trajectory per start; start `j` uses random
/// stream `j`, the contraction sampler the last stream.
pub fn ergodicity(spec: &Path, starts: &[Vec<f64>], opts: &ErgodicityOptions) -> Result<ErgodicityRun> {
    let sys = MarkovSystem::new(read_spec(spec)?)?;
    let mut rng = SeededRng::new(opts.seed, u64::MAX);
    let report = ErgodicityReport::analyze(&sys, opts.pair_samples, &mut rng);
    let starts = starts
        .iter()
        .enumerate()
        .map(|(j, x0)| {
            let mut rng = SeededRng::new(opts.seed, j as u64);
            let t = simulate_markov(&sys, x0, opts.steps, opts.observable, &mut rng)?;
            Ok(StartSummary {
                start: x0.clone(),
                cesaro_mean: t.final_mean(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = starts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.cesaro_mean), hi.max(s.cesaro_mean)));
    Ok(ErgodicityRun {
        report,
        steps: opts.steps,
        seed: opts.seed,
        observable: opts.observable,
        starts,
        cross_start_spread: hi - lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_lists() {
        assert_eq!(parse_starts("0,1").unwrap(), vec![vec![0.0], vec![1.0]]);
        assert_eq!(parse_starts("0,0.5;1,1;").unwrap(), vec![vec![0.0, 0.5], vec![1.0, 1.0]]);
        assert!(parse_starts("a").is_err());
        assert!(parse_starts(";").is_err());
    }
}
