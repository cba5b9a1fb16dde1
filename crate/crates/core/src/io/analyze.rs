//! Post-hoc checks over a `simulate` output directory.
//!
//! Default rates are recomputed from the raw per-user decisions and
//! repayments and compared with every stored series; any disagreement beyond
//! [`CROSS_CHECK_TOL`] is reported as corrupted data.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::output::{
    fmt_f64, write_atomic, RunStamp, ANALYSIS_JSON, DENSITY_CSV, DENSITY_HEADER, GROUPS_CSV, GROUPS_HEADER,
    REPORT_JSON, SUMMARY_CSV, SUMMARY_HEADER, USERS_CSV, USERS_HEADER, VERSION,
};
use crate::closed_loop::LoopTrace;
use crate::error::{Error, Result};
use crate::fairness::{
    adr_group, adr_user, bin_bounds, check_equal_treatment, check_group_impact, density_bins, dispersion,
    ClassPartition, ImpactReport, TreatmentReport,
};

pub const CROSS_CHECK_TOL: f64 = 1e-12;

#[derive(Deserialize)]
struct UserRow {
    trial: usize,
    k: usize,
    year: i32,
    user_id: usize,
    race: String,
    #[allow(dead_code)]
    income: f64,
    decision: u8,
    repaid: u8,
    adr: f64,
}

#[derive(Deserialize)]
struct GroupRow {
    trial: usize,
    k: usize,
    year: i32,
    race: String,
    adr_group: f64,
}

#[derive(Deserialize)]
struct SummaryRow {
    k: usize,
    year: i32,
    race: String,
    mean_adr: f64,
    std_adr: f64,
}

#[derive(Deserialize)]
struct DensityRow {
    k: usize,
    bin_lower: f64,
    bin_upper: f64,
    count: usize,
}

#[derive(Deserialize)]
struct StoredReport {
    config_hash: String,
    seed: u64,
    simulation: StoredSimulation,
    report_options: StoredOptions,
}

#[derive(Deserialize)]
struct StoredSimulation {
    races: Vec<String>,
    start_year: i32,
}

#[derive(Deserialize)]
struct StoredOptions {
    bin_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossCheck {
    pub user_rows: usize,
    pub group_rows: usize,
    pub summary_rows: usize,
    pub density_rows: usize,
    pub max_user_adr_error: f64,
    pub max_group_adr_error: f64,
    pub max_summary_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Analysis {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub epsilon: f64,
    pub alpha: f64,
    pub cross_check: CrossCheck,
    pub treatment: Vec<TreatmentReport>,
    pub impact: ImpactReport,
}

fn read_csv<T: DeserializeOwned>(dir: &Path, name: &str, header: &[&str]) -> Result<(RunStamp, Vec<T>)> {
    let path = dir.join(name);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
    let stamp = RunStamp::parse(first).map_err(|e| Error::Data(format!("{name}: {e}")))?;
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    if reader.headers()?.iter().ne(header.iter().copied()) {
        return Err(Error::Data(format!("{name}: unexpected header")));
    }
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::Data(format!("{name}: {e}")))?;
    Ok((stamp, rows))
}

fn mismatch(what: String) -> Error {
    Error::Data(format!("cross-check failed: {what}"))
}

fn compare(what: impl Fn() -> String, stored: f64, recomputed: f64, worst: &mut f64) -> Result<()> {
    let err = (stored - recomputed).abs();
    if !(err <= CROSS_CHECK_TOL) {
        return Err(mismatch(format!(
            "{} stored {} recomputed {}",
            what(),
            fmt_f64(stored),
            fmt_f64(recomputed)
        )));
    }
    *worst = worst.max(err);
    Ok(())
}

/// Per-trial histories rebuilt from `users.csv`.
struct Trial {
    race: Vec<usize>,
    decisions: Vec<Vec<bool>>,
    repaid: Vec<Vec<bool>>,
    adr: Vec<Vec<f64>>,
}

pub fn analyze(dir: &Path, epsilon: f64, alpha: f64) -> Result<Analysis> {
    if !(epsilon.is_finite() && epsilon >= 0.0) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("invalid epsilon {epsilon} or alpha {alpha}")));
    }
    let report_path = dir.join(REPORT_JSON);
    let report_text = std::fs::read_to_string(&report_path).map_err(|e| Error::io(&report_path, e))?;
    let report: StoredReport =
        serde_json::from_str(&report_text).map_err(|e| Error::Data(format!("{REPORT_JSON}: {e}")))?;
    let stamp = RunStamp {
        config_hash: report.config_hash,
        seed: report.seed,
    };

    let (s_users, users) = read_csv::<UserRow>(dir, USERS_CSV, &USERS_HEADER)?;
    let (s_groups, groups) = read_csv::<GroupRow>(dir, GROUPS_CSV, &GROUPS_HEADER)?;
    let (s_summary, summary) = read_csv::<SummaryRow>(dir, SUMMARY_CSV, &SUMMARY_HEADER)?;
    let (s_density, density) = read_csv::<DensityRow>(dir, DENSITY_CSV, &DENSITY_HEADER)?;
    for (name, s) in [
        (USERS_CSV, &s_users),
        (GROUPS_CSV, &s_groups),
        (SUMMARY_CSV, &s_summary),
        (DENSITY_CSV, &s_density),
    ] {
        if *s != stamp {
            return Err(Error::Data(format!(
                "{name} belongs to run {} (seed {}), {REPORT_JSON} to run {} (seed {})",
                s.config_hash, s.seed, stamp.config_hash, stamp.seed
            )));
        }
    }

    let races = &report.simulation.races;
    let race_index = |r: &str| {
        races
            .iter()
            .position(|x| x == r)
            .ok_or_else(|| mismatch(format!("unknown race `{r}`")))
    };
    let year = |k: usize| report.simulation.start_year + k as i32;

    // Rebuild histories; rows must come trial, k, user in order.
    let mut trials: BTreeMap<usize, Trial> = BTreeMap::new();
    for row in &users {
        if row.year != year(row.k) || row.decision > 1 || row.repaid > 1 {
            return Err(mismatch(format!("malformed users.csv row for user {} at k={}", row.user_id, row.k)));
        }
        let t = trials.entry(row.trial).or_insert_with(|| Trial {
            race: Vec::new(),
            decisions: Vec::new(),
            repaid: Vec::new(),
            adr: Vec::new(),
        });
        let race = race_index(&row.race)?;
        if row.k == 0 && row.user_id == t.race.len() {
            t.race.push(race);
            t.decisions.push(Vec::new());
            t.repaid.push(Vec::new());
            t.adr.push(Vec::new());
        }
        let i = row.user_id;
        if i >= t.race.len() || t.race[i] != race || t.decisions[i].len() != row.k {
            return Err(mismatch(format!("users.csv rows out of order at trial {} user {i}", row.trial)));
        }
        t.decisions[i].push(row.decision == 1);
        t.repaid[i].push(row.repaid == 1);
        t.adr[i].push(row.adr);
    }
    if trials.is_empty() {
        return Err(Error::Data("users.csv has no rows".into()));
    }
    let horizon = trials.values().next().map_or(0, |t| t.adr.first().map_or(0, Vec::len));

    let mut check = CrossCheck {
        user_rows: users.len(),
        group_rows: groups.len(),
        summary_rows: summary.len(),
        density_rows: density.len(),
        max_user_adr_error: 0.0,
        max_group_adr_error: 0.0,
        max_summary_error: 0.0,
    };

    // Per-user default rates.
    for (&trial, t) in &trials {
        for i in 0..t.race.len() {
            if t.adr[i].len() != horizon {
                return Err(mismatch(format!("trial {trial} user {i} has a short history")));
            }
            let batch = adr_user(&t.decisions[i], &t.repaid[i]).map_err(|e| mismatch(e.to_string()))?;
            for (k, (got, want)) in t.adr[i].iter().zip(&batch).enumerate() {
                compare(|| format!("adr of trial {trial} user {i} at k={k}"), *got, *want, &mut check.max_user_adr_error)?;
            }
        }
    }

    // Pooled group rates.
    let mut group_series: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for (&trial, t) in &trials {
        for r in 0..races.len() {
            let members: Vec<usize> = (0..t.race.len()).filter(|i| t.race[*i] == r).collect();
            if !members.is_empty() {
                group_series.insert((trial, r), adr_group(&t.decisions, &t.repaid, &members)?);
            }
        }
    }
    if groups.len() != group_series.len() * horizon {
        return Err(mismatch(format!(
            "groups.csv has {} rows, expected {}",
            groups.len(),
            group_series.len() * horizon
        )));
    }
    for g in &groups {
        let r = race_index(&g.race)?;
        let series = group_series
            .get(&(g.trial, r))
            .filter(|_| g.k < horizon && g.year == year(g.k))
            .ok_or_else(|| mismatch(format!("unexpected groups.csv row trial {} k={} {}", g.trial, g.k, g.race)))?;
        compare(
            || format!("group adr of trial {} {} at k={}", g.trial, g.race, g.k),
            g.adr_group,
            series[g.k],
            &mut check.max_group_adr_error,
        )?;
    }

    // Cross-trial summary.
    let mut spread = BTreeMap::new();
    for r in 0..races.len() {
        let series: Vec<Vec<f64>> = trials
            .keys()
            .filter_map(|t| group_series.get(&(*t, r)).cloned())
            .collect();
        if !series.is_empty() {
            spread.insert(r, dispersion(&series)?);
        }
    }
    if summary.len() != spread.len() * horizon {
        return Err(mismatch(format!("summary.csv has {} rows, expected {}", summary.len(), spread.len() * horizon)));
    }
    for s in &summary {
        let r = race_index(&s.race)?;
        let d = spread
            .get(&r)
            .filter(|_| s.k < horizon && s.year == year(s.k))
            .ok_or_else(|| mismatch(format!("unexpected summary.csv row k={} {}", s.k, s.race)))?;
        let what = || format!("summary {} at k={}", s.race, s.k);
        compare(what, s.mean_adr, d.mean[s.k], &mut check.max_summary_error)?;
        compare(what, s.std_adr, d.std[s.k], &mut check.max_summary_error)?;
    }

    // Density counts.
    let width = report.report_options.bin_width;
    let mut expected = Vec::new();
    for k in 0..horizon {
        let values: Vec<f64> = trials.values().flat_map(|t| t.adr.iter().map(move |a| a[k])).collect();
        for (b, count) in density_bins(&values, width)?.into_iter().enumerate() {
            let (lo, hi) = bin_bounds(width, b);
            expected.push((k, lo, hi, count));
        }
    }
    if density.len() != expected.len()
        || density
            .iter()
            .zip(&expected)
            .any(|(d, e)| (d.k, d.bin_lower, d.bin_upper, d.count) != *e)
    {
        return Err(mismatch("density.csv does not match the recomputed histogram".into()));
    }

    let treatment = trials
        .values()
        .map(|t| {
            let trace = LoopTrace {
                broadcast: vec![false; horizon],
                signals: (0..horizon).map(|k| t.decisions.iter().map(|d| usize::from(d[k])).collect()).collect(),
                actions: (0..horizon)
                    .map(|k| t.repaid.iter().map(|r| f64::from(u8::from(r[k]))).collect())
                    .collect(),
                ..LoopTrace::default()
            };
            let partition = ClassPartition {
                class_of: vec![0; t.race.len()],
                group_of: t.race.clone(),
            };
            check_equal_treatment(&trace, &partition, alpha)
        })
        .collect::<Result<Vec<_>>>()?;
    let present: Vec<usize> = (0..races.len())
        .filter(|r| trials.keys().all(|t| group_series.contains_key(&(*t, *r))))
        .collect();
    let series: Vec<Vec<Vec<f64>>> = trials
        .keys()
        .map(|t| present.iter().map(|r| group_series[&(*t, *r)].clone()).collect())
        .collect();
    let impact = check_group_impact(&series, epsilon)?;

    Ok(Analysis {
        version: VERSION.to_string(),
        config_hash: stamp.config_hash,
        seed: stamp.seed,
        epsilon,
        alpha,
        cross_check: check,
        treatment,
        impact,
    })
}

/// Runs [`analyze`] and writes `analysis.json` next to the inputs.
pub fn analyze_dir(dir: &Path, epsilon: f64, alpha: f64) -> Result<Analysis> {
    let analysis = analyze(dir, epsilon, alpha)?;
    let mut text = serde_json::to_string_pretty(&analysis)?;
    text.push('\n');
    write_atomic(dir, [(ANALYSIS_JSON, text.as_str())])?;
    Ok(analysis)
}
