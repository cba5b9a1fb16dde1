//! Result files written by `simulate`.
//!
//! Every CSV starts with a stamp line `# equal-impact <version> config_hash=<hex> seed=<n>`
//! followed by a fixed header. Floats use the shortest decimal that round-trips
//! and lines end in `\n`, so identical runs give identical bytes.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ReportOptions, RunConfig};
use crate::credit::{ExperimentResult, SimConfig};
use crate::error::{Error, Result};
use crate::fairness::{bin_bounds, check_equal_treatment, density_bins, ImpactReport, TreatmentReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const USERS_CSV: &str = "users.csv";
pub const GROUPS_CSV: &str = "groups.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const DENSITY_CSV: &str = "density.csv";
pub const REPORT_JSON: &str = "report.json";
pub const ANALYSIS_JSON: &str = "analysis.json";

pub const USERS_HEADER: [&str; 9] = ["trial", "k", "year", "user_id", "race", "income", "decision", "repaid", "adr"];
pub const GROUPS_HEADER: [&str; 5] = ["trial", "k", "year", "race", "adr_group"];
pub const SUMMARY_HEADER: [&str; 5] = ["k", "year", "race", "mean_adr", "std_adr"];
pub const DENSITY_HEADER: [&str; 4] = ["k", "bin_lower", "bin_upper", "count"];

/// Identifies the run a file belongs to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunStamp {
    pub config_hash: String,
    pub seed: u64,
}

impl RunStamp {
    pub fn line(&self) -> String {
        format!("# equal-impact {VERSION} config_hash={} seed={}\n", self.config_hash, self.seed)
    }

    /// Parses a stamp line as written by [`RunStamp::line`].
    pub fn parse(line: &str) -> Result<Self> {
        let bad = || Error::Data(format!("missing or malformed run stamp: `{line}`"));
        let rest = line.strip_prefix("# equal-impact ").ok_or_else(bad)?;
        let mut hash = None;
        let mut seed = None;
        for tok in rest.split_whitespace() {
            if let Some(h) = tok.strip_prefix("config_hash=") {
                hash = Some(h.to_string());
            } else if let Some(s) = tok.strip_prefix("seed=") {
                seed = s.parse().ok();
            }
        }
        Ok(RunStamp {
            config_hash: hash.ok_or_else(bad)?,
            seed: seed.ok_or_else(bad)?,
        })
    }
}

/// Shortest round-trip decimal.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub(crate) fn csv_text(
    stamp: &RunStamp,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(stamp.line().into_bytes());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

#[derive(Serialize)]
struct RaceSummary<'a> {
    race: &'a str,
    mean: &'a [f64],
    std: &'a [f64],
}

#[derive(Serialize)]
struct Report<'a> {
    version: &'a str,
    config_hash: &'a str,
    seed: u64,
    simulation: &'a SimConfig,
    report_options: &'a ReportOptions,
    training_sizes: Vec<&'a [usize]>,
    dispersion: Vec<RaceSummary<'a>>,
    impact: ImpactReport,
    treatment: Vec<TreatmentReport>,
}

/// Rendered output files, held in memory until written.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultBundle {
    pub stamp: RunStamp,
    pub files: Vec<(&'static str, String)>,
}

impl ResultBundle {
    pub fn render(cfg: &RunConfig, exp: &ExperimentResult) -> Result<Self> {
        let sim = &cfg.simulation;
        let stamp = RunStamp {
            config_hash: cfg.hash()?,
            seed: sim.seed,
        };
        let year = |k: usize| sim.start_year + k as i32;

        let users = exp.trials.iter().flat_map(|t| {
            (0..t.horizon()).flat_map(move |k| {
                t.households.iter().map(move |h| {
                    vec![
                        t.trial.to_string(),
                        k.to_string(),
                        year(k).to_string(),
                        h.id.to_string(),
                        sim.races[h.race].clone(),
                        fmt_f64(h.income[k]),
                        bit(h.decision[k]).into(),
                        bit(h.repaid[k]).into(),
                        fmt_f64(h.adr[k]),
                    ]
                })
            })
        });
        let users = csv_text(&stamp, &USERS_HEADER, users)?;

        let groups = exp.trials.iter().flat_map(|t| {
            (0..t.horizon()).flat_map(move |k| {
                t.group_adr.iter().enumerate().filter_map(move |(r, s)| {
                    s.as_ref().map(|s| {
                        vec![
                            t.trial.to_string(),
                            k.to_string(),
                            year(k).to_string(),
                            sim.races[r].clone(),
                            fmt_f64(s[k]),
                        ]
                    })
                })
            })
        });
        let groups = csv_text(&stamp, &GROUPS_HEADER, groups)?;

        let summary = (0..sim.horizon()).flat_map(|k| {
            exp.dispersion.iter().enumerate().filter_map(move |(r, d)| {
                d.as_ref().map(|d| {
                    vec![
                        k.to_string(),
                        year(k).to_string(),
                        sim.races[r].clone(),
                        fmt_f64(d.mean[k]),
                        fmt_f64(d.std[k]),
                    ]
                })
            })
        });
        let summary = csv_text(&stamp, &SUMMARY_HEADER, summary)?;

        let width = cfg.report.bin_width;
        let mut density = Vec::new();
        for k in 0..sim.horizon() {
            let values: Vec<f64> = exp
                .trials
                .iter()
                .flat_map(|t| t.households.iter().map(move |h| h.adr[k]))
                .collect();
            for (b, count) in density_bins(&values, width)?.into_iter().enumerate() {
                let (lo, hi) = bin_bounds(width, b);
                density.push(vec![k.to_string(), fmt_f64(lo), fmt_f64(hi), count.to_string()]);
            }
        }
        let density = csv_text(&stamp, &DENSITY_HEADER, density)?;

        let treatment = exp
            .trials
            .iter()
            .map(|t| check_equal_treatment(&t.to_loop_trace(), &t.partition(), cfg.report.alpha))
            .collect::<Result<Vec<_>>>()?;
        let report = Report {
            version: VERSION,
            config_hash: &stamp.config_hash,
            seed: stamp.seed,
            simulation: sim,
            report_options: &cfg.report,
            training_sizes: exp.trials.iter().map(|t| t.training_sizes.as_slice()).collect(),
            dispersion: exp
                .dispersion
                .iter()
                .zip(&sim.races)
                .filter_map(|(d, race)| {
                    d.as_ref().map(|d| RaceSummary {
                        race,
                        mean: &d.mean,
                        std: &d.std,
                    })
                })
                .collect(),
            impact: ExperimentResult::impact(&exp.trials, cfg.report.epsilon)?,
            treatment,
        };
        let mut report = serde_json::to_string_pretty(&report)?;
        report.push('\n');

        Ok(ResultBundle {
            stamp,
            files: vec![
                (USERS_CSV, users),
                (GROUPS_CSV, groups),
                (SUMMARY_CSV, summary),
                (DENSITY_CSV, density),
                (REPORT_JSON, report),
            ],
        })
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| *n == name).map(|(_, t)| t.as_str())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(dir, self.files.iter().map(|(n, t)| (*n, t.as_str())))
    }
}

/// Writes every file to a hidden temporary name first and renames only once
/// all writes succeeded; on failure the temporaries are removed.
pub fn write_atomic<'a>(dir: &Path, files: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    let cleanup = |staged: &[(PathBuf, PathBuf)]| {
        for (tmp, _) in staged {
            let _ = std::fs::remove_file(tmp);
        }
    };
    for (name, text) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = std::fs::write(&tmp, text) {
            cleanup(&staged);
            let _ = std::fs::remove_file(&tmp);
            return Err(Error::io(&tmp, e));
        }
        staged.push((tmp, dir.join(name)));
    }
    for (i, (tmp, dst)) in staged.iter().enumerate() {
        if let Err(e) = std::fs::rename(tmp, dst) {
            cleanup(&staged[i..]);
            return Err(Error::io(dst, e));
        }
    }
    Ok(())
}
