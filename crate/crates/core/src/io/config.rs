//! Sectioned key-value run configuration.
//!
//! ```toml
//! [simulation]
//! users = 1000
//! trials = 5
//! seed = 7
//!
//! [paths]
//! income_table = "data/income.csv"   # bundled synthetic table when absent
//! output_dir = "out"
//!
//! [report]
//! epsilon = 0.02
//! bin_width = 0.1
//! alpha = 0.01
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::credit::{IncomeTable, SimConfig, BUNDLED_TABLE};
use crate::error::{Error, Result};
use crate::fairness::{bin_count, DEFAULT_EPSILON};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub income_table: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub markov_spec: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportOptions {
    pub epsilon: f64,
    pub bin_width: f64,
    pub alpha: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            epsilon: DEFAULT_EPSILON,
            bin_width: 0.1,
            alpha: 0.01,
        }
    }
}

impl ReportOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be non-negative, got {}", self.epsilon)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        bin_count(self.bin_width).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub simulation: SimConfig,
    pub paths: Paths,
    pub report: ReportOptions,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.paths.income_table,
            &mut cfg.paths.output_dir,
            &mut cfg.paths.markov_spec,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation.validate()?;
        self.report.validate()?;
        for p in [&self.paths.income_table, &self.paths.markov_spec].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Text of the configured income table, or of the bundled one.
    pub fn income_table_text(&self) -> Result<String> {
        match &self.paths.income_table {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e)),
            None => Ok(BUNDLED_TABLE.to_string()),
        }
    }

    pub fn income_table(&self) -> Result<IncomeTable> {
        let table = IncomeTable::parse(&self.income_table_text()?).map_err(|e| match (&self.paths.income_table, e) {
            (Some(p), Error::Data(m)) => Error::Data(format!("{}: {m}", p.display())),
            (_, e) => e,
        })?;
        self.simulation.check_table(&table)?;
        Ok(table)
    }

    /// SHA-256 over the simulation and report settings plus the income table
    /// contents. Paths do not enter the hash, so moving files or choosing a
    /// different output directory keeps it stable.
    pub fn hash(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Hashed<'a> {
            simulation: &'a SimConfig,
            report: &'a ReportOptions,
            income_table_sha256: String,
        }
        let table = hex::encode(Sha256::digest(self.income_table_text()?.as_bytes()));
        let canonical = serde_json::to_string(&Hashed {
            simulation: &self.simulation,
            report: &self.report,
            income_table_sha256: table,
        })?;
        Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn sections_override() {
        let cfg = RunConfig::parse(
            "[simulation]\nusers = 10\nseed = 3\nincome_mode = \"comonotonic\"\n[report]\nepsilon = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.simulation.users, 10);
        assert_eq!(cfg.simulation.trials, 5);
        assert_eq!(cfg.report.epsilon, 0.5);
        assert_eq!(cfg.report.alpha, 0.01);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        for text in ["[simulation]\nuser = 3\n", "[simulatoin]\n", "[simulation]\nusers = \"many\"\n"] {
            assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn missing_table_rejected() {
        let cfg = RunConfig {
            paths: Paths {
                income_table: Some("/nonexistent/table.csv".into()),
                ..Paths::default()
            },
            ..RunConfig::default()
        };
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn hash_tracks_settings_not_output() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.paths.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.simulation.seed = 1;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }
}
