//! Binned income distributions by year and race.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::numerics::{categorical_unchecked, pick_index, SeededRng};

const HEADER: [&str; 5] = ["year", "race", "bin_lower", "bin_upper", "share"];
const SHARE_TOL: f64 = 1e-6;

/// Synthetic table shipped with the crate, 2002-2020 for three races.
pub const BUNDLED_TABLE: &str = include_str!("../../data/income_synthetic.csv");

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IncomeBin {
    pub lower: f64,
    /// `None` for the open top bin.
    pub upper: Option<f64>,
}

/// Income distribution of one (year, race) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct IncomeDist {
    pub bins: Vec<IncomeBin>,
    /// Shares as read from the table.
    pub shares: Vec<f64>,
    /// Shares rescaled to sum to one.
    weights: Vec<f64>,
}

impl IncomeDist {
    fn upper(&self, b: usize, cap: f64) -> f64 {
        self.bins[b].upper.unwrap_or(cap)
    }

    /// Bin by share, then uniform on `[lower, upper)`; the open top bin is
    /// uniform on `[lower, cap]`.
    pub fn sample(&self, cap: f64, rng: &mut SeededRng) -> f64 {
        let b = categorical_unchecked(&self.weights, rng);
        let lo = self.bins[b].lower;
        rng.uniform_in(lo, self.upper(b, cap))
    }

    /// Inverse of the piecewise-uniform distribution function at `u` in [0, 1).
    pub fn quantile(&self, u: f64, cap: f64) -> f64 {
        let b = pick_index(&self.weights, u);
        let below: f64 = self.weights[..b].iter().sum();
        let frac = ((u - below) / self.weights[b]).clamp(0.0, 1.0);
        let lo = self.bins[b].lower;
        lo + frac * (self.upper(b, cap) - lo)
    }

    pub fn top_lower(&self) -> Option<f64> {
        self.bins.last().filter(|b| b.upper.is_none()).map(|b| b.lower)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IncomeTable {
    cells: BTreeMap<(i32, String), IncomeDist>,
}

#[derive(Deserialize)]
struct Row {
    year: i32,
    race: String,
    bin_lower: f64,
    bin_upper: Option<f64>,
    share: f64,
}

impl IncomeTable {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TABLE).expect("bundled income table is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.iter().ne(HEADER) {
            return Err(Error::Data(format!(
                "income table header must be `{}`, found `{}`",
                HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut cells: BTreeMap<(i32, String), IncomeDist> = BTreeMap::new();
        for rec in reader.deserialize::<Row>() {
            let row = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::Data(format!("line {line}: {e}"))
            })?;
            let at = format!("{} {}", row.year, row.race);
            if !(row.share.is_finite() && row.share >= 0.0) {
                return Err(Error::Data(format!("{at}: invalid share {}", row.share)));
            }
            if !row.bin_lower.is_finite() || row.bin_lower < 0.0 {
                return Err(Error::Data(format!("{at}: invalid bin lower bound {}", row.bin_lower)));
            }
            if let Some(u) = row.bin_upper {
                if !(u.is_finite() && u > row.bin_lower) {
                    return Err(Error::Data(format!("{at}: empty bin [{}, {u})", row.bin_lower)));
                }
            }
            let cell = cells.entry((row.year, row.race)).or_insert_with(|| IncomeDist {
                bins: Vec::new(),
                shares: Vec::new(),
                weights: Vec::new(),
            });
            if let Some(prev) = cell.bins.last() {
                match prev.upper {
                    None => return Err(Error::Data(format!("{at}: bin follows the open top bin"))),
                    Some(u) if row.bin_lower < u => {
                        return Err(Error::Data(format!(
                            "{at}: bins overlap or are unsorted at {}",
                            row.bin_lower
                        )))
                    }
                    _ => {}
                }
            }
            cell.bins.push(IncomeBin {
                lower: row.bin_lower,
                upper: row.bin_upper,
            });
            cell.shares.push(row.share);
        }
        if cells.is_empty() {
            return Err(Error::Data("income table has no rows".into()));
        }
        for ((year, race), cell) in &mut cells {
            let sum: f64 = cell.shares.iter().sum();
            if (sum - 1.0).abs() > SHARE_TOL {
                return Err(Error::Data(format!("{year} {race}: shares sum to {sum}")));
            }
            cell.weights = cell.shares.iter().map(|s| s / sum).collect();
        }
        Ok(IncomeTable { cells })
    }

    pub fn get(&self, year: i32, race: &str) -> Result<&IncomeDist> {
        self.cells
            .get(&(year, race.to_string()))
            .ok_or_else(|| Error::domain(format!("income table has no entry for {year} {race}")))
    }

    /// Fails unless every (year, race) pair is present.
    pub fn check_coverage(&self, years: impl IntoIterator<Item = i32>, races: &[String]) -> Result<()> {
        let missing: Vec<String> = years
            .into_iter()
            .flat_map(|y| races.iter().map(move |r| (y, r)))
            .filter(|(y, r)| !self.cells.contains_key(&(*y, (*r).clone())))
            .map(|(y, r)| format!("{y} {r}"))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Data(format!("income table misses {}", missing.join(", "))))
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = (&(i32, String), &IncomeDist)> {
        self.cells.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "year,race,bin_lower,bin_upper,share\n";

    #[test]
    fn bundled_table_loads() {
        let t = IncomeTable::bundled();
        let races: Vec<String> = ["BLACK ALONE", "WHITE ALONE", "ASIAN ALONE"].map(String::from).into();
        t.check_coverage(2002..=2020, &races).unwrap();
        for (_, cell) in t.cells() {
            assert!((cell.shares.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
            assert_eq!(cell.top_lower(), Some(200.0));
        }
    }

    #[test]
    fn negative_share_rejected() {
        let text = format!("{HEAD}2002,A,0,10,1.1\n2002,A,10,,-0.1\n");
        assert!(matches!(IncomeTable::parse(&text), Err(Error::Data(_))));
    }

    #[test]
    fn schema_errors() {
        assert!(IncomeTable::parse("year,race,lo,hi,share\n").is_err());
        assert!(IncomeTable::parse(&format!("{HEAD}2002,A,0,10,0.5\n2002,A,5,,0.5\n")).is_err());
        assert!(IncomeTable::parse(&format!("{HEAD}2002,A,0,,0.5\n2002,A,5,8,0.5\n")).is_err());
        assert!(IncomeTable::parse(&format!("{HEAD}2002,A,0,10,0.4\n")).is_err());
        assert!(IncomeTable::parse(&format!("{HEAD}2002,A,zero,10,1\n")).is_err());
    }

    #[test]
    fn missing_year_is_coverage_error() {
        let mut text = HEAD.to_string();
        for y in 2002..=2020 {
            for r in ["A", "B"] {
                if !(y == 2010 && r == "B") {
                    text.push_str(&format!("{y},{r},0,,1\n"));
                }
            }
        }
        let t = IncomeTable::parse(&text).unwrap();
        let races = vec!["A".to_string(), "B".to_string()];
        let err = t.check_coverage(2002..=2020, &races).unwrap_err().to_string();
        assert!(err.contains("2010 B"), "{err}");
    }

    #[test]
    fn sampling_examples() {
        let t = IncomeTable::parse(&format!("{HEAD}1,A,50,51,1\n2,A,0,15,1\n2,A,15,30,0\n")).unwrap();
        let mut rng = SeededRng::new(3, 0);
        for _ in 0..1000 {
            let z = t.get(1, "A").unwrap().sample(300.0, &mut rng);
            assert!((50.0..51.0).contains(&z));
            assert!(t.get(2, "A").unwrap().sample(300.0, &mut rng) < 15.0);
        }
        assert!(t.get(3, "A").is_err());
    }

    #[test]
    fn share_frequencies() {
        let t = IncomeTable::parse(&format!("{HEAD}1,A,0,15,0.3\n1,A,15,200,0.7\n")).unwrap();
        let d = t.get(1, "A").unwrap();
        let mut rng = SeededRng::new(5, 1);
        let n = 100_000;
        let below = (0..n).filter(|_| d.sample(300.0, &mut rng) < 15.0).count() as f64 / n as f64;
        assert!((below - 0.3).abs() <= 0.01, "{below}");
    }

    #[test]
    fn open_top_and_quantiles() {
        let t = IncomeTable::parse(&format!("{HEAD}1,A,0,100,0.5\n1,A,200,,0.5\n")).unwrap();
        let d = t.get(1, "A").unwrap();
        let mut rng = SeededRng::new(8, 0);
        for _ in 0..1000 {
            let z = d.sample(300.0, &mut rng);
            assert!((0.0..100.0).contains(&z) || (200.0..=300.0).contains(&z));
        }
        assert_eq!(d.quantile(0.25, 300.0), 50.0);
        assert_eq!(d.quantile(0.75, 300.0), 250.0);
    }
}
