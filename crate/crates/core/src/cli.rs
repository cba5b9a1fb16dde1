//! Command-line front end; the binary only forwards to [`run`].

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::io::{analyze_dir, ergodicity, parse_starts, simulate, ErgodicityOptions, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "equal-impact", version, about = "Closed-loop fairness simulations and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the credit-scoring experiment and write result files.
    Simulate {
        /// Run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed, overriding the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, overriding the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a Markov system for ergodicity and simulate it from given starts.
    Ergodicity {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        /// `0,1` for scalar starts, `0,0;1,1` for vector starts.
        #[arg(long, default_value = "0")]
        starts: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// State coordinate averaged along trajectories.
        #[arg(long, default_value_t = 0)]
        observable: usize,
        /// Point pairs sampled for the contraction estimate.
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long)]
        json: bool,
    },
    /// Recompute and cross-check a `simulate` output directory.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0.02)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
    },
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    let out_err = |e| Error::io("<stdout>", e);
    match command {
        Command::Simulate { config, seed, out } => {
            let mut cfg = match config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            if let Some(s) = seed {
                cfg.simulation.seed = s;
            }
            let dir = out
                .or_else(|| cfg.paths.output_dir.clone())
                .ok_or_else(|| Error::Config("no output directory: pass --out or set paths.output_dir".into()))?;
            let bundle = simulate(&cfg, &dir)?;
            writeln!(
                stdout,
                "wrote {} files to {} (config_hash={} seed={})",
                bundle.files.len(),
                dir.display(),
                bundle.stamp.config_hash,
                bundle.stamp.seed
            )
            .map_err(out_err)?;
        }
        Command::Ergodicity { spec, steps, starts, seed, observable, pairs, json } => {
            let starts = parse_starts(&starts)?;
            let opts = ErgodicityOptions { steps, seed, observable, pair_samples: pairs };
            let run = ergodicity(&spec, &starts, &opts)?;
            if json {
                writeln!(stdout, "{}", serde_json::to_string_pretty(&run)?).map_err(out_err)?;
            } else {
                let r = &run.report;
                let exponent = r.primitivity_exponent.map_or(String::new(), |m| format!(" (exponent {m})"));
                let exact = if r.contraction_exact { " (exact)" } else { "" };
                let verdict = serde_json::to_value(r.verdict)?;
                let text = format!(
                    "strongly connected: {}\nprimitive: {}{exponent}\ncontraction: estimate {}, bound {}{exact}\nverdict: {}\n",
                    r.strongly_connected,
                    r.primitive,
                    r.contraction_estimate,
                    r.contraction_bound,
                    verdict.as_str().unwrap_or_default()
                );
                write!(stdout, "{text}").map_err(out_err)?;
                for s in &run.starts {
                    writeln!(stdout, "start {:?}: cesaro mean {} after {} steps", s.start, s.cesaro_mean, run.steps)
                        .map_err(out_err)?;
                }
                writeln!(stdout, "cross-start spread: {}", run.cross_start_spread).map_err(out_err)?;
            }
        }
        Command::Analyze { input, epsilon, alpha } => {
            let a = analyze_dir(&input, epsilon, alpha)?;
            let violations: usize = a.treatment.iter().map(|t| t.signal_violations.len()).sum();
            writeln!(
                stdout,
                "cross-check passed: {} user rows, max adr error {}\nsignal violations: {violations}\ngroup spread {} / cross-trial spread {} at epsilon {}: converged={}",
                a.cross_check.user_rows,
                a.cross_check.max_user_adr_error,
                a.impact.group_spread,
                a.impact.initial_condition_spread,
                a.epsilon,
                a.impact.converged
            )
            .map_err(out_err)?;
        }
    }
    Ok(())
}
