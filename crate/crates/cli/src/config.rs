//! Command-line flags and the validated run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use copdiv::{Copula, Divergence, RankScaling};

#[derive(Debug, Parser)]
#[command(name = "copdiv", version, about = "Dual phi-divergence copula estimation and independence tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Estimate theta and the divergence from data
    Fit,
    /// Test independence on data
    Test,
    /// Approximate power of the test at an alternative theta
    Power,
    /// Sample size reaching a target power at an alternative theta
    Samplesize,
    /// Draw pairs from a copula and write them as CSV
    Sample,
    /// Monte Carlo study of the test statistic or the estimator
    Simulate,
}

impl Command {
    pub fn is_stochastic(self) -> bool {
        matches!(self, Command::Sample | Command::Simulate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Text,
}

fn parse_pseudo_mode(s: &str) -> Result<RankScaling, String> {
    match s {
        "divide-by-n-plus-1" => Ok(RankScaling::NPlusOne),
        "divide-by-n" => Ok(RankScaling::N),
        other => other.parse().map_err(|e: copdiv::Error| e.to_string()),
    }
}

#[derive(Debug, Clone, Args)]
pub struct Flags {
    /// Two-column CSV file, optional header row
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// independence, clayton, frank or fgm
    #[arg(long, global = true)]
    pub family: Option<Copula>,
    /// kl, kl-m, chi2, chi2-m or hellinger
    #[arg(long, global = true)]
    pub divergence: Option<Divergence>,
    #[arg(long, global = true, default_value_t = 0.05)]
    pub alpha: f64,
    /// Target power for samplesize
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Copula parameter; repeat once per coordinate
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub theta: Vec<f64>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Generated and printed when omitted
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value_t = 64)]
    pub quad_order: usize,
    /// divide-by-n-plus-1 (n-plus-1) or divide-by-n (n)
    #[arg(long, global = true, default_value = "n-plus-1", value_parser = parse_pseudo_mode)]
    pub pseudo_mode: RankScaling,
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub clamp_eps: f64,
    /// Optimizer tolerance on theta
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    /// Grid cells scanned before local refinement
    #[arg(long, global = true, default_value_t = 16)]
    pub multistart: usize,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
    /// Report file (CSV file for sample); stdout when omitted
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// Resolved configuration, echoed in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: Command,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub data_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub family: Option<Copula>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub divergence: Option<Divergence>,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub theta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub quad_order: usize,
    pub pseudo_mode: RankScaling,
    pub clamp_eps: f64,
    pub tol: f64,
    pub multistart: usize,
    pub output: OutputFormat,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults for every optional flag.
    pub fn new(subcommand: Command) -> Self {
        Self {
            subcommand,
            data_path: None,
            family: None,
            divergence: None,
            alpha: 0.05,
            beta: None,
            theta: Vec::new(),
            n: None,
            reps: None,
            seed: None,
            quad_order: 64,
            pseudo_mode: RankScaling::NPlusOne,
            clamp_eps: 1e-12,
            tol: 1e-8,
            multistart: 16,
            output: OutputFormat::Json,
            out: None,
        }
    }

    pub fn from_cli(cli: Cli) -> Self {
        let f = cli.flags;
        Self {
            subcommand: cli.command,
            data_path: f.data,
            family: f.family,
            divergence: f.divergence,
            alpha: f.alpha,
            beta: f.beta,
            theta: f.theta,
            n: f.n,
            reps: f.reps,
            seed: f.seed,
            quad_order: f.quad_order,
            pseudo_mode: f.pseudo_mode,
            clamp_eps: f.clamp_eps,
            tol: f.tol,
            multistart: f.multistart,
            output: f.output,
            out: f.out,
        }
    }

    /// Checks the flags each subcommand needs, before any computation.
    pub fn validate(&self) -> Result<(), String> {
        use Command::*;
        let cmd = self.subcommand;
        let name = serde_json::to_value(cmd).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        let missing = |flag: &str| format!("{name} requires --{flag}");
        if matches!(cmd, Fit | Test) && self.data_path.is_none() {
            return Err(missing("data"));
        }
        if self.family.is_none() {
            return Err(missing("family"));
        }
        if cmd != Sample && self.divergence.is_none() {
            return Err(missing("divergence"));
        }
        let family = self.family.expect("checked above");
        let needs_theta = match cmd {
            Power | Samplesize => true,
            Sample => family != Copula::Independence,
            Fit | Test | Simulate => false,
        };
        if needs_theta && self.theta.is_empty() {
            return Err(missing("theta"));
        }
        if !self.theta.is_empty() && self.theta.len() != family.dim() {
            return Err(format!(
                "--theta given {} times but the {family} family has {} parameter(s)",
                self.theta.len(),
                family.dim()
            ));
        }
        if matches!(cmd, Power | Sample | Simulate) && self.n.is_none() {
            return Err(missing("n"));
        }
        if cmd == Simulate && self.reps.is_none() {
            return Err(missing("reps"));
        }
        if cmd == Samplesize && self.beta.is_none() {
            return Err(missing("beta"));
        }
        if cmd == Sample && self.out.is_none() {
            return Err(missing("out"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(format!("--alpha must lie in (0, 1), got {}", self.alpha));
        }
        if let Some(beta) = self.beta {
            if !(beta > self.alpha && beta < 1.0) {
                return Err(format!("--beta must lie in (alpha, 1), got {beta}"));
            }
        }
        if let Some(n) = self.n {
            let min = if cmd == Simulate { copdiv::montecarlo::MIN_STUDY_N } else { 2 };
            if n < min {
                return Err(format!("--n must be at least {min}, got {n}"));
            }
        }
        if self.reps == Some(0) {
            return Err("--reps must be at least 1".into());
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err("--theta must be finite".into());
        }
        if self.quad_order == 0 {
            return Err("--quad-order must be at least 1".into());
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps <= 1e-6) {
            return Err(format!("--clamp-eps must lie in (0, 1e-6], got {}", self.clamp_eps));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(format!("--tol must be positive, got {}", self.tol));
        }
        if self.multistart == 0 {
            return Err("--multistart must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, String> {
        let cli = Cli::try_parse_from(std::iter::once("copdiv").chain(args.iter().copied())).map_err(|e| e.to_string())?;
        let cfg = RunConfig::from_cli(cli);
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn defaults_match_the_documented_values() {
        let cfg = parse(&["fit", "--data", "x.csv", "--family", "clayton", "--divergence", "kl-m"]).unwrap();
        let mut expected = RunConfig::new(Command::Fit);
        expected.data_path = Some("x.csv".into());
        expected.family = Some(Copula::Clayton);
        expected.divergence = Some(Divergence::KlM);
        assert_eq!(cfg, expected);
    }

    #[test]
    fn flags_may_precede_the_subcommand_and_take_negative_values() {
        let cfg = parse(&["--family", "frank", "sample", "--theta", "-3.5", "--n", "10", "--out", "o.csv"]).unwrap();
        assert_eq!(cfg.theta, vec![-3.5]);
        let cfg = parse(&["fit", "--data", "d", "--family", "fgm", "--divergence", "chi2", "--pseudo-mode", "divide-by-n"]).unwrap();
        assert_eq!(cfg.pseudo_mode, RankScaling::N);
    }

    #[test]
    fn missing_and_invalid_flags_are_rejected() {
        let cases: &[(&[&str], &str)] = &[
            (&["fit", "--family", "clayton", "--divergence", "kl"], "--data"),
            (&["test", "--data", "d", "--divergence", "kl"], "--family"),
            (&["power", "--family", "clayton", "--divergence", "kl", "--n", "5"], "--theta"),
            (&["power", "--family", "clayton", "--divergence", "kl", "--theta", "1"], "--n"),
            (&["samplesize", "--family", "clayton", "--divergence", "kl", "--theta", "1"], "--beta"),
            (&["simulate", "--family", "clayton", "--divergence", "kl", "--n", "50"], "--reps"),
            (&["sample", "--family", "clayton", "--theta", "1", "--n", "5"], "--out"),
            (&["fit", "--data", "d", "--family", "clayton", "--divergence", "kl", "--alpha", "1.5"], "--alpha"),
            (&["samplesize", "--family", "clayton", "--divergence", "kl", "--theta", "1", "--beta", "0.01"], "--beta"),
            (&["fit", "--data", "d", "--family", "clayton", "--divergence", "kl", "--theta", "1", "--theta", "2"], "--theta"),
            (&["fit", "--data", "d", "--family", "clayton", "--divergence", "kl", "--clamp-eps", "0.1"], "--clamp-eps"),
            (&["simulate", "--family", "clayton", "--divergence", "kl", "--n", "5", "--reps", "2"], "--n"),
        ];
        for (args, flag) in cases {
            let err = parse(args).unwrap_err();
            assert!(err.contains(flag), "{args:?}: {err}");
        }
        assert!(parse(&["fit", "--data", "d", "--family", "gumbel", "--divergence", "kl"]).is_err());
        assert!(parse(&["fit", "--data", "d", "--family", "clayton", "--divergence", "l1"]).is_err());
    }
}
