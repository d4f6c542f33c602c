//! `cubicstring <selftest|spectrum|reconstruct|plotdata> [flags]`

mod commands;
mod config;
mod fail;
mod output;
mod selftest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::selftest::Scope;

#[derive(Parser, Debug)]
#[command(name = "cubicstring", version, about = "Spectra and inverse reconstruction for i y''' + q(x) y on [0, l]")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command.
#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Interval length.
    #[arg(long, default_value_t = 1.0)]
    pub l: f64,
    /// phi in theta = exp(2 i phi); overrides the config value.
    #[arg(long = "theta-phi")]
    pub theta_phi: Option<f64>,
    /// phi of the second boundary parameter; overrides the config value.
    #[arg(long = "theta-hat-phi")]
    pub theta_hat_phi: Option<f64>,
    /// Auxiliary boundary parameter h.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long = "n-lo", default_value_t = -20)]
    pub n_lo: i64,
    #[arg(long = "n-hi", default_value_t = 20)]
    pub n_hi: i64,
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output path; a manifest is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `zero`, `cos:a,k`, `gauss:a,x0,w`, `step:a,x0`, or a CSV file of `x,q` rows.
    #[arg(long)]
    pub potential: Option<String>,
}

/// Paths of the four spectral sets.
#[derive(Args, Debug, Clone, Serialize)]
pub struct SetPaths {
    #[arg(long = "theta-set")]
    pub theta: Option<PathBuf>,
    #[arg(long = "theta-hat-set")]
    pub theta_hat: Option<PathBuf>,
    #[arg(long = "theta-h-set")]
    pub theta_h: Option<PathBuf>,
    #[arg(long = "theta-hat-h-set")]
    pub theta_hat_h: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    Sfun,
    Charfun,
    Eigfun,
    Roundtrip,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the invariant suites and print the largest residual of each check.
    #[command(allow_negative_numbers = true)]
    Selftest {
        #[arg(value_enum, default_value = "all")]
        scope: Scope,
        /// Random (z, w) pairs for the identity suite.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Real zeros lambda_n for n_lo <= n <= n_hi; `.json` output writes a spectral set.
    #[command(allow_negative_numbers = true)]
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Potential from four spectral sets.
    #[command(allow_negative_numbers = true)]
    Reconstruct {
        #[command(flatten)]
        sets: SetPaths,
        #[command(flatten)]
        common: Common,
    },
    /// Plottable columns for offline rendering.
    #[command(allow_negative_numbers = true)]
    Plotdata {
        #[arg(value_enum)]
        kind: PlotKind,
        /// Number of samples.
        #[arg(long)]
        points: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print().ok();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Selftest { scope, samples, seed, common } => commands::selftest(scope, samples, seed, &common),
        Command::Spectrum { common } => commands::spectrum(&common),
        Command::Reconstruct { sets, common } => commands::reconstruct(&sets, &common),
        Command::Plotdata { kind, points, common } => commands::plotdata(kind, points, &common),
    };
    if let Err(f) = result {
        eprintln!("{f}");
        std::process::exit(f.code());
    }
}
