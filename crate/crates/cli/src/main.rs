//! `ordstat`: latent order-statistic densities, simulation and cache sizing
//! from the command line.

mod commands;
mod output;
mod selfcheck;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ordstat_core::closed_forms::RayleighFactorForm;
use ordstat_core::distributions::ParentDistribution;
use ordstat_core::order_engine::{LatentSpec, Role};

#[derive(Parser)]
#[command(name = "ordstat", version, about = "Densities of variates observed through the rank of their row sum or product")]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate a latent, order-statistic or limit density on a grid.
    Density(DensityArgs),
    /// Draw latent variates by simulation.
    Sample(SampleArgs),
    /// Simulate and test the draws against the best available density.
    Verify(VerifyArgs),
    /// Large-n limit density at fixed k/n, optionally next to the exact one.
    Asymptotic(AsymptoticArgs),
    /// Expected cache size and byte share of the q most important files.
    Cache(CacheArgs),
    /// Quick run of the invariant suite at reduced trial counts.
    Selfcheck(SelfcheckArgs),
}

/// Comma-separated parent laws, one per column.
#[derive(Debug, Clone)]
pub struct ParentList(pub Vec<ParentDistribution>);

impl FromStr for ParentList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        // Split on commas outside parentheses.
        let mut parts = Vec::new();
        let (mut depth, mut start) = (0i32, 0);
        for (i, c) in s.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    parts.push(&s[start..i]);
                    start = i + 1;
                }
                _ => {}
            }
        }
        parts.push(&s[start..]);
        parts
            .into_iter()
            .map(|p| p.trim().parse::<ParentDistribution>().map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()
            .map(ParentList)
    }
}

fn parse_parent(s: &str) -> Result<ParentDistribution, String> {
    s.parse().map_err(|e: ordstat_core::Error| e.to_string())
}

#[derive(Args, Clone)]
pub struct LawArgs {
    /// Law of every matrix entry, e.g. "normal(0,1)", "exp(1)", "gamma(2,1)".
    #[arg(long, value_parser = parse_parent, required_unless_present = "hetero", conflicts_with = "hetero")]
    pub parent: Option<ParentDistribution>,
    /// One law per column, e.g. "gamma(2,1),uniform(0,1)"; the first column is observed.
    #[arg(long)]
    pub hetero: Option<ParentList>,
}

impl LawArgs {
    /// Column laws for rows of `m` entries.
    pub fn columns(&self, m: usize) -> anyhow::Result<Vec<ParentDistribution>> {
        match (&self.parent, &self.hetero) {
            (Some(p), _) => Ok(vec![*p; m]),
            (None, Some(list)) if list.0.len() == m => Ok(list.0.clone()),
            (None, Some(list)) => Err(ordstat_core::Error::Parameter(format!(
                "--hetero lists {} laws but m = {m}",
                list.0.len()
            ))
            .into()),
            (None, None) => unreachable!("clap requires one of --parent and --hetero"),
        }
    }

    /// Row width: `--m`, else the length of `--hetero`, else 2.
    pub fn width(&self, m: Option<usize>) -> usize {
        m.or(self.hetero.as_ref().map(|h| h.0.len())).unwrap_or(2)
    }
}

#[derive(Args, Clone, Copy)]
pub struct RankArgs {
    /// Rows per trial.
    #[arg(long, default_value_t = 2)]
    pub n: u64,
    /// Rank of the selected row aggregate, 1 = smallest (default: n).
    #[arg(long)]
    pub k: Option<u64>,
    /// Entries per row (default: 2, or the length of --hetero).
    #[arg(long)]
    pub m: Option<usize>,
}

impl RankArgs {
    pub fn spec(&self, role: Role, law: &LawArgs) -> ordstat_core::Result<LatentSpec> {
        LatentSpec::new(self.n, self.k.unwrap_or(self.n), law.width(self.m), role)
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityRole {
    Addend,
    Factor,
    /// Classical k-th order statistic of n draws.
    Orderstat,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoleArg {
    Addend,
    Factor,
}

impl From<RoleArg> for Role {
    fn from(r: RoleArg) -> Self {
        match r {
            RoleArg::Addend => Role::Addend,
            RoleArg::Factor => Role::Factor,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Closed,
    Quadrature,
    Asymptotic,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleFormat {
    /// One decimal value per line.
    Text,
    /// Raw little-endian f64.
    Binary,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RayleighFormArg {
    Derived,
    Tabulated,
}

impl From<RayleighFormArg> for RayleighFactorForm {
    fn from(f: RayleighFormArg) -> Self {
        match f {
            RayleighFormArg::Derived => RayleighFactorForm::Derived,
            RayleighFormArg::Tabulated => RayleighFactorForm::Tabulated,
        }
    }
}

/// Grid `min:max:points`.
#[derive(Debug, Clone, Copy)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [min, max, points] = parts[..] else {
            return Err(format!("expected min:max:points, got {s:?}"));
        };
        let min: f64 = min.trim().parse().map_err(|_| format!("bad grid minimum {min:?}"))?;
        let max: f64 = max.trim().parse().map_err(|_| format!("bad grid maximum {max:?}"))?;
        let points: usize = points.trim().parse().map_err(|_| format!("bad grid point count {points:?}"))?;
        if !(min.is_finite() && max.is_finite() && min < max) || points < 2 {
            return Err(format!("grid needs finite min < max and at least 2 points, got {s:?}"));
        }
        Ok(Self { min, max, points })
    }
}

/// Inclusive range `a:b` or `a:b:step` of cache sizes.
#[derive(Debug, Clone, Copy)]
pub struct QRange {
    pub from: u64,
    pub to: u64,
    pub step: u64,
}

impl FromStr for QRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let nums = s
            .split(':')
            .map(|p| p.trim().parse::<u64>().map_err(|_| format!("bad q range {s:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        let (from, to, step) = match nums[..] {
            [a, b] => (a, b, 1),
            [a, b, c] => (a, b, c),
            _ => return Err(format!("expected a:b or a:b:step, got {s:?}")),
        };
        if from < 1 || from > to || step < 1 {
            return Err(format!("q range needs 1 <= a <= b and step >= 1, got {s:?}"));
        }
        Ok(Self { from, to, step })
    }
}

#[derive(Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub law: LawArgs,
    #[arg(long, value_enum)]
    pub role: DensityRole,
    #[command(flatten)]
    pub rank: RankArgs,
    /// Grid min:max:points (default: 401 points over the central 99.9%).
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    #[arg(long, value_enum, default_value_t = Method::Quadrature)]
    pub method: Method,
    /// Rayleigh factor closed form.
    #[arg(long, value_enum, default_value_t = RayleighFormArg::Derived)]
    pub rayleigh_form: RayleighFormArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub law: LawArgs,
    #[arg(long, value_enum)]
    pub role: RoleArg,
    #[command(flatten)]
    pub rank: RankArgs,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, env = "ORDSTAT_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Column of the selected row to report (0 = latent entry).
    #[arg(long, default_value_t = 0)]
    pub column: usize,
    #[arg(long, value_enum, default_value_t = SampleFormat::Text)]
    pub format: SampleFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub law: LawArgs,
    #[arg(long, value_enum)]
    pub role: RoleArg,
    #[command(flatten)]
    pub rank: RankArgs,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, env = "ORDSTAT_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Equal-probability bins for the histogram statistics.
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    /// KS pass threshold (default: 1% critical value 1.63/sqrt(trials)).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Where to write the JSON report (default: standard output).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Test against this law instead of the latent density.
    #[arg(long, value_parser = parse_parent, hide = true)]
    pub expect: Option<ParentDistribution>,
}

#[derive(Args)]
pub struct AsymptoticArgs {
    #[command(flatten)]
    pub law: LawArgs,
    #[arg(long, value_enum)]
    pub role: RoleArg,
    /// Entries per row (default: 2, or the length of --hetero).
    #[arg(long)]
    pub m: Option<usize>,
    /// Limiting rank fraction k/n.
    #[arg(long, required_unless_present_all = ["n", "k"])]
    pub eta: Option<f64>,
    /// Finite n; with --k sets eta = k/n.
    #[arg(long, requires = "k")]
    pub n: Option<u64>,
    #[arg(long, requires = "n")]
    pub k: Option<u64>,
    /// Also evaluate the exact density at (n, k) and report the L1 gap.
    #[arg(long, requires_all = ["n", "k"], conflicts_with = "grid")]
    pub compare: bool,
    /// Grid min:max:points (default: 401 points over the central 99.9%).
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args)]
pub struct CacheArgs {
    /// Files in the catalogue.
    #[arg(long)]
    pub n: u64,
    /// Number of most important files cached.
    #[arg(long, conflicts_with = "q_range")]
    pub q: Option<u64>,
    /// Cache sizes a:b or a:b:step (default: 1:n).
    #[arg(long)]
    pub q_range: Option<QRange>,
    /// File size law (bits).
    #[arg(long, value_parser = parse_parent, default_value = "gamma(2,1)")]
    pub sizes: ParentDistribution,
    /// Popularity law (requests per second).
    #[arg(long, value_parser = parse_parent, default_value = "uniform(0,1)")]
    pub popularity: ParentDistribution,
    /// Simulated catalogues per cache size (0 = none).
    #[arg(long, default_value_t = 0)]
    pub mc_replications: u64,
    #[arg(long, env = "ORDSTAT_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args)]
pub struct SelfcheckArgs {
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, env = "ORDSTAT_SEED", default_value_t = 1)]
    pub seed: u64,
}

/// Exit status for an error: 2 bad input, 3 no closed form, 4 numeric
/// failure, 5 I/O.
fn exit_code(err: &anyhow::Error) -> u8 {
    use ordstat_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Parse(_) | E::Parameter(_) | E::Domain { .. } => 2,
                E::NoClosedForm(_) => 3,
                _ => 4,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return 5;
        }
    }
    4
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("error: cannot set thread count: {e}");
            return ExitCode::from(4);
        }
    }
    let result = match cli.command {
        Command::Density(a) => commands::density(&a),
        Command::Sample(a) => commands::sample(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Asymptotic(a) => commands::asymptotic(&a),
        Command::Cache(a) => commands::cache(&a),
        Command::Selfcheck(a) => selfcheck::run(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
