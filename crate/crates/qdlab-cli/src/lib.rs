//! Batch driver: one subcommand per library operation, JSON configs, JSON/CSV reports.

use std::fmt::Write as _;
use std::path::Path;

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use qdlab::decay::{self, DecayMode, EFilter, ProbePlan};
use qdlab::dioph::{self, Method, SimplexHull};
use qdlab::flags::{self, KappaRule};
use qdlab::geometry::{Ball, Norm};
use qdlab::homdyn::{self, SChain};
use qdlab::measures::MeasureSpec;
use qdlab::plucker::{self, AffineSubspaceOfE};
use qdlab::poly::{Poly, TermSpec};
use qdlab::rational::{fmt_q, parse_count, parse_q, to_f64};
use qdlab::{suites, Error, Q};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Track {
    Exact,
    Float,
}

/// Measure given inline as JSON (string on the command line, object in a config).
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MeasureArg(pub MeasureSpec);

impl std::str::FromStr for MeasureArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        MeasureSpec::from_json(s).map(MeasureArg).map_err(|e| e.to_string())
    }
}

impl<'de> Deserialize<'de> for MeasureArg {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            v => MeasureSpec::deserialize(v).map(MeasureArg).map_err(serde::de::Error::custom),
        }
    }
}

fn parse_mode(s: &str) -> Result<DecayMode, String> {
    serde_json::from_value(json!(s)).map_err(|e| e.to_string())
}

fn lebesgue(d: usize) -> MeasureArg {
    MeasureArg(MeasureSpec::Lebesgue { d })
}

fn s(v: &str) -> String {
    v.to_string()
}

fn default_rhos() -> Vec<String> {
    vec![s("1/3"), s("1/9"), s("1/27")]
}

fn default_betas() -> Vec<String> {
    (1..=8).map(|k| format!("1/{}", 3u64.pow(k))).collect()
}

macro_rules! d {
    ($name:ident, $t:ty, $v:expr) => {
        fn $name() -> $t {
            $v
        }
    };
}

d!(d_qmax4, String, s("1e4"));
d!(d_qmax6, String, s("1e6"));
d!(d_two, usize, 2);
d!(d_one, usize, 1);
d!(d_trials50, usize, 50);
d!(d_trials100, usize, 100);
d!(d_den16, i64, 16);
d!(d_k3, i64, 3);
d!(d_k8, i64, 8);
d!(d_h2, i64, 2);
d!(d_h1, i64, 1);
d!(d_tau20, u32, 20);
d!(d_tau30, u32, 30);
d!(d_tau12, u32, 12);
d!(d_tau8, u32, 8);
d!(d_dims12, Vec<usize>, vec![1, 2]);
d!(d_budget, usize, 1_000_000);
d!(d_third, String, s("1/3"));
d!(d_kmin, i32, 1);
d!(d_kmax, i32, 12);
d!(d_kfed, String, s("3"));
d!(d_centers, usize, 20);
d!(d_gamma1, String, s("1"));
d!(d_gamma_half, String, s("1/2"));
d!(d_samples256, usize, 256);
d!(d_samples500, usize, 500);
d!(d_samples1e4, usize, 10_000);
d!(d_nmax4, u32, 4);
d!(d_nmax5, u32, 5);
d!(d_one_s, String, s("1"));
d!(d_half_s, String, s("1/2"));
d!(d_eps1, String, s("1"));
d!(d_beta, String, s("1/1000"));
d!(d_grid, String, s("1/100"));
d!(d_tau2, u32, 2);
d!(d_tau14, u32, 14);
d!(d_leb2, MeasureArg, lebesgue(2));
d!(d_leb1, MeasureArg, lebesgue(1));
d!(d_center_half, Vec<String>, vec![s("1/2")]);
d!(d_kappa, KappaRule, KappaRule::Constant { kappa: s("1") });
d!(d_mode, DecayMode, DecayMode::Quasi);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ExponentArgs {
    /// Vector entries (exact decimals or fractions).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default)]
    pub x: Vec<String>,
    /// Matrix as `a,b;c,d` (rows separated by `;`).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default)]
    pub matrix: Option<String>,
    #[arg(long, default_value = "1e4")]
    #[serde(default = "d_qmax4")]
    pub qmax: String,
    /// Continued fractions (scalars only).
    #[arg(long)]
    #[serde(default)]
    pub cf: bool,
    /// Exhaustive search instead of lattice reduction.
    #[arg(long)]
    #[serde(default)]
    pub brute: bool,
    /// Multiplicative exponent.
    #[arg(long)]
    #[serde(default)]
    pub mult: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct VerifyPluckerArgs {
    #[arg(long, default_value_t = 2)]
    #[serde(default = "d_two")]
    pub m: usize,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "d_two")]
    pub n: usize,
    /// Draw `(M, N)` uniformly from `{1,..,m} × {1,..,n}`.
    #[arg(long)]
    #[serde(default)]
    pub mixed: bool,
    #[arg(long, default_value_t = 50)]
    #[serde(default = "d_trials50")]
    pub trials: usize,
    #[arg(long, default_value_t = 16)]
    #[serde(default = "d_den16")]
    pub max_den: i64,
    #[arg(long, default_value_t = 3)]
    #[serde(default = "d_k3")]
    pub max_k: i64,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "d_h2")]
    pub height: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub matrix: String,
    #[arg(long, default_value_t = 20)]
    #[serde(default = "d_tau20")]
    pub tau_max: u32,
    /// Exact dyadic ray `τ = kMN ln 2` instead of integer `τ`.
    #[arg(long)]
    #[serde(default)]
    pub dyadic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct CorrespondenceArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub matrix: String,
    #[arg(long, default_value = "1e6")]
    #[serde(default = "d_qmax6")]
    pub qmax: String,
    #[arg(long, default_value_t = 30)]
    #[serde(default = "d_tau30")]
    pub tau_max: u32,
    /// Fail when the discrepancy exceeds this.
    #[arg(long)]
    #[serde(default)]
    pub tolerance: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct VwmaArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub matrix: String,
    #[arg(long, default_value_t = 12)]
    #[serde(default = "d_tau12")]
    pub tau_max: u32,
    #[arg(long)]
    #[serde(default)]
    pub euclidean: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct AffineArgs {
    #[arg(long, default_value_t = 1)]
    #[serde(default = "d_one")]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "d_one")]
    pub n: usize,
    /// Base point in `ℰ` coordinates; the whole space when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default)]
    pub point: Vec<String>,
    /// Direction vectors as `a,b;c,d`.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default)]
    pub directions: Option<String>,
    /// Also compare with this matrix (its image must lie in the subspace).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default)]
    pub matrix: Option<String>,
    #[arg(long, default_value_t = 8)]
    #[serde(default = "d_tau8")]
    pub tau_max: u32,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "d_h1")]
    pub height: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SimplexArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y: Vec<String>,
    #[arg(long)]
    pub rho: String,
    #[arg(long)]
    #[serde(default)]
    pub eps: Option<String>,
    /// Height bound overriding `ε_d ρ^{−d/(d+1)}`.
    #[arg(long)]
    #[serde(default)]
    pub qmax: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SimplexSuiteArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 2])]
    #[serde(default = "d_dims12")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    #[serde(default = "d_trials100")]
    pub trials: usize,
    #[arg(long, default_value_t = 8)]
    #[serde(default = "d_k8")]
    pub max_k: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct VerticesArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "d_h1")]
    pub height: i64,
    #[arg(long, default_value_t = 1_000_000)]
    #[serde(default = "d_budget")]
    pub budget: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct LocalDimArgs {
    #[arg(long)]
    pub measure: MeasureArg,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Vec<String>,
    /// Scales `base^k` for `k_min ≤ k ≤ k_max`.
    #[arg(long, default_value = "1/3")]
    #[serde(default = "d_third")]
    pub base: String,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "d_kmin")]
    pub k_min: i32,
    #[arg(long, default_value_t = 12)]
    #[serde(default = "d_kmax")]
    pub k_max: i32,
    #[arg(long)]
    #[serde(default)]
    pub euclidean: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct FedererArgs {
    #[arg(long)]
    pub measure: MeasureArg,
    #[arg(long, default_value = "3")]
    #[serde(default = "d_kfed")]
    pub k: String,
    #[arg(long, default_value_t = 20)]
    #[serde(default = "d_centers")]
    pub centers: usize,
    #[arg(long, default_value = "1/3")]
    #[serde(default = "d_third")]
    pub base: String,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "d_kmin")]
    pub k_min: i32,
    #[arg(long, default_value_t = 12)]
    #[serde(default = "d_kmax")]
    pub k_max: i32,
    /// Also run the quasi-Federer check with this `ε`.
    #[arg(long)]
    #[serde(default)]
    pub eps: Option<String>,
    #[arg(long)]
    #[serde(default)]
    pub delta: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct DecayProfileArgs {
    #[arg(long, default_value = r#"{"kind":"lebesgue","d":2}"#)]
    #[serde(default = "d_leb2")]
    pub measure: MeasureArg,
    /// absolute, quasi, decaying or weak_quasi.
    #[arg(long, value_parser = parse_mode, default_value = "quasi")]
    #[serde(default = "d_mode")]
    pub mode: DecayMode,
    #[arg(long, default_value = "1")]
    #[serde(default = "d_gamma1")]
    pub gamma: String,
    #[arg(long, default_value_t = 20)]
    #[serde(default = "d_centers")]
    pub centers: usize,
    #[arg(long, value_delimiter = ',', default_values_t = default_rhos())]
    #[serde(default = "default_rhos")]
    pub rhos: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = default_betas())]
    #[serde(default = "default_betas")]
    pub betas: Vec<String>,
    #[arg(long, default_value_t = 256)]
    #[serde(default = "d_samples256")]
    pub samples_per_ball: usize,
    #[arg(long)]
    #[serde(default)]
    pub euclidean: bool,
    /// Center filter (config files only).
    #[arg(skip)]
    #[serde(default)]
    pub filter: EFilter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct CoverArgs {
    /// Terms as JSON: `[{"coeff":"1","exp":[1,1]}]`.
    #[arg(long)]
    pub poly: TermList,
    #[arg(long)]
    pub nvars: usize,
    #[arg(long)]
    pub ell: usize,
    #[arg(long, default_value = "1")]
    #[serde(default = "d_eps1")]
    pub eps: String,
    #[arg(long, default_value = "1/1000")]
    #[serde(default = "d_beta")]
    pub beta: String,
    #[arg(long, default_value = "1/100")]
    #[serde(default = "d_grid")]
    pub grid: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TermList(pub Vec<TermSpec>);

impl std::str::FromStr for TermList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_str(s).map(TermList).map_err(|e| e.to_string())
    }
}

impl<'de> Deserialize<'de> for TermList {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            v => Vec::<TermSpec>::deserialize(v).map(TermList).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SimplexSumArgs {
    #[arg(long, default_value = r#"{"kind":"lebesgue","d":1}"#)]
    #[serde(default = "d_leb1")]
    pub measure: MeasureArg,
    #[arg(long, default_value = "1")]
    #[serde(default = "d_gamma1")]
    pub gamma: String,
    #[arg(long, default_value = "1")]
    #[serde(default = "d_one_s")]
    pub alpha: String,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "d_two")]
    pub h: usize,
    #[arg(long, default_value_t = 4)]
    #[serde(default = "d_nmax4")]
    pub n_max: u32,
    #[arg(long, default_value_t = 500)]
    #[serde(default = "d_samples500")]
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SpikeSearchArgs {
    #[arg(long, default_value_t = 5)]
    #[serde(default = "d_nmax5")]
    pub n_max: u32,
    #[arg(long, default_value = "1")]
    #[serde(default = "d_one_s")]
    pub c: String,
    #[arg(long, default_value = "1/2")]
    #[serde(default = "d_half_s")]
    pub alpha: String,
    #[arg(long, default_value = "1")]
    #[serde(default = "d_one_s")]
    pub rho0: String,
    #[arg(long, default_value = "1/2")]
    #[serde(default = "d_half_s")]
    pub x: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct FlagSuiteArgs {
    #[arg(long, default_value_t = 50)]
    #[serde(default = "d_trials50")]
    pub trials: usize,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "d_h2")]
    pub height: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct MeasureDecayArgs {
    #[arg(long, default_value = r#"{"kind":"lebesgue","d":1}"#)]
    #[serde(default = "d_leb1")]
    pub measure: MeasureArg,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "d_one")]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "d_one")]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_values_t = d_center_half())]
    #[serde(default = "d_center_half")]
    pub center: Vec<String>,
    #[arg(long, default_value = "1/2")]
    #[serde(default = "d_half_s")]
    pub radius: String,
    #[arg(long, default_value = "1/2")]
    #[serde(default = "d_gamma_half")]
    pub gamma: String,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "d_tau2")]
    pub tau_min: u32,
    #[arg(long, default_value_t = 14)]
    #[serde(default = "d_tau14")]
    pub tau_max: u32,
    #[arg(long, default_value_t = 10_000)]
    #[serde(default = "d_samples1e4")]
    pub samples: usize,
    /// `κ_t` rule (config files only; the default is `κ = 1`).
    #[arg(skip = d_kappa())]
    #[serde(default = "d_kappa")]
    pub kappa: KappaRule,
}

/// One variant per operation. Config files use `{"subcommand": name, "params": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Subcommand)]
#[serde(tag = "subcommand", content = "params", rename_all = "kebab-case")]
pub enum Command {
    /// Exponent of approximation of a vector or matrix.
    Exponent(ExponentArgs),
    /// Exact covolume/Plücker identity on random instances.
    VerifyPlucker(VerifyPluckerArgs),
    /// Cusp excursion `Δ` along the diagonal ray.
    Trajectory(TrajectoryArgs),
    /// Direct exponent against the dynamical one.
    Correspondence(CorrespondenceArgs),
    /// Multiplicative score over cone directions.
    VwmaScore(VwmaArgs),
    /// Exponent of an affine subspace, optionally compared with a matrix in it.
    AffineExponent(AffineArgs),
    /// Rational points of bounded height in a ball and their affine hull.
    Simplex(SimplexArgs),
    /// Simplex lemma on random balls.
    SimplexSuite(SimplexSuiteArgs),
    /// Rational subspaces of bounded height.
    Vertices(VerticesArgs),
    /// Local dimension by log-log regression.
    LocalDim(LocalDimArgs),
    /// Federer (doubling) ratios and the quasi-Federer check.
    Federer(FedererArgs),
    /// Adversarial hyperplane decay profile.
    DecayProfile(DecayProfileArgs),
    /// Cover of a polynomial sublevel set by slabs.
    CoverSublevel(CoverArgs),
    /// Simplex covering sum.
    SimplexSum(SimplexSumArgs),
    /// Witness search in the spike measure.
    SpikeSearch(SpikeSearchArgs),
    /// Flag-machine checks on random instances.
    FlagSuite(FlagSuiteArgs),
    /// Hit fraction of `W_{κ,t}` along the ray.
    MeasureDecay(MeasureDecayArgs),
}

impl Command {
    pub fn name(&self) -> String {
        match serde_json::to_value(self) {
            Ok(Value::Object(m)) => m.get("subcommand").and_then(|v| v.as_str()).unwrap_or("").to_string(),
            _ => String::new(),
        }
    }

    fn native_track(&self) -> Track {
        match self {
            Command::LocalDim(_)
            | Command::Federer(_)
            | Command::DecayProfile(_)
            | Command::CoverSublevel(_)
            | Command::SimplexSum(_)
            | Command::MeasureDecay(_)
            | Command::VwmaScore(_)
            | Command::Trajectory(_) => Track::Float,
            _ => Track::Exact,
        }
    }
}

/// Full run description.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub command: Command,
    pub seed: u64,
    pub track: Option<Track>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    subcommand: String,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    track: Option<Track>,
    #[serde(default)]
    params: Option<Value>,
}

impl ExperimentConfig {
    /// Parse a config document; `seed` falls back to `default_seed`.
    pub fn from_json(text: &str, default_seed: u64) -> Result<Self, Error> {
        let raw: ConfigFile = serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        let params = raw.params.unwrap_or_else(|| json!({}));
        let command: Command = serde_json::from_value(json!({"subcommand": raw.subcommand, "params": params}))
            .map_err(|e| Error::invalid(format!("config params for `{}`: {e}", raw.subcommand)))?;
        Ok(ExperimentConfig { command, seed: raw.seed.unwrap_or(default_seed), track: raw.track })
    }
}

/// A table written as one CSV file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Series {
    fn new(name: &str, headers: &[&str]) -> Self {
        Series { name: name.into(), headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| if c.contains(',') { format!("\"{c}\"") } else { c.clone() }).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

/// Deterministic part of a report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportBody {
    pub schema_version: u32,
    pub version: String,
    pub config: ExperimentConfig,
    /// All assertions of the operation passed.
    pub passed: bool,
    pub results: Value,
    pub warnings: Vec<String>,
    pub series: Vec<Series>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub body: ReportBody,
    pub wall_clock_s: f64,
}

impl RunReport {
    /// Canonical serialization of the body, used for determinism checks.
    pub fn body_json(&self) -> String {
        serde_json::to_string(&self.body).expect("report serializes")
    }
}

/// Outcome of a subcommand before wrapping.
struct Outcome {
    passed: bool,
    results: Value,
    warnings: Vec<String>,
    series: Vec<Series>,
}

impl Outcome {
    fn new(results: Value) -> Self {
        Outcome { passed: true, results, warnings: Vec::new(), series: Vec::new() }
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, Error> {
    serde_json::to_value(v).map_err(|e| Error::invalid(format!("serialization: {e}")))
}

fn q(s: &str) -> Result<Q, Error> {
    parse_q(s)
}

fn qf(s: &str) -> Result<f64, Error> {
    Ok(to_f64(&parse_q(s)?))
}

fn qvec(v: &[String]) -> Result<Vec<Q>, Error> {
    v.iter().map(|s| parse_q(s.trim())).collect()
}

/// `"a,b;c,d"` as rows.
pub fn parse_matrix(s: &str) -> Result<Vec<Vec<Q>>, Error> {
    let rows: Vec<Vec<Q>> = s
        .split(';')
        .map(|r| r.split(',').map(|c| parse_q(c.trim())).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    if rows.is_empty() || rows[0].is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::invalid("matrix rows must be nonempty and of equal length"));
    }
    Ok(rows)
}

fn exponent_outcome(e: &dioph::ExponentEstimate) -> Result<Outcome, Error> {
    let mut o = Outcome::new(to_value(e)?);
    if e.lower_bound_flag {
        o.warnings.push("search was not exhaustive: the exponent is a lower bound".into());
    }
    if e.is_infinite() {
        o.warnings.push("exact rational solution found: the exponent is infinite".into());
    }
    let mut s = Series::new("records", &["height", "error", "exponent"]);
    for r in &e.records {
        s.push(vec![r.height.to_string(), num(r.error), num(r.exponent)]);
    }
    o.series.push(s);
    Ok(o)
}

fn scales(base: &str, k_min: i32, k_max: i32) -> Result<Vec<f64>, Error> {
    if k_min > k_max {
        return Err(Error::invalid("k_min exceeds k_max"));
    }
    Ok(decay::geometric_grid(qf(base)?, k_min, k_max))
}

fn run_command(cmd: &Command, seed: u64) -> Result<Outcome, Error> {
    match cmd {
        Command::Exponent(a) => {
            let qmax = parse_count(&a.qmax)?;
            let e = match (&a.matrix, a.x.is_empty()) {
                (Some(_), false) => return Err(Error::invalid("give either x or matrix")),
                (Some(m), true) => {
                    let m = parse_matrix(m)?;
                    if a.mult {
                        dioph::omega_mult_matrix(&m, qmax)?
                    } else {
                        dioph::omega_matrix(&m, qmax)?
                    }
                }
                (None, false) => {
                    let x = qvec(&a.x)?;
                    let method = if a.cf {
                        Method::Cf
                    } else if a.brute {
                        Method::Brute
                    } else {
                        Method::Lattice
                    };
                    if a.mult {
                        dioph::omega_mult_vector(&x, qmax)?
                    } else {
                        dioph::omega_vector(&x, qmax, method)?
                    }
                }
                (None, true) => return Err(Error::invalid("give x or matrix")),
            };
            exponent_outcome(&e)
        }
        Command::VerifyPlucker(a) => {
            let shapes: Vec<(usize, usize)> = if a.mixed {
                (1..=a.m).flat_map(|m| (1..=a.n).map(move |n| (m, n))).collect()
            } else {
                vec![(a.m, a.n)]
            };
            let suite = suites::plucker_suite(&shapes, a.trials, a.max_den, a.max_k, a.height as i128, seed)?;
            let mut o = Outcome::new(to_value(&suite)?);
            o.passed = suite.passes == suite.trials;
            let mut s = Series::new("cases", &["index", "m", "n", "dim_v", "covolume_sq", "holds"]);
            for (i, c) in suite.cases.iter().enumerate() {
                s.push(vec![i.to_string(), c.m.to_string(), c.n.to_string(), c.vertex.dim().to_string(), fmt_q(&c.covolume_sq), c.holds.to_string()]);
            }
            o.series.push(s);
            Ok(o)
        }
        Command::Trajectory(a) => {
            let m = parse_matrix(&a.matrix)?;
            let (mm, nn) = (m.len(), m[0].len());
            let chain = if a.dyadic { SChain::s0_dyadic_ray(mm, nn, a.tau_max) } else { SChain::s0_integer_ray(mm, nn, a.tau_max)? };
            let e = homdyn::omega_dynamical(&m, &chain)?;
            let mut o = Outcome::new(to_value(&e)?);
            if !e.skipped.is_empty() {
                o.warnings.push(format!("shortest vector unavailable at chain indices {:?}", e.skipped));
            }
            let mut s = Series::new("trajectory", &["tau", "delta", "delta_over_s"]);
            for p in &e.trajectory {
                s.push(vec![num(p.s), num(p.delta), num(p.ratio)]);
            }
            o.series.push(s);
            Ok(o)
        }
        Command::Correspondence(a) => {
            let m = parse_matrix(&a.matrix)?;
            let chain = SChain::s0_integer_ray(m.len(), m[0].len(), a.tau_max)?;
            let c = homdyn::correspondence_check(&m, parse_count(&a.qmax)?, &chain)?;
            let mut o = Outcome::new(to_value(&c)?);
            if let Some(t) = &a.tolerance {
                o.passed = c.discrepancy <= qf(t)?;
            }
            if c.direct.lower_bound_flag {
                o.warnings.push("direct search was not exhaustive".into());
            }
            let mut s = Series::new("trajectory", &["tau", "delta", "delta_over_s"]);
            for p in &c.dynamical.trajectory {
                s.push(vec![num(p.s), num(p.delta), num(p.ratio)]);
            }
            o.series.push(s);
            Ok(o)
        }
        Command::VwmaScore(a) => {
            let m = parse_matrix(&a.matrix)?;
            let norm = if a.euclidean { Norm::Euclidean } else { Norm::Sup };
            let v = homdyn::vwma_score(&m, a.tau_max, norm)?;
            let mut o = Outcome::new(to_value(&v)?);
            let mut s = Series::new("directions", &["a", "b", "value", "divergent"]);
            for d in &v.per_direction {
                let f = |w: &[f64]| w.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ");
                s.push(vec![f(&d.a), f(&d.b), num(d.value), d.divergent.to_string()]);
            }
            o.series.push(s);
            Ok(o)
        }
        Command::AffineExponent(a) => {
            let asub = if a.point.is_empty() {
                if a.directions.is_some() {
                    return Err(Error::invalid("directions need a base point"));
                }
                AffineSubspaceOfE::whole(a.m, a.n)
            } else {
                let dirs = match &a.directions {
                    Some(d) => parse_matrix(d)?,
                    None => Vec::new(),
                };
                AffineSubspaceOfE::new(a.m, a.n, qvec(&a.point)?, dirs)?
            };
            let chain = SChain::s0_integer_ray(a.m, a.n, a.tau_max)?;
            match &a.matrix {
                Some(mat) => {
                    let m = parse_matrix(mat)?;
                    let r = plucker::check_affine_comparison(&m, &asub, &chain, a.height as i128)?;
                    let mut o = Outcome::new(to_value(&r)?);
                    o.passed = r.holds;
                    Ok(o)
                }
                None => {
                    let e = plucker::omega_affine(&asub, &chain, a.height as i128)?;
                    let mut o = Outcome::new(to_value(&e)?);
                    let mut s = Series::new("inner", &["s", "inner"]);
                    for p in &e.points {
                        s.push(vec![num(p.s), num(p.inner)]);
                    }
                    o.series.push(s);
                    Ok(o)
                }
            }
        }
        Command::Simplex(a) => {
            let y = qvec(&a.y)?;
            let rho = q(&a.rho)?;
            let r = match (&a.qmax, &a.eps) {
                (Some(_), Some(_)) => return Err(Error::invalid("give eps or qmax, not both")),
                (Some(qm), None) => dioph::simplex_hyperplane_with_q(&y, &rho, parse_count(qm)?)?,
                (None, e) => dioph::simplex_hyperplane(&y, &rho, e.as_deref().map(qf).transpose()?)?,
            };
            let hull = match &r.hull {
                SimplexHull::Empty => json!({"kind": "empty"}),
                SimplexHull::Point(p) => json!({"kind": "point", "point": p.iter().map(fmt_q).collect::<Vec<_>>()}),
                SimplexHull::Hyperplane(h) => json!({
                    "kind": "hyperplane",
                    "normal": h.normal.iter().map(fmt_q).collect::<Vec<_>>(),
                    "offset": fmt_q(&h.offset),
                }),
            };
            let pts: Vec<Vec<String>> = r.points.iter().map(|p| p.iter().map(fmt_q).collect()).collect();
            Ok(Outcome::new(json!({"q": r.q, "points": pts, "hull": hull})))
        }
        Command::SimplexSuite(a) => {
            let suite = suites::simplex_suite(&a.dims, a.trials, a.max_k, seed)?;
            let mut o = Outcome::new(to_value(&suite)?);
            o.passed = suite.passes == suite.trials;
            Ok(o)
        }
        Command::Vertices(a) => {
            let vs = plucker::enumerate_vertices(a.n, a.height as i128, a.budget)?;
            let mut s = Series::new("vertices", &["dim", "height", "basis"]);
            for v in &vs {
                let h = v.basis.iter().flatten().map(|x| x.abs()).max().unwrap_or(0);
                let b: Vec<String> = v.basis.iter().map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")).collect();
                s.push(vec![v.dim().to_string(), h.to_string(), b.join(";")]);
            }
            let mut o = Outcome::new(json!({"count": vs.len(), "vertices": to_value(&vs)?}));
            o.series.push(s);
            Ok(o)
        }
        Command::LocalDim(a) => {
            let mu = a.measure.0.build()?;
            let x: Vec<f64> = qvec(&a.x)?.iter().map(to_f64).collect();
            let norm = if a.euclidean { Norm::Euclidean } else { Norm::Sup };
            let l = decay::local_dimension(mu.as_ref(), &x, &scales(&a.base, a.k_min, a.k_max)?, norm)?;
            let mut o = Outcome::new(to_value(&l)?);
            if !l.dropped.is_empty() {
                o.warnings.push(format!("{} scales dropped: mass bracket reaches zero", l.dropped.len()));
            }
            let mut s = Series::new("masses", &["log_rho", "log_mass_lo", "log_mass_hi"]);
            for sc in &l.scales {
                s.push(vec![num(sc.rho.ln()), num(sc.lo.ln()), num(sc.hi.ln())]);
            }
            o.series.push(s);
            Ok(o)
        }
        Command::Federer(a) => {
            let mu = a.measure.0.build()?;
            let probes = decay::probe_pairs(mu.as_ref(), a.centers, &scales(&a.base, a.k_min, a.k_max)?, seed)?;
            let fed = decay::federer_ratio(mu.as_ref(), qf(&a.k)?, &probes, Norm::Sup)?;
            let mut o = Outcome::new(json!({"federer": to_value(&fed)?}));
            if fed.skipped > 0 {
                o.warnings.push(format!("{} probes skipped: inner ball carries no visible mass", fed.skipped));
            }
            if let Some(eps) = &a.eps {
                let delta = a.delta.as_deref().map(qf).transpose()?;
                let qfc = decay::quasi_federer_check(mu.as_ref(), qf(eps)?, delta, &probes, Norm::Sup)?;
                o.passed = qfc.holds;
                o.results["quasi_federer"] = to_value(&qfc)?;
                let mut s = Series::new("quasi_federer", &["decade", "sup_ratio"]);
                for (d, r) in &qfc.decades {
                    s.push(vec![d.to_string(), num(*r)]);
                }
                o.series.push(s);
            }
            Ok(o)
        }
        Command::DecayProfile(a) => {
            let mu = a.measure.0.build()?;
            let plan = ProbePlan {
                centers: a.centers,
                rhos: a.rhos.iter().map(|r| qf(r)).collect::<Result<_, _>>()?,
                betas: a.betas.iter().map(|b| qf(b)).collect::<Result<_, _>>()?,
                samples_per_ball: a.samples_per_ball,
                euclidean: a.euclidean,
            };
            let fit = decay::decay_profile(mu.as_ref(), a.mode, qf(&a.gamma)?, &a.filter, &plan, seed)?;
            let mut o = Outcome::new(to_value(&fit)?);
            o.warnings.push(fit.verdict.clone());
            if fit.skipped > 0 {
                o.warnings.push(format!("{} probes dropped as degenerate", fit.skipped));
            }
            let mut p = Series::new("probes", &["log_beta", "log_ratio", "log_rho"]);
            for pr in &fit.probes {
                p.push(vec![num(pr.beta.ln()), num(pr.ratio.ln()), num(pr.rho.ln())]);
            }
            let mut e = Series::new("envelope", &["log_beta", "log_max_ratio"]);
            for (b, r) in &fit.envelope {
                e.push(vec![num(b.ln()), num(r.ln())]);
            }
            o.series.extend([p, e]);
            Ok(o)
        }
        Command::CoverSublevel(a) => {
            let f = Poly::from_spec(a.nvars, &a.poly.0)?;
            let c = decay::cover_sublevel(&f, a.ell, qf(&a.eps)?, qf(&a.beta)?, qf(&a.grid)?)?;
            let mut o = Outcome::new(to_value(&c)?);
            o.passed = c.covered;
            if c.hypothesis_ratio > 1.0 {
                o.warnings.push(format!("Hölder hypothesis ratio {:.3} exceeds 1", c.hypothesis_ratio));
            }
            Ok(o)
        }
        Command::SimplexSum(a) => {
            let mu = a.measure.0.build()?;
            let r = decay::simplex_cover_sum(mu.as_ref(), qf(&a.gamma)?, qf(&a.alpha)?, a.h as u32, a.n_max, a.samples, &EFilter::All, seed)?;
            let mut o = Outcome::new(to_value(&r)?);
            o.passed = r.rows.iter().all(|row| row.containment_ok);
            let empty: usize = r.rows.iter().map(|row| row.empty_terms).sum();
            if empty > 0 {
                o.warnings.push(format!("{empty} net points had no rational of bounded height nearby"));
            }
            let mut s = Series::new("rows", &["n", "q_n", "rho_n", "sum", "normalized", "bound"]);
            for row in &r.rows {
                s.push(vec![row.n.to_string(), row.q_n.to_string(), num(row.rho_n), num(row.sum), num(row.normalized), num(row.bound)]);
            }
            o.series.push(s);
            Ok(o)
        }
        Command::SpikeSearch(a) => {
            let r = decay::counterexample_search(a.n_max, &q(&a.c)?, &q(&a.alpha)?, &q(&a.rho0)?, &q(&a.x)?)?;
            let mut o = Outcome::new(to_value(&r)?);
            let mut s = Series::new("ratios", &["n", "ratio", "exceeds"]);
            for row in &r.rows {
                s.push(vec![row.n.to_string(), num(row.ratio), row.exceeds.to_string()]);
            }
            o.series.push(s);
            Ok(o)
        }
        Command::FlagSuite(a) => {
            let suite = suites::flag_suite(a.trials, a.height as i128, seed)?;
            let mut o = Outcome::new(to_value(&suite)?);
            o.passed = suite.all_pass();
            if suite.step_applicable < suite.trials {
                o.warnings.push(format!("inductive step applicable on {} of {} instances", suite.step_applicable, suite.trials));
            }
            let mut fp = Series::new("flag_plot", &["case", "dim_v", "log_f"]);
            let mut ep = Series::new("eta", &["case", "j", "log_eta"]);
            for (i, c) in suite.cases.iter().enumerate() {
                for (d, lf) in &c.flag_plot {
                    fp.push(vec![i.to_string(), d.to_string(), num(*lf)]);
                }
                for (j, le) in &c.eta_plot {
                    ep.push(vec![i.to_string(), j.to_string(), num(*le)]);
                }
                for e in &c.errors {
                    o.warnings.push(format!("case {i}: {e}"));
                }
            }
            o.series.extend([fp, ep]);
            Ok(o)
        }
        Command::MeasureDecay(a) => {
            let mu = a.measure.0.build()?;
            let center: Vec<f64> = qvec(&a.center)?.iter().map(to_f64).collect();
            let b0 = Ball::new(center, qf(&a.radius)?, Norm::Sup)?;
            if a.tau_min == 0 || a.tau_min >= a.tau_max {
                return Err(Error::invalid("need 0 < tau_min < tau_max"));
            }
            let taus: Vec<f64> = (a.tau_min..=a.tau_max).map(f64::from).collect();
            let ray = flags::s0_flows(a.m, a.n, &taus);
            let e = flags::measure_decay_experiment(mu.as_ref(), a.m, a.n, &b0, &q(&a.gamma)?, &ray, &a.kappa, a.samples, seed)?;
            let mut o = Outcome::new(to_value(&e)?);
            if !e.note.is_empty() {
                o.warnings.push(e.note.clone());
            }
            if e.rows.iter().any(|r| !r.lower_bound_ok) {
                o.warnings.push("lower-bound hypothesis failed at some τ".into());
            }
            let mut s = Series::new("hit_fraction", &["tau", "s", "fraction", "ci_lo", "ci_hi"]);
            for r in &e.rows {
                s.push(vec![num(r.tau), num(r.s), num(r.fraction), num(r.ci_lo), num(r.ci_hi)]);
            }
            o.series.push(s);
            Ok(o)
        }
    }
}

/// Execute a config. Assertion failures inside an operation come back as
/// `Err(Error::Assertion)`; checks that return normally set `passed`.
pub fn run(config: &ExperimentConfig) -> Result<RunReport, Error> {
    let start = std::time::Instant::now();
    let outcome = run_command(&config.command, config.seed)?;
    let mut warnings = outcome.warnings;
    let native = config.command.native_track();
    if let Some(t) = config.track {
        if t != native {
            warnings.push(format!("track {t:?} is not available for this operation; ran on {native:?}"));
        }
    }
    let body = ReportBody {
        schema_version: SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        passed: outcome.passed,
        results: outcome.results,
        warnings,
        series: outcome.series,
    };
    Ok(RunReport { body, wall_clock_s: start.elapsed().as_secs_f64() })
}

/// One CSV per series in `dir`; returns the written paths.
pub fn emit_plot_data(report: &RunReport, dir: &Path) -> std::io::Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for s in &report.body.series {
        let p = dir.join(format!("{}.csv", s.name));
        std::fs::write(&p, s.to_csv())?;
        out.push(p);
    }
    Ok(out)
}

/// Write `report.json` and the CSV sidecars.
pub fn write_report(report: &RunReport, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(dir.join("report.json"), text + "\n")?;
    emit_plot_data(report, dir)?;
    Ok(())
}
