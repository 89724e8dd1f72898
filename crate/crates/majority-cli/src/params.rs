//! Parameter resolution: flags over config file over defaults.
//!
//! Each subcommand has a clap flag struct whose fields are all optional and a
//! parameter struct holding the resolved values. Both serialize with the same
//! kebab-case keys, which are also the keys accepted in config files and
//! echoed into manifests.

use std::path::{Path, PathBuf};

use clap::Args;
use majority::dynamics::TieRule;
use majority::gaussian::Side;
use majority::montecarlo::InitMode;
use majority::upperbound::BootstrapMethod;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{CliError, Common};

pub trait Flags: Serialize {
    const COMMAND: &'static str;
    type Params: Serialize + DeserializeOwned + Default;
}

/// Config-file contents: the command it was written for (if it is a manifest)
/// and the parameter object.
#[derive(Default)]
pub struct Config {
    command: Option<String>,
    params: Map<String, Value>,
}

pub fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    let Some(path) = path else { return Ok(Config::default()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {} is not valid JSON: {e}", path.display())))?;
    let Value::Object(mut obj) = value else {
        return Err(CliError::Usage(format!("config {} must hold a JSON object", path.display())));
    };
    match obj.remove("parameters") {
        Some(Value::Object(params)) => {
            let command = obj.get("command").and_then(Value::as_str).map(str::to_owned);
            Ok(Config { command, params })
        }
        Some(_) => Err(CliError::Usage("manifest `parameters` must be an object".into())),
        None => Ok(Config { command: None, params: obj }),
    }
}

pub fn resolve<F: Flags>(config: &Config, flags: &F) -> Result<F::Params, CliError> {
    if let Some(cmd) = &config.command {
        if cmd != F::COMMAND {
            return Err(CliError::Usage(format!("config is a manifest of `{cmd}`, not `{}`", F::COMMAND)));
        }
    }
    let Value::Object(mut merged) = to_value(&F::Params::default())? else { unreachable!() };
    for (key, value) in &config.params {
        if !merged.contains_key(key) {
            return Err(CliError::Usage(format!("unknown parameter `{key}` for `{}`", F::COMMAND)));
        }
        merged.insert(key.clone(), value.clone());
    }
    let Value::Object(given) = to_value(flags)? else { unreachable!() };
    for (key, value) in given {
        if !value.is_null() {
            merged.insert(key, value);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("bad parameter: {e}")))
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphChoice {
    Regular,
    Tree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SideChoice {
    Pinned,
    Plus,
    Minus,
}

impl From<SideChoice> for Side {
    fn from(s: SideChoice) -> Side {
        match s {
            SideChoice::Pinned => Side::Pinned,
            SideChoice::Plus => Side::Plus,
            SideChoice::Minus => Side::Minus,
        }
    }
}

// ---------------------------------------------------------------- kernels

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct KernelsFlags {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Largest time index [default: 4]
    #[arg(long)]
    pub tmax: Option<usize>,
    /// Target standard error of each integrated entry [default: 1e-5]
    #[arg(long)]
    pub accuracy: Option<f64>,
    /// Seed of the randomized lattice rule [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for the JSON kernel cache [default: none]
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct KernelsParams {
    pub tmax: usize,
    pub accuracy: f64,
    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
}

impl Default for KernelsParams {
    fn default() -> Self {
        KernelsParams { tmax: 4, accuracy: 1e-5, seed: 0, cache_dir: None }
    }
}

impl Flags for KernelsFlags {
    const COMMAND: &'static str = "kernels";
    type Params = KernelsParams;
}

// ---------------------------------------------------------------- simulate

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateFlags {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Substrate: `regular` (random k-regular graph) or `tree` [default: regular]
    #[arg(long, value_parser = ["regular", "tree"])]
    pub graph: Option<String>,
    /// Degree [default: 5]
    #[arg(long)]
    pub k: Option<usize>,
    /// Vertices of the random regular graph [default: 1000]
    #[arg(long)]
    pub n: Option<usize>,
    /// Depth of the tree [default: 6]
    #[arg(long)]
    pub depth: Option<usize>,
    /// Initial bias: P(+1) = (1+theta)/2 [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Initialization: `count` (exact number of +1) or `iid` [default: count]
    #[arg(long, value_parser = ["count", "iid"])]
    pub init: Option<String>,
    /// Tie rule: `direct` or `keep-flip` [default: direct]
    #[arg(long, value_parser = ["direct", "keep-flip"])]
    pub tie_rule: Option<String>,
    /// Step cap [default: 4 log2(n) + 50]
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write every spin at every step to `<stem>_history.csv` [default: false]
    #[arg(long)]
    pub history: Option<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SimulateParams {
    pub graph: GraphChoice,
    pub k: usize,
    pub n: usize,
    pub depth: usize,
    pub theta: f64,
    pub init: InitMode,
    pub tie_rule: TieRule,
    pub horizon: Option<usize>,
    pub seed: u64,
    pub history: bool,
}

impl Default for SimulateParams {
    fn default() -> Self {
        SimulateParams {
            graph: GraphChoice::Regular,
            k: 5,
            n: 1000,
            depth: 6,
            theta: 0.0,
            init: InitMode::Count,
            tie_rule: TieRule::Direct,
            horizon: None,
            seed: 0,
            history: false,
        }
    }
}

impl Flags for SimulateFlags {
    const COMMAND: &'static str = "simulate";
    type Params = SimulateParams;
}

// ---------------------------------------------------------------- threshold

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ThresholdFlags {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Degree [default: 3]
    #[arg(long)]
    pub k: Option<usize>,
    /// Vertices [default: 10000]
    #[arg(long)]
    pub n: Option<usize>,
    /// Independent graphs, each bisected for its own threshold [default: 40]
    #[arg(long)]
    pub trials: Option<usize>,
    /// Seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initialization: `count` or `iid` [default: count]
    #[arg(long, value_parser = ["count", "iid"])]
    pub init: Option<String>,
    /// Tie rule: `direct` or `keep-flip` [default: direct]
    #[arg(long, value_parser = ["direct", "keep-flip"])]
    pub tie_rule: Option<String>,
    /// Step cap per run [default: 4 log2(n) + 50]
    #[arg(long)]
    pub horizon_cap: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ThresholdParams {
    pub k: usize,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub init: InitMode,
    pub tie_rule: TieRule,
    pub horizon_cap: Option<usize>,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        ThresholdParams {
            k: 3,
            n: 10_000,
            trials: 40,
            seed: 0,
            init: InitMode::Count,
            tie_rule: TieRule::Direct,
            horizon_cap: None,
        }
    }
}

impl Flags for ThresholdFlags {
    const COMMAND: &'static str = "threshold";
    type Params = ThresholdParams;
}

// ---------------------------------------------------------------- predict

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PredictFlags {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Degree [default: 20]
    #[arg(long)]
    pub k: Option<usize>,
    /// Time at which the bias reaches order one [default: 1]
    #[arg(long)]
    pub t_star: Option<usize>,
    /// Initial scaled bias; theta = omega0 k^(-(T*+1)/2) [default: 0.5]
    #[arg(long)]
    pub omega0: Option<f64>,
    /// Kernel and prediction accuracy [default: 1e-5]
    #[arg(long)]
    pub accuracy: Option<f64>,
    /// Simulated trees [default: 200000]
    #[arg(long)]
    pub trials: Option<usize>,
    /// Tree depth, also the last simulated time [default: T*+2]
    #[arg(long)]
    pub depth: Option<usize>,
    /// Seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for the JSON kernel cache [default: none]
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PredictParams {
    pub k: usize,
    pub t_star: usize,
    pub omega0: f64,
    pub accuracy: f64,
    pub trials: usize,
    pub depth: Option<usize>,
    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
}

impl Default for PredictParams {
    fn default() -> Self {
        PredictParams {
            k: 20,
            t_star: 1,
            omega0: 0.5,
            accuracy: 1e-5,
            trials: 200_000,
            depth: None,
            seed: 0,
            cache_dir: None,
        }
    }
}

impl Flags for PredictFlags {
    const COMMAND: &'static str = "predict";
    type Params = PredictParams;
}

// ---------------------------------------------------------------- lower-bound

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct LowerBoundFlags {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Degree [default: 3]
    #[arg(long)]
    pub k: Option<usize>,
    /// Horizon T [default: 3]
    #[arg(long = "t", visible_alias = "T")]
    #[serde(rename = "t")]
    pub t: Option<usize>,
    /// Bisection width [default: 5e-4]
    #[arg(long)]
    pub bisect_tol: Option<f64>,
    /// Iteration cap of the core tables [default: 1000000]
    #[arg(long)]
    pub d_max: Option<usize>,
    /// Relative sup-change that counts as converged [default: 1e-12]
    #[arg(long)]
    pub eps_converge: Option<f64>,
    /// Positivity threshold on the core ratio [default: 10 eps-converge]
    #[arg(long)]
    pub eps_positive: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct LowerBoundParams {
    pub k: usize,
    pub t: usize,
    pub bisect_tol: f64,
    pub d_max: usize,
    pub eps_converge: f64,
    pub eps_positive: Option<f64>,
}

impl Default for LowerBoundParams {
    fn default() -> Self {
        let d = majority::lowerbound::ThetaLbOptions::default();
        LowerBoundParams {
            k: 3,
            t: 3,
            bisect_tol: d.bisect_tol,
            d_max: d.d_max,
            eps_converge: d.eps_converge,
            eps_positive: None,
        }
    }
}

impl Flags for LowerBoundFlags {
    const COMMAND: &'static str = "lower-bound";
    type Params = LowerBoundParams;
}

// ---------------------------------------------------------------- upper-bound

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct UpperBoundFlags {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Degrees, comma separated [default: 5,6,7]
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// `fixed-point` or `simulation` [default: fixed-point]
    #[arg(long, value_parser = ["fixed-point", "simulation"])]
    pub method: Option<String>,
    /// Accuracy of the critical density [default: 1e-9]
    #[arg(long)]
    pub precision: Option<f64>,
    /// Simulated trees per depth [default: 400]
    #[arg(long)]
    pub trials: Option<usize>,
    /// Simulated depths, comma separated [default: deepest within the vertex budget]
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<usize>>,
    /// Largest simulated tree in vertices [default: 4000000]
    #[arg(long)]
    pub vertex_budget: Option<usize>,
    /// Seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct UpperBoundParams {
    pub k: Vec<usize>,
    pub method: BootstrapMethod,
    pub precision: f64,
    pub trials: usize,
    pub depths: Vec<usize>,
    pub vertex_budget: usize,
    pub seed: u64,
}

impl Default for UpperBoundParams {
    fn default() -> Self {
        let d = majority::upperbound::BootstrapOptions::default();
        UpperBoundParams {
            k: vec![5, 6, 7],
            method: d.method,
            precision: d.precision,
            trials: d.trials,
            depths: d.depths,
            vertex_budget: d.vertex_budget,
            seed: d.seed,
        }
    }
}

impl Flags for UpperBoundFlags {
    const COMMAND: &'static str = "upper-bound";
    type Params = UpperBoundParams;
}

// ---------------------------------------------------------------- clt-check

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CltCheckFlags {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Sample counts N, comma separated [default: 64,128,256,512,1024]
    #[arg(long = "n", value_delimiter = ',')]
    #[serde(rename = "n")]
    pub n: Option<Vec<usize>>,
    /// Cell probabilities over {0,1}^d, bit i of the index is X_i [default: 0.5,0.5]
    #[arg(long, value_delimiter = ',')]
    pub cells: Option<Vec<f64>>,
    /// Target offsets from round(N E X_i), comma separated [default: 0 per coordinate]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub offsets: Option<Vec<i64>>,
    /// `pinned`, `plus` or `minus` per coordinate [default: pinned]
    #[arg(long, value_delimiter = ',', value_parser = ["pinned", "plus", "minus"])]
    pub sides: Option<Vec<String>>,
    /// Target error of the Gaussian integral [default: 1e-10]
    #[arg(long)]
    pub accuracy: Option<f64>,
    /// Seed of the randomized lattice rule [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct CltCheckParams {
    pub n: Vec<usize>,
    pub cells: Vec<f64>,
    pub offsets: Vec<i64>,
    pub sides: Vec<SideChoice>,
    pub accuracy: f64,
    pub seed: u64,
}

impl Default for CltCheckParams {
    fn default() -> Self {
        CltCheckParams {
            n: vec![64, 128, 256, 512, 1024],
            cells: vec![0.5, 0.5],
            offsets: Vec::new(),
            sides: vec![SideChoice::Pinned],
            accuracy: 1e-10,
            seed: 0,
        }
    }
}

impl Flags for CltCheckFlags {
    const COMMAND: &'static str = "clt-check";
    type Params = CltCheckParams;
}
