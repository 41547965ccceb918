//! Experiment configuration: a JSON file merged with command-line flags.

use std::path::PathBuf;

use birkhoff::functions::FunctionSpec;
use birkhoff::mapping::MapConfig;
use birkhoff::systems::{ObservableSpec, SystemSpec};
use clap::Args;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Build,
    Means,
    Stabilize,
    Fluct,
    Gap,
    Tail,
    Approx,
    Verify,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// `|A_M(F,T,x) - Av(F)|` on transitive systems.
    pub full_cycle: f64,
    /// Prefix-sum means against direct summation.
    pub prefix: f64,
    /// Slack for the inequality checks.
    pub invariant: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            full_cycle: 1e-12,
            prefix: 1e-10,
            invariant: 1e-12,
        }
    }
}

/// The JSON config file. Every key is optional; flags override keys.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub analysis: Option<Analysis>,
    pub system: Option<Map<String, Value>>,
    pub observable: Option<Map<String, Value>>,
    pub map: Option<Map<String, Value>>,
    pub seed: Option<u64>,
    pub sample: Option<usize>,
    pub points: Option<Vec<usize>>,
    pub n_grid: Option<String>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub n_min: Option<usize>,
    pub horizon: Option<usize>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    pub threshold: Option<f64>,
    pub transitive: Option<bool>,
    pub images: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub tolerances: Option<Tolerances>,
}

/// Flags shared by every subcommand.
#[derive(Clone, Debug, Default, Args)]
pub struct Flags {
    /// JSON experiment config; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// System name: rotation, rotation_irrational, bernoulli_block, bernoulli_debruijn.
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long = "M")]
    pub big_m: Option<usize>,
    #[arg(long = "N")]
    pub big_n: Option<usize>,
    /// Alphabet size of symbolic systems.
    #[arg(long = "m")]
    pub small_m: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "M-max")]
    pub m_max: Option<usize>,
    /// Observable name: delta, block, coordinate, cylinder, function.
    #[arg(long)]
    pub observable: Option<String>,
    /// Block length of the block observable.
    #[arg(long)]
    pub block: Option<usize>,
    /// Registered function of the function observable, e.g. identity, cos2pi.
    #[arg(long)]
    pub function: Option<String>,
    /// Cylinder pattern as `j:a` pairs, e.g. `0:1,-1:0`.
    #[arg(long, allow_hyphen_values = true)]
    pub pattern: Option<String>,
    /// Map name for `approx`: identity, rotation, doubling, shift.
    #[arg(long)]
    pub map: Option<String>,
    /// Rotation amount of the rotation map.
    #[arg(long = "map-alpha")]
    pub map_alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of sampled points; every point when at least M.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Explicit base points, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub points: Option<Vec<usize>>,
    /// Window grid: `log:a:b:count`, `lin:a:b:count` or a comma list.
    #[arg(long = "n-grid")]
    pub n_grid: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long = "n-min")]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long = "L")]
    pub l: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Join the matched permutation into a single cycle.
    #[arg(long)]
    pub transitive: bool,
    /// CSV of tabulated map images with header `index,image`.
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// A validated experiment.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub analysis: Option<Analysis>,
    pub system: Option<SystemSpec>,
    pub observable: Option<ObservableSpec>,
    pub map: Option<MapConfig>,
    pub seed: u64,
    pub sample: usize,
    pub points: Option<Vec<usize>>,
    pub n_grid: Option<String>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub n_min: usize,
    pub horizon: Option<usize>,
    pub k: Option<usize>,
    pub l: Option<usize>,
    pub threshold: Option<f64>,
    pub transitive: bool,
    pub images: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub tolerances: Tolerances,
}

pub const DEFAULT_SAMPLE: usize = 256;
pub const DEFAULT_N_MIN: usize = 16;

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Starts from the file's object, switching to a fresh one when the flag
/// names a different entry.
fn named_object(base: Option<Map<String, Value>>, name: Option<&str>) -> Option<Map<String, Value>> {
    match (base, name) {
        (Some(obj), Some(n)) if obj.get("name").and_then(Value::as_str) == Some(n) => Some(obj),
        (_, Some(n)) => Some(Map::from_iter([("name".to_string(), Value::from(n))])),
        (base, None) => base,
    }
}

fn set<T: Into<Value>>(obj: &mut Option<Map<String, Value>>, key: &str, v: Option<T>, what: &str) -> Result<(), CliError> {
    if let Some(v) = v {
        match obj {
            Some(o) => {
                o.insert(key.to_string(), v.into());
            }
            None => return Err(config_error(format!("--{what} given without a name to attach it to"))),
        }
    }
    Ok(())
}

fn parse_pattern(text: &str) -> Result<Value, CliError> {
    let mut out = Vec::new();
    for pair in text.split(',').filter(|s| !s.trim().is_empty()) {
        let (j, a) = pair
            .split_once(':')
            .ok_or_else(|| config_error(format!("pattern entry `{pair}` is not `j:a`")))?;
        let j: i64 = j.trim().parse().map_err(|_| config_error(format!("bad position in `{pair}`")))?;
        let a: u8 = a.trim().parse().map_err(|_| config_error(format!("bad symbol in `{pair}`")))?;
        out.push(Value::from(vec![Value::from(j), Value::from(a)]));
    }
    Ok(Value::from(out))
}

fn parse<T: serde::de::DeserializeOwned>(obj: Map<String, Value>, what: &str) -> Result<T, CliError> {
    serde_json::from_value(Value::Object(obj)).map_err(|e| config_error(format!("{what}: {e}")))
}

impl ExperimentConfig {
    pub fn load(flags: &Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            None => FileConfig::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| config_error(format!("{}: {e}", path.display())))?
            }
        };
        ExperimentConfig::merge(file, flags)
    }

    pub fn merge(file: FileConfig, flags: &Flags) -> Result<Self, CliError> {
        let mut system = named_object(file.system, flags.system.as_deref());
        set(&mut system, "M", flags.big_m, "M")?;
        set(&mut system, "N", flags.big_n, "N")?;
        set(&mut system, "m", flags.small_m, "m")?;
        set(&mut system, "alpha", flags.alpha, "alpha")?;
        set(&mut system, "M_max", flags.m_max, "M-max")?;

        let mut observable = named_object(file.observable, flags.observable.as_deref());
        set(&mut observable, "K", flags.block, "block")?;
        if let Some(name) = &flags.function {
            let function: FunctionSpec = serde_json::from_value(Value::from(
                Map::from_iter([("name".to_string(), Value::from(name.as_str()))]),
            ))
            .map_err(|e| config_error(format!("function `{name}`: {e}")))?;
            let value = serde_json::to_value(function).expect("function specs serialize");
            set(&mut observable, "function", Some(value), "function")?;
        }
        if let Some(p) = &flags.pattern {
            set(&mut observable, "pattern", Some(parse_pattern(p)?), "pattern")?;
        }

        let mut map = named_object(file.map, flags.map.as_deref());
        set(&mut map, "alpha", flags.map_alpha, "map-alpha")?;

        let cfg = ExperimentConfig {
            analysis: file.analysis,
            system: system.map(|o| parse(o, "system")).transpose()?,
            observable: observable.map(|o| parse(o, "observable")).transpose()?,
            map: map.map(|o| parse(o, "map")).transpose()?,
            seed: flags.seed.or(file.seed).unwrap_or(0),
            sample: flags.sample.or(file.sample).unwrap_or(DEFAULT_SAMPLE),
            points: flags.points.clone().or(file.points),
            n_grid: flags.n_grid.clone().or(file.n_grid),
            epsilon: flags.epsilon.or(file.epsilon),
            delta: flags.delta.or(file.delta),
            n_min: flags.n_min.or(file.n_min).unwrap_or(DEFAULT_N_MIN),
            horizon: flags.horizon.or(file.horizon),
            k: flags.k.or(file.k),
            l: flags.l.or(file.l),
            threshold: flags.threshold.or(file.threshold),
            transitive: flags.transitive || file.transitive.unwrap_or(false),
            images: flags.images.clone().or(file.images),
            out: flags.out.clone().or(file.out),
            report: flags.report.clone().or(file.report),
            tolerances: file.tolerances.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        for (name, v) in [("full_cycle", t.full_cycle), ("prefix", t.prefix), ("invariant", t.invariant)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_error(format!("tolerance {name} = {v} must be positive")));
            }
        }
        for (name, v) in [("epsilon", self.epsilon), ("delta", self.delta)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(config_error(format!("{name} = {v} must be positive")));
                }
            }
        }
        if let Some(t) = self.threshold {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(config_error(format!("threshold = {t} must be non-negative")));
            }
        }
        if self.sample == 0 {
            return Err(config_error("sample must be at least 1"));
        }
        Ok(())
    }

    pub fn system(&self) -> Result<&SystemSpec, CliError> {
        self.system
            .as_ref()
            .ok_or_else(|| config_error("no system given (use --system or the `system` key)"))
    }

    pub fn observable(&self) -> Result<&ObservableSpec, CliError> {
        self.observable
            .as_ref()
            .ok_or_else(|| config_error("no observable given (use --observable or the `observable` key)"))
    }

    pub fn require<T: Copy>(&self, v: Option<T>, name: &str) -> Result<T, CliError> {
        v.ok_or_else(|| config_error(format!("`{name}` is required for this command")))
    }
}
