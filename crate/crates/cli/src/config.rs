//! Run configuration: command-line flags layered over an optional config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use gtdesign::{Criterion, ParamVector, SizeBounds};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    D,
    Ds,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::D => Criterion::D,
            CriterionArg::Ds => Criterion::Ds,
        }
    }
}

/// Flags shared by every subcommand. All optional so a config file can fill gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Prevalence
    #[arg(long)]
    pub p0: Option<f64>,
    /// Sensitivity
    #[arg(long)]
    pub p1: Option<f64>,
    /// Specificity
    #[arg(long)]
    pub p2: Option<f64>,
    /// Smallest allowed group size
    #[arg(long)]
    pub xl: Option<f64>,
    /// Largest allowed group size
    #[arg(long)]
    pub xu: Option<f64>,
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,
    /// Total number of trials
    #[arg(long)]
    pub n: Option<u64>,
    /// Monte Carlo replications
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Step of the group-size grid used by `verify`
    #[arg(long)]
    pub grid_step: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write output here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat key=value or JSON file with any of the above
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Values read from a config file, keyed by flag name with `-` folded to `_`.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile(BTreeMap<String, String>);

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::io(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        if text.trim_start().starts_with('{') {
            let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
            let obj = value.as_object().ok_or("expected a JSON object")?;
            for (k, v) in obj {
                let s = match v {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Number(n) => n.to_string(),
                    serde_json::Value::Bool(b) => b.to_string(),
                    _ => return Err(format!("key '{k}' must be a scalar")),
                };
                map.insert(normalize(k), s);
            }
        } else {
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
                map.insert(normalize(k.trim()), v.trim().to_string());
            }
        }
        Ok(Self(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.0
            .get(key)
            .map(|v| {
                v.parse().map_err(|_| {
                    CliError::usage(format!("config key '{key}' has invalid value '{v}'"))
                })
            })
            .transpose()
    }

    pub fn get_string(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

fn normalize(key: &str) -> String {
    key.trim_start_matches('-')
        .replace('-', "_")
        .to_ascii_lowercase()
}

/// Fully resolved settings; fields without a default stay `None` until a
/// command asks for them.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub p0: Option<f64>,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub xl: Option<f64>,
    pub xu: Option<f64>,
    pub criterion: Option<Criterion>,
    pub n: Option<u64>,
    pub reps: Option<u64>,
    pub seed: u64,
    pub grid_step: f64,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub file: ConfigFile,
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let criterion = match args.criterion {
            Some(c) => Some(c.into()),
            None => file
                .get::<String>("criterion")?
                .map(|s| {
                    s.parse::<Criterion>()
                        .map_err(|e| CliError::usage(e.to_string()))
                })
                .transpose()?,
        };
        Ok(Self {
            p0: args.p0.or(file.get("p0")?),
            p1: args.p1.or(file.get("p1")?),
            p2: args.p2.or(file.get("p2")?),
            xl: args.xl.or(file.get("xl")?),
            xu: args.xu.or(file.get("xu")?),
            criterion,
            n: args.n.or(file.get("n")?),
            reps: args.reps.or(file.get("reps")?),
            seed: args.seed.or(file.get("seed")?).unwrap_or(1),
            grid_step: args
                .grid_step
                .or(file.get("grid_step")?)
                .unwrap_or(gtdesign::solver::DEFAULT_GRID_STEP),
            format: args.format.or(file.get("format")?),
            out: args.out.clone().or(file.get("out")?),
            file,
        })
    }

    /// Parameters from flags/config, falling back to `fallback` (e.g. a design file).
    pub fn theta(&self, fallback: Option<&ParamVector>) -> Result<ParamVector, CliError> {
        let pick = |v: Option<f64>, f: Option<f64>, name: &str| {
            v.or(f)
                .ok_or_else(|| CliError::usage(format!("missing --{name}")))
        };
        let p0 = pick(self.p0, fallback.map(|t| t.p0()), "p0")?;
        let p1 = pick(self.p1, fallback.map(|t| t.p1()), "p1")?;
        let p2 = pick(self.p2, fallback.map(|t| t.p2()), "p2")?;
        Ok(ParamVector::new(p0, p1, p2)?)
    }

    pub fn bounds(&self, fallback: Option<&SizeBounds>) -> Result<SizeBounds, CliError> {
        let xl = self
            .xl
            .or(fallback.map(|b| b.lower()))
            .ok_or_else(|| CliError::usage("missing --xl"))?;
        let xu = self
            .xu
            .or(fallback.map(|b| b.upper()))
            .ok_or_else(|| CliError::usage("missing --xu"))?;
        Ok(SizeBounds::new(xl, xu)?)
    }

    pub fn criterion_or(&self, fallback: Criterion) -> Criterion {
        self.criterion.unwrap_or(fallback)
    }

    pub fn n_or(&self, fallback: u64) -> u64 {
        self.n.unwrap_or(fallback)
    }

    pub fn format_or(&self, fallback: Format) -> Format {
        self.format.unwrap_or(fallback)
    }
}
