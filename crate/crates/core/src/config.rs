//! Run configuration: a flat `key = value` file with dotted keys.
//!
//! ```text
//! # comments start with '#'
//! data.labeled = train.csv
//! kernel.0.kind = coordinate-linear
//! kernel.0.coords = 0,1
//! constraints.r = 2
//! ```
//!
//! Unknown keys are errors. Relative paths resolve against the directory of
//! the configuration file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::constraints::ConstraintParams;
use crate::data::DataFormat;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::spectral::DEFAULT_RANK_TOL;
use crate::trainer::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub labeled: Option<PathBuf>,
    pub unlabeled: Option<PathBuf>,
    pub format: DataFormat,
    pub dim: Option<usize>,
    pub kernels: Vec<KernelSpec>,
    pub params: ConstraintParams,
    pub train: TrainConfig,
    pub rademacher_draws: usize,
    pub rho: f64,
    pub rank_tol: f64,
    pub output_dir: PathBuf,
    pub formats: Vec<ReportFormat>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            labeled: None,
            unlabeled: None,
            format: DataFormat::Csv,
            dim: None,
            kernels: Vec::new(),
            params: ConstraintParams {
                r: 1,
                lambda_r: 1.0,
                nu: 4.0,
                delta: 0.05,
            },
            train: TrainConfig::default(),
            rademacher_draws: 2000,
            rho: 0.1,
            rank_tol: DEFAULT_RANK_TOL,
            output_dir: PathBuf::from("out"),
            formats: vec![ReportFormat::Json],
            seed: 0,
        }
    }
}

#[derive(Default)]
struct KernelKeys {
    kind: Option<String>,
    degree: Option<u32>,
    bandwidth: Option<f64>,
    coords: Option<Vec<usize>>,
    normalize: Option<bool>,
    matrix: Option<PathBuf>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

/// Dense, header-free, comma-separated matrix.
pub fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            line.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::data(i + 1, format!("invalid number `{}` in {}", v.trim(), path.display())))
                })
                .collect()
        })
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read configuration {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut kernels: BTreeMap<usize, KernelKeys> = BTreeMap::new();
        let mut train_seed = None;
        let mut seen = std::collections::HashSet::new();
        let resolve = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            match key {
                "data.labeled" => cfg.labeled = Some(resolve(value)),
                "data.unlabeled" => cfg.unlabeled = Some(resolve(value)),
                "data.format" => cfg.format = value.parse()?,
                "data.dim" => cfg.dim = Some(parse_value(key, value)?),
                "constraints.r" => cfg.params.r = parse_value(key, value)?,
                "constraints.lambda_r" => cfg.params.lambda_r = parse_value(key, value)?,
                "constraints.nu" => cfg.params.nu = parse_value(key, value)?,
                "constraints.delta" => cfg.params.delta = parse_value(key, value)?,
                "train.loss" => cfg.train.loss = value.parse()?,
                "train.mode" => cfg.train.mode = value.parse()?,
                "train.max_rounds" => cfg.train.max_rounds = parse_value(key, value)?,
                "train.inner_iters" => cfg.train.inner_iters = parse_value(key, value)?,
                "train.step" => cfg.train.step = parse_value(key, value)?,
                "train.tol" => cfg.train.tol = parse_value(key, value)?,
                "train.seed" => train_seed = Some(parse_value(key, value)?),
                "rademacher.draws" => cfg.rademacher_draws = parse_value(key, value)?,
                "bounds.rho" => cfg.rho = parse_value(key, value)?,
                "rank_tol" => cfg.rank_tol = parse_value(key, value)?,
                "output.dir" => cfg.output_dir = resolve(value),
                "output.formats" => cfg.formats = parse_list(key, value)?,
                "seed" => cfg.seed = parse_value(key, value)?,
                _ => {
                    let parts: Vec<&str> = key.split('.').collect();
                    let idx = match parts.as_slice() {
                        ["kernel", i, _] => i.parse::<usize>().ok(),
                        _ => None,
                    };
                    let Some(idx) = idx else {
                        return Err(Error::Config(format!("line {}: unknown key `{key}`", lineno + 1)));
                    };
                    let k = kernels.entry(idx).or_default();
                    match parts[2] {
                        "kind" => k.kind = Some(value.to_string()),
                        "degree" => k.degree = Some(parse_value(key, value)?),
                        "bandwidth" => k.bandwidth = Some(parse_value(key, value)?),
                        "coords" => k.coords = Some(parse_list(key, value)?),
                        "normalize" => k.normalize = Some(parse_bool(key, value)?),
                        "matrix" => k.matrix = Some(resolve(value)),
                        _ => return Err(Error::Config(format!("line {}: unknown key `{key}`", lineno + 1))),
                    }
                }
            }
        }
        cfg.train.seed = train_seed.unwrap_or(cfg.seed);
        if !seen.contains("output.dir") {
            cfg.output_dir = resolve("out");
        }
        for (expected, (idx, keys)) in kernels.into_iter().enumerate() {
            if idx != expected {
                return Err(Error::Config(format!(
                    "kernel indices must be 0, 1, 2, ...; missing kernel.{expected}"
                )));
            }
            cfg.kernels.push(build_kernel(idx, keys)?);
        }
        if cfg.formats.is_empty() {
            return Err(Error::Config("output.formats is empty".into()));
        }
        if !(cfg.rho > 0.0) {
            return Err(Error::Config("bounds.rho must be positive".into()));
        }
        if cfg.rademacher_draws == 0 {
            return Err(Error::Config("rademacher.draws must be positive".into()));
        }
        if !(cfg.rank_tol > 0.0) {
            return Err(Error::Config("rank_tol must be positive".into()));
        }
        cfg.params.validate()?;
        cfg.train.validate()?;
        for path in cfg.labeled.iter().chain(&cfg.unlabeled) {
            if !path.exists() {
                return Err(Error::Config(format!("data file {} does not exist", path.display())));
            }
        }
        Ok(cfg)
    }

    pub fn wants(&self, format: ReportFormat) -> bool {
        self.formats.contains(&format)
    }
}

fn build_kernel(idx: usize, k: KernelKeys) -> Result<KernelSpec> {
    let kind = k
        .kind
        .ok_or_else(|| Error::Config(format!("kernel.{idx}.kind is required")))?;
    let unused = |name: &str, present: bool| -> Result<()> {
        if present {
            Err(Error::Config(format!(
                "kernel.{idx}.{name} does not apply to a {kind} kernel"
            )))
        } else {
            Ok(())
        }
    };
    let as_config = |e: Error| Error::Config(format!("kernel.{idx}: {e}"));
    let mut spec = match kind.as_str() {
        "linear" => {
            unused("degree", k.degree.is_some())?;
            unused("bandwidth", k.bandwidth.is_some())?;
            unused("coords", k.coords.is_some())?;
            unused("matrix", k.matrix.is_some())?;
            KernelSpec::linear()
        }
        "polynomial" => {
            unused("bandwidth", k.bandwidth.is_some())?;
            unused("coords", k.coords.is_some())?;
            unused("matrix", k.matrix.is_some())?;
            let degree = k
                .degree
                .ok_or_else(|| Error::Config(format!("kernel.{idx}.degree is required")))?;
            KernelSpec::polynomial(degree).map_err(as_config)?
        }
        "gaussian" => {
            unused("degree", k.degree.is_some())?;
            unused("coords", k.coords.is_some())?;
            unused("matrix", k.matrix.is_some())?;
            KernelSpec::gaussian(k.bandwidth.unwrap_or(1.0)).map_err(as_config)?
        }
        "coordinate-linear" => {
            unused("degree", k.degree.is_some())?;
            unused("bandwidth", k.bandwidth.is_some())?;
            unused("matrix", k.matrix.is_some())?;
            let coords = k
                .coords
                .ok_or_else(|| Error::Config(format!("kernel.{idx}.coords is required")))?;
            KernelSpec::coordinate_linear(coords).map_err(as_config)?
        }
        "precomputed" => {
            unused("degree", k.degree.is_some())?;
            unused("bandwidth", k.bandwidth.is_some())?;
            unused("coords", k.coords.is_some())?;
            let path = k
                .matrix
                .ok_or_else(|| Error::Config(format!("kernel.{idx}.matrix is required")))?;
            if !path.exists() {
                return Err(Error::Config(format!(
                    "kernel matrix {} does not exist",
                    path.display()
                )));
            }
            KernelSpec::precomputed(read_matrix_csv(&path)?)?
        }
        other => {
            return Err(Error::Config(format!(
                "kernel.{idx}.kind: unknown kernel kind `{other}`"
            )))
        }
    };
    // Normalization is on by default so that K(x, x) <= 1 holds on the data.
    spec.normalize = spec.normalize || k.normalize.unwrap_or(true);
    Ok(spec)
}
