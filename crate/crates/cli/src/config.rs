//! Run configuration: flags override `key = value` lines from `--config`,
//! which override built-in defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use pcrtbp::dynamics::{first_critical_energy, ProblemKind};
use pcrtbp::ode::IntegratorConfig;
use pcrtbp::Primary;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// File of `key = value` lines; keys are the long flag names
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// pcrtbp | hill | rotating-kepler [default: pcrtbp]
    #[arg(long, global = true)]
    pub problem: Option<String>,
    /// Mass ratio [default: 0.1]
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Energy level; overrides --below-l1
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub c: Option<f64>,
    /// Energy offset below the first critical value [default: 0.2]
    #[arg(long, global = true)]
    pub below_l1: Option<f64>,
    /// earth | moon [default: moon, earth for rotating-kepler]
    #[arg(long, global = true)]
    pub primary: Option<String>,
    /// Integrator absolute tolerance [default: 1e-12]
    #[arg(long, global = true)]
    pub abs_tol: Option<f64>,
    /// Integrator relative tolerance [default: 1e-12]
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    /// Largest integrator step [default: 0.05]
    #[arg(long, global = true)]
    pub max_step: Option<f64>,
    /// Scan samples per fixed circle, or samples per circle for `circles` [default: 180]
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Comma-separated section crossings to scan [default: 1,2,3]
    #[arg(long, global = true)]
    pub crossings: Option<String>,
    /// Random points for sampling checks [default: 1000]
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Seed for all random sampling [default: 1]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// json (records, default) | csv (grids and series, default for hill-region and circles)
    #[arg(long, global = true)]
    pub format: Option<Format>,
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Largest iterate for mean indices [default: 16]
    #[arg(long, global = true)]
    pub m_max: Option<usize>,
    /// First ellipsoid radius parameter [default: 1]
    #[arg(long, global = true)]
    pub r1: Option<f64>,
    /// Second ellipsoid radius parameter [default: sqrt(2)]
    #[arg(long, global = true)]
    pub r2: Option<f64>,
    /// Hill-region grid cells per axis [default: 256]
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Half-width of the Hill-region window [default: 1.5]
    #[arg(long, global = true)]
    pub window: Option<f64>,
    /// Dimension of the fixed submanifold for rank tables [default: 1]
    #[arg(long, global = true)]
    pub d: Option<i64>,
    /// Dimension of the base for rank tables [default: 2]
    #[arg(long, global = true)]
    pub n: Option<i64>,
    /// Degree range `lo..hi` for rank tables [default: -10..10]
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub degrees: Option<String>,
}

const KEYS: &[&str] = &[
    "problem",
    "mu",
    "c",
    "below_l1",
    "primary",
    "abs_tol",
    "rel_tol",
    "max_step",
    "samples",
    "crossings",
    "points",
    "seed",
    "format",
    "out",
    "m_max",
    "r1",
    "r2",
    "grid",
    "window",
    "d",
    "n",
    "degrees",
];

pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError(format!("{}:{}: expected `key = value`", path.display(), no + 1)))?;
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError(format!("{}:{}: unknown key `{}`", path.display(), no + 1, k.trim())));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub problem: String,
    pub mu: f64,
    pub c: f64,
    pub primary: Primary,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub samples: usize,
    pub crossings: Vec<usize>,
    pub points: usize,
    pub seed: u64,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub m_max: usize,
    pub r1: f64,
    pub r2: f64,
    pub grid: usize,
    pub window: f64,
    pub d: i64,
    pub n: i64,
    pub degrees: [i64; 2],
    #[serde(skip)]
    pub kind: ProblemKind,
}

struct Resolver {
    file: BTreeMap<String, String>,
}

impl Resolver {
    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(v) => v.parse().map(Some).map_err(|e| ConfigError(format!("config key `{key}`: {e}"))),
            None => Ok(None),
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<usize>, ConfigError> {
    s.split(',').map(|p| p.trim().parse().map_err(|_| ConfigError(format!("bad crossing list `{s}`")))).collect()
}

fn parse_range(s: &str) -> Result<[i64; 2], ConfigError> {
    let bad = || ConfigError(format!("bad degree range `{s}` (expected lo..hi)"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let lo: i64 = a.trim().parse().map_err(|_| bad())?;
    let hi: i64 = b.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok([lo, hi])
}

pub fn resolve(flags: &Flags) -> Result<RunConfig, ConfigError> {
    let file = match &flags.config {
        Some(p) => parse_config_file(p)?,
        None => BTreeMap::new(),
    };
    let r = Resolver { file };
    let problem = r.get(flags.problem.clone(), "problem")?.unwrap_or_else(|| "pcrtbp".into());
    let mu = r.get(flags.mu, "mu")?.unwrap_or(0.1);
    let kind = match problem.as_str() {
        "pcrtbp" => ProblemKind::pcrtbp(mu).map_err(|e| ConfigError(e.to_string()))?,
        "hill" => ProblemKind::HillLunar,
        "rotating-kepler" | "kepler" => ProblemKind::RotatingKepler,
        other => return Err(ConfigError(format!("unknown problem `{other}` (pcrtbp | hill | rotating-kepler)"))),
    };
    let primary = match r.get(flags.primary.clone(), "primary")?.as_deref() {
        Some("moon") => Primary::Moon,
        Some("earth") => Primary::Earth,
        Some(other) => return Err(ConfigError(format!("unknown primary `{other}` (earth | moon)"))),
        None if matches!(kind, ProblemKind::RotatingKepler) => Primary::Earth,
        None => Primary::Moon,
    };
    let c = match r.get(flags.c, "c")? {
        Some(c) => c,
        None => {
            let below = r.get(flags.below_l1, "below_l1")?.unwrap_or(0.2);
            first_critical_energy(&kind).map_err(|e| ConfigError(e.to_string()))? - below
        }
    };
    let d = IntegratorConfig::default();
    let crossings = match r.get(flags.crossings.clone(), "crossings")? {
        Some(s) => parse_list(&s)?,
        None => vec![1, 2, 3],
    };
    let degrees = match r.get(flags.degrees.clone(), "degrees")? {
        Some(s) => parse_range(&s)?,
        None => [-10, 10],
    };
    let cfg = RunConfig {
        problem: match kind {
            ProblemKind::Pcrtbp(_) => "pcrtbp",
            ProblemKind::HillLunar => "hill",
            ProblemKind::RotatingKepler => "rotating-kepler",
        }
        .into(),
        mu: kind.mu(),
        c,
        primary,
        abs_tol: r.get(flags.abs_tol, "abs_tol")?.unwrap_or(d.abs_tol),
        rel_tol: r.get(flags.rel_tol, "rel_tol")?.unwrap_or(d.rel_tol),
        max_step: r.get(flags.max_step, "max_step")?.unwrap_or(d.max_step),
        samples: r.get(flags.samples, "samples")?.unwrap_or(180),
        crossings,
        points: r.get(flags.points, "points")?.unwrap_or(1000),
        seed: r.get(flags.seed, "seed")?.unwrap_or(1),
        format: r.get(flags.format, "format")?,
        out: r.get(flags.out.clone(), "out")?,
        m_max: r.get(flags.m_max, "m_max")?.unwrap_or(16),
        r1: r.get(flags.r1, "r1")?.unwrap_or(1.0),
        r2: r.get(flags.r2, "r2")?.unwrap_or(2f64.sqrt()),
        grid: r.get(flags.grid, "grid")?.unwrap_or(256),
        window: r.get(flags.window, "window")?.unwrap_or(1.5),
        d: r.get(flags.d, "d")?.unwrap_or(1),
        n: r.get(flags.n, "n")?.unwrap_or(2),
        degrees,
        kind,
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    let positive = [
        ("abs_tol", cfg.abs_tol),
        ("rel_tol", cfg.rel_tol),
        ("max_step", cfg.max_step),
        ("r1", cfg.r1),
        ("r2", cfg.r2),
        ("window", cfg.window),
    ];
    for (k, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ConfigError(format!("`{k}` must be positive and finite (got {v})")));
        }
    }
    if !cfg.c.is_finite() {
        return Err(ConfigError("energy must be finite".into()));
    }
    if cfg.samples == 0 || cfg.points == 0 || cfg.grid == 0 || cfg.crossings.is_empty() || cfg.crossings.contains(&0) {
        return Err(ConfigError("samples, points, grid and crossings must be positive".into()));
    }
    if cfg.m_max < 8 {
        return Err(ConfigError(format!("m_max must be at least 8 (got {})", cfg.m_max)));
    }
    Ok(())
}

impl RunConfig {
    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig { abs_tol: self.abs_tol, rel_tol: self.rel_tol, max_step: self.max_step, ..IntegratorConfig::default() }
    }

    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}
