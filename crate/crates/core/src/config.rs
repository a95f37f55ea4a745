//! Run configuration: dotted `key = value` text with every key optional.
//!
//! Defaults reproduce the reference computation: `X = 120`, `M = 48000`, `T = 200`, `N = 400`,
//! cubic `f` with `alpha = 0.4`, standard Gaussian kernel.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::evolve::{InitProfile, Simulation, SnapshotSchedule, TimeSpec};
use crate::grid::Grid;
use crate::kernels::{build_kernel, KernelSpec, KernelTable, DEFAULT_TAU_MASS};
use crate::reaction::{Nonlinearity, ReactionTable};
use crate::threshold::ClassifyOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Gaussian,
    Bump,
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub family: KernelKind,
    pub sigma: f64,
    pub radius: f64,
    pub table_path: Option<PathBuf>,
    pub normalize: bool,
    pub tau_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReactionKind {
    Cubic,
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionConfig {
    pub family: ReactionKind,
    pub alpha: f64,
    pub table_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub half_width: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    pub half_length: f64,
    pub profile: InitProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub snapshots: SnapshotSchedule,
    /// Significant digits in numeric output.
    pub precision: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kernel: KernelConfig,
    pub reaction: ReactionConfig,
    pub grid: GridConfig,
    pub time: TimeSpec,
    pub init: InitConfig,
    pub output: OutputConfig,
    pub classify: ClassifyOptions,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kernel: KernelConfig {
                family: KernelKind::Gaussian,
                sigma: 1.0,
                radius: 1.0,
                table_path: None,
                normalize: false,
                tau_mass: DEFAULT_TAU_MASS,
            },
            reaction: ReactionConfig { family: ReactionKind::Cubic, alpha: 0.4, table_path: None },
            grid: GridConfig { half_width: 120.0, intervals: 48000 },
            time: TimeSpec { horizon: 200.0, steps: 400 },
            init: InitConfig { half_length: 1.605, profile: InitProfile::Nodal },
            output: OutputConfig {
                dir: PathBuf::from("out"),
                snapshots: SnapshotSchedule::Geometric,
                precision: 17,
            },
            classify: ClassifyOptions::default(),
            seed: 0,
        }
    }
}

const KEYS: &[&str] = &[
    "kernel.family",
    "kernel.sigma",
    "kernel.r",
    "kernel.table_path",
    "kernel.normalize",
    "kernel.tau_mass",
    "reaction.family",
    "reaction.alpha",
    "reaction.table_path",
    "grid.X",
    "grid.M",
    "time.T",
    "time.N",
    "time.dt",
    "init.L",
    "init.profile",
    "output.dir",
    "output.snapshots",
    "output.precision",
    "threshold.delta_cls",
    "threshold.delta_slope",
    "threshold.window",
    "seed",
];

/// Read and resolve a config file. Relative table paths are taken relative to the file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = parse_str(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut config.kernel.table_path, &mut config.reaction.table_path].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(config)
}

pub fn parse_str(text: &str) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    let mut horizon = config.time.horizon;
    let mut steps = config.time.steps;
    let mut dt: Option<(usize, f64)> = None;

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::ConfigParse { line: line_no, message };
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(format!("expected key=value, found {line:?}")))?;
        if !KEYS.contains(&key) {
            return Err(err(format!("unknown key {key:?}")));
        }
        let real = || value.parse::<f64>().map_err(|e| err(format!("{key}: bad number {value:?}: {e}")));
        let count = || value.parse::<usize>().map_err(|e| err(format!("{key}: bad count {value:?}: {e}")));
        match key {
            "kernel.family" => {
                config.kernel.family = match value {
                    "gaussian" => KernelKind::Gaussian,
                    "bump" => KernelKind::Bump,
                    "table" => KernelKind::Table,
                    other => return Err(err(format!("unknown kernel family {other:?}"))),
                }
            }
            "kernel.sigma" => config.kernel.sigma = real()?,
            "kernel.r" => config.kernel.radius = real()?,
            "kernel.table_path" => config.kernel.table_path = Some(PathBuf::from(value)),
            "kernel.normalize" => {
                config.kernel.normalize =
                    value.parse().map_err(|_| err(format!("kernel.normalize: expected true/false, got {value:?}")))?
            }
            "kernel.tau_mass" => config.kernel.tau_mass = real()?,
            "reaction.family" => {
                config.reaction.family = match value {
                    "cubic" => ReactionKind::Cubic,
                    "table" => ReactionKind::Table,
                    other => return Err(err(format!("unknown reaction family {other:?}"))),
                }
            }
            "reaction.alpha" => config.reaction.alpha = real()?,
            "reaction.table_path" => config.reaction.table_path = Some(PathBuf::from(value)),
            "grid.X" => config.grid.half_width = real()?,
            "grid.M" => config.grid.intervals = count()?,
            "time.T" => horizon = real()?,
            "time.N" => steps = count()?,
            "time.dt" => dt = Some((line_no, real()?)),
            "init.L" => config.init.half_length = real()?,
            "init.profile" => config.init.profile = value.parse().map_err(|e: Error| err(e.to_string()))?,
            "output.dir" => config.output.dir = PathBuf::from(value),
            "output.snapshots" => config.output.snapshots = value.parse().map_err(|e: Error| err(e.to_string()))?,
            "output.precision" => {
                let p = count()?;
                if !(1..=17).contains(&p) {
                    return Err(err(format!("output.precision must be in 1..=17, got {p}")));
                }
                config.output.precision = p;
            }
            "threshold.delta_cls" => config.classify.delta_cls = real()?,
            "threshold.delta_slope" => config.classify.delta_slope = real()?,
            "threshold.window" => config.classify.window = count()?,
            "seed" => config.seed = value.parse().map_err(|e| err(format!("seed: {e}")))?,
            _ => unreachable!("key list and match arms disagree"),
        }
    }

    config.time = TimeSpec::new(horizon, steps)?;
    if let Some((line, dt)) = dt {
        let expected = config.time.dt();
        if (dt - expected).abs() > 1e-12 * expected.abs().max(1.0) {
            return Err(Error::ConfigParse {
                line,
                message: format!("time.dt = {dt} is inconsistent with T/N = {expected}"),
            });
        }
    }
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    /// Apply `key=value` lines on top of this config. Errors name the offending override.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<RunConfig> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let base = self.emit();
        let offset = base.lines().count();
        let mut text = base;
        for o in overrides {
            text.push_str(o);
            text.push('\n');
        }
        parse_str(&text).map_err(|e| match e {
            Error::ConfigParse { line, message } if line > offset => {
                Error::Config(format!("override {:?}: {message}", overrides[line - offset - 1]))
            }
            other => other,
        })
    }

    /// Structural checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        Grid::new(self.grid.half_width, self.grid.intervals)?;
        if self.kernel.family == KernelKind::Table && self.kernel.table_path.is_none() {
            return Err(Error::Config("kernel.family = table needs kernel.table_path".into()));
        }
        if self.reaction.family == ReactionKind::Table && self.reaction.table_path.is_none() {
            return Err(Error::Config("reaction.family = table needs reaction.table_path".into()));
        }
        if !(self.init.half_length > 0.0 && self.init.half_length < self.grid.half_width) {
            return Err(Error::Config(format!(
                "init.L = {} must lie in (0, grid.X = {})",
                self.init.half_length, self.grid.half_width
            )));
        }
        if self.classify.window == 0 {
            return Err(Error::Config("threshold.window must be positive".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.half_width, self.grid.intervals)
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        let mut spec = match self.kernel.family {
            KernelKind::Gaussian => KernelSpec::gaussian(self.kernel.sigma),
            KernelKind::Bump => KernelSpec::bump(self.kernel.radius),
            KernelKind::Table => {
                let path = self.kernel.table_path.as_deref().ok_or_else(|| Error::Config("missing kernel.table_path".into()))?;
                KernelSpec::table(KernelTable::from_path(path)?)
            }
        };
        spec.normalize = self.kernel.normalize;
        spec.tau_mass = self.kernel.tau_mass;
        Ok(spec)
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        match self.reaction.family {
            ReactionKind::Cubic => Nonlinearity::cubic(self.reaction.alpha),
            ReactionKind::Table => {
                let path = self
                    .reaction
                    .table_path
                    .as_deref()
                    .ok_or_else(|| Error::Config("missing reaction.table_path".into()))?;
                Ok(Nonlinearity::table(ReactionTable::from_path(path)?))
            }
        }
    }

    pub fn simulation(&self) -> Result<Simulation> {
        let grid = self.grid()?;
        let kernel = build_kernel(&self.kernel_spec()?, &grid)?;
        Simulation::from_parts(grid, Arc::new(kernel), Arc::new(self.nonlinearity()?))
    }

    /// Every key, in a form [`parse_str`] reads back to an equal config.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let family = match self.kernel.family {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Bump => "bump",
            KernelKind::Table => "table",
        };
        let _ = writeln!(s, "kernel.family = {family}");
        let _ = writeln!(s, "kernel.sigma = {}", self.kernel.sigma);
        let _ = writeln!(s, "kernel.r = {}", self.kernel.radius);
        if let Some(p) = &self.kernel.table_path {
            let _ = writeln!(s, "kernel.table_path = {}", p.display());
        }
        let _ = writeln!(s, "kernel.normalize = {}", self.kernel.normalize);
        let _ = writeln!(s, "kernel.tau_mass = {}", self.kernel.tau_mass);
        let family = match self.reaction.family {
            ReactionKind::Cubic => "cubic",
            ReactionKind::Table => "table",
        };
        let _ = writeln!(s, "reaction.family = {family}");
        let _ = writeln!(s, "reaction.alpha = {}", self.reaction.alpha);
        if let Some(p) = &self.reaction.table_path {
            let _ = writeln!(s, "reaction.table_path = {}", p.display());
        }
        let _ = writeln!(s, "grid.X = {}", self.grid.half_width);
        let _ = writeln!(s, "grid.M = {}", self.grid.intervals);
        let _ = writeln!(s, "time.T = {}", self.time.horizon);
        let _ = writeln!(s, "time.N = {}", self.time.steps);
        let _ = writeln!(s, "init.L = {}", self.init.half_length);
        let _ = writeln!(s, "init.profile = {}", self.init.profile);
        let _ = writeln!(s, "output.dir = {}", self.output.dir.display());
        let _ = writeln!(s, "output.snapshots = {}", self.output.snapshots);
        let _ = writeln!(s, "output.precision = {}", self.output.precision);
        let _ = writeln!(s, "threshold.delta_cls = {}", self.classify.delta_cls);
        let _ = writeln!(s, "threshold.delta_slope = {}", self.classify.delta_slope);
        let _ = writeln!(s, "threshold.window = {}", self.classify.window);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}
