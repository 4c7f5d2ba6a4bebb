//! Run configuration shared by the command line and JSON config files.
//!
//! Every optional field is filled in by [`RunConfig::resolve`], so the copy
//! echoed into `run.json` is complete and re-running from it reproduces the
//! outputs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use geoflow::curvature::CosineDirectionPair;
use geoflow::evolution::{EvolutionConfig, DEFAULT_RHOX_THRESHOLD, DEFAULT_SLOPE_THRESHOLD};
use geoflow::flowmap::DEFAULT_JACOBIAN_FLOOR;
use geoflow::{Grid, Model, PeriodicField, VelocityPair};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Evolve,
    Flowmap,
    Curvature,
    CurvatureScan,
    Rigidbody,
    Verify,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Evolve => "evolve",
            Command::Flowmap => "flowmap",
            Command::Curvature => "curvature",
            Command::CurvatureScan => "curvature-scan",
            Command::Rigidbody => "rigidbody",
            Command::Verify => "verify",
        })
    }
}

/// Initial-condition presets.
///
/// `zero`, `cosmode:m:amp` (u = amp cos 2πmx, ρ = 0),
/// `pair:m1:a1:m2:a2` (u = a1 cos 2πm1x, ρ = a2 cos 2πm2x), `file:<path>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitialCondition {
    Zero,
    CosMode { mode: u32, amp: f64 },
    Pair { m1: u32, a1: f64, m2: u32, a2: f64 },
    File(PathBuf),
}

pub const PRESETS: [&str; 4] = ["zero", "cosmode:m:amp", "pair:m1:a1:m2:a2", "file:<path>"];

impl FromStr for InitialCondition {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let parts: Vec<&str> = if rest.is_empty() { Vec::new() } else { rest.split(':').collect() };
        let mode = |v: &str| -> Result<u32> { v.parse().with_context(|| format!("bad mode {v:?} in initial condition {s:?}")) };
        let amp = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .ok()
                .filter(|a| a.is_finite())
                .with_context(|| format!("bad amplitude {v:?} in initial condition {s:?}"))
        };
        match (name, parts.as_slice()) {
            ("zero", []) => Ok(Self::Zero),
            ("cosmode", [m, a]) => Ok(Self::CosMode { mode: mode(m)?, amp: amp(a)? }),
            ("pair", [m1, a1, m2, a2]) => Ok(Self::Pair {
                m1: mode(m1)?,
                a1: amp(a1)?,
                m2: mode(m2)?,
                a2: amp(a2)?,
            }),
            ("file", _) if !rest.is_empty() => Ok(Self::File(PathBuf::from(rest))),
            _ => bail!("unknown initial condition {s:?}; expected one of {}", PRESETS.join(", ")),
        }
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "zero"),
            Self::CosMode { mode, amp } => write!(f, "cosmode:{mode}:{amp}"),
            Self::Pair { m1, a1, m2, a2 } => write!(f, "pair:{m1}:{a1}:{m2}:{a2}"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl TryFrom<String> for InitialCondition {
    type Error = anyhow::Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InitialCondition> for String {
    fn from(ic: InitialCondition) -> String {
        ic.to_string()
    }
}

impl InitialCondition {
    pub fn build(&self, grid: &Grid) -> Result<VelocityPair> {
        let cutoff = grid.dealias_cutoff();
        let check_mode = |m: u32| -> Result<()> {
            ensure!(
                m as usize <= cutoff,
                "initial mode {m} is above the dealiasing cutoff {cutoff} of a {}-point grid",
                grid.n()
            );
            Ok(())
        };
        Ok(match self {
            Self::Zero => VelocityPair::zeros(grid),
            Self::CosMode { mode, amp } => {
                check_mode(*mode)?;
                VelocityPair::velocity_only(PeriodicField::cosine(grid, *mode, *amp))
            }
            Self::Pair { m1, a1, m2, a2 } => {
                check_mode(*m1)?;
                check_mode(*m2)?;
                VelocityPair::new(PeriodicField::cosine(grid, *m1, *a1), PeriodicField::cosine(grid, *m2, *a2))
            }
            Self::File(path) => {
                let file = std::fs::File::open(path)
                    .with_context(|| format!("cannot open initial-condition file {}", path.display()))?;
                let state = geoflow::io::read_snapshot(file)
                    .with_context(|| format!("cannot read initial-condition file {}", path.display()))?;
                ensure!(
                    state.grid().n() == grid.n(),
                    "initial-condition file {} has {} points but n = {}",
                    path.display(),
                    state.grid().n(),
                    grid.n()
                );
                VelocityPair::new(
                    PeriodicField::from_values(grid, state.u.values().to_vec()),
                    PeriodicField::from_values(grid, state.rho.values().to_vec()),
                )
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ic: Option<InitialCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhox_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobian_floor: Option<f64>,
    /// `[k1, k2, l1, l2]`; `k1` and `l1` are zero when `second_only` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<[u32; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_only: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_mode: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quick: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

pub const DEFAULT_OUT_DIR: &str = "geoflow-out";

impl RunConfig {
    pub fn empty(command: Command) -> Self {
        Self {
            command,
            model: None,
            ic: None,
            n: None,
            dt: None,
            t_end: None,
            slope_threshold: None,
            rhox_threshold: None,
            stride: None,
            jacobian_floor: None,
            modes: None,
            second_only: None,
            max_mode: None,
            search_trials: None,
            inertia: None,
            omega: None,
            seed: None,
            quick: None,
            out_dir: None,
        }
    }

    /// Reads either a bare config or a `run.json` manifest, whose `config`
    /// key is used.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("config {} is not valid JSON", path.display()))?;
        let is_manifest = value.get("config").is_some() && value.get("command").is_none();
        let cfg = if is_manifest {
            serde_json::from_value::<crate::run::Manifest>(value)
                .with_context(|| format!("bad manifest {}", path.display()))?
                .config
        } else {
            serde_json::from_value(value).with_context(|| format!("bad config {}", path.display()))?
        };
        Ok(cfg)
    }

    fn allowed_keys(&self) -> &'static [&'static str] {
        match self.command {
            Command::Evolve => &["model", "ic", "n", "dt", "t_end", "slope_threshold", "rhox_threshold", "stride", "out_dir"],
            Command::Flowmap => &[
                "model",
                "ic",
                "n",
                "dt",
                "t_end",
                "slope_threshold",
                "rhox_threshold",
                "stride",
                "jacobian_floor",
                "out_dir",
            ],
            Command::Curvature => &["modes", "second_only", "n", "out_dir"],
            Command::CurvatureScan => &["max_mode", "n", "search_trials", "seed", "out_dir"],
            Command::Rigidbody => &["inertia", "omega", "dt", "t_end", "stride", "out_dir"],
            Command::Verify => &["seed", "quick", "out_dir"],
        }
    }

    fn present_keys(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        macro_rules! note {
            ($($f:ident),*) => { $( if self.$f.is_some() { keys.push(stringify!($f)); } )* };
        }
        note!(
            model, ic, n, dt, t_end, slope_threshold, rhox_threshold, stride, jacobian_floor, modes, second_only,
            max_mode, search_trials, inertia, omega, seed, quick, out_dir
        );
        keys
    }

    /// Checks every value and fills defaults. The result is idempotent under
    /// a second call.
    pub fn resolve(mut self) -> Result<Self> {
        let allowed = self.allowed_keys();
        for key in self.present_keys() {
            ensure!(allowed.contains(&key), "key '{key}' does not apply to command {}", self.command);
        }
        match self.command {
            Command::Evolve | Command::Flowmap => {
                let model = self.model.context("missing required key 'model' (--model)")?;
                let ic = self.ic.as_ref().context("missing required key 'ic' (--ic)")?;
                if !model.is_two_component() && matches!(ic, InitialCondition::Pair { a2, .. } if *a2 != 0.0) {
                    bail!("model {model} has no density; use a cosmode or zero initial condition");
                }
                self.n.get_or_insert(256);
                self.dt.get_or_insert(1e-4);
                self.t_end.get_or_insert(1.0);
                self.slope_threshold.get_or_insert(DEFAULT_SLOPE_THRESHOLD);
                self.rhox_threshold.get_or_insert(DEFAULT_RHOX_THRESHOLD);
                self.stride.get_or_insert(100);
                if self.command == Command::Flowmap {
                    let floor = *self.jacobian_floor.get_or_insert(DEFAULT_JACOBIAN_FLOOR);
                    ensure!(floor > 0.0 && floor.is_finite(), "jacobian_floor must be positive, got {floor}");
                }
                let n = self.n.unwrap_or_default();
                Grid::new(n)?;
                self.evolution_config()?.validate()?;
            }
            Command::Curvature => {
                let modes = self.modes.context("missing required key 'modes' (--k1 --k2 --l1 --l2)")?;
                let second_only = *self.second_only.get_or_insert(false);
                if second_only {
                    ensure!(
                        modes[0] == 0 && modes[2] == 0,
                        "modes k1 and l1 must be 0 with second_only, got {modes:?}"
                    );
                }
                self.direction()?;
                let max = modes.iter().copied().max().unwrap_or(0) as usize;
                let n = *self.n.get_or_insert((16 * max).max(128));
                Grid::new(n)?;
                ensure!(n >= 16 * max, "n = {n} under-resolves mode {max}; need at least {}", 16 * max);
            }
            Command::CurvatureScan => {
                let max_mode = *self.max_mode.get_or_insert(4);
                ensure!(max_mode >= 2, "max_mode must be at least 2, got {max_mode}");
                let need = 16 * max_mode as usize;
                let n = *self.n.get_or_insert(need.max(128));
                Grid::new(n)?;
                ensure!(n >= need, "n = {n} under-resolves modes up to {max_mode}; need at least {need}");
                self.search_trials.get_or_insert(0);
                self.seed.get_or_insert(0);
            }
            Command::Rigidbody => {
                let inertia = *self.inertia.get_or_insert([1.0, 2.0, 3.0]);
                let omega = *self.omega.get_or_insert([1.0, 1.0, 1.0]);
                ensure!(
                    inertia.iter().all(|i| *i > 0.0 && i.is_finite()),
                    "inertia must be positive and finite, got {inertia:?}"
                );
                ensure!(omega.iter().all(|w| w.is_finite()), "omega must be finite, got {omega:?}");
                let dt = *self.dt.get_or_insert(1e-3);
                let t_end = *self.t_end.get_or_insert(10.0);
                ensure!(dt > 0.0 && dt.is_finite(), "dt must be positive, got {dt}");
                ensure!(t_end > 0.0 && t_end.is_finite(), "t_end must be positive, got {t_end}");
                ensure!(*self.stride.get_or_insert(1) > 0, "stride must be positive");
            }
            Command::Verify => {
                self.seed.get_or_insert(0);
                self.quick.get_or_insert(false);
            }
        }
        if self.command != Command::Verify {
            self.out_dir.get_or_insert_with(|| PathBuf::from(DEFAULT_OUT_DIR));
        }
        Ok(self)
    }

    /// Only meaningful on a resolved evolve or flowmap config.
    pub fn evolution_config(&self) -> Result<EvolutionConfig> {
        let model = self.model.context("missing required key 'model' (--model)")?;
        let get = |v: Option<f64>, key: &str| v.with_context(|| format!("missing key '{key}'"));
        Ok(EvolutionConfig::new(
            model,
            self.n.context("missing key 'n'")?,
            get(self.dt, "dt")?,
            get(self.t_end, "t_end")?,
        )
        .with_thresholds(get(self.slope_threshold, "slope_threshold")?, get(self.rhox_threshold, "rhox_threshold")?)
        .with_stride(self.stride.context("missing key 'stride'")?))
    }

    pub fn direction(&self) -> Result<CosineDirectionPair> {
        let [k1, k2, l1, l2] = self.modes.context("missing required key 'modes'")?;
        let dir = if self.second_only.unwrap_or(false) {
            CosineDirectionPair::second_only(k2, l2)?
        } else {
            CosineDirectionPair::new(k1, k2, l1, l2)?
        };
        Ok(dir)
    }
}
