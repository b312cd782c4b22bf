//! Experiment configuration: TOML sections with validated ranges.
//!
//! ```toml
//! [experiment]
//! kind = "picard"          # simulate | picard | stability | ito-check
//!                          # | bj-check | burkholder-check | validate
//! seed = 42
//! out = "out"
//! n_paths = 1000
//! n_iters = 8
//! grid = 512
//!
//! [system]
//! name = "linear-ou-jump"  # or cubic-dissipative | saturating-drift
//! p = 2.0
//! horizon = 1.0
//!
//! [system.overrides]       # family parameters, all numeric
//! lambda = -1.0
//!
//! [system.marks]           # optional replacement mark law
//! law = "uniform"          # atoms | uniform | gaussian
//! mass = 1.5
//! width = 0.5
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::builtin::{builtin_system, BuiltinSystem};
use crate::error::{CoreError, Result};
use crate::measure::IntensityMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Direct-scheme Monte Carlo with moment curves (plus the closed-form
    /// oracle when the family has one).
    Simulate,
    /// Successive approximation with its convergence trace.
    Picard,
    /// Coupled two-solution pth-moment decay.
    Stability,
    /// Pathwise pth-power inequality residuals.
    ItoCheck,
    /// Compensated-Poisson maximal moment bound.
    BjCheck,
    /// Convolution maximal bound under a contraction semigroup.
    BurkholderCheck,
    /// Structural-constant validator.
    Validate,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Picard => "picard",
            ExperimentKind::Stability => "stability",
            ExperimentKind::ItoCheck => "ito-check",
            ExperimentKind::BjCheck => "bj-check",
            ExperimentKind::BurkholderCheck => "burkholder-check",
            ExperimentKind::Validate => "validate",
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_n_paths() -> usize {
    1000
}
fn default_n_iters() -> usize {
    8
}
fn default_grid() -> usize {
    512
}
fn default_n_samples() -> usize {
    10_000
}
fn default_radius() -> f64 {
    10.0
}
fn default_p() -> f64 {
    2.0
}
fn default_horizon() -> f64 {
    1.0
}
fn default_fp_tol() -> f64 {
    1e-13
}
fn default_max_fp_iter() -> usize {
    60
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    /// Successive-approximation sweeps (picard only).
    #[serde(default = "default_n_iters")]
    pub n_iters: usize,
    /// Uniform grid intervals merged with jump times.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Validator sample count (validate only).
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    /// Validator sampling radius (validate only).
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Inner fixed-point tolerance of the step solvers.
    #[serde(default = "default_fp_tol")]
    pub fp_tol: f64,
    /// Inner fixed-point iteration cap.
    #[serde(default = "default_max_fp_iter")]
    pub max_fp_iter: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub name: String,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Coupled-run second initial value (stability only): all-equal
    /// coordinates with this Euclidean norm.
    #[serde(default)]
    pub y0: Option<f64>,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
    #[serde(default)]
    pub marks: Option<MarksSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarksSection {
    /// `atoms`, `uniform` or `gaussian`.
    pub law: String,
    pub mass: f64,
    /// Atom list for `law = "atoms"`: `[{ xi = [..], w = .. }, ..]`.
    #[serde(default)]
    pub atoms: Option<Vec<AtomEntry>>,
    /// Half-width for `law = "uniform"`.
    #[serde(default)]
    pub width: Option<f64>,
    /// Standard deviation for `law = "gaussian"`.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Cutoff in standard deviations for `law = "gaussian"`.
    #[serde(default)]
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomEntry {
    pub xi: Vec<f64>,
    pub w: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub system: SystemSection,
}

impl ExperimentConfig {
    /// Defaults for a given kind: the linear family, modest sizes.
    pub fn default_for(kind: ExperimentKind) -> Self {
        Self {
            experiment: ExperimentSection {
                kind,
                seed: 0,
                out: default_out(),
                n_paths: default_n_paths(),
                n_iters: default_n_iters(),
                grid: default_grid(),
                n_samples: default_n_samples(),
                radius: default_radius(),
                fp_tol: default_fp_tol(),
                max_fp_iter: default_max_fp_iter(),
            },
            system: SystemSection {
                name: "linear-ou-jump".into(),
                p: default_p(),
                horizon: default_horizon(),
                y0: None,
                overrides: BTreeMap::new(),
                marks: None,
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CoreError::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.n_paths < 1 {
            return Err(CoreError::config("experiment.n_paths", "must be at least 1"));
        }
        if e.n_iters < 1 {
            return Err(CoreError::config("experiment.n_iters", "must be at least 1"));
        }
        if e.grid < 1 || e.grid > 1 << 20 {
            return Err(CoreError::config("experiment.grid", "must be between 1 and 2^20"));
        }
        if e.n_samples < 1 {
            return Err(CoreError::config("experiment.n_samples", "must be at least 1"));
        }
        if !(e.radius > 0.0 && e.radius.is_finite()) {
            return Err(CoreError::config("experiment.radius", "must be positive and finite"));
        }
        if !(e.fp_tol > 0.0 && e.fp_tol.is_finite()) {
            return Err(CoreError::config("experiment.fp_tol", "must be positive and finite"));
        }
        if e.max_fp_iter < 1 {
            return Err(CoreError::config("experiment.max_fp_iter", "must be at least 1"));
        }
        let s = &self.system;
        let p_floor = match e.kind {
            ExperimentKind::BjCheck => 1.0,
            _ => 2.0,
        };
        if !(s.p >= p_floor && s.p.is_finite()) {
            return Err(CoreError::config(
                "system.p",
                format!("must be >= {p_floor} for kind `{}`, got {}", e.kind.as_str(), s.p),
            ));
        }
        if !(s.horizon > 0.0 && s.horizon.is_finite()) {
            return Err(CoreError::config(
                "system.horizon",
                format!("must be positive and finite, got {}", s.horizon),
            ));
        }
        if let Some(y0) = s.y0 {
            if !y0.is_finite() {
                return Err(CoreError::config("system.y0", "must be finite"));
            }
        }
        if let Some(marks) = &s.marks {
            marks.build()?;
        }
        Ok(())
    }

    /// Instantiate the configured system. For `bj-check` with `p < 2` the
    /// family is built at `p = 2` (only its mark law and jump map are used
    /// there; family constants require `p >= 2`).
    pub fn build_system(&self) -> Result<BuiltinSystem> {
        let mut overrides = self.system.overrides.clone();
        overrides.insert("p".into(), self.system.p.max(2.0));
        overrides.insert("horizon".into(), self.system.horizon);
        let marks = match &self.system.marks {
            Some(m) => Some(m.build()?),
            None => None,
        };
        builtin_system(&self.system.name, &overrides, marks)
    }
}

impl MarksSection {
    pub fn build(&self) -> Result<IntensityMeasure> {
        match self.law.as_str() {
            "atoms" => {
                let atoms = self.atoms.as_ref().ok_or_else(|| {
                    CoreError::config("system.marks.atoms", "required for law = \"atoms\"")
                })?;
                IntensityMeasure::atoms(
                    self.mass,
                    atoms.iter().map(|a| (a.xi.clone(), a.w)).collect(),
                )
            }
            "uniform" => {
                let width = self.width.ok_or_else(|| {
                    CoreError::config("system.marks.width", "required for law = \"uniform\"")
                })?;
                IntensityMeasure::uniform(self.mass, width)
            }
            "gaussian" => {
                let sigma = self.sigma.ok_or_else(|| {
                    CoreError::config("system.marks.sigma", "required for law = \"gaussian\"")
                })?;
                let cutoff = self.cutoff.ok_or_else(|| {
                    CoreError::config("system.marks.cutoff", "required for law = \"gaussian\"")
                })?;
                IntensityMeasure::truncated_gaussian(self.mass, sigma, cutoff)
            }
            other => Err(CoreError::config(
                "system.marks.law",
                format!("unknown mark law `{other}`"),
            )),
        }
    }
}
