//! JSON run configuration.
//!
//! ```json
//! {
//!   "scenarios": ["all", "affine", {"random": {"n": 3, "delta": 0.5}}, { ...inline scenario... }],
//!   "sources": ["ground_truth", "theorem1", "theorem2", "gramian_baseline"],
//!   "out_dir": "out",
//!   "mode": "precond",
//!   "seed": 0
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::SensitivitySource;
use crate::scenarios::{preset_scenario, preset_scenarios, random_stable_augmented, Scenario, ScenarioDoc};
use crate::systems::SupNorm;

/// How the dynamics bound handles a nonnegative log-norm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Refuse with exit code 2.
    Strict,
    /// Bound in Lyapunov-transformed coordinates.
    #[default]
    Precond,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Strict => "strict",
            Mode::Precond => "precond",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomDoc {
    pub n: usize,
    pub delta: f64,
    /// Defaults to the run seed plus the entry position.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub count: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioEntry {
    /// A preset name, or `"all"` for all six presets.
    Preset(String),
    Random { random: RandomDoc },
    Inline(Box<ScenarioDoc>),
}

fn default_sources() -> Vec<SensitivitySource> {
    SensitivitySource::ALL.to_vec()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenarios: Vec<ScenarioEntry>,
    #[serde(default = "default_sources")]
    pub sources: Vec<SensitivitySource>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sup_norm: SupNorm,
    #[serde(default)]
    pub perfect_is_robust: bool,
    /// Write per-scenario trajectory CSVs.
    #[serde(default = "yes")]
    pub write_trajectories: bool,
}

fn yes() -> bool {
    true
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// All six presets with every source.
    pub fn presets_default() -> Self {
        Self {
            scenarios: vec![ScenarioEntry::Preset("all".into())],
            sources: default_sources(),
            out_dir: default_out(),
            dt: None,
            mode: Mode::Precond,
            seed: 0,
            sup_norm: SupNorm::Euclidean,
            perfect_is_robust: false,
            write_trajectories: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Config("at least one scenario is required".into()));
        }
        if self.sources.is_empty() {
            return Err(Error::Config("at least one bound source is required".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::Config(format!("dt must be positive, got {dt}")));
            }
        }
        Ok(())
    }

    pub fn wants(&self, source: SensitivitySource) -> bool {
        self.sources.contains(&source)
    }

    /// Expands entries into concrete scenarios, in config order.
    pub fn resolve_scenarios(&self) -> Result<Vec<Scenario>> {
        let mut out = Vec::new();
        for (pos, entry) in self.scenarios.iter().enumerate() {
            match entry {
                ScenarioEntry::Preset(name) if name == "all" => out.extend(preset_scenarios()),
                ScenarioEntry::Preset(name) => out.push(
                    preset_scenario(name).ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?,
                ),
                ScenarioEntry::Random { random } => {
                    let base = random.seed.unwrap_or(self.seed.wrapping_add(pos as u64));
                    for k in 0..random.count {
                        out.push(random_stable_augmented(random.n, base.wrapping_add(k as u64), random.delta)?);
                    }
                }
                ScenarioEntry::Inline(doc) => out.push(doc.to_scenario()?),
            }
        }
        let mut names: Vec<&str> = out.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate scenario name `{}`", w[0])));
        }
        Ok(out)
    }
}
