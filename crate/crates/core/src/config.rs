//! Experiment configuration file (TOML).
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//!
//! [region]
//! x_min = -10.0
//! x_max = 10.0
//! y_min = -10.0
//! y_max = 10.0
//!
//! [trajectory]
//! center = [0.0, 0.0]
//! radius = 3.0
//! samples = 8
//!
//! [ue_spec]
//! centers = [[4.0, 3.0]]
//! variance = 0.0
//!
//! [counts]
//! num_tx = 2
//! num_rx = 1
//! ```
//!
//! Optional tables: `[objective]`, `[env]`, `[solver]` (with `[solver.sac]`,
//! `[solver.cem]`, `[solver.random]`, `[solver.grid]`) and `[sweep]`. Unknown
//! keys anywhere are rejected.

use serde::{Deserialize, Serialize};

use crate::baselines::{CemConfig, GridConfig, RandomConfig};
use crate::env::{EnvConfig, RewardTransform};
use crate::error::{Error, Result};
use crate::metrics::{ObjectiveKind, ObjectiveSpec};
use crate::sac::SacConfig;
use crate::scenario::{CircularTrajectory, Region, Scenario, UePlacementSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Sac,
    #[default]
    Cem,
    Random,
    Grid,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Sac => "sac",
            SolverKind::Cem => "cem",
            SolverKind::Random => "random",
            SolverKind::Grid => "grid",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SolverKind::Sac, SolverKind::Cem, SolverKind::Random, SolverKind::Grid]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::validation("solver.kind", format!("unknown solver `{s}`")))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub kind: SolverKind,
    pub sac: SacConfig,
    pub cem: CemConfig,
    pub random: RandomConfig,
    pub grid: GridConfig,
}

/// Cells of a sweep: every AP count pair crossed with every objective.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    /// `(num_tx, num_rx)` pairs; empty means the scenario's own counts.
    pub ap_pairs: Vec<[usize; 2]>,
    /// Empty means the configured objective.
    pub objectives: Vec<ObjectiveKind>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ap_pairs.is_empty() && self.objectives.is_empty() {
            return Err(Error::validation("sweep", "sweep needs at least one AP pair or objective"));
        }
        if let Some(i) = self.ap_pairs.iter().position(|[m, n]| *m == 0 || *n == 0) {
            return Err(Error::validation(format!("sweep.ap_pairs[{i}]"), "counts must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Counts {
    num_tx: usize,
    num_rx: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSettings {
    pub grid_resolution: usize,
    pub reward_transform: RewardTransform,
}

impl Default for EnvSettings {
    fn default() -> Self {
        Self { grid_resolution: 0, reward_transform: RewardTransform::Log1p }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema_version: u32,
    seed: u64,
    region: Region,
    trajectory: CircularTrajectory,
    ue_spec: UePlacementSpec,
    counts: Counts,
    #[serde(default)]
    objective: ObjectiveSpec,
    #[serde(default)]
    env: EnvSettings,
    #[serde(default)]
    solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepSpec>,
}

/// A validated experiment: scenario plus objective, environment, solver
/// and optional sweep settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub objective: ObjectiveSpec,
    pub env: EnvSettings,
    pub solver: SolverSpec,
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!("unsupported schema version {} (expected {SCHEMA_VERSION})", file.schema_version),
            ));
        }
        let config = Self {
            scenario: Scenario {
                region: file.region,
                trajectory: file.trajectory,
                ue_spec: file.ue_spec,
                num_tx: file.counts.num_tx,
                num_rx: file.counts.num_rx,
                seed: file.seed,
            },
            objective: file.objective,
            env: file.env,
            solver: file.solver,
            sweep: file.sweep,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.objective.validate()?;
        self.solver.sac.validate()?;
        self.solver.cem.validate()?;
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        let s = &self.scenario;
        let file = ConfigFile {
            schema_version: SCHEMA_VERSION,
            seed: s.seed,
            region: s.region,
            trajectory: s.trajectory,
            ue_spec: s.ue_spec.clone(),
            counts: Counts { num_tx: s.num_tx, num_rx: s.num_rx },
            objective: self.objective,
            env: self.env,
            solver: self.solver.clone(),
            sweep: self.sweep.clone(),
        };
        toml::to_string(&file).expect("config types always serialize")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scenario.seed = seed;
        self
    }

    pub fn seed(&self) -> u64 {
        self.scenario.seed
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            scenario: self.scenario.clone(),
            objective: self.objective,
            grid_resolution: self.env.grid_resolution,
            reward_transform: self.env.reward_transform,
        }
    }

    pub fn sac_config(&self) -> SacConfig {
        SacConfig { seed: self.seed(), ..self.solver.sac.clone() }
    }

    pub fn cem_config(&self) -> CemConfig {
        CemConfig { seed: self.seed(), ..self.solver.cem.clone() }
    }
}

/// Renders a scenario as a config document with default objective, env and
/// solver tables.
pub fn render_scenario(scenario: &Scenario) -> String {
    ExperimentConfig {
        scenario: scenario.clone(),
        objective: ObjectiveSpec::default(),
        env: EnvSettings::default(),
        solver: SolverSpec::default(),
        sweep: None,
    }
    .to_toml_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{load_scenario, Point2D};

    const BASE: &str = r#"
schema_version = 1
seed = 11

[region]
x_min = -10.0
x_max = 10.0
y_min = -10.0
y_max = 10.0

[trajectory]
center = [0.0, 0.0]
radius = 3.0
samples = 8

[ue_spec]
centers = [[4.0, 3.0], [-2.0, 5.0], [1.0, -6.0]]

[counts]
num_tx = 2
num_rx = 2
"#;

    #[test]
    fn parses_minimal_config() {
        let s = load_scenario(BASE).unwrap();
        assert_eq!((s.num_tx, s.num_rx, s.num_ues()), (2, 2, 3));
        assert_eq!(s.ue_spec.variance, 2.0);
        assert_eq!(s.ue_spec.centers[1], Point2D::new(-2.0, 5.0));
        assert_eq!(s.seed, 11);
        let c = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert_eq!(c.objective.kind, ObjectiveKind::MaxSum);
        assert_eq!(c.solver.sac.batch_size, 512);
    }

    #[test]
    fn trajectory_outside_region_is_rejected() {
        let text = BASE.replace("radius = 3.0", "radius = 20.0");
        let err = load_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("trajectory outside region"), "{err}");
    }

    #[test]
    fn missing_region_is_named() {
        let start = BASE.find("[region]").unwrap();
        let end = BASE.find("[trajectory]").unwrap();
        let text = format!("{}{}", &BASE[..start], &BASE[end..]);
        let err = load_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("region"), "{err}");
    }

    #[test]
    fn too_few_aps_is_rejected() {
        let text = BASE.replace("num_tx = 2", "num_tx = 1").replace("num_rx = 2", "num_rx = 1");
        let err = load_scenario(&text).unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "counts"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BASE.replace("samples = 8", "samples = 8\nsampels = 9");
        assert!(matches!(load_scenario(&text), Err(Error::Parse(_))));
        let text = format!("{BASE}\n[solver.sac]\nlearning_rat = 0.1\n");
        assert!(load_scenario(&text).is_err());
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let text = BASE.replace("schema_version = 1", "schema_version = 2");
        assert!(load_scenario(&text).is_err());
    }

    #[test]
    fn scenario_render_roundtrips() {
        let s = load_scenario(BASE).unwrap();
        assert_eq!(load_scenario(&render_scenario(&s)).unwrap(), s);
    }

    #[test]
    fn full_config_roundtrips() {
        let text = format!(
            "{BASE}\n[objective]\nkind = \"weighted-sum\"\nweight = 0.25\n\n[env]\ngrid_resolution = 9\nreward_transform = \"identity\"\n\n[solver]\nkind = \"sac\"\n\n[solver.sac]\nlearning_rate = 3e-4\ntotal_steps = 100\n\n[sweep]\nap_pairs = [[1, 1], [2, 2]]\nobjectives = [\"comm-only\"]\n"
        );
        let c = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(c.objective.kind, ObjectiveKind::WeightedSum);
        assert_eq!(c.env.grid_resolution, 9);
        assert_eq!(c.solver.kind, SolverKind::Sac);
        assert_eq!(c.solver.sac.learning_rate, 3e-4);
        assert_eq!(c.sweep.as_ref().unwrap().ap_pairs, vec![[1, 1], [2, 2]]);
        assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let text = format!("{BASE}\n[sweep]\nap_pairs = []\n");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("sweep"), "{err}");
    }
}
