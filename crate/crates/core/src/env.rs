//! One-step decision process around the deployment objective.
//!
//! A state holds the UE coordinates and the trajectory center, an action
//! holds every AP coordinate, both normalized to `[-1, 1]` by the region.
//! Each episode is a single step: the reward is the (unscaled) objective of
//! the decoded deployment and the next state comes from a fresh reset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricReport, ObjectiveSpec};
use crate::scenario::{sample_trajectory, sample_ues, Deployment, Point2D, Region, Scenario};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardTransform {
    Identity,
    #[default]
    Log1p,
}

impl RewardTransform {
    pub fn apply(self, value: f64) -> f64 {
        match self {
            RewardTransform::Identity => value,
            RewardTransform::Log1p => value.ln_1p(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State(pub Vec<f64>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action(pub Vec<f64>);

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: State,
    pub action: Action,
    pub reward: f64,
    pub next_state: State,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub scenario: Scenario,
    pub objective: ObjectiveSpec,
    /// Grid values per axis for action snapping; 0 keeps actions continuous.
    pub grid_resolution: usize,
    pub reward_transform: RewardTransform,
}

/// `g` evenly spaced values spanning `[min, max]`; a single value sits at
/// the midpoint.
pub fn grid_axis(min: f64, max: f64, g: usize) -> Vec<f64> {
    match g {
        0 => Vec::new(),
        1 => vec![0.5 * (min + max)],
        _ => {
            let step = (max - min) / (g - 1) as f64;
            (0..g).map(|i| if i + 1 == g { max } else { min + i as f64 * step }).collect()
        }
    }
}

fn snap(value: f64, min: f64, max: f64, g: usize) -> f64 {
    if g == 1 {
        return 0.5 * (min + max);
    }
    let step = (max - min) / (g - 1) as f64;
    let idx = ((value - min) / step).round().clamp(0.0, (g - 1) as f64) as usize;
    grid_axis(min, max, g)[idx]
}

/// Maps a normalized action into AP coordinates, optionally snapping each
/// coordinate onto a `grid_resolution`-point grid.
pub fn decode_action(action: &Action, region: &Region, num_tx: usize, grid_resolution: usize) -> Deployment {
    let flat: Vec<f64> = action
        .0
        .chunks_exact(2)
        .flat_map(|c| {
            let p = region.denormalize([c[0].clamp(-1.0, 1.0), c[1].clamp(-1.0, 1.0)]);
            if grid_resolution > 0 {
                [
                    snap(p.x, region.x_min, region.x_max, grid_resolution),
                    snap(p.y, region.y_min, region.y_max, grid_resolution),
                ]
            } else {
                [p.x, p.y]
            }
        })
        .collect();
    Deployment::from_flat(&flat, num_tx)
}

pub fn encode_deployment(deployment: &Deployment, region: &Region) -> Action {
    Action(deployment.points().flat_map(|p| region.normalize(*p)).collect())
}

/// A sampled UE layout: the random part of a state.
#[derive(Clone, Debug, PartialEq)]
pub struct Context {
    pub ues: Vec<Point2D>,
}

/// Reward and successor of one environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub next_state: State,
    pub done: bool,
    pub deployment: Deployment,
}

#[derive(Clone, Debug)]
pub struct DeploymentEnv {
    config: EnvConfig,
    trajectory_points: Vec<Point2D>,
    current: Option<Context>,
}

impl DeploymentEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.scenario.validate_geometry()?;
        config.objective.validate()?;
        let trajectory_points = sample_trajectory(&config.scenario.trajectory);
        Ok(Self { config, trajectory_points, current: None })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn region(&self) -> &Region {
        &self.config.scenario.region
    }

    pub fn trajectory_points(&self) -> &[Point2D] {
        &self.trajectory_points
    }

    pub fn state_dim(&self) -> usize {
        2 * self.config.scenario.num_ues() + 2
    }

    pub fn action_dim(&self) -> usize {
        2 * self.config.scenario.num_aps()
    }

    pub fn sample_context<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Context {
        Context { ues: sample_ues(&self.config.scenario.ue_spec, self.region(), rng) }
    }

    pub fn encode_state(&self, ctx: &Context) -> State {
        let region = self.region();
        let center = region.normalize(self.config.scenario.trajectory.center);
        State(ctx.ues.iter().flat_map(|u| region.normalize(*u)).chain(center).collect())
    }

    pub fn decode(&self, action: &Action) -> Deployment {
        let s = &self.config.scenario;
        decode_action(action, &s.region, s.num_tx, self.config.grid_resolution)
    }

    pub fn report(&self, ctx: &Context, deployment: &Deployment) -> MetricReport {
        evaluate(deployment, &ctx.ues, &self.trajectory_points, &self.config.objective)
    }

    /// Transformed, unscaled objective of `action` under `ctx`.
    pub fn reward(&self, ctx: &Context, action: &Action) -> f64 {
        let report = self.report(ctx, &self.decode(action));
        self.config.reward_transform.apply(report.unscaled_objective(&self.config.objective))
    }

    /// Starts an episode with a fresh UE draw.
    pub fn reset<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) -> State {
        let ctx = self.sample_context(rng);
        let state = self.encode_state(&ctx);
        self.current = Some(ctx);
        state
    }

    pub fn current_context(&self) -> Option<&Context> {
        self.current.as_ref()
    }

    /// Applies `action` in the current episode. Episodes last one step, so
    /// the successor state is the next episode's reset.
    pub fn step<R: rand::Rng + ?Sized>(&mut self, state: &State, action: &Action, rng: &mut R) -> Result<StepOutcome> {
        if action.0.len() != self.action_dim() {
            return Err(Error::Shape { expected: self.action_dim(), got: action.0.len() });
        }
        let ctx = self
            .current
            .take()
            .ok_or_else(|| Error::validation("env", "step called before reset"))?;
        debug_assert_eq!(&self.encode_state(&ctx), state, "state not produced by this env");
        let deployment = self.decode(action);
        let report = self.report(&ctx, &deployment);
        let reward = self.config.reward_transform.apply(report.unscaled_objective(&self.config.objective));
        let next_state = self.reset(rng);
        Ok(StepOutcome { reward, next_state, done: true, deployment })
    }
}
