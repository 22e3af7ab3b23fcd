//! Access-point placement for cell-free integrated sensing and communication.
//!
//! The crate is organized bottom-up:
//!
//! - [`scenario`]: geometry, trajectory and UE sampling, config ingestion.
//! - [`metrics`]: FIM determinant, SNR/rate and the scalarized objectives.
//! - [`env`]: the one-step decision process wrapped around the metrics.
//! - [`neural`]: dense networks with hand-written backprop, the squashed
//!   Gaussian policy head, and the Adam optimizer.
//! - [`sac`]: replay buffer, twin critics, temperature tuning, training loop.
//! - [`baselines`]: exhaustive grid oracle, random search, cross-entropy method.
//! - [`report`]: CSV/JSON records and SVG deployment plots.

pub mod baselines;
pub mod config;
pub mod env;
pub mod error;
pub mod metrics;
pub mod neural;
pub mod report;
pub mod sac;
pub mod scenario;

pub use baselines::{cem_optimize, grid_oracle, random_search, CemConfig, OracleResult, Problem};
pub use config::{ExperimentConfig, SolverKind, SolverSpec, SweepSpec};
pub use env::{Action, DeploymentEnv, EnvConfig, RewardTransform, State, Transition};
pub use error::{Error, Result};
pub use metrics::{evaluate, fim_determinant, rate, snr, MetricReport, ObjectiveKind, ObjectiveSpec};
pub use neural::{AdamState, MlpParams, PolicyOutput};
pub use sac::{train, AgentState, CurvePoint, ReplayBuffer, SacConfig, TrainOutput};
pub use scenario::{
    clamp_to_region, load_scenario, sample_trajectory, sample_ues, CircularTrajectory, Deployment,
    Point2D, Region, Scenario, UePlacementSpec,
};

/// Deterministic generator used for every random draw in the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds a generator for an independent stream derived from `seed`.
pub fn seeded_rng(seed: u64, stream: u64) -> Rng {
    use rand::SeedableRng;
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
