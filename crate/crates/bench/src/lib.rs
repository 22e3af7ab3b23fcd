//! Fixtures shared by the criterion benchmarks in `benches/`.

use apdeploy_core::baselines::Problem;
use apdeploy_core::{
    seeded_rng, Action, AgentState, CircularTrajectory, Deployment, ObjectiveSpec, Point2D, Region, SacConfig,
    Scenario, State, Transition, UePlacementSpec,
};

/// `m` transmitters and `n` receivers on a 100 m square, three UEs, eight
/// trajectory samples.
pub fn problem(m: usize, n: usize) -> Problem {
    let scenario = Scenario {
        region: Region::square(50.0),
        trajectory: CircularTrajectory { center: Point2D::new(0.0, 0.0), radius: 10.0, samples: 8 },
        ue_spec: UePlacementSpec {
            centers: vec![Point2D::new(30.0, 30.0), Point2D::new(-35.0, 20.0), Point2D::new(10.0, -40.0)],
            variance: 0.0,
        },
        num_tx: m,
        num_rx: n,
        seed: 1,
    };
    Problem::from_scenario(&scenario, ObjectiveSpec::default()).expect("fixture scenario is valid")
}

/// APs spread on a ring around the origin.
pub fn ring_deployment(m: usize, n: usize) -> Deployment {
    let at = |i: usize| {
        let a = std::f64::consts::TAU * i as f64 / (m + n) as f64;
        Point2D::new(25.0 * a.cos(), 25.0 * a.sin())
    };
    Deployment { tx: (0..m).map(at).collect(), rx: (m..m + n).map(at).collect() }
}

/// Agent with the default network sizes and a filled batch of transitions.
pub fn agent_and_batch(state_dim: usize, action_dim: usize, batch: usize) -> (AgentState, Vec<Transition>) {
    let mut rng = seeded_rng(3, 0);
    let config = SacConfig { learning_rate: 3e-4, ..SacConfig::default() };
    let agent = AgentState::new(state_dim, action_dim, &config, &mut rng);
    let transitions = (0..batch)
        .map(|i| {
            let x = i as f64 / batch as f64;
            Transition {
                state: State(vec![x - 0.5; state_dim]),
                action: Action((0..action_dim).map(|k| ((k as f64 + x) * 1.7).sin()).collect()),
                reward: x,
                next_state: State(vec![x - 0.5; state_dim]),
                done: true,
            }
        })
        .collect();
    (agent, transitions)
}
