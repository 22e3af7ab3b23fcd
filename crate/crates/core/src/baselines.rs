//! Reference optimizers for a fixed UE draw: the exhaustive grid oracle,
//! uniform random search and the cross-entropy method.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{decode_action, grid_axis, Action};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricReport, ObjectiveSpec};
use crate::scenario::{sample_trajectory, sample_ues, uniform_point, Deployment, Point2D, Region, Scenario};
use crate::seeded_rng;

/// Stream used to draw the fixed UE layout of a scenario.
pub const UE_STREAM: u64 = 7;

/// A deterministic instance of the placement problem: UEs are fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub region: Region,
    pub ues: Vec<Point2D>,
    pub targets: Vec<Point2D>,
    pub num_tx: usize,
    pub num_rx: usize,
    pub objective: ObjectiveSpec,
}

impl Problem {
    /// Fixes one UE draw from the scenario seed.
    pub fn from_scenario(scenario: &Scenario, objective: ObjectiveSpec) -> Result<Self> {
        scenario.validate_geometry()?;
        objective.validate()?;
        let mut rng = seeded_rng(scenario.seed, UE_STREAM);
        Ok(Self {
            region: scenario.region,
            ues: sample_ues(&scenario.ue_spec, &scenario.region, &mut rng),
            targets: sample_trajectory(&scenario.trajectory),
            num_tx: scenario.num_tx,
            num_rx: scenario.num_rx,
            objective,
        })
    }

    pub fn with_objective(&self, objective: ObjectiveSpec) -> Self {
        Self { objective, ..self.clone() }
    }

    pub fn dimension(&self) -> usize {
        2 * (self.num_tx + self.num_rx)
    }

    pub fn report(&self, deployment: &Deployment) -> MetricReport {
        evaluate(deployment, &self.ues, &self.targets, &self.objective)
    }

    pub fn value(&self, deployment: &Deployment) -> f64 {
        self.report(deployment).objective_value
    }

    fn value_normalized(&self, x: &[f64]) -> f64 {
        self.value(&decode_action(&Action(x.to_vec()), &self.region, self.num_tx, 0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub method: String,
    pub best_deployment: Deployment,
    pub best_value: f64,
    pub evaluations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub points_per_axis: usize,
    pub max_evaluations: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { points_per_axis: 9, max_evaluations: 50_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomConfig {
    pub budget: u64,
}

impl Default for RandomConfig {
    fn default() -> Self {
        Self { budget: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CemConfig {
    pub population: usize,
    pub elite_fraction: f64,
    pub iterations: usize,
    /// Standard deviation of the initial sampling distribution, in
    /// normalized `[-1, 1]` action units.
    pub initial_std: f64,
    /// Independent runs; the first starts at the region center, later ones
    /// at uniform random means.
    pub restarts: usize,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self { population: 64, elite_fraction: 0.125, iterations: 30, initial_std: 0.5, restarts: 1, seed: 0 }
    }
}

impl CemConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(Error::validation("solver.cem.elite_fraction", "must lie in (0, 1)"));
        }
        if (self.population as f64 * self.elite_fraction) < 1.0 {
            return Err(Error::validation("solver.cem", "population · elite_fraction must be at least 1"));
        }
        if !(self.initial_std.is_finite() && self.initial_std >= 0.0) {
            return Err(Error::validation("solver.cem.initial_std", "must be non-negative"));
        }
        if self.restarts == 0 {
            return Err(Error::validation("solver.cem.restarts", "must be at least 1"));
        }
        Ok(())
    }

    fn elite_count(&self) -> usize {
        ((self.population as f64 * self.elite_fraction).floor() as usize).max(1)
    }
}

fn grid_evaluation_count(problem: &Problem, g: usize) -> u128 {
    (g as u128).checked_pow(problem.dimension() as u32).unwrap_or(u128::MAX)
}

/// Exhaustive maximization over the joint grid of all AP coordinates, `g`
/// values per axis. Ties go to the lexicographically smallest coordinate
/// tuple `(tx0.x, tx0.y, …, rx0.x, …)`.
pub fn grid_oracle(problem: &Problem, g: usize, max_evaluations: u64) -> Result<OracleResult> {
    if g == 0 {
        return Err(Error::validation("solver.grid.points_per_axis", "must be at least 1"));
    }
    let count = grid_evaluation_count(problem, g);
    if count > max_evaluations as u128 {
        return Err(Error::BudgetExceeded { count, cap: max_evaluations as u128 });
    }
    let count = count as u64;
    let xs = grid_axis(problem.region.x_min, problem.region.x_max, g);
    let ys = grid_axis(problem.region.y_min, problem.region.y_max, g);
    let dim = problem.dimension();

    // Digit k of the mixed-radix index selects coordinate k, most
    // significant first, so index order is lexicographic coordinate order.
    let decode = |mut index: u64, flat: &mut [f64]| {
        for k in (0..dim).rev() {
            let digit = (index % g as u64) as usize;
            index /= g as u64;
            flat[k] = if k % 2 == 0 { xs[digit] } else { ys[digit] };
        }
    };

    const CHUNK: u64 = 4096;
    let chunks = count.div_ceil(CHUNK);
    let best_per_chunk: Vec<(f64, u64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut flat = vec![0.0; dim];
            let mut best = (f64::NEG_INFINITY, u64::MAX);
            for index in c * CHUNK..((c + 1) * CHUNK).min(count) {
                decode(index, &mut flat);
                let v = problem.value(&Deployment::from_flat(&flat, problem.num_tx));
                if v > best.0 {
                    best = (v, index);
                }
            }
            best
        })
        .collect();
    let (best_value, best_index) = best_per_chunk
        .into_iter()
        .fold((f64::NEG_INFINITY, u64::MAX), |acc, b| if b.0 > acc.0 { b } else { acc });

    let mut flat = vec![0.0; dim];
    decode(best_index, &mut flat);
    Ok(OracleResult {
        method: "grid".into(),
        best_deployment: Deployment::from_flat(&flat, problem.num_tx),
        best_value,
        evaluations: count,
    })
}

pub fn random_deployment<R: rand::Rng + ?Sized>(problem: &Problem, rng: &mut R) -> Deployment {
    Deployment {
        tx: (0..problem.num_tx).map(|_| uniform_point(&problem.region, rng)).collect(),
        rx: (0..problem.num_rx).map(|_| uniform_point(&problem.region, rng)).collect(),
    }
}

/// Best of `budget` uniform deployments (the earliest wins ties).
pub fn random_search<R: rand::Rng + ?Sized>(problem: &Problem, budget: u64, rng: &mut R) -> Result<OracleResult> {
    if budget == 0 {
        return Err(Error::validation("solver.random.budget", "must be at least 1"));
    }
    let mut best: Option<(f64, Deployment)> = None;
    for _ in 0..budget {
        let d = random_deployment(problem, rng);
        let v = problem.value(&d);
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, d));
        }
    }
    let (best_value, best_deployment) = best.expect("budget is at least 1");
    Ok(OracleResult { method: "random".into(), best_deployment, best_value, evaluations: budget })
}

/// CEM result plus the best-ever value after each iteration (all restarts
/// concatenated).
#[derive(Clone, Debug)]
pub struct CemRun {
    pub result: OracleResult,
    pub history: Vec<f64>,
}

pub fn cem_optimize(problem: &Problem, cfg: &CemConfig) -> Result<OracleResult> {
    cem_run(problem, cfg).map(|run| run.result)
}

pub fn cem_run(problem: &Problem, cfg: &CemConfig) -> Result<CemRun> {
    cfg.validate()?;
    let dim = problem.dimension();
    let elites = cfg.elite_count();
    let mut rng = seeded_rng(cfg.seed, 0);
    let mut best: (f64, Vec<f64>) = (f64::NEG_INFINITY, vec![0.0; dim]);
    let mut history = Vec::with_capacity(cfg.iterations * cfg.restarts);
    let mut evaluations = 0u64;

    for restart in 0..cfg.restarts {
        let mut mean: Vec<f64> =
            if restart == 0 { vec![0.0; dim] } else { (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let mut std = vec![cfg.initial_std; dim];
        for _ in 0..cfg.iterations {
            let candidates: Vec<Vec<f64>> = (0..cfg.population)
                .map(|_| {
                    mean.iter()
                        .zip(&std)
                        .map(|(m, s)| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            (m + s * z).clamp(-1.0, 1.0)
                        })
                        .collect()
                })
                .collect();
            let values: Vec<f64> = candidates.par_iter().map(|x| problem.value_normalized(x)).collect();
            evaluations += cfg.population as u64;

            let mut order: Vec<usize> = (0..cfg.population).collect();
            order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
            if values[order[0]] > best.0 {
                best = (values[order[0]], candidates[order[0]].clone());
            }
            history.push(best.0);

            let top = &order[..elites];
            for d in 0..dim {
                let m = top.iter().map(|&i| candidates[i][d]).sum::<f64>() / elites as f64;
                let var = top.iter().map(|&i| (candidates[i][d] - m).powi(2)).sum::<f64>() / elites as f64;
                mean[d] = m;
                std[d] = var.sqrt();
            }
        }
    }

    let best_deployment = decode_action(&Action(best.1), &problem.region, problem.num_tx, 0);
    Ok(CemRun {
        result: OracleResult { method: "cem".into(), best_value: problem.value(&best_deployment), best_deployment, evaluations },
        history,
    })
}
