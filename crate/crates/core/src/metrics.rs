//! Closed-form sensing and communication metrics.
//!
//! Sensing accuracy is the determinant of the angular Fisher information
//! matrix of a bistatic AP layout, which only depends on the bearing of every
//! AP as seen from the target. Communication is the distance-only uplink SNR
//! under zero-forcing reception, and the two are combined multiplicatively.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Deployment, Point2D};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    MaxSum,
    MaxMin,
    CommOnly,
    SensingOnly,
    WeightedSum,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 5] = [
        ObjectiveKind::MaxSum,
        ObjectiveKind::MaxMin,
        ObjectiveKind::CommOnly,
        ObjectiveKind::SensingOnly,
        ObjectiveKind::WeightedSum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::MaxSum => "max-sum",
            ObjectiveKind::MaxMin => "max-min",
            ObjectiveKind::CommOnly => "comm-only",
            ObjectiveKind::SensingOnly => "sensing-only",
            ObjectiveKind::WeightedSum => "weighted-sum",
        }
    }
}

impl std::fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ObjectiveKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::validation("objective.kind", format!("unknown objective `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    /// Communication weight; only read by [`ObjectiveKind::WeightedSum`].
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default = "default_log_base")]
    pub log_base: f64,
    /// Distances are clamped to at least this many meters before inversion.
    #[serde(default = "default_distance_floor")]
    pub distance_floor: f64,
}

fn default_weight() -> f64 {
    0.5
}

fn default_log_base() -> f64 {
    2.0
}

fn default_distance_floor() -> f64 {
    1e-3
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        Self::new(ObjectiveKind::MaxSum)
    }
}

impl ObjectiveSpec {
    pub fn new(kind: ObjectiveKind) -> Self {
        Self {
            kind,
            weight: default_weight(),
            log_base: default_log_base(),
            distance_floor: default_distance_floor(),
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(Error::validation("objective.weight", "must be finite and non-negative"));
        }
        if !(self.log_base.is_finite() && self.log_base > 1.0) {
            return Err(Error::validation("objective.log_base", "must be greater than 1"));
        }
        if !(self.distance_floor.is_finite() && self.distance_floor > 0.0) {
            return Err(Error::validation("objective.distance_floor", "must be positive"));
        }
        Ok(())
    }
}

/// Unit bearing of `ap` as seen from `target`, pointing towards the target
/// (`(p - a) / ‖p - a‖`). Below the floor the vector shrinks instead of
/// blowing up.
#[inline]
fn bearing(target: Point2D, ap: Point2D, floor: f64) -> (f64, f64) {
    let dx = target.x - ap.x;
    let dy = target.y - ap.y;
    let d = dx.hypot(dy).max(floor);
    (dx / d, dy / d)
}

/// Determinant of the 2×2 angular FIM of a bistatic layout at `target`.
///
/// Every (transmitter, receiver) pair contributes the row `α_t + α_r` of the
/// Jacobian, and the determinant equals `A·B − C²` with `A`, `B` the sums of
/// squared x/y components and `C` the cross sum. It is evaluated through the
/// Cauchy–Binet expansion `Σ_{i<j} (u_i v_j − u_j v_i)²`, which is the same
/// quantity but cannot go negative and is exactly zero for a single pair.
pub fn fim_determinant(tx: &[Point2D], rx: &[Point2D], target: Point2D, distance_floor: f64) -> f64 {
    let rx_dirs: Vec<(f64, f64)> = rx.iter().map(|r| bearing(target, *r, distance_floor)).collect();
    let rows: Vec<(f64, f64)> = tx
        .iter()
        .flat_map(|t| {
            let (tc, ts) = bearing(target, *t, distance_floor);
            rx_dirs.iter().map(move |&(rc, rs)| (tc + rc, ts + rs))
        })
        .collect();
    let mut det = 0.0;
    for (i, &(ui, vi)) in rows.iter().enumerate() {
        for &(uj, vj) in &rows[i + 1..] {
            let cross = ui * vj - uj * vi;
            det += cross * cross;
        }
    }
    det
}

/// Asymptotic zero-forcing SNR of a UE: sum of inverse squared distances to
/// every AP.
pub fn snr(ue: Point2D, tx: &[Point2D], rx: &[Point2D], distance_floor: f64) -> f64 {
    tx.iter()
        .chain(rx)
        .map(|ap| {
            let d = ue.distance(*ap).max(distance_floor);
            1.0 / (d * d)
        })
        .sum()
}

/// `log_base(1 + snr)`.
pub fn rate(snr_value: f64, log_base: f64) -> f64 {
    snr_value.ln_1p() / log_base.ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_ue_rate: Vec<f64>,
    pub sum_rate: f64,
    pub min_rate: f64,
    pub per_sample_fim_det: Vec<f64>,
    pub sum_fim_det: f64,
    pub min_fim_det: f64,
    pub objective_value: f64,
}

impl MetricReport {
    pub fn num_samples(&self) -> usize {
        self.per_sample_fim_det.len()
    }

    /// `Σ_k R_k / Q`, the communication column of the comparison tables.
    pub fn rate_per_sample(&self) -> f64 {
        self.sum_rate / self.num_samples() as f64
    }

    /// `Σ_q |Φ|_q / Q`.
    pub fn fim_per_sample(&self) -> f64 {
        self.sum_fim_det / self.num_samples() as f64
    }

    /// Objective without the `1/Q` factors, as used for rewards.
    pub fn unscaled_objective(&self, spec: &ObjectiveSpec) -> f64 {
        match spec.kind {
            ObjectiveKind::MaxSum => self.sum_rate * self.sum_fim_det,
            ObjectiveKind::MaxMin => self.min_rate * self.min_fim_det,
            ObjectiveKind::CommOnly => self.sum_rate,
            ObjectiveKind::SensingOnly => self.sum_fim_det,
            ObjectiveKind::WeightedSum => {
                spec.weight * self.sum_rate + (1.0 - spec.weight) * self.sum_fim_det
            }
        }
    }
}

/// Scalarized objective from the per-UE rates and per-sample determinants.
pub fn objective_value(per_ue_rate: &[f64], per_sample_fim_det: &[f64], spec: &ObjectiveSpec) -> f64 {
    let q = per_sample_fim_det.len() as f64;
    let sum_rate: f64 = per_ue_rate.iter().sum();
    let sum_fim: f64 = per_sample_fim_det.iter().sum();
    match spec.kind {
        ObjectiveKind::MaxSum => (sum_rate / q) * (sum_fim / q),
        ObjectiveKind::MaxMin => min_of(per_ue_rate) * min_of(per_sample_fim_det),
        ObjectiveKind::CommOnly => sum_rate / q,
        ObjectiveKind::SensingOnly => sum_fim / q,
        ObjectiveKind::WeightedSum => spec.weight * (sum_rate / q) + (1.0 - spec.weight) * (sum_fim / q),
    }
}

fn min_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Full metric report of a deployment for fixed UE positions and trajectory
/// samples.
pub fn evaluate(
    deployment: &Deployment,
    ues: &[Point2D],
    trajectory_points: &[Point2D],
    spec: &ObjectiveSpec,
) -> MetricReport {
    let per_ue_rate: Vec<f64> = ues
        .iter()
        .map(|u| rate(snr(*u, &deployment.tx, &deployment.rx, spec.distance_floor), spec.log_base))
        .collect();
    let per_sample_fim_det: Vec<f64> = trajectory_points
        .iter()
        .map(|p| fim_determinant(&deployment.tx, &deployment.rx, *p, spec.distance_floor))
        .collect();
    let objective_value = objective_value(&per_ue_rate, &per_sample_fim_det, spec);
    MetricReport {
        sum_rate: per_ue_rate.iter().sum(),
        min_rate: min_of(&per_ue_rate),
        sum_fim_det: per_sample_fim_det.iter().sum(),
        min_fim_det: min_of(&per_sample_fim_det),
        per_ue_rate,
        per_sample_fim_det,
        objective_value,
    }
}

/// Objective value only; skips building the report vectors' aggregates twice.
pub fn objective_of(
    deployment: &Deployment,
    ues: &[Point2D],
    trajectory_points: &[Point2D],
    spec: &ObjectiveSpec,
) -> f64 {
    evaluate(deployment, ues, trajectory_points, spec).objective_value
}
