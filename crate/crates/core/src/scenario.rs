//! Deployment geometry: points, the rectangular region, the circular target
//! trajectory and the Gaussian UE layout.

use std::f64::consts::PI;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

/// A point in the plane, in meters. Serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point2D {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2D> for [f64; 2] {
    fn from(p: Point2D) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned deployment area.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let region = Self { x_min, x_max, y_min, y_max };
        region.validate()?;
        Ok(region)
    }

    /// The square `[-half, half]²`.
    pub fn square(half: f64) -> Self {
        Self { x_min: -half, x_max: half, y_min: -half, y_max: half }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.x_min, self.x_max, self.y_min, self.y_max];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("region", "bounds must be finite"));
        }
        if self.x_min >= self.x_max {
            return Err(Error::validation("region", "x_min must be below x_max"));
        }
        if self.y_min >= self.y_max {
            return Err(Error::validation("region", "y_min must be below y_max"));
        }
        Ok(())
    }

    pub fn contains(&self, p: Point2D) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Point2D {
        Point2D::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    /// Maps a point into `[-1, 1]²` using the region bounds.
    pub fn normalize(&self, p: Point2D) -> [f64; 2] {
        [
            2.0 * (p.x - self.x_min) / self.width() - 1.0,
            2.0 * (p.y - self.y_min) / self.height() - 1.0,
        ]
    }

    /// Inverse of [`Region::normalize`].
    pub fn denormalize(&self, u: [f64; 2]) -> Point2D {
        Point2D::new(
            self.x_min + 0.5 * (u[0] + 1.0) * self.width(),
            self.y_min + 0.5 * (u[1] + 1.0) * self.height(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircularTrajectory {
    pub center: Point2D,
    pub radius: f64,
    /// Number of sample points `Q` along the circle.
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UePlacementSpec {
    pub centers: Vec<Point2D>,
    /// Per-coordinate variance in m².
    #[serde(default = "default_ue_variance")]
    pub variance: f64,
}

fn default_ue_variance() -> f64 {
    2.0
}

impl UePlacementSpec {
    pub fn count(&self) -> usize {
        self.centers.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub region: Region,
    pub trajectory: CircularTrajectory,
    pub ue_spec: UePlacementSpec,
    pub num_tx: usize,
    pub num_rx: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn num_ues(&self) -> usize {
        self.ue_spec.count()
    }

    pub fn num_aps(&self) -> usize {
        self.num_tx + self.num_rx
    }

    /// Full validation, including the `M + N ≥ 3` requirement for configs.
    pub fn validate(&self) -> Result<()> {
        self.validate_geometry()?;
        if self.num_tx + self.num_rx < 3 {
            return Err(Error::validation(
                "counts",
                "num_tx + num_rx must be at least 3 for a non-degenerate sensing objective",
            ));
        }
        Ok(())
    }

    /// Validation without the AP-count lower bound, for programmatic sweeps
    /// that deliberately include the degenerate single-pair layout.
    pub fn validate_geometry(&self) -> Result<()> {
        self.region.validate()?;
        let traj = &self.trajectory;
        if !traj.center.is_finite() {
            return Err(Error::validation("trajectory.center", "must be finite"));
        }
        if !(traj.radius.is_finite() && traj.radius > 0.0) {
            return Err(Error::validation("trajectory.radius", "must be positive"));
        }
        if traj.samples == 0 {
            return Err(Error::validation("trajectory.samples", "must be at least 1"));
        }
        if sample_trajectory(traj).iter().any(|p| !self.region.contains(*p)) {
            return Err(Error::validation("trajectory", "trajectory outside region"));
        }
        if self.ue_spec.centers.is_empty() {
            return Err(Error::validation("ue_spec.centers", "at least one UE is required"));
        }
        for (k, c) in self.ue_spec.centers.iter().enumerate() {
            if !c.is_finite() || !self.region.contains(*c) {
                return Err(Error::validation(
                    format!("ue_spec.centers[{k}]"),
                    "UE center must be a finite point inside the region",
                ));
            }
        }
        let var = self.ue_spec.variance;
        if !(var.is_finite() && var >= 0.0) {
            return Err(Error::validation("ue_spec.variance", "must be finite and non-negative"));
        }
        if self.num_tx == 0 {
            return Err(Error::validation("counts.num_tx", "must be at least 1"));
        }
        if self.num_rx == 0 {
            return Err(Error::validation("counts.num_rx", "must be at least 1"));
        }
        Ok(())
    }
}

/// Transmitter and receiver AP coordinates: the decision variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Deployment {
    pub tx: Vec<Point2D>,
    pub rx: Vec<Point2D>,
}

impl Deployment {
    /// All AP positions, transmitters first.
    pub fn points(&self) -> impl Iterator<Item = &Point2D> {
        self.tx.iter().chain(self.rx.iter())
    }

    /// Checks that every AP is a finite point inside `region`, naming the
    /// first offender.
    pub fn validate_in(&self, region: &Region) -> Result<()> {
        for (label, list) in [("tx", &self.tx), ("rx", &self.rx)] {
            for (i, p) in list.iter().enumerate() {
                if !p.is_finite() || !region.contains(*p) {
                    return Err(Error::validation(
                        format!("{label}[{i}]"),
                        format!("AP {label}[{i}] at ({}, {}) lies outside the region", p.x, p.y),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Flattens to `[tx0.x, tx0.y, ..., rx0.x, rx0.y, ...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.points().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn from_flat(flat: &[f64], num_tx: usize) -> Self {
        let mut pts = flat.chunks_exact(2).map(|c| Point2D::new(c[0], c[1]));
        let tx = pts.by_ref().take(num_tx).collect();
        let rx = pts.collect();
        Self { tx, rx }
    }
}

/// Points `center + radius·(cos 2πq/Q, sin 2πq/Q)` for `q = 0..Q`.
pub fn sample_trajectory(traj: &CircularTrajectory) -> Vec<Point2D> {
    let q = traj.samples;
    (0..q)
        .map(|i| {
            let angle = 2.0 * PI * i as f64 / q as f64;
            Point2D::new(
                traj.center.x + traj.radius * angle.cos(),
                traj.center.y + traj.radius * angle.sin(),
            )
        })
        .collect()
}

/// Gaussian UE draw around each center, clamped into `region`.
pub fn sample_ues<R: rand::Rng + ?Sized>(
    spec: &UePlacementSpec,
    region: &Region,
    rng: &mut R,
) -> Vec<Point2D> {
    if spec.variance == 0.0 {
        return spec.centers.iter().map(|c| clamp_to_region(*c, region)).collect();
    }
    let normal = Normal::new(0.0, spec.variance.sqrt()).expect("variance validated non-negative");
    spec.centers
        .iter()
        .map(|c| {
            let gx = normal.sample(rng);
            let gy = normal.sample(rng);
            clamp_to_region(Point2D::new(c.x + gx, c.y + gy), region)
        })
        .collect()
}

/// Uniform point in the region.
pub(crate) fn uniform_point<R: rand::Rng + ?Sized>(region: &Region, rng: &mut R) -> Point2D {
    Point2D::new(
        rng.random_range(region.x_min..=region.x_max),
        rng.random_range(region.y_min..=region.y_max),
    )
}

pub fn clamp_to_region(p: Point2D, region: &Region) -> Point2D {
    Point2D::new(p.x.clamp(region.x_min, region.x_max), p.y.clamp(region.y_min, region.y_max))
}

/// Parses and validates a config document, returning its scenario part.
pub fn load_scenario(config_text: &str) -> Result<Scenario> {
    ExperimentConfig::from_toml_str(config_text).map(|c| c.scenario)
}
