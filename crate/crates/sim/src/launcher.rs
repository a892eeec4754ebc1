//! Ball launcher: samples an initial ball state around a nominal aim.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use courtside_core::court::BallState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LauncherConfig {
    pub origin: [f64; 3],
    pub mean_speed: f64,
    pub speed_stddev: f64,
    pub aim_elevation: f64,
    pub elevation_jitter: f64,
    /// Extra azimuth added to the aim at the target, radians.
    pub aim_azimuth: f64,
    pub azimuth_jitter: f64,
    /// Mean y of the aim point on the interception plane.
    pub target_y_mean: f64,
    /// Spread of the aim point on the interception plane.
    pub target_y_stddev: f64,
}

impl LauncherConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.mean_speed > 0.0) {
            return Err("launcher mean_speed must be positive".into());
        }
        let jitters = [self.speed_stddev, self.elevation_jitter, self.azimuth_jitter, self.target_y_stddev];
        if jitters.iter().any(|j| !(*j >= 0.0)) {
            return Err("launcher jitters must be non-negative".into());
        }
        Ok(())
    }

    /// Same launcher with every jitter removed.
    pub fn without_jitter(&self) -> Self {
        Self { speed_stddev: 0.0, elevation_jitter: 0.0, azimuth_jitter: 0.0, target_y_stddev: 0.0, ..self.clone() }
    }
}

/// Initial ball state at t = 0. The ground track is a straight line, so
/// aiming at a sampled y on the plane sets the lateral spread directly.
/// Always consumes four normal draws.
pub fn launch<R: Rng + ?Sized>(cfg: &LauncherConfig, plane_x: f64, rng: &mut R) -> BallState<f64> {
    let mut draw = || -> f64 { StandardNormal.sample(rng) };
    let speed = (cfg.mean_speed + cfg.speed_stddev * draw()).max(0.1);
    let elevation = cfg.aim_elevation + cfg.elevation_jitter * draw();
    let az_noise = cfg.azimuth_jitter * draw();
    let target_y = cfg.target_y_mean + cfg.target_y_stddev * draw();
    let o = Vector3::from(cfg.origin);
    let azimuth = (target_y - o.y).atan2(plane_x - o.x) + cfg.aim_azimuth + az_noise;
    let v = Vector3::new(elevation.cos() * azimuth.cos(), elevation.cos() * azimuth.sin(), elevation.sin()) * speed;
    BallState::new(0.0, o, v)
}
