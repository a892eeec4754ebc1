//! World frame, court geometry, time base and shared kinematic state.
//!
//! World frame: x runs along the court from the robot-side baseline, y across
//! the court (0 on the centre line), z up. The origin sits at the centre of the
//! robot-side baseline.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CourtMode {
    RegulationCourt,
    Lab,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CourtGeometry<T> {
    /// Baseline to baseline, along x.
    pub length: T,
    pub width_doubles: T,
    pub width_singles: T,
    pub net_height: T,
    /// x of the net plane.
    pub net_x: T,
    pub mode: CourtMode,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CourtError {
    #[error("lab courts have no lines to test against")]
    NoCourtLines,
    #[error("invalid court geometry: {0}")]
    Invalid(&'static str),
}

/// ITF singles width.
pub const SINGLES_WIDTH: f64 = 8.23;

pub fn make_regulation_court<T: Real>() -> CourtGeometry<T> {
    let length = T::lit(23.77);
    CourtGeometry {
        length,
        width_doubles: T::lit(10.97),
        width_singles: T::lit(SINGLES_WIDTH),
        net_height: T::lit(1.07),
        net_x: length / T::lit(2.0),
        mode: CourtMode::RegulationCourt,
    }
}

/// The 11 m x 4.57 m lab. It has no court lines; success is judged at the
/// launch plane instead of a landing box.
pub fn make_lab_court<T: Real>() -> CourtGeometry<T> {
    let length = T::lit(11.0);
    let width = T::lit(4.57);
    CourtGeometry {
        length,
        width_doubles: width,
        width_singles: width * T::lit(0.75),
        net_height: T::lit(1.07),
        net_x: length / T::lit(2.0),
        mode: CourtMode::Lab,
    }
}

impl<T: Real> CourtGeometry<T> {
    pub fn validate(&self) -> Result<(), CourtError> {
        if !(self.length > T::zero()) {
            return Err(CourtError::Invalid("length must be positive"));
        }
        if !(self.width_singles < self.width_doubles) {
            return Err(CourtError::Invalid("singles width must be below doubles width"));
        }
        if !(self.net_height > T::zero()) {
            return Err(CourtError::Invalid("net height must be positive"));
        }
        if !(self.net_x > T::zero() && self.net_x < self.length) {
            return Err(CourtError::Invalid("net must lie strictly inside the court"));
        }
        Ok(())
    }

    /// y of the centre line.
    pub fn center_y(&self) -> T {
        T::zero()
    }
}

/// True iff `p` lies inside the singles lines (boundaries inclusive).
pub fn in_singles_bounds<T: Real>(p: &Vector2<T>, court: &CourtGeometry<T>) -> Result<bool, CourtError> {
    if court.mode == CourtMode::Lab {
        return Err(CourtError::NoCourtLines);
    }
    let half = court.width_singles / T::lit(2.0);
    Ok(p.x >= T::zero() && p.x <= court.length && (p.y - court.center_y()).abs() <= half)
}

/// Ball position/velocity in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallState<T: Real> {
    pub t: T,
    pub p: Vector3<T>,
    pub v: Vector3<T>,
    pub bounce_count: u32,
}

impl<T: Real> BallState<T> {
    pub fn new(t: T, p: Vector3<T>, v: Vector3<T>) -> Self {
        Self { t, p, v, bounce_count: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2<T: Real> {
    pub x: T,
    pub y: T,
    pub heading: T,
}

impl<T: Real> Pose2<T> {
    pub fn new(x: T, y: T, heading: T) -> Self {
        Self { x, y, heading }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelchairState<T: Real> {
    pub t: T,
    pub pose: Pose2<T>,
    pub v_lin: T,
    pub v_ang: T,
}

impl<T: Real> WheelchairState<T> {
    pub fn at_rest(t: T, pose: Pose2<T>) -> Self {
        Self { t, pose, v_lin: T::zero(), v_ang: T::zero() }
    }
}

/// Simulation time base. `now` is kept as an integer tick count so that it
/// never accumulates rounding drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock<T: Real> {
    ticks: u64,
    physics_dt: T,
}

impl<T: Real> SimClock<T> {
    pub fn new(physics_dt: T) -> Self {
        assert!(physics_dt > T::zero(), "physics_dt must be positive");
        Self { ticks: 0, physics_dt }
    }

    pub fn now(&self) -> T {
        self.physics_dt * T::from_u64(self.ticks).expect("tick count representable")
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn physics_dt(&self) -> T {
        self.physics_dt
    }

    pub fn advance(&mut self, n: u64) {
        self.ticks += n;
    }
}

impl<T: Real> Default for SimClock<T> {
    fn default() -> Self {
        Self::new(T::lit(1e-3))
    }
}

/// Physical constants for the ball and its environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig<T> {
    /// Magnitude of gravitational acceleration, acting along -z.
    pub gravity: T,
    pub ball_mass: T,
    pub ball_radius: T,
    pub drag_coefficient: T,
    pub air_density: T,
    /// Ratio of outgoing to incoming vertical speed at a floor bounce.
    pub restitution: T,
    /// Fraction of horizontal velocity kept through a bounce.
    pub bounce_horizontal_retention: T,
}

impl<T: Real> Default for WorldConfig<T> {
    fn default() -> Self {
        Self {
            gravity: T::lit(9.81),
            ball_mass: T::lit(0.0577),
            ball_radius: T::lit(0.0335),
            drag_coefficient: T::lit(0.55),
            air_density: T::lit(1.204),
            restitution: T::lit(0.73),
            bounce_horizontal_retention: T::lit(0.80),
        }
    }
}

impl<T: Real> WorldConfig<T> {
    /// Quadratic drag factor k such that drag acceleration = -k |v| v.
    pub fn drag_factor(&self) -> T {
        let area = T::pi() * self.ball_radius * self.ball_radius;
        self.air_density * self.drag_coefficient * area / (T::lit(2.0) * self.ball_mass)
    }

    /// Same constants with drag switched off.
    pub fn without_drag(mut self) -> Self {
        self.drag_coefficient = T::zero();
        self
    }

    pub fn validate(&self) -> Result<(), CourtError> {
        let positive = [
            self.gravity,
            self.ball_mass,
            self.ball_radius,
            self.air_density,
            self.restitution,
            self.bounce_horizontal_retention,
        ];
        if positive.iter().any(|v| !(*v > T::zero())) || self.drag_coefficient < T::zero() {
            return Err(CourtError::Invalid("world constants must be positive"));
        }
        if !(self.restitution < T::one()) {
            return Err(CourtError::Invalid("restitution must be below 1"));
        }
        if self.bounce_horizontal_retention > T::one() {
            return Err(CourtError::Invalid("horizontal retention must not exceed 1"));
        }
        Ok(())
    }
}
