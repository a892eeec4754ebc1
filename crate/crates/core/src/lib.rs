//! Simulation library for a wheelchair tennis robot: ball flight physics,
//! decentralized noisy vision, EKF tracking with lag replay, interception
//! rollout, stroke planning and differential-drive base motion.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases at the crate root fix the scalar to `f64`.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod base;
pub mod court;
pub mod dynamics;
pub mod predictor;
pub mod scalar;
pub mod swing;
pub mod tracker;
pub mod vision;

pub use scalar::Real;

pub type CourtGeometry64 = court::CourtGeometry<f64>;
pub type WorldConfig64 = court::WorldConfig<f64>;
pub type BallState64 = court::BallState<f64>;
pub type BallState32 = court::BallState<f32>;
pub type WheelchairState64 = court::WheelchairState<f64>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type NoiseModel64 = vision::NoiseModel<f64>;
pub type Measurement64 = vision::Measurement<f64>;
pub type Measurement32 = vision::Measurement<f32>;
pub type RigConfig64 = vision::RigConfig<f64>;
pub type TrackerState64 = tracker::TrackerState<f64>;
pub type TrackerConfig64 = tracker::TrackerConfig<f64>;
pub type InterceptPrediction64 = predictor::InterceptPrediction<f64>;
pub type ArmModel64 = swing::ArmModel<f64>;
pub type StrokePlan64 = swing::StrokePlan<f64>;
pub type Plan64 = swing::Plan<f64>;
pub type BaseConfig64 = base::BaseConfig<f64>;
pub type BaseTrajectory64 = base::BaseTrajectory<f64>;
