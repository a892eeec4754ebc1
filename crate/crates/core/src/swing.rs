//! Fully-extended ground stroke: three driven joints (base yaw, shoulder
//! pitch, elbow pitch) following contact-synchronized trapezoidal velocity
//! profiles, the arm's serial-chain kinematics, the wheelchair placement that
//! puts the racket on the intercept, and racket-ball impact.

use std::io::{self, Write};

use nalgebra::{Rotation3, Vector3};
use thiserror::Error;

use crate::court::{Pose2, WheelchairState};
use crate::predictor::InterceptPrediction;
use crate::scalar::Real;

pub const JOINT_NAMES: [&str; 3] = ["base_yaw", "shoulder_pitch", "elbow_pitch"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwingError {
    #[error("displacement {distance} rad cannot be covered in {duration} s")]
    InfeasibleProfile { distance: f64, duration: f64 },
    #[error("contact height {0} m is below the minimum contact height")]
    TooLow(f64),
    #[error("contact height {0} m is beyond the arm's reach")]
    OutOfReach(f64),
    #[error("{joint} would leave its limits ({value} rad)")]
    JointLimit { joint: &'static str, value: f64 },
    #[error("intercept prediction is not valid")]
    InvalidIntercept,
    #[error("wheelchair target ({0}, {1}) is outside the workspace")]
    OutsideWorkspace(f64, f64),
    #[error("ball is not approaching the racket face")]
    NoContact,
}

/// Minimum-time trapezoidal (or triangular) velocity profile from `q0` to `q1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapezoidProfile<T: Real> {
    pub q0: T,
    pub q1: T,
    /// Peak speed, always non-negative; motion follows the sign of `q1 - q0`.
    pub v_peak: T,
    pub a: T,
    pub t_accel: T,
    pub t_cruise: T,
    pub t_total: T,
    /// Where contact falls within the cruise phase, 0 = cruise start.
    pub contact_fraction: T,
}

impl<T: Real> TrapezoidProfile<T> {
    fn sign(&self) -> T {
        if self.q1 >= self.q0 {
            T::one()
        } else {
            -T::one()
        }
    }

    /// Contact instant measured from the profile start.
    pub fn t_contact(&self) -> T {
        self.t_accel + self.contact_fraction * self.t_cruise
    }

    pub fn velocity(&self, t: T) -> T {
        if t <= T::zero() || t >= self.t_total {
            return T::zero();
        }
        let t_decel = self.t_accel + self.t_cruise;
        let speed = if t < self.t_accel {
            self.a * t
        } else if t <= t_decel {
            self.v_peak
        } else {
            self.a * (self.t_total - t)
        };
        speed * self.sign()
    }

    pub fn position(&self, t: T) -> T {
        if t <= T::zero() {
            return self.q0;
        }
        if t >= self.t_total {
            return self.q1;
        }
        let two = T::lit(2.0);
        let d_accel = self.a * self.t_accel * self.t_accel / two;
        let t_decel = self.t_accel + self.t_cruise;
        let dist = if t < self.t_accel {
            self.a * t * t / two
        } else if t <= t_decel {
            d_accel + self.v_peak * (t - self.t_accel)
        } else {
            let rem = self.t_total - t;
            (self.q1 - self.q0).abs() - self.a * rem * rem / two
        };
        self.q0 + dist * self.sign()
    }
}

/// Minimum-time profile, triangular when the distance is below `v_max^2/a_max`.
pub fn trapezoid<T: Real>(q0: T, q1: T, v_max: T, a_max: T, t_contact_fraction: T) -> TrapezoidProfile<T> {
    assert!(v_max > T::zero() && a_max > T::zero(), "profile limits must be positive");
    let dist = (q1 - q0).abs();
    let fraction = t_contact_fraction.max(T::zero()).min(T::one());
    if dist == T::zero() {
        return TrapezoidProfile {
            q0,
            q1,
            v_peak: T::zero(),
            a: a_max,
            t_accel: T::zero(),
            t_cruise: T::zero(),
            t_total: T::zero(),
            contact_fraction: fraction,
        };
    }
    let (v_peak, t_cruise) = if dist >= v_max * v_max / a_max {
        (v_max, dist / v_max - v_max / a_max)
    } else {
        ((dist * a_max).sqrt(), T::zero())
    };
    let t_accel = v_peak / a_max;
    TrapezoidProfile {
        q0,
        q1,
        v_peak,
        a: a_max,
        t_accel,
        t_cruise,
        t_total: t_accel * T::lit(2.0) + t_cruise,
        contact_fraction: fraction,
    }
}

/// Slowest-peak profile with the given total duration.
pub fn trapezoid_timed<T: Real>(
    q0: T,
    q1: T,
    v_max: T,
    a_max: T,
    duration: T,
) -> Result<TrapezoidProfile<T>, SwingError> {
    let fastest = trapezoid(q0, q1, v_max, a_max, T::lit(0.5));
    let dist = (q1 - q0).abs();
    if duration < fastest.t_total - T::lit(1e-12) {
        return Err(SwingError::InfeasibleProfile { distance: dist.as_f64(), duration: duration.as_f64() });
    }
    if dist == T::zero() {
        return Ok(fastest);
    }
    // duration = dist/v + v/a, smaller root.
    let disc = (a_max * a_max * duration * duration - T::lit(4.0) * a_max * dist).max(T::zero());
    let v_peak = ((a_max * duration - disc.sqrt()) / T::lit(2.0)).min(v_max);
    let t_accel = v_peak / a_max;
    Ok(TrapezoidProfile {
        q0,
        q1,
        v_peak,
        a: a_max,
        t_accel,
        t_cruise: (duration - t_accel * T::lit(2.0)).max(T::zero()),
        t_total: duration,
        contact_fraction: T::lit(0.5),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimit<T: Real> {
    pub q_min: T,
    pub q_max: T,
    pub v_max: T,
    pub a_max: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmModel<T: Real> {
    /// Arm base relative to the wheelchair center, chair frame.
    pub base_offset: Vector3<T>,
    pub l_upper: T,
    pub l_fore: T,
    /// Hand to racket-head center.
    pub l_racket: T,
    /// Base yaw, shoulder pitch, elbow pitch.
    pub joints: [JointLimit<T>; 3],
    /// Fixed upper-arm roll between the two pitch joints.
    pub upper_arm_roll: T,
    /// Racket face normal in the forearm frame, held by the fixed wrist.
    pub face_normal: Vector3<T>,
    /// Joint excursion of each stroke, centred on contact.
    pub stroke_sweep: [T; 3],
    /// Base yaw at contact (0 = arm along the chair heading).
    pub yaw_contact: T,
    /// Lowest contact height accepted.
    pub z_min: T,
}

impl<T: Real> Default for ArmModel<T> {
    fn default() -> Self {
        let roll = T::lit(40f64.to_radians());
        Self {
            base_offset: Vector3::new(T::zero(), T::zero(), T::lit(0.8)),
            l_upper: T::lit(0.55),
            l_fore: T::lit(0.30),
            l_racket: T::lit(0.69),
            joints: [
                JointLimit { q_min: T::lit(-2.6), q_max: T::lit(2.6), v_max: T::lit(3.9), a_max: T::lit(6.82) },
                JointLimit { q_min: T::lit(-2.0), q_max: T::lit(2.0), v_max: T::lit(3.72), a_max: T::lit(11.5) },
                JointLimit { q_min: T::lit(-2.5), q_max: T::lit(2.5), v_max: T::lit(6.23), a_max: T::lit(21.5) },
            ],
            upper_arm_roll: roll,
            face_normal: face_normal_for_tilt(roll, T::lit(6f64.to_radians())),
            stroke_sweep: [T::lit(2.26), T::lit(1.57), T::lit(1.80)],
            yaw_contact: T::zero(),
            z_min: T::lit(0.5),
        }
    }
}

/// Forearm-frame face normal that points along the swing direction, tilted
/// up by `tilt`, when the straight arm is horizontal at contact.
pub fn face_normal_for_tilt<T: Real>(upper_arm_roll: T, tilt: T) -> Vector3<T> {
    let a = tilt - upper_arm_roll;
    Vector3::new(T::zero(), a.cos(), a.sin())
}

impl<T: Real> ArmModel<T> {
    pub fn reach(&self) -> T {
        self.l_upper + self.l_fore + self.l_racket
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.l_upper > T::zero() && self.l_fore > T::zero() && self.l_racket > T::zero()) {
            return Err("arm link lengths must be positive".into());
        }
        for (j, name) in self.joints.iter().zip(JOINT_NAMES) {
            if !(j.v_max > T::zero() && j.a_max > T::zero() && j.q_min < j.q_max) {
                return Err(format!("{name}: limits must be positive and ordered"));
            }
        }
        if (self.face_normal.norm() - T::one()).abs() > T::lit(1e-9) {
            return Err("racket face normal must be a unit vector".into());
        }
        Ok(())
    }
}

/// Racket state from the forward kinematics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RacketState<T: Real> {
    pub center: Vector3<T>,
    pub normal: Vector3<T>,
    pub velocity: Vector3<T>,
}

/// Serial chain: yaw about the chair's vertical at the arm base, shoulder
/// pitch, fixed upper-arm roll, elbow pitch, fixed wrist. Velocity sums each
/// joint's `omega x (center - joint origin)` plus the chair's own motion.
pub fn arm_fk<T: Real>(q: &[T; 3], qd: &[T; 3], chair: &WheelchairState<T>, model: &ArmModel<T>) -> RacketState<T> {
    let z = Vector3::z_axis();
    let y = Vector3::y_axis();
    let r_chair = Rotation3::from_axis_angle(&z, chair.pose.heading);
    let chair_pos = Vector3::new(chair.pose.x, chair.pose.y, T::zero());
    let origin = chair_pos + r_chair * model.base_offset;

    let r1 = r_chair * Rotation3::from_axis_angle(&z, q[0]);
    let r2 = r1 * Rotation3::from_axis_angle(&y, -q[1]);
    let elbow = origin + r2 * Vector3::new(model.l_upper, T::zero(), T::zero());
    let r2_roll = r2 * Rotation3::from_axis_angle(&Vector3::x_axis(), model.upper_arm_roll);
    let r3 = r2_roll * Rotation3::from_axis_angle(&y, q[2]);
    let reach = model.l_fore + model.l_racket;
    let center = elbow + r3 * Vector3::new(reach, T::zero(), T::zero());
    let normal = r3 * model.face_normal;

    let axes = [r_chair * z.into_inner(), r1 * -Vector3::y(), r2_roll * Vector3::y()];
    let origins = [origin, origin, elbow];
    let mut velocity = Vector3::zeros();
    for i in 0..3 {
        velocity += (axes[i] * qd[i]).cross(&(center - origins[i]));
    }
    let heading = Vector3::new(chair.pose.heading.cos(), chair.pose.heading.sin(), T::zero());
    velocity += heading * chair.v_lin + (z.into_inner() * chair.v_ang).cross(&(center - chair_pos));
    RacketState { center, normal, velocity }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrokePlan<T: Real> {
    pub start: [T; 3],
    pub contact: [T; 3],
    pub end: [T; 3],
    pub profiles: [TrapezoidProfile<T>; 3],
    /// Per-joint start delay so every joint reaches contact together.
    pub delays: [T; 3],
    pub t_to_contact: T,
    pub trigger_time: T,
}

impl<T: Real> StrokePlan<T> {
    /// Stroke duration from trigger to the last joint stopping.
    pub fn duration(&self) -> T {
        (0..3).map(|i| self.delays[i] + self.profiles[i].t_total).fold(T::zero(), |a, b| a.max(b))
    }

    /// Joint positions and rates `t` seconds after the trigger.
    pub fn sample(&self, t: T) -> ([T; 3], [T; 3]) {
        let mut q = [T::zero(); 3];
        let mut qd = [T::zero(); 3];
        for i in 0..3 {
            let local = t - self.delays[i];
            q[i] = self.profiles[i].position(local);
            qd[i] = self.profiles[i].velocity(local);
        }
        (q, qd)
    }

    /// Joint trace at `dt` resolution: `t,q_*,qd_*` per joint.
    pub fn write_csv<W: Write>(&self, mut out: W, dt: T) -> io::Result<()> {
        writeln!(out, "t,q_base_yaw,q_shoulder_pitch,q_elbow_pitch,qd_base_yaw,qd_shoulder_pitch,qd_elbow_pitch")?;
        let n = (self.duration() / dt).ceil().as_f64() as u64;
        for k in 0..=n {
            let t = dt * T::from_u64(k).expect("sample index");
            let (q, qd) = self.sample(t);
            writeln!(
                out,
                "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                t.as_f64(),
                q[0].as_f64(),
                q[1].as_f64(),
                q[2].as_f64(),
                qd[0].as_f64(),
                qd[1].as_f64(),
                qd[2].as_f64()
            )?;
        }
        Ok(())
    }
}

/// Shoulder elevation that puts the straight arm's racket center at height `z`.
pub fn contact_configuration<T: Real>(z: T, model: &ArmModel<T>) -> Result<[T; 3], SwingError> {
    if z < model.z_min {
        return Err(SwingError::TooLow(z.as_f64()));
    }
    let rise = z - model.base_offset.z;
    if rise.abs() > model.reach() {
        return Err(SwingError::OutOfReach(z.as_f64()));
    }
    Ok([model.yaw_contact, (rise / model.reach()).asin(), T::zero()])
}

/// Stroke through the intercept height with the arm straight at contact.
/// `trigger_time` is left relative to the crossing (`t_cross - t_to_contact`).
pub fn plan_stroke<T: Real>(
    intercept: &InterceptPrediction<T>,
    model: &ArmModel<T>,
) -> Result<StrokePlan<T>, SwingError> {
    if !intercept.valid {
        return Err(SwingError::InvalidIntercept);
    }
    let contact = contact_configuration(intercept.point.z, model)?;
    let half = T::lit(0.5);
    let mut start = [T::zero(); 3];
    let mut end = [T::zero(); 3];
    let mut profiles = [trapezoid(T::zero(), T::zero(), T::one(), T::one(), half); 3];
    for i in 0..3 {
        let sweep = model.stroke_sweep[i] * half;
        start[i] = contact[i] - sweep;
        end[i] = contact[i] + sweep;
        let lim = &model.joints[i];
        for v in [start[i], contact[i], end[i]] {
            if v < lim.q_min || v > lim.q_max {
                return Err(SwingError::JointLimit { joint: JOINT_NAMES[i], value: v.as_f64() });
            }
        }
        profiles[i] = trapezoid(start[i], end[i], lim.v_max, lim.a_max, half);
    }
    let t_to_contact = profiles.iter().map(|p| p.t_contact()).fold(T::zero(), |a, b| a.max(b));
    let delays = [0, 1, 2].map(|i| t_to_contact - profiles[i].t_contact());
    Ok(StrokePlan {
        start,
        contact,
        end,
        profiles,
        delays,
        t_to_contact,
        trigger_time: intercept.t_cross - t_to_contact,
    })
}

/// Region the wheelchair may be sent to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Workspace<T: Real> {
    pub x_min: T,
    pub x_max: T,
    pub y_min: T,
    pub y_max: T,
}

impl<T: Real> Workspace<T> {
    pub fn contains(&self, x: T, y: T) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyConfig<T: Real> {
    pub arm: ArmModel<T>,
    /// Chair heading while striking; the arm points along it at contact.
    pub strike_heading: T,
    pub workspace: Workspace<T>,
    pub lockout: T,
}

impl<T: Real> StrategyConfig<T> {
    /// Robot half of a court of the given length and width.
    pub fn for_court(net_x: T, width: T) -> Self {
        let half_w = width / T::lit(2.0) + T::lit(1.5);
        Self {
            arm: ArmModel::default(),
            strike_heading: -T::frac_pi_2(),
            workspace: Workspace { x_min: T::lit(-3.0), x_max: net_x - T::lit(0.5), y_min: -half_w, y_max: half_w },
            lockout: T::lit(0.05),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plan<T: Real> {
    pub base_target: Pose2<T>,
    pub stroke: StrokePlan<T>,
    pub intercept: InterceptPrediction<T>,
    /// After this instant the plan is frozen.
    pub lockout_time: T,
}

/// Places the chair so the racket center at contact lands on the intercept
/// point, and plans the stroke that reaches it at the crossing time.
pub fn plan<T: Real>(
    intercept: &InterceptPrediction<T>,
    _chair: &WheelchairState<T>,
    cfg: &StrategyConfig<T>,
) -> Result<Plan<T>, SwingError> {
    let stroke = plan_stroke(intercept, &cfg.arm)?;
    let at_origin = WheelchairState::at_rest(T::zero(), Pose2::new(T::zero(), T::zero(), cfg.strike_heading));
    let c = arm_fk(&stroke.contact, &[T::zero(); 3], &at_origin, &cfg.arm).center;
    let target = Pose2::new(intercept.point.x - c.x, intercept.point.y - c.y, cfg.strike_heading);
    if !cfg.workspace.contains(target.x, target.y) {
        return Err(SwingError::OutsideWorkspace(target.x.as_f64(), target.y.as_f64()));
    }
    Ok(Plan { base_target: target, stroke, intercept: *intercept, lockout_time: stroke.trigger_time - cfg.lockout })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Replan,
    Locked,
}

pub fn replan_gate<T: Real>(now: T, trigger_time: T, lockout: T) -> Gate {
    if now >= trigger_time - lockout {
        Gate::Locked
    } else {
        Gate::Replan
    }
}

/// Racket-ball contact with an immovable racket: the normal component of the
/// relative velocity is reflected and scaled by `e_r`, the tangential part kept.
pub fn racket_impact<T: Real>(
    ball_v: &Vector3<T>,
    racket_v: &Vector3<T>,
    normal: &Vector3<T>,
    e_r: T,
) -> Result<Vector3<T>, SwingError> {
    let rel = ball_v - racket_v;
    let vn = rel.dot(normal);
    if vn >= T::zero() {
        return Err(SwingError::NoContact);
    }
    Ok(racket_v + rel - normal * ((T::one() + e_r) * vn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;
    use proptest::prelude::*;

    fn intercept_at(p: [f64; 3], t_cross: f64) -> InterceptPrediction<f64> {
        InterceptPrediction {
            plane_x: p[0],
            t_issue: 0.0,
            point: Vector3::from(p),
            t_cross,
            v_cross: Vector3::new(-4.0, 0.0, -1.0),
            pos_cov: Matrix3::identity() * 0.0025,
            valid: true,
        }
    }

    fn check_profile(p: &TrapezoidProfile<f64>, v_max: f64, a_max: f64) {
        let dt = 1e-3;
        let n = (p.t_total / dt).ceil() as usize + 1;
        let mut integral = 0.0;
        let mut prev_v = 0.0;
        for k in 0..=n {
            let t = k as f64 * dt;
            let v = p.velocity(t);
            assert!(v.abs() <= v_max + 1e-12);
            assert!((v - prev_v).abs() <= a_max * dt + 1e-9);
            prev_v = v;
            if k > 0 {
                // exact for piecewise-linear velocity between breakpoints
                integral += p.position(t) - p.position(t - dt);
            }
        }
        assert!((integral - (p.q1 - p.q0)).abs() < 1e-9);
    }

    #[test]
    fn degenerate_profile() {
        let p = trapezoid(0.3f64, 0.3, 3.0, 10.0, 0.5);
        assert_eq!((p.t_accel, p.t_cruise, p.t_total), (0.0, 0.0, 0.0));
        assert_eq!(p.position(1.0), 0.3);
    }

    #[test]
    fn elbow_profile_peaks_like_recorded_swing() {
        let p = trapezoid(-0.9f64, 0.9, 6.23, 21.5, 0.5);
        assert!(p.t_cruise == 0.0);
        assert!((p.v_peak - 6.22093).abs() < 1e-3);
        check_profile(&p, 6.23, 21.5);
    }

    #[test]
    fn plateaus_of_shoulder_and_yaw() {
        let s = trapezoid(0.0f64, 1.57, 3.72, 11.5, 0.5);
        assert_eq!(s.v_peak, 3.72);
        assert!(s.t_cruise > 0.0);
        let y = trapezoid(1.13f64, -1.13, 3.9, 6.82, 0.5);
        assert_eq!(y.v_peak, 3.9);
        assert!((y.t_total - 1.1513).abs() < 1e-3);
        assert!(y.velocity(0.6) < 0.0);
        check_profile(&s, 3.72, 11.5);
        check_profile(&y, 3.9, 6.82);
    }

    proptest! {
        #[test]
        fn profiles_respect_limits(q0 in -2.0..2.0f64, q1 in -2.0..2.0f64, v in 0.5..8.0f64, a in 2.0..30.0f64) {
            let p = trapezoid(q0, q1, v, a, 0.5);
            check_profile(&p, v, a);
            prop_assert!((p.position(p.t_total) - q1).abs() < 1e-12);
        }
    }

    #[test]
    fn timed_profile() {
        let p = trapezoid_timed(0.0f64, 1.0, 3.0, 10.0, 1.0).unwrap();
        assert!((p.t_total - 1.0).abs() < 1e-12);
        assert!((p.position(1.0) - 1.0).abs() < 1e-12);
        check_profile(&p, 3.0, 10.0);
        assert!(matches!(trapezoid_timed(0.0, 2.0, 1.0, 1.0, 1.0), Err(SwingError::InfeasibleProfile { .. })));
    }

    #[test]
    fn stroke_is_synchronized_at_contact() {
        let model = ArmModel::default();
        let s = plan_stroke(&intercept_at([8.1, -1.5, 1.3], 2.0), &model).unwrap();
        assert!(s.t_to_contact >= 0.45 && s.t_to_contact <= 0.60, "{}", s.t_to_contact);
        let (q, qd) = s.sample(s.t_to_contact);
        for i in 0..3 {
            assert!((q[i] - s.contact[i]).abs() < 1e-9);
            let t_hit = s.delays[i] + s.profiles[i].t_contact();
            assert!((t_hit - s.t_to_contact).abs() < 1e-6);
            assert!((qd[i] - model.joints[i].v_max.min(s.profiles[i].v_peak)).abs() < 1e-9);
        }
        assert!((s.trigger_time - (2.0 - s.t_to_contact)).abs() < 1e-12);
        // Base yaw is the slowest joint and starts first.
        assert_eq!(s.delays[0], 0.0);
        assert!(s.delays[1] > 0.0 && s.delays[2] > s.delays[1]);
    }

    #[test]
    fn stroke_height_limits() {
        let model = ArmModel::default();
        assert_eq!(plan_stroke(&intercept_at([8.1, -1.5, 0.1], 2.0), &model).unwrap_err(), SwingError::TooLow(0.1));
        let too_high = model.base_offset.z + model.reach() + 0.01;
        assert!(matches!(
            plan_stroke(&intercept_at([8.1, -1.5, too_high], 2.0), &model),
            Err(SwingError::OutOfReach(_))
        ));
        let mut invalid = intercept_at([8.1, -1.5, 1.3], 2.0);
        invalid.valid = false;
        assert_eq!(plan_stroke(&invalid, &model).unwrap_err(), SwingError::InvalidIntercept);
    }

    #[test]
    fn head_speed_from_recorded_rates() {
        let model = ArmModel::default();
        let chair = WheelchairState::at_rest(0.0, Pose2::new(0.0, 0.0, -std::f64::consts::FRAC_PI_2));
        let r = arm_fk(&[0.0, 0.0, 0.0], &[3.9, 3.71, 6.22], &chair, &model);
        let speed = r.velocity.norm();
        assert!((8.5..=11.5).contains(&speed), "{speed}");
        // Swing drives the racket toward +x with the face looking that way.
        assert!(r.velocity.x > 0.9 * speed);
        assert!(r.normal.x > 0.95);
        let still = arm_fk(&[0.0, 0.3, 0.0], &[0.0; 3], &chair, &model);
        assert_eq!(still.velocity, Vector3::zeros());
    }

    #[test]
    fn fk_velocity_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let model = ArmModel::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for _ in 0..1000 {
            let q = [rng.random_range(-2.0..2.0), rng.random_range(-1.5..1.5), rng.random_range(-2.0..2.0)];
            let qd = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-6.0..6.0)];
            let chair = WheelchairState::at_rest(
                0.0,
                Pose2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)),
            );
            let analytic = arm_fk(&q, &qd, &chair, &model).velocity;
            let at = |s: f64| {
                let qs = [q[0] + s * qd[0], q[1] + s * qd[1], q[2] + s * qd[2]];
                arm_fk(&qs, &[0.0; 3], &chair, &model).center
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            let rel = (fd - analytic).norm() / analytic.norm().max(1e-3);
            assert!(rel <= 1e-6, "rel {rel}");
        }
    }

    #[test]
    fn base_motion_adds_to_racket_velocity() {
        let model = ArmModel::default();
        let mut chair = WheelchairState::at_rest(0.0, Pose2::new(1.0, 2.0, 0.3));
        chair.v_lin = 1.5;
        let r = arm_fk(&[0.2, 0.1, 0.0], &[0.0; 3], &chair, &model);
        assert!((r.velocity - Vector3::new(0.3f64.cos(), 0.3f64.sin(), 0.0) * 1.5).norm() < 1e-12);
    }

    #[test]
    fn plan_places_racket_on_intercept() {
        let cfg = StrategyConfig::for_court(11.885, 10.97);
        let chair = WheelchairState::at_rest(0.0, Pose2::new(8.1, 0.0, cfg.strike_heading));
        let ic = intercept_at([8.1, -1.4, 1.3], 1.9);
        let p = plan(&ic, &chair, &cfg).unwrap();
        let at_target = WheelchairState::at_rest(0.0, p.base_target);
        let c = arm_fk(&p.stroke.contact, &[0.0; 3], &at_target, &cfg.arm).center;
        assert!((c - ic.point).norm() < 1e-12);
        assert!((p.lockout_time - (p.stroke.trigger_time - 0.05)).abs() < 1e-12);

        // Already in place: target equals the current pose.
        let in_place = WheelchairState::at_rest(0.0, p.base_target);
        assert_eq!(plan(&ic, &in_place, &cfg).unwrap().base_target, p.base_target);

        for dy in [0.05, -0.3, 0.7] {
            let mut shifted = ic;
            shifted.point.y += dy;
            shifted.t_cross += 0.01;
            let q = plan(&shifted, &chair, &cfg).unwrap();
            assert!((q.base_target.y - p.base_target.y - dy).abs() < 1e-12);
            assert_eq!(q.base_target.x, p.base_target.x);
            assert!((q.stroke.trigger_time - p.stroke.trigger_time - 0.01).abs() < 1e-12);
        }

        let far = intercept_at([8.1, -30.0, 1.3], 1.9);
        assert!(matches!(plan(&far, &chair, &cfg), Err(SwingError::OutsideWorkspace(..))));
    }

    #[test]
    fn gate_boundaries() {
        assert_eq!(replan_gate(0.0, 1.0, 0.05), Gate::Replan);
        assert_eq!(replan_gate(1.0, 1.0, 0.05), Gate::Locked);
        assert_eq!(replan_gate(0.95, 1.0, 0.05), Gate::Locked);
        assert_eq!(replan_gate(0.9499, 1.0, 0.05), Gate::Replan);
    }

    #[test]
    fn impact_cases() {
        let n = Vector3::new(1.0f64, 0.0, 0.0);
        let v = Vector3::new(-5.0, 0.0, 0.0);
        assert_eq!(racket_impact(&v, &Vector3::zeros(), &n, 1.0).unwrap(), Vector3::new(5.0, 0.0, 0.0));
        let oblique = Vector3::new(-5.0, 2.0, -1.0);
        assert_eq!(racket_impact(&oblique, &Vector3::zeros(), &n, 0.0).unwrap(), Vector3::new(0.0, 2.0, -1.0));
        let racket = Vector3::new(10.0, 0.0, 1.0);
        let out = racket_impact(&oblique, &racket, &n, 0.85).unwrap();
        let rel_in = (oblique - racket).dot(&n).abs();
        assert!((out.dot(&n) - (0.85 * rel_in + racket.dot(&n))).abs() < 1e-12);
        assert_eq!(
            racket_impact(&Vector3::new(5.0, 0.0, 0.0), &Vector3::zeros(), &n, 0.85),
            Err(SwingError::NoContact)
        );
    }

    #[test]
    fn stroke_csv_has_one_row_per_ms() {
        let s = plan_stroke(&intercept_at([8.1, -1.5, 1.3], 2.0), &ArmModel::default()).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf, 1e-3).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows = text.lines().count() - 1;
        assert_eq!(rows as f64, (s.duration() / 1e-3).ceil() + 1.0);
    }
}
