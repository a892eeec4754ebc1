//! Differential-drive wheelchair: wheel-speed conversion, exact unicycle
//! stepping, and a rotate-translate-rotate point-to-point planner whose
//! longitudinal profile respects separate acceleration and braking caps.

use std::io::{self, Write};

use crate::court::{Pose2, WheelchairState};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseConfig<T: Real> {
    pub track_width: T,
    pub wheel_radius: T,
    /// Motor revolutions per wheel revolution.
    pub gear_reduction: T,
    pub v_max_lin: T,
    pub v_max_ang: T,
    pub a_max: T,
    /// Braking deceleration cap.
    pub d_max: T,
    /// Angular acceleration cap for in-place turns.
    pub alpha_max: T,
    /// First-order velocity lag time constant; zero means ideal tracking.
    pub lag_tau: T,
}

impl<T: Real> Default for BaseConfig<T> {
    fn default() -> Self {
        let track = T::lit(0.66);
        let a = T::lit(1.42);
        Self {
            track_width: track,
            wheel_radius: T::lit(0.30),
            gear_reduction: T::lit(20.0),
            v_max_lin: T::lit(4.34),
            v_max_ang: T::lit(5.8),
            a_max: a,
            d_max: T::lit(1.60),
            // Wheel rim acceleration equal to the linear cap.
            alpha_max: a * T::lit(2.0) / track,
            lag_tau: T::zero(),
        }
    }
}

impl<T: Real> BaseConfig<T> {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.track_width,
            self.wheel_radius,
            self.gear_reduction,
            self.v_max_lin,
            self.v_max_ang,
            self.a_max,
            self.d_max,
            self.alpha_max,
        ];
        if all.iter().all(|v| *v > T::zero()) && self.lag_tau >= T::zero() {
            Ok(())
        } else {
            Err("base limits and dimensions must be positive".into())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseCommand<T: Real> {
    pub v: T,
    pub omega: T,
}

/// Wheel angular speeds, rad/s at the wheel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelSpeeds<T: Real> {
    pub left: T,
    pub right: T,
    /// Set when the command had to be clamped to the caps.
    pub clamped: bool,
}

impl<T: Real> WheelSpeeds<T> {
    pub fn motor(&self, cfg: &BaseConfig<T>) -> (T, T) {
        (self.left * cfg.gear_reduction, self.right * cfg.gear_reduction)
    }
}

pub fn wheel_speeds<T: Real>(cmd: &BaseCommand<T>, cfg: &BaseConfig<T>) -> WheelSpeeds<T> {
    let v = cmd.v.max(-cfg.v_max_lin).min(cfg.v_max_lin);
    let omega = cmd.omega.max(-cfg.v_max_ang).min(cfg.v_max_ang);
    let half = cfg.track_width / T::lit(2.0);
    WheelSpeeds {
        left: (v - omega * half) / cfg.wheel_radius,
        right: (v + omega * half) / cfg.wheel_radius,
        clamped: v != cmd.v || omega != cmd.omega,
    }
}

pub fn body_velocity<T: Real>(w: &WheelSpeeds<T>, cfg: &BaseConfig<T>) -> BaseCommand<T> {
    let r = cfg.wheel_radius;
    BaseCommand { v: (w.right + w.left) * r / T::lit(2.0), omega: (w.right - w.left) * r / cfg.track_width }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let two_pi = T::two_pi();
    let mut x = a % two_pi;
    if x > T::pi() {
        x -= two_pi;
    } else if x <= -T::pi() {
        x += two_pi;
    }
    x
}

/// Exact unicycle motion under constant `(v, omega)` for `dt`.
pub fn step_base<T: Real>(s: &WheelchairState<T>, cmd: &BaseCommand<T>, dt: T) -> WheelchairState<T> {
    assert!(dt > T::zero(), "step length must be positive");
    let h = s.pose.heading;
    let dh = cmd.omega * dt;
    let (dx, dy) = if dh.abs() < T::lit(1e-12) {
        (cmd.v * dt * h.cos(), cmd.v * dt * h.sin())
    } else {
        let r = cmd.v / cmd.omega;
        (r * ((h + dh).sin() - h.sin()), -r * ((h + dh).cos() - h.cos()))
    };
    WheelchairState {
        t: s.t + dt,
        pose: Pose2::new(s.pose.x + dx, s.pose.y + dy, wrap_angle(h + dh)),
        v_lin: cmd.v,
        v_ang: cmd.omega,
    }
}

/// Constant-acceleration piece of a 1-D motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase<T: Real> {
    pub duration: T,
    pub v0: T,
    pub accel: T,
}

/// Piecewise constant-acceleration motion along one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Motion1D<T: Real> {
    pub phases: Vec<Phase<T>>,
}

impl<T: Real> Motion1D<T> {
    pub fn duration(&self) -> T {
        self.phases.iter().fold(T::zero(), |a, p| a + p.duration)
    }

    /// Displacement and velocity at `t` (clamped to the motion).
    pub fn eval(&self, t: T) -> (T, T) {
        let mut s = T::zero();
        let mut rem = t.max(T::zero());
        let half = T::lit(0.5);
        for p in &self.phases {
            if rem <= p.duration {
                return (s + p.v0 * rem + half * p.accel * rem * rem, p.v0 + p.accel * rem);
            }
            s += p.v0 * p.duration + half * p.accel * p.duration * p.duration;
            rem -= p.duration;
        }
        (s, self.phases.last().map_or(T::zero(), |p| p.v0 + p.accel * p.duration))
    }

    /// Displacement over the local interval `[ta, ta + dt]`, integrated
    /// phase by phase. A tick inside one phase uses `dt` itself as the width,
    /// so successive tick averages differ by exactly `accel * dt`.
    pub fn displacement_over(&self, ta: T, dt: T) -> T {
        let half = T::lit(0.5);
        let mut acc = T::zero();
        let mut cur = ta;
        let mut rem = dt;
        let mut p0 = T::zero();
        for p in &self.phases {
            let p1 = p0 + p.duration;
            if rem > T::zero() && cur < p1 {
                if cur < p0 {
                    let skip = (p0 - cur).min(rem);
                    cur = p0;
                    rem -= skip;
                }
                let w = (p1 - cur).min(rem);
                if w > T::zero() {
                    let u0 = cur - p0;
                    acc += w * (p.v0 + p.accel * (u0 + half * w));
                    cur += w;
                    rem -= w;
                }
            }
            p0 = p1;
        }
        acc
    }

    /// Brakes from `v0` to rest at `rate`.
    pub fn stop(v0: T, rate: T) -> Self {
        if v0 == T::zero() {
            return Self { phases: Vec::new() };
        }
        let accel = if v0 > T::zero() { -rate } else { rate };
        Self { phases: vec![Phase { duration: v0.abs() / rate, v0, accel }] }
    }

    /// Moves `dist` (signed), starting at velocity `v0` and ending at rest,
    /// as fast as `v_max`, `a` (speeding up) and `d` (braking) allow.
    pub fn plan(dist: T, v0: T, v_max: T, a: T, d: T) -> Self {
        let mut phases = Vec::new();
        let mut dist = dist;
        let mut v0 = v0.max(-v_max).min(v_max);
        let two = T::lit(2.0);
        // Moving the wrong way, or too fast to stop in time: brake first.
        // The brake runs straight into motion the other way, so it is held
        // to the smaller cap; a tick spanning the reversal then mixes
        // nothing steeper than either limit.
        let stop_dist = v0 * v0 / (two * d);
        if v0 != T::zero() && (v0 * dist < T::zero() || stop_dist > dist.abs()) {
            let b = a.min(d);
            let dur = v0.abs() / b;
            let accel = if v0 > T::zero() { -b } else { b };
            phases.push(Phase { duration: dur, v0, accel });
            dist -= v0 * dur + accel * dur * dur / two;
            v0 = T::zero();
        }
        if dist == T::zero() {
            return Self { phases };
        }
        let dir = if dist > T::zero() { T::one() } else { -T::one() };
        let len = dist.abs();
        let u0 = v0.abs();
        let mut peak = ((len + u0 * u0 / (two * a)) / (T::one() / (two * a) + T::one() / (two * d))).sqrt();
        let mut cruise = T::zero();
        if peak > v_max {
            peak = v_max;
            let ramp = (peak * peak - u0 * u0) / (two * a) + peak * peak / (two * d);
            cruise = (len - ramp) / peak;
        }
        let t_up = (peak - u0) / a;
        if t_up > T::zero() {
            phases.push(Phase { duration: t_up, v0: u0 * dir, accel: a * dir });
        }
        if cruise > T::zero() {
            phases.push(Phase { duration: cruise, v0: peak * dir, accel: T::zero() });
        }
        phases.push(Phase { duration: peak / d, v0: peak * dir, accel: -d * dir });
        Self { phases }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Segment<T: Real> {
    /// In-place turn; the motion is in heading.
    Rotate { start: Pose2<T>, motion: Motion1D<T> },
    /// Straight run along `start.heading`; the motion is arc length.
    Translate { start: Pose2<T>, motion: Motion1D<T> },
}

impl<T: Real> Segment<T> {
    fn motion(&self) -> &Motion1D<T> {
        match self {
            Segment::Rotate { motion, .. } | Segment::Translate { motion, .. } => motion,
        }
    }

    fn state_at(&self, t: T) -> (Pose2<T>, T, T) {
        match self {
            Segment::Rotate { start, motion } => {
                let (s, w) = motion.eval(t);
                (Pose2::new(start.x, start.y, wrap_angle(start.heading + s)), T::zero(), w)
            }
            Segment::Translate { start, motion } => {
                let (s, v) = motion.eval(t);
                let p = Pose2::new(start.x + s * start.heading.cos(), start.y + s * start.heading.sin(), start.heading);
                (p, v, T::zero())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseTrajectory<T: Real> {
    pub t0: T,
    pub start: Pose2<T>,
    pub segments: Vec<Segment<T>>,
}

impl<T: Real> BaseTrajectory<T> {
    pub fn duration(&self) -> T {
        self.segments.iter().fold(T::zero(), |a, s| a + s.motion().duration())
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Planned state at absolute time `t`.
    pub fn state_at(&self, t: T) -> WheelchairState<T> {
        let mut rem = t - self.t0;
        let mut pose = self.start;
        for seg in &self.segments {
            let d = seg.motion().duration();
            let (p, v, w) = seg.state_at(rem);
            if rem <= d {
                return WheelchairState { t, pose: p, v_lin: v, v_ang: w };
            }
            pose = p;
            rem -= d;
        }
        WheelchairState::at_rest(t, pose)
    }

    /// Constant command that reproduces the planned motion over
    /// `[t, t + dt]`: mean speed along the path and mean turn rate.
    pub fn command(&self, t: T, dt: T) -> BaseCommand<T> {
        let (mut ds, mut dh) = (T::zero(), T::zero());
        let mut seg_start = self.t0;
        for seg in &self.segments {
            let m = seg.motion();
            let x = m.displacement_over(t - seg_start, dt);
            match seg {
                Segment::Rotate { .. } => dh += x,
                Segment::Translate { .. } => ds += x,
            }
            seg_start += m.duration();
        }
        BaseCommand { v: ds / dt, omega: dh / dt }
    }
}

fn angle_diff<T: Real>(to: T, from: T) -> T {
    wrap_angle(to - from)
}

/// Rotate-translate-rotate plan from `current` to `target`. The chair may
/// drive backwards when that needs less turning. A chair already moving
/// straight along the target line keeps its speed instead of stopping.
pub fn goto<T: Real>(current: &WheelchairState<T>, target: &Pose2<T>, cfg: &BaseConfig<T>) -> BaseTrajectory<T> {
    let tol = T::lit(1e-9);
    let start = current.pose;
    let dx = target.x - start.x;
    let dy = target.y - start.y;
    let dist = (dx * dx + dy * dy).sqrt();
    let mut segments = Vec::new();
    let mut pose = start;

    let rotate = |from: Pose2<T>, to_heading: T, segments: &mut Vec<Segment<T>>| {
        let turn = angle_diff(to_heading, from.heading);
        if turn.abs() > tol {
            let motion = Motion1D::plan(turn, T::zero(), cfg.v_max_ang, cfg.alpha_max, cfg.alpha_max);
            segments.push(Segment::Rotate { start: from, motion });
        }
        Pose2::new(from.x, from.y, wrap_angle(from.heading + turn))
    };

    if dist > tol {
        let along = dx * start.heading.cos() + dy * start.heading.sin();
        let lateral = -dx * start.heading.sin() + dy * start.heading.cos();
        let moving = current.v_lin != T::zero();
        if moving && lateral.abs() <= T::lit(1e-6) {
            let motion = Motion1D::plan(along, current.v_lin, cfg.v_max_lin, cfg.a_max, cfg.d_max);
            segments.push(Segment::Translate { start, motion });
            pose = Pose2::new(target.x, target.y, start.heading);
        } else {
            if moving {
                // May be followed directly by driving backwards.
                let motion = Motion1D::stop(current.v_lin, cfg.a_max.min(cfg.d_max));
                let (s, _) = motion.eval(motion.duration());
                segments.push(Segment::Translate { start, motion });
                pose = Pose2::new(start.x + s * start.heading.cos(), start.y + s * start.heading.sin(), start.heading);
            }
            let (rx, ry) = (target.x - pose.x, target.y - pose.y);
            let bearing = ry.atan2(rx);
            let forward_turn = angle_diff(bearing, pose.heading);
            let (drive_heading, sign) = if forward_turn.abs() <= T::frac_pi_2() {
                (bearing, T::one())
            } else {
                (wrap_angle(bearing + T::pi()), -T::one())
            };
            pose = rotate(pose, drive_heading, &mut segments);
            let run = (rx * rx + ry * ry).sqrt();
            let motion = Motion1D::plan(run * sign, T::zero(), cfg.v_max_lin, cfg.a_max, cfg.d_max);
            segments.push(Segment::Translate { start: pose, motion });
            pose = Pose2::new(target.x, target.y, pose.heading);
        }
    } else if current.v_lin != T::zero() {
        let motion = Motion1D::stop(current.v_lin, cfg.d_max);
        segments.push(Segment::Translate { start, motion });
    }
    rotate(pose, target.heading, &mut segments);
    BaseTrajectory { t0: current.t, start, segments }
}

/// Acceleration audit over executed commands: flags any tick whose speed
/// change exceeds the accelerating or braking cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapMonitor<T: Real> {
    prev_v: Option<T>,
    pub max_accel: T,
    pub max_decel: T,
    pub max_reversal: T,
    pub max_speed: T,
    pub max_turn_rate: T,
}

impl<T: Real> Default for CapMonitor<T> {
    fn default() -> Self {
        Self {
            prev_v: None,
            max_accel: T::zero(),
            max_decel: T::zero(),
            max_reversal: T::zero(),
            max_speed: T::zero(),
            max_turn_rate: T::zero(),
        }
    }
}

impl<T: Real> CapMonitor<T> {
    pub fn record(&mut self, cmd: &BaseCommand<T>, dt: T) {
        let v = cmd.v;
        self.max_speed = self.max_speed.max(v.abs());
        self.max_turn_rate = self.max_turn_rate.max(cmd.omega.abs());
        if let Some(p) = self.prev_v {
            let rate = (v - p).abs() / dt;
            if p * v < T::zero() {
                self.max_reversal = self.max_reversal.max(rate);
            } else if v.abs() > p.abs() {
                self.max_accel = self.max_accel.max(rate);
            } else {
                self.max_decel = self.max_decel.max(rate);
            }
        }
        self.prev_v = Some(v);
    }

    pub fn within(&self, cfg: &BaseConfig<T>, tol: T) -> bool {
        self.max_accel <= cfg.a_max + tol
            && self.max_decel <= cfg.d_max + tol
            && self.max_reversal <= cfg.a_max.max(cfg.d_max) + tol
            && self.max_speed <= cfg.v_max_lin + tol
            && self.max_turn_rate <= cfg.v_max_ang + tol
    }
}

/// Drives a chair along trajectories at a fixed tick, with optional
/// first-order velocity lag.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseExecutor<T: Real> {
    pub state: WheelchairState<T>,
    pub monitor: CapMonitor<T>,
    pub last_command: BaseCommand<T>,
    pub odometer: T,
}

impl<T: Real> BaseExecutor<T> {
    pub fn new(state: WheelchairState<T>) -> Self {
        Self {
            state,
            monitor: CapMonitor::default(),
            last_command: BaseCommand { v: T::zero(), omega: T::zero() },
            odometer: T::zero(),
        }
    }

    pub fn tick(&mut self, traj: Option<&BaseTrajectory<T>>, dt: T, cfg: &BaseConfig<T>) {
        let wanted = match traj {
            Some(tr) => tr.command(self.state.t, dt),
            None => BaseCommand { v: T::zero(), omega: T::zero() },
        };
        let cmd = if cfg.lag_tau > T::zero() {
            let k = T::one() - (-dt / cfg.lag_tau).exp();
            BaseCommand {
                v: self.last_command.v + (wanted.v - self.last_command.v) * k,
                omega: self.last_command.omega + (wanted.omega - self.last_command.omega) * k,
            }
        } else {
            wanted
        };
        self.monitor.record(&cmd, dt);
        self.state = step_base(&self.state, &cmd, dt);
        self.odometer += cmd.v.abs() * dt;
        self.last_command = cmd;
    }

    pub fn write_log_header<W: Write>(mut out: W) -> io::Result<()> {
        writeln!(out, "t,x,y,heading,v,omega,omega_left,omega_right")
    }

    pub fn write_log_row<W: Write>(&self, mut out: W, cfg: &BaseConfig<T>) -> io::Result<()> {
        let w = wheel_speeds(&self.last_command, cfg);
        let s = &self.state;
        writeln!(
            out,
            "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            s.t.as_f64(),
            s.pose.x.as_f64(),
            s.pose.y.as_f64(),
            s.pose.heading.as_f64(),
            s.v_lin.as_f64(),
            s.v_ang.as_f64(),
            w.left.as_f64(),
            w.right.as_f64()
        )
    }
}
