//! Ball flight: gravity plus quadratic drag, instantaneous inelastic bounces
//! with court friction, a fixed-step RK4 integrator with bisected events, and
//! the closed-form drag-free arc used as an oracle.

use std::io::{self, Write};

use nalgebra::Vector3;
use thiserror::Error;

use crate::court::{BallState, WorldConfig};
use crate::scalar::Real;

/// Bisection tolerance on event times, seconds.
pub const EVENT_TIME_TOL: f64 = 1e-9;

/// Below this outgoing vertical speed a bounce turns into rolling contact.
pub const ROLL_SPEED: f64 = 1e-3;

/// Upper bound on bounces resolved inside one integration step.
const MAX_BOUNCES_PER_STEP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative<T: Real> {
    pub dp: Vector3<T>,
    pub dv: Vector3<T>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("ball is not moving into the floor (v.z = {0})")]
    NotDescending(f64),
    #[error("ball is above the floor contact height (z = {0})")]
    AboveFloor(f64),
}

fn rolling<T: Real>(s: &BallState<T>, w: &WorldConfig<T>) -> bool {
    s.v.z == T::zero() && s.p.z <= w.ball_radius + T::lit(1e-9)
}

pub fn flight_derivative<T: Real>(s: &BallState<T>, w: &WorldConfig<T>) -> Derivative<T> {
    let speed = s.v.norm();
    let mut dv = -s.v * (w.drag_factor() * speed);
    if !rolling(s, w) {
        dv.z -= w.gravity;
    }
    Derivative { dp: s.v, dv }
}

/// Instantaneous floor bounce: vertical speed scaled by restitution, horizontal
/// velocity by the retention factor, ball put back on the floor.
pub fn resolve_bounce<T: Real>(s: &BallState<T>, w: &WorldConfig<T>) -> Result<BallState<T>, DynamicsError> {
    if !(s.v.z < T::zero()) {
        return Err(DynamicsError::NotDescending(s.v.z.as_f64()));
    }
    if s.p.z > w.ball_radius + T::lit(1e-6) {
        return Err(DynamicsError::AboveFloor(s.p.z.as_f64()));
    }
    let k = w.bounce_horizontal_retention;
    let mut out = *s;
    out.v = Vector3::new(k * s.v.x, k * s.v.y, -w.restitution * s.v.z);
    if out.v.z < T::lit(ROLL_SPEED) {
        out.v.z = T::zero();
    }
    out.p.z = w.ball_radius;
    out.bounce_count += 1;
    Ok(out)
}

fn rk4<T: Real>(s: &BallState<T>, dt: T, w: &WorldConfig<T>) -> BallState<T> {
    let half = dt / T::lit(2.0);
    let at = |p: Vector3<T>, v: Vector3<T>| BallState { p, v, ..*s };
    let k1 = flight_derivative(s, w);
    let k2 = flight_derivative(&at(s.p + k1.dp * half, s.v + k1.dv * half), w);
    let k3 = flight_derivative(&at(s.p + k2.dp * half, s.v + k2.dv * half), w);
    let k4 = flight_derivative(&at(s.p + k3.dp * dt, s.v + k3.dv * dt), w);
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let mut out = *s;
    out.p = s.p + (k1.dp + k2.dp * two + k3.dp * two + k4.dp) * sixth;
    out.v = s.v + (k1.dv + k2.dv * two + k3.dv * two + k4.dv) * sixth;
    out.t = s.t + dt;
    if rolling(s, w) {
        out.p.z = w.ball_radius;
        out.v.z = T::zero();
    }
    out
}

/// A floor contact resolved during integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BounceEvent<T: Real> {
    pub t: T,
    pub p: Vector3<T>,
    pub v_in: Vector3<T>,
    pub v_out: Vector3<T>,
}

/// One integration step of length `dt`, appending any bounces to `events`.
pub fn step_with_events<T: Real>(
    s: &BallState<T>,
    dt: T,
    w: &WorldConfig<T>,
    events: &mut Vec<BounceEvent<T>>,
) -> BallState<T> {
    let tol = T::lit(EVENT_TIME_TOL);
    let mut cur = *s;
    let mut remaining = dt;
    for _ in 0..MAX_BOUNCES_PER_STEP {
        let next = rk4(&cur, remaining, w);
        if rolling(&cur, w) || next.p.z >= w.ball_radius {
            return next;
        }
        // Descending crossing of the contact height inside (0, remaining].
        let (mut lo, mut hi) = (T::zero(), remaining);
        while hi - lo > tol {
            let mid = (lo + hi) / T::lit(2.0);
            if rk4(&cur, mid, w).p.z >= w.ball_radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let contact = rk4(&cur, hi, w);
        let bounced = match resolve_bounce(&contact, w) {
            Ok(b) => b,
            // Grazing contact with non-negative v.z: clamp and continue.
            Err(_) => BallState { p: Vector3::new(contact.p.x, contact.p.y, w.ball_radius), ..contact },
        };
        if bounced.bounce_count != contact.bounce_count {
            events.push(BounceEvent { t: contact.t, p: bounced.p, v_in: contact.v, v_out: bounced.v });
        }
        cur = bounced;
        remaining -= hi;
        if remaining <= T::zero() {
            cur.t = s.t + dt;
            return cur;
        }
    }
    rk4(&cur, remaining, w)
}

/// One fixed RK4 step with bounce handling.
pub fn step<T: Real>(s: &BallState<T>, dt: T, w: &WorldConfig<T>) -> BallState<T> {
    assert!(dt > T::zero(), "step length must be positive");
    let mut sink = Vec::new();
    step_with_events(s, dt, w, &mut sink)
}

/// Drag-free, bounce-free ballistic arc evaluated in closed form.
pub fn ballistic_closed_form<T: Real>(s0: &BallState<T>, t: T, gravity: T) -> BallState<T> {
    let dt = t - s0.t;
    let g = Vector3::new(T::zero(), T::zero(), -gravity);
    BallState { t, p: s0.p + s0.v * dt + g * (dt * dt / T::lit(2.0)), v: s0.v + g * dt, bounce_count: s0.bounce_count }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneDirection {
    /// Crossing with x increasing.
    Increasing,
    /// Crossing with x decreasing.
    Decreasing,
}

impl PlaneDirection {
    fn sign<T: Real>(self) -> T {
        match self {
            PlaneDirection::Increasing => T::one(),
            PlaneDirection::Decreasing => -T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopCondition<T: Real> {
    /// Run for this many seconds.
    Horizon(T),
    /// Stop at the first crossing of the plane `x = x` in the given direction,
    /// giving up after `horizon` seconds.
    Plane { x: T, direction: PlaneDirection, horizon: T },
    /// Stop once `limit` bounces have happened, giving up after `horizon` seconds.
    Bounces { limit: u32, horizon: T },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlightEnd<T: Real> {
    HorizonReached,
    PlaneCrossed(BallState<T>),
    BounceLimit(BallState<T>),
    /// The plane was not crossed within the horizon.
    NoCrossing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub dt: T,
    pub samples: Vec<BallState<T>>,
    pub events: Vec<BounceEvent<T>>,
}

impl<T: Real> Trajectory<T> {
    /// CSV with header `t,px,py,pz,vx,vy,vz,bounce_count`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,px,py,pz,vx,vy,vz,bounce_count")?;
        for s in &self.samples {
            writeln!(
                out,
                "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                s.t.as_f64(),
                s.p.x.as_f64(),
                s.p.y.as_f64(),
                s.p.z.as_f64(),
                s.v.x.as_f64(),
                s.v.y.as_f64(),
                s.v.z.as_f64(),
                s.bounce_count
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flight<T: Real> {
    pub trajectory: Trajectory<T>,
    pub end: FlightEnd<T>,
}

/// What a flight observer sees for each completed step.
pub struct StepRecord<'a, T: Real> {
    pub before: &'a BallState<T>,
    pub after: &'a BallState<T>,
    pub bounces: &'a [BounceEvent<T>],
}

/// Integrates from `s0` until `stop`, calling `observe` after every step
/// (including the final partial step to a plane crossing).
pub fn propagate<T: Real, F>(
    s0: &BallState<T>,
    stop: StopCondition<T>,
    w: &WorldConfig<T>,
    dt: T,
    mut observe: F,
) -> FlightEnd<T>
where
    F: FnMut(StepRecord<'_, T>),
{
    assert!(dt > T::zero(), "physics step must be positive");
    let horizon = match stop {
        StopCondition::Horizon(h) => h,
        StopCondition::Plane { horizon, .. } | StopCondition::Bounces { horizon, .. } => horizon,
    };
    let t_end = s0.t + horizon;

    if let StopCondition::Plane { x, direction, .. } = stop {
        let sign: T = direction.sign();
        let ahead = (x - s0.p.x) * sign;
        if ahead == T::zero() && s0.v.x * sign >= T::zero() {
            return FlightEnd::PlaneCrossed(*s0);
        }
        // Drag and bounces never reverse v.x, so a ball heading away from the
        // plane (or already past it) can never cross it.
        if ahead < T::zero() || s0.v.x * sign <= T::zero() {
            return FlightEnd::NoCrossing;
        }
    }
    if let StopCondition::Bounces { limit, .. } = stop {
        if s0.bounce_count >= limit {
            return FlightEnd::BounceLimit(*s0);
        }
    }

    let mut cur = *s0;
    let mut events = Vec::new();
    let mut k: u64 = 0;
    loop {
        let t_next = s0.t + dt * T::from_u64(k + 1).expect("step index representable");
        if t_next > t_end + T::lit(EVENT_TIME_TOL) {
            return match stop {
                StopCondition::Plane { .. } => FlightEnd::NoCrossing,
                _ => FlightEnd::HorizonReached,
            };
        }
        events.clear();
        let mut next = step_with_events(&cur, t_next - cur.t, w, &mut events);
        next.t = t_next;

        match stop {
            StopCondition::Plane { x, direction, .. } => {
                let sign: T = direction.sign();
                if (next.p.x - x) * sign >= T::zero() {
                    let crossing = bisect_plane(&cur, t_next - cur.t, x, sign, w);
                    let mut partial_events = Vec::new();
                    let _ = step_with_events(&cur, crossing.t - cur.t, w, &mut partial_events);
                    observe(StepRecord { before: &cur, after: &crossing, bounces: &partial_events });
                    return FlightEnd::PlaneCrossed(crossing);
                }
            }
            StopCondition::Bounces { limit, .. } => {
                if next.bounce_count >= limit {
                    observe(StepRecord { before: &cur, after: &next, bounces: &events });
                    return FlightEnd::BounceLimit(next);
                }
            }
            StopCondition::Horizon(_) => {}
        }
        observe(StepRecord { before: &cur, after: &next, bounces: &events });
        cur = next;
        k += 1;
    }
}

fn bisect_plane<T: Real>(s: &BallState<T>, dt: T, x: T, sign: T, w: &WorldConfig<T>) -> BallState<T> {
    let (mut lo, mut hi) = (T::zero(), dt);
    let tol = T::lit(1e-12);
    for _ in 0..64 {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) / T::lit(2.0);
        if (step(s, mid, w).p.x - x) * sign >= T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut out = if hi > T::zero() { step(s, hi, w) } else { *s };
    out.p.x = x;
    out
}

/// Integrates from `s0`, sampling every `dt`, until `stop` triggers.
pub fn simulate_flight<T: Real>(s0: &BallState<T>, stop: StopCondition<T>, w: &WorldConfig<T>, dt: T) -> Flight<T> {
    let mut samples = vec![*s0];
    let mut events = Vec::new();
    let end = propagate(s0, stop, w, dt, |rec| {
        events.extend_from_slice(rec.bounces);
        samples.push(*rec.after);
    });
    // A bisected crossing is reported in `end`, not as a uniform sample.
    if let FlightEnd::PlaneCrossed(c) = &end {
        if samples.len() > 1 && samples.last() == Some(c) {
            samples.pop();
        }
    }
    Flight { trajectory: Trajectory { dt, samples, events }, end }
}
