//! Rollout of the tracked state to the interception plane and the
//! forecast-convergence metrics.

use nalgebra::{Matrix3, Vector3};

use crate::dynamics::{propagate, FlightEnd, PlaneDirection, StopCondition};
use crate::scalar::Real;
use crate::tracker::{position_radius, CovPropagator, TrackMode, TrackerState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterceptPrediction<T: Real> {
    pub plane_x: T,
    /// Time the prediction was computed from (the tracker's state time).
    pub t_issue: T,
    pub point: Vector3<T>,
    pub t_cross: T,
    /// Predicted ball velocity at the crossing.
    pub v_cross: Vector3<T>,
    pub pos_cov: Matrix3<T>,
    pub valid: bool,
}

impl<T: Real> InterceptPrediction<T> {
    fn invalid(plane_x: T, t_issue: T) -> Self {
        Self {
            plane_x,
            t_issue,
            point: Vector3::zeros(),
            t_cross: t_issue,
            v_cross: Vector3::zeros(),
            pos_cov: Matrix3::zeros(),
            valid: false,
        }
    }

    pub fn radius(&self) -> T {
        position_radius(&self.pos_cov)
    }
}

/// Propagates the tracker mean to the first crossing of `x = plane_x`
/// (approached from whichever side the ball is on) and carries the
/// covariance along the same trajectory.
pub fn rollout<T: Real>(ts: &TrackerState<T>, plane_x: T, horizon: T) -> InterceptPrediction<T> {
    if ts.mode != TrackMode::Tracking {
        return InterceptPrediction::invalid(plane_x, ts.t);
    }
    let cfg = ts.config;
    let s0 = ts.ball();
    let direction = if s0.p.x >= plane_x { PlaneDirection::Decreasing } else { PlaneDirection::Increasing };
    let stop = StopCondition::Plane { x: plane_x, direction, horizon };
    let mut cov = CovPropagator::new(ts.cov, s0);
    let end = propagate(&s0, stop, &cfg.world, cfg.physics_dt, |rec| {
        cov.advance(rec.after, rec.bounces, false, &cfg);
    });
    match end {
        FlightEnd::PlaneCrossed(c) => {
            cov.advance(&c, &[], true, &cfg);
            InterceptPrediction {
                plane_x,
                t_issue: ts.t,
                point: c.p,
                t_cross: c.t,
                v_cross: c.v,
                pos_cov: cov.cov.fixed_view::<3, 3>(0, 0).into(),
                valid: true,
            }
        }
        _ => InterceptPrediction::invalid(plane_x, ts.t),
    }
}

/// Acting gate: a valid prediction whose one-sigma radius is within `threshold`.
pub fn should_act<T: Real>(pred: &InterceptPrediction<T>, threshold: T) -> bool {
    pred.valid && pred.radius() <= threshold
}

/// The crossing actually flown, used as ground truth for forecasts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedCrossing<T: Real> {
    pub point: Vector3<T>,
    pub t_cross: T,
    pub v_cross: Vector3<T>,
    pub t_first_detection: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint<T: Real> {
    pub fraction: T,
    /// Along-track error: crossing-time error times the crossing x speed.
    pub err_x: T,
    pub err_y: T,
    pub err_z: T,
    /// Crossing-time error, seconds.
    pub err_t: T,
}

/// Per-prediction forecast errors against the observed crossing. Invalid
/// predictions are skipped.
pub fn convergence_series<T: Real>(
    predictions: &[InterceptPrediction<T>],
    observed: &ObservedCrossing<T>,
) -> Vec<ConvergencePoint<T>> {
    let span = observed.t_cross - observed.t_first_detection;
    predictions
        .iter()
        .filter(|p| p.valid)
        .map(|p| {
            let fraction = if span > T::zero() { (p.t_issue - observed.t_first_detection) / span } else { T::one() };
            let err_t = (p.t_cross - observed.t_cross).abs();
            ConvergencePoint {
                fraction,
                err_x: err_t * observed.v_cross.x.abs(),
                err_y: (p.point.y - observed.point.y).abs(),
                err_z: (p.point.z - observed.point.z).abs(),
                err_t,
            }
        })
        .collect()
}

/// Mean and standard deviation of one error component in a fraction bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceBin {
    pub fraction_lo: f64,
    pub fraction_hi: f64,
    /// Number of trajectories contributing to the bin.
    pub trajectories: usize,
    pub x: Spread,
    pub y: Spread,
    pub z: Spread,
    pub t: Spread,
}

/// Averages series across trajectories: each trajectory contributes its
/// mean error inside a bin, then bins report mean and stddev across
/// trajectories.
pub fn aggregate_convergence<T: Real>(series: &[Vec<ConvergencePoint<T>>], n_bins: usize) -> Vec<ConvergenceBin> {
    let width = 1.0 / n_bins as f64;
    (0..n_bins)
        .map(|b| {
            let (lo, hi) = (b as f64 * width, (b + 1) as f64 * width);
            let last = b + 1 == n_bins;
            let mut per_traj: Vec<[f64; 4]> = Vec::new();
            for s in series {
                let pts: Vec<_> = s
                    .iter()
                    .filter(|p| {
                        let f = p.fraction.as_f64();
                        f >= lo && (f < hi || (last && f <= hi))
                    })
                    .collect();
                if pts.is_empty() {
                    continue;
                }
                let n = pts.len() as f64;
                let mut acc = [0.0; 4];
                for p in pts {
                    acc[0] += p.err_x.as_f64() / n;
                    acc[1] += p.err_y.as_f64() / n;
                    acc[2] += p.err_z.as_f64() / n;
                    acc[3] += p.err_t.as_f64() / n;
                }
                per_traj.push(acc);
            }
            let spread = |i: usize| {
                let n = per_traj.len() as f64;
                if per_traj.is_empty() {
                    return Spread { mean: f64::NAN, std: f64::NAN };
                }
                let mean = per_traj.iter().map(|a| a[i]).sum::<f64>() / n;
                let var = per_traj.iter().map(|a| (a[i] - mean).powi(2)).sum::<f64>() / n;
                Spread { mean, std: var.sqrt() }
            };
            ConvergenceBin {
                fraction_lo: lo,
                fraction_hi: hi,
                trajectories: per_traj.len(),
                x: spread(0),
                y: spread(1),
                z: spread(2),
                t: spread(3),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ballistic_closed_form, simulate_flight};
    use crate::tracker::{InitPrior, TrackerConfig};
    use crate::vision::Measurement;

    fn tracker_at(p: [f64; 3], v: [f64; 3], cfg: TrackerConfig<f64>) -> TrackerState<f64> {
        let mut ts = TrackerState::new(cfg);
        let m = Measurement { rig_id: 0, t_capture: 0.0, t_arrival: 0.1, z: Vector3::from(p), sigma: 0.05 };
        ts.reset(&m, &InitPrior { velocity: Vector3::from(v), velocity_var: 0.01 });
        ts
    }

    #[test]
    fn on_plane_crosses_immediately() {
        let ts = tracker_at([2.0, 0.3, 1.2], [-8.0, 0.0, 1.0], TrackerConfig::default());
        let p = rollout(&ts, 2.0, 3.0);
        assert!(p.valid);
        assert_eq!(p.t_cross, ts.t);
        assert_eq!(p.point, Vector3::new(2.0, 0.3, 1.2));
    }

    #[test]
    fn moving_away_is_invalid() {
        let ts = tracker_at([10.0, 0.0, 1.0], [8.0, 0.0, 1.0], TrackerConfig::default());
        assert!(!rollout(&ts, 2.0, 3.0).valid);
        assert!(!should_act(&rollout(&ts, 2.0, 3.0), 1.0));
    }

    #[test]
    fn drag_free_crossing_matches_closed_form() {
        let mut cfg = TrackerConfig::default();
        cfg.world = cfg.world.without_drag();
        let ts = tracker_at([10.0, 0.0, 1.0], [-8.0, 0.0, 5.0], cfg);
        let p = rollout(&ts, 2.0, 3.0);
        assert!(p.valid);
        assert!((p.t_cross - 1.0).abs() < 1e-9);
        let exact = ballistic_closed_form(&ts.ball(), 1.0, cfg.world.gravity);
        assert_eq!(p.point.x, 2.0);
        assert!((p.point - exact.p).norm() < 1e-8);
    }

    #[test]
    fn rollout_mean_equals_simulate_flight() {
        let cfg = TrackerConfig::default();
        let ts = tracker_at([16.0, -1.0, 1.0], [-5.0, 0.1, 6.0], cfg);
        let p = rollout(&ts, 8.1, 4.0);
        let stop = StopCondition::Plane { x: 8.1, direction: PlaneDirection::Decreasing, horizon: 4.0 };
        let FlightEnd::PlaneCrossed(c) = simulate_flight(&ts.ball(), stop, &cfg.world, 1e-3).end else { panic!() };
        assert_eq!(p.point, c.p);
        assert_eq!(p.t_cross, c.t);
        assert_eq!(p.v_cross, c.v);
    }

    #[test]
    fn covariance_grows_with_rollout_length() {
        let cfg = TrackerConfig::default();
        let ts = tracker_at([16.0, -1.0, 1.0], [-8.0, 0.0, 1.0], cfg);
        let mut prev = 0.0;
        for plane in [15.0, 14.0, 13.0, 12.0, 11.0] {
            let r = rollout(&ts, plane, 3.0).radius();
            assert!(r >= prev, "plane {plane}: {r} < {prev}");
            prev = r;
        }
    }

    #[test]
    fn acting_gate() {
        let mut p = InterceptPrediction::invalid(2.0, 0.0);
        assert!(!should_act(&p, 0.2));
        p.valid = true;
        p.pos_cov = Matrix3::identity() * 0.0025;
        assert!(should_act(&p, 0.2));
        assert!(!should_act(&p, 0.0));
    }

    #[test]
    fn convergence_fractions_and_errors() {
        let obs = ObservedCrossing {
            point: Vector3::new(2.0, 0.5, 1.3),
            t_cross: 2.0,
            v_cross: Vector3::new(-4.0, 0.0, -1.0),
            t_first_detection: 0.0,
        };
        let mk = |t_issue: f64, y: f64, t_cross: f64| InterceptPrediction {
            plane_x: 2.0,
            t_issue,
            point: Vector3::new(2.0, y, 1.3),
            t_cross,
            v_cross: Vector3::zeros(),
            pos_cov: Matrix3::zeros(),
            valid: true,
        };
        let s = convergence_series(&[mk(1.0, 0.7, 2.1), mk(2.0, 0.5, 2.0)], &obs);
        assert_eq!(s.len(), 2);
        assert!((s[0].fraction - 0.5).abs() < 1e-12);
        assert!((s[0].err_y - 0.2).abs() < 1e-12);
        assert!((s[0].err_x - 0.4).abs() < 1e-12);
        assert_eq!(s[1].fraction, 1.0);
        assert_eq!(s[1].err_x + s[1].err_y + s[1].err_z, 0.0);
        assert!(convergence_series(&[], &obs).is_empty());

        let bins = aggregate_convergence(&[s], 4);
        assert_eq!(bins[2].trajectories, 1);
        assert!((bins[2].y.mean - 0.2).abs() < 1e-12);
        assert_eq!(bins[3].trajectories, 1);
        assert_eq!(bins[0].trajectories, 0);
    }
}
