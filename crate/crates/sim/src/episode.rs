//! One closed-loop exchange: launch, sense, track, plan, drive, swing,
//! and judge the return.

use std::sync::mpsc;
use std::thread;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use courtside_core::base::{goto, wheel_speeds, BaseExecutor, BaseTrajectory, CapMonitor};
use courtside_core::court::{BallState, Pose2, WheelchairState};
use courtside_core::dynamics::{
    simulate_flight, step, step_with_events, FlightEnd, PlaneDirection, StopCondition, Trajectory,
};
use courtside_core::predictor::{
    convergence_series, rollout, should_act, ConvergencePoint, InterceptPrediction, ObservedCrossing,
};
use courtside_core::swing::{arm_fk, plan, racket_impact, replan_gate, Gate, Plan, RacketState};
use courtside_core::tracker::{IngestOutcome, TrackMode, TrackerState, TrackerStats};
use courtside_core::vision::{observe, Measurement, RigConfig};
use nalgebra::Matrix3;

use crate::launcher::launch;
use crate::outcome::{classify_outcome, crossing_height, Outcome};
use crate::scenario::{RigScheduler, Scenario};

pub const PHYSICS_DT: f64 = 1e-3;
/// Physics ticks per tracker/planner tick (100 Hz).
const DECISION_EVERY: u64 = 10;
/// Smallest base-target change that triggers a new drive command.
const RETARGET_TOL: f64 = 1e-3;

/// Trial seed derived from the batch seed (splitmix64 finalizer).
pub fn episode_seed(batch_seed: u64, trial: usize) -> u64 {
    let mut z = batch_seed.wrapping_add((trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub t: f64,
    pub point: Vector3<f64>,
    pub v_in: Vector3<f64>,
    pub v_out: Vector3<f64>,
    pub racket_speed: f64,
}

/// Per-tick record kept for trajectory logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub ball: Vector3<f64>,
    pub estimate: Option<Vector3<f64>>,
    pub chair: WheelchairState<f64>,
    pub omega_left: f64,
    pub omega_right: f64,
    pub racket: Option<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub trial: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub launch: BallState<f64>,
    /// Where the incoming ball crosses the interception plane (flown
    /// without the robot).
    pub intercept_observed: Option<Vector3<f64>>,
    pub t_cross: Option<f64>,
    /// Path length driven by the chair.
    pub chair_travel: f64,
    /// Crossing time minus first detection.
    pub time_to_intercept: Option<f64>,
    pub predictions: Vec<ConvergencePoint<f64>>,
    pub measurements_produced: usize,
    pub tracker: TrackerStats,
    pub committed: bool,
    pub contact: Option<Contact>,
    /// Return height at the judging plane (net or launch plane).
    pub return_height: Option<f64>,
    pub landing: Option<Vector3<f64>>,
    pub caps: CapMonitor<f64>,
    pub log: Vec<LogRow>,
}

/// Runs the rig producers for one tick's due frames.
trait RigBank {
    /// `due` holds (rig index, truth at the frame time), sorted by rig.
    fn capture(&mut self, due: Vec<(usize, BallState<f64>)>) -> Vec<Measurement<f64>>;
}

struct SequentialRigs {
    rigs: Vec<(RigConfig<f64>, ChaCha8Rng)>,
}

impl RigBank for SequentialRigs {
    fn capture(&mut self, due: Vec<(usize, BallState<f64>)>) -> Vec<Measurement<f64>> {
        due.into_iter()
            .filter_map(|(i, truth)| {
                let (cfg, rng) = &mut self.rigs[i];
                observe(cfg, &truth, rng)
            })
            .collect()
    }
}

type Reply = Vec<Option<Measurement<f64>>>;

/// One producer thread per rig; the episode thread waits for every rig with
/// a due frame before advancing, and collects replies in rig order.
struct ThreadedRigs {
    requests: Vec<mpsc::Sender<Vec<BallState<f64>>>>,
    replies: Vec<mpsc::Receiver<Reply>>,
}

impl RigBank for ThreadedRigs {
    fn capture(&mut self, due: Vec<(usize, BallState<f64>)>) -> Vec<Measurement<f64>> {
        let mut per_rig: Vec<Vec<BallState<f64>>> = vec![Vec::new(); self.requests.len()];
        for (i, truth) in due {
            per_rig[i].push(truth);
        }
        let busy: Vec<usize> = (0..per_rig.len()).filter(|i| !per_rig[*i].is_empty()).collect();
        for &i in &busy {
            self.requests[i].send(std::mem::take(&mut per_rig[i])).expect("rig thread alive");
        }
        let mut out = Vec::new();
        for &i in &busy {
            out.extend(self.replies[i].recv().expect("rig thread alive").into_iter().flatten());
        }
        out
    }
}

/// Chair pose that puts the racket on the noise-free launch's crossing.
pub fn home_pose(s: &Scenario) -> Pose2<f64> {
    let strat = s.strategy_config();
    let nominal = launch(&s.launcher.without_jitter(), s.interception_plane_x, &mut stream_rng(0, 0));
    let stop = StopCondition::Plane {
        x: s.interception_plane_x,
        direction: PlaneDirection::Decreasing,
        horizon: s.strategy.max_time,
    };
    let z = match simulate_flight(&nominal, stop, &s.world, PHYSICS_DT).end {
        FlightEnd::PlaneCrossed(c) => c.p.z,
        _ => 1.0,
    };
    let probe = InterceptPrediction {
        plane_x: s.interception_plane_x,
        t_issue: 0.0,
        point: Vector3::new(s.interception_plane_x, s.launcher.target_y_mean, z),
        t_cross: 10.0,
        v_cross: Vector3::zeros(),
        pos_cov: Matrix3::zeros(),
        valid: true,
    };
    let chair = WheelchairState::at_rest(0.0, Pose2::new(s.interception_plane_x, 0.0, strat.strike_heading));
    match plan(&probe, &chair, &strat) {
        Ok(p) => p.base_target,
        Err(_) => {
            Pose2::new(s.interception_plane_x, s.launcher.target_y_mean + strat.arm.reach(), strat.strike_heading)
        }
    }
}

pub fn run_episode(s: &Scenario, trial: usize, record_log: bool) -> EpisodeResult {
    let seed = episode_seed(s.seed, trial);
    let rigs = s.rig_configs();
    match s.scheduler {
        RigScheduler::Sequential => {
            let mut bank =
                SequentialRigs { rigs: rigs.iter().map(|r| (*r, stream_rng(seed, 1 + r.rig_id as u64))).collect() };
            run_with(s, trial, seed, &rigs, &mut bank, record_log)
        }
        RigScheduler::Concurrent => thread::scope(|scope| {
            let mut requests = Vec::new();
            let mut replies = Vec::new();
            for r in &rigs {
                let (req_tx, req_rx) = mpsc::channel::<Vec<BallState<f64>>>();
                let (rep_tx, rep_rx) = mpsc::channel::<Reply>();
                let cfg = *r;
                let mut rng = stream_rng(seed, 1 + r.rig_id as u64);
                scope.spawn(move || {
                    for batch in req_rx {
                        let out: Reply = batch.iter().map(|truth| observe(&cfg, truth, &mut rng)).collect();
                        if rep_tx.send(out).is_err() {
                            break;
                        }
                    }
                });
                requests.push(req_tx);
                replies.push(rep_rx);
            }
            let mut bank = ThreadedRigs { requests, replies };
            run_with(s, trial, seed, &rigs, &mut bank, record_log)
            // Dropping the bank closes the request channels and ends the threads.
        }),
    }
}

/// Entry time of the relative segment `d0 -> d1` into a sphere of radius
/// `r`, as a fraction of the tick.
fn sphere_entry(d0: Vector3<f64>, d1: Vector3<f64>, r: f64) -> Option<f64> {
    if d0.norm() <= r {
        return Some(0.0);
    }
    let e = d1 - d0;
    let a = e.norm_squared();
    if a == 0.0 {
        return None;
    }
    let b = 2.0 * d0.dot(&e);
    let c = d0.norm_squared() - r * r;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let f = (-b - disc.sqrt()) / (2.0 * a);
    (0.0..=1.0).contains(&f).then_some(f)
}

fn run_with<B: RigBank>(
    s: &Scenario,
    trial: usize,
    seed: u64,
    rigs: &[RigConfig<f64>],
    bank: &mut B,
    record_log: bool,
) -> EpisodeResult {
    let world = s.world;
    let plane_x = s.interception_plane_x;
    let strat = s.strategy_config();
    let base_cfg = s.base_config();
    let arm = strat.arm;
    let max_time = s.strategy.max_time;

    let ball0 = launch(&s.launcher, plane_x, &mut stream_rng(seed, 0));
    let stop = StopCondition::Plane { x: plane_x, direction: PlaneDirection::Decreasing, horizon: max_time };
    let crossing = match simulate_flight(&ball0, stop, &world, PHYSICS_DT).end {
        FlightEnd::PlaneCrossed(c) => Some(c),
        _ => None,
    };

    let home = home_pose(s);
    let lateral_offset = home.y - s.launcher.target_y_mean;
    let mut exec = BaseExecutor::new(WheelchairState::at_rest(0.0, home));
    let mut drive: Option<BaseTrajectory<f64>> = None;
    let mut drive_target: Option<Pose2<f64>> = None;

    let mut ts = TrackerState::new(s.tracker_config());
    let frames: Vec<Vec<f64>> = rigs.iter().map(|r| r.frame_times(0.0, max_time)).collect();
    let mut next_frame = vec![0usize; rigs.len()];
    let mut in_flight: Vec<Measurement<f64>> = Vec::new();
    let mut produced = 0usize;

    let mut first_detection: Option<f64> = None;
    let (mut y_sum, mut y_n) = (0.0, 0usize);
    let mut predictions: Vec<InterceptPrediction<f64>> = Vec::new();
    let mut current: Option<Plan<f64>> = None;

    let mut ball = ball0;
    let mut contact: Option<Contact> = None;
    let mut ret: Option<Trajectory<f64>> = None;
    let mut log = Vec::new();
    let log_every = ((s.output.log_interval / PHYSICS_DT).round() as u64).max(1);
    let mut events = Vec::new();

    let racket_at = |p: &Plan<f64>, t: f64, chair: &WheelchairState<f64>| -> Option<RacketState<f64>> {
        let tau = t - p.stroke.trigger_time;
        if tau < 0.0 || tau > p.stroke.duration() {
            return None;
        }
        let (q, qd) = p.stroke.sample(tau);
        Some(arm_fk(&q, &qd, chair, &arm))
    };

    let mut k: u64 = 0;
    loop {
        let t_prev = k as f64 * PHYSICS_DT;
        let t = (k + 1) as f64 * PHYSICS_DT;

        // Frames captured in [t_prev, t), seen at their exact capture time.
        let mut due = Vec::new();
        for (i, f) in frames.iter().enumerate() {
            while next_frame[i] < f.len() && f[next_frame[i]] < t {
                let tf = f[next_frame[i]];
                let mut truth = if tf > ball.t { step(&ball, tf - ball.t, &world) } else { ball };
                truth.t = tf;
                due.push((i, truth));
                next_frame[i] += 1;
            }
        }
        if !due.is_empty() {
            let got = bank.capture(due);
            produced += got.len();
            in_flight.extend(got);
        }

        let ball_prev = ball;
        ball = step_with_events(&ball, PHYSICS_DT, &world, &mut events);
        let chair_prev = exec.state;
        exec.tick(drive.as_ref(), PHYSICS_DT, &base_cfg);

        // Racket contact during the swing.
        if let Some(p) = current.filter(|p| replan_gate(t, p.stroke.trigger_time, strat.lockout) == Gate::Locked) {
            let r0 = racket_at(&p, t_prev, &chair_prev);
            let r1 = racket_at(&p, t, &exec.state);
            if let (Some(r0), Some(r1)) = (r0.or(r1), r1.or(r0)) {
                let d0 = ball_prev.p - r0.center;
                let d1 = ball.p - r1.center;
                if let Some(f) = sphere_entry(d0, d1, s.strategy.hit_radius) {
                    let tc = t_prev + f * PHYSICS_DT;
                    let mut b = if f > 0.0 { step(&ball_prev, f * PHYSICS_DT, &world) } else { ball_prev };
                    b.t = tc;
                    let r = racket_at(&p, tc, &exec.state).unwrap_or(r1);
                    let v_out = racket_impact(&b.v, &r.velocity, &r.normal, s.strategy.racket_restitution).ok();
                    contact = Some(Contact {
                        t: tc,
                        point: b.p,
                        v_in: b.v,
                        v_out: v_out.unwrap_or(b.v),
                        racket_speed: r.velocity.norm(),
                    });
                    if let Some(v) = v_out {
                        let out = BallState { t: tc, p: b.p, v, bounce_count: 0 };
                        let st = StopCondition::Bounces { limit: 1, horizon: max_time };
                        ret = Some(simulate_flight(&out, st, &world, PHYSICS_DT).trajectory);
                    }
                }
            }
        }

        // Tracker and planner.
        if (k + 1).is_multiple_of(DECISION_EVERY) && contact.is_none() {
            let now = t;
            let mut arrived: Vec<Measurement<f64>> = Vec::new();
            in_flight.retain(|m| {
                if m.t_arrival <= now {
                    arrived.push(*m);
                    false
                } else {
                    true
                }
            });
            arrived.sort_by(|a, b| a.arrival_key_cmp(b));
            for m in &arrived {
                match ts.ingest(m, now) {
                    IngestOutcome::Rejected | IngestOutcome::Stale => {}
                    _ => {
                        first_detection = Some(first_detection.map_or(m.t_capture, |f: f64| f.min(m.t_capture)));
                        y_sum += m.z.y;
                        y_n += 1;
                    }
                }
            }

            let locked =
                current.is_some_and(|p| replan_gate(now, p.stroke.trigger_time, strat.lockout) == Gate::Locked);
            // Forecasts are recorded through the lockout; only planning stops.
            if ts.mode == TrackMode::Tracking && ts.t <= now {
                let mut probe = ts.clone();
                probe.predict_to(now);
                let pred = rollout(&probe, plane_x, s.strategy.horizon);
                if pred.valid {
                    predictions.push(pred);
                }
                if !locked && should_act(&pred, s.strategy.act_radius) {
                    if let Ok(p) = plan(&pred, &exec.state, &strat) {
                        current = Some(p);
                    }
                }
            }
            let target = match (&current, y_n) {
                (Some(p), _) => Some(p.base_target),
                (None, n) if n > 0 => {
                    let y = (y_sum / n as f64 + lateral_offset).clamp(strat.workspace.y_min, strat.workspace.y_max);
                    Some(Pose2::new(home.x, y, home.heading))
                }
                _ => None,
            };
            if let Some(tg) = target {
                let moved = drive_target.is_none_or(|d| (d.x - tg.x).abs() + (d.y - tg.y).abs() > RETARGET_TOL);
                if moved && !locked {
                    drive = Some(goto(&exec.state, &tg, &base_cfg));
                    drive_target = Some(tg);
                }
            }
        }

        if record_log && (k + 1).is_multiple_of(log_every) {
            let w = wheel_speeds(&exec.last_command, &base_cfg);
            log.push(LogRow {
                t,
                ball: ball.p,
                estimate: (ts.mode == TrackMode::Tracking).then(|| ts.ball().p),
                chair: exec.state,
                omega_left: w.left,
                omega_right: w.right,
                racket: current.and_then(|p| racket_at(&p, t, &exec.state)).map(|r| r.center),
            });
        }

        k += 1;
        let swing_over = current.is_none_or(|p| t > p.stroke.trigger_time + p.stroke.duration());
        let passed = ball.p.x < plane_x - 2.0 || ball.bounce_count >= 3;
        if contact.is_some() || t >= max_time || (passed && swing_over) {
            break;
        }
    }

    let judge_x = if s.is_lab() { s.launcher.origin[0] } else { s.court.net_x };
    let outcome = match (&contact, &ret) {
        (None, _) => Outcome::Miss,
        (Some(_), None) => Outcome::UnsuccessfulHit,
        (Some(_), Some(tr)) => classify_outcome(Some(tr), &s.court, judge_x),
    };
    let observed = match (crossing, first_detection) {
        (Some(c), Some(t0)) => Some(ObservedCrossing { point: c.p, t_cross: c.t, v_cross: c.v, t_first_detection: t0 }),
        _ => None,
    };
    EpisodeResult {
        trial,
        seed,
        outcome,
        launch: ball0,
        intercept_observed: crossing.map(|c| c.p),
        t_cross: crossing.map(|c| c.t),
        chair_travel: exec.odometer,
        time_to_intercept: observed.map(|o| o.t_cross - o.t_first_detection),
        predictions: observed.map(|o| convergence_series(&predictions, &o)).unwrap_or_default(),
        measurements_produced: produced,
        tracker: ts.stats,
        committed: current.is_some(),
        contact,
        return_height: ret.as_ref().and_then(|r| crossing_height(r, judge_x)),
        landing: ret.as_ref().and_then(|r| r.events.first().map(|e| e.p)),
        caps: exec.monitor,
        log,
    }
}
