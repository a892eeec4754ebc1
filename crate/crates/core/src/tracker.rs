//! Continuous-discrete EKF over ball position and velocity, fed by the merged
//! rig stream. Late arrivals rewind to the last snapshot before their capture
//! time and the buffered measurements are re-applied.

use std::cmp::Ordering;
use std::io::{self, Write};

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use crate::court::{BallState, WorldConfig};
use crate::dynamics::{step_with_events, BounceEvent};
use crate::scalar::Real;
use crate::vision::Measurement;

pub type Vector6<T> = SVector<T, 6>;
pub type Matrix6<T> = SMatrix<T, 6, 6>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackMode {
    Idle,
    Tracking,
}

/// Velocity guess used when a new ball is first seen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitPrior<T: Real> {
    pub velocity: Vector3<T>,
    /// Per-axis variance, (m/s)^2.
    pub velocity_var: T,
}

impl<T: Real> InitPrior<T> {
    /// `speed` along the horizontal direction from `from` to `to`.
    pub fn toward(from: Vector3<T>, to: Vector3<T>, speed: T) -> Self {
        let mut d = to - from;
        d.z = T::zero();
        let dir = d.try_normalize(T::lit(1e-12)).unwrap_or_else(|| -Vector3::x());
        Self { velocity: dir * speed, velocity_var: T::lit(25.0) }
    }
}

impl<T: Real> Default for InitPrior<T> {
    fn default() -> Self {
        Self { velocity: Vector3::new(T::lit(-8.0), T::zero(), T::zero()), velocity_var: T::lit(25.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig<T: Real> {
    pub world: WorldConfig<T>,
    pub lag_horizon: T,
    /// White-acceleration spectral density per axis, m^2/s^3.
    pub process_noise: Vector3<T>,
    /// Velocity stddev added on each axis at a predicted bounce, m/s.
    pub bounce_noise: T,
    /// A capture gap at least this long starts a new ball.
    pub new_ball_gap: T,
    pub physics_dt: T,
    /// Longest interval over which one linearized transition is used.
    pub cov_step: T,
    pub prior: InitPrior<T>,
}

impl<T: Real> Default for TrackerConfig<T> {
    fn default() -> Self {
        Self {
            world: WorldConfig::default(),
            lag_horizon: T::lit(0.3),
            process_noise: Vector3::repeat(T::lit(2.0)),
            bounce_noise: T::lit(0.5),
            new_ball_gap: T::lit(1.0),
            physics_dt: T::lit(1e-3),
            cov_step: T::lit(0.01),
            prior: InitPrior::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Snapshot<T: Real> {
    t: T,
    mean: Vector6<T>,
    cov: Matrix6<T>,
    bounce_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry<T: Real> {
    m: Measurement<T>,
    after: Snapshot<T>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrackerStats {
    pub accepted: u64,
    pub rejected: u64,
    pub stale: u64,
    pub rewinds: u64,
    pub resets: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestOutcome {
    Reset,
    Applied,
    Replayed,
    Rejected,
    Stale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState<T: Real> {
    pub config: TrackerConfig<T>,
    pub mode: TrackMode,
    pub t: T,
    pub mean: Vector6<T>,
    pub cov: Matrix6<T>,
    pub bounce_count: u32,
    pub stats: TrackerStats,
    /// Accepted measurements in capture order, each with the state right
    /// after it was applied. The first entry may predate the lag window and
    /// serves as the rewind anchor.
    buffer: Vec<Entry<T>>,
    /// Whether `buffer[0]` is the measurement the track was reset with.
    anchored_at_reset: bool,
}

impl<T: Real> TrackerState<T> {
    pub fn new(config: TrackerConfig<T>) -> Self {
        Self {
            config,
            mode: TrackMode::Idle,
            t: T::zero(),
            mean: Vector6::zeros(),
            cov: Matrix6::zeros(),
            bounce_count: 0,
            stats: TrackerStats::default(),
            buffer: Vec::new(),
            anchored_at_reset: false,
        }
    }

    pub fn ball(&self) -> BallState<T> {
        BallState {
            t: self.t,
            p: self.mean.fixed_rows::<3>(0).into(),
            v: self.mean.fixed_rows::<3>(3).into(),
            bounce_count: self.bounce_count,
        }
    }

    pub fn position_cov(&self) -> Matrix3<T> {
        self.cov.fixed_view::<3, 3>(0, 0).into()
    }

    pub fn replay_buffer(&self) -> impl Iterator<Item = &Measurement<T>> {
        self.buffer.iter().map(|e| &e.m)
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    /// Starts a new track at `m`, clearing the replay buffer.
    pub fn reset(&mut self, m: &Measurement<T>, prior: &InitPrior<T>) {
        self.mode = TrackMode::Tracking;
        self.t = m.t_capture;
        self.mean = Vector6::new(m.z.x, m.z.y, m.z.z, prior.velocity.x, prior.velocity.y, prior.velocity.z);
        let mut cov = Matrix6::zeros();
        for i in 0..3 {
            cov[(i, i)] = m.sigma * m.sigma;
            cov[(i + 3, i + 3)] = prior.velocity_var;
        }
        self.cov = cov;
        self.bounce_count = 0;
        self.buffer.clear();
        self.buffer.push(Entry { m: *m, after: self.snapshot() });
        self.anchored_at_reset = true;
        self.stats.resets += 1;
    }

    /// Propagates mean and covariance to `t_target`.
    pub fn predict_to(&mut self, t_target: T) {
        assert!(t_target >= self.t, "cannot predict backwards");
        if t_target == self.t {
            return;
        }
        let cfg = self.config;
        let mut ball = self.ball();
        let mut cov = CovPropagator::new(self.cov, ball);
        let mut events: Vec<BounceEvent<T>> = Vec::new();
        let t0 = self.t;
        let mut k: u64 = 0;
        while ball.t < t_target {
            let t_next = (t0 + cfg.physics_dt * T::from_u64(k + 1).expect("step index")).min(t_target);
            events.clear();
            let mut next = step_with_events(&ball, t_next - ball.t, &cfg.world, &mut events);
            next.t = t_next;
            cov.advance(&next, &events, next.t >= t_target, &cfg);
            ball = next;
            k += 1;
        }
        let cov = cov.cov;
        self.t = t_target;
        self.mean = Vector6::new(ball.p.x, ball.p.y, ball.p.z, ball.v.x, ball.v.y, ball.v.z);
        self.cov = symmetrize(&cov);
        self.bounce_count = ball.bounce_count;
    }

    /// Position update with `R = sigma^2 I` and a Joseph-form covariance.
    /// Returns false, leaving the state unchanged, if the innovation is not
    /// finite or its covariance is singular.
    pub fn update(&mut self, m: &Measurement<T>) -> bool {
        debug_assert!(self.mode == TrackMode::Tracking);
        if self.apply_update(m) {
            self.stats.accepted += 1;
            self.insert_entry(*m);
            true
        } else {
            self.stats.rejected += 1;
            false
        }
    }

    fn apply_update(&mut self, m: &Measurement<T>) -> bool {
        let p: Vector3<T> = self.mean.fixed_rows::<3>(0).into();
        let y = m.z - p;
        let r = m.sigma * m.sigma;
        if !y.iter().all(|v| v.is_finite()) || !r.is_finite() {
            return false;
        }
        let s = self.position_cov() + Matrix3::identity() * r;
        let Some(s_inv) = s.try_inverse() else { return false };
        // P H^T is the first three columns of P.
        let pht: SMatrix<T, 6, 3> = self.cov.fixed_columns::<3>(0).into();
        let gain = pht * s_inv;
        let mean = self.mean + gain * y;
        let mut i_kh = Matrix6::identity();
        let mut cols = i_kh.fixed_columns_mut::<3>(0);
        cols -= &gain;
        let cov = i_kh * self.cov * i_kh.transpose() + gain * gain.transpose() * r;
        if !mean.iter().all(|v| v.is_finite()) || !cov.iter().all(|v| v.is_finite()) {
            return false;
        }
        self.mean = mean;
        self.cov = symmetrize(&cov);
        true
    }

    fn snapshot(&self) -> Snapshot<T> {
        Snapshot { t: self.t, mean: self.mean, cov: self.cov, bounce_count: self.bounce_count }
    }

    fn restore(&mut self, s: &Snapshot<T>) {
        self.t = s.t;
        self.mean = s.mean;
        self.cov = s.cov;
        self.bounce_count = s.bounce_count;
    }

    fn insert_entry(&mut self, m: Measurement<T>) {
        let after = self.snapshot();
        let pos = self.buffer.partition_point(|e| e.m.capture_key_cmp(&m) != Ordering::Greater);
        self.buffer.insert(pos, Entry { m, after });
        self.prune();
    }

    fn prune(&mut self) {
        let cutoff = self.t - self.config.lag_horizon;
        while self.buffer.len() > 1 && self.buffer[1].m.t_capture <= cutoff {
            self.buffer.remove(0);
            self.anchored_at_reset = false;
        }
    }

    /// Applies one arriving measurement. In-order captures are predicted to
    /// and applied; late ones rewind and replay the buffer.
    pub fn ingest(&mut self, m: &Measurement<T>, now: T) -> IngestOutcome {
        debug_assert!(m.t_arrival <= now + T::lit(1e-9));
        if self.mode == TrackMode::Idle || (m.t_capture - self.t).abs() >= self.config.new_ball_gap {
            let prior = self.config.prior;
            self.reset(m, &prior);
            return IngestOutcome::Reset;
        }
        if m.t_capture < self.t - self.config.lag_horizon {
            self.stats.stale += 1;
            return IngestOutcome::Stale;
        }
        let in_order = self.buffer.last().is_none_or(|e| e.m.capture_key_cmp(m) != Ordering::Greater);
        if in_order {
            self.predict_to(m.t_capture);
            return if self.update(m) { IngestOutcome::Applied } else { IngestOutcome::Rejected };
        }
        self.rewind_and_replay(m)
    }

    fn rewind_and_replay(&mut self, m: &Measurement<T>) -> IngestOutcome {
        self.stats.rewinds += 1;
        let split = self.buffer.partition_point(|e| e.m.capture_key_cmp(m) == Ordering::Less);
        let later: Vec<Measurement<T>> = self.buffer[split..].iter().map(|e| e.m).collect();
        if split == 0 {
            if !self.anchored_at_reset {
                self.stats.stale += 1;
                return IngestOutcome::Stale;
            }
            // Earlier than the measurement the track was started with.
            let (resets, accepted) = (self.stats.resets, self.stats.accepted);
            let prior = self.config.prior;
            self.reset(m, &prior);
            self.stats.resets = resets;
            let first = later[0];
            self.replay(&later);
            // `first` was the old reset point and now counts as an update.
            self.stats.accepted = accepted + u64::from(self.buffer.iter().any(|e| e.m == first));
            return IngestOutcome::Replayed;
        }
        let anchor = self.buffer[split - 1].after;
        self.buffer.truncate(split);
        self.restore(&anchor);
        let accepted = self.stats.accepted;
        self.predict_to(m.t_capture);
        let ok = self.apply_update(m);
        if ok {
            self.insert_entry(*m);
        } else {
            self.stats.rejected += 1;
        }
        self.replay(&later);
        self.stats.accepted = accepted + u64::from(ok);
        if ok {
            IngestOutcome::Replayed
        } else {
            IngestOutcome::Rejected
        }
    }

    fn replay(&mut self, ms: &[Measurement<T>]) {
        for m in ms {
            self.predict_to(m.t_capture);
            if self.apply_update(m) {
                self.insert_entry(*m);
            }
        }
    }

    /// One-sigma radius of the position uncertainty.
    pub fn confidence(&self) -> T {
        position_radius(&self.position_cov())
    }

    pub fn write_log_header<W: Write>(mut out: W) -> io::Result<()> {
        writeln!(out, "t,px,py,pz,vx,vy,vz,confidence,measurements")
    }

    pub fn write_log_row<W: Write>(&self, mut out: W) -> io::Result<()> {
        let m = &self.mean;
        writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            self.t.as_f64(),
            m[0].as_f64(),
            m[1].as_f64(),
            m[2].as_f64(),
            m[3].as_f64(),
            m[4].as_f64(),
            m[5].as_f64(),
            self.confidence().as_f64(),
            self.stats.accepted
        )
    }
}

/// Square root of the largest eigenvalue of a 3x3 covariance.
pub fn position_radius<T: Real>(cov: &Matrix3<T>) -> T {
    let sym = symmetrize3(cov);
    let max = sym.symmetric_eigenvalues().max();
    max.max(T::zero()).sqrt()
}

/// d(drag acceleration)/dv = -k (|v| I + v v^T / |v|).
pub fn drag_jacobian<T: Real>(v: &Vector3<T>, w: &WorldConfig<T>) -> Matrix3<T> {
    let speed = v.norm();
    if speed == T::zero() {
        return Matrix3::zeros();
    }
    -(Matrix3::identity() * speed + v * v.transpose() / speed) * w.drag_factor()
}

/// Jacobian of the flight derivative with respect to (p, v).
pub fn flight_jacobian<T: Real>(s: &BallState<T>, w: &WorldConfig<T>) -> Matrix6<T> {
    let mut a = Matrix6::zeros();
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    a.fixed_view_mut::<3, 3>(3, 3).copy_from(&drag_jacobian(&s.v, w));
    a
}

/// Second-order transition matrix of the flight linearized at `s`.
pub fn transition<T: Real>(s: &BallState<T>, h: T, w: &WorldConfig<T>) -> Matrix6<T> {
    let ah = flight_jacobian(s, w) * h;
    Matrix6::identity() + ah + ah * ah / T::lit(2.0)
}

/// Discretized white-acceleration process noise over `h`.
pub fn process_noise<T: Real>(q: &Vector3<T>, h: T) -> Matrix6<T> {
    let mut out = Matrix6::zeros();
    let h2 = h * h;
    for i in 0..3 {
        out[(i, i)] = q[i] * h2 * h / T::lit(3.0);
        out[(i, i + 3)] = q[i] * h2 / T::lit(2.0);
        out[(i + 3, i)] = q[i] * h2 / T::lit(2.0);
        out[(i + 3, i + 3)] = q[i] * h;
    }
    out
}

/// Covariance carried alongside a mean trajectory: one linearized transition
/// per `cov_step` chunk, split at bounces.
pub(crate) struct CovPropagator<T: Real> {
    pub cov: Matrix6<T>,
    anchor: BallState<T>,
}

impl<T: Real> CovPropagator<T> {
    pub fn new(cov: Matrix6<T>, at: BallState<T>) -> Self {
        Self { cov, anchor: at }
    }

    /// Accounts for one mean step ending at `after`; `flush` forces the
    /// covariance up to `after.t`.
    pub fn advance(&mut self, after: &BallState<T>, bounces: &[BounceEvent<T>], flush: bool, cfg: &TrackerConfig<T>) {
        for ev in bounces {
            self.cov = bounce_cov(&propagate_cov(&self.cov, &self.anchor, ev.t - self.anchor.t, cfg), cfg);
            self.anchor = BallState { t: ev.t, p: ev.p, v: ev.v_out, bounce_count: self.anchor.bounce_count + 1 };
        }
        if flush || after.t - self.anchor.t >= cfg.cov_step - T::lit(1e-12) {
            self.cov = propagate_cov(&self.cov, &self.anchor, after.t - self.anchor.t, cfg);
            self.anchor = *after;
        }
    }
}

pub(crate) fn propagate_cov<T: Real>(cov: &Matrix6<T>, at: &BallState<T>, h: T, cfg: &TrackerConfig<T>) -> Matrix6<T> {
    if h <= T::zero() {
        return *cov;
    }
    let phi = transition(at, h, &cfg.world);
    phi * cov * phi.transpose() + process_noise(&cfg.process_noise, h)
}

pub(crate) fn bounce_cov<T: Real>(cov: &Matrix6<T>, cfg: &TrackerConfig<T>) -> Matrix6<T> {
    let w = &cfg.world;
    let mut b = Matrix6::identity();
    b[(3, 3)] = w.bounce_horizontal_retention;
    b[(4, 4)] = w.bounce_horizontal_retention;
    b[(5, 5)] = -w.restitution;
    let mut out = b * cov * b.transpose();
    let var = cfg.bounce_noise * cfg.bounce_noise;
    for i in 3..6 {
        out[(i, i)] += var;
    }
    out
}

fn symmetrize<T: Real>(m: &Matrix6<T>) -> Matrix6<T> {
    (m + m.transpose()) * T::lit(0.5)
}

fn symmetrize3<T: Real>(m: &Matrix3<T>) -> Matrix3<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// Symmetric to `sym_tol` and minimum eigenvalue at least `-psd_tol`.
pub fn covariance_ok<T: Real>(cov: &Matrix6<T>, sym_tol: f64, psd_tol: f64) -> bool {
    let asym = (cov - cov.transpose()).abs().max().as_f64();
    let min_eig = symmetrize(cov).symmetric_eigenvalues().min().as_f64();
    asym <= sym_tol && min_eig >= -psd_tol
}
