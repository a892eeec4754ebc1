//! Decentralized detection rigs simulated at the measurement level:
//! visibility, per-rig frame rate, distance-dependent noise, processing
//! latency, and the merged asynchronous stream the tracker consumes.

mod noise;
pub mod transport;
pub mod wire;

use std::cmp::Ordering;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::court::BallState;
use crate::scalar::Real;

pub use noise::{fit_noise_model, DepthSample, FitError, NoiseModel};
pub use wire::{decode_measurement, encode_measurement, read_records, write_records, WireError};

/// Timestamps are carried at microsecond resolution end to end, so that
/// file and socket replay of the wire format reproduce a stream exactly.
pub fn quantize_time<T: Real>(t: T) -> T {
    let micros = (t.as_f64() * 1e6).round();
    T::lit(micros / 1e6)
}

/// One rig's noisy, delayed ball position fix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement<T: Real> {
    pub rig_id: u32,
    pub t_capture: T,
    pub t_arrival: T,
    pub z: Vector3<T>,
    /// Isotropic standard deviation at the capture distance.
    pub sigma: T,
}

impl<T: Real> Measurement<T> {
    /// Total order used for replay: capture time, then rig id.
    pub fn capture_key_cmp(&self, other: &Self) -> Ordering {
        self.t_capture.partial_cmp(&other.t_capture).unwrap_or(Ordering::Equal).then(self.rig_id.cmp(&other.rig_id))
    }

    /// Order of the merged stream: arrival, then capture, then rig id.
    pub fn arrival_key_cmp(&self, other: &Self) -> Ordering {
        self.t_arrival
            .partial_cmp(&other.t_arrival)
            .unwrap_or(Ordering::Equal)
            .then_with(|| self.capture_key_cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigConfig<T: Real> {
    pub rig_id: u32,
    pub camera_pos: Vector3<T>,
    /// Unit optical axis.
    pub look_dir: Vector3<T>,
    pub fov_half_angle: T,
    pub max_range: T,
    /// Frame rate, Hz.
    pub rate: T,
    /// Time of the rig's first frame; frames follow every `1/rate` seconds.
    pub phase: T,
    pub latency_mean: T,
    /// Half-width of the uniform latency jitter.
    pub latency_jitter: T,
    pub noise: NoiseModel<T>,
    pub dropout_prob: T,
    /// Constant calibration offset added to every fix.
    pub bias: Vector3<T>,
}

impl<T: Real> RigConfig<T> {
    /// A rig at `camera_pos` looking at `target`, with the default rate,
    /// latency, noise and dropout.
    pub fn looking_at(rig_id: u32, camera_pos: Vector3<T>, target: Vector3<T>) -> Self {
        Self {
            rig_id,
            camera_pos,
            look_dir: (target - camera_pos).normalize(),
            fov_half_angle: T::lit(55f64.to_radians()),
            max_range: T::lit(20.0),
            rate: T::lit(25.0),
            phase: T::zero(),
            latency_mean: T::lit(0.100),
            latency_jitter: T::lit(0.020),
            noise: NoiseModel::default(),
            dropout_prob: T::lit(0.05),
            bias: Vector3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.rate > T::zero()) {
            return Err(format!("rig {}: rate must be positive", self.rig_id));
        }
        if self.latency_mean < T::zero() || self.latency_jitter < T::zero() {
            return Err(format!("rig {}: latency must be non-negative", self.rig_id));
        }
        if !(self.dropout_prob >= T::zero() && self.dropout_prob < T::one()) {
            return Err(format!("rig {}: dropout probability must be in [0, 1)", self.rig_id));
        }
        if !(self.max_range > T::zero()) {
            return Err(format!("rig {}: max range must be positive", self.rig_id));
        }
        self.noise.check_positive(self.max_range).map_err(|e| format!("rig {}: {e}", self.rig_id))
    }

    /// True iff the point is inside the rig's view cone and range.
    pub fn sees(&self, p: &Vector3<T>) -> bool {
        let d = p - self.camera_pos;
        let dist = d.norm();
        if dist > self.max_range || dist == T::zero() {
            return false;
        }
        let cos_angle = d.dot(&self.look_dir) / dist;
        cos_angle >= self.fov_half_angle.cos()
    }

    /// Capture instants in `[t0, t1)`, quantized to microseconds.
    pub fn frame_times(&self, t0: T, t1: T) -> Vec<T> {
        let period = T::one() / self.rate;
        let first = ((t0 - self.phase) / period).ceil().max(T::zero());
        let mut k = first.as_f64() as u64;
        let mut out = Vec::new();
        loop {
            let t = quantize_time(self.phase + period * T::from_u64(k).expect("frame index"));
            if t >= t1 {
                break;
            }
            if t >= t0 {
                out.push(t);
            }
            k += 1;
        }
        out
    }
}

/// Simulates one frame of `rig` seeing the ball at `truth` (captured at
/// `truth.t`). Returns `None` when the ball is out of view or the frame is
/// dropped.
///
/// Every call consumes the same number of random draws, visible or not, so a
/// rig's stream depends only on its own seed and frame schedule.
pub fn observe<T: Real, R: Rng + ?Sized>(
    rig: &RigConfig<T>,
    truth: &BallState<T>,
    rng: &mut R,
) -> Option<Measurement<T>> {
    let drop_draw: f64 = rng.random();
    let noise = Vector3::new(
        T::lit(StandardNormal.sample(rng)),
        T::lit(StandardNormal.sample(rng)),
        T::lit(StandardNormal.sample(rng)),
    );
    let jitter_draw: f64 = rng.random_range(-1.0..=1.0);

    if !rig.sees(&truth.p) || drop_draw < rig.dropout_prob.as_f64() {
        return None;
    }
    let distance = (truth.p - rig.camera_pos).norm();
    let sigma = rig.noise.sigma(distance);
    let t_capture = quantize_time(truth.t);
    let latency = (rig.latency_mean + rig.latency_jitter * T::lit(jitter_draw)).max(T::zero());
    let t_arrival = quantize_time(t_capture + latency).max(t_capture);
    Some(Measurement { rig_id: rig.rig_id, t_capture, t_arrival, z: truth.p + rig.bias + noise * sigma, sigma })
}

/// Merges per-rig outputs into one stream ordered by arrival time (ties by
/// capture time, then rig id). Capture order is not restored.
pub fn merge_streams<T: Real>(streams: impl IntoIterator<Item = Vec<Measurement<T>>>) -> Vec<Measurement<T>> {
    let mut all: Vec<Measurement<T>> = streams.into_iter().flatten().collect();
    all.sort_by(|a, b| a.arrival_key_cmp(b));
    all
}

/// Six rigs on 4 m stands, three along each side of the court, aimed at a
/// point above the incoming ball path.
pub fn court_rig_layout<T: Real>() -> Vec<RigConfig<T>> {
    let target = Vector3::new(T::lit(12.0), T::lit(-1.0), T::lit(1.5));
    rig_layout(&[6.0, 12.0, 18.0], 6.5, 4.0, target)
}

/// Lab layout: rigs close to the flight path on lower stands.
pub fn lab_rig_layout<T: Real>() -> Vec<RigConfig<T>> {
    let target = Vector3::new(T::lit(5.5), T::lit(-0.8), T::lit(1.3));
    rig_layout(&[2.0, 5.5, 9.0], 3.3, 2.5, target)
}

fn rig_layout<T: Real>(xs: &[f64], side_y: f64, height: f64, target: Vector3<T>) -> Vec<RigConfig<T>> {
    let n = (xs.len() * 2) as f64;
    let mut rigs = Vec::new();
    for (side, sign) in [-1.0, 1.0].into_iter().enumerate() {
        for (i, x) in xs.iter().enumerate() {
            let id = (side * xs.len() + i) as u32;
            let pos = Vector3::new(T::lit(*x), T::lit(sign * side_y), T::lit(height));
            let mut rig = RigConfig::looking_at(id, pos, target);
            // Stagger frames so the pooled stream is evenly spaced.
            rig.phase = T::lit(id as f64 / (25.0 * n));
            rigs.push(rig);
        }
    }
    rigs
}
