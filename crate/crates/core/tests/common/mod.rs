#![allow(dead_code)]

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use courtside_core::court::{BallState, WorldConfig};
use courtside_core::dynamics::{simulate_flight, step, StopCondition, Trajectory};
use courtside_core::vision::{court_rig_layout, observe, Measurement, RigConfig};

pub const ORIGIN: [f64; 3] = [16.0, -1.0, 1.0];
pub const AIM: [f64; 3] = [8.1, -1.0, 1.0];

/// Court-like launch with some spread in speed, elevation and aim.
pub fn random_launch(rng: &mut ChaCha8Rng) -> BallState<f64> {
    let speed = 8.0 + 0.3 * rng.random_range(-1.0..1.0);
    let elev: f64 = 0.9 + 0.05 * rng.random_range(-1.0..1.0);
    let ty = AIM[1] + 0.3 * rng.random_range(-1.0..1.0);
    let az = (ty - ORIGIN[1]).atan2(AIM[0] - ORIGIN[0]);
    let v = Vector3::new(az.cos() * elev.cos(), az.sin() * elev.cos(), elev.sin()) * speed;
    BallState::new(0.0, Vector3::from(ORIGIN), v)
}

/// Truth sampled every millisecond; off-grid instants are stepped from the
/// sample before them.
pub struct Truth {
    pub traj: Trajectory<f64>,
    pub world: WorldConfig<f64>,
}

impl Truth {
    pub fn fly(s0: &BallState<f64>, horizon: f64, world: WorldConfig<f64>) -> Self {
        let traj = simulate_flight(s0, StopCondition::Horizon(horizon), &world, 1e-3).trajectory;
        Self { traj, world }
    }

    pub fn at(&self, t: f64) -> BallState<f64> {
        let k = ((t / self.traj.dt).floor() as usize).min(self.traj.samples.len() - 1);
        let s = self.traj.samples[k];
        if t > s.t {
            let mut out = step(&s, t - s.t, &self.world);
            out.t = t;
            out
        } else {
            s
        }
    }
}

/// The court rigs, staggered in phase, each with its own latency.
pub fn rigs_with_latency(rng: &mut ChaCha8Rng, lo: f64, hi: f64, dropout: f64) -> Vec<RigConfig<f64>> {
    let mut rigs = court_rig_layout::<f64>();
    let n = rigs.len() as f64;
    for r in &mut rigs {
        let jitter = 0.01f64.min((hi - lo) / 2.0);
        r.latency_mean = rng.random_range(lo + jitter..=hi - jitter);
        r.latency_jitter = jitter;
        r.phase = r.rig_id as f64 / (r.rate * n);
        r.dropout_prob = dropout;
    }
    rigs
}

/// Every rig frame in `[0, t_end)`, in no particular order.
pub fn measure(rigs: &[RigConfig<f64>], truth: &Truth, t_end: f64, rng: &mut ChaCha8Rng) -> Vec<Measurement<f64>> {
    let mut out = Vec::new();
    for r in rigs {
        for t in r.frame_times(0.0, t_end) {
            if let Some(m) = observe(r, &truth.at(t), rng) {
                out.push(m);
            }
        }
    }
    out
}

pub fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("finite stddev")
}

pub fn draw3<R: Rng>(d: &impl Distribution<f64>, rng: &mut R) -> Vector3<f64> {
    Vector3::new(d.sample(rng), d.sample(rng), d.sample(rng))
}
