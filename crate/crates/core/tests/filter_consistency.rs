mod common;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use courtside_core::court::{BallState, WorldConfig};
use courtside_core::dynamics::step;
use courtside_core::tracker::{process_noise, InitPrior, TrackerConfig, TrackerState, Vector6};

use common::*;

const CHUNK: f64 = 0.01;
const T_EVAL: f64 = 1.0;
const RUNS: usize = 100;

/// Flight with white acceleration noise of density `q` injected at the end
/// of every 10 ms chunk, sampled every millisecond.
fn noisy_truth(s0: &BallState<f64>, q: f64, t_end: f64, world: WorldConfig<f64>, rng: &mut ChaCha8Rng) -> Truth {
    let chol = process_noise(&Vector3::repeat(q), CHUNK).cholesky().expect("positive definite");
    let per_chunk = (CHUNK / 1e-3).round() as usize;
    let n_chunks = (t_end / CHUNK).round() as usize;
    let mut s = *s0;
    let mut samples = vec![s];
    for c in 0..n_chunks {
        for k in 0..per_chunk {
            s = step(&s, 1e-3, &world);
            s.t = (c * per_chunk + k + 1) as f64 * 1e-3;
            if k + 1 < per_chunk {
                samples.push(s);
            }
        }
        let w = chol.l() * Vector6::from_fn(|_, _| StandardNormal.sample(rng));
        s.p += w.fixed_rows::<3>(0);
        s.v += w.fixed_rows::<3>(3);
        samples.push(s);
    }
    let traj = courtside_core::dynamics::Trajectory { dt: 1e-3, samples, events: Vec::new() };
    Truth { traj, world }
}

fn nees_run(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = WorldConfig::default();
    let nominal = random_launch(&mut rng);
    let prior = InitPrior { velocity: nominal.v, velocity_var: 0.25 };
    let cfg = TrackerConfig { prior, process_noise: Vector3::repeat(0.1), ..TrackerConfig::default() };
    let v0 = prior.velocity + draw3(&normal(prior.velocity_var.sqrt()), &mut rng);
    let truth = noisy_truth(&BallState::new(0.0, nominal.p, v0), cfg.process_noise.x, T_EVAL, world, &mut rng);
    assert_eq!(truth.at(T_EVAL).bounce_count, 0);

    let rigs = rigs_with_latency(&mut rng, 0.05, 0.15, 0.0);
    let mut ms = measure(&rigs, &truth, T_EVAL, &mut rng);
    ms.sort_by(|a, b| a.arrival_key_cmp(b));
    let mut ts = TrackerState::new(cfg);
    for m in &ms {
        ts.ingest(m, m.t_arrival);
    }
    ts.predict_to(T_EVAL);
    let x = truth.at(T_EVAL);
    let err = ts.mean - Vector6::new(x.p.x, x.p.y, x.p.z, x.v.x, x.v.y, x.v.z);
    let p_inv = ts.cov.try_inverse().expect("invertible covariance");
    (err.transpose() * p_inv * err)[(0, 0)]
}

#[test]
fn average_nees_inside_chi_square_band() {
    let nees: Vec<f64> = (0..RUNS as u64).map(|s| nees_run(50_000 + s)).collect();
    let avg = nees.iter().sum::<f64>() / RUNS as f64;
    let pooled = ChiSquared::new(6.0 * RUNS as f64).unwrap();
    let lo = pooled.inverse_cdf(0.025) / RUNS as f64;
    let hi = pooled.inverse_cdf(0.975) / RUNS as f64;
    assert!(avg >= lo && avg <= hi, "average NEES {avg:.3} outside [{lo:.3}, {hi:.3}]");

    let single = ChiSquared::new(6.0).unwrap();
    let (a, b) = (single.inverse_cdf(0.025), single.inverse_cdf(0.975));
    let inside = nees.iter().filter(|&&e| e >= a && e <= b).count();
    assert!(inside >= 88, "{inside}/100 runs inside the per-run 95% band");
}
