use courtside_core::vision::NoiseModel;
use courtside_sim::batch::write_episodes;
use courtside_sim::{run_batch, run_episode, Outcome, RigScheduler, Scenario};

fn court(trials: usize) -> Scenario {
    let mut s = Scenario::preset("court").unwrap();
    s.n_trials = trials;
    s
}

#[test]
fn blind_rigs_mean_a_miss_with_no_fixes() {
    let mut s = court(1);
    s.rigs.max_range = 0.1;
    let e = run_episode(&s, 0, false);
    assert_eq!(e.outcome, Outcome::Miss);
    assert_eq!(e.measurements_produced, 0);
    assert!(!e.committed);
    assert!(e.predictions.is_empty());
    assert!(e.contact.is_none());
}

#[test]
fn clean_launch_with_sharp_rigs_is_returned() {
    let mut s = court(1);
    s.launcher = s.launcher.without_jitter();
    s.rigs.noise = NoiseModel { a: 0.0, b: 0.0, c: 0.002 };
    s.rigs.dropout_prob = 0.0;
    let e = run_episode(&s, 0, true);
    assert_eq!(e.outcome, Outcome::SuccessfulHit, "{e:?}");
    let c = e.contact.unwrap();
    assert!(c.v_out.x > 0.0);
    assert!(e.committed);
    assert!(!e.log.is_empty());
}

#[test]
fn lab_preset_returns_over_the_launcher() {
    let mut s = Scenario::preset("lab").unwrap();
    s.launcher = s.launcher.without_jitter();
    s.rigs.noise = NoiseModel { a: 0.0, b: 0.0, c: 0.002 };
    s.rigs.dropout_prob = 0.0;
    let e = run_episode(&s, 0, false);
    assert_eq!(e.outcome, Outcome::SuccessfulHit);
    assert!(e.return_height.unwrap() > s.court.net_height);
}

#[test]
fn concurrent_rigs_reproduce_the_sequential_run() {
    let mut s = court(6);
    let seq = run_batch(&s, true);
    s.scheduler = RigScheduler::Concurrent;
    let con = run_batch(&s, true);
    let csv = |b: &courtside_sim::Batch| {
        let mut buf = Vec::new();
        write_episodes(&mut buf, &b.episodes).unwrap();
        buf
    };
    assert_eq!(csv(&seq), csv(&con));
    for (a, b) in seq.episodes.iter().zip(&con.episodes) {
        assert_eq!(a.predictions, b.predictions);
        assert_eq!(a.log.len(), b.log.len());
        assert_eq!(a.tracker, b.tracker);
    }
}

#[test]
fn trial_results_do_not_depend_on_batch_size() {
    let small = run_batch(&court(3), false);
    let large = run_batch(&court(8), false);
    for (a, b) in small.episodes.iter().zip(&large.episodes) {
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.outcome, b.outcome);
        assert_eq!(a.launch, b.launch);
    }
}

#[test]
fn chair_stays_inside_its_caps() {
    let s = court(20);
    let b = run_batch(&s, false);
    let cfg = s.base_config();
    for e in &b.episodes {
        assert!(e.caps.within(&cfg, 1e-6), "trial {}: {:?}", e.trial, e.caps);
    }
    assert!(b.metrics.max_accel <= cfg.a_max + 1e-6);
    assert!(b.metrics.max_decel <= cfg.d_max + 1e-6);
}

#[test]
fn success_never_exceeds_hits() {
    for name in courtside_sim::scenario::PRESETS {
        let mut s = Scenario::preset(name).unwrap();
        s.n_trials = 10;
        let m = run_batch(&s, false).metrics;
        assert!(m.successes <= m.hits, "{name}");
        assert_eq!(m.n_trials, 10);
    }
}
