use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use walkdir::WalkDir;

use courtside_core::court::BallState;
use courtside_core::vision::{court_rig_layout, merge_streams, observe, write_records};
use courtside_sim::scenario::defaults_reference;

fn courtside(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_courtside")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = courtside(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    WalkDir::new(dir)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| (e.path().strip_prefix(dir).unwrap().to_path_buf(), fs::read(e.path()).unwrap()))
        .collect()
}

#[test]
fn simulate_is_byte_identical_across_runs_and_schedulers() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, extra: &[&str]| {
        let dir = tmp.path().join(name);
        let mut args = vec!["simulate", "--seed", "42", "--trials", "4", "--out", dir.to_str().unwrap()];
        args.extend_from_slice(extra);
        ok(&args);
        tree(&dir)
    };
    let a = run("a", &[]);
    let b = run("b", &[]);
    let c = run("c", &["--concurrent"]);
    assert_eq!(a, b);
    for name in ["metrics.csv", "episodes.csv", "convergence.csv", "report.txt", "scenario.toml"] {
        assert!(a.contains_key(Path::new(name)), "missing {name}");
    }
    assert!(a.contains_key(Path::new("trajectories/episode_0003.csv")));
    // The written scenario records the scheduler; everything else must match.
    let strip = |t: &BTreeMap<PathBuf, Vec<u8>>| {
        let mut t = t.clone();
        t.remove(Path::new("scenario.toml"));
        t
    };
    assert_eq!(strip(&a), strip(&c));
}

#[test]
fn written_scenario_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    ok(&["simulate", "--preset", "lab", "--seed", "9", "--trials", "3", "--out", first.to_str().unwrap()]);
    let second = tmp.path().join("second");
    let scen = first.join("scenario.toml");
    ok(&["simulate", "--scenario", scen.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(tree(&first), tree(&second));
}

#[test]
fn report_shows_published_beside_simulated() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(&["simulate", "--trials", "2", "--out", tmp.path().to_str().unwrap()]);
    let row = out.lines().find(|l| l.starts_with("court ")).unwrap();
    assert!(row.contains("73% /"), "{row}");
    assert!(row.contains("8.01 /"), "{row}");
}

#[test]
fn committed_reference_matches_the_generator() {
    let committed = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/scenario-reference.toml");
    let text = fs::read_to_string(committed).unwrap();
    assert_eq!(text, defaults_reference(), "regenerate with `courtside defaults --out docs/scenario-reference.toml`");
    assert_eq!(ok(&["defaults"]), text);
}

#[test]
fn sweep_writes_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["sweep", "--trials", "2", "--param", "launcher.mean_speed=7:9:3", "--out", tmp.path().to_str().unwrap()]);
    let csv = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("launcher.mean_speed,7,"));
    assert!(rows[3].starts_with("launcher.mean_speed,9,"));
}

#[test]
fn calibrate_noise_recovers_exact_quadratic() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("samples.csv");
    let mut text = String::from("distance,measured,truth\n");
    for d in 1..=10 {
        let d = d as f64;
        let sigma = 0.01 * d * d + 0.005 * d + 0.01;
        // Equal and opposite errors: RMS is exactly sigma.
        text.push_str(&format!("{d},{},{d}\n{d},{},{d}\n", d + sigma, d - sigma));
    }
    fs::write(&path, text).unwrap();
    let out = ok(&["calibrate-noise", "--samples", path.to_str().unwrap()]);
    assert_eq!(out, "a = 0.0100000\nb = 0.0050000\nc = 0.0100000\n");
}

#[test]
fn replay_feeds_recorded_records() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut s = BallState::new(0.0, Vector3::new(16.0, -1.0, 1.0), Vector3::new(-5.0, 0.0, 6.3));
    let w = courtside_core::court::WorldConfig::default();
    let rigs = court_rig_layout::<f64>();
    let mut streams = vec![Vec::new(); rigs.len()];
    for k in 1..=1000 {
        s = courtside_core::dynamics::step(&s, 1e-3, &w);
        s.t = k as f64 * 1e-3;
        if k % 40 == 0 {
            for (r, out) in rigs.iter().zip(&mut streams) {
                out.extend(observe(r, &s, &mut rng));
            }
        }
    }
    let ms = merge_streams(streams);
    let path = tmp.path().join("m.txt");
    let mut buf = Vec::new();
    write_records(&mut buf, &ms).unwrap();
    fs::write(&path, buf).unwrap();

    let log = tmp.path().join("log.csv");
    let out = ok(&["replay", "--measurements", path.to_str().unwrap(), "--log", log.to_str().unwrap()]);
    assert!(out.starts_with(&format!("records {}", ms.len())), "{out}");
    assert!(out.contains("intercept x=8.10"), "{out}");
    assert_eq!(fs::read_to_string(log).unwrap().lines().count(), ms.len() + 1);
}

#[test]
fn bad_input_is_reported() {
    let out = courtside(&["simulate", "--preset", "clay"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));
    let out = courtside(&["sweep", "--param", "launcher.nope=1,2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("launcher.nope"));
}
