//! Batches of episodes, summary metrics and CSV outputs.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rayon::prelude::*;
use statrs::statistics::{Data, OrderStatistics, Statistics};

use courtside_core::predictor::{aggregate_convergence, ConvergenceBin};

use crate::episode::{run_episode, EpisodeResult};
use crate::outcome::Outcome;
use crate::scenario::Scenario;

/// Chair-travel bin width of the reachability histogram, meters.
pub const TRAVEL_BIN: f64 = 0.3;
pub const TRAVEL_BINS: usize = 7;
/// Time-to-intercept bin width, seconds.
pub const TIME_BIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ReachBin {
    pub lo: f64,
    pub hi: f64,
    pub miss: usize,
    pub unsuccessful: usize,
    pub successful: usize,
}

impl ReachBin {
    pub fn total(&self) -> usize {
        self.miss + self.unsuccessful + self.successful
    }

    pub fn success_rate(&self) -> Option<f64> {
        (self.total() > 0).then(|| self.successful as f64 / self.total() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub scenario: String,
    pub n_trials: usize,
    pub hits: usize,
    pub successes: usize,
    pub hit_rate: f64,
    pub success_rate: f64,
    pub mean_launch_speed: f64,
    pub intercept_y_iqr: f64,
    pub intercept_y_std: f64,
    pub mean_chair_travel: f64,
    pub mean_time_to_intercept: f64,
    pub committed_rate: f64,
    pub max_accel: f64,
    pub max_decel: f64,
    pub max_speed: f64,
    pub reachability: Vec<ReachBin>,
    /// `(lo, hi, count)` bins of time to intercept.
    pub time_to_intercept: Vec<(f64, f64, usize)>,
    pub convergence: Vec<ConvergenceBin>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub episodes: Vec<EpisodeResult>,
    pub metrics: Metrics,
}

/// Runs every trial of `s` (in parallel, results in trial order).
pub fn run_batch(s: &Scenario, record_logs: bool) -> Batch {
    let episodes: Vec<EpisodeResult> =
        (0..s.n_trials).into_par_iter().map(|i| run_episode(s, i, record_logs)).collect();
    let metrics = summarize(s, &episodes);
    Batch { episodes, metrics }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().mean()
    }
}

pub fn summarize(s: &Scenario, episodes: &[EpisodeResult]) -> Metrics {
    let n = episodes.len();
    let hits = episodes.iter().filter(|e| e.outcome.is_hit()).count();
    let successes = episodes.iter().filter(|e| e.outcome == Outcome::SuccessfulHit).count();
    let ys: Vec<f64> = episodes.iter().filter_map(|e| e.intercept_observed.map(|p| p.y)).collect();
    let (iqr, std) = if ys.len() >= 2 {
        let mut d = Data::new(ys.clone());
        (d.upper_quartile() - d.lower_quartile(), ys.iter().std_dev())
    } else {
        (f64::NAN, f64::NAN)
    };

    let mut reach: Vec<ReachBin> = (0..TRAVEL_BINS)
        .map(|b| ReachBin {
            lo: b as f64 * TRAVEL_BIN,
            hi: if b + 1 == TRAVEL_BINS { f64::INFINITY } else { (b + 1) as f64 * TRAVEL_BIN },
            miss: 0,
            unsuccessful: 0,
            successful: 0,
        })
        .collect();
    for e in episodes {
        let b = ((e.chair_travel / TRAVEL_BIN) as usize).min(TRAVEL_BINS - 1);
        match e.outcome {
            Outcome::Miss => reach[b].miss += 1,
            Outcome::UnsuccessfulHit => reach[b].unsuccessful += 1,
            Outcome::SuccessfulHit => reach[b].successful += 1,
        }
    }

    let times: Vec<f64> = episodes.iter().filter_map(|e| e.time_to_intercept).collect();
    let n_time = times.iter().map(|t| (t / TIME_BIN) as usize + 1).max().unwrap_or(0);
    let mut hist: Vec<(f64, f64, usize)> =
        (0..n_time).map(|b| (b as f64 * TIME_BIN, (b + 1) as f64 * TIME_BIN, 0)).collect();
    for t in &times {
        hist[(t / TIME_BIN) as usize].2 += 1;
    }

    let series: Vec<_> = episodes.iter().filter(|e| !e.predictions.is_empty()).map(|e| e.predictions.clone()).collect();
    let speeds: Vec<f64> = episodes.iter().map(|e| e.launch.v.norm()).collect();
    let travel: Vec<f64> = episodes.iter().map(|e| e.chair_travel).collect();
    let fold = |f: fn(&EpisodeResult) -> f64| episodes.iter().map(f).fold(0.0, f64::max);

    Metrics {
        scenario: s.name.clone(),
        n_trials: n,
        hits,
        successes,
        hit_rate: hits as f64 / n as f64,
        success_rate: successes as f64 / n as f64,
        mean_launch_speed: mean(&speeds),
        intercept_y_iqr: iqr,
        intercept_y_std: std,
        mean_chair_travel: mean(&travel),
        mean_time_to_intercept: mean(&times),
        committed_rate: episodes.iter().filter(|e| e.committed).count() as f64 / n as f64,
        max_accel: fold(|e| e.caps.max_accel.max(e.caps.max_reversal)),
        max_decel: fold(|e| e.caps.max_decel),
        max_speed: fold(|e| e.caps.max_speed),
        reachability: reach,
        time_to_intercept: hist,
        convergence: aggregate_convergence(&series, s.output.convergence_bins),
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

pub fn write_metrics<W: Write>(out: W, m: &Metrics) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "value"]).map_err(csv_err)?;
    let rows: [(&str, String); 15] = [
        ("scenario", m.scenario.clone()),
        ("n_trials", m.n_trials.to_string()),
        ("hits", m.hits.to_string()),
        ("successes", m.successes.to_string()),
        ("hit_rate", num(m.hit_rate)),
        ("success_rate", num(m.success_rate)),
        ("mean_launch_speed", num(m.mean_launch_speed)),
        ("intercept_y_iqr", num(m.intercept_y_iqr)),
        ("intercept_y_std", num(m.intercept_y_std)),
        ("mean_chair_travel", num(m.mean_chair_travel)),
        ("mean_time_to_intercept", num(m.mean_time_to_intercept)),
        ("committed_rate", num(m.committed_rate)),
        ("max_base_accel", num(m.max_accel)),
        ("max_base_decel", num(m.max_decel)),
        ("max_base_speed", num(m.max_speed)),
    ];
    for (k, v) in rows {
        w.write_record([k, v.as_str()]).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_episodes<W: Write>(out: W, episodes: &[EpisodeResult]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "seed",
        "outcome",
        "launch_speed",
        "intercept_x",
        "intercept_y",
        "intercept_z",
        "t_cross",
        "time_to_intercept",
        "chair_travel",
        "committed",
        "contact_t",
        "contact_x",
        "contact_y",
        "contact_z",
        "return_height",
        "landing_x",
        "landing_y",
        "measurements",
        "accepted",
        "rejected",
        "stale",
        "rewinds",
        "resets",
        "max_accel",
        "max_decel",
    ])
    .map_err(csv_err)?;
    for e in episodes {
        let ip = e.intercept_observed;
        let c = e.contact.map(|c| c.point);
        let row = [
            e.trial.to_string(),
            e.seed.to_string(),
            e.outcome.label().to_string(),
            num(e.launch.v.norm()),
            opt(ip.map(|p| p.x)),
            opt(ip.map(|p| p.y)),
            opt(ip.map(|p| p.z)),
            opt(e.t_cross),
            opt(e.time_to_intercept),
            num(e.chair_travel),
            (e.committed as u8).to_string(),
            opt(e.contact.map(|c| c.t)),
            opt(c.map(|p| p.x)),
            opt(c.map(|p| p.y)),
            opt(c.map(|p| p.z)),
            opt(e.return_height),
            opt(e.landing.map(|p| p.x)),
            opt(e.landing.map(|p| p.y)),
            e.measurements_produced.to_string(),
            e.tracker.accepted.to_string(),
            e.tracker.rejected.to_string(),
            e.tracker.stale.to_string(),
            e.tracker.rewinds.to_string(),
            e.tracker.resets.to_string(),
            num(e.caps.max_accel.max(e.caps.max_reversal)),
            num(e.caps.max_decel),
        ];
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_convergence<W: Write>(out: W, bins: &[ConvergenceBin]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "fraction_lo",
        "fraction_hi",
        "trajectories",
        "err_x_mean",
        "err_x_std",
        "err_y_mean",
        "err_y_std",
        "err_z_mean",
        "err_z_std",
        "err_t_mean",
        "err_t_std",
    ])
    .map_err(csv_err)?;
    for b in bins {
        let row = [
            num(b.fraction_lo),
            num(b.fraction_hi),
            b.trajectories.to_string(),
            num(b.x.mean),
            num(b.x.std),
            num(b.y.mean),
            num(b.y.std),
            num(b.z.mean),
            num(b.z.std),
            num(b.t.mean),
            num(b.t.std),
        ];
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_reachability<W: Write>(out: W, bins: &[ReachBin]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["travel_lo", "travel_hi", "miss", "unsuccessful_hit", "successful_hit", "success_rate"])
        .map_err(csv_err)?;
    for b in bins {
        let row = [
            num(b.lo),
            num(b.hi),
            b.miss.to_string(),
            b.unsuccessful.to_string(),
            b.successful.to_string(),
            opt(b.success_rate()),
        ];
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_time_histogram<W: Write>(out: W, bins: &[(f64, f64, usize)]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_lo", "t_hi", "count"]).map_err(csv_err)?;
    for (lo, hi, c) in bins {
        w.write_record([num(*lo), num(*hi), c.to_string()]).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_episode_log<W: Write>(out: W, e: &EpisodeResult) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t",
        "ball_x",
        "ball_y",
        "ball_z",
        "est_x",
        "est_y",
        "est_z",
        "chair_x",
        "chair_y",
        "chair_heading",
        "chair_v",
        "chair_omega",
        "omega_left",
        "omega_right",
        "racket_x",
        "racket_y",
        "racket_z",
    ])
    .map_err(csv_err)?;
    for r in &e.log {
        let row = [
            format!("{:.3}", r.t),
            num(r.ball.x),
            num(r.ball.y),
            num(r.ball.z),
            opt(r.estimate.map(|p| p.x)),
            opt(r.estimate.map(|p| p.y)),
            opt(r.estimate.map(|p| p.z)),
            num(r.chair.pose.x),
            num(r.chair.pose.y),
            num(r.chair.pose.heading),
            num(r.chair.v_lin),
            num(r.chair.v_ang),
            num(r.omega_left),
            num(r.omega_right),
            opt(r.racket.map(|p| p.x)),
            opt(r.racket.map(|p| p.y)),
            opt(r.racket.map(|p| p.z)),
        ];
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
}

/// Writes metrics.csv, episodes.csv, convergence.csv, reachability.csv,
/// time_to_intercept.csv, report.txt and (if enabled) trajectories/.
pub fn write_outputs(dir: &Path, s: &Scenario, b: &Batch) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let create = |name: &str| fs::File::create(dir.join(name)).map(io::BufWriter::new);
    write_metrics(create("metrics.csv")?, &b.metrics)?;
    write_episodes(create("episodes.csv")?, &b.episodes)?;
    write_convergence(create("convergence.csv")?, &b.metrics.convergence)?;
    write_reachability(create("reachability.csv")?, &b.metrics.reachability)?;
    write_time_histogram(create("time_to_intercept.csv")?, &b.metrics.time_to_intercept)?;
    let mut report = create("report.txt")?;
    report.write_all(crate::report::report_table(&[&b.metrics]).as_bytes())?;
    report.flush()?;
    let mut scn = create("scenario.toml")?;
    scn.write_all(s.to_toml_string().as_bytes())?;
    scn.flush()?;
    if s.output.trajectories {
        let tdir = dir.join("trajectories");
        fs::create_dir_all(&tdir)?;
        for e in &b.episodes {
            let f = fs::File::create(tdir.join(format!("episode_{:04}.csv", e.trial)))?;
            write_episode_log(io::BufWriter::new(f), e)?;
        }
    }
    Ok(())
}
