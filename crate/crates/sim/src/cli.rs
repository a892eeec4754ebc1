//! Command-line front end.

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use courtside_core::predictor::rollout;
use courtside_core::tracker::{IngestOutcome, TrackerState};
use courtside_core::vision::{fit_noise_model, read_records, DepthSample, FitError, WireError};

use crate::batch::{run_batch, write_outputs};
use crate::report::report_table;
use crate::scenario::{defaults_reference, RigScheduler, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("measurement file: {0}")]
    Wire(#[from] WireError),
    #[error("noise fit: {0}")]
    Fit(#[from] FitError),
    #[error("sample file: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad --param `{0}`: expected path=lo:hi:n or path=v1,v2,...")]
    Param(String),
}

#[derive(Debug, Parser)]
#[command(name = "courtside", about = "Wheelchair tennis robot simulator", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct ScenarioArgs {
    /// Scenario file (TOML); defaults to the chosen preset.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Preset used when no scenario file is given.
    #[arg(long, default_value = "court")]
    pub preset: String,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the number of trials.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Runs rig producers on their own threads.
    #[arg(long)]
    pub concurrent: bool,
}

impl ScenarioArgs {
    pub fn resolve(&self) -> Result<Scenario, CliError> {
        let mut s = match &self.scenario {
            Some(p) => Scenario::load(p)?,
            None => Scenario::preset(&self.preset)?,
        };
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(n) = self.trials {
            s.n_trials = n;
        }
        if self.concurrent {
            s.scheduler = RigScheduler::Concurrent;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Runs a batch of episodes and writes metrics, episodes and logs.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Runs one batch per value of a scenario parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// `path=lo:hi:n` (n evenly spaced values) or `path=v1,v2,...`.
        #[arg(long)]
        param: String,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Fits the depth-noise coefficients from `distance,measured,truth` rows.
    CalibrateNoise {
        #[arg(long)]
        samples: PathBuf,
    },
    /// Feeds recorded wire-format measurements to the tracker.
    Replay {
        #[arg(long)]
        measurements: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Tracker log CSV written after each ingested record.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Prints the scenario reference with every default.
    Defaults {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn simulate(s: &Scenario, out: &Path) -> Result<String, CliError> {
    let batch = run_batch(s, s.output.trajectories);
    write_outputs(out, s, &batch)?;
    Ok(report_table(&[&batch.metrics]))
}

pub fn parse_param(arg: &str) -> Result<(String, Vec<f64>), CliError> {
    let bad = || CliError::Param(arg.to_string());
    let (path, range) = arg.split_once('=').ok_or_else(bad)?;
    let values = if range.contains(':') {
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        match n {
            0 => return Err(bad()),
            1 => vec![lo],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        }
    } else {
        range.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    Ok((path.trim().to_string(), values))
}

pub fn sweep(s: &Scenario, param: &str, out: &Path) -> Result<String, CliError> {
    let (path, values) = parse_param(param)?;
    let scenarios: Vec<Scenario> = values.iter().map(|v| s.with_param(&path, *v)).collect::<Result<_, _>>()?;
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    w.write_record(["param", "value", "hit_rate", "success_rate", "intercept_y_std", "mean_chair_travel"])?;
    let mut metrics = Vec::new();
    for (v, sc) in values.iter().zip(&scenarios) {
        let b = run_batch(sc, false);
        let m = b.metrics;
        w.write_record([
            path.clone(),
            format!("{v}"),
            format!("{:.6}", m.hit_rate),
            format!("{:.6}", m.success_rate),
            format!("{:.6}", m.intercept_y_std),
            format!("{:.6}", m.mean_chair_travel),
        ])?;
        metrics.push(m);
    }
    w.flush()?;
    Ok(report_table(&metrics.iter().collect::<Vec<_>>()))
}

pub fn calibrate_noise(samples: &Path) -> Result<String, CliError> {
    let mut r = csv::Reader::from_path(samples)?;
    let rows: Vec<DepthSample<f64>> = r.deserialize().collect::<Result<_, _>>()?;
    let m = fit_noise_model(&rows)?;
    Ok(format!("a = {:.7}\nb = {:.7}\nc = {:.7}\n", m.a, m.b, m.c))
}

pub fn replay<W: Write>(path: &Path, s: &Scenario, log: Option<W>) -> Result<String, CliError> {
    let records = read_records::<f64, _>(BufReader::new(fs::File::open(path)?))?;
    let mut ts = TrackerState::new(s.tracker_config());
    let mut log = log;
    if let Some(w) = log.as_mut() {
        TrackerState::<f64>::write_log_header(&mut *w)?;
    }
    let mut counts = [0usize; 5];
    for m in &records {
        let o = ts.ingest(m, m.t_arrival);
        counts[match o {
            IngestOutcome::Reset => 0,
            IngestOutcome::Applied => 1,
            IngestOutcome::Replayed => 2,
            IngestOutcome::Rejected => 3,
            IngestOutcome::Stale => 4,
        }] += 1;
        if let Some(w) = log.as_mut() {
            ts.write_log_row(&mut *w)?;
        }
    }
    let b = ts.ball();
    let mut out = format!(
        "records {}  reset {}  applied {}  replayed {}  rejected {}  stale {}\n",
        records.len(),
        counts[0],
        counts[1],
        counts[2],
        counts[3],
        counts[4]
    );
    out.push_str(&format!(
        "state t={:.3}  p=({:.3}, {:.3}, {:.3})  v=({:.3}, {:.3}, {:.3})  radius={:.3}\n",
        b.t,
        b.p.x,
        b.p.y,
        b.p.z,
        b.v.x,
        b.v.y,
        b.v.z,
        ts.confidence()
    ));
    let pred = rollout(&ts, s.interception_plane_x, s.strategy.horizon);
    if pred.valid {
        out.push_str(&format!(
            "intercept x={:.2}  y={:.3}  z={:.3}  t={:.3}  radius={:.3}\n",
            pred.plane_x,
            pred.point.y,
            pred.point.z,
            pred.t_cross,
            pred.radius()
        ));
    } else {
        out.push_str("no intercept predicted\n");
    }
    Ok(out)
}

pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate { scenario, out } => simulate(&scenario.resolve()?, &out),
        Command::Sweep { scenario, param, out } => sweep(&scenario.resolve()?, &param, &out),
        Command::CalibrateNoise { samples } => calibrate_noise(&samples),
        Command::Replay { measurements, scenario, log } => {
            let s = scenario.resolve()?;
            match log {
                Some(p) => replay(&measurements, &s, Some(io::BufWriter::new(fs::File::create(p)?))),
                None => replay::<io::Sink>(&measurements, &s, None),
            }
        }
        Command::Defaults { out } => {
            let text = defaults_reference();
            match out {
                Some(p) => {
                    fs::write(&p, &text)?;
                    Ok(format!("wrote {}\n", p.display()))
                }
                None => Ok(text),
            }
        }
    }
}
