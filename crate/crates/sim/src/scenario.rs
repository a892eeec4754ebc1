//! Scenario configuration: presets, TOML loading with overrides, and
//! conversion into the core configuration types.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use courtside_core::base::BaseConfig;
use courtside_core::court::{make_lab_court, make_regulation_court, CourtGeometry, CourtMode, WorldConfig};
use courtside_core::swing::{face_normal_for_tilt, ArmModel, JointLimit, StrategyConfig};
use courtside_core::tracker::{InitPrior, TrackerConfig};
use courtside_core::vision::{court_rig_layout, lab_rig_layout, NoiseModel, RigConfig};

use crate::launcher::LauncherConfig;

pub const PRESETS: [&str; 4] = ["court", "court-fast", "lab", "lab-human"];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown preset `{0}` (expected one of court, court-fast, lab, lab-human)")]
    UnknownPreset(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("no such scenario key `{0}`")]
    UnknownKey(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RigScheduler {
    /// All rigs run on the episode thread.
    #[default]
    Sequential,
    /// One producer thread per rig, joined at every physics tick.
    Concurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RigLayout {
    Court,
    Lab,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigsSection {
    pub layout: RigLayout,
    pub rate: f64,
    pub latency_mean: f64,
    pub latency_jitter: f64,
    pub dropout_prob: f64,
    pub fov_half_angle_deg: f64,
    pub max_range: f64,
    pub bias: [f64; 3],
    pub noise: NoiseModel<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerSection {
    pub lag_horizon: f64,
    pub process_noise: f64,
    pub bounce_noise: f64,
    pub new_ball_gap: f64,
    pub cov_step: f64,
    /// Per-axis variance of the launch-velocity guess, (m/s)^2.
    pub prior_velocity_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSection {
    pub base_offset: [f64; 3],
    pub l_upper: f64,
    pub l_fore: f64,
    pub l_racket: f64,
    /// `[q_min, q_max, v_max, a_max]` for base yaw, shoulder pitch, elbow pitch.
    pub base_yaw: [f64; 4],
    pub shoulder_pitch: [f64; 4],
    pub elbow_pitch: [f64; 4],
    pub upper_arm_roll_deg: f64,
    pub face_tilt_deg: f64,
    pub stroke_sweep: [f64; 3],
    pub z_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSection {
    pub track_width: f64,
    pub wheel_radius: f64,
    pub gear_reduction: f64,
    pub v_max_lin: f64,
    pub v_max_ang: f64,
    pub a_max: f64,
    pub d_max: f64,
    pub alpha_max: f64,
    pub lag_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    /// One-sigma intercept radius at which the planner commits, meters.
    pub act_radius: f64,
    pub lockout: f64,
    pub hit_radius: f64,
    pub racket_restitution: f64,
    /// Rollout horizon of the predictor, seconds.
    pub horizon: f64,
    /// Episode cut-off, seconds after launch.
    pub max_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub trajectories: bool,
    /// Row spacing of per-episode trajectory logs, seconds.
    pub log_interval: f64,
    pub convergence_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub n_trials: usize,
    pub seed: u64,
    pub interception_plane_x: f64,
    pub scheduler: RigScheduler,
    pub court: CourtGeometry<f64>,
    pub world: WorldConfig<f64>,
    pub rigs: RigsSection,
    pub tracker: TrackerSection,
    pub arm: ArmSection,
    pub base: BaseSection,
    pub launcher: LauncherConfig,
    pub strategy: StrategySection,
    pub output: OutputSection,
}

fn limit_array(j: &JointLimit<f64>) -> [f64; 4] {
    [j.q_min, j.q_max, j.v_max, j.a_max]
}

fn limit_from(a: [f64; 4]) -> JointLimit<f64> {
    JointLimit { q_min: a[0], q_max: a[1], v_max: a[2], a_max: a[3] }
}

impl Scenario {
    pub fn preset(name: &str) -> Result<Self, ScenarioError> {
        let arm = ArmModel::<f64>::default();
        let base = BaseConfig::<f64>::default();
        let court_rigs = RigsSection {
            layout: RigLayout::Court,
            rate: 25.0,
            latency_mean: 0.1,
            latency_jitter: 0.02,
            dropout_prob: 0.05,
            fov_half_angle_deg: 55.0,
            max_range: 20.0,
            bias: [0.0; 3],
            noise: NoiseModel::default(),
        };
        let mut s = Scenario {
            name: name.to_string(),
            n_trials: 15,
            seed: 42,
            interception_plane_x: 8.1,
            scheduler: RigScheduler::Sequential,
            court: make_regulation_court(),
            world: WorldConfig::default(),
            rigs: court_rigs,
            tracker: TrackerSection {
                lag_horizon: 0.3,
                process_noise: 0.1,
                bounce_noise: 0.5,
                new_ball_gap: 1.0,
                cov_step: 0.01,
                prior_velocity_var: 25.0,
            },
            arm: ArmSection {
                base_offset: arm.base_offset.into(),
                l_upper: arm.l_upper,
                l_fore: arm.l_fore,
                l_racket: arm.l_racket,
                base_yaw: limit_array(&arm.joints[0]),
                shoulder_pitch: limit_array(&arm.joints[1]),
                elbow_pitch: limit_array(&arm.joints[2]),
                upper_arm_roll_deg: 40.0,
                face_tilt_deg: 2.0,
                stroke_sweep: arm.stroke_sweep,
                z_min: arm.z_min,
            },
            base: BaseSection {
                track_width: base.track_width,
                wheel_radius: base.wheel_radius,
                gear_reduction: base.gear_reduction,
                v_max_lin: base.v_max_lin,
                v_max_ang: base.v_max_ang,
                a_max: base.a_max,
                d_max: base.d_max,
                alpha_max: base.alpha_max,
                lag_tau: base.lag_tau,
            },
            launcher: LauncherConfig {
                origin: [16.0, -1.0, 1.0],
                mean_speed: 8.01,
                speed_stddev: 0.1,
                aim_elevation: 0.90,
                elevation_jitter: 0.01,
                aim_azimuth: 0.0,
                azimuth_jitter: 0.0,
                target_y_mean: -1.0,
                target_y_stddev: 0.23,
            },
            strategy: StrategySection {
                act_radius: 0.4,
                lockout: 0.05,
                hit_radius: 0.10,
                racket_restitution: 0.85,
                horizon: 3.0,
                max_time: 5.0,
            },
            output: OutputSection { trajectories: true, log_interval: 0.01, convergence_bins: 10 },
        };
        match name {
            "court" => {}
            "court-fast" => {
                s.launcher.origin = [20.9, -1.0, 1.0];
                s.launcher.mean_speed = 12.64;
                s.launcher.aim_elevation = 1.0;
                s.launcher.target_y_stddev = 0.29;
                s.arm.face_tilt_deg = -8.0;
            }
            "lab" | "lab-human" => {
                s.court = make_lab_court();
                s.interception_plane_x = 2.0;
                s.rigs.layout = RigLayout::Lab;
                s.launcher.origin = [9.5, -0.8, 1.3];
                s.launcher.mean_speed = 6.79;
                s.launcher.aim_elevation = 0.675;
                s.launcher.target_y_mean = -0.8;
                s.launcher.target_y_stddev = 0.20;
                s.arm.face_tilt_deg = 8.0;
                if name == "lab-human" {
                    s.launcher.mean_speed = 6.56;
                    s.launcher.speed_stddev = 0.3;
                    s.launcher.elevation_jitter = 0.03;
                    s.launcher.target_y_stddev = 0.52;
                }
            }
            other => return Err(ScenarioError::UnknownPreset(other.to_string())),
        }
        Ok(s)
    }

    /// Parses a scenario file. The optional top-level `preset` key (default
    /// `court`) selects the base values; every other key overrides them.
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let mut user: Table = text.parse().map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
        let preset = match user.remove("preset") {
            Some(Value::String(p)) => p,
            Some(_) => return Err(ScenarioError::Parse("`preset` must be a string".into())),
            None => "court".to_string(),
        };
        let mut base = Self::preset(&preset)?.to_table();
        merge(&mut base, user);
        Self::from_table(base)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_table(&self) -> Table {
        match Value::try_from(self).expect("scenario serializes") {
            Value::Table(t) => t,
            _ => unreachable!("scenario is a table"),
        }
    }

    pub fn from_table(t: Table) -> Result<Self, ScenarioError> {
        let s: Scenario =
            Value::Table(t).try_into().map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Returns a copy with the dotted key `path` set to `value`.
    pub fn with_param(&self, path: &str, value: f64) -> Result<Self, ScenarioError> {
        let mut t = self.to_table();
        set_path(&mut t, path, value)?;
        Self::from_table(t)
    }

    /// Configuration problems are reported here, before any episode runs.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.n_trials < 1 {
            return bad("n_trials must be at least 1".into());
        }
        self.court.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.world.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let px = self.interception_plane_x;
        if !(px > 0.0 && px < self.court.net_x) {
            return bad(format!("interception plane x = {px} must lie on the robot side of the net"));
        }
        if !(self.launcher.origin[0] > px) {
            return bad("launcher must stand beyond the interception plane".into());
        }
        self.launcher.validate().map_err(ScenarioError::Invalid)?;
        for r in self.rig_configs() {
            r.validate().map_err(|e| ScenarioError::Invalid(format!("rig {}: {e}", r.rig_id)))?;
        }
        self.arm_model().validate().map_err(ScenarioError::Invalid)?;
        self.base_config().validate().map_err(ScenarioError::Invalid)?;
        let st = &self.strategy;
        if !(st.act_radius > 0.0 && st.lockout >= 0.0 && st.hit_radius > 0.0 && st.horizon > 0.0 && st.max_time > 0.0) {
            return bad("strategy thresholds must be positive".into());
        }
        if !(st.racket_restitution > 0.0 && st.racket_restitution <= 1.0) {
            return bad("racket restitution must be in (0, 1]".into());
        }
        let t = &self.tracker;
        if !(t.lag_horizon >= 0.0
            && t.process_noise >= 0.0
            && t.bounce_noise >= 0.0
            && t.cov_step > 0.0
            && t.prior_velocity_var > 0.0)
        {
            return bad("tracker parameters must be non-negative".into());
        }
        if !(self.output.log_interval > 0.0 && self.output.convergence_bins >= 1) {
            return bad("output log interval and bin count must be positive".into());
        }
        Ok(())
    }

    pub fn rig_configs(&self) -> Vec<RigConfig<f64>> {
        let r = &self.rigs;
        let mut rigs = match r.layout {
            RigLayout::Court => court_rig_layout(),
            RigLayout::Lab => lab_rig_layout(),
        };
        for rig in &mut rigs {
            rig.rate = r.rate;
            rig.latency_mean = r.latency_mean;
            rig.latency_jitter = r.latency_jitter;
            rig.dropout_prob = r.dropout_prob;
            rig.fov_half_angle = r.fov_half_angle_deg.to_radians();
            rig.max_range = r.max_range;
            rig.bias = Vector3::from(r.bias);
            rig.noise = r.noise;
        }
        let n = rigs.len() as f64;
        for rig in &mut rigs {
            rig.phase = rig.rig_id as f64 / (r.rate * n);
        }
        rigs
    }

    pub fn tracker_config(&self) -> TrackerConfig<f64> {
        let t = &self.tracker;
        let l = &self.launcher;
        let target = Vector3::new(self.interception_plane_x, l.target_y_mean, 1.0);
        let origin = Vector3::from(l.origin);
        let mut prior = InitPrior::toward(origin, target, l.mean_speed * l.aim_elevation.cos());
        prior.velocity_var = t.prior_velocity_var;
        TrackerConfig {
            world: self.world,
            lag_horizon: t.lag_horizon,
            process_noise: Vector3::repeat(t.process_noise),
            bounce_noise: t.bounce_noise,
            new_ball_gap: t.new_ball_gap,
            physics_dt: 1e-3,
            cov_step: t.cov_step,
            prior,
        }
    }

    pub fn arm_model(&self) -> ArmModel<f64> {
        let a = &self.arm;
        let roll = a.upper_arm_roll_deg.to_radians();
        ArmModel {
            base_offset: Vector3::from(a.base_offset),
            l_upper: a.l_upper,
            l_fore: a.l_fore,
            l_racket: a.l_racket,
            joints: [limit_from(a.base_yaw), limit_from(a.shoulder_pitch), limit_from(a.elbow_pitch)],
            upper_arm_roll: roll,
            face_normal: face_normal_for_tilt(roll, a.face_tilt_deg.to_radians()),
            stroke_sweep: a.stroke_sweep,
            yaw_contact: 0.0,
            z_min: a.z_min,
        }
    }

    pub fn base_config(&self) -> BaseConfig<f64> {
        let b = &self.base;
        BaseConfig {
            track_width: b.track_width,
            wheel_radius: b.wheel_radius,
            gear_reduction: b.gear_reduction,
            v_max_lin: b.v_max_lin,
            v_max_ang: b.v_max_ang,
            a_max: b.a_max,
            d_max: b.d_max,
            alpha_max: b.alpha_max,
            lag_tau: b.lag_tau,
        }
    }

    pub fn strategy_config(&self) -> StrategyConfig<f64> {
        let mut s = StrategyConfig::for_court(self.court.net_x, self.court.width_doubles);
        s.arm = self.arm_model();
        s.lockout = self.strategy.lockout;
        s
    }

    pub fn is_lab(&self) -> bool {
        self.court.mode == CourtMode::Lab
    }
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_path(t: &mut Table, path: &str, value: f64) -> Result<(), ScenarioError> {
    let unknown = || ScenarioError::UnknownKey(path.to_string());
    let mut parts = path.split('.').peekable();
    let mut cur = t;
    while let Some(key) = parts.next() {
        if parts.peek().is_none() {
            let slot = cur.get_mut(key).ok_or_else(unknown)?;
            *slot = match slot {
                Value::Integer(_) if value.fract() == 0.0 => Value::Integer(value as i64),
                Value::Float(_) | Value::Integer(_) => Value::Float(value),
                _ => return Err(unknown()),
            };
            return Ok(());
        }
        // Array elements are addressed as `key.N`.
        if let Some(Value::Array(arr)) = cur.get_mut(key) {
            let idx: usize = parts.next().and_then(|i| i.parse().ok()).ok_or_else(unknown)?;
            if parts.peek().is_some() || idx >= arr.len() {
                return Err(unknown());
            }
            arr[idx] = Value::Float(value);
            return Ok(());
        }
        cur = match cur.get_mut(key) {
            Some(Value::Table(next)) => next,
            _ => return Err(unknown()),
        };
    }
    Err(unknown())
}

/// Reference file listing every scenario key with its default value.
pub fn defaults_reference() -> String {
    let mut out = String::new();
    out.push_str("# Scenario reference. Generated by `courtside defaults`; do not edit by hand.\n");
    out.push_str("#\n");
    out.push_str("# A scenario file may set `preset = \"<name>\"` (court, court-fast, lab,\n");
    out.push_str("# lab-human; default court) and override any key below. Units are SI:\n");
    out.push_str("# meters, seconds, radians unless a key ends in _deg.\n");
    out.push_str("#\n");
    for (key, doc) in KEY_DOCS {
        out.push_str(&format!("# {key:<28} {doc}\n"));
    }
    for name in PRESETS {
        let s = Scenario::preset(name).expect("preset exists");
        out.push_str(&format!("\n# ===== preset: {name} =====\n"));
        for line in s.to_toml_string().lines() {
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                out.push_str(&format!("# {line}\n"));
            }
        }
    }
    out.push_str("\npreset = \"court\"\n");
    out
}

const KEY_DOCS: [(&str, &str); 22] = [
    ("n_trials", "episodes per batch"),
    ("seed", "batch seed; trial seeds derive from it"),
    ("interception_plane_x", "x of the vertical plane where the robot strikes"),
    ("scheduler", "sequential | concurrent rig producers (identical results)"),
    ("court.*", "court geometry; mode RegulationCourt or Lab"),
    ("world.*", "gravity, ball and air constants, bounce coefficients"),
    ("rigs.layout", "court | lab camera placement (six rigs)"),
    ("rigs.rate", "frames per second per rig"),
    ("rigs.latency_*", "processing delay mean and uniform half-width"),
    ("rigs.noise", "sigma(D) = a D^2 + b D + c per axis"),
    ("tracker.process_noise", "white-acceleration density, m^2/s^3"),
    ("tracker.lag_horizon", "oldest capture age accepted for replay"),
    ("tracker.new_ball_gap", "capture gap that starts a new ball"),
    ("arm.<joint>", "[q_min, q_max, v_max, a_max]"),
    ("arm.face_tilt_deg", "racket face tilt above horizontal at contact"),
    ("arm.stroke_sweep", "joint excursion per stroke, centred on contact"),
    ("base.*", "differential-drive caps; lag_tau 0 = ideal tracking"),
    ("launcher.*", "launch origin, speed and aim with Gaussian jitters"),
    ("strategy.act_radius", "1-sigma intercept radius needed to commit"),
    ("strategy.hit_radius", "racket-head contact sphere radius"),
    ("strategy.racket_restitution", "normal restitution of the racket impact"),
    ("output.*", "trajectory logs, log row spacing, convergence bins"),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let s = Scenario::preset(name).unwrap();
            s.validate().unwrap();
            let text = s.to_toml_string();
            let back = Scenario::from_toml_str(&format!("preset = \"{name}\"\n{text}")).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn overrides_merge_over_preset() {
        let s = Scenario::from_toml_str("preset = \"lab\"\nn_trials = 3\n[launcher]\nmean_speed = 7.0\n").unwrap();
        assert_eq!(s.n_trials, 3);
        assert_eq!(s.launcher.mean_speed, 7.0);
        assert_eq!(s.interception_plane_x, 2.0);
        assert!(s.is_lab());
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(matches!(Scenario::from_toml_str("preset = \"moon\""), Err(ScenarioError::UnknownPreset(_))));
        assert!(matches!(Scenario::from_toml_str("[launcher]\nspin = 3.0"), Err(ScenarioError::Parse(_))));
        assert!(matches!(Scenario::from_toml_str("n_trials = 0"), Err(ScenarioError::Invalid(_))));
        assert!(matches!(Scenario::from_toml_str("interception_plane_x = 14.0"), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn param_paths() {
        let s = Scenario::preset("court").unwrap();
        assert_eq!(s.with_param("launcher.mean_speed", 9.0).unwrap().launcher.mean_speed, 9.0);
        assert_eq!(s.with_param("launcher.origin.0", 17.0).unwrap().launcher.origin[0], 17.0);
        assert_eq!(s.with_param("n_trials", 4.0).unwrap().n_trials, 4);
        assert!(s.with_param("launcher.nope", 1.0).is_err());
        assert!(s.with_param("name", 1.0).is_err());
    }

    #[test]
    fn rig_phases_stagger() {
        let rigs = Scenario::preset("court").unwrap().rig_configs();
        assert_eq!(rigs.len(), 6);
        assert!((rigs[1].phase - 1.0 / 150.0).abs() < 1e-15);
    }
}
