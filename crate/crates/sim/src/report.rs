//! Side-by-side table of published field results and simulated metrics.

use crate::batch::Metrics;

/// Published field results for one launch condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub preset: &'static str,
    pub label: &'static str,
    pub distance: f64,
    pub speed: f64,
    pub y_iqr: f64,
    pub y_std: f64,
    pub hit_rate: f64,
    pub success_rate: f64,
}

pub const REFERENCES: [Reference; 4] = [
    Reference {
        preset: "court",
        label: "Court (launcher)",
        distance: 7.9,
        speed: 8.01,
        y_iqr: 0.31,
        y_std: 0.23,
        hit_rate: 0.73,
        success_rate: 0.66,
    },
    Reference {
        preset: "court-fast",
        label: "Court (launcher)",
        distance: 12.8,
        speed: 12.64,
        y_iqr: 0.26,
        y_std: 0.29,
        hit_rate: 0.60,
        success_rate: 0.53,
    },
    Reference {
        preset: "lab",
        label: "Lab (launcher)",
        distance: 7.5,
        speed: 6.79,
        y_iqr: 0.28,
        y_std: 0.20,
        hit_rate: 0.93,
        success_rate: 0.80,
    },
    Reference {
        preset: "lab-human",
        label: "Lab (human)",
        distance: 7.5,
        speed: 6.56,
        y_iqr: 0.54,
        y_std: 0.52,
        hit_rate: 0.40,
        success_rate: 0.33,
    },
];

pub fn reference_for(name: &str) -> Option<&'static Reference> {
    REFERENCES.iter().find(|r| r.preset == name)
}

fn pair(published: Option<f64>, sim: f64, pct: bool) -> String {
    let f = |v: f64| if pct { format!("{:.0}%", v * 100.0) } else { format!("{v:.2}") };
    let p = published.map(f).unwrap_or_else(|| "-".into());
    let s = if sim.is_finite() { f(sim) } else { "-".into() };
    format!("{p:>6} / {s:<6}")
}

/// One row per batch; every quantity is shown as `published / simulated`.
pub fn report_table(batches: &[&Metrics]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>6} {:>16} {:>16} {:>16} {:>16} {:>16} {:>6}\n",
        "scenario", "dist", "speed m/s", "y IQR m", "y std m", "hit rate", "success rate", "trials"
    ));
    for m in batches {
        let r = reference_for(&m.scenario);
        out.push_str(&format!(
            "{:<12} {:>6} {:>16} {:>16} {:>16} {:>16} {:>16} {:>6}\n",
            m.scenario,
            r.map_or("-".into(), |r| format!("{:.1}", r.distance)),
            pair(r.map(|r| r.speed), m.mean_launch_speed, false),
            pair(r.map(|r| r.y_iqr), m.intercept_y_iqr, false),
            pair(r.map(|r| r.y_std), m.intercept_y_std, false),
            pair(r.map(|r| r.hit_rate), m.hit_rate, true),
            pair(r.map(|r| r.success_rate), m.success_rate, true),
            m.n_trials,
        ));
    }
    out.push_str("(values are published / simulated)\n");
    out
}
