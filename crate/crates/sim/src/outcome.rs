//! Classification of a returned ball.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use courtside_core::court::{in_singles_bounds, CourtGeometry, CourtMode};
use courtside_core::dynamics::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Miss,
    UnsuccessfulHit,
    SuccessfulHit,
}

impl Outcome {
    pub fn is_hit(self) -> bool {
        self != Outcome::Miss
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::Miss => "miss",
            Outcome::UnsuccessfulHit => "unsuccessful_hit",
            Outcome::SuccessfulHit => "successful_hit",
        }
    }
}

/// Height at the first increasing crossing of `x = plane`, linearly
/// interpolated between samples, if it happens before the first bounce.
pub fn crossing_height(ret: &Trajectory<f64>, plane: f64) -> Option<f64> {
    let first_bounce = ret.events.first().map_or(f64::INFINITY, |e| e.t);
    ret.samples.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        if a.p.x < plane && b.p.x >= plane && b.t <= first_bounce {
            let f = (plane - a.p.x) / (b.p.x - a.p.x);
            Some(a.p.z + f * (b.p.z - a.p.z))
        } else {
            None
        }
    })
}

/// `ret` is the flight after racket contact, run at least to its first floor
/// contact. On a court the ball must clear the net and first land inside
/// the far singles box; in the lab it must cross `launch_x` above net height.
pub fn classify_outcome(ret: Option<&Trajectory<f64>>, court: &CourtGeometry<f64>, launch_x: f64) -> Outcome {
    let Some(ret) = ret else { return Outcome::Miss };
    let ok = match court.mode {
        CourtMode::Lab => crossing_height(ret, launch_x).is_some_and(|z| z > court.net_height),
        CourtMode::RegulationCourt => {
            let clears = crossing_height(ret, court.net_x).is_some_and(|z| z > court.net_height);
            let landing = ret.events.first().map(|e| e.p);
            clears
                && landing.is_some_and(|p| {
                    p.x > court.net_x && in_singles_bounds(&Vector2::new(p.x, p.y), court).unwrap_or(false)
                })
        }
    };
    if ok {
        Outcome::SuccessfulHit
    } else {
        Outcome::UnsuccessfulHit
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use courtside_core::court::{make_lab_court, make_regulation_court, BallState};
    use courtside_core::dynamics::BounceEvent;
    use nalgebra::Vector3;

    /// Straight-line flight from `p0` to `p1` with a bounce at `p1`.
    fn line(p0: [f64; 3], p1: [f64; 3]) -> Trajectory<f64> {
        let (a, b) = (Vector3::from(p0), Vector3::from(p1));
        let n = 200;
        let samples = (0..=n)
            .map(|k| {
                let f = k as f64 / n as f64;
                BallState::new(f, a + (b - a) * f, b - a)
            })
            .collect();
        let events = vec![BounceEvent { t: 1.0, p: b, v_in: b - a, v_out: b - a }];
        Trajectory { dt: 1.0 / n as f64, samples, events }
    }

    #[test]
    fn miss_without_hit() {
        assert_eq!(classify_outcome(None, &make_regulation_court(), 16.0), Outcome::Miss);
    }

    #[test]
    fn into_the_net() {
        let t = line([8.0, 0.0, 1.0], [12.885, 0.0, 0.0]);
        assert_eq!(classify_outcome(Some(&t), &make_regulation_court(), 16.0), Outcome::UnsuccessfulHit);
    }

    #[test]
    fn beyond_far_baseline() {
        let t = line([8.0, 0.0, 2.0], [24.5, 0.0, 0.0]);
        assert_eq!(classify_outcome(Some(&t), &make_regulation_court(), 16.0), Outcome::UnsuccessfulHit);
    }

    #[test]
    fn wide_of_singles() {
        let t = line([8.0, 0.0, 2.0], [18.0, 4.3, 0.0]);
        assert_eq!(classify_outcome(Some(&t), &make_regulation_court(), 16.0), Outcome::UnsuccessfulHit);
    }

    #[test]
    fn just_over_the_net_landing_mid_court() {
        // Passes x = 11.885 at 1.08 m.
        let net = 11.885;
        let z0 = 1.08 + (net - 8.0) * (1.08 / (18.0 - net));
        let t = line([8.0, 0.0, z0], [18.0, 0.0, 0.0]);
        assert!((crossing_height(&t, net).unwrap() - 1.08).abs() < 1e-9);
        assert_eq!(classify_outcome(Some(&t), &make_regulation_court(), 16.0), Outcome::SuccessfulHit);
    }

    #[test]
    fn lab_launch_plane_height() {
        let lab = make_lab_court();
        let high = line([2.0, 0.0, 1.2], [10.0, 0.0, 1.1]);
        assert_eq!(classify_outcome(Some(&high), &lab, 9.5), Outcome::SuccessfulHit);
        let low = line([2.0, 0.0, 1.0], [10.0, 0.0, 0.0]);
        assert_eq!(classify_outcome(Some(&low), &lab, 9.5), Outcome::UnsuccessfulHit);
    }
}
