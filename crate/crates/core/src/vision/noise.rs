use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Distance-dependent measurement noise, `sigma(D) = a*D^2 + b*D + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Real> Default for NoiseModel<T> {
    /// Least-squares fit of the rolling-rail depth error band half-widths.
    fn default() -> Self {
        Self { a: T::lit(0.0074965), b: T::lit(-0.0337200), c: T::lit(0.0936455) }
    }
}

impl<T: Real> NoiseModel<T> {
    pub fn sigma(&self, distance: T) -> T {
        (self.a * distance + self.b) * distance + self.c
    }

    /// Smallest sigma over `[0, max_range]`.
    pub fn min_sigma(&self, max_range: T) -> T {
        let mut m = self.sigma(T::zero()).min(self.sigma(max_range));
        if self.a != T::zero() {
            let vertex = -self.b / (T::lit(2.0) * self.a);
            if vertex > T::zero() && vertex < max_range {
                m = m.min(self.sigma(vertex));
            }
        }
        m
    }

    pub fn check_positive(&self, max_range: T) -> Result<(), String> {
        let m = self.min_sigma(max_range);
        if m > T::zero() {
            Ok(())
        } else {
            Err(format!("noise sigma reaches {} within range", m.as_f64()))
        }
    }
}

/// One calibration observation: rig-to-ball distance, measured depth, true depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthSample<T> {
    pub distance: T,
    pub measured: T,
    pub truth: T,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("noise fit needs at least 3 distinct distances, got {0}")]
    Degenerate(usize),
    #[error("sample {0} is not finite")]
    NonFinite(usize),
}

/// Fits `sigma(D)` by ordinary least squares on the root-mean-square depth
/// error of each distinct distance.
pub fn fit_noise_model<T: Real>(samples: &[DepthSample<T>]) -> Result<NoiseModel<T>, FitError> {
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let (d, e) = (s.distance.as_f64(), (s.measured - s.truth).as_f64());
        if !d.is_finite() || !e.is_finite() {
            return Err(FitError::NonFinite(i));
        }
        pts.push((d, e));
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

    let mut bins: Vec<(f64, f64)> = Vec::new();
    for group in pts.chunk_by(|a, b| a.0 == b.0) {
        let mean_sq = group.iter().map(|(_, e)| e * e).sum::<f64>() / group.len() as f64;
        bins.push((group[0].0, mean_sq.sqrt()));
    }
    if bins.len() < 3 {
        return Err(FitError::Degenerate(bins.len()));
    }

    let x = DMatrix::from_fn(bins.len(), 3, |r, c| bins[r].0.powi(2 - c as i32));
    let y = DVector::from_iterator(bins.len(), bins.iter().map(|b| b.1));
    let svd = x.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= smax * 1e-12 {
        return Err(FitError::Degenerate(bins.len()));
    }
    let coef = svd.solve(&y, smax * 1e-12).map_err(|_| FitError::Degenerate(bins.len()))?;
    Ok(NoiseModel { a: T::lit(coef[0]), b: T::lit(coef[1]), c: T::lit(coef[2]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Rolling-rail depth band: (ground truth, lower edge, upper edge).
    const RAIL_BAND: [(f64, f64, f64); 16] = [
        (3.05, 2.944, 3.046),
        (3.55, 3.418, 3.544),
        (4.05, 3.925, 4.129),
        (4.55, 4.46, 4.64),
        (5.05, 5.007, 5.183),
        (5.55, 5.396, 5.82),
        (6.05, 6.002, 6.262),
        (6.55, 6.536, 6.81),
        (7.05, 7.003, 7.441),
        (7.55, 7.559, 8.115),
        (8.05, 7.962, 8.902),
        (8.55, 8.641, 9.319),
        (9.05, 9.112, 9.64),
        (9.55, 9.497, 10.369),
        (10.05, 10.24, 11.28),
        (10.55, 10.496, 11.724),
    ];

    fn half_width_samples() -> Vec<DepthSample<f64>> {
        RAIL_BAND
            .iter()
            .flat_map(|&(d, lo, hi)| {
                let hw = (hi - lo) / 2.0;
                [
                    DepthSample { distance: d, measured: d + hw, truth: d },
                    DepthSample { distance: d, measured: d - hw, truth: d },
                ]
            })
            .collect()
    }

    #[test]
    fn rail_band_fit_increases_over_range() {
        let m = fit_noise_model(&half_width_samples()).unwrap();
        let mut prev = m.sigma(3.05);
        let mut d = 3.05;
        while d < 10.55 {
            d += 0.01;
            let s = m.sigma(d);
            assert!(s > prev, "not increasing at {d}");
            prev = s;
        }
        assert!(m.sigma(3.05) > 0.0);
    }

    #[test]
    fn default_matches_rail_band_fit() {
        let m = fit_noise_model(&half_width_samples()).unwrap();
        let d = NoiseModel::<f64>::default();
        assert!((m.a - d.a).abs() < 1e-6);
        assert!((m.b - d.b).abs() < 1e-6);
        assert!((m.c - d.c).abs() < 1e-6);
        assert!(d.check_positive(20.0).is_ok());
    }

    #[test]
    fn constant_error_fits_constant() {
        let eps = 0.04;
        let samples: Vec<_> =
            (1..=8).map(|k| DepthSample { distance: k as f64, measured: k as f64 + eps, truth: k as f64 }).collect();
        let m = fit_noise_model(&samples).unwrap();
        assert!(m.a.abs() < 1e-12 && m.b.abs() < 1e-12);
        assert!((m.c - eps).abs() < 1e-12);
    }

    #[test]
    fn synthetic_round_trip() {
        let truth = NoiseModel { a: 0.01, b: 0.005, c: 0.01 };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut samples = Vec::new();
        for bin in 0..10 {
            let d = 1.0 + bin as f64 * 19.0 / 9.0;
            let normal = Normal::new(0.0, truth.sigma(d)).unwrap();
            for _ in 0..1000 {
                samples.push(DepthSample { distance: d, measured: d + normal.sample(&mut rng), truth: d });
            }
        }
        let fit = fit_noise_model(&samples).unwrap();
        let mut d = 5.0;
        while d <= 20.0 {
            let rel = (fit.sigma(d) - truth.sigma(d)).abs() / truth.sigma(d);
            assert!(rel < 0.10, "D={d}: rel err {rel}");
            d += 0.5;
        }
        assert!((fit.a - truth.a).abs() / truth.a < 0.10);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let same: Vec<_> =
            (0..50).map(|i| DepthSample { distance: 4.0, measured: 4.0 + i as f64 * 1e-3, truth: 4.0 }).collect();
        assert_eq!(fit_noise_model(&same), Err(FitError::Degenerate(1)));
        let two = [
            DepthSample { distance: 1.0, measured: 1.1, truth: 1.0 },
            DepthSample { distance: 2.0, measured: 2.1, truth: 2.0 },
        ];
        assert_eq!(fit_noise_model(&two), Err(FitError::Degenerate(2)));
        let bad = [DepthSample { distance: f64::NAN, measured: 1.0, truth: 1.0 }];
        assert_eq!(fit_noise_model(&bad), Err(FitError::NonFinite(0)));
    }

    #[test]
    fn min_sigma_checks_vertex() {
        let m = NoiseModel { a: 0.01, b: -0.2, c: 0.5 };
        // Vertex at 10 m, where sigma is -0.5.
        assert!(m.check_positive(20.0).is_err());
        assert!(m.check_positive(2.0).is_ok());
    }
}
