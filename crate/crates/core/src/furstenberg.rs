//! Sampling the stationary measure of the projective random walk and
//! comparing its support with the attractor.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::attractor::{self, CloudMethod, DimensionEstimate, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::{self, ProjPoint};
use crate::semigroup::{self, SystemConfig};
use crate::spectral::Bracket;

/// Arcs used for the empirical stationarity check.
pub const RESIDUAL_BINS: usize = 64;
/// Largest tolerated share of orbit samples that fail to converge.
pub const MAX_DROP_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSample {
    /// Converged samples in draw order.
    pub points: Vec<ProjPoint>,
    pub seed: u64,
    pub tol: f64,
    pub dropped: usize,
}

impl MeasureSample {
    pub fn thetas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.theta()).collect()
    }

    pub fn cloud(&self) -> PointCloud {
        PointCloud::from_thetas(self.thetas(), CloudMethod::Orbit, self.points.len())
    }
}

pub fn sample_stationary(
    cfg: &SystemConfig,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<MeasureSample> {
    let probs = cfg
        .probs
        .as_deref()
        .ok_or_else(|| Error::BadProbs("a probability vector is required".into()))?;
    if probs.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::BadProbs("every probability must be positive".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Usage(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let limit = (MAX_DROP_RATE * n_samples as f64).floor() as usize;
    let (samples, dropped) = attractor::orbit_samples(
        &cfg.alphabet,
        Some(probs),
        n_samples,
        tol,
        seed,
        Some(limit),
    );
    if dropped > limit {
        return Err(Error::NonConvergence {
            dropped,
            total: samples.len(),
        });
    }
    Ok(MeasureSample {
        points: samples.into_iter().flatten().collect(),
        seed,
        tol,
        dropped,
    })
}

fn bin(theta: f64) -> usize {
    let w = PI / RESIDUAL_BINS as f64;
    ((theta / w).ceil() as usize).clamp(1, RESIDUAL_BINS) - 1
}

/// `max_E |ν̂(E) − Σ pᵢ ν̂(φᵢ⁻¹E)|` over 64 equal arcs `E`.
pub fn stationarity_residual(sample: &MeasureSample, cfg: &SystemConfig) -> f64 {
    let n = sample.points.len();
    if n == 0 {
        return 0.0;
    }
    let uniform = vec![1.0 / cfg.len() as f64; cfg.len()];
    let probs = cfg.probs.as_deref().unwrap_or(&uniform);
    let mut direct = [0.0f64; RESIDUAL_BINS];
    let mut pulled = [0.0f64; RESIDUAL_BINS];
    for &x in &sample.points {
        direct[bin(x.theta())] += 1.0;
        for (m, &p) in cfg.alphabet.iter().zip(probs) {
            pulled[bin(geometry::proj_act(m, x).theta())] += p;
        }
    }
    direct
        .iter()
        .zip(&pulled)
        .map(|(a, b)| (a - b).abs() / n as f64)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    /// Hausdorff distance between the sample and the attractor cloud.
    pub hausdorff: f64,
    /// Largest distance from a sample point to the attractor cloud.
    pub containment: f64,
    /// `None` when too few scales are usable.
    pub sample_dimension: Option<DimensionEstimate>,
    pub attractor_dimension: Option<DimensionEstimate>,
    pub delta: Option<Bracket>,
    /// `min{1, δ}` at the bracket midpoint, when a bracket is given.
    pub predicted: Option<f64>,
    pub hypotheses_met: bool,
    pub annotations: Vec<String>,
}

pub fn support_dimension_report(
    cfg: &SystemConfig,
    sample: &MeasureSample,
    cloud: &PointCloud,
    delta: Option<Bracket>,
) -> Result<SupportReport> {
    let s = sample.thetas();
    let k = {
        let mut t = cloud.thetas();
        t.sort_by(f64::total_cmp);
        t
    };
    let containment = s
        .iter()
        .map(|&x| attractor::nearest(&k, x))
        .fold(0.0, f64::max);
    let scales = attractor::default_scales();
    let mut annotations = Vec::new();
    let hypotheses_met = semigroup::common_fixed_point(cfg).is_none();
    if !hypotheses_met {
        annotations.push("hypotheses unmet: system is reducible".to_string());
    }
    let mut fit = |what: &str, c: &PointCloud| match attractor::box_dimension(c, &scales) {
        Ok(e) => Ok(Some(e)),
        Err(Error::TooFewScales(why)) => {
            annotations.push(format!("no {what} dimension: {why}"));
            Ok(None)
        }
        Err(e) => Err(e),
    };
    let sample_dimension = fit("sample", &sample.cloud())?;
    let attractor_dimension = fit("attractor", cloud)?;
    Ok(SupportReport {
        hausdorff: attractor::hausdorff(&s, &k),
        containment,
        sample_dimension,
        attractor_dimension,
        predicted: delta.as_ref().map(|b| b.midpoint().min(1.0)),
        delta,
        hypotheses_met,
        annotations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Matrix2;

    fn m(a: f64, b: f64, c: f64, d: f64) -> Matrix2 {
        Matrix2::new(a, b, c, d).unwrap()
    }

    fn parabolic_repeller() -> SystemConfig {
        SystemConfig::new(vec![Matrix2::diag(0.5), m(1.0, 1.0, 0.0, 1.0)])
            .unwrap()
            .with_probs(vec![0.5, 0.5])
            .unwrap()
    }

    #[test]
    fn point_mass() {
        let cfg = SystemConfig::new(vec![Matrix2::diag(2.0)])
            .unwrap()
            .with_probs(vec![1.0])
            .unwrap();
        let s = sample_stationary(&cfg, 200, 1e-8, 3).unwrap();
        assert!(s
            .points
            .iter()
            .all(|p| geometry::circ_dist(p.theta(), PI) < 1e-7));
        assert_eq!(stationarity_residual(&s, &cfg), 0.0);
        let k = attractor::attractor_points_fixedpoint(&cfg, 6).unwrap();
        let r = support_dimension_report(&cfg, &s, &k, None).unwrap();
        assert_eq!(r.sample_dimension.unwrap().value, 0.0);
        assert_eq!(r.attractor_dimension.unwrap().value, 0.0);
        assert!(!r.hypotheses_met);
    }

    #[test]
    fn requires_probabilities() {
        let cfg = SystemConfig::new(vec![Matrix2::diag(2.0)]).unwrap();
        assert!(matches!(
            sample_stationary(&cfg, 10, 1e-8, 0),
            Err(Error::BadProbs(_))
        ));
    }

    #[test]
    fn parabolic_repeller_support_and_stationarity() {
        let cfg = parabolic_repeller();
        let s = sample_stationary(&cfg, 100_000, 1e-8, 11).unwrap();
        // Every sample lies in ψ⁻¹[0, ∞] = (0, π/2] ∪ {π}.
        assert!(s
            .points
            .iter()
            .all(|p| p.theta() <= PI / 2.0 + 1e-9 || geometry::circ_dist(p.theta(), PI) < 1e-6));
        let clean = stationarity_residual(&s, &cfg);
        assert!(clean < 0.02, "{clean}");

        let mut noisy = s.clone();
        for (i, p) in noisy.points.iter_mut().enumerate().take(20_000) {
            *p = ProjPoint::new((i as f64 + 0.5) * PI / 20_000.0);
        }
        assert!(stationarity_residual(&noisy, &cfg) > clean);
    }

    #[test]
    fn seeds_are_reproducible() {
        let cfg = parabolic_repeller();
        let a = sample_stationary(&cfg, 3000, 1e-8, 5).unwrap();
        let b = sample_stationary(&cfg, 3000, 1e-8, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn positive_pair_support_matches_attractor() {
        let cfg = SystemConfig::new(vec![m(2.0, 1.0, 1.0, 1.0), m(1.0, 1.0, 1.0, 2.0)]).unwrap();
        let k = attractor::attractor_points_fixedpoint(&cfg, 14).unwrap();
        for probs in [vec![0.5, 0.5], vec![0.9, 0.1]] {
            let c = cfg.clone().with_probs(probs).unwrap();
            let s = sample_stationary(&c, 100_000, 1e-8, 2).unwrap();
            let r = support_dimension_report(&c, &s, &k, None).unwrap();
            assert!(r.containment < 1e-3, "{}", r.containment);
            assert!(r.hausdorff < 0.02, "{}", r.hausdorff);
            assert!(r.hypotheses_met);
        }
    }
}
