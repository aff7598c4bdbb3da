//! Attractor and repeller point clouds, box-counting dimension, and
//! separation and invariance diagnostics.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, circ_dist, ClassTag, Matrix2, ProjPoint};
use crate::semigroup::{self, word_count, SystemConfig};

/// Points closer than this are merged.
pub const DEDUP_TOL: f64 = 1e-12;
/// Orbit samples per RNG stream.
pub const BATCH: usize = 1024;
/// Letters drawn before an orbit sample is abandoned.
pub const ITER_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CloudMethod {
    FixedPoints,
    Orbit,
}

impl fmt::Display for CloudMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CloudMethod::FixedPoints => "fixed-points",
            CloudMethod::Orbit => "orbit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<ProjPoint>,
    pub method: CloudMethod,
    pub depth_or_samples: usize,
    /// Elliptic words met while building a fixed-point cloud.
    pub elliptic_words: u64,
    /// Orbit samples abandoned at the iteration cap.
    pub dropped: usize,
}

impl PointCloud {
    /// Sorts and merges points within [`DEDUP_TOL`], including across the
    /// wrap at π.
    pub fn from_thetas(mut thetas: Vec<f64>, method: CloudMethod, depth_or_samples: usize) -> Self {
        thetas.sort_by(f64::total_cmp);
        thetas.dedup_by(|a, b| (*a - *b).abs() <= DEDUP_TOL);
        if thetas.len() > 1 && circ_dist(thetas[0], *thetas.last().unwrap()) <= DEDUP_TOL {
            thetas.remove(0);
        }
        PointCloud {
            points: thetas.into_iter().map(ProjPoint::new).collect(),
            method,
            depth_or_samples,
            elliptic_words: 0,
            dropped: 0,
        }
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.theta()).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distance from `theta` to the nearest cloud point.
    pub fn dist_to(&self, theta: f64) -> f64 {
        nearest(&self.thetas_sorted(), theta)
    }

    fn thetas_sorted(&self) -> Vec<f64> {
        self.thetas()
    }
}

/// Distance from `x` to the nearest element of the sorted slice, on the circle.
pub fn nearest(sorted: &[f64], x: f64) -> f64 {
    if sorted.is_empty() {
        return f64::INFINITY;
    }
    let x = x.rem_euclid(PI);
    let i = sorted.partition_point(|&v| v < x);
    let n = sorted.len();
    let a = sorted[i % n];
    let b = sorted[(i + n - 1) % n];
    circ_dist(a, x).min(circ_dist(b, x))
}

/// Symmetric Hausdorff distance between two point sets on the circle.
pub fn hausdorff(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let one = a
        .par_iter()
        .map(|&x| nearest(&sb, x))
        .reduce(|| 0.0, f64::max);
    let two = b
        .par_iter()
        .map(|&x| nearest(&sa, x))
        .reduce(|| 0.0, f64::max);
    one.max(two)
}

/// Attracting points of hyperbolic products and fixed points of parabolic
/// products over all words of length 1..=depth.
pub fn attractor_points_fixedpoint(cfg: &SystemConfig, depth: usize) -> Result<PointCloud> {
    let total: u64 = (1..=depth)
        .map(|n| word_count(cfg.len(), n))
        .fold(0, u64::saturating_add);
    cfg.check_budget(depth, total)?;
    let k = cfg.len();
    let p = semigroup::partition_depth(k, depth);
    let collect = |w: &[usize], m: &Matrix2, pts: &mut Vec<f64>, ell: &mut u64| match cfg
        .classify_word(w, m)
    {
        ClassTag::Hyperbolic | ClassTag::Parabolic => {
            if let Some(x) = geometry::attracting_or_parabolic(m) {
                pts.push(x.theta());
            }
        }
        ClassTag::Elliptic => *ell += 1,
        ClassTag::Identity => {}
    };
    let mut pts = Vec::new();
    let mut elliptic = 0u64;
    if p > 1 {
        semigroup::visit_tree(&cfg.alphabet, p - 1, |w, m| {
            collect(w, m, &mut pts, &mut elliptic)
        });
    }
    let parts = semigroup::map_partitions(&cfg.alphabet, depth, |pre, pm, rem| {
        let mut local = Vec::new();
        let mut ell = 0u64;
        collect(pre, &pm, &mut local, &mut ell);
        let mut word = pre.to_vec();
        semigroup::visit_tree(&cfg.alphabet, rem, |w, m| {
            word.truncate(pre.len());
            word.extend_from_slice(w);
            collect(&word, &(pm * *m), &mut local, &mut ell);
        });
        (local, ell)
    });
    for (local, ell) in parts {
        pts.extend(local);
        elliptic += ell;
    }
    let mut cloud = PointCloud::from_thetas(pts, CloudMethod::FixedPoints, depth);
    cloud.elliptic_words = elliptic;
    Ok(cloud)
}

pub fn repeller_points(cfg: &SystemConfig, depth: usize) -> Result<PointCloud> {
    attractor_points_fixedpoint(&cfg.inverted(), depth)
}

fn cayley(z: Complex64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    (z - i) / (z + i)
}

fn mobius(m: &Matrix2, z: Complex64) -> Complex64 {
    (z * m.a + m.b) / (z * m.c + m.d)
}

/// Follows `f_{A_{i1}} ∘ ⋯ ∘ f_{A_{in}}` applied to three reference points
/// until their images, seen in the Cayley disk, have diameter below `tol`.
/// Returns the limit direction, or `None` at the iteration cap.
pub fn orbit_limit(
    alphabet: &[Matrix2],
    mut next_letter: impl FnMut() -> usize,
    tol: f64,
) -> Option<ProjPoint> {
    let refs = [
        Complex64::new(0.0, 1.0),
        Complex64::new(1.0, 1.0),
        Complex64::new(-1.0, 1.0),
    ];
    let mut f = Matrix2::IDENTITY;
    for _ in 0..ITER_CAP {
        f = f * alphabet[next_letter()];
        let w = refs.map(|z| cayley(mobius(&f, z)));
        let diam = (w[0] - w[1])
            .norm()
            .max((w[0] - w[2]).norm())
            .max((w[1] - w[2]).norm());
        if diam < tol {
            return Some(ProjPoint::new(-w[0].arg() / 2.0));
        }
        if !diam.is_finite() {
            return None;
        }
    }
    None
}

/// RNG for batch `b` of a run seeded with `seed`.
pub fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    rng
}

/// Batches run together between checks of the drop count.
pub const WAVE: usize = 8;

/// Orbit limits for `n` i.i.d. letter sequences, in sample order. Letters
/// follow `probs` when given, else the uniform distribution. With
/// `max_dropped`, sampling stops after the first wave of batches that
/// pushes the drop count past it, and the partial result is returned.
pub fn orbit_samples(
    alphabet: &[Matrix2],
    probs: Option<&[f64]>,
    n: usize,
    tol: f64,
    seed: u64,
    max_dropped: Option<usize>,
) -> (Vec<Option<ProjPoint>>, usize) {
    let k = alphabet.len();
    let batches = n.div_ceil(BATCH);
    let dist = probs.map(|p| WeightedIndex::new(p).expect("validated probabilities"));
    let mut flat: Vec<Option<ProjPoint>> = Vec::with_capacity(n);
    let mut dropped = 0;
    for wave in (0..batches).step_by(WAVE) {
        let out: Vec<Vec<Option<ProjPoint>>> = (wave..batches.min(wave + WAVE))
            .into_par_iter()
            .map(|b| {
                let mut rng = batch_rng(seed, b);
                let count = BATCH.min(n - b * BATCH);
                (0..count)
                    .map(|_| match &dist {
                        Some(d) => orbit_limit(alphabet, || d.sample(&mut rng), tol),
                        None => orbit_limit(alphabet, || rng.gen_range(0..k), tol),
                    })
                    .collect()
            })
            .collect();
        for p in out.into_iter().flatten() {
            dropped += usize::from(p.is_none());
            flat.push(p);
        }
        if max_dropped.is_some_and(|m| dropped > m) {
            break;
        }
    }
    (flat, dropped)
}

pub fn attractor_points_orbit(
    cfg: &SystemConfig,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<PointCloud> {
    if !(tol > 0.0) {
        return Err(Error::Usage(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let (samples, dropped) = orbit_samples(
        &cfg.alphabet,
        cfg.probs.as_deref(),
        n_samples,
        tol,
        seed,
        None,
    );
    let mut cloud = PointCloud::from_thetas(
        samples.into_iter().flatten().map(|p| p.theta()).collect(),
        CloudMethod::Orbit,
        n_samples,
    );
    cloud.dropped = dropped;
    Ok(cloud)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Every probed `(ε, N(ε))`.
    pub scales: Vec<(f64, usize)>,
    pub fit_range: (f64, f64),
    pub method: String,
}

/// Geometric scales from 0.1 down to `eps_min`.
pub fn geometric_scales(eps_max: f64, eps_min: f64, count: usize) -> Vec<f64> {
    let r = (eps_min / eps_max).ln() / (count - 1) as f64;
    (0..count).map(|i| eps_max * (r * i as f64).exp()).collect()
}

/// Default scales: 0.1 down to 1e−5 in 21 steps.
pub fn default_scales() -> Vec<f64> {
    geometric_scales(1e-1, 1e-5, 21)
}

/// Occupied bins of width ε on `(0, π]`, bins aligned at 0, a point on a bin
/// boundary counted in the lower bin.
pub fn box_count(sorted: &[f64], eps: f64) -> usize {
    let nbins = (PI / eps).ceil() as i64;
    let mut count = 0;
    let mut last = -1i64;
    for &t in sorted {
        let idx = ((t / eps).ceil() as i64 - 1).clamp(0, nbins - 1);
        if idx != last {
            count += 1;
            last = idx;
        }
    }
    count
}

pub fn box_dimension(cloud: &PointCloud, scales: &[f64]) -> Result<DimensionEstimate> {
    let mut t = cloud.thetas();
    t.sort_by(f64::total_cmp);
    let method = "box-counting".to_string();
    if t.len() <= 1 {
        return Ok(DimensionEstimate {
            value: 0.0,
            stderr: 0.0,
            scales: Vec::new(),
            fit_range: (0.0, 0.0),
            method,
        });
    }
    let (lo, hi) = scales
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
    if scales.len() < 4 || hi / lo < 100.0 {
        return Err(Error::TooFewScales(format!(
            "need at least 4 scales over 2 decades, got {} over {:.2} decades",
            scales.len(),
            (hi / lo).log10()
        )));
    }
    let counted: Vec<(f64, usize)> = scales.iter().map(|&e| (e, box_count(&t, e))).collect();
    let used: Vec<(f64, usize)> = counted
        .iter()
        .copied()
        .filter(|&(e, n)| {
            let nbins = (PI / e).ceil() as usize;
            let sat = nbins.min(t.len()) as f64;
            n >= 10 && (n as f64) < 0.95 * sat
        })
        .collect();
    if used.len() < 4 {
        return Err(Error::TooFewScales(format!(
            "only {} of {} scales are neither saturated nor sparse",
            used.len(),
            scales.len()
        )));
    }
    let xs: Vec<f64> = used.iter().map(|(e, _)| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|(_, n)| (*n as f64).ln()).collect();
    let (slope, icpt) = semigroup::least_squares(&xs, &ys).expect("distinct scales");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - icpt).powi(2))
        .sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    let fit_lo = used.iter().map(|u| u.0).fold(f64::INFINITY, f64::min);
    let fit_hi = used.iter().map(|u| u.0).fold(0.0, f64::max);
    Ok(DimensionEstimate {
        value: slope.clamp(0.0, 1.0),
        stderr,
        scales: counted,
        fit_range: (fit_lo, fit_hi),
        method,
    })
}

/// Relative change in a box count between consecutive depths below which
/// the count is treated as converged.
pub const CONVERGENCE_TOL: f64 = 0.05;

/// The longest run of scales, starting from the coarsest, at which the box
/// counts of `shallow` and `deep` agree to within `CONVERGENCE_TOL`.
/// Scales where even the deeper cloud is still filling in would bias the
/// slope downwards.
pub fn converged_scales(shallow: &PointCloud, deep: &PointCloud, scales: &[f64]) -> Vec<f64> {
    let mut a = shallow.thetas();
    let mut b = deep.thetas();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let mut sorted = scales.to_vec();
    sorted.sort_by(|x, y| y.total_cmp(x));
    sorted
        .into_iter()
        .skip_while(|&e| box_count(&b, e) < 10)
        .take_while(|&e| {
            let (na, nb) = (box_count(&a, e) as f64, box_count(&b, e) as f64);
            (nb - na).abs() <= CONVERGENCE_TOL * nb
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Separation {
    Disjoint { gap: f64 },
    Intersecting { k: f64, r: f64, distance: f64 },
}

pub fn separation_report(k: &PointCloud, r: &PointCloud, eps: f64) -> Separation {
    let rs = r.thetas();
    let (mut best, mut pair) = (f64::INFINITY, (f64::NAN, f64::NAN));
    for &x in &k.thetas() {
        let d = nearest(&rs, x);
        if d < best {
            best = d;
            let y = rs
                .iter()
                .copied()
                .min_by(|a, b| circ_dist(*a, x).total_cmp(&circ_dist(*b, x)))
                .unwrap_or(f64::NAN);
            pair = (x, y);
        }
    }
    if best > eps {
        Separation::Disjoint { gap: best }
    } else {
        Separation::Intersecting {
            k: pair.0,
            r: pair.1,
            distance: best,
        }
    }
}

/// Hausdorff distance between `K` and `⋃ φ_i(K)`.
pub fn invariance_residual(cfg: &SystemConfig, k: &PointCloud) -> f64 {
    let pts = k.thetas();
    let images: Vec<f64> = cfg
        .alphabet
        .iter()
        .flat_map(|m| {
            pts.iter()
                .map(move |&t| geometry::proj_act(m, ProjPoint::new(t)).theta())
        })
        .collect();
    hausdorff(&pts, &images)
}
