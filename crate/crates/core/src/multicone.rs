//! Multicones on RP¹, invariant-multicone search, hyperbolicity certificates
//! and the almost-multiplicativity constant.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, circ_dist, ClassTag, Matrix2, NormKind, ProjPoint};
use crate::semigroup::{self, word_count, DiscretenessProfile, SystemConfig, Word};

/// Arcs closer than this are merged.
pub const MERGE_TOL: f64 = 1e-9;
/// Clearance above which containment counts as compact. Endpoint transport
/// is accurate to a few ulps, so anything larger is a genuine gap.
pub const COMPACT_TOL: f64 = 1e-12;

/// Open arc `(start, start + len)` on the circle of circumference π.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub len: f64,
}

impl Arc {
    pub fn new(start: f64, len: f64) -> Self {
        Arc {
            start: start.rem_euclid(PI),
            len,
        }
    }

    /// Arc from `a` counter-clockwise to `b`.
    pub fn between(a: f64, b: f64) -> Self {
        Arc::new(a, (b - a).rem_euclid(PI))
    }

    pub fn around(center: f64, radius: f64) -> Self {
        Arc::new(center - radius, 2.0 * radius)
    }

    pub fn end(&self) -> f64 {
        self.start + self.len
    }

    pub fn mid(&self) -> f64 {
        (self.start + self.len / 2.0).rem_euclid(PI)
    }

    /// Counter-clockwise offset of `theta` from the start, in `[0, π)`.
    pub fn offset(&self, theta: f64) -> f64 {
        (theta - self.start).rem_euclid(PI)
    }

    pub fn contains(&self, theta: f64) -> bool {
        let o = self.offset(theta);
        o > 0.0 && o < self.len
    }

    pub fn contains_closed(&self, theta: f64) -> bool {
        let o = self.offset(theta);
        o <= self.len || PI - o <= 1e-15
    }

    /// Signed clearance of the closed arc `inner` inside this open arc:
    /// positive means compactly inside, by that margin.
    pub fn clearance_of(&self, inner: &Arc) -> f64 {
        let s = (inner.start - self.start + PI / 2.0).rem_euclid(PI) - PI / 2.0;
        s.min(self.len - s - inner.len)
    }

    pub fn fatten(&self, r: f64) -> Arc {
        Arc::new(self.start - r, (self.len + 2.0 * r).min(PI))
    }

    /// Distance on the circle from a point to the closed arc.
    pub fn dist_to(&self, theta: f64) -> f64 {
        if self.contains_closed(theta) {
            0.0
        } else {
            circ_dist(theta, self.start).min(circ_dist(theta, self.end()))
        }
    }

    pub fn dist_to_arc(&self, other: &Arc) -> f64 {
        if self.contains_closed(other.start) || other.contains_closed(self.start) {
            return 0.0;
        }
        self.dist_to(other.start).min(self.dist_to(other.end()))
    }
}

/// Image of an arc under the projective action of `m`.
pub fn image_arc(m: &Matrix2, arc: &Arc) -> Arc {
    let a = geometry::proj_act(m, ProjPoint::new(arc.start)).theta();
    let b = geometry::proj_act(m, ProjPoint::new(arc.end())).theta();
    let mut len = (b - a).rem_euclid(PI);
    if arc.len > 0.0 {
        // Orientation-preserving maps send the midpoint inside the image arc;
        // a near-π image can wrap numerically, which this catches.
        let mid = geometry::proj_act(m, ProjPoint::new(arc.start + arc.len / 2.0)).theta();
        let o = (mid - a).rem_euclid(PI);
        if o > len {
            len = PI;
        }
    }
    Arc::new(a, len)
}

/// Finite union of open arcs with disjoint closures, sorted by start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multicone {
    arcs: Vec<Arc>,
}

impl Multicone {
    /// Merges arcs whose closures come within `tol`. Returns `None` when the
    /// union covers the whole circle.
    pub fn from_arcs(arcs: impl IntoIterator<Item = Arc>, tol: f64) -> Option<Multicone> {
        let mut v: Vec<Arc> = arcs.into_iter().filter(|a| a.len > 0.0).collect();
        if v.is_empty() {
            return Some(Multicone { arcs: v });
        }
        if v.iter().any(|a| a.len >= PI - tol) {
            return None;
        }
        v.sort_by(|a, b| a.start.total_cmp(&b.start));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for a in v {
            match merged.last_mut() {
                Some(last) if a.start <= last.1 + tol => last.1 = last.1.max(a.end()),
                _ => merged.push((a.start, a.end())),
            }
        }
        while merged.len() > 1 {
            let first = merged[0];
            let last = *merged.last().unwrap();
            if last.1 - PI >= first.0 - tol {
                let end = last.1.max(first.1 + PI);
                merged.last_mut().unwrap().1 = end;
                merged.remove(0);
            } else {
                break;
            }
        }
        if merged.len() == 1 && merged[0].1 - merged[0].0 >= PI - tol {
            return None;
        }
        let total: f64 = merged.iter().map(|(s, e)| e - s).sum();
        if total >= PI - tol {
            return None;
        }
        let mut arcs: Vec<Arc> = merged
            .into_iter()
            .map(|(s, e)| Arc::new(s, e - s))
            .collect();
        arcs.sort_by(|a, b| a.start.total_cmp(&b.start));
        Some(Multicone { arcs })
    }

    pub fn single(arc: Arc) -> Multicone {
        Multicone { arcs: vec![arc] }
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn total_length(&self) -> f64 {
        self.arcs.iter().map(|a| a.len).sum()
    }

    pub fn longest(&self) -> f64 {
        self.arcs.iter().map(|a| a.len).fold(0.0, f64::max)
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.arcs.iter().any(|a| a.contains(theta))
    }

    pub fn dist_to(&self, theta: f64) -> f64 {
        self.arcs
            .iter()
            .map(|a| a.dist_to(theta))
            .fold(f64::INFINITY, f64::min)
    }

    /// Open complement of the closure: the gaps between consecutive arcs.
    pub fn complement(&self) -> Multicone {
        let n = self.arcs.len();
        let mut gaps = Vec::with_capacity(n);
        for i in 0..n {
            let a = self.arcs[i];
            let b = self.arcs[(i + 1) % n];
            let len = (b.start - a.end()).rem_euclid(PI);
            if len > 0.0 {
                gaps.push(Arc::new(a.end(), len));
            }
        }
        gaps.sort_by(|a, b| a.start.total_cmp(&b.start));
        Multicone { arcs: gaps }
    }

    pub fn fatten(&self, r: f64) -> Option<Multicone> {
        Multicone::from_arcs(self.arcs.iter().map(|a| a.fatten(r)), MERGE_TOL)
    }

    /// Best signed clearance of the closed arc inside some component. Only
    /// the components on either side of `inner.start` can contain it.
    pub fn clearance_of(&self, inner: &Arc) -> f64 {
        let n = self.arcs.len();
        if n == 0 {
            return f64::NEG_INFINITY;
        }
        let i = self.arcs.partition_point(|a| a.start <= inner.start);
        let before = self.arcs[(i + n - 1) % n].clearance_of(inner);
        let after = self.arcs[i % n].clearance_of(inner);
        before.max(after)
    }

    /// Images of every component under every matrix.
    pub fn images(&self, maps: &[Matrix2]) -> Vec<Arc> {
        maps.iter()
            .flat_map(|m| self.arcs.iter().map(move |a| image_arc(m, a)))
            .collect()
    }

    /// Minimum clearance of `Φ(M̄)` inside `M`; positive means compact containment.
    pub fn invariance_clearance(&self, maps: &[Matrix2]) -> f64 {
        self.images(maps)
            .iter()
            .map(|img| self.clearance_of(img))
            .fold(f64::INFINITY, f64::min)
    }
}

impl fmt::Display for Multicone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.arcs.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "({:.6},{:.6})", a.start, a.end())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Containment {
    Compact,
    StrictOnly,
}

impl fmt::Display for Containment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Containment::Compact => "compact",
            Containment::StrictOnly => "strict",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantMulticone {
    pub cone: Multicone,
    pub containment: Containment,
    pub clearance: f64,
    /// Seed radius that produced the cone.
    pub eps: f64,
}

fn has_elliptic_letter(cfg: &SystemConfig) -> bool {
    cfg.alphabet
        .iter()
        .any(|m| geometry::classify(m) == ClassTag::Elliptic)
}

/// Largest depth `≤ depth` whose word tree has at most `limit` nodes.
pub fn affordable_tree_depth(k: usize, depth: usize, limit: u64) -> usize {
    let mut n = 1;
    let mut total = k as u64;
    while n < depth {
        let next = total.saturating_add(word_count(k, n + 1));
        if next > limit {
            break;
        }
        total = next;
        n += 1;
    }
    n
}

fn seed_points(cfg: &SystemConfig, depth: usize) -> Vec<f64> {
    let d = affordable_tree_depth(cfg.len(), depth, 1 << 12);
    let mut pts = Vec::new();
    semigroup::visit_tree(&cfg.alphabet, d, |_, m| {
        if let Some(p) = geometry::attracting_or_parabolic(m) {
            pts.push(p.theta());
        }
    });
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    pts
}

const CLOSURE_ITERS: usize = 100;
/// Closures with more components than this are abandoned.
const MAX_COMPONENTS: usize = 256;

fn close_under_images(start: Multicone, maps: &[Matrix2]) -> Option<Multicone> {
    let mut m = start;
    for _ in 0..CLOSURE_ITERS {
        if m.arcs.len() > MAX_COMPONENTS {
            return None;
        }
        let imgs = m.images(maps);
        if imgs.iter().all(|img| m.clearance_of(img) >= 0.0) {
            return Some(m);
        }
        m = Multicone::from_arcs(m.arcs.iter().copied().chain(imgs), MERGE_TOL)?;
    }
    None
}

/// Searches for a multicone mapped inside itself by every letter.
///
/// Seeds are `eps`-arcs around attracting and parabolic points of words up to
/// `depth`, closed under images with merging. When the closed set only maps
/// strictly inside itself, tighter candidates (fattened images) and smaller
/// seed radii are tried before settling for strict containment.
pub fn find_invariant_multicone(
    cfg: &SystemConfig,
    depth: usize,
    eps: f64,
) -> Option<InvariantMulticone> {
    if has_elliptic_letter(cfg) {
        return None;
    }
    let seeds = seed_points(cfg, depth);
    if seeds.is_empty() {
        return None;
    }
    let maps = &cfg.alphabet;
    let mut strict: Option<InvariantMulticone> = None;
    let mut e = eps;
    while e >= 1e-7 {
        let start = Multicone::from_arcs(seeds.iter().map(|&p| Arc::around(p, e)), MERGE_TOL);
        if let Some(closed) = start.and_then(|s| close_under_images(s, maps)) {
            let mut best = (closed.invariance_clearance(maps), closed.clone());
            let image_union = Multicone::from_arcs(closed.images(maps), MERGE_TOL);
            if let Some(iu) = image_union {
                let mut r = e;
                while r >= e / 256.0 {
                    if let Some(cand) = iu.fatten(r) {
                        let cl = cand.invariance_clearance(maps);
                        if cl > best.0 {
                            best = (cl, cand);
                        }
                    }
                    r /= 2.0;
                }
            }
            if best.0 > COMPACT_TOL {
                return Some(InvariantMulticone {
                    cone: best.1,
                    containment: Containment::Compact,
                    clearance: best.0,
                    eps: e,
                });
            }
            if strict.is_none() && best.0 >= 0.0 {
                strict = Some(InvariantMulticone {
                    cone: best.1,
                    containment: Containment::StrictOnly,
                    clearance: best.0,
                    eps: e,
                });
            }
        }
        e /= 4.0;
    }
    strict
}

/// `c = sin(g)²` where `g` is the gap between the closure of `inner` and the
/// complement of `outer`.
pub fn almost_mult_constant(outer: &Multicone, inner: &Multicone) -> Result<f64> {
    let g = inner
        .arcs()
        .iter()
        .map(|a| outer.clearance_of(a))
        .fold(f64::INFINITY, f64::min);
    if !(g > 0.0) {
        return Err(Error::NonPositiveGap(g));
    }
    Ok(g.min(PI / 2.0).sin().powi(2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmostMultiplicativity {
    pub c: f64,
    /// Word length splitting exactly-enumerated words from cone-bounded ones.
    pub split_depth: usize,
    pub gap: f64,
    /// Region containing every top output direction `M u⁺`.
    pub inner: Multicone,
    /// Complement of the region containing every `u⁻`.
    pub outer: Multicone,
}

fn closed_arcs_distance(a: &[Arc], b: &[Arc]) -> f64 {
    let mut best = f64::INFINITY;
    for x in a {
        for y in b {
            best = best.min(x.dist_to_arc(y));
            if best == 0.0 {
                return 0.0;
            }
        }
    }
    best
}

/// Merges closed arcs (including zero-length ones) into a sorted disjoint list.
fn merge_closed(mut v: Vec<Arc>) -> Vec<Arc> {
    if v.is_empty() {
        return v;
    }
    v.sort_by(|a, b| a.start.total_cmp(&b.start));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for a in v {
        match out.last_mut() {
            Some(last) if a.start <= last.1 => last.1 = last.1.max(a.end()),
            _ => out.push((a.start, a.end())),
        }
    }
    while out.len() > 1 {
        let first = out[0];
        let last = *out.last().unwrap();
        if last.1 - PI >= first.0 {
            out.last_mut().unwrap().1 = last.1.max(first.1 + PI);
            out.remove(0);
        } else {
            break;
        }
    }
    out.into_iter()
        .map(|(s, e)| Arc::new(s, (e - s).min(PI)))
        .collect()
}

struct SideBounds {
    points: Vec<Arc>,
    images: Vec<Arc>,
    stretch: f64,
}

/// For one side (forward maps on `cone`, or inverse maps on the complement):
/// top output directions of words shorter than `k` and the images of the
/// cone under words of length exactly `k`.
fn side_bounds(maps: &[Matrix2], cone: &Multicone, k: usize) -> SideBounds {
    let mut points = Vec::new();
    if k > 1 {
        semigroup::visit_tree(maps, k - 1, |_, m| {
            if let Ok(p) = geometry::top_output_direction(m) {
                points.push(Arc::new(p.theta(), 0.0));
            }
        });
    }
    let mut images = Vec::new();
    let mut longest_image: f64 = 0.0;
    semigroup::visit_extensions(maps, &[], Matrix2::IDENTITY, k, |_, m| {
        for a in cone.arcs() {
            let img = image_arc(m, a);
            longest_image = longest_image.max(img.len);
            images.push(img);
        }
    });
    SideBounds {
        points,
        images,
        stretch: cone.longest() / longest_image,
    }
}

/// Certified constant `c` with `‖AB‖ ≥ c‖A‖‖B‖` for all words `A`, `B`.
///
/// `‖AB‖ ≥ ‖A‖‖B‖·sin∠(B u_B⁺, u_A⁻)`, so `c = sin(g)²` with `g` a lower
/// bound on that angle works once squared conservatively. Words shorter than
/// the split depth `k` contribute their exact directions. For longer words
/// the mean value theorem on the invariant cone gives `‖V‖² ≥ ℓ/j_k`
/// (longest component over longest depth-`k` image), which pins `V u_V⁺` to
/// within `atan(cot(ℓ/2)/‖V‖²)` of the depth-`k` images of the cone. The
/// complement of the cone is invariant under the inverse maps, and the same
/// argument applied to `V⁻¹` locates `u_V⁻`.
pub fn certified_almost_mult(
    cfg: &SystemConfig,
    cone: &Multicone,
    max_split: usize,
) -> Result<AlmostMultiplicativity> {
    let maps = &cfg.alphabet;
    if !(cone.invariance_clearance(maps) > COMPACT_TOL) {
        return Err(Error::NotCompactlyContained(
            cone.invariance_clearance(maps),
        ));
    }
    let inverses: Vec<Matrix2> = maps.iter().map(Matrix2::inverse).collect();
    let comp = cone.complement();
    let kmax = affordable_tree_depth(cfg.len(), max_split, 1 << 15);
    let mut best: Option<AlmostMultiplicativity> = None;
    for k in 1..=kmax {
        let fwd = side_bounds(maps, cone, k);
        let bwd = side_bounds(&inverses, &comp, k);
        let t = fwd.stretch.max(bwd.stretch);
        if !(t > 1.0) || !t.is_finite() {
            continue;
        }
        let spread = |l: f64| ((l / 2.0).min(PI / 2.0).tan().recip() / t).atan();
        let ef = spread(cone.longest());
        let eb = spread(comp.longest());
        let plus = merge_closed(
            fwd.points
                .into_iter()
                .chain(fwd.images.iter().map(|a| a.fatten(ef)))
                .collect(),
        );
        let minus = merge_closed(
            bwd.points
                .into_iter()
                .chain(bwd.images.iter().map(|a| a.fatten(eb)))
                .collect(),
        );
        let g = closed_arcs_distance(&plus, &minus);
        if !(g > 4e-12) {
            continue;
        }
        let tiny = 1e-12;
        let inner = Multicone::from_arcs(plus.iter().map(|a| a.fatten(tiny)), 0.0);
        let minus_cone = Multicone::from_arcs(minus.iter().map(|a| a.fatten(tiny)), 0.0);
        let (Some(inner), Some(minus_cone)) = (inner, minus_cone) else {
            continue;
        };
        let outer = minus_cone.complement();
        let Ok(c) = almost_mult_constant(&outer, &inner) else {
            continue;
        };
        if best.as_ref().map_or(true, |b| c > b.c) {
            best = Some(AlmostMultiplicativity {
                c,
                split_depth: k,
                gap: g,
                inner,
                outer,
            });
        }
    }
    best.ok_or_else(|| {
        Error::CertificationFailed("no positive gap between u+ and u- regions".into())
    })
}

/// Smallest observed `‖AB‖/(‖A‖‖B‖)` over words up to `depth`.
pub fn empirical_almost_mult(cfg: &SystemConfig, depth: usize) -> f64 {
    let d = affordable_tree_depth(cfg.len(), depth, 1 << 9);
    let mut words = Vec::new();
    semigroup::visit_tree(&cfg.alphabet, d, |_, m| {
        words.push((*m, m.norm(NormKind::Operator2)))
    });
    let mut best = 1.0f64;
    for (a, na) in &words {
        for (b, nb) in &words {
            best = best.min((*a * *b).norm(NormKind::Operator2) / (na * nb));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityCertificate {
    pub cone: Multicone,
    pub margin: f64,
    pub lambda: f64,
    pub c_uh: f64,
    pub c_mult: f64,
    pub c_mult_empirical: f64,
    pub mult: AlmostMultiplicativity,
    /// Words with `‖A‖²` above this keep `u_A⁻` outside the cone.
    pub norm_threshold_sq: f64,
    pub depth: usize,
    /// Minimum norm over words of each length 1..=depth.
    pub min_norms: Vec<f64>,
}

pub const DEFAULT_CERT_DEPTH: usize = 12;

pub fn certify_uniform_hyperbolicity(
    cfg: &SystemConfig,
    cone: &Multicone,
) -> Result<HyperbolicityCertificate> {
    certify_uniform_hyperbolicity_at(cfg, cone, DEFAULT_CERT_DEPTH)
}

pub fn certify_uniform_hyperbolicity_at(
    cfg: &SystemConfig,
    cone: &Multicone,
    depth: usize,
) -> Result<HyperbolicityCertificate> {
    if has_elliptic_letter(cfg) {
        return Err(Error::EllipticLetter);
    }
    let margin = cone.invariance_clearance(&cfg.alphabet);
    if !(margin > COMPACT_TOL) {
        return Err(Error::NotCompactlyContained(margin));
    }
    let depth = affordable_tree_depth(cfg.len(), depth, 1 << 20);
    let mut min_norms = vec![f64::INFINITY; depth];
    semigroup::visit_tree(&cfg.alphabet, depth, |w, m| {
        let n = m.norm(NormKind::Operator2);
        let slot = &mut min_norms[w.len() - 1];
        if n < *slot {
            *slot = n;
        }
    });
    let xs: Vec<f64> = (1..=depth).map(|n| n as f64).collect();
    let ys: Vec<f64> = min_norms.iter().map(|v| v.ln()).collect();
    let lambda = match semigroup::least_squares(&xs, &ys) {
        Some((slope, _)) => slope.exp(),
        None => min_norms[0],
    };
    if !(lambda > 1.0) {
        return Err(Error::NoNormGrowth(depth));
    }
    let c_uh = min_norms
        .iter()
        .enumerate()
        .map(|(i, v)| v / lambda.powi(i as i32 + 1))
        .fold(f64::INFINITY, f64::min);
    let mult = certified_almost_mult(cfg, cone, depth.min(10))?;
    Ok(HyperbolicityCertificate {
        cone: cone.clone(),
        margin,
        lambda,
        c_uh,
        c_mult: mult.c,
        c_mult_empirical: empirical_almost_mult(cfg, 8),
        mult,
        norm_threshold_sq: 2.0 / margin,
        depth,
        min_norms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SemidiscreteVerdict {
    CertifiedViaInvariantSet(InvariantMulticone),
    RefutedViaIdentityApproach { word: Word, distance: f64 },
    EvidenceOnly(DiscretenessProfile),
}

impl SemidiscreteVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            SemidiscreteVerdict::CertifiedViaInvariantSet(_) => "certified",
            SemidiscreteVerdict::RefutedViaIdentityApproach { .. } => "refuted",
            SemidiscreteVerdict::EvidenceOnly(_) => "evidence-only",
        }
    }
}

pub const SEARCH_EPS: f64 = 0.05;
pub const SEARCH_DEPTH: usize = 8;

pub fn certify_semidiscrete(cfg: &SystemConfig, depth: usize) -> Result<SemidiscreteVerdict> {
    let d = affordable_tree_depth(cfg.len(), depth, 1 << 16);
    let profile = semigroup::discreteness_profile(cfg, d)?;
    if let Some((w, dist)) = &profile.identity_witness {
        if *dist <= 1e-9 {
            return Ok(SemidiscreteVerdict::RefutedViaIdentityApproach {
                word: w.clone(),
                distance: *dist,
            });
        }
    }
    if let Some(found) = find_invariant_multicone(cfg, depth.min(SEARCH_DEPTH), SEARCH_EPS) {
        return Ok(SemidiscreteVerdict::CertifiedViaInvariantSet(found));
    }
    Ok(SemidiscreteVerdict::EvidenceOnly(profile))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(a: f64, b: f64, c: f64, d: f64) -> Matrix2 {
        Matrix2::new(a, b, c, d).unwrap()
    }

    fn positive_pair() -> SystemConfig {
        SystemConfig::new(vec![m(2.0, 1.0, 1.0, 1.0), m(1.0, 1.0, 1.0, 2.0)]).unwrap()
    }

    fn parabolic_repeller() -> SystemConfig {
        SystemConfig::new(vec![Matrix2::diag(0.5), m(1.0, 1.0, 0.0, 1.0)]).unwrap()
    }

    #[test]
    fn arc_geometry() {
        let a = Arc::new(-0.1, 0.2);
        assert_abs_diff_eq!(a.start, PI - 0.1, epsilon = 1e-15);
        assert!(a.contains(0.05));
        assert!(a.contains(PI));
        assert!(!a.contains(0.2));
        let outer = Arc::new(0.0, PI / 2.0);
        assert_abs_diff_eq!(
            outer.clearance_of(&Arc::new(PI / 8.0, PI / 4.0)),
            PI / 8.0,
            epsilon = 1e-15
        );
        assert!(outer.clearance_of(&Arc::new(-0.1, 0.3)) < 0.0);
    }

    #[test]
    fn merging_wraps_around() {
        let mc = Multicone::from_arcs(
            [Arc::new(3.0, 0.3), Arc::new(0.05, 0.2), Arc::new(1.0, 0.1)],
            MERGE_TOL,
        )
        .unwrap();
        assert_eq!(mc.arcs().len(), 2);
        assert!(mc.contains(0.0001));
        assert!(mc.contains(3.1));
        assert!(
            Multicone::from_arcs([Arc::new(0.0, 2.0), Arc::new(1.9, 1.3)], MERGE_TOL).is_none()
        );
        let comp = mc.complement();
        assert_abs_diff_eq!(comp.total_length() + mc.total_length(), PI, epsilon = 1e-12);
    }

    #[test]
    fn image_arc_follows_endpoints() {
        let d = Matrix2::diag(2.0);
        let img = image_arc(&d, &Arc::new(PI / 4.0, PI / 2.0));
        // tan θ' = tan θ / 4, and the arc keeps passing through π/2.
        assert_abs_diff_eq!(img.start, 0.25f64.atan(), epsilon = 1e-12);
        assert_abs_diff_eq!(img.len, PI - 2.0 * 0.25f64.atan(), epsilon = 1e-12);
        assert!(img.contains(PI / 2.0));
    }

    #[test]
    fn almost_mult_examples() {
        let k = Multicone::single(Arc::new(0.0, PI / 2.0));
        let kp = Multicone::single(Arc::new(PI / 8.0, PI / 4.0));
        assert_abs_diff_eq!(
            almost_mult_constant(&k, &kp).unwrap(),
            (PI / 8.0).sin().powi(2),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            almost_mult_constant(&k, &kp).unwrap(),
            0.1464,
            epsilon = 1e-4
        );
        let touching = Multicone::single(Arc::new(0.0, PI / 4.0));
        assert!(matches!(
            almost_mult_constant(&k, &touching),
            Err(Error::NonPositiveGap(_))
        ));
    }

    #[test]
    fn positive_pair_has_compact_cone_in_first_quadrant() {
        let found = find_invariant_multicone(&positive_pair(), 8, 0.05).unwrap();
        assert_eq!(found.containment, Containment::Compact);
        for a in found.cone.arcs() {
            assert!(a.start > 0.0 && a.end() < PI / 2.0);
        }
    }

    #[test]
    fn inverse_pair_has_no_cone() {
        let a = m(2.0, 1.0, 1.0, 1.0);
        let cfg = SystemConfig::new(vec![a, a.inverse()]).unwrap();
        assert!(find_invariant_multicone(&cfg, 8, 0.05).is_none());
    }

    #[test]
    fn parabolic_repeller_is_not_compact() {
        if let Some(found) = find_invariant_multicone(&parabolic_repeller(), 8, 0.05) {
            assert_eq!(found.containment, Containment::StrictOnly);
        }
        let cone = Multicone::single(Arc::new(PI - 0.3, 2.2));
        assert!(matches!(
            certify_uniform_hyperbolicity(&parabolic_repeller(), &cone),
            Err(Error::NotCompactlyContained(_))
        ));
    }

    #[test]
    fn single_diagonal_certificate() {
        let cfg = SystemConfig::new(vec![Matrix2::diag(2.0)]).unwrap();
        let cone = Multicone::single(Arc::around(PI, 0.1));
        let cert = certify_uniform_hyperbolicity(&cfg, &cone).unwrap();
        assert_abs_diff_eq!(cert.lambda, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(cert.c_uh, 1.0, epsilon = 1e-9);
        assert!(cert.c_mult > 0.99);
    }

    #[test]
    fn positive_pair_certificate_is_sound() {
        let cfg = positive_pair();
        let found = find_invariant_multicone(&cfg, 8, 0.05).unwrap();
        let cert = certify_uniform_hyperbolicity(&cfg, &found.cone).unwrap();
        assert!(cert.margin > 0.0 && cert.lambda > 1.0);
        assert!(cert.c_mult > 0.0 && cert.c_mult <= cert.c_mult_empirical);
        for (i, v) in cert.min_norms.iter().enumerate() {
            assert!(*v >= cert.c_uh * cert.lambda.powi(i as i32 + 1) * (1.0 - 1e-6));
        }
        // u⁻ of strongly expanded words stays out of the cone.
        semigroup::visit_tree(&cfg.alphabet, 10, |_, w| {
            let n = w.norm(NormKind::Operator2);
            if n * n > cert.norm_threshold_sq {
                let (um, _) = geometry::singular_directions(w).unwrap();
                assert!(!cert.cone.contains(um.theta()));
            }
        });
        // Submultiplicativity of c^{-2s} Z_l, the hypothesis of Fekete's lemma.
        for &s in &[0.25, 0.5, 1.0] {
            let z = crate::spectral::zeta_levels(&cfg, s, 12).unwrap();
            let k = cert.c_mult.powf(-2.0 * s);
            for l in 1..12 {
                for r in 1..=(12 - l) {
                    assert!(k * z[l + r - 1] <= k * z[l - 1] * k * z[r - 1] * (1.0 + 1e-8));
                }
            }
        }
    }

    #[test]
    fn diagonal_pair_constant_is_nearly_one() {
        let cfg = SystemConfig::new(vec![Matrix2::diag(2.0), Matrix2::diag(3.0)]).unwrap();
        let found = find_invariant_multicone(&cfg, 8, 0.05).unwrap();
        assert_eq!(found.containment, Containment::Compact);
        let cert = certify_uniform_hyperbolicity(&cfg, &found.cone).unwrap();
        assert!(cert.c_mult > 0.999, "{}", cert.c_mult);
    }

    #[test]
    fn semidiscrete_verdicts() {
        assert!(matches!(
            certify_semidiscrete(&positive_pair(), 8).unwrap(),
            SemidiscreteVerdict::CertifiedViaInvariantSet(_)
        ));
        let a = m(2.0, 1.0, 1.0, 1.0);
        let inv = SystemConfig::new(vec![a, a.inverse()]).unwrap();
        assert!(matches!(
            certify_semidiscrete(&inv, 8).unwrap(),
            SemidiscreteVerdict::RefutedViaIdentityApproach { .. }
        ));
        assert!(matches!(
            certify_semidiscrete(&parabolic_repeller(), 8).unwrap(),
            SemidiscreteVerdict::EvidenceOnly(_)
        ));
    }

    #[test]
    fn elliptic_letter_blocks_certification() {
        let cfg = SystemConfig::new(vec![m(2.0, 1.0, 1.0, 1.0), Matrix2::rotation(0.4)]).unwrap();
        assert!(find_invariant_multicone(&cfg, 6, 0.05).is_none());
        let cone = Multicone::single(Arc::new(0.2, 1.0));
        assert!(matches!(
            certify_uniform_hyperbolicity(&cfg, &cone),
            Err(Error::EllipticLetter)
        ));
    }
}
