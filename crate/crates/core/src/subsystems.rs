//! Reducible systems, the pivot construction giving uniformly hyperbolic
//! subsystems `Γ_n = {A₀B : B ∈ 𝒜ⁿ}`, and the reduction of finite-order
//! elliptic letters.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::attractor;
use crate::error::{Error, Result};
use crate::geometry::{self, ClassTag, Matrix2, NormKind, ProjPoint};
use crate::multicone::{self, image_arc, Arc, Multicone, COMPACT_TOL};
use crate::semigroup::{self, word_count, SystemConfig, Word};
use crate::spectral::{self, Bracket, LogNormTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReducibleCase {
    UniformlyHyperbolicReducible,
    ParabolicAtRepeller,
    AttractorMeetsRepeller,
    SingletonAttractor,
}

impl fmt::Display for ReducibleCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReducibleCase::UniformlyHyperbolicReducible => "uniformly-hyperbolic",
            ReducibleCase::ParabolicAtRepeller => "parabolic-at-repeller",
            ReducibleCase::AttractorMeetsRepeller => "attractor-meets-repeller",
            ReducibleCase::SingletonAttractor => "singleton-attractor",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReducibleDimension {
    Value(f64),
    DeferredToUh,
}

impl fmt::Display for ReducibleDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReducibleDimension::Value(v) => write!(f, "{v}"),
            ReducibleDimension::DeferredToUh => f.write_str("deferred-to-uh"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducibleVerdict {
    pub case: ReducibleCase,
    pub dimension: ReducibleDimension,
    pub common_point: ProjPoint,
}

const REDUCIBLE_SCAN_DEPTH: usize = 4;
const MULTIPLIER_TOL: f64 = 1e-9;

#[derive(Default)]
struct LocalTypes {
    repelling: bool,
    attracting: bool,
    parabolic: bool,
}

/// Behaviour of every scanned word at the common fixed point `p`, read off
/// the upper-triangular conjugate that moves `p` to θ = π.
fn local_types(cfg: &SystemConfig, p: ProjPoint, depth: usize) -> LocalTypes {
    let r = Matrix2::rotation(PI - p.theta());
    let ri = r.inverse();
    let mut t = LocalTypes::default();
    semigroup::visit_tree(&cfg.alphabet, depth, |_, m| {
        let mut u = r * *m * ri;
        if u.trace() < 0.0 {
            u = u.neg();
        }
        let a = u.a.abs();
        if a > 1.0 + MULTIPLIER_TOL {
            t.attracting = true;
        } else if a < 1.0 - MULTIPLIER_TOL {
            t.repelling = true;
        } else if u.b.abs() > MULTIPLIER_TOL {
            t.parabolic = true;
        }
    });
    t
}

pub fn reducible_dimension(cfg: &SystemConfig) -> Result<ReducibleVerdict> {
    let pts = semigroup::common_fixed_points(cfg);
    if pts.is_empty() {
        return Err(Error::NotReducible);
    }
    let mut depth = 1;
    while depth < REDUCIBLE_SCAN_DEPTH && word_count(cfg.len(), depth + 1) <= 4096 {
        depth += 1;
    }
    let mut verdicts = Vec::new();
    for p in pts {
        // The letters decide the case when they can; longer words only when
        // no single letter is attracting or parabolic at a repelling point.
        let mut t = local_types(cfg, p, 1);
        if !(t.repelling && (t.parabolic || t.attracting)) {
            t = local_types(cfg, p, depth);
        }
        let case = if t.repelling {
            if t.parabolic {
                ReducibleCase::ParabolicAtRepeller
            } else if t.attracting {
                ReducibleCase::AttractorMeetsRepeller
            } else {
                ReducibleCase::UniformlyHyperbolicReducible
            }
        } else {
            ReducibleCase::SingletonAttractor
        };
        let dimension = match case {
            ReducibleCase::ParabolicAtRepeller | ReducibleCase::AttractorMeetsRepeller => {
                ReducibleDimension::Value(1.0)
            }
            ReducibleCase::SingletonAttractor => ReducibleDimension::Value(0.0),
            ReducibleCase::UniformlyHyperbolicReducible => ReducibleDimension::DeferredToUh,
        };
        verdicts.push(ReducibleVerdict {
            case,
            dimension,
            common_point: p,
        });
    }
    // Every map attracting or neutral at a common point pins the attractor there.
    if let Some(v) = verdicts
        .iter()
        .find(|v| v.case == ReducibleCase::SingletonAttractor)
    {
        return Ok(*v);
    }
    Ok(verdicts[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pivot {
    pub a0: (Word, Matrix2),
    pub u: Arc,
    pub u_prime: Arc,
    pub v: Arc,
    /// `min(dist(U, R), dist(V, K))` measured on the finite-depth clouds.
    pub margin: f64,
}

impl Pivot {
    /// Re-checks the three containments by endpoint transport.
    pub fn verify(&self) -> bool {
        let inner_ok = self.u.clearance_of(&self.u_prime) > 0.0;
        let disjoint = self.u.dist_to_arc(&self.v) > 0.0;
        let outside_v = Arc::new(self.v.end(), PI - self.v.len);
        let img = image_arc(&self.a0.1, &outside_v);
        inner_ok && disjoint && self.u_prime.clearance_of(&img) > 0.0
    }
}

/// Candidate arcs between consecutive points of `walls` that contain points
/// of `inside`, with their distance to the walls.
fn gap_candidates(walls: &[f64], inside: &[f64]) -> Vec<(Arc, f64)> {
    let n = walls.len();
    let mut out = Vec::new();
    for j in 0..n {
        let a = walls[j];
        let b = walls[(j + 1) % n];
        let w = if n == 1 { PI } else { (b - a).rem_euclid(PI) };
        if w <= 1e-9 {
            continue;
        }
        let gap = Arc::new(a, w);
        let hits: Vec<f64> = inside
            .iter()
            .filter(|&&x| gap.contains(x))
            .map(|&x| gap.offset(x))
            .collect();
        if hits.is_empty() {
            continue;
        }
        let third = Arc::new(a + w / 3.0, w / 3.0);
        if hits.iter().any(|&o| o > w / 3.0 && o < 2.0 * w / 3.0) {
            out.push((third, w / 3.0));
            continue;
        }
        let lo = hits.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = hits.iter().copied().fold(0.0, f64::max);
        let room = lo.min(w - hi);
        let pad = room / 2.0;
        if pad > 0.0 {
            out.push((Arc::new(a + lo - pad, hi - lo + 2.0 * pad), pad));
        }
    }
    out.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.start.total_cmp(&y.0.start)));
    out.truncate(8);
    out
}

const PIVOT_CLOUD_DEPTH: usize = 12;
const MAX_POWER: u32 = 8;

pub fn find_pivot(cfg: &SystemConfig, depth: usize) -> Result<Pivot> {
    if semigroup::common_fixed_point(cfg).is_some() {
        return Err(Error::NotApplicable("system is reducible".into()));
    }
    let cd = multicone::affordable_tree_depth(cfg.len(), PIVOT_CLOUD_DEPTH, 1 << 16);
    let k = attractor::attractor_points_fixedpoint(cfg, cd)?.thetas();
    let r = attractor::repeller_points(cfg, cd)?.thetas();
    if k.is_empty() || r.is_empty() {
        return Err(Error::NoPivot(depth));
    }
    let us = gap_candidates(&r, &k);
    let vs = gap_candidates(&k, &r);
    let mut pairs: Vec<(Arc, Arc, f64)> = Vec::new();
    for (u, mu) in &us {
        for (v, mv) in &vs {
            if u.dist_to_arc(v) > 0.0 {
                pairs.push((*u, *v, mu.min(*mv)));
            }
        }
    }
    pairs.sort_by(|x, y| y.2.total_cmp(&x.2).then(x.0.start.total_cmp(&y.0.start)));

    let wd = multicone::affordable_tree_depth(cfg.len(), depth, 1 << 12);
    let mut words: Vec<(Vec<usize>, Matrix2, f64)> = Vec::new();
    semigroup::visit_tree(&cfg.alphabet, wd, |w, m| {
        if geometry::classify(m) == ClassTag::Hyperbolic {
            words.push((w.to_vec(), *m, m.norm(NormKind::Operator2)));
        }
    });
    words.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));

    for (u, v, margin) in pairs {
        let outside_v = Arc::new(v.end(), PI - v.len);
        for (w, m, _) in &words {
            let mut power = *m;
            let mut letters = w.clone();
            for _ in 1..=MAX_POWER {
                let fp = geometry::fixed_points(&power);
                if let (Some(a), Some(rp)) = (fp.attracting, fp.repelling) {
                    if u.contains(a.theta()) && v.contains(rp.theta()) {
                        let img = image_arc(&power, &outside_v);
                        let cl = u.clearance_of(&img);
                        if cl > 0.0 {
                            let pivot = Pivot {
                                a0: (Word(letters.clone()), power),
                                u,
                                u_prime: img.fatten(cl / 2.0),
                                v,
                                margin,
                            };
                            if pivot.verify() {
                                return Ok(pivot);
                            }
                        }
                    }
                }
                power = power * *m;
                letters.extend_from_slice(w);
            }
        }
    }
    Err(Error::NoPivot(depth))
}

/// The alphabet `Γ_n = {A₀B : B ∈ 𝒜ⁿ}` in lexicographic order of `B`.
pub fn gamma_alphabet(cfg: &SystemConfig, a0: &Matrix2, n: usize) -> Vec<Matrix2> {
    let mut out = Vec::with_capacity(word_count(cfg.len(), n) as usize);
    semigroup::visit_extensions(&cfg.alphabet, &[], Matrix2::IDENTITY, n, |_, b| {
        out.push(*a0 * *b)
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaBound {
    pub n: usize,
    pub letters: usize,
    /// Pressure bracket for `Γ_n` alone.
    pub delta: Bracket,
    /// `min{1, δ_{Γ_n} lower}` for this `n`.
    pub raw_lower: f64,
    /// Best certified lower bound over `Γ_1, …, Γ_n`.
    pub lower: f64,
    pub certified: bool,
}

/// Total words stored when evaluating pressure for a `Γ_n`.
const GAMMA_TABLE_LIMIT: u64 = 1 << 22;
const GAMMA_LETTER_LIMIT: u64 = 1 << 16;

fn gamma_single(
    cfg: &SystemConfig,
    pivot: &Pivot,
    n: usize,
    depth: usize,
) -> Result<(usize, Bracket)> {
    let count = word_count(cfg.len(), n);
    if count > GAMMA_LETTER_LIMIT {
        return Err(Error::BudgetExceeded(crate::error::Progress {
            depth: n,
            visited: 0,
            requested: count,
            elapsed: std::time::Duration::ZERO,
        }));
    }
    let gamma = gamma_alphabet(cfg, &pivot.a0.1, n);
    let cone = Multicone::single(pivot.u);
    let clearance = cone.invariance_clearance(&gamma);
    if !(clearance > COMPACT_TOL) {
        return Err(Error::CertificationFailed(format!(
            "Γ_{n} does not map U compactly into itself (clearance {clearance:.3e})"
        )));
    }
    let gcfg = cfg.with_alphabet(gamma)?;
    let m = LogNormTable::affordable_depth(gcfg.len(), depth, GAMMA_TABLE_LIMIT);
    let table = LogNormTable::build_for(&gcfg.alphabet, gcfg.norm, m, u64::MAX)?;
    let c = if gcfg.len() <= 64 {
        multicone::certified_almost_mult(&gcfg, &cone, 2)
            .ok()
            .map(|a| a.c)
    } else {
        None
    };
    Ok((gcfg.len(), spectral::bracket_from_table(&table, c)?))
}

/// Lower bounds on `dim_H K_𝒜` from `Γ_1, …, Γ_{n_max}`.
pub fn gamma_lower_bounds(
    cfg: &SystemConfig,
    pivot: &Pivot,
    n_max: usize,
    depth: usize,
) -> Result<Vec<GammaBound>> {
    if !pivot.verify() {
        return Err(Error::CertificationFailed(
            "pivot containments do not hold".into(),
        ));
    }
    let mut out = Vec::with_capacity(n_max);
    let mut best = 0.0f64;
    for n in 1..=n_max {
        let (letters, delta) = gamma_single(cfg, pivot, n, depth)?;
        let raw_lower = delta.lo.min(1.0);
        best = best.max(raw_lower);
        out.push(GammaBound {
            n,
            letters,
            delta,
            raw_lower,
            lower: best,
            certified: true,
        });
    }
    Ok(out)
}

pub fn gamma_lower_bound(
    cfg: &SystemConfig,
    pivot: &Pivot,
    n: usize,
    depth: usize,
) -> Result<GammaBound> {
    let mut all = gamma_lower_bounds(cfg, pivot, n, depth)?;
    Ok(all.pop().expect("n >= 1"))
}

/// `{A₀} ∪ {A₀B : B a word over the other letters, |A₀B| ≤ N}`, shortest first.
pub fn a_infty_truncation(
    cfg: &SystemConfig,
    a0_letter: usize,
    n: usize,
) -> Result<Vec<(Word, Matrix2)>> {
    if a0_letter >= cfg.len() {
        return Err(Error::Usage(format!(
            "letter {a0_letter} is outside the alphabet"
        )));
    }
    let a0 = cfg.alphabet[a0_letter];
    let others: Vec<usize> = (0..cfg.len()).filter(|&i| i != a0_letter).collect();
    let mut out = vec![(Word(vec![a0_letter]), a0)];
    if others.is_empty() || n < 2 {
        return Ok(out);
    }
    let sub: Vec<Matrix2> = others.iter().map(|&i| cfg.alphabet[i]).collect();
    for len in 1..n {
        semigroup::visit_extensions(&sub, &[], Matrix2::IDENTITY, len, |w, m| {
            let mut letters = vec![a0_letter];
            letters.extend(w.iter().map(|&j| others[j]));
            out.push((Word(letters), a0 * *m));
        });
    }
    Ok(out)
}

/// Order of a matrix acting on RP¹ when it is a finite-order rotation.
pub fn projective_order(m: &Matrix2) -> Result<u32> {
    match geometry::classify(m) {
        ClassTag::Identity => Ok(1),
        ClassTag::Elliptic => {
            let w = (m.trace().abs() / 2.0).min(1.0).acos();
            let x = w / PI;
            for q in 1..=64u32 {
                let y = x * q as f64;
                if (y - y.round()).abs() <= 1e-9 {
                    return Ok(q);
                }
            }
            Err(Error::InfiniteOrder(w))
        }
        other => Err(Error::NotApplicable(format!(
            "{other} element in the elliptic set"
        ))),
    }
}

fn lcm(a: u32, b: u32) -> u32 {
    fn gcd(a: u32, b: u32) -> u32 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticReduction {
    pub order: u32,
    pub rotation: Matrix2,
    pub alphabet: Vec<Matrix2>,
}

/// Replaces `S ∪ E` by `{A Bⁿ : A ∈ S, 0 ≤ n < p}` where `B ∈ E*` has the
/// common order `p` of the finite-order elliptic set `E`.
pub fn elliptic_reduction(s: &[Matrix2], e: &[Matrix2]) -> Result<EllipticReduction> {
    if s.is_empty() {
        return Err(Error::EmptyAlphabet);
    }
    let mut p = 1;
    for m in e {
        p = lcm(p, projective_order(m)?);
    }
    let scfg = SystemConfig::new(s.to_vec())?;
    if multicone::find_invariant_multicone(&scfg, multicone::SEARCH_DEPTH, multicone::SEARCH_EPS)
        .is_none()
    {
        return Err(Error::NotApplicable(
            "S maps no multicone inside itself".into(),
        ));
    }
    let mut b = None;
    if e.is_empty() || p == 1 {
        b = Some(Matrix2::IDENTITY);
    } else {
        semigroup::visit_tree(e, 4, |_, m| {
            if b.is_none() && projective_order(m).ok() == Some(p) {
                b = Some(*m);
            }
        });
    }
    let b =
        b.ok_or_else(|| Error::NotApplicable(format!("no element of order {p} found in E*")))?;
    let mut alphabet = Vec::with_capacity(s.len() * p as usize);
    for a in s {
        let mut acc = *a;
        for _ in 0..p {
            alphabet.push(acc);
            acc = acc * b;
        }
    }
    Ok(EllipticReduction {
        order: p,
        rotation: b,
        alphabet,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(a: f64, b: f64, c: f64, d: f64) -> Matrix2 {
        Matrix2::new(a, b, c, d).unwrap()
    }

    fn positive_pair() -> SystemConfig {
        SystemConfig::new(vec![m(2.0, 1.0, 1.0, 1.0), m(1.0, 1.0, 1.0, 2.0)]).unwrap()
    }

    fn sb() -> SystemConfig {
        SystemConfig::new(vec![m(1.0, 1.0, 0.0, 1.0), m(1.0, 0.0, 1.0, 1.0)]).unwrap()
    }

    #[test]
    fn reducible_examples() {
        let l51 = SystemConfig::new(vec![Matrix2::diag(0.5), m(1.0, 1.0, 0.0, 1.0)]).unwrap();
        let v = reducible_dimension(&l51).unwrap();
        assert_eq!(v.case, ReducibleCase::ParabolicAtRepeller);
        assert_eq!(v.dimension, ReducibleDimension::Value(1.0));

        let l52 = SystemConfig::new(vec![Matrix2::diag(2.0), m(0.5, 1.5, 0.0, 2.0)]).unwrap();
        let v = reducible_dimension(&l52).unwrap();
        assert_eq!(v.case, ReducibleCase::AttractorMeetsRepeller);
        assert_eq!(v.dimension, ReducibleDimension::Value(1.0));

        let dp = SystemConfig::new(vec![Matrix2::diag(2.0), Matrix2::diag(3.0)]).unwrap();
        assert_eq!(
            reducible_dimension(&dp).unwrap().case,
            ReducibleCase::SingletonAttractor
        );

        let uh = SystemConfig::new(vec![Matrix2::diag(0.5), m(0.5, 1.0, 0.0, 2.0)]).unwrap();
        let v = reducible_dimension(&uh).unwrap();
        assert_eq!(v.case, ReducibleCase::UniformlyHyperbolicReducible);
        assert_eq!(v.dimension, ReducibleDimension::DeferredToUh);

        assert!(matches!(
            reducible_dimension(&sb()),
            Err(Error::NotReducible)
        ));
    }

    #[test]
    fn pivots() {
        let p = find_pivot(&positive_pair(), 4).unwrap();
        assert!(p.verify());
        assert!(p.a0.0.len() <= 4 * MAX_POWER as usize);

        let p = find_pivot(&sb(), 6).unwrap();
        assert!(p.verify());
        let l51 = SystemConfig::new(vec![Matrix2::diag(0.5), m(1.0, 1.0, 0.0, 1.0)]).unwrap();
        assert!(matches!(find_pivot(&l51, 4), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn gamma_bounds_positive_pair() {
        let cfg = positive_pair();
        let p = find_pivot(&cfg, 4).unwrap();
        let bounds = gamma_lower_bounds(&cfg, &p, 6, 16).unwrap();
        for w in bounds.windows(2) {
            assert!(w[1].lower >= w[0].lower - 1e-6);
        }
        assert!(bounds.last().unwrap().lower > 0.0);
    }

    #[test]
    fn gamma_bound_degenerate_single_matrix() {
        let a = Matrix2::diag(10.0);
        let cfg = SystemConfig::new(vec![a]).unwrap();
        let pivot = Pivot {
            a0: (Word(vec![0]), a),
            u: Arc::around(PI, 0.2),
            u_prime: Arc::around(PI, 0.1),
            v: Arc::around(PI / 2.0, 0.2),
            margin: 0.2,
        };
        assert!(pivot.verify());
        let b = gamma_lower_bound(&cfg, &pivot, 3, 8).unwrap();
        assert_eq!(b.lower, 0.0);
    }

    #[test]
    fn truncations() {
        let cfg = positive_pair();
        let t = a_infty_truncation(&cfg, 0, 3).unwrap();
        let words: Vec<String> = t.iter().map(|(w, _)| w.to_string()).collect();
        assert_eq!(words, ["1", "12", "122"]);
        assert_eq!(a_infty_truncation(&cfg, 0, 1).unwrap().len(), 1);
    }

    #[test]
    fn truncation_roots_increase() {
        let cfg = positive_pair();
        let mut prev = 0.0;
        for n in 2..=6 {
            let alpha: Vec<Matrix2> = a_infty_truncation(&cfg, 0, n)
                .unwrap()
                .into_iter()
                .map(|x| x.1)
                .collect();
            let sub = cfg.with_alphabet(alpha).unwrap();
            let b = spectral::critical_exponent_bracket(&sub, 14, None).unwrap();
            assert!(b.lo >= prev - 1e-4, "n={n}: {} < {prev}", b.lo);
            prev = b.lo;
        }
    }

    fn symmetric_s() -> Vec<Matrix2> {
        let a = m(1.0 / 3.0, 8.0 / 3.0, 0.0, 3.0);
        let r = Matrix2::rotation(PI / 2.0);
        vec![a, r * a * r.inverse()]
    }

    #[test]
    fn elliptic_reduction_examples() {
        let s = symmetric_s();
        let red = elliptic_reduction(&s, &[Matrix2::rotation(PI / 2.0)]).unwrap();
        assert_eq!(red.order, 2);
        assert_eq!(red.alphabet.len(), 4);
        let red = elliptic_reduction(&s, &[Matrix2::rotation(PI)]).unwrap();
        assert_eq!(red.order, 1);
        assert_eq!(red.alphabet, s);
        assert!(matches!(
            elliptic_reduction(&s, &[Matrix2::rotation(1.0)]),
            Err(Error::InfiniteOrder(_))
        ));
        assert_eq!(projective_order(&Matrix2::rotation(PI / 3.0)).unwrap(), 3);
        assert_eq!(
            projective_order(&Matrix2::rotation(2.0 * PI / 3.0)).unwrap(),
            3
        );
    }
}
