//! Zeta partial sums, pressure brackets and certified bisection for the
//! critical exponent.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, ClassTag, Matrix2, NormKind};
use crate::semigroup::{self, word_count, SystemConfig};
use crate::subsystems::{self, ReducibleCase};

/// Bisection tolerance in `s`.
pub const S_TOL: f64 = 1e-4;
/// Largest exponent probed.
pub const S_CAP: f64 = 5.0;
/// Maximum number of stored log-norms in a pressure table.
pub const TABLE_LIMIT: u64 = 1 << 24;

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn ordered_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Per-level zeta partial sums `Z_1(s), …, Z_n(s)` without storing words.
pub fn zeta_levels(cfg: &SystemConfig, s: f64, n: usize) -> Result<Vec<f64>> {
    if !(s >= 0.0) {
        return Err(Error::Usage(format!(
            "exponent must be non-negative, got {s}"
        )));
    }
    let total: u64 = (1..=n)
        .map(|m| word_count(cfg.len(), m))
        .fold(0, u64::saturating_add);
    cfg.check_budget(n, total)?;
    let k = cfg.len();
    let p = semigroup::partition_depth(k, n);
    let norm = cfg.norm;
    let term = |m: &Matrix2| m.norm(norm).powf(-2.0 * s);
    let mut levels = vec![CompensatedSum::default(); n + 1];
    if p > 1 {
        semigroup::visit_tree(&cfg.alphabet, p - 1, |w, m| levels[w.len()].add(term(m)));
    }
    let parts = semigroup::map_partitions(&cfg.alphabet, n, |_, pm, rem| {
        let mut local = vec![CompensatedSum::default(); rem + 1];
        local[0].add(term(&pm));
        semigroup::visit_tree(&cfg.alphabet, rem, |w, m| {
            local[w.len()].add(term(&(pm * *m)))
        });
        local
    });
    for part in parts {
        for (j, v) in part.into_iter().enumerate() {
            levels[p + j].add(v.value());
        }
    }
    Ok(levels[1..].iter().map(|c| c.value()).collect())
}

/// `(Z_n(s), Σ_{m≤n} Z_m(s))`.
pub fn partial_zeta(cfg: &SystemConfig, s: f64, n: usize) -> Result<(f64, f64)> {
    let levels = zeta_levels(cfg, s, n)?;
    let cumulative = ordered_sum(levels.iter().copied());
    Ok((*levels.last().unwrap_or(&0.0), cumulative))
}

/// Log-norms of every word up to a depth, stored per level in lexicographic
/// order so pressure can be re-evaluated at many `s` cheaply.
#[derive(Debug, Clone)]
pub struct LogNormTable {
    pub norm: NormKind,
    levels: Vec<Vec<f64>>,
}

impl LogNormTable {
    pub fn build(cfg: &SystemConfig, n: usize) -> Result<Self> {
        Self::build_for(&cfg.alphabet, cfg.norm, n, cfg.word_budget)
    }

    pub fn build_for(alphabet: &[Matrix2], norm: NormKind, n: usize, budget: u64) -> Result<Self> {
        let k = alphabet.len();
        let total: u64 = (1..=n)
            .map(|m| word_count(k, m))
            .fold(0, u64::saturating_add);
        if total > budget {
            return Err(Error::BudgetExceeded(crate::error::Progress {
                depth: n,
                visited: 0,
                requested: total,
                elapsed: std::time::Duration::ZERO,
            }));
        }
        let p = semigroup::partition_depth(k, n);
        let ln = |m: &Matrix2| m.norm(norm).ln();
        let mut levels: Vec<Vec<f64>> = (0..=n)
            .map(|m| Vec::with_capacity(word_count(k, m) as usize))
            .collect();
        if p > 1 {
            semigroup::visit_tree(alphabet, p - 1, |w, m| levels[w.len()].push(ln(m)));
        }
        let parts = semigroup::map_partitions(alphabet, n, |_, pm, rem| {
            let mut local: Vec<Vec<f64>> = vec![Vec::new(); rem + 1];
            local[0].push(ln(&pm));
            semigroup::visit_tree(alphabet, rem, |w, m| local[w.len()].push(ln(&(pm * *m))));
            local
        });
        for part in parts {
            for (j, v) in part.into_iter().enumerate() {
                levels[p + j].extend(v);
            }
        }
        levels.remove(0);
        Ok(LogNormTable { norm, levels })
    }

    /// Deepest `n ≤ max_depth` whose table fits within `limit` entries.
    pub fn affordable_depth(k: usize, max_depth: usize, limit: u64) -> usize {
        let mut total = 0u64;
        let mut n = 0;
        while n < max_depth {
            let next = total.saturating_add(word_count(k, n + 1));
            if next > limit {
                break;
            }
            total = next;
            n += 1;
        }
        n.max(1)
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, m: usize) -> &[f64] {
        &self.levels[m - 1]
    }

    /// `Z_m(s)` summed in lexicographic order.
    pub fn z(&self, m: usize, s: f64) -> f64 {
        let lv = &self.levels[m - 1];
        let k = -2.0 * s;
        if lv.len() < 1 << 16 {
            return ordered_sum(lv.iter().map(|l| (k * l).exp()));
        }
        let chunks: Vec<f64> = lv
            .par_chunks(1 << 16)
            .map(|c| ordered_sum(c.iter().map(|l| (k * l).exp())))
            .collect();
        ordered_sum(chunks)
    }

    pub fn pressure(&self, s: f64, c_const: Option<f64>) -> PressureEval {
        let f = self.norm.submult_factor();
        let mut zn_roots = Vec::with_capacity(self.depth());
        let mut lower = 0.0f64;
        let mut upper = f64::INFINITY;
        for m in 1..=self.depth() {
            let z = self.z(m, s);
            let inv = 1.0 / m as f64;
            zn_roots.push(z.powf(inv));
            lower = lower.max((f.powf(-2.0 * s) * z).powf(inv));
            if let Some(c) = c_const {
                upper = upper.min(((c / f).powf(-2.0 * s) * z).powf(inv));
            }
        }
        PressureEval {
            s,
            zn_roots,
            lower,
            upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureEval {
    pub s: f64,
    /// `Z_m(s)^{1/m}` for m = 1..=depth.
    pub zn_roots: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

fn check_c(c: Option<f64>) -> Result<()> {
    if let Some(c) = c {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidConstant(c));
        }
    }
    Ok(())
}

/// Lower bound `max_m (f^{−2s} Z_m)^{1/m}` and, given an almost-multiplicativity
/// constant `c`, upper bound `min_m ((c/f)^{−2s} Z_m)^{1/m}`, where `f` makes
/// the chosen norm submultiplicative (1 for the operator norm, 2 for max-entry).
pub fn pressure_bracket(
    cfg: &SystemConfig,
    s: f64,
    depth: usize,
    c_const: Option<f64>,
) -> Result<PressureEval> {
    check_c(c_const)?;
    if !(s >= 0.0) {
        return Err(Error::Usage(format!(
            "exponent must be non-negative, got {s}"
        )));
    }
    let table = LogNormTable::build(cfg, depth)?;
    Ok(table.pressure(s, c_const))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Annotation {
    /// Two words share a product; zeta counts words, not matrices.
    NonFree,
    /// Pressure lower bound still exceeds 1 at the probing cap.
    NonDiscreteAdvisory,
    /// No certified almost-multiplicativity constant was supplied.
    NoCertifiedUpper,
    /// Neither uniform hyperbolicity nor semidiscrete irreducibility was
    /// verified, so the root is not known to equal the critical exponent.
    RelationToDeltaUnverified,
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Annotation::NonFree => "non-free: zeta counts words, not matrices",
            Annotation::NonDiscreteAdvisory => "pressure exceeds 1 at s=5: likely non-discrete",
            Annotation::NoCertifiedUpper => "no certified upper bound",
            Annotation::RelationToDeltaUnverified => "relation to delta unverified",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub depth_used: usize,
    pub certified: bool,
    pub norm: NormKind,
    pub annotations: Vec<Annotation>,
}

impl Bracket {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        if self.hi.is_finite() {
            0.5 * (self.lo + self.hi)
        } else {
            self.lo
        }
    }
}

/// Collision check on the first depth with at most 2048 words.
fn has_collision(cfg: &SystemConfig, depth: usize) -> bool {
    let mut n = 1;
    while n < depth && word_count(cfg.len(), n + 1) <= 2048 {
        n += 1;
    }
    semigroup::diophantine_profile(cfg, n)
        .map(|p| !p.collisions.is_empty())
        .unwrap_or(false)
}

/// Bracket `[s_lo, s_hi]` on the pressure root from a prebuilt table.
pub fn bracket_from_table(table: &LogNormTable, c_const: Option<f64>) -> Result<Bracket> {
    check_c(c_const)?;
    let lower = |s: f64| table.pressure_lower(s);
    let mut annotations = Vec::new();
    let lo = if lower(0.0) <= 1.0 {
        0.0
    } else if lower(S_CAP) > 1.0 {
        annotations.push(Annotation::NonDiscreteAdvisory);
        S_CAP
    } else {
        let (mut a, mut b) = (0.0, S_CAP);
        while b - a > S_TOL {
            let mid = 0.5 * (a + b);
            if lower(mid) > 1.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        a
    };
    let mut hi = f64::INFINITY;
    match c_const {
        None => annotations.push(Annotation::NoCertifiedUpper),
        Some(c) if lo < S_CAP => {
            let upper = |s: f64| table.pressure_upper(s, c);
            let step = 0.05;
            let mut prev = lo;
            let mut found = None;
            let mut s = lo;
            while s <= S_CAP + 1e-12 {
                if upper(s) < 1.0 {
                    found = Some(s);
                    break;
                }
                prev = s;
                s += step;
            }
            if let Some(mut b) = found {
                let mut a = prev.min(b);
                while b - a > S_TOL {
                    let mid = 0.5 * (a + b);
                    if upper(mid) < 1.0 {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                hi = b;
            }
        }
        Some(_) => {}
    }
    Ok(Bracket {
        lo,
        hi,
        depth_used: table.depth(),
        certified: c_const.is_some() && hi.is_finite(),
        norm: table.norm,
        annotations,
    })
}

impl LogNormTable {
    pub fn pressure_lower(&self, s: f64) -> f64 {
        let f = self.norm.submult_factor();
        (1..=self.depth())
            .map(|m| (f.powf(-2.0 * s) * self.z(m, s)).powf(1.0 / m as f64))
            .fold(0.0, f64::max)
    }

    pub fn pressure_upper(&self, s: f64, c: f64) -> f64 {
        let f = self.norm.submult_factor();
        (1..=self.depth())
            .map(|m| ((c / f).powf(-2.0 * s) * self.z(m, s)).powf(1.0 / m as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Certified bracket on the pressure root `s_𝒜`. The table depth is the
/// deepest affordable one not exceeding `depth`.
pub fn critical_exponent_bracket(
    cfg: &SystemConfig,
    depth: usize,
    c_const: Option<f64>,
) -> Result<Bracket> {
    check_c(c_const)?;
    let n = LogNormTable::affordable_depth(cfg.len(), depth, TABLE_LIMIT.min(cfg.word_budget));
    let table = LogNormTable::build(cfg, n)?;
    let mut b = bracket_from_table(&table, c_const)?;
    if has_collision(cfg, depth) {
        b.annotations.insert(0, Annotation::NonFree);
    }
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LowerBoundReason {
    ParabolicPresent,
    NonDiscrete,
    ReducibleFullDimension,
}

impl fmt::Display for LowerBoundReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LowerBoundReason::ParabolicPresent => "parabolic-present",
            LowerBoundReason::NonDiscrete => "non-discrete",
            LowerBoundReason::ReducibleFullDimension => "reducible-full-dimension",
        })
    }
}

/// Depth used when scanning for parabolic words.
const PARABOLIC_SCAN_DEPTH: usize = 4;

/// Cheap structural lower bounds on the critical exponent.
pub fn quick_lower_bounds(cfg: &SystemConfig) -> Vec<(LowerBoundReason, f64)> {
    let mut out = Vec::new();
    let mut depth = 1;
    while depth < PARABOLIC_SCAN_DEPTH && word_count(cfg.len(), depth + 1) <= 4096 {
        depth += 1;
    }
    let mut parabolic = false;
    semigroup::visit_tree(&cfg.alphabet, depth, |w, m| {
        if !parabolic && cfg.classify_word(w, m) == ClassTag::Parabolic {
            parabolic = true;
        }
    });
    if parabolic {
        out.push((LowerBoundReason::ParabolicPresent, 0.5));
    }
    let mut dd = 1;
    while dd < 12 && (1..=dd + 1).map(|m| word_count(cfg.len(), m)).sum::<u64>() <= 1 << 14 {
        dd += 1;
    }
    if let Ok(p) = semigroup::discreteness_profile(cfg, dd) {
        if p.non_discrete_evidence {
            out.push((LowerBoundReason::NonDiscrete, f64::INFINITY));
        }
    }
    if let Ok(v) = subsystems::reducible_dimension(cfg) {
        if matches!(
            v.case,
            ReducibleCase::ParabolicAtRepeller | ReducibleCase::AttractorMeetsRepeller
        ) {
            out.push((LowerBoundReason::ReducibleFullDimension, 1.0));
        }
    }
    out
}

/// Bisects a scalar function known to change sign on `[a, b]`.
pub fn bisect(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let fa = f(a);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// True when a letter is parabolic, used by callers reporting on zeta growth.
pub fn has_parabolic_letter(cfg: &SystemConfig) -> bool {
    cfg.alphabet
        .iter()
        .any(|m| geometry::classify(m) == ClassTag::Parabolic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(a: f64, b: f64, c: f64, d: f64) -> Matrix2 {
        Matrix2::new(a, b, c, d).unwrap()
    }

    fn diag_pair() -> SystemConfig {
        SystemConfig::new(vec![Matrix2::diag(2.0), Matrix2::diag(3.0)]).unwrap()
    }

    fn positive_pair() -> SystemConfig {
        SystemConfig::new(vec![m(2.0, 1.0, 1.0, 1.0), m(1.0, 1.0, 1.0, 2.0)]).unwrap()
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1.0);
        for _ in 0..1000 {
            s.add(1e-17);
        }
        s.add(-1.0);
        assert_abs_diff_eq!(s.value(), 1e-14, epsilon = 1e-20);
    }

    #[test]
    fn zeta_examples() {
        let single = SystemConfig::new(vec![Matrix2::diag(2.0)]).unwrap();
        let (z3, cum) = partial_zeta(&single, 1.0, 3).unwrap();
        assert_abs_diff_eq!(z3, 0.015625, epsilon = 1e-15);
        assert_abs_diff_eq!(cum, 0.328125, epsilon = 1e-15);

        let cfg = diag_pair();
        for &s in &[0.3, 0.5, 1.0] {
            let levels = zeta_levels(&cfg, s, 9).unwrap();
            let base = 4f64.powf(-s) + 9f64.powf(-s);
            for (i, z) in levels.iter().enumerate() {
                let want = base.powi(i as i32 + 1);
                assert!((z / want - 1.0).abs() < 1e-12);
            }
        }

        let par = SystemConfig::new(vec![m(1.0, 1.0, 0.0, 1.0)]).unwrap();
        let levels = zeta_levels(&par, 0.5, 400).unwrap();
        for n in [100usize, 200, 400] {
            assert!((levels[n - 1] * n as f64 - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn table_matches_streaming_sums() {
        let cfg = positive_pair();
        let table = LogNormTable::build(&cfg, 10).unwrap();
        let levels = zeta_levels(&cfg, 0.7, 10).unwrap();
        for (i, z) in levels.iter().enumerate() {
            assert!((table.z(i + 1, 0.7) / z - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pressure_examples() {
        let single = SystemConfig::new(vec![Matrix2::diag(2.0)]).unwrap();
        let p = pressure_bracket(&single, 1.0, 6, Some(1.0)).unwrap();
        assert_abs_diff_eq!(p.lower, 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(p.upper, 0.25, epsilon = 1e-14);
        for r in &p.zn_roots {
            assert_abs_diff_eq!(*r, 0.25, epsilon = 1e-14);
        }

        let p = pressure_bracket(&diag_pair(), 0.5, 10, None).unwrap();
        assert_abs_diff_eq!(p.lower, 5.0 / 6.0, epsilon = 1e-12);
        assert!(p.upper.is_infinite());

        let p = pressure_bracket(&positive_pair(), 0.0, 6, None).unwrap();
        assert_abs_diff_eq!(p.lower, 2.0, epsilon = 1e-12);
        assert!(pressure_bracket(&single, 1.0, 3, Some(0.0)).is_err());
        assert!(pressure_bracket(&single, 1.0, 3, Some(1.5)).is_err());
    }

    fn oracle_root() -> f64 {
        bisect(0.0, 2.0, 1e-12, |s| 4f64.powf(-s) + 9f64.powf(-s) - 1.0)
    }

    #[test]
    fn bracket_examples() {
        let single = SystemConfig::new(vec![Matrix2::diag(2.0)]).unwrap();
        let b = critical_exponent_bracket(&single, 10, Some(1.0)).unwrap();
        assert_eq!(b.lo, 0.0);
        assert!(b.hi <= 2.0 * S_TOL);

        let root = oracle_root();
        let b = critical_exponent_bracket(&diag_pair(), 12, Some(1.0)).unwrap();
        assert!(b.contains(root), "{b:?} vs {root}");
        assert!(b.width() <= 5e-3);
        assert!(b.annotations.contains(&Annotation::NonFree));
        assert_abs_diff_eq!(root, 0.3945, epsilon = 1e-3);
    }

    #[test]
    fn norm_independence_of_brackets() {
        let root = oracle_root();
        let a = critical_exponent_bracket(&diag_pair(), 12, Some(1.0)).unwrap();
        let cfg = diag_pair().with_norm(NormKind::MaxEntry);
        let b = critical_exponent_bracket(&cfg, 12, Some(1.0)).unwrap();
        assert!(b.contains(root));
        assert!(a.lo <= b.hi && b.lo <= a.hi);
    }

    #[test]
    fn supermultiplicativity_and_monotonicity() {
        let cfg = positive_pair();
        for &s in &[0.25, 0.5, 1.0] {
            let z = zeta_levels(&cfg, s, 16).unwrap();
            for l in 1..16 {
                for mm in 1..=(16 - l) {
                    assert!(z[l + mm - 1] >= z[l - 1] * z[mm - 1] * (1.0 - 1e-8));
                }
            }
        }
        let table = LogNormTable::build(&cfg, 10).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let s = i as f64 * 0.05;
            let z = table.z(10, s);
            assert!(z < prev);
            prev = z;
        }
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let p = table.pressure_lower(i as f64 * 0.05);
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn quick_bounds_examples() {
        let single = SystemConfig::new(vec![Matrix2::diag(2.0)]).unwrap();
        assert!(quick_lower_bounds(&single).is_empty());

        let cfg = SystemConfig::new(vec![m(1.0, 1.0, 0.0, 1.0), m(2.0, 1.0, 1.0, 1.0)]).unwrap();
        let q = quick_lower_bounds(&cfg);
        assert!(q.contains(&(LowerBoundReason::ParabolicPresent, 0.5)));

        let l52 = SystemConfig::new(vec![Matrix2::diag(2.0), m(0.5, 1.5, 0.0, 2.0)]).unwrap();
        let q = quick_lower_bounds(&l52);
        assert!(q
            .iter()
            .any(|(r, v)| *r == LowerBoundReason::NonDiscrete && v.is_infinite()));
    }

    #[test]
    fn parabolic_repeller_lower_bound_is_near_one() {
        let cfg = SystemConfig::new(vec![Matrix2::diag(0.5), m(1.0, 1.0, 0.0, 1.0)]).unwrap();
        let b = critical_exponent_bracket(&cfg, 18, None).unwrap();
        assert!(b.lo >= 0.95, "{b:?}");
        assert!(b.hi.is_infinite());
    }
}
