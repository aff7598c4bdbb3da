//! Words over the alphabet, streaming enumeration of their products, and
//! finite-depth profiles of freeness, Diophantine separation and discreteness.

use std::fmt;
use std::time::Instant;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Progress, Result};
use crate::geometry::{self, ClassTag, Matrix2, NormKind, ProjPoint};

/// Default cap on the number of words a single enumeration may visit.
pub const DEFAULT_WORD_BUDGET: u64 = 1 << 27;
/// Distances below this count as collisions (numerically equal products).
pub const COLLISION_TOL: f64 = 1e-10;

/// A non-empty sequence of 0-based alphabet indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn product(&self, alphabet: &[Matrix2]) -> Matrix2 {
        self.0
            .iter()
            .fold(Matrix2::IDENTITY, |acc, &i| acc * alphabet[i])
    }
}

/// Letters print 1-based; digits are concatenated when every letter is below 10.
impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let compact = self.0.iter().all(|&i| i < 9);
        for (k, i) in self.0.iter().enumerate() {
            if !compact && k > 0 {
                f.write_str(".")?;
            }
            write!(f, "{}", i + 1)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub alphabet: Vec<Matrix2>,
    pub probs: Option<Vec<f64>>,
    pub norm: NormKind,
    pub depth_cap: usize,
    pub seed: u64,
    /// Exact entries, kept when every letter was given as fractions and the
    /// config asked for exact classification.
    pub exact: Option<Vec<[Ratio<i128>; 4]>>,
    pub word_budget: u64,
}

impl SystemConfig {
    pub fn new(alphabet: Vec<Matrix2>) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        Ok(SystemConfig {
            alphabet,
            probs: None,
            norm: NormKind::Operator2,
            depth_cap: 14,
            seed: 0,
            exact: None,
            word_budget: DEFAULT_WORD_BUDGET,
        })
    }

    pub fn with_probs(mut self, probs: Vec<f64>) -> Result<Self> {
        validate_probs(&probs, self.alphabet.len())?;
        self.probs = Some(probs);
        Ok(self)
    }

    pub fn with_norm(mut self, norm: NormKind) -> Self {
        self.norm = norm;
        self
    }

    pub fn len(&self) -> usize {
        self.alphabet.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphabet.is_empty()
    }

    /// The alphabet of inverses; its attractor is the repeller of `self`.
    pub fn inverted(&self) -> Self {
        let mut inv = self.clone();
        inv.alphabet = self.alphabet.iter().map(Matrix2::inverse).collect();
        inv.exact = self
            .exact
            .as_ref()
            .map(|ex| ex.iter().map(|e| [e[3], -e[1], -e[2], e[0]]).collect());
        inv
    }

    /// Same settings over a different alphabet; exact entries are dropped.
    pub fn with_alphabet(&self, alphabet: Vec<Matrix2>) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        let mut cfg = self.clone();
        cfg.alphabet = alphabet;
        cfg.probs = None;
        cfg.exact = None;
        Ok(cfg)
    }

    pub fn check_budget(&self, depth: usize, count: u64) -> Result<()> {
        if count > self.word_budget {
            return Err(Error::BudgetExceeded(Progress {
                depth,
                visited: 0,
                requested: count,
                elapsed: std::time::Duration::ZERO,
            }));
        }
        Ok(())
    }

    /// Classification of a word product, exact when rational entries are kept.
    pub fn classify_word(&self, word: &[usize], m: &Matrix2) -> ClassTag {
        let tag = geometry::classify(m);
        if let Some(ex) = &self.exact {
            if (m.trace().abs() - 2.0).abs() < 1e-6 {
                if let Some(e) = exact_product(ex, word) {
                    return geometry::classify_rational(e);
                }
            }
        }
        tag
    }
}

pub fn validate_probs(probs: &[f64], n: usize) -> Result<()> {
    if probs.len() != n {
        return Err(Error::BadProbs(format!(
            "{} probabilities for {} matrices",
            probs.len(),
            n
        )));
    }
    if probs.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::BadProbs("every probability must be positive".into()));
    }
    let s: f64 = probs.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::BadProbs(format!("probabilities sum to {s}")));
    }
    Ok(())
}

fn exact_product(ex: &[[Ratio<i128>; 4]], word: &[usize]) -> Option<[Ratio<i128>; 4]> {
    let one = Ratio::from_integer(1);
    let zero = Ratio::from_integer(0);
    let mut acc = [one, zero, zero, one];
    for &i in word {
        let e = &ex[i];
        let mul = |x: Ratio<i128>, y: Ratio<i128>| x.checked_mul(&y);
        let add = |x: Ratio<i128>, y: Ratio<i128>| x.checked_add(&y);
        acc = [
            add(mul(acc[0], e[0])?, mul(acc[1], e[2])?)?,
            add(mul(acc[0], e[1])?, mul(acc[1], e[3])?)?,
            add(mul(acc[2], e[0])?, mul(acc[3], e[2])?)?,
            add(mul(acc[2], e[1])?, mul(acc[3], e[3])?)?,
        ];
    }
    Some(acc)
}

/// Number of words of length `n`, saturating.
pub fn word_count(k: usize, n: usize) -> u64 {
    let mut c: u64 = 1;
    for _ in 0..n {
        c = c.saturating_mul(k as u64);
    }
    c
}

/// Visits every length-`rem` extension of `prefix` in lexicographic order,
/// passing the full letter sequence and its left-to-right product.
pub fn visit_extensions<F>(
    alphabet: &[Matrix2],
    prefix: &[usize],
    prefix_m: Matrix2,
    rem: usize,
    mut f: F,
) where
    F: FnMut(&[usize], &Matrix2),
{
    let p = prefix.len();
    let n = p + rem;
    let mut idx = prefix.to_vec();
    idx.resize(n, 0);
    let mut prods = vec![prefix_m; rem + 1];
    for t in 0..rem {
        prods[t + 1] = prods[t] * alphabet[0];
    }
    let k = alphabet.len();
    loop {
        f(&idx, &prods[rem]);
        let mut j = rem;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            idx[p + j] += 1;
            if idx[p + j] < k {
                break;
            }
            idx[p + j] = 0;
        }
        for t in j..rem {
            prods[t + 1] = prods[t] * alphabet[idx[p + t]];
        }
    }
}

/// Visits every word of length 1..=n in depth-first preorder (each word
/// before its extensions, siblings in lexicographic order).
pub fn visit_tree<F>(alphabet: &[Matrix2], n: usize, mut f: F)
where
    F: FnMut(&[usize], &Matrix2),
{
    if n == 0 {
        return;
    }
    let k = alphabet.len();
    let mut idx: Vec<usize> = Vec::with_capacity(n);
    let mut prods: Vec<Matrix2> = Vec::with_capacity(n + 1);
    prods.push(Matrix2::IDENTITY);
    idx.push(0);
    prods.push(alphabet[0]);
    loop {
        f(&idx, prods.last().unwrap());
        if idx.len() < n {
            idx.push(0);
            let m = prods[idx.len() - 1] * alphabet[0];
            prods.push(m);
            continue;
        }
        loop {
            let last = idx.len() - 1;
            idx[last] += 1;
            prods.pop();
            if idx[last] < k {
                let m = prods[last] * alphabet[idx[last]];
                prods.push(m);
                break;
            }
            idx.pop();
            if idx.is_empty() {
                return;
            }
        }
    }
}

/// All words of length `p` with their products, in lexicographic order.
pub fn prefixes(alphabet: &[Matrix2], p: usize) -> Vec<(Vec<usize>, Matrix2)> {
    if p == 0 {
        return vec![(Vec::new(), Matrix2::IDENTITY)];
    }
    let mut out = Vec::with_capacity(word_count(alphabet.len(), p) as usize);
    visit_extensions(alphabet, &[], Matrix2::IDENTITY, p, |w, m| {
        out.push((w.to_vec(), *m))
    });
    out
}

/// Prefix length used to split the word tree into independent partitions.
/// Depends only on the alphabet size, never on the thread count.
pub fn partition_depth(k: usize, n: usize) -> usize {
    let mut p = 0;
    while p < n && word_count(k, p) < 64 {
        p += 1;
    }
    p
}

/// Runs `work` on each partition of the length-`n` words in parallel and
/// returns the per-partition results in lexicographic partition order.
pub fn map_partitions<T, F>(alphabet: &[Matrix2], n: usize, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[usize], Matrix2, usize) -> T + Sync,
{
    let p = partition_depth(alphabet.len(), n);
    let parts = prefixes(alphabet, p);
    parts.par_iter().map(|(w, m)| work(w, *m, n - p)).collect()
}

/// Streaming iterator over `(Word, product)` for all words of length `n`.
/// Yields an error carrying the progress so far once the budget is spent.
pub struct WordStream<'a> {
    alphabet: &'a [Matrix2],
    n: usize,
    idx: Vec<usize>,
    prods: Vec<Matrix2>,
    started: bool,
    done: bool,
    visited: u64,
    budget: u64,
    start: Instant,
}

impl Iterator for WordStream<'_> {
    type Item = Result<(Word, Matrix2)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if self.started {
            let k = self.alphabet.len();
            let mut j = self.n;
            loop {
                if j == 0 {
                    self.done = true;
                    return None;
                }
                j -= 1;
                self.idx[j] += 1;
                if self.idx[j] < k {
                    break;
                }
                self.idx[j] = 0;
            }
            for t in j..self.n {
                self.prods[t + 1] = self.prods[t] * self.alphabet[self.idx[t]];
            }
        }
        self.started = true;
        if self.visited >= self.budget {
            self.done = true;
            return Some(Err(Error::BudgetExceeded(Progress {
                depth: self.n,
                visited: self.visited,
                requested: word_count(self.alphabet.len(), self.n),
                elapsed: self.start.elapsed(),
            })));
        }
        self.visited += 1;
        Some(Ok((Word(self.idx.clone()), self.prods[self.n])))
    }
}

pub fn enumerate_words(cfg: &SystemConfig, n: usize) -> WordStream<'_> {
    assert!(n >= 1, "word length must be at least 1");
    let mut prods = vec![Matrix2::IDENTITY; n + 1];
    for t in 0..n {
        prods[t + 1] = prods[t] * cfg.alphabet[0];
    }
    WordStream {
        alphabet: &cfg.alphabet,
        n,
        idx: vec![0; n],
        prods,
        started: false,
        done: false,
        visited: 0,
        budget: cfg.word_budget,
        start: Instant::now(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistBranch {
    /// Frobenius norm of the real logarithm.
    Log,
    /// Frobenius norm of `A⁻¹B − I`.
    Linear,
}

impl fmt::Display for DistBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistBranch::Log => "log",
            DistBranch::Linear => "linear",
        })
    }
}

/// Left-invariant distance `‖log(A⁻¹B)‖_F`, with a linear fallback when no
/// real logarithm is available.
pub fn left_invariant_dist(a: &Matrix2, b: &Matrix2) -> (f64, DistBranch) {
    let ai = a.inverse();
    let m = Matrix2 {
        a: ai.a * b.a + ai.b * b.c,
        b: ai.a * b.b + ai.b * b.d,
        c: ai.c * b.a + ai.d * b.c,
        d: ai.c * b.b + ai.d * b.d,
    };
    let t = m.trace() / 2.0;
    let frob = |x: f64, y: f64, z: f64, w: f64| (x * x + y * y + z * z + w * w).sqrt();
    if t > 0.0 {
        let factor = if t > 1.0 {
            let mu = t.acosh();
            if mu < 1e-6 {
                1.0 - mu * mu / 6.0
            } else {
                mu / mu.sinh()
            }
        } else if t < 1.0 {
            let w = t.acos();
            if w < 1e-6 {
                1.0 + w * w / 6.0
            } else {
                w / w.sin()
            }
        } else {
            1.0
        };
        let d = factor * frob(m.a - t, m.b, m.c, m.d - t);
        (d, DistBranch::Log)
    } else {
        (frob(m.a - 1.0, m.b, m.c, m.d - 1.0), DistBranch::Linear)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRecord {
    pub n: usize,
    pub min_distance: f64,
    pub pair: Option<(Word, Word)>,
    pub branch: Option<DistBranch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiophantineProfile {
    pub records: Vec<DepthRecord>,
    pub fitted_c: Option<f64>,
    pub collisions: Vec<(Word, Word, f64)>,
    pub metric: String,
}

/// Exact all-pairs search is used up to this many words per depth.
pub const EXACT_PAIRS_LIMIT: usize = 4096;
const WINDOW: usize = 48;
const MAX_COLLISIONS: usize = 256;

fn squash(x: f64) -> u64 {
    let u = 0.5 + x.atan() / std::f64::consts::PI;
    ((u * 65535.0).round() as u64).min(65535)
}

fn morton(e: [f64; 4]) -> u64 {
    let q = [squash(e[0]), squash(e[1]), squash(e[2]), squash(e[3])];
    let mut key = 0u64;
    for bit in (0..16).rev() {
        for v in q {
            key = (key << 1) | ((v >> bit) & 1);
        }
    }
    key
}

struct PairScan {
    best: f64,
    pair: Option<(usize, usize)>,
    branch: Option<DistBranch>,
    collisions: Vec<(usize, usize, f64)>,
}

fn scan_pairs(mats: &[Matrix2], skip_collisions: bool) -> PairScan {
    let mut out = PairScan {
        best: f64::INFINITY,
        pair: None,
        branch: None,
        collisions: Vec::new(),
    };
    let consider = |i: usize, j: usize, out: &mut PairScan| {
        let (d, br) = left_invariant_dist(&mats[i], &mats[j]);
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        if d < COLLISION_TOL {
            if out.collisions.len() < MAX_COLLISIONS
                && !out.collisions.iter().any(|&(a, b, _)| a == i && b == j)
            {
                out.collisions.push((i, j, d));
            }
            if skip_collisions {
                return;
            }
        }
        if d < out.best || (d == out.best && Some((i, j)) < out.pair) {
            out.best = d;
            out.pair = Some((i, j));
            out.branch = Some(br);
        }
    };
    let n = mats.len();
    if n <= EXACT_PAIRS_LIMIT {
        for i in 0..n {
            for j in i + 1..n {
                consider(i, j, &mut out);
            }
        }
    } else {
        for order in [[0usize, 1, 2, 3], [3, 2, 1, 0]] {
            let mut keys: Vec<(u64, usize)> = mats
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let e = m.entries();
                    (
                        morton([e[order[0]], e[order[1]], e[order[2]], e[order[3]]]),
                        i,
                    )
                })
                .collect();
            keys.sort_unstable();
            for s in 0..n {
                for t in s + 1..(s + 1 + WINDOW).min(n) {
                    consider(keys[s].1, keys[t].1, &mut out);
                }
            }
        }
    }
    out
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Least-squares fit `y ≈ slope·x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    fit_slope(xs, ys)
}

fn words_at(cfg: &SystemConfig, n: usize) -> Result<(Vec<Vec<usize>>, Vec<Matrix2>)> {
    cfg.check_budget(n, word_count(cfg.len(), n))?;
    let mut words = Vec::new();
    let mut mats = Vec::new();
    visit_extensions(&cfg.alphabet, &[], Matrix2::IDENTITY, n, |w, m| {
        words.push(w.to_vec());
        mats.push(*m);
    });
    Ok((words, mats))
}

pub fn diophantine_profile(cfg: &SystemConfig, n_max: usize) -> Result<DiophantineProfile> {
    let mut records = Vec::new();
    let mut collisions = Vec::new();
    for n in 1..=n_max {
        let (words, mats) = words_at(cfg, n)?;
        if mats.len() < 2 {
            records.push(DepthRecord {
                n,
                min_distance: f64::INFINITY,
                pair: None,
                branch: None,
            });
            continue;
        }
        let scan = scan_pairs(&mats, false);
        for &(i, j, d) in &scan.collisions {
            if collisions.len() < MAX_COLLISIONS {
                collisions.push((Word(words[i].clone()), Word(words[j].clone()), d));
            }
        }
        records.push(DepthRecord {
            n,
            min_distance: scan.best,
            pair: scan
                .pair
                .map(|(i, j)| (Word(words[i].clone()), Word(words[j].clone()))),
            branch: scan.branch,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter(|r| r.n >= 3 && r.min_distance > 0.0 && r.min_distance.is_finite())
        .map(|r| (r.n as f64, r.min_distance.ln()))
        .unzip();
    let fitted_c = fit_slope(&xs, &ys).map(|(slope, _)| slope.exp().min(1.0));
    Ok(DiophantineProfile {
        records,
        fitted_c,
        collisions,
        metric: "frobenius-log".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteRecord {
    pub n: usize,
    /// Minimum distance from a length-`n` product to ±Id.
    pub identity_distance: f64,
    /// Running minimum of `identity_distance` over lengths ≤ n.
    pub cumulative_identity: f64,
    /// Minimum left-invariant distance between numerically distinct products
    /// of length ≤ n whose norm is at most the profile radius.
    pub bounded_pair_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretenessProfile {
    pub radius: f64,
    pub records: Vec<DiscreteRecord>,
    /// Closest approach to ±Id: the word and its distance.
    pub identity_witness: Option<(Word, f64)>,
    pub non_discrete_evidence: bool,
}

impl DiscretenessProfile {
    pub fn min_identity_distance(&self) -> f64 {
        self.identity_witness
            .as_ref()
            .map(|w| w.1)
            .unwrap_or(f64::INFINITY)
    }
}

/// Threshold on the bounded-norm pair distance treated as accumulation.
pub const ACCUMULATION_TOL: f64 = 1e-2;

pub fn discreteness_profile(cfg: &SystemConfig, n_max: usize) -> Result<DiscretenessProfile> {
    discreteness_profile_with_radius(cfg, n_max, 4.0)
}

pub fn discreteness_profile_with_radius(
    cfg: &SystemConfig,
    n_max: usize,
    radius: f64,
) -> Result<DiscretenessProfile> {
    let total: u64 = (1..=n_max)
        .map(|n| word_count(cfg.len(), n))
        .fold(0, u64::saturating_add);
    cfg.check_budget(n_max, total)?;
    let mut per_depth = vec![(f64::INFINITY, Vec::new()); n_max + 1];
    let mut bounded: Vec<(usize, Matrix2)> = Vec::new();
    visit_tree(&cfg.alphabet, n_max, |w, m| {
        let p = m.a - 1.0;
        let q = m.d - 1.0;
        let plus = (p * p + m.b * m.b + m.c * m.c + q * q).sqrt();
        let r = m.a + 1.0;
        let s = m.d + 1.0;
        let minus = (r * r + m.b * m.b + m.c * m.c + s * s).sqrt();
        let d = plus.min(minus);
        let slot = &mut per_depth[w.len()];
        if d < slot.0 {
            *slot = (d, w.to_vec());
        }
        if m.norm(NormKind::Operator2) <= radius {
            bounded.push((w.len(), *m));
        }
    });
    let mut records = Vec::new();
    let mut cumulative = f64::INFINITY;
    let mut witness: Option<(Word, f64)> = None;
    for n in 1..=n_max {
        let (d, w) = &per_depth[n];
        if *d < cumulative {
            cumulative = *d;
            witness = Some((Word(w.clone()), *d));
        }
        let mats: Vec<Matrix2> = bounded
            .iter()
            .filter(|(len, _)| *len <= n)
            .map(|(_, m)| *m)
            .collect();
        let bp = if mats.len() >= 2 {
            scan_pairs(&mats, true).best
        } else {
            f64::INFINITY
        };
        records.push(DiscreteRecord {
            n,
            identity_distance: *d,
            cumulative_identity: cumulative,
            bounded_pair_distance: bp,
        });
    }
    let last = records
        .last()
        .map(|r| r.bounded_pair_distance)
        .unwrap_or(f64::INFINITY);
    let mid = records
        .get(records.len() / 2)
        .map(|r| r.bounded_pair_distance)
        .unwrap_or(f64::INFINITY);
    let non_discrete_evidence = cumulative < 1e-9 || (last < ACCUMULATION_TOL && last < mid);
    Ok(DiscretenessProfile {
        radius,
        records,
        identity_witness: witness,
        non_discrete_evidence,
    })
}

/// Every point fixed by all letters (within 1e−9), ordered by angle.
pub fn common_fixed_points(cfg: &SystemConfig) -> Vec<ProjPoint> {
    let Some(first) = cfg
        .alphabet
        .iter()
        .find(|m| geometry::classify(m) != ClassTag::Identity)
    else {
        return vec![ProjPoint::new(std::f64::consts::PI)];
    };
    let fp = geometry::fixed_points(first);
    let mut cands: Vec<ProjPoint> = [fp.attracting, fp.repelling, fp.parabolic_point]
        .into_iter()
        .flatten()
        .filter(|p| {
            cfg.alphabet
                .iter()
                .all(|m| geometry::proj_act(m, *p).dist(*p) <= 1e-9)
        })
        .collect();
    cands.sort_by(|a, b| a.theta().total_cmp(&b.theta()));
    cands
}

pub fn common_fixed_point(cfg: &SystemConfig) -> Option<ProjPoint> {
    common_fixed_points(cfg).into_iter().next()
}
