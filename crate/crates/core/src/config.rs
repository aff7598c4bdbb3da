//! Plain-text system and family configuration files.
//!
//! ```text
//! # two positive matrices
//! matrix 2 1 1 1
//! matrix 1 1 1 2
//! probs 1/2 1/2
//! norm op2
//! depth_cap 14
//! seed 7
//! ```
//!
//! Numbers are decimals or fractions `p/q`. A family file writes entries as
//! affine expressions in `t` (`1+t`, `2*t`, `-1/2t`) and adds
//! `grid START END COUNT`.

use std::fmt::Write as _;
use std::path::Path;

use num_rational::Ratio;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::geometry::{Matrix2, NormKind};
use crate::semigroup::SystemConfig;

/// Determinant deviation above which a warning is emitted.
pub const DET_WARN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub config: SystemConfig,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Num {
    Exact(Ratio<i128>),
    Float(f64),
}

impl Num {
    fn value(self) -> f64 {
        match self {
            Num::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Num::Float(x) => x,
        }
    }
}

fn parse_num(tok: &str) -> Option<Num> {
    if let Some((p, q)) = tok.split_once('/') {
        let p: i128 = p.parse().ok()?;
        let q: i128 = q.parse().ok()?;
        if q == 0 {
            return None;
        }
        return Some(Num::Exact(Ratio::new(p, q)));
    }
    if let Ok(i) = tok.parse::<i128>() {
        return Some(Num::Exact(Ratio::from_integer(i)));
    }
    tok.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .map(Num::Float)
}

struct Line<'a> {
    no: usize,
    key: &'a str,
    args: Vec<(usize, &'a str)>,
}

/// Splits into `(line, key, [(column, token)])`, dropping blanks and comments.
fn lines(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        let mut toks = Vec::new();
        let mut start = None;
        for (j, ch) in body.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    toks.push((s + 1, &body[s..j]));
                }
            } else if start.is_none() {
                start = Some(j);
            }
        }
        if let Some(s) = start {
            toks.push((s + 1, &body[s..]));
        }
        if toks.is_empty() {
            continue;
        }
        let key = toks.remove(0).1;
        out.push(Line {
            no: i + 1,
            key,
            args: toks,
        });
    }
    out
}

struct Ctx<'a> {
    path: &'a str,
}

impl Ctx<'_> {
    fn err(&self, line: usize, column: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            line,
            column,
            message: message.into(),
        }
    }

    fn end_col(&self, l: &Line<'_>) -> usize {
        l.args
            .last()
            .map(|(c, t)| c + t.len())
            .unwrap_or(l.key.len() + 1)
    }

    fn one<'b>(&self, l: &Line<'b>) -> Result<(usize, &'b str)> {
        match l.args.as_slice() {
            [x] => Ok(*x),
            [] => Err(self.err(l.no, self.end_col(l), format!("`{}` needs a value", l.key))),
            [_, (c, _), ..] => Err(self.err(l.no, *c, format!("`{}` takes one value", l.key))),
        }
    }
}

#[derive(Default)]
struct Settings {
    probs: Option<Vec<f64>>,
    norm: Option<NormKind>,
    depth_cap: Option<usize>,
    seed: Option<u64>,
}

fn parse_setting(ctx: &Ctx<'_>, l: &Line<'_>, s: &mut Settings) -> Result<bool> {
    match l.key {
        "probs" => {
            let mut v = Vec::new();
            for &(c, t) in &l.args {
                let x = parse_num(t)
                    .ok_or_else(|| ctx.err(l.no, c, format!("invalid number `{t}`")))?;
                v.push(x.value());
            }
            if v.is_empty() {
                return Err(ctx.err(l.no, ctx.end_col(l), "`probs` needs values"));
            }
            s.probs = Some(v);
        }
        "norm" => {
            let (c, t) = ctx.one(l)?;
            s.norm = Some(t.parse().map_err(|e: String| ctx.err(l.no, c, e))?);
        }
        "depth_cap" => {
            let (c, t) = ctx.one(l)?;
            s.depth_cap = Some(
                t.parse()
                    .map_err(|_| ctx.err(l.no, c, format!("invalid depth `{t}`")))?,
            );
        }
        "seed" => {
            let (c, t) = ctx.one(l)?;
            s.seed = Some(
                t.parse()
                    .map_err(|_| ctx.err(l.no, c, format!("invalid seed `{t}`")))?,
            );
        }
        _ => return Ok(false),
    }
    Ok(true)
}

fn apply_settings(
    ctx: &Ctx<'_>,
    mut cfg: SystemConfig,
    s: Settings,
    probs_line: usize,
) -> Result<SystemConfig> {
    if let Some(n) = s.norm {
        cfg.norm = n;
    }
    if let Some(d) = s.depth_cap {
        cfg.depth_cap = d;
    }
    if let Some(seed) = s.seed {
        cfg.seed = seed;
    }
    if let Some(p) = s.probs {
        cfg = cfg
            .with_probs(p)
            .map_err(|e| ctx.err(probs_line, 1, e.to_string()))?;
    }
    Ok(cfg)
}

pub fn parse_config_str(text: &str, path: &str) -> Result<Parsed> {
    let ctx = Ctx { path };
    let mut alphabet = Vec::new();
    let mut exact: Option<Vec<[Ratio<i128>; 4]>> = Some(Vec::new());
    let mut warnings = Vec::new();
    let mut settings = Settings::default();
    let mut probs_line = 0;
    for l in lines(text) {
        if l.key == "matrix" {
            if l.args.len() != 4 {
                let col = l
                    .args
                    .get(4)
                    .map(|a| a.0)
                    .unwrap_or_else(|| ctx.end_col(&l));
                return Err(ctx.err(
                    l.no,
                    col,
                    format!("matrix row needs 4 numbers, found {}", l.args.len()),
                ));
            }
            let mut nums = [Num::Float(0.0); 4];
            for (k, &(c, t)) in l.args.iter().enumerate() {
                nums[k] = parse_num(t)
                    .ok_or_else(|| ctx.err(l.no, c, format!("invalid number `{t}`")))?;
            }
            let v = nums.map(Num::value);
            let det = v[0] * v[3] - v[1] * v[2];
            let m = Matrix2::new(v[0], v[1], v[2], v[3])
                .map_err(|e| ctx.err(l.no, l.args[0].0, e.to_string()))?;
            if (det - 1.0).abs() > DET_WARN_TOL {
                warnings.push(format!(
                    "{path}:{}: determinant {det} renormalized by 1/sqrt({det})",
                    l.no
                ));
            }
            exact = match (exact, nums) {
                (Some(mut ex), [Num::Exact(a), Num::Exact(b), Num::Exact(c), Num::Exact(d)])
                    if a * d - b * c == Ratio::from_integer(1) =>
                {
                    ex.push([a, b, c, d]);
                    Some(ex)
                }
                _ => None,
            };
            alphabet.push(m);
        } else {
            if l.key == "probs" {
                probs_line = l.no;
            }
            if !parse_setting(&ctx, &l, &mut settings)? {
                return Err(ctx.err(l.no, 1, format!("unknown key `{}`", l.key)));
            }
        }
    }
    if alphabet.is_empty() {
        return Err(ctx.err(1, 1, "no `matrix` rows"));
    }
    let mut cfg = SystemConfig::new(alphabet)?;
    cfg.exact = exact;
    let config = apply_settings(&ctx, cfg, settings, probs_line)?;
    Ok(Parsed { config, warnings })
}

pub fn parse_config(path: &Path) -> Result<Parsed> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, &path.display().to_string())
}

fn fmt_ratio(r: &Ratio<i128>) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Text that [`parse_config_str`] reads back to `cfg`.
pub fn emit_config(cfg: &SystemConfig) -> String {
    let mut out = String::new();
    match &cfg.exact {
        Some(ex) => {
            for e in ex {
                let _ = writeln!(
                    out,
                    "matrix {}",
                    e.iter().map(fmt_ratio).collect::<Vec<_>>().join(" ")
                );
            }
        }
        None => {
            for m in &cfg.alphabet {
                let _ = writeln!(out, "matrix {:?} {:?} {:?} {:?}", m.a, m.b, m.c, m.d);
            }
        }
    }
    if let Some(p) = &cfg.probs {
        let _ = writeln!(
            out,
            "probs {}",
            p.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(" ")
        );
    }
    let _ = writeln!(out, "norm {}", cfg.norm);
    let _ = writeln!(out, "depth_cap {}", cfg.depth_cap);
    let _ = writeln!(out, "seed {}", cfg.seed);
    out
}

/// `constant + slope·t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub constant: f64,
    pub slope: f64,
}

impl Affine {
    pub fn at(&self, t: f64) -> f64 {
        self.constant + self.slope * t
    }
}

pub fn parse_affine(expr: &str) -> Option<Affine> {
    let mut out = Affine {
        constant: 0.0,
        slope: 0.0,
    };
    let bytes = expr.as_bytes();
    let mut i = 0;
    let mut any = false;
    while i < bytes.len() {
        let mut sign = 1.0;
        if bytes[i] == b'+' || bytes[i] == b'-' {
            if bytes[i] == b'-' {
                sign = -1.0;
            }
            i += 1;
        } else if any {
            return None;
        }
        let start = i;
        while i < bytes.len() && bytes[i] != b'+' && bytes[i] != b'-' {
            // exponent signs belong to the number
            if (bytes[i] == b'e' || bytes[i] == b'E') && i + 1 < bytes.len() && i > start {
                i += 1;
            }
            i += 1;
        }
        let term = &expr[start..i];
        if term.is_empty() {
            return None;
        }
        if let Some(coef) = term.strip_suffix('t') {
            let coef = coef.strip_suffix('*').unwrap_or(coef);
            let c = if coef.is_empty() {
                1.0
            } else {
                parse_num(coef)?.value()
            };
            out.slope += sign * c;
        } else {
            out.constant += sign * parse_num(term)?.value();
        }
        any = true;
    }
    any.then_some(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub matrices: Vec<[Affine; 4]>,
    pub grid: Vec<f64>,
    /// Settings applied to every member.
    pub base: SystemConfig,
}

impl Family {
    /// The member at parameter `t`, renormalized to unit determinant.
    pub fn at(&self, t: f64) -> Result<SystemConfig> {
        let alphabet = self
            .matrices
            .iter()
            .map(|e| Matrix2::new(e[0].at(t), e[1].at(t), e[2].at(t), e[3].at(t)))
            .collect::<Result<Vec<_>>>()?;
        let mut cfg = self.base.with_alphabet(alphabet)?;
        cfg.probs = self.base.probs.clone();
        Ok(cfg)
    }
}

pub fn parse_family_str(text: &str, path: &str) -> Result<Family> {
    let ctx = Ctx { path };
    let mut matrices = Vec::new();
    let mut grid = None;
    let mut settings = Settings::default();
    let mut probs_line = 0;
    for l in lines(text) {
        match l.key {
            "matrix" => {
                if l.args.len() != 4 {
                    return Err(ctx.err(
                        l.no,
                        ctx.end_col(&l),
                        format!("matrix row needs 4 entries, found {}", l.args.len()),
                    ));
                }
                let mut e = [Affine {
                    constant: 0.0,
                    slope: 0.0,
                }; 4];
                for (k, &(c, t)) in l.args.iter().enumerate() {
                    e[k] = parse_affine(t)
                        .ok_or_else(|| ctx.err(l.no, c, format!("invalid affine entry `{t}`")))?;
                }
                matrices.push(e);
            }
            "grid" => {
                if l.args.len() != 3 {
                    return Err(ctx.err(l.no, ctx.end_col(&l), "grid needs START END COUNT"));
                }
                let a = parse_num(l.args[0].1)
                    .ok_or_else(|| ctx.err(l.no, l.args[0].0, "invalid start"))?;
                let b = parse_num(l.args[1].1)
                    .ok_or_else(|| ctx.err(l.no, l.args[1].0, "invalid end"))?;
                let n: usize = l.args[2]
                    .1
                    .parse()
                    .ok()
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| ctx.err(l.no, l.args[2].0, "invalid count"))?;
                let (a, b) = (a.value(), b.value());
                grid = Some(if n == 1 {
                    vec![a]
                } else {
                    (0..n)
                        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                        .collect()
                });
            }
            _ => {
                if l.key == "probs" {
                    probs_line = l.no;
                }
                if !parse_setting(&ctx, &l, &mut settings)? {
                    return Err(ctx.err(l.no, 1, format!("unknown key `{}`", l.key)));
                }
            }
        }
    }
    if matrices.is_empty() {
        return Err(ctx.err(1, 1, "no `matrix` rows"));
    }
    let grid = grid.ok_or_else(|| ctx.err(1, 1, "missing `grid` line"))?;
    let placeholder = vec![Matrix2::IDENTITY; matrices.len()];
    let base = apply_settings(&ctx, SystemConfig::new(placeholder)?, settings, probs_line)?;
    Ok(Family {
        matrices,
        grid,
        base,
    })
}

pub fn parse_family(path: &Path) -> Result<Family> {
    let text = std::fs::read_to_string(path)?;
    parse_family_str(&text, &path.display().to_string())
}
