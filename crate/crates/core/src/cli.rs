//! Command-line front end. Every subcommand writes one CSV (stdout when no
//! `--out` directory is given) and a run manifest.
//!
//! Exit codes: 0 success, 2 inconclusive certification, 1 error.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::attractor::{self, PointCloud};
use crate::bundled;
use crate::config::{self, Family};
use crate::error::{Error, Result};
use crate::furstenberg;
use crate::geometry::{self, ClassTag, NormKind, ProjPoint};
use crate::multicone::{self, Containment, SemidiscreteVerdict};
use crate::semigroup::{self, SystemConfig};
use crate::spectral::{self, Annotation, Bracket, LogNormTable};
use crate::subsystems::{self, ReducibleDimension};

#[derive(Debug, Parser)]
#[command(
    name = "projifs",
    version,
    about = "Attractors, dimension and hyperbolicity of projective matrix IFS"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// System configuration file (a family file for scan-continuity).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bundled example instead of a file.
    #[arg(long, conflicts_with = "config")]
    pub example: Option<String>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// op2 or max.
    #[arg(long)]
    pub norm: Option<NormKind>,
    /// Directory for CSV, SVG and manifest output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write an SVG figure (requires --out).
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Class, trace and fixed points of every letter.
    Classify(Common),
    /// Every word up to the depth with its norm and class.
    Enumerate(Common),
    /// Level sums of the zeta function at exponent s.
    Zeta {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        s: f64,
    },
    /// Pressure bounds at exponent s.
    Pressure {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        s: f64,
    },
    /// Bracket on the critical exponent.
    Critexp(Common),
    /// Attractor point cloud; orbit sampling when --samples is given.
    Attractor(Common),
    /// Repeller point cloud.
    Repeller(Common),
    /// Box dimension of the attractor against the predicted min{1, δ}.
    Dimension(Common),
    /// Invariant multicone and uniform hyperbolicity constants.
    CertifyUh(Common),
    /// Semidiscreteness verdict.
    CertifySd(Common),
    /// Minimum word separation per depth.
    Diophantine(Common),
    /// Stationary measure sample against the attractor.
    Furstenberg(Common),
    /// Pivot word and intervals for the hyperbolic subsystem.
    Pivot(Common),
    /// Certified lower bounds from the subsystems Γ_n.
    LowerBound(Common),
    /// Removes finite-order elliptic letters.
    Reduce(Common),
    /// Dimension along a one-parameter family.
    ScanContinuity(Common),
    /// Summary of the main diagnostics.
    Report(Common),
    /// Re-runs the command recorded in a manifest.
    Replay {
        /// A `manifest.json` written by an earlier run.
        manifest: PathBuf,
        /// Where to write the outputs; defaults to the recorded directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Classify(_) => "classify",
            Command::Enumerate(_) => "enumerate",
            Command::Zeta { .. } => "zeta",
            Command::Pressure { .. } => "pressure",
            Command::Critexp(_) => "critexp",
            Command::Attractor(_) => "attractor",
            Command::Repeller(_) => "repeller",
            Command::Dimension(_) => "dimension",
            Command::CertifyUh(_) => "certify-uh",
            Command::CertifySd(_) => "certify-sd",
            Command::Diophantine(_) => "diophantine",
            Command::Furstenberg(_) => "furstenberg",
            Command::Pivot(_) => "pivot",
            Command::LowerBound(_) => "lower-bound",
            Command::Reduce(_) => "reduce",
            Command::ScanContinuity(_) => "scan-continuity",
            Command::Report(_) => "report",
            Command::Replay { .. } => "replay",
        }
    }

    fn common(&self) -> Option<&Common> {
        match self {
            Command::Classify(c)
            | Command::Enumerate(c)
            | Command::Critexp(c)
            | Command::Attractor(c)
            | Command::Repeller(c)
            | Command::Dimension(c)
            | Command::CertifyUh(c)
            | Command::CertifySd(c)
            | Command::Diophantine(c)
            | Command::Furstenberg(c)
            | Command::Pivot(c)
            | Command::LowerBound(c)
            | Command::Reduce(c)
            | Command::ScanContinuity(c)
            | Command::Report(c) => Some(c),
            Command::Zeta { common, .. } | Command::Pressure { common, .. } => Some(common),
            Command::Replay { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name; enough to repeat the run.
    pub argv: Vec<String>,
    pub config: Option<String>,
    pub version: String,
    pub seed: Option<u64>,
    pub wall_time_secs: f64,
    pub outputs: Vec<String>,
    pub exit_code: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Inconclusive,
}

impl Status {
    fn code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Inconclusive => 2,
        }
    }
}

struct Output {
    dir: Option<PathBuf>,
    files: Vec<String>,
}

impl Output {
    fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d)?;
        }
        Ok(Output {
            dir,
            files: Vec::new(),
        })
    }

    /// Writes into the output directory, or to stdout for CSV without one.
    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        match &self.dir {
            Some(d) => {
                std::fs::write(d.join(name), content)?;
                self.files.push(name.to_string());
            }
            None if name.ends_with(".csv") => print!("{content}"),
            None => {}
        }
        Ok(())
    }
}

struct Csv(String);

impl Csv {
    fn new(header: &[&str]) -> Self {
        Csv(format!("{}\n", header.join(",")))
    }

    fn row(&mut self, cells: &[String]) {
        self.0.push_str(&cells.join(","));
        self.0.push('\n');
    }
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt_point(p: Option<ProjPoint>) -> String {
    p.map(|p| num(p.theta())).unwrap_or_default()
}

fn field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

struct Ctx<'a> {
    common: &'a Common,
    out: Output,
}

impl Ctx<'_> {
    fn load(&self) -> Result<SystemConfig> {
        let c = self.common;
        let mut cfg = match (&c.config, &c.example) {
            (Some(p), _) => {
                let parsed = config::parse_config(p)?;
                for w in &parsed.warnings {
                    eprintln!("warning: {w}");
                }
                parsed.config
            }
            (None, Some(name)) => {
                bundled::example(name)
                    .ok_or_else(|| Error::Usage(format!("unknown example `{name}`")))?
                    .parse()?
                    .config
            }
            (None, None) => return Err(Error::Usage("--config or --example is required".into())),
        };
        if let Some(n) = c.norm {
            cfg.norm = n;
        }
        if let Some(s) = c.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    fn load_family(&self) -> Result<Family> {
        let c = self.common;
        let mut fam = match (&c.config, &c.example) {
            (Some(p), _) => config::parse_family(p)?,
            (None, Some(name)) => bundled::family(name)
                .ok_or_else(|| Error::Usage(format!("unknown family `{name}`")))??,
            (None, None) => return Err(Error::Usage("--config or --example is required".into())),
        };
        if let Some(n) = c.norm {
            fam.base.norm = n;
        }
        Ok(fam)
    }

    fn depth(&self, cfg: &SystemConfig) -> usize {
        self.common.depth.unwrap_or(cfg.depth_cap)
    }

    fn tol(&self) -> f64 {
        self.common.tol.unwrap_or(1e-8)
    }

    fn csv(&mut self, name: &str, csv: Csv) -> Result<()> {
        self.out.write(&format!("{name}.csv"), &csv.0)
    }

    fn svg(&mut self, name: &str, content: impl FnOnce() -> String) -> Result<()> {
        if self.common.svg {
            if self.out.dir.is_none() {
                return Err(Error::Usage("--svg requires --out".into()));
            }
            self.out.write(&format!("{name}.svg"), &content())?;
        }
        Ok(())
    }
}

/// Ticks on the unit circle, direction θ drawn at angle 2θ.
pub fn svg_ticks(thetas: &[f64]) -> String {
    let mut s = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"-1.2 -1.2 2.4 2.4\" width=\"480\" height=\"480\">\n\
         <circle cx=\"0\" cy=\"0\" r=\"1\" fill=\"none\" stroke=\"#bbb\" stroke-width=\"0.005\"/>\n",
    );
    for &t in thetas {
        let (y, x) = (2.0 * t).sin_cos();
        let _ = writeln!(
            s,
            "<line x1=\"{:.5}\" y1=\"{:.5}\" x2=\"{:.5}\" y2=\"{:.5}\" stroke=\"black\" stroke-width=\"0.004\"/>",
            0.95 * x,
            -0.95 * y,
            1.05 * x,
            -1.05 * y
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Polyline of `(x, y)` with y in [0, 1].
pub fn svg_line(points: &[(f64, f64)]) -> String {
    let (x0, x1) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.0), b.max(p.0))
        });
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let mut s = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"-0.1 -0.1 1.2 1.2\" width=\"600\" height=\"600\">\n\
         <line x1=\"0\" y1=\"1\" x2=\"1\" y2=\"1\" stroke=\"#bbb\" stroke-width=\"0.003\"/>\n\
         <line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"1\" stroke=\"#bbb\" stroke-width=\"0.003\"/>\n<polyline fill=\"none\" stroke=\"black\" stroke-width=\"0.004\" points=\"",
    );
    for (x, y) in points.iter().filter(|p| p.1.is_finite()) {
        let _ = write!(s, "{:.5},{:.5} ", (x - x0) / span, 1.0 - y.clamp(0.0, 1.0));
    }
    s.push_str("\"/>\n</svg>\n");
    s
}

fn cmd_classify(ctx: &mut Ctx<'_>) -> Result<Status> {
    let cfg = ctx.load()?;
    let mut csv = Csv::new(&[
        "letter",
        "class",
        "trace",
        "attracting",
        "repelling",
        "a",
        "b",
        "c",
        "d",
    ]);
    for (i, m) in cfg.alphabet.iter().enumerate() {
        let fp = geometry::fixed_points(m);
        let class = cfg.classify_word(&[i], m);
        let attracting = if class == ClassTag::Parabolic {
            fp.parabolic_point
        } else {
            fp.attracting
        };
        csv.row(&[
            (i + 1).to_string(),
            class.to_string(),
            num(m.trace()),
            opt_point(attracting),
            opt_point(fp.repelling),
            num(m.a),
            num(m.b),
            num(m.c),
            num(m.d),
        ]);
    }
    ctx.csv("classify", csv)?;
    Ok(Status::Success)
}

fn cmd_enumerate(ctx: &mut Ctx<'_>) -> Result<Status> {
    let cfg = ctx.load()?;
    let depth = ctx.common.depth.unwrap_or(8);
    let mut csv = Csv::new(&["word", "length", "norm", "class"]);
    let mut failure = None;
    'outer: for n in 1..=depth {
        for item in semigroup::enumerate_words(&cfg, n) {
            match item {
                Ok((w, m)) => csv.row(&[
                    w.to_string(),
                    n.to_string(),
                    num(m.norm(cfg.norm)),
                    cfg.classify_word(&w.0, &m).to_string(),
                ]),
                Err(e) => {
                    failure = Some(e);
                    break 'outer;
                }
            }
        }
    }
    if let Some(e) = failure {
        csv.0.push_str("# partial: word budget exceeded\n");
        ctx.csv("enumerate", csv)?;
        return Err(e);
    }
    ctx.csv("enumerate", csv)?;
    Ok(Status::Success)
}

fn cmd_zeta(ctx: &mut Ctx<'_>, s: f64) -> Result<Status> {
    let cfg = ctx.load()?;
    let depth = ctx.depth(&cfg);
    let levels = spectral::zeta_levels(&cfg, s, depth)?;
    let mut csv = Csv::new(&["n", "level", "cumulative"]);
    let mut acc = spectral::CompensatedSum::default();
    for (i, z) in levels.iter().enumerate() {
        acc.add(*z);
        csv.row(&[(i + 1).to_string(), num(*z), num(acc.value())]);
    }
    ctx.csv("zeta", csv)?;
    Ok(Status::Success)
}

/// The almost-multiplicativity constant of a compact invariant multicone,
/// when one is found.
fn certified_constant(cfg: &SystemConfig) -> Option<f64> {
    let found =
        multicone::find_invariant_multicone(cfg, multicone::SEARCH_DEPTH, multicone::SEARCH_EPS)?;
    if found.containment != Containment::Compact {
        return None;
    }
    multicone::certified_almost_mult(cfg, &found.cone, 10)
        .ok()
        .map(|a| a.c)
}

fn cmd_pressure(ctx: &mut Ctx<'_>, s: f64) -> Result<Status> {
    let cfg = ctx.load()?;
    let depth = LogNormTable::affordable_depth(cfg.len(), ctx.depth(&cfg), spectral::TABLE_LIMIT);
    let c = certified_constant(&cfg);
    let p = spectral::pressure_bracket(&cfg, s, depth, c)?;
    let mut csv = Csv::new(&["m", "zm_root", "lower", "upper"]);
    for (i, r) in p.zn_roots.iter().enumerate() {
        csv.row(&[(i + 1).to_string(), num(*r), num(p.lower), num(p.upper)]);
    }
    ctx.csv("pressure", csv)?;
    Ok(Status::Success)
}

fn bracket_for(cfg: &SystemConfig, depth: usize) -> Result<Bracket> {
    let b = spectral::critical_exponent_bracket(cfg, depth, certified_constant(cfg))?;
    for a in &b.annotations {
        eprintln!("note: {a}");
    }
    Ok(b)
}

fn cmd_critexp(ctx: &mut Ctx<'_>) -> Result<Status> {
    let cfg = ctx.load()?;
    let b = bracket_for(&cfg, ctx.depth(&cfg))?;
    let mut csv = Csv::new(&["s_lo", "s_hi", "depth", "norm", "certified"]);
    csv.row(&[
        num(b.lo),
        num(b.hi),
        b.depth_used.to_string(),
        b.norm.to_string(),
        b.certified.to_string(),
    ]);
    ctx.csv("critexp", csv)?;
    Ok(Status::Success)
}

/// Word trees above this size are not built for point clouds.
const CLOUD_LIMIT: u64 = 1 << 22;

fn fixed_point_cloud(cfg: &SystemConfig, depth: usize) -> Result<PointCloud> {
    attractor::attractor_points_fixedpoint(
        cfg,
        multicone::affordable_tree_depth(cfg.len(), depth, CLOUD_LIMIT),
    )
}

fn cloud_csv(cloud: &PointCloud) -> Csv {
    let mut csv = Csv::new(&["theta"]);
    for t in cloud.thetas() {
        csv.row(&[num(t)]);
    }
    csv
}

fn cmd_attractor(ctx: &mut Ctx<'_>) -> Result<Status> {
    let cfg = ctx.load()?;
    let cloud = match ctx.common.samples {
        Some(n) => attractor::attractor_points_orbit(&cfg, n, ctx.tol(), cfg.seed)?,
        None => fixed_point_cloud(&cfg, ctx.depth(&cfg))?,
    };
    if cloud.dropped > 0 {
        eprintln!("note: {} orbit samples did not converge", cloud.dropped);
    }
    if cloud.elliptic_words > 0 {
        eprintln!("note: {} elliptic words skipped", cloud.elliptic_words);
    }
    ctx.csv("attractor", cloud_csv(&cloud))?;
    ctx.svg("attractor", || svg_ticks(&cloud.thetas()))?;
    Ok(Status::Success)
}

fn cmd_repeller(ctx: &mut Ctx<'_>) -> Result<Status> {
    let cfg = ctx.load()?;
    let depth = multicone::affordable_tree_depth(cfg.len(), ctx.depth(&cfg), CLOUD_LIMIT);
    let cloud = attractor::repeller_points(&cfg, depth)?;
    ctx.csv("repeller", cloud_csv(&cloud))?;
    ctx.svg("repeller", || svg_ticks(&cloud.thetas()))?;
    Ok(Status::Success)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub box_dimension: f64,
    pub stderr: f64,
    pub points: usize,
    pub delta: Bracket,
    /// Interval for `min{1, δ}`.
    pub predicted: (f64, f64),
    pub basis: String,
    pub verdict: String,
}

/// Box dimension fitted only over scales where the depth and depth - 1
/// clouds have the same counts. `Ok(Err(_))` when that range is too short.
fn converged_box_dimension(
    cfg: &SystemConfig,
    cloud: &attractor::PointCloud,
    depth: usize,
) -> Result<Result<attractor::DimensionEstimate>> {
    if cloud.len() <= 1 || depth <= 1 {
        return Ok(attractor::box_dimension(
            cloud,
            &attractor::default_scales(),
        ));
    }
    let shallow = fixed_point_cloud(cfg, depth - 1)?;
    let scales = attractor::converged_scales(&shallow, cloud, &attractor::default_scales());
    Ok(attractor::box_dimension(cloud, &scales).map(|mut e| {
        e.method = "box-counting (depth-converged)".into();
        e
    }))
}

/// Box dimension of the fixed-point cloud set against `min{1, δ}`.
/// A box dimension of NaN means the counts had not converged in depth over
/// enough scales to fit.
pub fn dimension_report(cfg: &SystemConfig, depth: usize) -> Result<DimensionReport> {
    let cloud = fixed_point_cloud(cfg, depth)?;
    let est = converged_box_dimension(cfg, &cloud, depth)?;
    let bdepth = LogNormTable::affordable_depth(cfg.len(), depth.max(18), spectral::TABLE_LIMIT);
    let delta = bracket_for(cfg, bdepth)?;
    let quick = spectral::quick_lower_bounds(cfg)
        .into_iter()
        .map(|(_, v)| v)
        .fold(0.0, f64::max);
    let (predicted, basis, certain) = match subsystems::reducible_dimension(cfg) {
        Ok(v) if matches!(v.dimension, ReducibleDimension::Value(_)) => {
            let ReducibleDimension::Value(d) = v.dimension else {
                unreachable!()
            };
            ((d, d), format!("reducible:{}", v.case), true)
        }
        // Word sums overcount a non-free semigroup, so the bracket may sit
        // above its exponent.
        _ if delta.certified && delta.annotations.contains(&Annotation::NonFree) => (
            (delta.lo.min(1.0), delta.hi.min(1.0)),
            "pressure-bracket-words".to_string(),
            false,
        ),
        _ if delta.certified => (
            (delta.lo.min(1.0), delta.hi.min(1.0)),
            "pressure-bracket".to_string(),
            true,
        ),
        _ => (
            (delta.lo.max(quick).min(1.0), 1.0),
            "pressure-lower-bound".to_string(),
            false,
        ),
    };
    let (value, stderr) = est
        .as_ref()
        .map(|e| (e.value, e.stderr))
        .unwrap_or((f64::NAN, f64::NAN));
    let tol = (2.0 * stderr).max(0.05);
    let verdict = if est.is_err() {
        "inconclusive"
    } else if value >= predicted.0 - tol && value <= predicted.1 + tol {
        "consistent"
    } else if certain {
        "inconsistent"
    } else {
        "inconclusive"
    };
    Ok(DimensionReport {
        box_dimension: value,
        stderr,
        points: cloud.len(),
        delta,
        predicted,
        basis,
        verdict: verdict.to_string(),
    })
}

fn cmd_dimension(ctx: &mut Ctx<'_>) -> Result<Status> {
    let cfg = ctx.load()?;
    let r = dimension_report(&cfg, ctx.depth(&cfg))?;
    let mut csv = Csv::new(&[
        "box_dim",
        "stderr",
        "points",
        "delta_lo",
        "delta_hi",
        "predicted_lo",
        "predicted_hi",
        "basis",
        "verdict",
    ]);
    csv.row(&[
        num(r.box_dimension),
        num(r.stderr),
        r.points.to_string(),
        num(r.delta.lo),
        num(r.delta.hi),
        num(r.predicted.0),
        num(r.predicted.1),
        r.basis.clone(),
        r.verdict.clone(),
    ]);
    ctx.csv("dimension", csv)?;
    eprintln!(
        "box dimension {:.4} ± {:.4}; min{{1, δ}} in [{:.4}, {:.4}]: {}",
        r.box_dimension, r.stderr, r.predicted.0, r.predicted.1, r.verdict
    );
    Ok(if r.verdict == "inconclusive" {
        Status::Inconclusive
    } else {
        Status::Success
    })
}

fn cmd_certify_uh(ctx: &mut Ctx<'_>) -> Result<Status> {
    let cfg = ctx.load()?;
    if cfg
        .alphabet
        .iter()
        .any(|m| geometry::classify(m) == ClassTag::Elliptic)
    {
        eprintln!("inconclusive: elliptic letter present");
        return Ok(Status::Inconclusive);
    }
    let depth = ctx.common.depth.unwrap_or(multicone::DEFAULT_CERT_DEPTH);
    let found = match multicone::find_invariant_multicone(
        &cfg,
        multicone::SEARCH_DEPTH,
        multicone::SEARCH_EPS,
    ) {
        Some(f) if f.containment == Containment::Compact => f,
        Some(f) => {
            eprintln!(
                "inconclusive: multicone {} is only strictly invariant",
                f.cone
            );
            return Ok(Status::Inconclusive);
        }
        None => {
            eprintln!("inconclusive: no invariant multicone found");
            return Ok(Status::Inconclusive);
        }
    };
    let cert = match multicone::certify_uniform_hyperbolicity_at(&cfg, &found.cone, depth) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("inconclusive: {e}");
            return Ok(Status::Inconclusive);
        }
    };
    let mut csv = Csv::new(&[
        "containment",
        "margin",
        "lambda",
        "c_uh",
        "c_mult",
        "c_mult_empirical",
        "depth",
        "cone",
    ]);
    csv.row(&[
        "compact".into(),
        num(cert.margin),
        num(cert.lambda),
        num(cert.c_uh),
        num(cert.c_mult),
        num(cert.c_mult_empirical),
        cert.depth.to_string(),
        field(&cert.cone.to_string()),
    ]);
    ctx.csv("certify-uh", csv)?;
    Ok(Status::Success)
}

fn cmd_certify_sd(ctx: &mut Ctx<'_>) -> Result<Status> {
    let cfg = ctx.load()?;
    let depth = ctx.common.depth.unwrap_or(multicone::SEARCH_DEPTH);
    let v = multicone::certify_semidiscrete(&cfg, depth)?;
    let detail = match &v {
        SemidiscreteVerdict::CertifiedViaInvariantSet(f) => format!("cone {}", f.cone),
        SemidiscreteVerdict::RefutedViaIdentityApproach { word, distance } => {
            format!("word {word} at distance {distance:e} from identity")
        }
        SemidiscreteVerdict::EvidenceOnly(p) => format!(
            "closest approach to identity {:e}; accumulation {}",
            p.min_identity_distance(),
            p.non_discrete_evidence
        ),
    };
    let mut csv = Csv::new(&["verdict", "detail"]);
    csv.row(&[v.label().to_string(), field(&detail)]);
    ctx.csv("certify-sd", csv)?;
    Ok(match v {
        SemidiscreteVerdict::EvidenceOnly(_) => Status::Inconclusive,
        _ => Status::Success,
    })
}

fn cmd_diophantine(ctx: &mut Ctx<'_>) -> Result<Status> {
    let cfg = ctx.load()?;
    let depth = ctx.common.depth.unwrap_or(10);
    let p = semigroup::diophantine_profile(&cfg, depth)?;
    let mut csv = Csv::new(&["n", "min_distance", "word_a", "word_b"]);
    for r in &p.records {
        let (a, b) = r
            .pair
            .as_ref()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .unwrap_or_default();
        csv.row(&[r.n.to_string(), num(r.min_distance), a, b]);
    }
    ctx.csv("diophantine", csv)?;
    eprintln!(
        "fitted c = {}; {} exact collisions",
        p.fitted_c.map(num).unwrap_or_else(|| "none".into()),
        p.collisions.len()
    );
    Ok(Status::Success)
}

fn cmd_furstenberg(ctx: &mut Ctx<'_>) -> Result<Status> {
    let mut cfg = ctx.load()?;
    if cfg.probs.is_none() {
        let k = cfg.len();
        cfg = cfg.with_probs(vec![1.0 / k as f64; k])?;
    }
    let n = ctx.common.samples.unwrap_or(100_000);
    let sample = furstenberg::sample_stationary(&cfg, n, ctx.tol(), cfg.seed)?;
    let cloud = fixed_point_cloud(&cfg, ctx.depth(&cfg))?;
    let residual = furstenberg::stationarity_residual(&sample, &cfg);
    let r = furstenberg::support_dimension_report(&cfg, &sample, &cloud, None)?;
    for a in &r.annotations {
        eprintln!("note: {a}");
    }
    let mut csv = Csv::new(&[
        "samples",
        "dropped",
        "residual",
        "hausdorff",
        "containment",
        "sample_dim",
        "attractor_dim",
        "hypotheses_met",
    ]);
    csv.row(&[
        sample.points.len().to_string(),
        sample.dropped.to_string(),
        num(residual),
        num(r.hausdorff),
        num(r.containment),
        num(r.sample_dimension.as_ref().map_or(f64::NAN, |e| e.value)),
        num(r.attractor_dimension.as_ref().map_or(f64::NAN, |e| e.value)),
        r.hypotheses_met.to_string(),
    ]);
    ctx.csv("furstenberg", csv)?;
    ctx.svg("furstenberg", || svg_ticks(&sample.cloud().thetas()))?;
    Ok(Status::Success)
}

fn inconclusive_on(e: Error) -> Result<Status> {
    match e {
        Error::NoPivot(_)
        | Error::NotApplicable(_)
        | Error::CertificationFailed(_)
        | Error::InfiniteOrder(_)
        | Error::NotReducible => {
            eprintln!("inconclusive: {e}");
            Ok(Status::Inconclusive)
        }
        other => Err(other),
    }
}

fn cmd_pivot(ctx: &mut Ctx<'_>) -> Result<Status> {
    let cfg = ctx.load()?;
    let p = match subsystems::find_pivot(&cfg, ctx.common.depth.unwrap_or(6)) {
        Ok(p) => p,
        Err(e) => return inconclusive_on(e),
    };
    let mut csv = Csv::new(&[
        "a0",
        "u_start",
        "u_end",
        "u_prime_start",
        "u_prime_end",
        "v_start",
        "v_end",
        "margin",
    ]);
    csv.row(&[
        p.a0.0.to_string(),
        num(p.u.start),
        num(p.u.end().rem_euclid(PI)),
        num(p.u_prime.start),
        num(p.u_prime.end().rem_euclid(PI)),
        num(p.v.start),
        num(p.v.end().rem_euclid(PI)),
        num(p.margin),
    ]);
    ctx.csv("pivot", csv)?;
    Ok(Status::Success)
}

fn cmd_lower_bound(ctx: &mut Ctx<'_>) -> Result<Status> {
    let cfg = ctx.load()?;
    let n = ctx.common.depth.unwrap_or(6);
    let pivot = match subsystems::find_pivot(&cfg, 6) {
        Ok(p) => p,
        Err(e) => return inconclusive_on(e),
    };
    let bounds = match subsystems::gamma_lower_bounds(&cfg, &pivot, n, 16) {
        Ok(b) => b,
        Err(e) => return inconclusive_on(e),
    };
    let mut csv = Csv::new(&["n", "letters", "delta_lo", "delta_hi", "raw_lower", "lower"]);
    for b in &bounds {
        csv.row(&[
            b.n.to_string(),
            b.letters.to_string(),
            num(b.delta.lo),
            num(b.delta.hi),
            num(b.raw_lower),
            num(b.lower),
        ]);
    }
    ctx.csv("lower-bound", csv)?;
    Ok(Status::Success)
}

fn cmd_reduce(ctx: &mut Ctx<'_>) -> Result<Status> {
    let cfg = ctx.load()?;
    let (e, s): (Vec<_>, Vec<_>) = cfg.alphabet.iter().partition(|m| {
        matches!(
            geometry::classify(m),
            ClassTag::Elliptic | ClassTag::Identity
        )
    });
    if e.is_empty() {
        eprintln!("inconclusive: no elliptic letters to reduce");
        return Ok(Status::Inconclusive);
    }
    let red = match subsystems::elliptic_reduction(&s, &e) {
        Ok(r) => r,
        Err(err) => return inconclusive_on(err),
    };
    let mut csv = Csv::new(&["letter", "a", "b", "c", "d"]);
    for (i, m) in red.alphabet.iter().enumerate() {
        csv.row(&[(i + 1).to_string(), num(m.a), num(m.b), num(m.c), num(m.d)]);
    }
    ctx.csv("reduce", csv)?;
    let reduced = cfg.with_alphabet(red.alphabet.clone())?;
    ctx.out
        .write("reduced.cfg", &config::emit_config(&reduced))?;
    eprintln!(
        "elliptic order {}; {} letters",
        red.order,
        red.alphabet.len()
    );
    Ok(Status::Success)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub t: f64,
    pub dimension: f64,
    pub method: String,
    pub bracket: Option<(f64, f64, bool)>,
    pub jump: f64,
    pub flagged: bool,
    pub error: Option<String>,
}

/// Adjacent jumps above this are flagged.
pub const JUMP_FLAG: f64 = 0.05;

fn scan_point(cfg: &SystemConfig, depth: usize) -> Result<(f64, String, Option<(f64, f64, bool)>)> {
    if let Some(c) = certified_constant(cfg) {
        let b = spectral::critical_exponent_bracket(cfg, depth, Some(c))?;
        if b.certified {
            return Ok((
                b.midpoint().min(1.0),
                "pressure".into(),
                Some((b.lo, b.hi, true)),
            ));
        }
    }
    let cloud = fixed_point_cloud(cfg, depth)?;
    let est = converged_box_dimension(cfg, &cloud, depth)??;
    Ok((est.value, "box".into(), None))
}

/// Dimension along the grid of a family: the certified pressure midpoint
/// capped at 1 where a compact invariant multicone exists, else box counting.
pub fn scan_continuity(family: &Family, depth: usize) -> Vec<ScanRow> {
    let mut rows: Vec<ScanRow> = Vec::with_capacity(family.grid.len());
    let mut prev: Option<f64> = None;
    for &t in &family.grid {
        let res = family.at(t).and_then(|cfg| scan_point(&cfg, depth));
        let row = match res {
            Ok((d, method, bracket)) => {
                let jump = prev.map(|p| (d - p).abs()).unwrap_or(0.0);
                prev = Some(d);
                ScanRow {
                    t,
                    dimension: d,
                    method,
                    bracket,
                    jump,
                    flagged: jump > JUMP_FLAG,
                    error: None,
                }
            }
            Err(e) => ScanRow {
                t,
                dimension: f64::NAN,
                method: "error".into(),
                bracket: None,
                jump: f64::NAN,
                flagged: false,
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    rows
}

fn cmd_scan(ctx: &mut Ctx<'_>) -> Result<Status> {
    let fam = ctx.load_family()?;
    let depth = ctx.common.depth.unwrap_or(12);
    let rows = scan_continuity(&fam, depth);
    let mut csv = Csv::new(&[
        "t",
        "dim",
        "method",
        "s_lo",
        "s_hi",
        "certified",
        "jump",
        "flag",
        "error",
    ]);
    for r in &rows {
        let (lo, hi, cert) = r
            .bracket
            .map(|(a, b, c)| (num(a), num(b), c.to_string()))
            .unwrap_or_else(|| (String::new(), String::new(), "false".into()));
        csv.row(&[
            num(r.t),
            num(r.dimension),
            r.method.clone(),
            lo,
            hi,
            cert,
            num(r.jump),
            r.flagged.to_string(),
            field(r.error.as_deref().unwrap_or("")),
        ]);
    }
    ctx.csv("scan-continuity", csv)?;
    let max_jump = rows
        .iter()
        .map(|r| r.jump)
        .filter(|j| j.is_finite())
        .fold(0.0, f64::max);
    let flagged = rows.iter().filter(|r| r.flagged).count();
    eprintln!("max adjacent jump {max_jump:.4}; {flagged} flagged");
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.dimension)).collect();
    ctx.svg("scan-continuity", || svg_line(&pts))?;
    Ok(Status::Success)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub letters: Vec<String>,
    pub semidiscrete: String,
    pub uniformly_hyperbolic: bool,
    pub reducible: Option<String>,
    pub dimension: DimensionReport,
}

fn cmd_report(ctx: &mut Ctx<'_>) -> Result<Status> {
    let cfg = ctx.load()?;
    let depth = ctx.common.depth.unwrap_or(12);
    let letters = cfg
        .alphabet
        .iter()
        .enumerate()
        .map(|(i, m)| cfg.classify_word(&[i], m).to_string())
        .collect();
    let sd = multicone::certify_semidiscrete(&cfg, multicone::SEARCH_DEPTH)?;
    let uh = matches!(&sd, SemidiscreteVerdict::CertifiedViaInvariantSet(f) if f.containment == Containment::Compact);
    let reducible = subsystems::reducible_dimension(&cfg)
        .ok()
        .map(|v| v.case.to_string());
    let dimension = dimension_report(&cfg, depth)?;
    let report = Report {
        letters,
        semidiscrete: sd.label().to_string(),
        uniformly_hyperbolic: uh,
        reducible,
        dimension,
    };
    let mut csv = Csv::new(&["key", "value"]);
    csv.row(&["letters".into(), field(&report.letters.join(" "))]);
    csv.row(&["semidiscrete".into(), report.semidiscrete.clone()]);
    csv.row(&[
        "uniformly_hyperbolic".into(),
        report.uniformly_hyperbolic.to_string(),
    ]);
    csv.row(&[
        "reducible".into(),
        report.reducible.clone().unwrap_or_else(|| "no".into()),
    ]);
    csv.row(&["box_dim".into(), num(report.dimension.box_dimension)]);
    csv.row(&["delta_lo".into(), num(report.dimension.delta.lo)]);
    csv.row(&["delta_hi".into(), num(report.dimension.delta.hi)]);
    csv.row(&["verdict".into(), report.dimension.verdict.clone()]);
    ctx.csv("report", csv)?;
    ctx.out
        .write("report.json", &serde_json::to_string_pretty(&report)?)?;
    Ok(Status::Success)
}

fn dispatch(cmd: &Command, ctx: &mut Ctx<'_>) -> Result<Status> {
    match cmd {
        Command::Classify(_) => cmd_classify(ctx),
        Command::Enumerate(_) => cmd_enumerate(ctx),
        Command::Zeta { s, .. } => cmd_zeta(ctx, *s),
        Command::Pressure { s, .. } => cmd_pressure(ctx, *s),
        Command::Critexp(_) => cmd_critexp(ctx),
        Command::Attractor(_) => cmd_attractor(ctx),
        Command::Repeller(_) => cmd_repeller(ctx),
        Command::Dimension(_) => cmd_dimension(ctx),
        Command::CertifyUh(_) => cmd_certify_uh(ctx),
        Command::CertifySd(_) => cmd_certify_sd(ctx),
        Command::Diophantine(_) => cmd_diophantine(ctx),
        Command::Furstenberg(_) => cmd_furstenberg(ctx),
        Command::Pivot(_) => cmd_pivot(ctx),
        Command::LowerBound(_) => cmd_lower_bound(ctx),
        Command::Reduce(_) => cmd_reduce(ctx),
        Command::ScanContinuity(_) => cmd_scan(ctx),
        Command::Report(_) => cmd_report(ctx),
        Command::Replay { .. } => unreachable!("handled by run"),
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("PROJIFS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// Replaces or appends `--out DIR` in an argument list.
fn with_out(argv: &[String], out: Option<&Path>) -> Vec<String> {
    let mut v = Vec::with_capacity(argv.len() + 2);
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
            continue;
        }
        if out.is_some() && a == "--out" {
            skip = true;
            continue;
        }
        if out.is_some() && a.starts_with("--out=") {
            continue;
        }
        v.push(a.clone());
    }
    if let Some(o) = out {
        v.push("--out".into());
        v.push(o.display().to_string());
    }
    v
}

fn replay(manifest: &Path, out: Option<&Path>) -> i32 {
    let text = match std::fs::read_to_string(manifest) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", manifest.display());
            return 1;
        }
    };
    let m: RunManifest = match serde_json::from_str(&text) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {}: {e}", manifest.display());
            return 1;
        }
    };
    let mut argv = vec!["projifs".to_string()];
    argv.extend(with_out(&m.argv, out));
    run(argv)
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    configure_threads();
    if let Command::Replay { manifest, out } = &cli.command {
        return replay(manifest, out.as_deref());
    }
    let common = cli
        .command
        .common()
        .expect("non-replay commands carry common flags");
    let start = Instant::now();
    let out = match Output::new(common.out.clone()) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let mut ctx = Ctx { common, out };
    let code = match dispatch(&cli.command, &mut ctx) {
        Ok(s) => s.code(),
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    };
    let manifest = RunManifest {
        command: cli.command.name().to_string(),
        argv: argv[1..].to_vec(),
        config: common
            .config
            .as_ref()
            .map(|p| p.display().to_string())
            .or_else(|| common.example.clone()),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: common.seed,
        wall_time_secs: start.elapsed().as_secs_f64(),
        outputs: ctx.out.files.clone(),
        exit_code: code,
    };
    match serde_json::to_string_pretty(&manifest) {
        Ok(json) => match &ctx.out.dir {
            Some(d) => {
                if let Err(e) = std::fs::write(d.join("manifest.json"), json + "\n") {
                    eprintln!("error: writing manifest: {e}");
                    return 1;
                }
            }
            None => eprintln!("{json}"),
        },
        Err(e) => eprintln!("error: {e}"),
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_flag_is_replaced() {
        let argv: Vec<String> = ["critexp", "--out", "a", "--depth", "3"]
            .map(String::from)
            .to_vec();
        assert_eq!(
            with_out(&argv, Some(Path::new("b"))),
            ["critexp", "--depth", "3", "--out", "b"]
                .map(String::from)
                .to_vec()
        );
        assert_eq!(with_out(&argv, None), argv);
    }

    #[test]
    fn numbers_render_plainly() {
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(field("a,b"), "\"a,b\"");
    }

    #[test]
    fn unknown_flag_is_an_error() {
        assert_eq!(run(["projifs", "classify", "--bogus"]), 1);
    }

    #[test]
    fn svg_has_one_tick_per_point() {
        let s = svg_ticks(&[0.1, 0.2, 3.0]);
        assert_eq!(s.matches("<line").count(), 3);
    }
}
