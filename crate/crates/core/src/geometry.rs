//! 2×2 unit-determinant matrices and their actions on the projective line,
//! the extended real line and the upper half-plane.
//!
//! Points of RP¹ are angles in `(0, π]`. The chart `ψ(θ) = cot θ` conjugates
//! the projective action of `M` to the Möbius map `x ↦ (ax+b)/(cx+d)`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries whose determinant is further than this from 1 get rescaled.
pub const DET_RENORM_TOL: f64 = 1e-12;
/// Half-width of the parabolic band around `|tr| = 2`.
pub const CLASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum NormKind {
    #[default]
    Operator2,
    MaxEntry,
}

impl NormKind {
    /// Constant `f` making `f·‖·‖` submultiplicative.
    pub fn submult_factor(self) -> f64 {
        match self {
            NormKind::Operator2 => 1.0,
            NormKind::MaxEntry => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NormKind::Operator2 => "op2",
            NormKind::MaxEntry => "max",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NormKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "op2" | "operator2" => Ok(NormKind::Operator2),
            "max" | "maxentry" => Ok(NormKind::MaxEntry),
            other => Err(format!("unknown norm `{other}` (expected op2 or max)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassTag {
    Identity,
    Elliptic,
    Parabolic,
    Hyperbolic,
}

impl fmt::Display for ClassTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ClassTag::Identity => "identity",
            ClassTag::Elliptic => "elliptic",
            ClassTag::Parabolic => "parabolic",
            ClassTag::Hyperbolic => "hyperbolic",
        };
        f.write_str(s)
    }
}

/// A real 2×2 matrix `[[a, b], [c, d]]` with determinant 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Matrix2 {
    pub const IDENTITY: Matrix2 = Matrix2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    /// Builds a matrix from row-major entries, dividing by `sqrt(det)` when the
    /// determinant is not already 1.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()) {
            return Err(Error::NonFinite);
        }
        let det = a * d - b * c;
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::BadDeterminant(det));
        }
        Ok(Matrix2 { a, b, c, d }.renormalized())
    }

    pub fn diag(l: f64) -> Self {
        Matrix2 {
            a: l,
            b: 0.0,
            c: 0.0,
            d: 1.0 / l,
        }
    }

    /// Rotation of the plane by `angle`; acts on RP¹ as a shift by `angle`.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Matrix2 {
            a: c,
            b: -s,
            c: s,
            d: c,
        }
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn transpose(&self) -> Self {
        Matrix2 {
            a: self.a,
            b: self.c,
            c: self.b,
            d: self.d,
        }
    }

    pub fn inverse(&self) -> Self {
        Matrix2 {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    pub fn neg(&self) -> Self {
        Matrix2 {
            a: -self.a,
            b: -self.b,
            c: -self.c,
            d: -self.d,
        }
    }

    fn renormalized(self) -> Self {
        let det = self.det();
        if (det - 1.0).abs() > DET_RENORM_TOL && det > 0.0 {
            let k = 1.0 / det.sqrt();
            Matrix2 {
                a: self.a * k,
                b: self.b * k,
                c: self.c * k,
                d: self.d * k,
            }
        } else {
            self
        }
    }

    /// Largest and smallest singular values.
    pub fn singular_values(&self) -> (f64, f64) {
        let p = ((self.a + self.d).powi(2) + (self.b - self.c).powi(2)).sqrt();
        let q = ((self.a - self.d).powi(2) + (self.b + self.c).powi(2)).sqrt();
        ((p + q) / 2.0, (p - q).abs() / 2.0)
    }

    pub fn norm(&self, which: NormKind) -> f64 {
        op_norm(self, which)
    }

    pub fn max_abs_diff(&self, other: &Matrix2) -> f64 {
        (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
            .max((self.d - other.d).abs())
    }

    /// Applies the matrix to a plane vector.
    pub fn apply(&self, v: (f64, f64)) -> (f64, f64) {
        (self.a * v.0 + self.b * v.1, self.c * v.0 + self.d * v.1)
    }
}

impl Mul for Matrix2 {
    type Output = Matrix2;
    fn mul(self, o: Matrix2) -> Matrix2 {
        Matrix2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
        .renormalized()
    }
}

impl fmt::Display for Matrix2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// A point of RP¹ stored as an angle in `(0, π]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ProjPoint {
    theta: f64,
}

impl ProjPoint {
    pub fn new(theta: f64) -> Self {
        let mut t = theta.rem_euclid(PI);
        if t <= 0.0 || t >= PI {
            t = PI;
        }
        ProjPoint { theta: t }
    }

    /// Direction of the plane vector `(x, y)`.
    pub fn from_vector(x: f64, y: f64) -> Self {
        ProjPoint::new(y.atan2(x))
    }

    pub fn theta(self) -> f64 {
        self.theta
    }

    pub fn unit_vector(self) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (c, s)
    }

    /// Distance on the circle of circumference π.
    pub fn dist(self, other: ProjPoint) -> f64 {
        circ_dist(self.theta, other.theta)
    }
}

/// Distance between two angles on the circle of circumference π.
pub fn circ_dist(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(PI);
    d.min(PI - d)
}

/// A point of `R ∪ {∞}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinity,
}

/// A point of `C ∪ {∞}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtComplex {
    Finite(Complex64),
    Infinity,
}

pub fn classify(m: &Matrix2) -> ClassTag {
    let t = m.trace();
    let s = if t < 0.0 { -1.0 } else { 1.0 };
    if (m.a - s).abs() <= CLASS_TOL
        && (m.d - s).abs() <= CLASS_TOL
        && m.b.abs() <= CLASS_TOL
        && m.c.abs() <= CLASS_TOL
    {
        return ClassTag::Identity;
    }
    let at = t.abs();
    if (at - 2.0).abs() <= CLASS_TOL {
        ClassTag::Parabolic
    } else if at < 2.0 {
        ClassTag::Elliptic
    } else {
        ClassTag::Hyperbolic
    }
}

/// Classification from exact rational entries (determinant assumed 1).
pub fn classify_rational(e: [Ratio<i128>; 4]) -> ClassTag {
    let one = Ratio::from_integer(1);
    let zero = Ratio::from_integer(0);
    let t = e[0] + e[3];
    let two = Ratio::from_integer(2);
    let at = if t < zero { -t } else { t };
    let s = if t < zero { -one } else { one };
    if e[0] == s && e[3] == s && e[1] == zero && e[2] == zero {
        ClassTag::Identity
    } else if at == two {
        ClassTag::Parabolic
    } else if at < two {
        ClassTag::Elliptic
    } else {
        ClassTag::Hyperbolic
    }
}

pub fn op_norm(m: &Matrix2, which: NormKind) -> f64 {
    match which {
        NormKind::Operator2 => m.singular_values().0,
        NormKind::MaxEntry => m.a.abs().max(m.b.abs()).max(m.c.abs()).max(m.d.abs()),
    }
}

pub fn proj_act(m: &Matrix2, x: ProjPoint) -> ProjPoint {
    let (u, v) = m.apply(x.unit_vector());
    ProjPoint::from_vector(u, v)
}

/// `|φ_M'(θ)| = ‖M v‖⁻²` for the unit vector `v` at angle θ.
pub fn proj_deriv(m: &Matrix2, x: ProjPoint) -> f64 {
    let (u, v) = m.apply(x.unit_vector());
    1.0 / (u * u + v * v)
}

pub fn psi(x: ProjPoint) -> ExtReal {
    if x.theta >= PI {
        ExtReal::Infinity
    } else {
        let (s, c) = x.theta.sin_cos();
        ExtReal::Finite(c / s)
    }
}

pub fn psi_inv(y: ExtReal) -> ProjPoint {
    match y {
        ExtReal::Infinity => ProjPoint::new(PI),
        ExtReal::Finite(v) => ProjPoint::new(1f64.atan2(v)),
    }
}

pub fn mobius_act(m: &Matrix2, z: ExtComplex) -> ExtComplex {
    match z {
        ExtComplex::Infinity => {
            if m.c == 0.0 {
                ExtComplex::Infinity
            } else {
                ExtComplex::Finite(Complex64::new(m.a / m.c, 0.0))
            }
        }
        ExtComplex::Finite(z) => {
            let den = z * m.c + m.d;
            if den.norm_sqr() == 0.0 {
                ExtComplex::Infinity
            } else {
                ExtComplex::Finite((z * m.a + m.b) / den)
            }
        }
    }
}

/// Möbius action restricted to the extended real line.
pub fn mobius_real(m: &Matrix2, x: ExtReal) -> ExtReal {
    let z = match x {
        ExtReal::Infinity => ExtComplex::Infinity,
        ExtReal::Finite(v) => ExtComplex::Finite(Complex64::new(v, 0.0)),
    };
    match mobius_act(m, z) {
        ExtComplex::Infinity => ExtReal::Infinity,
        ExtComplex::Finite(w) => ExtReal::Finite(w.re),
    }
}

/// Chordal distance on `R ∪ {∞}` viewed as a circle of diameter 1.
pub fn chordal(x: ExtReal, y: ExtReal) -> f64 {
    match (x, y) {
        (ExtReal::Infinity, ExtReal::Infinity) => 0.0,
        (ExtReal::Finite(v), ExtReal::Infinity) | (ExtReal::Infinity, ExtReal::Finite(v)) => {
            1.0 / (1.0 + v * v).sqrt()
        }
        (ExtReal::Finite(u), ExtReal::Finite(v)) => {
            (u - v).abs() / ((1.0 + u * u) * (1.0 + v * v)).sqrt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointData {
    pub class: ClassTag,
    pub attracting: Option<ProjPoint>,
    pub repelling: Option<ProjPoint>,
    pub parabolic_point: Option<ProjPoint>,
    /// Derivatives at (attracting, repelling), or (1, 1) at a parabolic point.
    pub multipliers: Option<(f64, f64)>,
}

fn eigen_direction(m: &Matrix2, lambda: f64) -> ProjPoint {
    let v1 = (m.b, lambda - m.a);
    let v2 = (lambda - m.d, m.c);
    let n1 = v1.0 * v1.0 + v1.1 * v1.1;
    let n2 = v2.0 * v2.0 + v2.1 * v2.1;
    if n1 >= n2 {
        ProjPoint::from_vector(v1.0, v1.1)
    } else {
        ProjPoint::from_vector(v2.0, v2.1)
    }
}

pub fn fixed_points(m: &Matrix2) -> FixedPointData {
    let class = classify(m);
    let m = if m.trace() < 0.0 { m.neg() } else { *m };
    match class {
        ClassTag::Identity | ClassTag::Elliptic => FixedPointData {
            class,
            attracting: None,
            repelling: None,
            parabolic_point: None,
            multipliers: None,
        },
        ClassTag::Parabolic => {
            let p = eigen_direction(&m, 1.0);
            let k = proj_deriv(&m, p);
            FixedPointData {
                class,
                attracting: None,
                repelling: None,
                parabolic_point: Some(p),
                multipliers: Some((k, k)),
            }
        }
        ClassTag::Hyperbolic => {
            let t = m.trace();
            let big = (t + (t * t - 4.0).sqrt()) / 2.0;
            let a = eigen_direction(&m, big);
            let r = eigen_direction(&m, 1.0 / big);
            let (ka, kr) = (proj_deriv(&m, a), proj_deriv(&m, r));
            let (a, r, ka, kr) = if ka <= kr {
                (a, r, ka, kr)
            } else {
                (r, a, kr, ka)
            };
            FixedPointData {
                class,
                attracting: Some(a),
                repelling: Some(r),
                parabolic_point: None,
                multipliers: Some((ka, kr)),
            }
        }
    }
}

/// Attracting point of a hyperbolic matrix, or the fixed point of a parabolic one.
pub fn attracting_or_parabolic(m: &Matrix2) -> Option<ProjPoint> {
    let fp = fixed_points(m);
    fp.attracting.or(fp.parabolic_point)
}

/// Input directions `(u⁻, u⁺)`: eigendirections of `MᵀM` for `‖M‖⁻²` and `‖M‖²`.
pub fn singular_directions(m: &Matrix2) -> Result<(ProjPoint, ProjPoint)> {
    let (s1, _) = m.singular_values();
    if s1 - 1.0 <= CLASS_TOL {
        return Err(Error::DegenerateDirections);
    }
    let p = m.a * m.a + m.c * m.c;
    let q = m.a * m.b + m.c * m.d;
    let r = m.b * m.b + m.d * m.d;
    let phi = 0.5 * (2.0 * q).atan2(p - r);
    Ok((ProjPoint::new(phi + PI / 2.0), ProjPoint::new(phi)))
}

/// Direction of `M u⁺`, the most expanded output direction.
pub fn top_output_direction(m: &Matrix2) -> Result<ProjPoint> {
    let (_, up) = singular_directions(m)?;
    Ok(proj_act(m, up))
}
