//! Projective points, hyperplanes and the standard metric over `(ℚ, place)`,
//! together with finite unions of balls and hyperplane neighborhoods.
//!
//! Every set is open: `ball(c, r) = {x : d(x, c)² < r}`. Closed variants are
//! reached through [`in_closure`], [`closures_disjoint`] and the strict
//! containment tests.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{index_pairs, kernel, Mat};
use crate::scalar::{
    abs_sq, fmt_rat, round_dyadic, round_up_sig, sqrt_lower, sqrt_sum_le, sqrt_sum_lt, sqrt_upper,
    Place, Rat,
};

/// Significant bits kept when pushed radii are rounded up.
const RADIUS_BITS: u32 = 48;

fn canonical(mut coords: Vec<Rat>) -> Result<Vec<Rat>> {
    let Some(lead) = coords.iter().find(|x| !x.is_zero()).cloned() else {
        return Err(Error::Invalid("zero vector has no projective class".into()));
    };
    if !lead.is_one() {
        for x in coords.iter_mut() {
            *x /= &lead;
        }
    }
    Ok(coords)
}

fn fmt_coords(f: &mut fmt::Formatter<'_>, c: &[Rat]) -> fmt::Result {
    write!(f, "[")?;
    for (i, x) in c.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{}", fmt_rat(x))?;
    }
    write!(f, "]")
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProjPoint {
    coords: Vec<Rat>,
}

impl fmt::Debug for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_coords(f, &self.coords)
    }
}

impl ProjPoint {
    pub fn new(coords: Vec<Rat>) -> Result<ProjPoint> {
        if coords.len() < 2 {
            return Err(Error::Invalid("projective points need n ≥ 2".into()));
        }
        Ok(ProjPoint {
            coords: canonical(coords)?,
        })
    }

    pub fn from_i64(c: &[i64]) -> ProjPoint {
        ProjPoint::new(c.iter().map(|&x| Rat::from_integer(x.into())).collect())
            .expect("nonzero literal")
    }

    /// The coordinate point `[e_i]`.
    pub fn basis(n: usize, i: usize) -> ProjPoint {
        let mut c = vec![Rat::zero(); n];
        c[i] = Rat::one();
        ProjPoint { coords: c }
    }

    pub fn coords(&self) -> &[Rat] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// A nearby point whose coordinates are dyadic with `bits` fractional bits
    /// relative to the largest coordinate.
    pub fn rounded(&self, bits: u32) -> ProjPoint {
        let scale = self.coords.iter().map(|x| x.abs()).max().expect("nonempty");
        let c: Vec<Rat> = self
            .coords
            .iter()
            .map(|x| round_dyadic(&(x / &scale), bits))
            .collect();
        ProjPoint::new(c).unwrap_or_else(|_| self.clone())
    }
}

/// `ker f` for a nonzero covector `f`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProjHyperplane {
    functional: Vec<Rat>,
}

impl fmt::Debug for ProjHyperplane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ker")?;
        fmt_coords(f, &self.functional)
    }
}

impl ProjHyperplane {
    pub fn new(functional: Vec<Rat>) -> Result<ProjHyperplane> {
        if functional.len() < 2 {
            return Err(Error::Invalid("hyperplanes need n ≥ 2".into()));
        }
        Ok(ProjHyperplane {
            functional: canonical(functional)?,
        })
    }

    pub fn from_i64(c: &[i64]) -> ProjHyperplane {
        ProjHyperplane::new(c.iter().map(|&x| Rat::from_integer(x.into())).collect())
            .expect("nonzero literal")
    }

    /// `ker x_i`.
    pub fn coordinate(n: usize, i: usize) -> ProjHyperplane {
        let mut c = vec![Rat::zero(); n];
        c[i] = Rat::one();
        ProjHyperplane { functional: c }
    }

    pub fn functional(&self) -> &[Rat] {
        &self.functional
    }

    pub fn dim(&self) -> usize {
        self.functional.len()
    }

    pub fn eval(&self, v: &[Rat]) -> Rat {
        dot(&self.functional, v)
    }

    pub fn contains(&self, p: &ProjPoint) -> bool {
        self.eval(p.coords()).is_zero()
    }

    /// The functional read as a point of the dual projective space.
    pub fn as_dual_point(&self) -> ProjPoint {
        ProjPoint {
            coords: self.functional.clone(),
        }
    }

    pub fn from_dual_point(p: &ProjPoint) -> ProjHyperplane {
        ProjHyperplane {
            functional: p.coords.clone(),
        }
    }

    /// In `P¹` a hyperplane is a single point.
    pub fn as_point_p1(&self) -> Option<ProjPoint> {
        (self.dim() == 2).then(|| {
            ProjPoint::new(vec![
                -self.functional[1].clone(),
                self.functional[0].clone(),
            ])
            .expect("nonzero")
        })
    }
}

pub fn dot(a: &[Rat], b: &[Rat]) -> Rat {
    a.iter().zip(b).fold(Rat::zero(), |acc, (x, y)| acc + x * y)
}

pub fn norm_sq(v: &[Rat], place: Place) -> Rat {
    match place {
        Place::Archimedean => v.iter().fold(Rat::zero(), |acc, x| acc + x * x),
        Place::PAdic(_) => v
            .iter()
            .map(|x| abs_sq(x, place))
            .max()
            .unwrap_or_else(Rat::zero),
    }
}

pub fn wedge(v: &[Rat], w: &[Rat]) -> Result<Vec<Rat>> {
    if v.len() != w.len() {
        return Err(Error::DimensionMismatch(v.len(), w.len()));
    }
    Ok(index_pairs(v.len())
        .into_iter()
        .map(|(i, j)| &v[i] * &w[j] - &v[j] * &w[i])
        .collect())
}

/// `‖v∧w‖²`, using the Lagrange identity at the archimedean place.
fn wedge_norm_sq(v: &[Rat], w: &[Rat], place: Place) -> Rat {
    match place {
        Place::Archimedean => {
            let d = dot(v, w);
            norm_sq(v, place) * norm_sq(w, place) - &d * &d
        }
        Place::PAdic(_) => norm_sq(&wedge(v, w).expect("same dimension"), place),
    }
}

/// `d([v],[w])² = ‖v∧w‖² / (‖v‖²‖w‖²)`.
pub fn dist_sq(p: &ProjPoint, q: &ProjPoint, place: Place) -> Rat {
    vec_dist_sq(p.coords(), q.coords(), place)
}

pub fn vec_dist_sq(v: &[Rat], w: &[Rat], place: Place) -> Rat {
    wedge_norm_sq(v, w, place) / (norm_sq(v, place) * norm_sq(w, place))
}

/// `d([v], ker f)² = |f(v)|² / (‖f‖²‖v‖²)`.
pub fn dist_to_hyperplane_sq(p: &ProjPoint, h: &ProjHyperplane, place: Place) -> Rat {
    let fv = h.eval(p.coords());
    abs_sq(&fv, place) / (norm_sq(h.functional(), place) * norm_sq(p.coords(), place))
}

/// Distance between hyperplanes read as points of the dual space; it equals the
/// largest distance from a point of one hyperplane to the other.
pub fn hyperplane_dist_sq(a: &ProjHyperplane, b: &ProjHyperplane, place: Place) -> Rat {
    vec_dist_sq(a.functional(), b.functional(), place)
}

#[derive(Clone, PartialEq, Eq)]
pub struct ProjMat {
    mat: Mat,
    place: Place,
}

impl fmt::Debug for ProjMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}@{}", self.mat, self.place)
    }
}

impl ProjMat {
    pub fn new(mat: Mat, place: Place) -> Result<ProjMat> {
        if !mat.is_square() {
            return Err(Error::DimensionMismatch(mat.rows(), mat.cols()));
        }
        if mat.rows() < 2 {
            return Err(Error::Invalid("projective matrices need n ≥ 2".into()));
        }
        if mat.det().is_zero() {
            return Err(Error::Singular);
        }
        Ok(ProjMat { mat, place })
    }

    pub fn from_i64(rows: &[&[i64]], place: Place) -> ProjMat {
        ProjMat::new(Mat::from_i64(rows), place).expect("invertible literal")
    }

    pub fn identity(n: usize, place: Place) -> ProjMat {
        ProjMat {
            mat: Mat::identity(n),
            place,
        }
    }

    pub fn diag(entries: &[Rat], place: Place) -> Result<ProjMat> {
        ProjMat::new(Mat::diag(entries), place)
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn place(&self) -> Place {
        self.place
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn mul(&self, other: &ProjMat) -> ProjMat {
        assert_eq!(self.place, other.place, "place mismatch");
        ProjMat {
            mat: self.mat.mul(&other.mat),
            place: self.place,
        }
    }

    pub fn inverse(&self) -> ProjMat {
        ProjMat {
            mat: self.mat.inverse().expect("invertible by construction"),
            place: self.place,
        }
    }

    pub fn transpose(&self) -> ProjMat {
        ProjMat {
            mat: self.mat.transpose(),
            place: self.place,
        }
    }

    /// `g^e` for any integer `e`.
    pub fn pow(&self, e: i64) -> ProjMat {
        let base = if e < 0 { self.inverse() } else { self.clone() };
        ProjMat {
            mat: base.mat.pow(e.unsigned_abs() as u32),
            place: self.place,
        }
    }

    /// Representative with primitive integer entries; harmless projectively
    /// and keeps products small.
    pub fn normalized(&self) -> ProjMat {
        let im = self.mat.primitive_integer();
        let rows = im
            .data
            .chunks(im.n)
            .map(|r| r.iter().map(|x| Rat::from_integer(x.clone())).collect())
            .collect();
        ProjMat {
            mat: Mat::from_rows(rows).expect("square"),
            place: self.place,
        }
    }

    pub fn equals_projectively(&self, other: &ProjMat) -> bool {
        self.mat.proportional(&other.mat)
    }

    pub fn apply(&self, p: &ProjPoint) -> ProjPoint {
        ProjPoint::new(self.mat.mul_vec(p.coords())).expect("invertible map")
    }

    /// `g·ker f = ker(f∘g⁻¹)`.
    pub fn apply_hyperplane(&self, h: &ProjHyperplane) -> ProjHyperplane {
        let inv = self.mat.inverse().expect("invertible");
        ProjHyperplane::new(inv.transpose().mul_vec(h.functional())).expect("invertible map")
    }

    /// `‖g‖²` in the norm used for Lipschitz bounds: Frobenius at the
    /// archimedean place, max-entry otherwise.
    pub fn norm_sq(&self) -> Rat {
        match self.place {
            Place::Archimedean => self.mat.frobenius_sq(),
            Place::PAdic(_) => norm_sq(self.mat.entries(), self.place),
        }
    }

    /// `‖Λ²g‖²` in the same norm.
    pub fn compound_norm_sq(&self) -> Rat {
        let c = self.mat.compound2();
        match self.place {
            Place::Archimedean => c.frobenius_sq(),
            Place::PAdic(_) => norm_sq(c.entries(), self.place),
        }
    }
}

pub fn apply(g: &ProjMat, p: &ProjPoint) -> ProjPoint {
    g.apply(p)
}

#[derive(Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Ball {
        center: ProjPoint,
        #[serde(with = "crate::scalar::rat_serde")]
        radius_sq: Rat,
    },
    Nbhd {
        plane: ProjHyperplane,
        #[serde(with = "crate::scalar::rat_serde")]
        radius_sq: Rat,
    },
}

impl Shape {
    pub fn radius_sq(&self) -> &Rat {
        match self {
            Shape::Ball { radius_sq, .. } | Shape::Nbhd { radius_sq, .. } => radius_sq,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Shape::Ball { center, .. } => center.dim(),
            Shape::Nbhd { plane, .. } => plane.dim(),
        }
    }

    /// Squared distance from `p` to the core (center or hyperplane).
    pub fn core_dist_sq(&self, p: &ProjPoint, place: Place) -> Rat {
        match self {
            Shape::Ball { center, .. } => dist_sq(p, center, place),
            Shape::Nbhd { plane, .. } => dist_to_hyperplane_sq(p, plane, place),
        }
    }
}

/// A nonempty finite union of open balls and open hyperplane neighborhoods.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ProjSet {
    parts: Vec<Shape>,
}

fn check_radius(r: &Rat) -> Result<()> {
    if !r.is_positive() || r > &Rat::one() {
        return Err(Error::Invalid(format!(
            "radius_sq {} outside (0,1]",
            fmt_rat(r)
        )));
    }
    Ok(())
}

impl ProjSet {
    pub fn ball(center: ProjPoint, radius_sq: Rat) -> Result<ProjSet> {
        check_radius(&radius_sq)?;
        Ok(ProjSet {
            parts: vec![Shape::Ball { center, radius_sq }],
        })
    }

    /// Hyperplane neighborhood. In `P¹` this is stored as the equal ball
    /// around the point `ker f`.
    pub fn hnbhd(plane: ProjHyperplane, radius_sq: Rat) -> Result<ProjSet> {
        check_radius(&radius_sq)?;
        let shape = match plane.as_point_p1() {
            Some(center) => Shape::Ball { center, radius_sq },
            None => Shape::Nbhd { plane, radius_sq },
        };
        Ok(ProjSet { parts: vec![shape] })
    }

    pub fn from_shapes(parts: Vec<Shape>) -> Result<ProjSet> {
        if parts.is_empty() {
            return Err(Error::Invalid("empty set union".into()));
        }
        let n = parts[0].dim();
        for s in &parts {
            check_radius(s.radius_sq())?;
            if s.dim() != n {
                return Err(Error::DimensionMismatch(n, s.dim()));
            }
        }
        let mut out = Vec::with_capacity(parts.len());
        for s in parts {
            out.extend(ProjSet::canonical_shape(s).parts);
        }
        Ok(ProjSet { parts: out })
    }

    fn canonical_shape(s: Shape) -> ProjSet {
        match s {
            Shape::Nbhd { plane, radius_sq } => {
                ProjSet::hnbhd(plane, radius_sq).expect("radius already checked")
            }
            b => ProjSet { parts: vec![b] },
        }
    }

    pub fn union(&self, other: &ProjSet) -> ProjSet {
        let mut parts = self.parts.clone();
        parts.extend(other.parts.iter().cloned());
        ProjSet { parts }
    }

    pub fn parts(&self) -> &[Shape] {
        &self.parts
    }

    pub fn dim(&self) -> usize {
        self.parts[0].dim()
    }
}

pub fn set_member(p: &ProjPoint, s: &ProjSet, place: Place) -> bool {
    s.parts
        .iter()
        .any(|sh| sh.core_dist_sq(p, place) < *sh.radius_sq())
}

/// Membership in the closure of `s`.
pub fn in_closure(p: &ProjPoint, s: &ProjSet, place: Place) -> bool {
    s.parts
        .iter()
        .any(|sh| sh.core_dist_sq(p, place) <= *sh.radius_sq())
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Disjointness {
    CertifiedDisjoint,
    CertifiedOverlap(ProjPoint),
    Unknown,
}

/// Margin between the cores of two shapes, as a squared distance, when a
/// separation certificate of the triangle/Lipschitz kind applies.
fn core_gap_sq(a: &Shape, b: &Shape, place: Place) -> Option<Rat> {
    match (a, b) {
        (Shape::Ball { center: c1, .. }, Shape::Ball { center: c2, .. }) => {
            Some(dist_sq(c1, c2, place))
        }
        (Shape::Ball { center, .. }, Shape::Nbhd { plane, .. })
        | (Shape::Nbhd { plane, .. }, Shape::Ball { center, .. }) => {
            Some(dist_to_hyperplane_sq(center, plane, place))
        }
        // Two hyperplanes of P^{n-1}, n ≥ 3, always meet.
        (Shape::Nbhd { .. }, Shape::Nbhd { .. }) => None,
    }
}

fn shape_overlap_witness(a: &Shape, b: &Shape, place: Place) -> Option<ProjPoint> {
    let inside = |p: &ProjPoint| {
        a.core_dist_sq(p, place) < *a.radius_sq() && b.core_dist_sq(p, place) < *b.radius_sq()
    };
    let mut candidates: Vec<ProjPoint> = Vec::new();
    match (a, b) {
        (Shape::Ball { center: c1, .. }, Shape::Ball { center: c2, .. }) => {
            candidates.push(c1.clone());
            candidates.push(c2.clone());
            for k in -24i32..=24 {
                for sign in [1i64, -1] {
                    let t = Rat::from_integer(BigInt::from(sign))
                        * if k >= 0 {
                            Rat::from_integer(BigInt::one() << k as usize)
                        } else {
                            Rat::new(BigInt::one(), BigInt::one() << (-k) as usize)
                        };
                    let v: Vec<Rat> = c1
                        .coords()
                        .iter()
                        .zip(c2.coords())
                        .map(|(x, y)| x + &t * y)
                        .collect();
                    if let Ok(p) = ProjPoint::new(v) {
                        candidates.push(p);
                    }
                }
            }
        }
        (Shape::Ball { center, .. }, Shape::Nbhd { plane, .. })
        | (Shape::Nbhd { plane, .. }, Shape::Ball { center, .. }) => {
            candidates.push(center.clone());
            let proj = projection_step(center, plane, place);
            for k in 0..=64u32 {
                let s = Rat::new(BigInt::from(k), BigInt::from(64));
                let v: Vec<Rat> = center
                    .coords()
                    .iter()
                    .zip(&proj)
                    .map(|(x, d)| x - &s * d)
                    .collect();
                if let Ok(p) = ProjPoint::new(v) {
                    candidates.push(p);
                }
            }
        }
        (Shape::Nbhd { plane: h1, .. }, Shape::Nbhd { plane: h2, .. }) => {
            let m = Mat::from_rows(vec![h1.functional().to_vec(), h2.functional().to_vec()])
                .expect("same dimension");
            for v in kernel(&m) {
                if let Ok(p) = ProjPoint::new(v) {
                    candidates.push(p);
                }
            }
        }
    }
    candidates.into_iter().find(inside)
}

/// The step `δ` with `c − δ ∈ H`: orthogonal at the archimedean place, along
/// the coordinate of largest `|f_i|` otherwise.
fn projection_step(c: &ProjPoint, h: &ProjHyperplane, place: Place) -> Vec<Rat> {
    let f = h.functional();
    let fc = h.eval(c.coords());
    match place {
        Place::Archimedean => {
            let s = &fc / dot(f, f);
            f.iter().map(|x| x * &s).collect()
        }
        Place::PAdic(_) => {
            let i = (0..f.len())
                .max_by(|&i, &j| {
                    abs_sq(&f[i], place)
                        .cmp(&abs_sq(&f[j], place))
                        .then(j.cmp(&i))
                })
                .expect("nonempty");
            let mut d = vec![Rat::zero(); f.len()];
            d[i] = &fc / &f[i];
            d
        }
    }
}

/// Disjointness of two open sets. Components are separated when their cores
/// are at distance at least `√r₁ + √r₂`, which is exact for the margin rule
/// (no rounding is involved).
pub fn set_disjoint(s: &ProjSet, t: &ProjSet, place: Place) -> Disjointness {
    let mut all_separated = true;
    for a in &s.parts {
        for b in &t.parts {
            if let Some(w) = shape_overlap_witness(a, b, place) {
                return Disjointness::CertifiedOverlap(w);
            }
            let separated = core_gap_sq(a, b, place)
                .is_some_and(|gap| sqrt_sum_le(a.radius_sq(), b.radius_sq(), &gap));
            all_separated &= separated;
        }
    }
    if all_separated {
        Disjointness::CertifiedDisjoint
    } else {
        Disjointness::Unknown
    }
}

/// Certified disjointness of the closures (strict margins).
pub fn closures_disjoint(s: &ProjSet, t: &ProjSet, place: Place) -> bool {
    s.parts.iter().all(|a| {
        t.parts.iter().all(|b| {
            core_gap_sq(a, b, place)
                .is_some_and(|gap| sqrt_sum_lt(a.radius_sq(), b.radius_sq(), &gap))
        })
    })
}

fn shape_within(outer: &Shape, inner: &Shape, place: Place, strict: bool) -> bool {
    let test = |gap: Rat, r_in: &Rat, r_out: &Rat| {
        if strict {
            sqrt_sum_lt(&gap, r_in, r_out)
        } else {
            sqrt_sum_le(&gap, r_in, r_out)
        }
    };
    match (outer, inner) {
        (
            Shape::Ball {
                center: c2,
                radius_sq: r2,
            },
            Shape::Ball {
                center: c1,
                radius_sq: r1,
            },
        ) => test(dist_sq(c1, c2, place), r1, r2),
        (
            Shape::Nbhd {
                plane,
                radius_sq: r2,
            },
            Shape::Ball {
                center,
                radius_sq: r1,
            },
        ) => test(dist_to_hyperplane_sq(center, plane, place), r1, r2),
        (
            Shape::Nbhd {
                plane: h2,
                radius_sq: r2,
            },
            Shape::Nbhd {
                plane: h1,
                radius_sq: r1,
            },
        ) => test(hyperplane_dist_sq(h1, h2, place), r1, r2),
        // A hyperplane neighborhood in dimension ≥ 3 is never inside a ball
        // of radius < 1.
        (Shape::Ball { .. }, Shape::Nbhd { .. }) => false,
    }
}

/// Certified `inner ⊆ outer`, componentwise.
pub fn set_within(inner: &ProjSet, outer: &ProjSet, place: Place) -> bool {
    inner
        .parts
        .iter()
        .all(|i| outer.parts.iter().any(|o| shape_within(o, i, place, false)))
}

/// Certified `closure(inner) ⊆ outer` with a strict margin.
pub fn closure_within(inner: &ProjSet, outer: &ProjSet, place: Place) -> bool {
    inner
        .parts
        .iter()
        .all(|i| outer.parts.iter().any(|o| shape_within(o, i, place, true)))
}

/// A ball around `g·c` containing `g·ball(c, ρ)`, from a local Lipschitz
/// bound of the action; `None` when the bound degenerates.
pub fn push_ball(g: &ProjMat, center: &ProjPoint, radius_sq: &Rat) -> Option<(ProjPoint, Rat)> {
    let place = g.place();
    let gc = g.mat().mul_vec(center.coords());
    let c2 = norm_sq(center.coords(), place);
    let gamma = norm_sq(&gc, place) / &c2;
    let lam = g.compound_norm_sq();
    let gn = g.norm_sq();
    let bound = match place {
        Place::Archimedean => {
            let low =
                sqrt_lower(&((Rat::one() - radius_sq) * &gamma)) - sqrt_upper(&(radius_sq * &gn));
            if !low.is_positive() {
                return None;
            }
            lam * radius_sq / (&gamma * &low * &low)
        }
        Place::PAdic(_) => {
            if &gn * radius_sq >= gamma {
                return None;
            }
            lam * radius_sq / (&gamma * &gamma)
        }
    };
    let bound = round_up_sig(&bound, RADIUS_BITS);
    if bound > Rat::one() {
        return None;
    }
    Some((ProjPoint::new(gc).expect("invertible"), bound))
}

/// A hyperplane neighborhood containing `g·hnbhd(H, ρ)`.
pub fn push_nbhd(
    g: &ProjMat,
    plane: &ProjHyperplane,
    radius_sq: &Rat,
) -> Option<(ProjHyperplane, Rat)> {
    let place = g.place();
    let inv = g.inverse();
    let fg = inv.mat().transpose().mul_vec(plane.functional());
    let k = norm_sq(plane.functional(), place) * inv.norm_sq() / norm_sq(&fg, place);
    let bound = round_up_sig(&(k * radius_sq), RADIUS_BITS);
    if bound > Rat::one() {
        return None;
    }
    Some((ProjHyperplane::new(fg).expect("invertible"), bound))
}

/// A set containing `g·S`, or `None` if some component cannot be bounded.
pub fn push_set(g: &ProjMat, s: &ProjSet) -> Option<ProjSet> {
    let parts = s
        .parts
        .iter()
        .map(|sh| match sh {
            Shape::Ball { center, radius_sq } => push_ball(g, center, radius_sq)
                .map(|(center, radius_sq)| Shape::Ball { center, radius_sq }),
            Shape::Nbhd { plane, radius_sq } => push_nbhd(g, plane, radius_sq)
                .map(|(plane, radius_sq)| Shape::Nbhd { plane, radius_sq }),
        })
        .collect::<Option<Vec<_>>>()?;
    Some(ProjSet { parts })
}

fn de_coords<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rat>, D::Error> {
    crate::scalar::rat_vec_serde::deserialize(d)
}

impl Serialize for ProjPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::scalar::rat_vec_serde::serialize(&self.coords, s)
    }
}

impl<'de> Deserialize<'de> for ProjPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<ProjPoint, D::Error> {
        ProjPoint::new(de_coords(d)?).map_err(serde::de::Error::custom)
    }
}

impl Serialize for ProjHyperplane {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::scalar::rat_vec_serde::serialize(&self.functional, s)
    }
}

impl<'de> Deserialize<'de> for ProjHyperplane {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<ProjHyperplane, D::Error> {
        ProjHyperplane::new(de_coords(d)?).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct RawProjMat {
    place: Place,
    rows: Mat,
}

impl Serialize for ProjMat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawProjMat {
            place: self.place,
            rows: self.mat.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProjMat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<ProjMat, D::Error> {
        let raw = RawProjMat::deserialize(d)?;
        ProjMat::new(raw.rows, raw.place).map_err(serde::de::Error::custom)
    }
}

impl Serialize for ProjSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.parts.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProjSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<ProjSet, D::Error> {
        ProjSet::from_shapes(Vec::<Shape>::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};
    use proptest::prelude::*;

    const ARCH: Place = Place::Archimedean;

    fn e(n: usize, i: usize) -> ProjPoint {
        ProjPoint::basis(n, i)
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm_sq(&[int(1), int(1)], ARCH), int(2));
        assert_eq!(norm_sq(&[int(1), int(5)], Place::PAdic(5)), int(1));
        assert_eq!(norm_sq(&[int(0), int(0)], Place::PAdic(3)), int(0));
    }

    #[test]
    fn wedge_examples() {
        assert_eq!(
            wedge(&[int(1), int(0)], &[int(0), int(1)]).unwrap(),
            vec![int(1)]
        );
        assert_eq!(
            wedge(&[int(1), int(0)], &[int(1), int(1)]).unwrap(),
            vec![int(1)]
        );
        assert_eq!(
            wedge(&[int(1), int(2)], &[int(2), int(4)]).unwrap(),
            vec![int(0)]
        );
        assert!(wedge(&[int(1), int(2)], &[int(2), int(4), int(0)]).is_err());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(dist_sq(&e(2, 0), &e(2, 1), ARCH), int(1));
        let p = ProjPoint::from_i64(&[1, 0]);
        assert_eq!(dist_sq(&p, &ProjPoint::from_i64(&[1, 1]), ARCH), rat(1, 2));
        assert_eq!(
            dist_sq(&p, &ProjPoint::from_i64(&[1, 5]), Place::PAdic(5)),
            rat(1, 25)
        );

        let x2 = ProjHyperplane::coordinate(2, 1);
        assert_eq!(dist_to_hyperplane_sq(&e(2, 1), &x2, ARCH), int(1));
        assert_eq!(
            dist_to_hyperplane_sq(&ProjPoint::from_i64(&[1, 1]), &x2, ARCH),
            rat(1, 2)
        );
        let x1 = ProjHyperplane::coordinate(2, 0);
        for place in [ARCH, Place::PAdic(3)] {
            assert_eq!(dist_to_hyperplane_sq(&e(2, 1), &x1, place), int(0));
        }
    }

    #[test]
    fn apply_examples() {
        let g = ProjMat::from_i64(&[&[2, 1], &[1, 1]], ARCH);
        assert_eq!(g.apply(&e(2, 1)), ProjPoint::from_i64(&[1, 1]));
        assert_eq!(
            g.apply(&ProjPoint::from_i64(&[1, 1])),
            ProjPoint::from_i64(&[3, 2])
        );
        let id = ProjMat::identity(2, ARCH);
        assert_eq!(
            id.apply(&ProjPoint::from_i64(&[3, 7])),
            ProjPoint::from_i64(&[3, 7])
        );
    }

    #[test]
    fn disjointness_examples() {
        let b1 = ProjSet::ball(e(2, 0), rat(1, 100)).unwrap();
        let b2 = ProjSet::ball(e(2, 1), rat(1, 100)).unwrap();
        assert_eq!(
            set_disjoint(&b1, &b2, ARCH),
            Disjointness::CertifiedDisjoint
        );

        let p = ProjPoint::from_i64(&[2, 3]);
        let s = ProjSet::ball(p.clone(), rat(1, 9)).unwrap();
        assert_eq!(
            set_disjoint(&s, &s, ARCH),
            Disjointness::CertifiedOverlap(p)
        );

        // Boundary case: core distance 1 equals the margin 1/2 + 1/2.
        let b = ProjSet::ball(e(2, 0), rat(1, 4)).unwrap();
        let h = ProjSet::hnbhd(ProjHyperplane::coordinate(2, 0), rat(1, 4)).unwrap();
        assert_eq!(set_disjoint(&b, &h, ARCH), Disjointness::CertifiedDisjoint);
        assert!(!closures_disjoint(&b, &h, ARCH));
    }

    #[test]
    fn hyperplane_neighborhoods_in_higher_dimension_meet() {
        let h1 = ProjSet::hnbhd(ProjHyperplane::coordinate(3, 0), rat(1, 100)).unwrap();
        let h2 = ProjSet::hnbhd(ProjHyperplane::coordinate(3, 1), rat(1, 100)).unwrap();
        match set_disjoint(&h1, &h2, ARCH) {
            Disjointness::CertifiedOverlap(w) => {
                assert!(set_member(&w, &h1, ARCH) && set_member(&w, &h2, ARCH))
            }
            v => panic!("expected overlap, got {v:?}"),
        }
    }

    #[test]
    fn membership_examples() {
        let b = ProjSet::ball(e(2, 0), rat(1, 4)).unwrap();
        assert!(set_member(&e(2, 0), &b, ARCH));
        assert!(!set_member(&e(2, 1), &b, ARCH));
        let h = ProjSet::hnbhd(ProjHyperplane::coordinate(2, 1), rat(1, 2)).unwrap();
        assert!(!set_member(&ProjPoint::from_i64(&[1, 1]), &h, ARCH));
        assert!(in_closure(&ProjPoint::from_i64(&[1, 1]), &h, ARCH));
    }

    #[test]
    fn ball_hyperplane_overlap_witness() {
        let b = ProjSet::ball(ProjPoint::from_i64(&[1, 1, 0]), rat(1, 4)).unwrap();
        let h = ProjSet::hnbhd(ProjHyperplane::coordinate(3, 0), rat(1, 4)).unwrap();
        match set_disjoint(&b, &h, ARCH) {
            Disjointness::CertifiedOverlap(w) => {
                assert!(set_member(&w, &b, ARCH) && set_member(&w, &h, ARCH))
            }
            v => panic!("expected overlap, got {v:?}"),
        }
    }

    #[test]
    fn containment_rules() {
        let outer = ProjSet::ball(e(3, 0), rat(1, 4)).unwrap();
        let inner = ProjSet::ball(ProjPoint::from_i64(&[10, 1, 0]), rat(1, 100)).unwrap();
        assert!(set_within(&inner, &outer, ARCH));
        assert!(!set_within(&outer, &inner, ARCH));
        let h = ProjSet::hnbhd(ProjHyperplane::coordinate(3, 2), rat(1, 4)).unwrap();
        assert!(set_within(&inner, &h, ARCH));
        assert!(!set_within(&h, &outer, ARCH));
    }

    #[test]
    fn pushed_ball_contains_image_points() {
        let g = ProjMat::from_i64(&[&[3, 1, 0], &[1, 2, 1], &[0, 1, 1]], ARCH);
        let c = ProjPoint::from_i64(&[1, 1, 1]);
        let r = rat(1, 400);
        let (gc, r2) = push_ball(&g, &c, &r).unwrap();
        let img = ProjSet::ball(gc, r2).unwrap();
        let ball = ProjSet::ball(c.clone(), r.clone()).unwrap();
        for a in -4i64..=4 {
            for b in -4i64..=4 {
                let x = ProjPoint::new(vec![
                    int(60) + int(a),
                    int(60) + int(b),
                    int(60) - int(a) - int(b),
                ])
                .unwrap();
                if set_member(&x, &ball, ARCH) {
                    assert!(set_member(&g.apply(&x), &img, ARCH));
                }
            }
        }
    }

    fn point3() -> impl Strategy<Value = ProjPoint> {
        prop::collection::vec((-30i64..=30, 1i64..=6), 3).prop_filter_map("nonzero", |v| {
            ProjPoint::new(v.into_iter().map(|(n, d)| rat(n, d)).collect()).ok()
        })
    }

    fn place() -> impl Strategy<Value = Place> {
        prop_oneof![Just(ARCH), Just(Place::PAdic(5)), Just(Place::PAdic(2))]
    }

    proptest! {
        #[test]
        fn metric_symmetric_and_bounded(p in point3(), q in point3(), pl in place()) {
            let d = dist_sq(&p, &q, pl);
            prop_assert_eq!(&d, &dist_sq(&q, &p, pl));
            prop_assert!(d >= int(0) && d <= int(1));
            prop_assert_eq!(d.is_zero(), p == q);
        }

        #[test]
        fn hyperplane_distance_is_one_lipschitz(
            p in point3(), q in point3(), f in point3(), pl in place()
        ) {
            let h = ProjHyperplane::from_dual_point(&f);
            let a = dist_to_hyperplane_sq(&p, &h, pl);
            let b = dist_to_hyperplane_sq(&q, &h, pl);
            prop_assert!(crate::scalar::sqrt_diff_le(&a, &b, &dist_sq(&p, &q, pl)));
        }

        #[test]
        fn apply_ignores_scaling(p in point3(), n in 1i64..50, d in 1i64..50, pl in place()) {
            let g = ProjMat::from_i64(&[&[1, 2, 0], &[0, 1, 3], &[1, 0, 1]], pl);
            let lam = rat(n, d);
            let scaled: Vec<Rat> = p.coords().iter().map(|x| x * &lam).collect();
            prop_assert_eq!(
                g.apply(&ProjPoint::new(scaled).unwrap()),
                g.apply(&p)
            );
        }

        #[test]
        fn sup_over_hyperplane_is_dual_distance(f in point3(), g in point3(), pl in place()) {
            // Points of ker g never sit further than the dual distance from ker f.
            let hf = ProjHyperplane::from_dual_point(&f);
            let hg = ProjHyperplane::from_dual_point(&g);
            let m = Mat::from_rows(vec![g.coords().to_vec()]).unwrap();
            let bound = hyperplane_dist_sq(&hf, &hg, pl);
            for v in kernel(&m) {
                let x = ProjPoint::new(v).unwrap();
                prop_assert!(dist_to_hyperplane_sq(&x, &hf, pl) <= bound);
            }
        }
    }
}
