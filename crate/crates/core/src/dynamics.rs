//! Singular profiles, ε-contraction, proximality and fixed-point enclosures.
//!
//! Contraction certificates use the closed convention: `g` maps
//! `{x : d(x, H) > ε}` into `{x : d(x, v) ≤ ε}`.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{char_poly, is_pd, is_psd, local_smith, local_smith_valuations, Mat};
use crate::poly::{real_roots, simplest_between, Poly, Sturm};
use crate::projective::{
    closures_disjoint, dist_sq, dist_to_hyperplane_sq, norm_sq, push_ball, set_within,
    ProjHyperplane, ProjMat, ProjPoint, ProjSet,
};
use crate::scalar::{abs_sq, pow_p, round_dyadic, sqrt_sum_lt, Place, Rat};

/// Relative width of archimedean singular-value enclosures.
pub const PROFILE_BITS: u32 = 30;
/// Iteration budget for fixed-point enclosures.
pub const ENCLOSURE_ITERATIONS: usize = 64;
const ROUND_BITS: u32 = 64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "crate::scalar::rat_serde")]
    pub lo: Rat,
    #[serde(with = "crate::scalar::rat_serde")]
    pub hi: Rat,
}

impl Interval {
    pub fn exact(x: Rat) -> Interval {
        Interval {
            lo: x.clone(),
            hi: x,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: &Rat) -> bool {
        &self.lo <= x && x <= &self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingularProfile {
    /// Squared singular values, descending.
    pub values_sq: Vec<Interval>,
    pub exact: bool,
}

pub fn singular_profile(g: &ProjMat) -> SingularProfile {
    match g.place() {
        Place::Archimedean => {
            let values_sq = symmetric_spectrum(&g.mat().transpose().mul(g.mat()), PROFILE_BITS);
            let exact = values_sq.iter().all(Interval::is_exact);
            SingularProfile { values_sq, exact }
        }
        Place::PAdic(p) => {
            let v = local_smith_valuations(g.mat(), p).expect("invertible");
            SingularProfile {
                values_sq: v
                    .iter()
                    .map(|&e| Interval::exact(pow_p(p, -2 * e)))
                    .collect(),
                exact: true,
            }
        }
    }
}

/// Enclosures of the eigenvalues of a symmetric matrix, descending and
/// repeated by multiplicity.
fn symmetric_spectrum(m: &Mat, bits: u32) -> Vec<Interval> {
    let n = m.rows();
    if (0..n).all(|i| (0..n).all(|j| i == j || m.row(i)[j].is_zero())) {
        let mut d: Vec<Rat> = (0..n).map(|i| m.row(i)[i].clone()).collect();
        d.sort_by(|a, b| b.cmp(a));
        return d.into_iter().map(Interval::exact).collect();
    }
    let p = Poly::new(char_poly(m));
    let rel = Rat::new(BigInt::one(), BigInt::one() << bits as usize);
    let roots = real_roots(&p, &rel);
    // Successive gcds with the derivative expose repeated roots.
    let mut layers = Vec::new();
    let mut q = p.clone();
    loop {
        q = q.gcd(&q.derivative());
        if q.degree().unwrap_or(0) == 0 {
            break;
        }
        layers.push(Sturm::new(&q.squarefree()));
    }
    let mut out = Vec::new();
    for r in roots.iter().rev() {
        let mult = if r.is_exact() {
            p.multiplicity(&r.lo)
        } else {
            1 + layers.iter().filter(|s| s.count(&r.lo, &r.hi) > 0).count()
        };
        for _ in 0..mult {
            out.push(Interval {
                lo: r.lo.clone(),
                hi: r.hi.clone(),
            });
        }
    }
    out
}

/// Interval for `(σ₂/σ₁)²`.
pub fn contraction_gap_sq(g: &ProjMat) -> Interval {
    let prof = singular_profile(g);
    let (s1, s2) = (&prof.values_sq[0], &prof.values_sq[1]);
    Interval {
        lo: &s2.lo / &s1.hi,
        hi: &s2.hi / &s1.lo,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict<T> {
    Yes(T),
    /// A point refuting the claim.
    No(ProjPoint),
    Unknown,
}

impl<T> Verdict<T> {
    pub fn is_yes(&self) -> bool {
        matches!(self, Verdict::Yes(_))
    }

    pub fn yes(self) -> Option<T> {
        match self {
            Verdict::Yes(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContractionMethod {
    /// `Q₁ + λQ₂ ≼ 0` for the quadratic forms describing the two conditions.
    SLemma {
        #[serde(with = "crate::scalar::rat_serde")]
        lambda: Rat,
    },
    /// `g = left·diag·right` with `left`, `right` integral and unimodular at
    /// `p`; the supremum of `d(gx, v)` over the region is then explicit.
    Cartan {
        left: Mat,
        #[serde(with = "crate::scalar::rat_vec_serde")]
        diag: Vec<Rat>,
        right: Mat,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractionCert {
    #[serde(with = "crate::scalar::rat_serde")]
    pub epsilon_sq: Rat,
    pub attract: ProjPoint,
    pub repel: ProjHyperplane,
    pub method: ContractionMethod,
}

impl ContractionCert {
    /// Closed ball `{d(x, v)² ≤ ε²}`, stored as its open counterpart.
    pub fn attract_set(&self) -> ProjSet {
        ProjSet::ball(self.attract.clone(), self.epsilon_sq.clone()).expect("ε² ∈ (0,1)")
    }

    pub fn repel_set(&self) -> ProjSet {
        ProjSet::hnbhd(self.repel.clone(), self.epsilon_sq.clone()).expect("ε² ∈ (0,1)")
    }

    /// Re-checks the certificate from scratch. Multipliers refer to the
    /// primitive integer representative of `g`.
    pub fn verify(&self, g: &ProjMat) -> bool {
        if !self.epsilon_sq.is_positive() || self.epsilon_sq >= Rat::one() {
            return false;
        }
        if self.attract.dim() != g.dim() || self.repel.dim() != g.dim() {
            return false;
        }
        match (&self.method, g.place()) {
            (ContractionMethod::SLemma { lambda }, Place::Archimedean) => {
                if lambda.is_negative() {
                    return false;
                }
                let (q1, q2) = contraction_forms(
                    g.normalized().mat(),
                    self.attract.coords(),
                    self.repel.functional(),
                    &self.epsilon_sq,
                    &self.epsilon_sq,
                );
                is_psd(&q1.add(&q2.scale(lambda)).scale(&-Rat::one()))
            }
            (ContractionMethod::Cartan { left, diag, right }, Place::PAdic(p)) => {
                verify_cartan(g, p, left, diag, right, self)
            }
            _ => false,
        }
    }
}

fn verify_cartan(
    g: &ProjMat,
    p: u64,
    left: &Mat,
    diag: &[Rat],
    right: &Mat,
    cert: &ContractionCert,
) -> bool {
    let n = g.dim();
    let place = Place::PAdic(p);
    if left.rows() != n || right.rows() != n || diag.len() != n || !left.is_square() {
        return false;
    }
    if diag.iter().any(Zero::is_zero) {
        return false;
    }
    for k in [left, right] {
        if k.max_abs(place) > Rat::one() || abs_sq(&k.det(), place) != Rat::one() {
            return false;
        }
    }
    if !left.mul(&Mat::diag(diag)).mul(right).proportional(g.mat()) {
        return false;
    }
    let Ok(v) = ProjPoint::new(left.col(0)) else {
        return false;
    };
    let Ok(h) = ProjHyperplane::new(right.row(0).to_vec()) else {
        return false;
    };
    if v != cert.attract || h != cert.repel {
        return false;
    }
    cartan_sup_sq(p, diag, &cert.epsilon_sq) <= cert.epsilon_sq
}

/// `t²` for the smallest power `t` of `p` with `t > ε`.
fn padic_threshold_sq(p: u64, eps_sq: &Rat) -> (i64, Rat) {
    let mut k = 0i64;
    while pow_p(p, -2 * (k + 1)) > *eps_sq {
        k += 1;
    }
    (k, pow_p(p, -2 * k))
}

/// `sup d(gx, v)²` over `{d(x, H) > ε}` for the canonical Cartan pair.
fn cartan_sup_sq(p: u64, diag: &[Rat], eps_sq: &Rat) -> Rat {
    let place = Place::PAdic(p);
    let s1 = abs_sq(&diag[0], place);
    let s2 = diag[1..]
        .iter()
        .map(|d| abs_sq(d, place))
        .max()
        .expect("n ≥ 2");
    let (_, t_sq) = padic_threshold_sq(p, eps_sq);
    (s2 / (s1 * t_sq)).min(Rat::one())
}

/// Quadratic forms with `Q₁(x) ≤ 0 ⟺ d(gx, v)² ≤ a` and
/// `Q₂(x) > 0 ⟺ d(x, ker f)² > r` (archimedean place).
pub fn contraction_forms(g: &Mat, v: &[Rat], f: &[Rat], a: &Rat, r: &Rat) -> (Mat, Mat) {
    let n = g.rows();
    let gtg = g.transpose().mul(g);
    let vv = norm_sq(v, Place::Archimedean);
    let u = g.transpose().mul_vec(v);
    let mut q1 = gtg.scale(&(&vv * (Rat::one() - a)));
    let ff = norm_sq(f, Place::Archimedean);
    let mut q2 = Mat::identity(n).scale(&-(r * &ff));
    for i in 0..n {
        for j in 0..n {
            q1[(i, j)] -= &u[i] * &u[j];
            q2[(i, j)] += &f[i] * &f[j];
        }
    }
    (q1, q2)
}

fn strictly_between(a: &Rat, b: &Rat) -> Rat {
    let s = simplest_between(a, b);
    if &s == a || &s == b {
        (a + b) / Rat::from_integer(2.into())
    } else {
        s
    }
}

/// Smallest candidate `λ ≥ 0` with `Q₁ + λQ₂ ≼ 0` (`≺ 0` when `strict`).
/// Candidates sit between consecutive real roots of `det(−(Q₁ + λQ₂))`,
/// which bound every maximal interval of feasible multipliers.
pub fn find_multiplier(q1: &Mat, q2: &Mat, strict: bool) -> Option<Rat> {
    let n = q1.rows();
    let m = |l: &Rat| q1.add(&q2.scale(l)).scale(&-Rat::one());
    let xs: Vec<Rat> = (0..=n as i64)
        .map(|i| Rat::from_integer(i.into()))
        .collect();
    let ys: Vec<Rat> = xs.iter().map(|x| m(x).det()).collect();
    let p = Poly::interpolate(&xs, &ys);
    let mut cands = vec![Rat::zero()];
    if p.is_zero() {
        cands.extend((0..40).map(|k| Rat::from_integer(BigInt::one() << k)));
    } else {
        let rel = Rat::new(BigInt::one(), BigInt::one() << 40);
        let mut prev = Rat::zero();
        for r in real_roots(&p, &rel) {
            if !r.hi.is_positive() {
                continue;
            }
            if prev < r.lo {
                cands.push(strictly_between(&prev, &r.lo));
            }
            if r.is_exact() && !strict {
                cands.push(r.lo.clone());
            }
            prev = prev.max(r.hi.clone());
        }
        cands.push(prev + Rat::one());
    }
    cands.sort();
    cands.dedup();
    cands.into_iter().find(|l| {
        let mm = m(l);
        if strict {
            is_pd(&mm)
        } else {
            is_psd(&mm)
        }
    })
}

fn round_vec(v: &[Rat], bits: u32) -> Vec<Rat> {
    let scale = v.iter().map(|x| x.abs()).max().expect("nonempty");
    if scale.is_zero() {
        return v.to_vec();
    }
    v.iter()
        .map(|x| round_dyadic(&(x / &scale), bits))
        .collect()
}

fn round_mat(m: &Mat, bits: u32) -> Mat {
    let scale = m.entries().iter().map(|x| x.abs()).max().expect("nonempty");
    let rows = (0..m.rows())
        .map(|i| {
            m.row(i)
                .iter()
                .map(|x| round_dyadic(&(x / &scale), bits))
                .collect()
        })
        .collect();
    Mat::from_rows(rows).expect("rectangular")
}

/// Rational approximations `(v, f)` of the top left and right singular
/// directions, by repeated squaring of `gᵀg`.
pub fn singular_directions(g: &Mat) -> (Vec<Rat>, Vec<Rat>) {
    let mut m = round_mat(&g.transpose().mul(g), ROUND_BITS);
    for _ in 0..7 {
        m = round_mat(&m.mul(&m), ROUND_BITS);
    }
    let j = (0..m.cols())
        .max_by(|&a, &b| {
            let na = norm_sq(&m.col(a), Place::Archimedean);
            let nb = norm_sq(&m.col(b), Place::Archimedean);
            na.cmp(&nb).then(b.cmp(&a))
        })
        .expect("n ≥ 2");
    let f = round_vec(&m.col(j), ROUND_BITS);
    let v = round_vec(&g.mul_vec(&f), ROUND_BITS);
    (v, f)
}

/// Deterministic candidate points for refuting a contraction claim.
pub fn probe_points(n: usize, extra: &[Vec<Rat>]) -> Vec<ProjPoint> {
    let range: i64 = match n {
        2 => 12,
        3 => 4,
        4 => 2,
        5..=7 => 1,
        _ => 0,
    };
    let mut out: Vec<ProjPoint> = Vec::new();
    for e in extra {
        if let Ok(p) = ProjPoint::new(e.clone()) {
            out.push(p);
        }
        for i in 0..n {
            for t in [-4i64, -2, -1, 1, 2, 4] {
                for d in [1i64, 4] {
                    let mut x = e.clone();
                    x[i] += Rat::new(t.into(), d.into());
                    if let Ok(p) = ProjPoint::new(x) {
                        out.push(p);
                    }
                }
            }
        }
    }
    if range > 0 {
        let width = (2 * range + 1) as usize;
        let total = width.pow(n as u32);
        for idx in 0..total {
            let mut k = idx;
            let coords: Vec<Rat> = (0..n)
                .map(|_| {
                    let c = (k % width) as i64 - range;
                    k /= width;
                    Rat::from_integer(c.into())
                })
                .collect();
            if let Ok(p) = ProjPoint::new(coords) {
                out.push(p);
            }
        }
    }
    out
}

/// A point `x` with `d(x, H)² > r` and `d(gx, v)² > a`, if the probes find one.
pub fn mapping_witness(
    g: &ProjMat,
    v: &ProjPoint,
    h: &ProjHyperplane,
    a: &Rat,
    r: &Rat,
    extra: &[Vec<Rat>],
) -> Option<ProjPoint> {
    let place = g.place();
    probe_points(g.dim(), extra)
        .into_iter()
        .find(|x| dist_to_hyperplane_sq(x, h, place) > *r && dist_sq(&g.apply(x), v, place) > *a)
}

/// The attracting point and repelling hyperplane that `certify_contracting`
/// would use for `g`, at any `ε`.
pub fn contraction_centers(g: &ProjMat) -> Result<(ProjPoint, ProjHyperplane)> {
    match g.place() {
        Place::Archimedean => {
            let (v, f) = singular_directions(g.normalized().mat());
            Ok((ProjPoint::new(v)?, ProjHyperplane::new(f)?))
        }
        Place::PAdic(p) => {
            let s = local_smith(g.mat(), p)?;
            Ok((
                ProjPoint::new(s.left.col(0))?,
                ProjHyperplane::new(s.right.row(0).to_vec())?,
            ))
        }
    }
}

pub fn certify_contracting(g: &ProjMat, epsilon_sq: &Rat) -> Result<Verdict<ContractionCert>> {
    if !epsilon_sq.is_positive() || epsilon_sq >= &Rat::one() {
        return Err(Error::Invalid("epsilon_sq must lie in (0,1)".into()));
    }
    Ok(match g.place() {
        Place::Archimedean => {
            // The multiplier depends on the scale of g; fix the primitive
            // integer representative.
            let g = &g.normalized();
            let (v, f) = singular_directions(g.mat());
            let attract = ProjPoint::new(v).expect("g invertible");
            let repel = ProjHyperplane::new(f).expect("nonzero direction");
            let (q1, q2) = contraction_forms(
                g.mat(),
                attract.coords(),
                repel.functional(),
                epsilon_sq,
                epsilon_sq,
            );
            if let Some(lambda) = find_multiplier(&q1, &q2, false) {
                Verdict::Yes(ContractionCert {
                    epsilon_sq: epsilon_sq.clone(),
                    attract,
                    repel,
                    method: ContractionMethod::SLemma { lambda },
                })
            } else {
                let extra = vec![repel.functional().to_vec()];
                match mapping_witness(g, &attract, &repel, epsilon_sq, epsilon_sq, &extra) {
                    Some(x) => Verdict::No(x),
                    None => Verdict::Unknown,
                }
            }
        }
        Place::PAdic(p) => {
            let s = local_smith(g.mat(), p)?;
            let attract = ProjPoint::new(s.left.col(0)).expect("unimodular");
            let repel = ProjHyperplane::new(s.right.row(0).to_vec()).expect("unimodular");
            if cartan_sup_sq(p, &s.diag, epsilon_sq) <= *epsilon_sq {
                Verdict::Yes(ContractionCert {
                    epsilon_sq: epsilon_sq.clone(),
                    attract,
                    repel,
                    method: ContractionMethod::Cartan {
                        left: s.left,
                        diag: s.diag,
                        right: s.right,
                    },
                })
            } else {
                // The supremum is attained at k₂⁻¹(pᵏ, 1, 0, …) with |pᵏ| = t,
                // after moving the largest remaining singular value to slot 2.
                let (k, _) = padic_threshold_sq(p, epsilon_sq);
                let place = Place::PAdic(p);
                let j = (1..g.dim())
                    .max_by(|&a, &b| {
                        abs_sq(&s.diag[a], place)
                            .cmp(&abs_sq(&s.diag[b], place))
                            .then(b.cmp(&a))
                    })
                    .expect("n ≥ 2");
                let mut y = vec![Rat::zero(); g.dim()];
                y[0] = Rat::from_integer(BigInt::from(p).pow(k as u32));
                y[j] = Rat::one();
                let x = s.right.inverse()?.mul_vec(&y);
                let x = ProjPoint::new(x).expect("nonzero");
                if dist_to_hyperplane_sq(&x, &repel, place) > *epsilon_sq
                    && dist_sq(&g.apply(&x), &attract, place) > *epsilon_sq
                {
                    Verdict::No(x)
                } else {
                    Verdict::Unknown
                }
            }
        }
    })
}

/// A ball that `g` maps strictly into itself.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enclosure {
    pub center: ProjPoint,
    #[serde(with = "crate::scalar::rat_serde")]
    pub radius_sq: Rat,
}

impl Enclosure {
    pub fn as_set(&self) -> ProjSet {
        ProjSet::ball(self.center.clone(), self.radius_sq.clone()).expect("radius in (0,1]")
    }

    /// Certified `g·closure(B) ⊂ B`.
    pub fn self_maps(&self, g: &ProjMat) -> bool {
        if !self.radius_sq.is_positive() || self.radius_sq > Rat::one() {
            return false;
        }
        let Some((gc, r2)) = push_ball(g, &self.center, &self.radius_sq) else {
            return false;
        };
        sqrt_sum_lt(&dist_sq(&gc, &self.center, g.place()), &r2, &self.radius_sq)
    }
}

/// Iterates `c ← g·c` (rounded) from `start` until the step stops shrinking,
/// then returns the smallest ball around `c` (radii in powers of 4) that maps
/// strictly into itself and lies inside `host`.
pub fn fixed_point_enclosure(g: &ProjMat, start: &ProjPoint, host: &ProjSet) -> Option<Enclosure> {
    let place = g.place();
    let host_r = host
        .parts()
        .iter()
        .map(|s| s.radius_sq().clone())
        .max()
        .expect("nonempty");
    let mut c = start.clone();
    let mut delta = dist_sq(&g.apply(&c), &c, place);
    for _ in 0..ENCLOSURE_ITERATIONS {
        if delta.is_zero() {
            break;
        }
        let next = g.apply(&c).rounded(ROUND_BITS);
        let next_delta = dist_sq(&g.apply(&next), &next, place);
        if next_delta >= delta {
            break;
        }
        c = next;
        delta = next_delta;
    }
    let radii: Vec<Rat> = if delta.is_zero() {
        (2..=ENCLOSURE_ITERATIONS as usize)
            .rev()
            .map(|k| &host_r / Rat::from_integer(BigInt::one() << (2 * k)))
            .collect()
    } else {
        (1..=ENCLOSURE_ITERATIONS as usize)
            .map(|k| &delta * Rat::from_integer(BigInt::one() << (2 * k)))
            .take_while(|r| r <= &host_r)
            .collect()
    };
    radii.into_iter().find_map(|r| {
        let enc = Enclosure {
            center: c.clone(),
            radius_sq: r,
        };
        (set_within(&enc.as_set(), host, place) && enc.self_maps(g)).then_some(enc)
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProximalCert {
    #[serde(with = "crate::scalar::rat_serde")]
    pub r_sq: Rat,
    #[serde(with = "crate::scalar::rat_serde")]
    pub epsilon_sq: Rat,
    pub contraction: ContractionCert,
    /// Encloses the attracting fixed point.
    pub fixed_point: Enclosure,
    /// Encloses the fixed hyperplane, as a point of the dual space fixed by `gᵀ`.
    pub fixed_plane: Enclosure,
    /// Certificate for the inverse when very proximal.
    pub very: Option<Box<ProximalCert>>,
}

impl ProximalCert {
    pub fn attract_set(&self) -> ProjSet {
        self.contraction.attract_set()
    }

    pub fn repel_set(&self) -> ProjSet {
        self.contraction.repel_set()
    }

    pub fn verify(&self, g: &ProjMat) -> bool {
        let place = g.place();
        let four = Rat::from_integer(4.into());
        if self.r_sq <= &four * &self.epsilon_sq || self.contraction.epsilon_sq != self.epsilon_sq {
            return false;
        }
        if !self.contraction.verify(g) {
            return false;
        }
        let c = &self.contraction;
        if dist_to_hyperplane_sq(&c.attract, &c.repel, place) < self.r_sq {
            return false;
        }
        if !(self.fixed_point.self_maps(g)
            && set_within(&self.fixed_point.as_set(), &c.attract_set(), place))
        {
            return false;
        }
        let dual_host = dual_ball(&c.repel, &self.epsilon_sq);
        if !(self.fixed_plane.self_maps(&g.transpose())
            && set_within(&self.fixed_plane.as_set(), &dual_host, place))
        {
            return false;
        }
        match &self.very {
            None => true,
            Some(inv) => {
                inv.very.is_none()
                    && inv.r_sq == self.r_sq
                    && inv.epsilon_sq == self.epsilon_sq
                    && inv.verify(&g.inverse())
                    && cross_disjoint(self, inv, place)
            }
        }
    }
}

fn dual_ball(h: &ProjHyperplane, r: &Rat) -> ProjSet {
    ProjSet::ball(h.as_dual_point(), r.clone()).expect("radius in (0,1)")
}

/// `𝒜(g)∩(ℛ(g)∪𝒜(g⁻¹)) = 𝒜(g⁻¹)∩(ℛ(g⁻¹)∪𝒜(g)) = ∅` for the closed sets.
fn cross_disjoint(fwd: &ProximalCert, inv: &ProximalCert, place: Place) -> bool {
    let (a, r) = (fwd.attract_set(), fwd.repel_set());
    let (ai, ri) = (inv.attract_set(), inv.repel_set());
    closures_disjoint(&a, &r, place)
        && closures_disjoint(&a, &ai, place)
        && closures_disjoint(&ai, &ri, place)
}

fn check_radii(r_sq: &Rat, epsilon_sq: &Rat) -> Result<()> {
    if r_sq <= &(epsilon_sq * Rat::from_integer(4.into())) {
        return Err(Error::RadiusTooSmall);
    }
    Ok(())
}

pub fn certify_proximal(
    g: &ProjMat,
    r_sq: &Rat,
    epsilon_sq: &Rat,
) -> Result<Verdict<ProximalCert>> {
    check_radii(r_sq, epsilon_sq)?;
    let place = g.place();
    let cert = match certify_contracting(g, epsilon_sq)? {
        Verdict::Yes(c) => c,
        Verdict::No(x) => return Ok(Verdict::No(x)),
        Verdict::Unknown => return Ok(Verdict::Unknown),
    };
    if dist_to_hyperplane_sq(&cert.attract, &cert.repel, place) < *r_sq {
        return Ok(Verdict::Unknown);
    }
    let Some(fixed_point) = fixed_point_enclosure(g, &cert.attract, &cert.attract_set()) else {
        return Ok(Verdict::Unknown);
    };
    let dual_host = dual_ball(&cert.repel, epsilon_sq);
    let Some(fixed_plane) =
        fixed_point_enclosure(&g.transpose(), &cert.repel.as_dual_point(), &dual_host)
    else {
        return Ok(Verdict::Unknown);
    };
    Ok(Verdict::Yes(ProximalCert {
        r_sq: r_sq.clone(),
        epsilon_sq: epsilon_sq.clone(),
        contraction: cert,
        fixed_point,
        fixed_plane,
        very: None,
    }))
}

/// Smallest `n ≤ max_n` with `gⁿ` certified proximal.
pub fn power_to_proximal(
    g: &ProjMat,
    r_sq: &Rat,
    epsilon_sq: &Rat,
    max_n: u32,
) -> Result<Option<(u32, ProximalCert)>> {
    check_radii(r_sq, epsilon_sq)?;
    let mut h = g.normalized();
    for n in 1..=max_n {
        if let Verdict::Yes(c) = certify_proximal(&h, r_sq, epsilon_sq)? {
            return Ok(Some((n, c)));
        }
        h = h.mul(g).normalized();
    }
    Ok(None)
}

pub fn certify_very_proximal(
    g: &ProjMat,
    r_sq: &Rat,
    epsilon_sq: &Rat,
) -> Result<Verdict<ProximalCert>> {
    check_radii(r_sq, epsilon_sq)?;
    let fwd = match certify_proximal(g, r_sq, epsilon_sq)? {
        Verdict::Yes(c) => c,
        other => return Ok(other),
    };
    let inv = match certify_proximal(&g.inverse().normalized(), r_sq, epsilon_sq)? {
        Verdict::Yes(c) => c,
        other => return Ok(other),
    };
    if !cross_disjoint(&fwd, &inv, g.place()) {
        return Ok(Verdict::Unknown);
    }
    Ok(Verdict::Yes(ProximalCert {
        very: Some(Box::new(inv)),
        ..fwd
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projective::set_member;
    use crate::scalar::{int, rat};

    const ARCH: Place = Place::Archimedean;

    fn diag(a: i64, b: i64, place: Place) -> ProjMat {
        ProjMat::diag(&[int(a), int(b)], place).unwrap()
    }

    fn rot90() -> ProjMat {
        ProjMat::from_i64(&[&[0, -1], &[1, 0]], ARCH)
    }

    #[test]
    fn profile_examples() {
        let p = singular_profile(&diag(5, 1, Place::PAdic(5)));
        assert!(p.exact);
        assert_eq!(
            p.values_sq,
            vec![Interval::exact(int(1)), Interval::exact(rat(1, 25))]
        );
        let p = singular_profile(&ProjMat::identity(3, ARCH));
        assert_eq!(p.values_sq, vec![Interval::exact(int(1)); 3]);
        let p = singular_profile(&diag(4, 1, ARCH));
        assert_eq!(
            p.values_sq,
            vec![Interval::exact(int(16)), Interval::exact(int(1))]
        );
    }

    #[test]
    fn irrational_profile_is_tight() {
        let g = ProjMat::from_i64(&[&[2, 1], &[1, 1]], ARCH);
        let p = singular_profile(&g);
        // σ₁² = ((3+√5)/2)²
        let s1 = 6.854_101_966_249_685_f64;
        let lo: f64 = p.values_sq[0]
            .lo
            .numer()
            .to_string()
            .parse::<f64>()
            .unwrap()
            / p.values_sq[0]
                .lo
                .denom()
                .to_string()
                .parse::<f64>()
                .unwrap();
        assert!((lo - s1).abs() < 1e-7);
        let w = (&p.values_sq[0].hi - &p.values_sq[0].lo) / &p.values_sq[0].lo;
        assert!(w <= rat(1, 1 << 30));
    }

    #[test]
    fn repeated_singular_values() {
        let g = ProjMat::diag(&[int(3), int(3), int(1)], ARCH).unwrap();
        let p = singular_profile(&g);
        assert_eq!(p.values_sq.len(), 3);
        assert_eq!(p.values_sq[1], Interval::exact(int(9)));
        let r = ProjMat::from_i64(&[&[1, -1, 0], &[1, 1, 0], &[0, 0, 1]], ARCH);
        let p = singular_profile(&r);
        assert_eq!(p.values_sq.len(), 3);
    }

    #[test]
    fn gap_examples() {
        assert_eq!(
            contraction_gap_sq(&diag(4, 1, ARCH)),
            Interval::exact(rat(1, 16))
        );
        assert_eq!(
            contraction_gap_sq(&ProjMat::identity(2, Place::PAdic(3))),
            Interval::exact(int(1))
        );
        assert_eq!(
            contraction_gap_sq(&diag(25, 1, Place::PAdic(5))),
            Interval::exact(rat(1, 625))
        );
    }

    #[test]
    fn contraction_examples() {
        let g = diag(4, 1, ARCH);
        let c = certify_contracting(&g, &rat(1, 4)).unwrap().yes().unwrap();
        assert_eq!(c.attract, ProjPoint::basis(2, 0));
        assert_eq!(c.repel, ProjHyperplane::coordinate(2, 0));
        assert!(c.verify(&g));

        for place in [ARCH, Place::PAdic(3)] {
            let id = ProjMat::identity(2, place);
            match certify_contracting(&id, &rat(1, 3)).unwrap() {
                Verdict::No(x) => {
                    assert!(x.dim() == 2);
                }
                v => panic!("identity at {place}: {v:?}"),
            }
        }

        for p in [2u64, 3, 5] {
            let g = ProjMat::diag(&[int((p * p) as i64), int(1)], Place::PAdic(p)).unwrap();
            let c = certify_contracting(&g, &rat(1, (p * p) as i64))
                .unwrap()
                .yes()
                .unwrap();
            assert!(c.verify(&g));
        }
    }

    #[test]
    fn identity_contracts_only_for_large_epsilon() {
        // In P¹ the identity maps {d(x, e₂) > ε} into {d(x, e₁) ≤ ε} iff ε² ≥ 1/2.
        let id = ProjMat::identity(2, ARCH);
        assert!(certify_contracting(&id, &rat(1, 2)).unwrap().is_yes());
        assert!(matches!(
            certify_contracting(&id, &rat(49, 100)).unwrap(),
            Verdict::No(_)
        ));
    }

    #[test]
    fn no_verdicts_carry_real_witnesses() {
        let g = ProjMat::from_i64(&[&[2, 1], &[1, 1]], ARCH);
        let eps = rat(9, 100);
        let (v, f) = singular_directions(g.mat());
        let v = ProjPoint::new(v).unwrap();
        let h = ProjHyperplane::new(f).unwrap();
        match certify_contracting(&g, &eps).unwrap() {
            Verdict::No(x) => {
                assert!(dist_to_hyperplane_sq(&x, &h, ARCH) > eps);
                assert!(dist_sq(&g.apply(&x), &v, ARCH) > eps);
            }
            v => panic!("expected refutation, got {v:?}"),
        }
    }

    #[test]
    fn proximal_examples() {
        // κ = 1/9 is far above ε² = 1/100, so diag(9,1) is refuted at this scale.
        let g = diag(9, 1, ARCH);
        assert!(matches!(
            certify_proximal(&g, &rat(1, 4), &rat(1, 100)).unwrap(),
            Verdict::No(_)
        ));
        let g = diag(100, 1, ARCH);
        let c = certify_proximal(&g, &rat(1, 4), &rat(1, 100))
            .unwrap()
            .yes()
            .unwrap();
        assert!(set_member(
            &ProjPoint::basis(2, 0),
            &c.fixed_point.as_set(),
            ARCH
        ));
        assert!(c.verify(&g));

        assert!(matches!(
            certify_proximal(&rot90(), &rat(1, 4), &rat(1, 100)).unwrap(),
            Verdict::No(_)
        ));

        let g = ProjMat::from_i64(&[&[2, 1], &[1, 1]], ARCH);
        assert_eq!(
            certify_proximal(&g, &rat(1, 4), &rat(9, 100)),
            Err(Error::RadiusTooSmall)
        );
        assert!(matches!(
            certify_proximal(&g, &rat(1, 2), &rat(9, 100)).unwrap(),
            Verdict::No(_)
        ));
        let g2 = ProjMat::from_i64(&[&[5, 3], &[3, 2]], ARCH);
        let c = certify_proximal(&g2, &rat(1, 2), &rat(9, 100))
            .unwrap()
            .yes()
            .unwrap();
        // Dominant eigenvector ((1+√5)/2, 1).
        let golden = ProjPoint::new(vec![rat(161_803_398_875, 100_000_000_000), int(1)]).unwrap();
        assert!(dist_sq(&golden, &c.fixed_point.center, ARCH) < rat(1, 1_000_000_000_000_000_000));
        assert!(c.verify(&g2));
    }

    #[test]
    fn power_examples() {
        let (n, c) = power_to_proximal(&diag(2, 1, ARCH), &rat(1, 4), &rat(1, 64), 20)
            .unwrap()
            .unwrap();
        assert_eq!(n, 6);
        assert!(c.verify(&diag(64, 1, ARCH)));
        assert!(
            power_to_proximal(&ProjMat::identity(2, ARCH), &rat(1, 4), &rat(1, 64), 10)
                .unwrap()
                .is_none()
        );
        let g = ProjMat::from_i64(&[&[2, 1], &[1, 1]], ARCH);
        let (n, _) = power_to_proximal(&g, &rat(1, 2), &rat(9, 100), 10)
            .unwrap()
            .unwrap();
        assert_eq!(n, 2);
    }

    #[test]
    fn very_proximal_examples() {
        let g = diag(100, 1, ARCH);
        let c = certify_very_proximal(&g, &rat(1, 4), &rat(1, 100))
            .unwrap()
            .yes()
            .unwrap();
        let inv = c.very.as_ref().unwrap();
        assert_eq!(
            inv.contraction.attract,
            c.contraction.repel.as_point_p1().unwrap()
        );
        assert!(c.verify(&g));
        assert_eq!(
            certify_very_proximal(&diag(9, 1, ARCH), &rat(9, 10), &rat(1, 4)),
            Err(Error::RadiusTooSmall)
        );
        let g2 = ProjMat::from_i64(&[&[5, 3], &[3, 2]], ARCH);
        let c = certify_very_proximal(&g2, &rat(1, 2), &rat(9, 100))
            .unwrap()
            .yes()
            .unwrap();
        assert!(c.verify(&g2));
    }

    #[test]
    fn padic_proximal() {
        let place = Place::PAdic(3);
        let g = ProjMat::from_i64(&[&[9, 1, 0], &[0, 1, 1], &[3, 0, 2]], place);
        let c = certify_very_proximal(&g, &rat(1, 4), &rat(1, 81)).unwrap();
        if let Verdict::Yes(c) = c {
            assert!(c.verify(&g));
        }
    }

    #[test]
    fn tampered_certificates_fail() {
        let g = diag(100, 1, ARCH);
        let c = certify_very_proximal(&g, &rat(1, 4), &rat(1, 100))
            .unwrap()
            .yes()
            .unwrap();
        let mut bad = c.clone();
        bad.fixed_point.radius_sq = rat(1, 2);
        assert!(!bad.verify(&g));
        let mut bad = c.clone();
        bad.contraction.epsilon_sq = rat(1, 1000);
        bad.epsilon_sq = rat(1, 1000);
        assert!(!bad.verify(&g));
    }
}
