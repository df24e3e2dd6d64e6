//! Ping-pong tuples and an exact freeness oracle.

use serde::{Deserialize, Serialize};
use std::fmt;

use num_traits::One;
use rayon::prelude::*;

use crate::dynamics::{
    certify_contracting, contraction_forms, find_multiplier, probe_points, ContractionCert, Verdict,
};
use crate::error::{Error, Result};
use crate::linalg::{is_pd, IntMat};
use crate::projective::{
    closure_within, set_disjoint, set_member, Disjointness, ProjMat, ProjPoint, ProjSet, Shape,
};
use crate::scalar::{Place, Rat};
use crate::words::Letter;
#[cfg(test)]
use crate::words::{format_word, parse_word};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SetName {
    APlus,
    RPlus,
    AMinus,
    RMinus,
}

impl fmt::Display for SetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SetName::APlus => "A+",
            SetName::RPlus => "R+",
            SetName::AMinus => "A-",
            SetName::RMinus => "R-",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FourSets<S> {
    pub a_plus: S,
    pub r_plus: S,
    pub a_minus: S,
    pub r_minus: S,
}

impl<S: Clone> FourSets<S> {
    /// The simplified convention `A⁻ = R`, `R⁻ = A`.
    pub fn simple(a: S, r: S) -> FourSets<S> {
        FourSets {
            a_plus: a.clone(),
            r_plus: r.clone(),
            a_minus: r,
            r_minus: a,
        }
    }
}

impl<S> FourSets<S> {
    pub fn get(&self, n: SetName) -> &S {
        match n {
            SetName::APlus => &self.a_plus,
            SetName::RPlus => &self.r_plus,
            SetName::AMinus => &self.a_minus,
            SetName::RMinus => &self.r_minus,
        }
    }
}

pub type SetRef = (usize, SetName);

/// Every pair of sets that must be disjoint for a ping-pong tuple of size `k`.
pub fn required_pairs(k: usize) -> Vec<(SetRef, SetRef)> {
    use SetName::*;
    let mut out = Vec::new();
    for i in 0..k {
        out.push(((i, APlus), (i, AMinus)));
        out.push(((i, APlus), (i, RPlus)));
        out.push(((i, AMinus), (i, RMinus)));
    }
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            for s in [APlus, AMinus] {
                for t in [APlus, AMinus, RPlus, RMinus] {
                    // A_i∩A_j is symmetric; list it once.
                    if matches!(t, APlus | AMinus) && j < i {
                        continue;
                    }
                    out.push(((i, s), (j, t)));
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetVerdict<P> {
    Disjoint,
    Overlap(P),
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapVerdict<P> {
    Backed,
    Refuted(P),
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Refutation<P> {
    Overlap {
        first: SetRef,
        second: SetRef,
        witness: P,
    },
    /// `witness ∉ R` but its image misses `A` (for `g⁻¹` when `inverse`).
    Mapping {
        player: usize,
        inverse: bool,
        witness: P,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TupleVerdict<P> {
    Certified,
    Refuted(Refutation<P>),
    Unknown(Vec<String>),
}

impl<P> TupleVerdict<P> {
    pub fn is_certified(&self) -> bool {
        matches!(self, TupleVerdict::Certified)
    }
}

/// Backend-independent ping-pong check: all required disjointness pairs plus
/// both mapping conditions of every player.
pub fn certify_four_sets<S, P>(
    sets: &[FourSets<S>],
    mapping: &[(MapVerdict<P>, MapVerdict<P>)],
    disjoint: impl Fn(&S, &S) -> SetVerdict<P>,
) -> TupleVerdict<P>
where
    P: Clone,
{
    let mut unknown = Vec::new();
    for (a, b) in required_pairs(sets.len()) {
        match disjoint(sets[a.0].get(a.1), sets[b.0].get(b.1)) {
            SetVerdict::Disjoint => {}
            SetVerdict::Overlap(w) => {
                return TupleVerdict::Refuted(Refutation::Overlap {
                    first: a,
                    second: b,
                    witness: w,
                })
            }
            SetVerdict::Unknown => unknown.push(format!(
                "disjointness of {}{} and {}{} undecided",
                a.1, a.0, b.1, b.0
            )),
        }
    }
    for (i, (fwd, bwd)) in mapping.iter().enumerate() {
        for (inverse, m) in [(false, fwd), (true, bwd)] {
            match m {
                MapVerdict::Backed => {}
                MapVerdict::Refuted(w) => {
                    return TupleVerdict::Refuted(Refutation::Mapping {
                        player: i,
                        inverse,
                        witness: w.clone(),
                    })
                }
                MapVerdict::Unknown => unknown.push(format!(
                    "no mapping evidence for player {i}{}",
                    if inverse { " inverse" } else { "" }
                )),
            }
        }
    }
    if unknown.is_empty() {
        TupleVerdict::Certified
    } else {
        TupleVerdict::Unknown(unknown)
    }
}

/// Evidence that `g(X∖R) ⊂ A` for declared open sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MappingEvidence {
    /// Archimedean, `A` a ball and `R` a hyperplane neighborhood (or a ball in
    /// `P¹`): `Q₁ + λQ₂ ≺ 0` with `Q₁(x) < 0 ⟺ gx ∈ A` and
    /// `Q₂(x) ≥ 0 ⟺ x ∉ R`.
    Quadratic {
        #[serde(with = "crate::scalar::rat_serde")]
        lambda: Rat,
    },
    /// A contraction certificate whose closed sets sit strictly inside the
    /// declared `A` and `R`.
    Contraction(ContractionCert),
}

/// The quadratic description of a single-component `(A, R)` pair, if any.
fn quadratic_data(a: &ProjSet, r: &ProjSet) -> Option<(ProjPoint, Rat, Vec<Rat>, Rat)> {
    let [Shape::Ball {
        center,
        radius_sq: ra,
    }] = a.parts()
    else {
        return None;
    };
    let (f, rr) = match r.parts() {
        [Shape::Nbhd { plane, radius_sq }] => (plane.functional().to_vec(), radius_sq.clone()),
        [Shape::Ball {
            center: b,
            radius_sq,
        }] if b.dim() == 2 => (
            vec![b.coords()[1].clone(), -b.coords()[0].clone()],
            radius_sq.clone(),
        ),
        _ => return None,
    };
    Some((center.clone(), ra.clone(), f, rr))
}

fn quadratic_forms(
    g: &ProjMat,
    a: &ProjSet,
    r: &ProjSet,
) -> Option<(crate::linalg::Mat, crate::linalg::Mat)> {
    let (v, ra, f, rr) = quadratic_data(a, r)?;
    Some(contraction_forms(
        g.normalized().mat(),
        v.coords(),
        &f,
        &ra,
        &rr,
    ))
}

impl MappingEvidence {
    pub fn verify(&self, g: &ProjMat, a: &ProjSet, r: &ProjSet) -> bool {
        match self {
            MappingEvidence::Quadratic { lambda } => {
                if g.place() != Place::Archimedean || lambda < &Rat::from_integer(0.into()) {
                    return false;
                }
                let Some((q1, q2)) = quadratic_forms(g, a, r) else {
                    return false;
                };
                is_pd(&q1.add(&q2.scale(lambda)).scale(&-Rat::one()))
            }
            MappingEvidence::Contraction(c) => {
                c.verify(g)
                    && closure_within(&c.attract_set(), a, g.place())
                    && closure_within(&c.repel_set(), r, g.place())
            }
        }
    }
}

/// Candidate contraction scales tried against declared sets.
fn epsilon_candidates(a: &ProjSet, r: &ProjSet) -> Vec<Rat> {
    let rmin = a
        .parts()
        .iter()
        .chain(r.parts())
        .map(|s| s.radius_sq().clone())
        .min()
        .expect("nonempty");
    let mut out: Vec<Rat> = [
        Rat::one() - Rat::new(1.into(), (1u64 << 20).into()),
        Rat::new(1.into(), 2.into()),
        Rat::new(1.into(), 4.into()),
        Rat::new(1.into(), 16.into()),
        Rat::new(1.into(), 64.into()),
    ]
    .into_iter()
    .map(|c| c * &rmin)
    .filter(|e| e < &Rat::one())
    .collect();
    out.dedup();
    out
}

/// A point outside `r` whose image lies outside `a`.
pub fn mapping_refutation(g: &ProjMat, a: &ProjSet, r: &ProjSet) -> Option<ProjPoint> {
    let place = g.place();
    let mut extra: Vec<Vec<Rat>> = Vec::new();
    if let Some((_, _, f, _)) = quadratic_data(a, r) {
        extra.push(f);
    }
    let ginv = g.inverse();
    for s in a.parts() {
        if let Shape::Ball { center, .. } = s {
            extra.push(ginv.apply(center).coords().to_vec());
        }
    }
    probe_points(g.dim(), &extra)
        .into_iter()
        .find(|x| !set_member(x, r, place) && !set_member(&g.apply(x), a, place))
}

pub fn find_mapping_evidence(g: &ProjMat, a: &ProjSet, r: &ProjSet) -> MapOutcome {
    if g.place() == Place::Archimedean {
        if let Some((q1, q2)) = quadratic_forms(g, a, r) {
            if let Some(lambda) = find_multiplier(&q1, &q2, true) {
                return MapOutcome::Evidence(MappingEvidence::Quadratic { lambda });
            }
        }
    }
    for eps in epsilon_candidates(a, r) {
        if let Ok(Verdict::Yes(c)) = certify_contracting(g, &eps) {
            let e = MappingEvidence::Contraction(c);
            if e.verify(g, a, r) {
                return MapOutcome::Evidence(e);
            }
        }
    }
    match mapping_refutation(g, a, r) {
        Some(x) => MapOutcome::Refuted(x),
        None => MapOutcome::Unknown,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MapOutcome {
    Evidence(MappingEvidence),
    Refuted(ProjPoint),
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjPlayer {
    pub element: ProjMat,
    pub sets: FourSets<ProjSet>,
    /// Evidence for `g` and for `g⁻¹`, filled in by certification.
    pub evidence: (Option<MappingEvidence>, Option<MappingEvidence>),
}

impl ProjPlayer {
    pub fn new(element: ProjMat, sets: FourSets<ProjSet>) -> ProjPlayer {
        ProjPlayer {
            element,
            sets,
            evidence: (None, None),
        }
    }

    pub fn simple(element: ProjMat, a: ProjSet, r: ProjSet) -> ProjPlayer {
        ProjPlayer::new(element, FourSets::simple(a, r))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjTuple {
    pub players: Vec<ProjPlayer>,
    pub verdict: TupleVerdict<ProjPoint>,
}

fn check_backend(players: &[ProjPlayer]) -> Result<(Place, usize)> {
    let first = players
        .first()
        .ok_or_else(|| Error::Invalid("a tuple needs at least one player".into()))?;
    let (place, n) = (first.element.place(), first.element.dim());
    for p in players {
        if p.element.place() != place || p.element.dim() != n {
            return Err(Error::BackendMismatch);
        }
        for s in [
            SetName::APlus,
            SetName::RPlus,
            SetName::AMinus,
            SetName::RMinus,
        ] {
            if p.sets.get(s).dim() != n {
                return Err(Error::BackendMismatch);
            }
        }
    }
    Ok((place, n))
}

fn map_verdict(
    g: &ProjMat,
    a: &ProjSet,
    r: &ProjSet,
    given: &Option<MappingEvidence>,
) -> (MapVerdict<ProjPoint>, Option<MappingEvidence>) {
    if let Some(e) = given {
        if e.verify(g, a, r) {
            return (MapVerdict::Backed, Some(e.clone()));
        }
    }
    match find_mapping_evidence(g, a, r) {
        MapOutcome::Evidence(e) => (MapVerdict::Backed, Some(e)),
        MapOutcome::Refuted(x) => (MapVerdict::Refuted(x), None),
        MapOutcome::Unknown => (MapVerdict::Unknown, None),
    }
}

fn proj_disjoint(place: Place) -> impl Fn(&ProjSet, &ProjSet) -> SetVerdict<ProjPoint> {
    move |s, t| match set_disjoint(s, t, place) {
        Disjointness::CertifiedDisjoint => SetVerdict::Disjoint,
        Disjointness::CertifiedOverlap(w) => SetVerdict::Overlap(w),
        Disjointness::Unknown => SetVerdict::Unknown,
    }
}

/// Certifies the general four-set form. Evidence already attached to a player
/// is re-checked; missing evidence is searched for.
pub fn certify_tuple(players: Vec<ProjPlayer>) -> Result<ProjTuple> {
    let (place, _) = check_backend(&players)?;
    let mut players = players;
    let mut mapping = Vec::with_capacity(players.len());
    for p in players.iter_mut() {
        let g = &p.element;
        let (fwd, ef) = map_verdict(g, &p.sets.a_plus, &p.sets.r_plus, &p.evidence.0);
        let ginv = g.inverse();
        let (bwd, eb) = map_verdict(&ginv, &p.sets.a_minus, &p.sets.r_minus, &p.evidence.1);
        p.evidence = (ef, eb);
        mapping.push((fwd, bwd));
    }
    let sets: Vec<FourSets<ProjSet>> = players.iter().map(|p| p.sets.clone()).collect();
    let verdict = certify_four_sets(&sets, &mapping, proj_disjoint(place));
    Ok(ProjTuple { players, verdict })
}

/// Certifies players given in the simplified convention (`A⁻ = R`, `R⁻ = A`).
pub fn certify_simple_tuple(players: Vec<(ProjMat, ProjSet, ProjSet)>) -> Result<ProjTuple> {
    certify_tuple(
        players
            .into_iter()
            .map(|(g, a, r)| ProjPlayer::simple(g, a, r))
            .collect(),
    )
}

/// Re-checks a certified tuple without searching: attached evidence must
/// verify and every required pair must be certified disjoint.
pub fn verify_tuple(players: &[ProjPlayer]) -> bool {
    let Ok((place, _)) = check_backend(players) else {
        return false;
    };
    let backed = players.iter().all(|p| {
        let (Some(ef), Some(eb)) = (&p.evidence.0, &p.evidence.1) else {
            return false;
        };
        ef.verify(&p.element, &p.sets.a_plus, &p.sets.r_plus)
            && eb.verify(&p.element.inverse(), &p.sets.a_minus, &p.sets.r_minus)
    });
    backed
        && required_pairs(players.len()).into_iter().all(|(a, b)| {
            set_disjoint(
                players[a.0].sets.get(a.1),
                players[b.0].sets.get(b.1),
                place,
            ) == Disjointness::CertifiedDisjoint
        })
}

/// A group in which words can be evaluated and compared with the identity.
pub trait WordGroup: Sync {
    type Elem: Clone + Send + Sync;
    fn identity(&self) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn is_identity(&self, a: &Self::Elem) -> bool;
}

/// Projective matrices over ℚ as primitive integer matrices.
pub struct MatrixGroup {
    pub n: usize,
}

impl WordGroup for MatrixGroup {
    type Elem = IntMat;
    fn identity(&self) -> IntMat {
        IntMat::identity(self.n)
    }
    fn mul(&self, a: &IntMat, b: &IntMat) -> IntMat {
        a.mul(b)
    }
    fn is_identity(&self, a: &IntMat) -> bool {
        a.is_scalar()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleResult {
    NoRelationFound,
    Relation(Vec<Letter>),
}

/// Depth-first search in shortlex order below a fixed first letter; returns
/// the shortlex-least relation of length ≤ `limit` in this branch.
fn oracle_branch<G: WordGroup>(
    group: &G,
    letters: &[G::Elem],
    k: usize,
    first: usize,
    max_len: usize,
) -> Option<Vec<usize>> {
    let mut best: Option<Vec<usize>> = None;
    let mut limit = max_len;
    let mut word = vec![first];
    let mut prods = vec![letters[first].clone()];
    if group.is_identity(&prods[0]) {
        return Some(word);
    }
    // Iterative DFS with explicit next-letter counters.
    let mut next = vec![0usize];
    while let Some(&cand) = next.last() {
        let depth = word.len();
        if cand >= 2 * k || depth >= limit {
            next.pop();
            word.pop();
            prods.pop();
            if word.is_empty() {
                break;
            }
            continue;
        }
        *next.last_mut().expect("nonempty") += 1;
        let last = *word.last().expect("nonempty");
        if Letter::from_rank(cand, k) == Letter::from_rank(last, k).inverse() {
            continue;
        }
        let p = group.mul(prods.last().expect("nonempty"), &letters[cand]);
        word.push(cand);
        if group.is_identity(&p) {
            let better = best.as_ref().map_or(true, |b| {
                word.len() < b.len() || (word.len() == b.len() && word < *b)
            });
            if better {
                best = Some(word.clone());
                limit = word.len();
            }
            word.pop();
            continue;
        }
        prods.push(p);
        next.push(0);
    }
    best
}

/// Enumerates reduced words up to `max_len` in shortlex order (generators
/// before inverses) and returns the first one equal to the identity.
pub fn freeness_oracle<G: WordGroup>(
    group: &G,
    gens: &[G::Elem],
    invs: &[G::Elem],
    max_len: usize,
) -> OracleResult {
    let k = gens.len();
    if k == 0 || max_len == 0 {
        return OracleResult::NoRelationFound;
    }
    let letters: Vec<G::Elem> = gens.iter().chain(invs).cloned().collect();
    let best = (0..2 * k)
        .into_par_iter()
        .filter_map(|first| oracle_branch(group, &letters, k, first, max_len))
        .min_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    match best {
        Some(w) => OracleResult::Relation(w.into_iter().map(|r| Letter::from_rank(r, k)).collect()),
        None => OracleResult::NoRelationFound,
    }
}

/// The oracle on projective matrices.
pub fn matrix_oracle(elements: &[ProjMat], max_len: usize) -> OracleResult {
    let n = elements.first().map_or(2, ProjMat::dim);
    let gens: Vec<IntMat> = elements
        .iter()
        .map(|g| g.mat().primitive_integer())
        .collect();
    let invs: Vec<IntMat> = elements
        .iter()
        .map(|g| g.inverse().mat().primitive_integer())
        .collect();
    freeness_oracle(&MatrixGroup { n }, &gens, &invs, max_len)
}
