//! Explicit constructions: conjugate contraction, the `b₁b₂b₃` element,
//! very-proximal search, proximal elements of normal subgroups, coset
//! representatives, the double-coset wrap and the truncated prodense builder.
//!
//! Every exponent is the smallest one found by a bounded search whose
//! acceptance test is an exact certificate.

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    certify_contracting, certify_very_proximal, contraction_centers, ContractionCert, Enclosure,
    ProximalCert, Verdict,
};
use crate::error::{Error, Result};
use crate::pingpong::{
    certify_tuple, find_mapping_evidence, matrix_oracle, required_pairs, FourSets, MapOutcome,
    MappingEvidence, OracleResult, ProjPlayer, ProjTuple, SetName,
};
use crate::projective::{
    closure_within, in_closure, push_set, set_disjoint, set_member, Disjointness, ProjHyperplane,
    ProjMat, ProjSet,
};
use crate::scalar::{Place, Rat};
use crate::words::{concat, inverse, power, reduce, reduced_words, Letter, Word};

/// Named generators of a subgroup of `PGL_n(ℚ)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "RawMarkedGroup", try_from = "RawMarkedGroup")]
pub struct MarkedGroup {
    pub names: Vec<String>,
    pub gens: Vec<ProjMat>,
    invs: Vec<ProjMat>,
}

#[derive(Serialize, Deserialize)]
struct RawMarkedGroup {
    names: Vec<String>,
    gens: Vec<ProjMat>,
}

impl From<MarkedGroup> for RawMarkedGroup {
    fn from(g: MarkedGroup) -> RawMarkedGroup {
        RawMarkedGroup {
            names: g.names,
            gens: g.gens,
        }
    }
}

impl TryFrom<RawMarkedGroup> for MarkedGroup {
    type Error = Error;
    fn try_from(r: RawMarkedGroup) -> Result<MarkedGroup> {
        MarkedGroup::new(r.names, r.gens)
    }
}

impl MarkedGroup {
    pub fn new(names: Vec<String>, gens: Vec<ProjMat>) -> Result<MarkedGroup> {
        let first = gens
            .first()
            .ok_or_else(|| Error::Invalid("a marked group needs a generator".into()))?;
        if names.len() != gens.len() {
            return Err(Error::Invalid(
                "generator names and matrices differ in number".into(),
            ));
        }
        for g in &gens {
            if g.place() != first.place() || g.dim() != first.dim() {
                return Err(Error::BackendMismatch);
            }
        }
        let invs = gens.iter().map(|g| g.inverse().normalized()).collect();
        let gens = gens.iter().map(ProjMat::normalized).collect();
        Ok(MarkedGroup { names, gens, invs })
    }

    pub fn rank(&self) -> usize {
        self.gens.len()
    }

    pub fn place(&self) -> Place {
        self.gens[0].place()
    }

    pub fn dim(&self) -> usize {
        self.gens[0].dim()
    }

    pub fn letter(&self, l: Letter) -> &ProjMat {
        if l.inv {
            &self.invs[l.gen]
        } else {
            &self.gens[l.gen]
        }
    }

    pub fn check_word(&self, w: &[Letter]) -> Result<()> {
        match w.iter().find(|l| l.gen >= self.rank()) {
            Some(l) => Err(Error::BadLetter(crate::words::format_word(&[*l]))),
            None => Ok(()),
        }
    }

    pub fn eval(&self, w: &[Letter]) -> ProjMat {
        let mut m = ProjMat::identity(self.dim(), self.place());
        for &l in w {
            m = m.mul(self.letter(l)).normalized();
        }
        m
    }
}

/// `conj · rep^{±1} · conj⁻¹`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConjFactor {
    pub conj: Word,
    pub rep: usize,
    pub inverted: bool,
}

impl ConjFactor {
    pub fn word(&self, class_reps: &[Word]) -> Word {
        let r = &class_reps[self.rep];
        let r = if self.inverted { inverse(r) } else { r.clone() };
        concat(&[&self.conj, &r, &inverse(&self.conj)])
    }

    pub fn conjugated(&self, by: &[Letter]) -> ConjFactor {
        ConjFactor {
            conj: concat(&[by, &self.conj]),
            ..self.clone()
        }
    }

    pub fn inverse(&self) -> ConjFactor {
        ConjFactor {
            inverted: !self.inverted,
            ..self.clone()
        }
    }
}

pub fn flatten(factors: &[ConjFactor], class_reps: &[Word]) -> Word {
    let parts: Vec<Word> = factors.iter().map(|f| f.word(class_reps)).collect();
    reduce(&parts.concat())
}

fn repeat_factors(factors: &[ConjFactor], n: u32) -> Vec<ConjFactor> {
    (0..n).flat_map(|_| factors.iter().cloned()).collect()
}

/// Word-shape check: `word` freely equals the product of the listed
/// conjugates of class representatives.
pub fn is_product_of_conjugates(
    word: &[Letter],
    factors: &[ConjFactor],
    class_reps: &[Word],
) -> bool {
    factors.iter().all(|f| f.rep < class_reps.len()) && reduce(word) == flatten(factors, class_reps)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalData {
    pub label: String,
    /// Words whose conjugates generate `N`.
    pub class_reps: Vec<Word>,
    pub coset_reps: Vec<Word>,
}

/// Search limits. Zero in any field empties the corresponding search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    /// Longest conjugator used when building elements of `N`.
    pub conj_len: usize,
    /// Most conjugate factors in one candidate.
    pub factors: usize,
    /// Largest power tried when certifying a candidate.
    pub power: u32,
    /// Largest exponent `k, l, m, n` in the conjugation patterns.
    pub exponent: u32,
    /// Number of `ε` refinements (factor 4 each).
    pub schedule: u32,
}

impl Default for Budgets {
    fn default() -> Budgets {
        Budgets {
            conj_len: 1,
            factors: 2,
            power: 6,
            exponent: 6,
            schedule: 12,
        }
    }
}

impl Budgets {
    pub fn zero() -> Budgets {
        Budgets {
            conj_len: 0,
            factors: 0,
            power: 0,
            exponent: 0,
            schedule: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Radii {
    #[serde(with = "crate::scalar::rat_serde")]
    pub r_sq: Rat,
    #[serde(with = "crate::scalar::rat_serde")]
    pub epsilon_sq: Rat,
}

/// Open player radius around a closed certificate radius.
pub fn grow(r: &Rat) -> Rat {
    r * Rat::new(4097.into(), 4096.into())
}

fn quarter_pow(r: &Rat, k: u32) -> Rat {
    r / Rat::from_integer(num_bigint::BigInt::one() << (2 * k))
}

/// The four open player sets around a very-proximal certificate, with the
/// two contraction certificates as mapping evidence.
pub fn proximal_player(g: &ProjMat, cert: &ProximalCert) -> Option<ProjPlayer> {
    let inv = cert.very.as_ref()?;
    let open = |s: &ProjSet| -> Option<ProjSet> {
        let parts = s
            .parts()
            .iter()
            .map(|sh| {
                let mut sh = sh.clone();
                match &mut sh {
                    crate::projective::Shape::Ball { radius_sq, .. }
                    | crate::projective::Shape::Nbhd { radius_sq, .. } => {
                        *radius_sq = grow(radius_sq)
                    }
                }
                sh
            })
            .collect();
        ProjSet::from_shapes(parts).ok()
    };
    let sets = FourSets {
        a_plus: open(&cert.attract_set())?,
        r_plus: open(&cert.repel_set())?,
        a_minus: open(&inv.attract_set())?,
        r_minus: open(&inv.repel_set())?,
    };
    let mut p = ProjPlayer::new(g.clone(), sets);
    p.evidence = (
        Some(MappingEvidence::Contraction(cert.contraction.clone())),
        Some(MappingEvidence::Contraction(inv.contraction.clone())),
    );
    Some(p)
}

const ALL_SETS: [SetName; 4] = [
    SetName::APlus,
    SetName::RPlus,
    SetName::AMinus,
    SetName::RMinus,
];

fn disjoint(a: &ProjSet, b: &ProjSet, place: Place) -> bool {
    set_disjoint(a, b, place) == Disjointness::CertifiedDisjoint
}

/// Whether `p` plays ping-pong with every player in `others`.
fn compatible(p: &ProjPlayer, others: &[&ProjPlayer], place: Place) -> bool {
    let mut all: Vec<&ProjPlayer> = others.to_vec();
    all.push(p);
    let last = all.len() - 1;
    required_pairs(all.len())
        .into_iter()
        .filter(|(a, b)| (a.0 == last) != (b.0 == last))
        .all(|(a, b)| disjoint(all[a.0].sets.get(a.1), all[b.0].sets.get(b.1), place))
}

/// The region containing the fixed hyperplane enclosed in the dual space.
fn plane_region(e: &Enclosure) -> Option<ProjSet> {
    ProjSet::hnbhd(
        ProjHyperplane::from_dual_point(&e.center),
        e.radius_sq.clone(),
    )
    .ok()
}

/// `x·(enclosure of a point)` is certified disjoint from the hyperplane region.
fn moves_off(x: &ProjMat, point: &Enclosure, plane: &Enclosure) -> bool {
    let (Some(img), Some(region)) = (push_set(x, &point.as_set()), plane_region(plane)) else {
        return false;
    };
    disjoint(&img, &region, x.place())
}

fn require_very(g: &ProjMat, cert: &ProximalCert, what: &str) -> Result<()> {
    if cert.very.is_none() || !cert.verify(g) {
        return Err(Error::Hypothesis(format!(
            "{what} is not certified very proximal"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjugateContraction {
    pub m: u32,
    pub y: ProjMat,
    pub cert: ContractionCert,
}

/// Smallest `m ≤ m_max` with `gᵐ x g⁻ᵐ` certified `ε`-contracting.
pub fn conjugate_contract(
    g: &ProjMat,
    g_cert: &ProximalCert,
    x: &ProjMat,
    m_max: u32,
    epsilon_sq: &Rat,
) -> Result<Option<ConjugateContraction>> {
    require_very(g, g_cert, "g")?;
    let inv = g_cert.very.as_ref().expect("checked");
    if !moves_off(x, &inv.fixed_point, &g_cert.fixed_plane) {
        return Err(Error::GeneralPosition(
            "x does not move the repelling point of g off the repelling hyperplane of g".into(),
        ));
    }
    let mut pows = vec![ProjMat::identity(g.dim(), g.place())];
    for _ in 0..m_max {
        let next = pows.last().expect("nonempty").mul(g).normalized();
        pows.push(next);
    }
    let found = (0..=m_max).into_par_iter().find_map_first(|m| {
        let gm = &pows[m as usize];
        let y = gm.mul(x).mul(&gm.inverse()).normalized();
        match certify_contracting(&y, epsilon_sq) {
            Ok(Verdict::Yes(cert)) => Some(ConjugateContraction { m, y, cert }),
            _ => None,
        }
    });
    Ok(found)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct B1B2B3 {
    pub k: u32,
    pub element: ProjMat,
    pub attract: ProjSet,
    pub repel: ProjSet,
    pub evidence: MappingEvidence,
}

/// Searches `a = g b₁ g^{-(1+k)} b₂ g^{k+1} b₃ g⁻¹` for the smallest `k`
/// whose sets `g b₁ g⁻ᵏ R` and `g b₃⁻¹ g⁻ᵏ R` lie inside `A` and carry
/// mapping evidence.
pub fn b1b2b3_synthesize(
    g: &ProjMat,
    a: &ProjSet,
    r: &ProjSet,
    b: [&ProjMat; 3],
    k_max: u32,
) -> Result<Option<B1B2B3>> {
    let place = g.place();
    if !matches!(find_mapping_evidence(g, a, r), MapOutcome::Evidence(_)) {
        return Err(Error::Hypothesis(
            "g is not certified (A, R) contracting".into(),
        ));
    }
    let [b1, b2, b3] = b;
    let b3i = b3.inverse();
    let push = |m: &ProjMat, s: &ProjSet| push_set(m, s);
    let images = (push(b1, r), push(b2, a), push(&b3i, r));
    let mut failing = Vec::new();
    let mut check = |name: &str, s: Option<&ProjSet>, t: Option<&ProjSet>| match (s, t) {
        (Some(s), Some(t)) if disjoint(s, t, place) => {}
        _ => failing.push(name.to_string()),
    };
    check("b1·R ∩ R", images.0.as_ref(), Some(r));
    check("b2·A ∩ A", images.1.as_ref(), Some(a));
    check("b3⁻¹·R ∩ R", images.2.as_ref(), Some(r));
    check("b1·R ∩ b3⁻¹·R", images.0.as_ref(), images.2.as_ref());
    if !failing.is_empty() {
        return Err(Error::Hypothesis(format!(
            "not certified disjoint: {}",
            failing.join(", ")
        )));
    }
    let ginv = g.inverse();
    let found = (0..=k_max).into_par_iter().find_map_first(|k| {
        let gk = ginv.pow(k as i64).normalized();
        let omega = push_set(&gk, r)?;
        let attract = push_set(&g.mul(b1), &omega)?;
        let repel = push_set(&g.mul(&b3i), &omega)?;
        if !(closure_within(&attract, a, place)
            && closure_within(&repel, a, place)
            && disjoint(&attract, &repel, place))
        {
            return None;
        }
        let element = g
            .mul(b1)
            .mul(&ginv.pow(1 + k as i64))
            .mul(b2)
            .mul(&g.pow(k as i64 + 1))
            .mul(b3)
            .mul(&ginv)
            .normalized();
        match find_mapping_evidence(&element, &attract, &repel) {
            MapOutcome::Evidence(evidence) => Some(B1B2B3 {
                k,
                element,
                attract,
                repel,
                evidence,
            }),
            _ => None,
        }
    });
    Ok(found)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VeryProximalFound {
    pub f1: Word,
    pub f2: Word,
    pub element: ProjMat,
    pub cert: ProximalCert,
}

/// First pair `(f₁, f₂)` in shortlex order (total length, then `f₁`, then
/// `f₂`) with `g f₁ g⁻¹ f₂` certified very proximal.
pub fn very_proximal_search(
    g: &ProjMat,
    g_cert: &ContractionCert,
    group: &MarkedGroup,
    word_len: usize,
    r_sq: &Rat,
    epsilon_sq: &Rat,
) -> Result<Option<VeryProximalFound>> {
    if !g_cert.verify(g) {
        return Err(Error::Hypothesis("g is not certified contracting".into()));
    }
    if r_sq <= &(epsilon_sq * Rat::from_integer(4.into())) {
        return Err(Error::RadiusTooSmall);
    }
    let words = reduced_words(group.rank(), 1, word_len);
    let mut pairs: Vec<(usize, usize)> = (0..words.len())
        .flat_map(|i| (0..words.len()).map(move |j| (i, j)))
        .collect();
    pairs.sort_by_key(|&(i, j)| (words[i].len() + words[j].len(), i, j));
    let ginv = g.inverse();
    let found = pairs.par_iter().find_map_first(|&(i, j)| {
        let element = g
            .mul(&group.eval(&words[i]))
            .mul(&ginv)
            .mul(&group.eval(&words[j]))
            .normalized();
        match certify_very_proximal(&element, r_sq, epsilon_sq) {
            Ok(Verdict::Yes(cert)) => Some(VeryProximalFound {
                f1: words[i].clone(),
                f2: words[j].clone(),
                element,
                cert,
            }),
            _ => None,
        }
    });
    Ok(found)
}

/// Constraints on the sets of a new element.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostRegion {
    /// All four player sets must have closures inside this set.
    pub inside: Option<ProjSet>,
    /// All four player sets must be disjoint from each of these.
    pub avoid: Vec<ProjSet>,
}

impl HostRegion {
    fn admits(&self, p: &ProjPlayer, place: Place) -> bool {
        ALL_SETS.iter().all(|&s| {
            let set = p.sets.get(s);
            self.inside
                .as_ref()
                .map_or(true, |h| closure_within(set, h, place))
                && self.avoid.iter().all(|t| disjoint(set, t, place))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalElement {
    pub word: Word,
    pub factors: Vec<ConjFactor>,
    pub element: ProjMat,
    pub cert: ProximalCert,
    pub player: ProjPlayer,
    /// Position of the accepted candidate in the search order, plus one.
    pub tried: usize,
}

fn check_normal(group: &MarkedGroup, n: &NormalData) -> Result<()> {
    if n.class_reps.is_empty() {
        return Err(Error::Invalid(format!(
            "normal datum {} has no class representative",
            n.label
        )));
    }
    for w in n.class_reps.iter().chain(&n.coset_reps) {
        group.check_word(w)?;
    }
    for w in &n.class_reps {
        if group
            .eval(w)
            .equals_projectively(&ProjMat::identity(group.dim(), group.place()))
        {
            return Err(Error::TrivialClass);
        }
    }
    Ok(())
}

/// Conjugate factors in search order: conjugator shortlex, representative,
/// then sign.
fn single_factors(group: &MarkedGroup, n: &NormalData, conj_len: usize) -> Vec<ConjFactor> {
    let mut out = Vec::new();
    for conj in reduced_words(group.rank(), 0, conj_len) {
        for rep in 0..n.class_reps.len() {
            for inverted in [false, true] {
                out.push(ConjFactor {
                    conj: conj.clone(),
                    rep,
                    inverted,
                });
            }
        }
    }
    out
}

/// Products of 1..=`budgets.factors` conjugate factors, fewest factors first.
fn normal_candidates(
    group: &MarkedGroup,
    n: &NormalData,
    budgets: &Budgets,
) -> Vec<Vec<ConjFactor>> {
    if budgets.factors == 0 {
        return Vec::new();
    }
    let singles = single_factors(group, n, budgets.conj_len);
    let mut out: Vec<Vec<ConjFactor>> = Vec::new();
    let mut layer: Vec<Vec<ConjFactor>> = vec![Vec::new()];
    for _ in 0..budgets.factors {
        let mut next = Vec::new();
        for prefix in &layer {
            for f in &singles {
                let mut v = prefix.clone();
                v.push(f.clone());
                next.push(v);
            }
        }
        out.extend(
            next.iter()
                .filter(|c| !flatten(c, &n.class_reps).is_empty())
                .cloned(),
        );
        layer = next;
    }
    out
}

/// First candidate product of conjugates, raised to the smallest power that
/// certifies very proximal with sets admitted by `host`.
pub fn normal_proximal(
    group: &MarkedGroup,
    n: &NormalData,
    host: &HostRegion,
    radii: &Radii,
    budgets: &Budgets,
) -> Result<Option<NormalElement>> {
    check_normal(group, n)?;
    if radii.r_sq <= &radii.epsilon_sq * Rat::from_integer(4.into()) {
        return Err(Error::RadiusTooSmall);
    }
    let place = group.place();
    let candidates = normal_candidates(group, n, budgets);
    let found = candidates
        .par_iter()
        .enumerate()
        .find_map_first(|(idx, factors)| {
            let base_word = flatten(factors, &n.class_reps);
            let base = group.eval(&base_word);
            let mut m = base.clone();
            for p in 1..=budgets.power {
                if p > 1 {
                    m = m.mul(&base).normalized();
                }
                if let Ok(Verdict::Yes(cert)) =
                    certify_very_proximal(&m, &radii.r_sq, &radii.epsilon_sq)
                {
                    let player = proximal_player(&m, &cert)?;
                    if host.admits(&player, place) {
                        let factors = repeat_factors(factors, p);
                        return Some(NormalElement {
                            word: power(&base_word, p as i64),
                            factors,
                            element: m,
                            cert,
                            player,
                            tried: idx + 1,
                        });
                    }
                }
            }
            None
        });
    Ok(found)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosetElement {
    pub coset: usize,
    pub rep: Word,
    pub n1: Vec<ConjFactor>,
    pub n2: Vec<ConjFactor>,
    /// The auxiliary element `β ∈ N` whose powers flank the representative.
    pub beta: Word,
    pub l: u32,
    pub word: Word,
    pub element: ProjMat,
    pub cert: ProximalCert,
    pub player: ProjPlayer,
    /// `δ·rep⁻¹` as a product of conjugates of class representatives.
    pub coset_factors: Vec<ConjFactor>,
    pub tried: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CosetOutcome {
    Found(CosetElement),
    NotFound { coset: usize, rep: Word },
}

/// The Remark-2.7 inclusions of `inner`'s sets in `outer`'s.
pub fn nested_in(inner: &ProjPlayer, outer: &ProjPlayer, place: Place) -> bool {
    ALL_SETS
        .iter()
        .all(|&s| closure_within(inner.sets.get(s), outer.sets.get(s), place))
}

/// Balls enclosing the attracting fixed points of `g` and `g⁻¹`.
fn fixed_regions(cert: &ProximalCert) -> Vec<ProjSet> {
    let mut out = vec![cert.fixed_point.as_set()];
    if let Some(inv) = &cert.very {
        out.push(inv.fixed_point.as_set());
    }
    out
}

/// Necessary for `nested_in(player, outer)` and `clear_of(player, regions)`
/// of any certificate of `g`: the attracting centers of `g` and `g⁻¹` do not
/// depend on the scale, so they are checked before certifying.
fn centers_admitted(g: &ProjMat, outer: &ProjPlayer, regions: &[ProjSet], place: Place) -> bool {
    let (Ok((v, _)), Ok((w, _))) = (
        contraction_centers(g),
        contraction_centers(&g.inverse().normalized()),
    ) else {
        return false;
    };
    [(&v, &outer.sets.a_plus), (&w, &outer.sets.a_minus)]
        .iter()
        .all(|(c, host)| {
            set_member(c, host, place) && regions.iter().all(|t| !in_closure(c, t, place))
        })
}

fn clear_of(p: &ProjPlayer, regions: &[ProjSet], place: Place) -> bool {
    ALL_SETS
        .iter()
        .all(|&s| regions.iter().all(|t| disjoint(p.sets.get(s), t, place)))
}

/// Certifies `g` very proximal at the smallest scale `ε₀²·4⁻ᵏ` (`k ≤
/// schedule`) that its singular gap leaves room for, stepping back up at most
/// twice. `r_of` gives the separation radius for a scale.
fn tightest_certificate(
    g: &ProjMat,
    eps0: &Rat,
    schedule: u32,
    r_of: impl Fn(&Rat) -> Rat,
) -> Option<(ProximalCert, ProjPlayer)> {
    let gap = crate::dynamics::contraction_gap_sq(g).lo;
    let four = Rat::from_integer(4.into());
    let top = (1..=schedule)
        .rev()
        .find(|&k| {
            let e = quarter_pow(eps0, k);
            gap <= &four * &e * &e
        })
        .unwrap_or(1);
    (top.saturating_sub(2).max(1)..=top).rev().find_map(|k| {
        if k > schedule {
            return None;
        }
        let eps = quarter_pow(eps0, k);
        let r_sq = r_of(&eps);
        if r_sq <= &four * &eps || r_sq >= Rat::one() {
            return None;
        }
        let Ok(Verdict::Yes(cert)) = certify_very_proximal(g, &r_sq, &eps) else {
            return None;
        };
        let player = proximal_player(g, &cert)?;
        Some((cert, player))
    })
}

/// A power of the element found for `N`, kept in reserve so that later
/// coset elements have room inside its sets.
#[derive(Clone)]
struct Reserve {
    power: u32,
    word: Word,
    element: ProjMat,
    cert: ProximalCert,
    player: ProjPlayer,
}

struct Beta {
    word: Word,
    factors: Vec<ConjFactor>,
    element: ProjMat,
    cert: ProximalCert,
    player: ProjPlayer,
}

/// Coset elements, plus the last power of `a_N` kept in reserve: its sets
/// miss those of every accepted coset element, so it joins their tuple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosetPingPong {
    pub outcomes: Vec<CosetOutcome>,
    pub reserve: Option<CertifiedWord>,
}

/// For each coset representative `x`: first `β = (ρᵐ γ ρᵐ)ʲ` with `ρ = aᴶ`
/// the current reserve power of the element found for `N` and `γ` a
/// conjugate of a class representative, so that `β` has its own fixed points
/// inside the sets of `ρ`; then `δ = βˡ·n₁ x n₂·βˡ` with `n₁, n₂` products of
/// conjugates (the empty product first). Accepted `δ` are very proximal,
/// nested in the sets of `β`, `ρ` and `a`, and play ping-pong with the
/// earlier ones; the reserve then moves to the smallest higher power of `a`
/// whose sets miss every accepted `δ`.
pub fn coset_pingpong(
    group: &MarkedGroup,
    n: &NormalData,
    a_n: &NormalElement,
    budgets: &Budgets,
) -> Result<CosetPingPong> {
    check_normal(group, n)?;
    let place = group.place();
    let a = &a_n.element;
    let a_cert = &a_n.cert;
    require_very(a, a_cert, "a_N")?;
    let one_factor = Budgets {
        factors: budgets.factors.min(1),
        ..*budgets
    };
    let gammas = normal_candidates(group, n, &one_factor);
    let mut aux: Vec<Vec<ConjFactor>> = vec![Vec::new()];
    aux.extend(gammas.iter().cloned());
    let mut pairs: Vec<(usize, usize)> = (0..aux.len())
        .flat_map(|i| (0..aux.len()).map(move |j| (i, j)))
        .collect();
    pairs.sort_by_key(|&(i, j)| (aux[i].len() + aux[j].len(), i, j));
    let e = budgets.exponent;
    let beta_cands: Vec<(usize, u32, u32)> = (0..gammas.len())
        .flat_map(|gi| (1..=e).flat_map(move |m| (1..=budgets.power).map(move |j| (gi, m, j))))
        .collect();
    let delta_cands: Vec<(usize, u32)> = (0..pairs.len())
        .flat_map(|pi| (1..=e).map(move |l| (pi, l)))
        .collect();
    let r_sq = &a_cert.r_sq / Rat::from_integer(4.into());
    let mut reserve = Some(Reserve {
        power: 1,
        word: a_n.word.clone(),
        element: a.clone(),
        cert: a_cert.clone(),
        player: a_n.player.clone(),
    });
    let mut out = Vec::new();
    let mut accepted: Vec<ProjPlayer> = Vec::new();
    for (coset, rep) in n.coset_reps.iter().enumerate() {
        let not_found = CosetOutcome::NotFound {
            coset,
            rep: rep.clone(),
        };
        let Some(res) = reserve.clone() else {
            out.push(not_found);
            continue;
        };
        let others: Vec<&ProjPlayer> = accepted.iter().collect();
        let avoid = fixed_regions(&res.cert);
        let beta = beta_cands.par_iter().find_map_first(|&(gi, m, j)| {
            let rho_m = res.element.pow(m as i64);
            let gw = flatten(&gammas[gi], &n.class_reps);
            let alpha = rho_m.mul(&group.eval(&gw)).mul(&rho_m).normalized();
            let element = alpha.pow(j as i64).normalized();
            if !centers_admitted(&element, &res.player, &avoid, place) {
                return None;
            }
            let (cert, player) =
                tightest_certificate(&element, &res.cert.epsilon_sq, budgets.schedule, |_| {
                    r_sq.clone()
                })?;
            if !(nested_in(&player, &res.player, place)
                && clear_of(&player, &avoid, place)
                && compatible(&player, &others, place))
            {
                return None;
            }
            let rho_f = repeat_factors(&a_n.factors, res.power * m);
            let alpha_f: Vec<ConjFactor> = rho_f
                .iter()
                .chain(&gammas[gi])
                .chain(&rho_f)
                .cloned()
                .collect();
            let rho_w = power(&a_n.word, (res.power * m) as i64);
            Some(Beta {
                word: power(&concat(&[&rho_w, &gw, &rho_w]), j as i64),
                factors: repeat_factors(&alpha_f, j),
                element,
                cert,
                player,
            })
        });
        let Some(beta) = beta else {
            out.push(not_found);
            continue;
        };
        let beta_inv_cert = beta.cert.very.as_ref().expect("very proximal");
        let found = delta_cands
            .par_iter()
            .enumerate()
            .find_map_first(|(idx, &(pi, l))| {
                let (i, j) = pairs[pi];
                let xw = concat(&[
                    &flatten(&aux[i], &n.class_reps),
                    rep,
                    &flatten(&aux[j], &n.class_reps),
                ]);
                let x = group.eval(&xw);
                if !(moves_off(&x, &beta.cert.fixed_point, &beta.cert.fixed_plane)
                    && moves_off(
                        &x.inverse(),
                        &beta_inv_cert.fixed_point,
                        &beta_inv_cert.fixed_plane,
                    ))
                {
                    return None;
                }
                let bl = beta.element.pow(l as i64).normalized();
                let element = bl.mul(&x).mul(&bl).normalized();
                let (cert, player) = tightest_certificate(
                    &element,
                    &beta.cert.epsilon_sq,
                    budgets.schedule,
                    |_| r_sq.clone(),
                )?;
                if !(nested_in(&player, &beta.player, place)
                    && nested_in(&player, &a_n.player, place)
                    && compatible(&player, &others, place))
                {
                    return None;
                }
                let bl_f = repeat_factors(&beta.factors, l);
                let lead: Vec<ConjFactor> = bl_f.iter().chain(&aux[i]).cloned().collect();
                let trail: Vec<ConjFactor> = aux[j]
                    .iter()
                    .chain(&bl_f)
                    .map(|f| f.conjugated(rep))
                    .collect();
                let bl_w = power(&beta.word, l as i64);
                Some(CosetElement {
                    coset,
                    rep: rep.clone(),
                    n1: aux[i].clone(),
                    n2: aux[j].clone(),
                    beta: beta.word.clone(),
                    l,
                    word: concat(&[&bl_w, &xw, &bl_w]),
                    element,
                    cert,
                    player,
                    coset_factors: lead.into_iter().chain(trail).collect(),
                    tried: idx + 1,
                })
            });
        match found {
            Some(c) => {
                accepted.push(c.player.clone());
                out.push(CosetOutcome::Found(c));
                reserve = next_reserve(&res, a, &a_n.word, &accepted, budgets, place);
            }
            None => out.push(not_found),
        }
    }
    let reserve = reserve.map(|r| CertifiedWord {
        word: r.word,
        element: r.element,
        cert: r.cert,
        player: r.player,
    });
    Ok(CosetPingPong {
        outcomes: out,
        reserve,
    })
}

fn next_reserve(
    res: &Reserve,
    a: &ProjMat,
    a_word: &[Letter],
    accepted: &[ProjPlayer],
    budgets: &Budgets,
    place: Place,
) -> Option<Reserve> {
    let others: Vec<&ProjPlayer> = accepted.iter().collect();
    let mut element = res.element.clone();
    for t in 1..=budgets.power {
        element = element.mul(a).normalized();
        let found = tightest_certificate(&element, &res.cert.epsilon_sq, budgets.schedule, |_| {
            res.cert.r_sq.clone()
        });
        if let Some((cert, player)) = found {
            if nested_in(&player, &res.player, place) && compatible(&player, &others, place) {
                return Some(Reserve {
                    power: res.power + t,
                    word: power(a_word, (res.power + t) as i64),
                    element,
                    cert,
                    player,
                });
            }
        }
    }
    None
}

/// Coset correctness: `δ·rep⁻¹` is the recorded product of conjugates.
pub fn coset_correct(c: &CosetElement, class_reps: &[Word]) -> bool {
    is_product_of_conjugates(
        &concat(&[&c.word, &inverse(&c.rep)]),
        &c.coset_factors,
        class_reps,
    ) && is_product_of_conjugates(&flatten(&c.n1, class_reps), &c.n1, class_reps)
        && is_product_of_conjugates(&flatten(&c.n2, class_reps), &c.n2, class_reps)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertifiedWord {
    pub word: Word,
    pub element: ProjMat,
    pub cert: ProximalCert,
    pub player: ProjPlayer,
}

/// The smallest power `≤ max_power` of `w` that certifies very proximal.
pub fn very_proximal_power(
    group: &MarkedGroup,
    w: &[Letter],
    radii: &Radii,
    max_power: u32,
) -> Result<Option<CertifiedWord>> {
    group.check_word(w)?;
    let base = group.eval(w);
    let mut m = base.clone();
    for p in 1..=max_power {
        if p > 1 {
            m = m.mul(&base).normalized();
        }
        if let Verdict::Yes(cert) = certify_very_proximal(&m, &radii.r_sq, &radii.epsilon_sq)? {
            if let Some(player) = proximal_player(&m, &cert) {
                return Ok(Some(CertifiedWord {
                    word: power(w, p as i64),
                    element: m,
                    cert,
                    player,
                }));
            }
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrapElement {
    pub rep: Word,
    /// `c` is replaced by `h₁^pre·c` before wrapping.
    pub pre: u32,
    pub n: u32,
    pub m: u32,
    pub word: Word,
    pub element: ProjMat,
    pub cert: ProximalCert,
    pub player: ProjPlayer,
    pub tried: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WrapOutcome {
    Found(WrapElement),
    Skipped { rep: Word, note: String },
    NotFound { rep: Word },
}

/// For each `c`, the smallest `(n, m)` with
/// `c̃ = h₁ᵐ h₂ⁿ c h₂ⁿ h₁⁻ᵐ` very proximal, its sets inside `A(h₁)`, off the
/// fixed-point enclosure of `h₁`, and in ping-pong position with earlier `c̃`.
pub fn double_coset_wrap(
    group: &MarkedGroup,
    h1: &CertifiedWord,
    h2: &CertifiedWord,
    reps: &[Word],
    budgets: &Budgets,
) -> Result<Vec<WrapOutcome>> {
    let place = group.place();
    require_very(&h1.element, &h1.cert, "h1")?;
    require_very(&h2.element, &h2.cert, "h2")?;
    if !compatible(&h2.player, &[&h1.player], place) {
        return Err(Error::Hypothesis(
            "h1 and h2 sets are not certified disjoint".into(),
        ));
    }
    let h2_inv = h2.cert.very.as_ref().expect("checked");
    let h1_fixed = h1.cert.fixed_point.as_set();
    let e = budgets.exponent;
    let pow_list = |g: &ProjMat| {
        let mut v = vec![ProjMat::identity(group.dim(), place)];
        for _ in 0..e {
            let next = v.last().expect("nonempty").mul(g).normalized();
            v.push(next);
        }
        v
    };
    let (p1, p2) = (pow_list(&h1.element), pow_list(&h2.element));
    let id = ProjMat::identity(group.dim(), place);
    let mut out = Vec::new();
    let mut accepted: Vec<ProjPlayer> = Vec::new();
    for rep in reps {
        group.check_word(rep)?;
        let c = group.eval(rep);
        if c.equals_projectively(&id) {
            out.push(WrapOutcome::Skipped {
                rep: rep.clone(),
                note: "trivial double coset".into(),
            });
            continue;
        }
        let pre = (0..=e).find(|&i| {
            let ci = p1[i as usize].mul(&c);
            moves_off(&ci, &h2.cert.fixed_point, &h2.cert.fixed_plane)
                && moves_off(&ci.inverse(), &h2_inv.fixed_point, &h2_inv.fixed_plane)
        });
        let Some(pre) = pre else {
            out.push(WrapOutcome::NotFound { rep: rep.clone() });
            continue;
        };
        let c = p1[pre as usize].mul(&c);
        let cands: Vec<(u32, u32)> = (1..=e).flat_map(|n| (1..=e).map(move |m| (n, m))).collect();
        let others: Vec<&ProjPlayer> = accepted.iter().collect();
        let host_r = h1.player.sets.a_plus.parts()[0].radius_sq().clone();
        let found = cands
            .par_iter()
            .enumerate()
            .find_map_first(|(idx, &(n, m))| {
                let (hm, hn) = (&p1[m as usize], &p2[n as usize]);
                let element = hm.mul(hn).mul(&c).mul(hn).mul(&hm.inverse()).normalized();
                let (cert, player) =
                    tightest_certificate(&element, &host_r, budgets.schedule, |e| {
                        e * Rat::from_integer(5.into())
                    })?;
                let inside = ALL_SETS.iter().all(|&s| {
                    let set = player.sets.get(s);
                    closure_within(set, &h1.player.sets.a_plus, place)
                        && disjoint(set, &h1_fixed, place)
                });
                if inside && compatible(&player, &others, place) {
                    let word = concat(&[
                        &power(&h1.word, m as i64),
                        &power(&h2.word, n as i64),
                        &power(&h1.word, pre as i64),
                        rep,
                        &power(&h2.word, n as i64),
                        &power(&h1.word, -(m as i64)),
                    ]);
                    return Some(WrapElement {
                        rep: rep.clone(),
                        pre,
                        n,
                        m,
                        word,
                        element,
                        cert,
                        player,
                        tried: idx + 1,
                    });
                }
                None
            });
        match found {
            Some(w) => {
                accepted.push(w.player.clone());
                out.push(WrapOutcome::Found(w));
            }
            None => out.push(WrapOutcome::NotFound { rep: rep.clone() }),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrapSpec {
    pub h1: Word,
    pub h2: Word,
    pub reps: Vec<Word>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalReport {
    pub label: String,
    pub a_n: Option<NormalElement>,
    /// The power of `a_N` that plays alongside the coset elements.
    pub reserve: Option<CertifiedWord>,
    pub cosets: Vec<CosetOutcome>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrapReport {
    pub h1: Option<CertifiedWord>,
    pub h2: Option<CertifiedWord>,
    pub outcomes: Vec<WrapOutcome>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportVerdict {
    Certified,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub radii: Radii,
    pub budgets: Budgets,
    pub normals: Vec<NormalReport>,
    pub wrap: Option<WrapReport>,
    /// Final generators: the coset elements, then the wrapped elements.
    pub generators: Vec<(Word, ProjPlayer)>,
    pub tuple_certified: bool,
    pub oracle: Option<OracleResult>,
    pub verdict: ReportVerdict,
}

pub const REPORT_ORACLE_LEN: usize = 6;

/// Steps 1 and 2 for every listed normal subgroup, then the optional wrap,
/// then certification of the combined tuple and the freeness oracle.
pub fn truncated_prodense(
    group: &MarkedGroup,
    normals: &[NormalData],
    wrap: Option<&WrapSpec>,
    radii: &Radii,
    budgets: &Budgets,
) -> Result<SynthesisReport> {
    if normals.is_empty() {
        return Err(Error::NothingToIntersect);
    }
    for n in normals {
        check_normal(group, n)?;
    }
    if radii.r_sq <= &radii.epsilon_sq * Rat::from_integer(4.into()) {
        return Err(Error::RadiusTooSmall);
    }
    let mut avoid: Vec<ProjSet> = Vec::new();
    let mut hs = None;
    if let Some(w) = wrap {
        let h1 = very_proximal_power(group, &w.h1, radii, budgets.power)?;
        let h2 = very_proximal_power(group, &w.h2, radii, budgets.power)?;
        for h in [&h1, &h2].into_iter().flatten() {
            avoid.extend(ALL_SETS.iter().map(|&s| h.player.sets.get(s).clone()));
        }
        hs = Some((h1, h2));
    }
    let mut reports = Vec::new();
    for n in normals {
        let host = HostRegion {
            inside: None,
            avoid: avoid.clone(),
        };
        let a_n = normal_proximal(group, n, &host, radii, budgets)?;
        let (cosets, reserve) = match &a_n {
            Some(a) => {
                avoid.extend(ALL_SETS.iter().map(|&s| a.player.sets.get(s).clone()));
                let c = coset_pingpong(group, n, a, budgets)?;
                (c.outcomes, c.reserve)
            }
            None => (
                n.coset_reps
                    .iter()
                    .enumerate()
                    .map(|(coset, rep)| CosetOutcome::NotFound {
                        coset,
                        rep: rep.clone(),
                    })
                    .collect(),
                None,
            ),
        };
        reports.push(NormalReport {
            label: n.label.clone(),
            a_n,
            reserve,
            cosets,
        });
    }
    let wrap_report = match (wrap, hs) {
        (Some(w), Some((h1, h2))) => {
            let outcomes = match (&h1, &h2) {
                (Some(a), Some(b)) => double_coset_wrap(group, a, b, &w.reps, budgets)?,
                _ => w
                    .reps
                    .iter()
                    .map(|rep| WrapOutcome::NotFound { rep: rep.clone() })
                    .collect(),
            };
            Some(WrapReport { h1, h2, outcomes })
        }
        _ => None,
    };
    let mut generators: Vec<(Word, ProjPlayer)> = Vec::new();
    for r in &reports {
        if let Some(res) = &r.reserve {
            generators.push((res.word.clone(), res.player.clone()));
        }
        for c in &r.cosets {
            if let CosetOutcome::Found(c) = c {
                generators.push((c.word.clone(), c.player.clone()));
            }
        }
    }
    if let Some(w) = &wrap_report {
        for o in &w.outcomes {
            if let WrapOutcome::Found(e) = o {
                generators.push((e.word.clone(), e.player.clone()));
            }
        }
    }
    let (tuple_certified, oracle) = if generators.is_empty() {
        (false, None)
    } else {
        let players: Vec<ProjPlayer> = generators.iter().map(|(_, p)| p.clone()).collect();
        let t: ProjTuple = certify_tuple(players)?;
        let elements: Vec<ProjMat> = generators.iter().map(|(_, p)| p.element.clone()).collect();
        (
            t.verdict.is_certified(),
            Some(matrix_oracle(&elements, REPORT_ORACLE_LEN)),
        )
    };
    let mut report = SynthesisReport {
        radii: radii.clone(),
        budgets: *budgets,
        normals: reports,
        wrap: wrap_report,
        generators,
        tuple_certified,
        oracle,
        verdict: ReportVerdict::Unknown,
    };
    if let Some(o) = &report.oracle {
        report.verdict = overall_verdict(&report, o);
    }
    Ok(report)
}

/// Re-checks a report without searching: words evaluate to the recorded
/// elements, certificates verify, players derive from certificates, the
/// word-shape checks hold, nesting holds and the final tuple verifies.
pub fn verify_report(
    group: &MarkedGroup,
    normals: &[NormalData],
    report: &SynthesisReport,
) -> bool {
    let place = group.place();
    let word_ok =
        |w: &Word, m: &ProjMat| group.check_word(w).is_ok() && group.eval(w).equals_projectively(m);
    let cert_ok = |m: &ProjMat, c: &ProximalCert, p: &ProjPlayer| {
        c.verify(m) && proximal_player(m, c).as_ref() == Some(p)
    };
    if report.normals.len() != normals.len() {
        return false;
    }
    for (r, n) in report.normals.iter().zip(normals) {
        let Some(a) = &r.a_n else {
            continue;
        };
        if !(word_ok(&a.word, &a.element)
            && cert_ok(&a.element, &a.cert, &a.player)
            && is_product_of_conjugates(&a.word, &a.factors, &n.class_reps))
        {
            return false;
        }
        if let Some(res) = &r.reserve {
            let k = res.word.len() / a.word.len().max(1);
            if !(res.word == power(&a.word, k as i64)
                && word_ok(&res.word, &res.element)
                && cert_ok(&res.element, &res.cert, &res.player))
            {
                return false;
            }
        }
        for c in &r.cosets {
            if let CosetOutcome::Found(c) = c {
                if !(word_ok(&c.word, &c.element)
                    && cert_ok(&c.element, &c.cert, &c.player)
                    && n.coset_reps.get(c.coset) == Some(&c.rep)
                    && coset_correct(c, &n.class_reps)
                    && nested_in(&c.player, &a.player, place))
                {
                    return false;
                }
            }
        }
    }
    if let Some(w) = &report.wrap {
        for h in [&w.h1, &w.h2].into_iter().flatten() {
            if !(word_ok(&h.word, &h.element) && cert_ok(&h.element, &h.cert, &h.player)) {
                return false;
            }
        }
        for o in &w.outcomes {
            if let WrapOutcome::Found(e) = o {
                let Some(h1) = &w.h1 else {
                    return false;
                };
                let inside = ALL_SETS
                    .iter()
                    .all(|&s| closure_within(e.player.sets.get(s), &h1.player.sets.a_plus, place));
                if !(word_ok(&e.word, &e.element)
                    && cert_ok(&e.element, &e.cert, &e.player)
                    && inside)
                {
                    return false;
                }
            }
        }
    }
    if report.generators.is_empty() {
        return !report.tuple_certified && report.verdict == ReportVerdict::Unknown;
    }
    let players: Vec<ProjPlayer> = report.generators.iter().map(|(_, p)| p.clone()).collect();
    let gens_ok = report
        .generators
        .iter()
        .all(|(w, p)| word_ok(w, &p.element));
    if !(gens_ok && crate::pingpong::verify_tuple(&players) == report.tuple_certified) {
        return false;
    }
    let elements: Vec<ProjMat> = players.iter().map(|p| p.element.clone()).collect();
    let oracle = matrix_oracle(&elements, REPORT_ORACLE_LEN);
    report.oracle.as_ref() == Some(&oracle) && report.verdict == overall_verdict(report, &oracle)
}

fn overall_verdict(report: &SynthesisReport, oracle: &OracleResult) -> ReportVerdict {
    let normals_done = report.normals.iter().all(|r| {
        r.reserve.is_some() && r.cosets.iter().all(|c| matches!(c, CosetOutcome::Found(_)))
    });
    let wrap_done = report.wrap.as_ref().is_none_or(|w| {
        w.outcomes
            .iter()
            .all(|o| !matches!(o, WrapOutcome::NotFound { .. }))
    });
    if normals_done
        && wrap_done
        && report.tuple_certified
        && *oracle == OracleResult::NoRelationFound
    {
        ReportVerdict::Certified
    } else {
        ReportVerdict::Unknown
    }
}

#[allow(dead_code)]
fn _assert_send_sync() {
    fn check<T: Send + Sync>() {}
    check::<ProjMat>();
    check::<ProximalCert>();
    let _ = Rat::zero();
}
