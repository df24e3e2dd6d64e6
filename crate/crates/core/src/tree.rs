//! Amalgams `A ∗_H B` of finite groups and their Bass–Serre trees.
//!
//! Elements are kept in normal form `t₁ t₂ … t_k · h`: the `tᵢ` are
//! nontrivial left transversal representatives of `H`, alternating between
//! the factors, and `h ∈ H`. Vertices of the tree are cosets `gA`, `gB` and
//! edges are cosets `gH`; the tree is never stored, only walked.
//!
//! Boundary points are handled through shadows. The shadow of an oriented
//! edge `x → y` is the set of ends whose ray from `x` passes through `y`,
//! i.e. the ends of the half-tree on `y`'s side.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pingpong::{
    certify_four_sets, FourSets, MapVerdict, SetVerdict, TupleVerdict, WordGroup,
};

/// A finite group given by its multiplication table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "RawGroup", try_from = "RawGroup")]
pub struct FiniteGroup {
    names: Vec<String>,
    table: Vec<Vec<usize>>,
    inv: Vec<usize>,
    identity: usize,
}

impl FiniteGroup {
    /// Checks closure, identity, inverses and associativity over the table.
    pub fn from_table(names: Vec<String>, table: Vec<Vec<usize>>) -> Result<FiniteGroup> {
        let n = names.len();
        if n == 0 {
            return Err(Error::BadTable("empty group".into()));
        }
        if table.len() != n || table.iter().any(|r| r.len() != n) {
            return Err(Error::BadTable(format!("table is not {n}×{n}")));
        }
        for (i, row) in table.iter().enumerate() {
            if let Some(j) = row.iter().position(|&x| x >= n) {
                return Err(Error::BadTable(format!("entry ({i}, {j}) out of range")));
            }
        }
        for i in 0..n {
            if let Some(j) = (0..i).find(|&j| names[i] == names[j]) {
                return Err(Error::BadTable(format!(
                    "duplicate name {} at {j} and {i}",
                    names[i]
                )));
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|x| table[e][x] == x && table[x][e] == x))
            .ok_or_else(|| Error::BadTable("no identity".into()))?;
        let mut inv = Vec::with_capacity(n);
        for x in 0..n {
            let y = (0..n)
                .find(|&y| table[x][y] == identity && table[y][x] == identity)
                .ok_or_else(|| Error::BadTable(format!("{} has no inverse", names[x])))?;
            inv.push(y);
        }
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    if table[table[x][y]][z] != table[x][table[y][z]] {
                        return Err(Error::BadTable(format!(
                            "not associative at ({}, {}, {})",
                            names[x], names[y], names[z]
                        )));
                    }
                }
            }
        }
        Ok(FiniteGroup {
            names,
            table,
            inv,
            identity,
        })
    }

    /// `ℤ/n` with elements `1, g, g2, …, g{n-1}`.
    pub fn cyclic(n: usize, gen: &str) -> FiniteGroup {
        let names = (0..n)
            .map(|i| match i {
                0 => "1".to_string(),
                1 => gen.to_string(),
                _ => format!("{gen}{i}"),
            })
            .collect();
        let table = (0..n)
            .map(|i| (0..n).map(|j| (i + j) % n).collect())
            .collect();
        FiniteGroup::from_table(names, table).expect("cyclic table")
    }

    /// The symmetric group on `{1, …, n}` in cycle notation, composing
    /// right to left.
    pub fn symmetric(n: usize) -> FiniteGroup {
        let mut perms: Vec<Vec<usize>> = Vec::new();
        permutations(&mut (0..n).collect(), 0, &mut perms);
        perms.sort();
        let index: HashMap<Vec<usize>, usize> = perms
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, p)| (p, i))
            .collect();
        let table = perms
            .iter()
            .map(|p| {
                perms
                    .iter()
                    .map(|q| index[&q.iter().map(|&i| p[i]).collect::<Vec<_>>()])
                    .collect()
            })
            .collect();
        let names = perms.iter().map(|p| cycle_notation(p)).collect();
        FiniteGroup::from_table(names, table).expect("symmetric table")
    }

    pub fn order(&self) -> usize {
        self.names.len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn mul(&self, x: usize, y: usize) -> usize {
        self.table[x][y]
    }

    pub fn inv(&self, x: usize) -> usize {
        self.inv[x]
    }

    pub fn name(&self, x: usize) -> &str {
        &self.names[x]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Whether `set` is a subgroup (closed under products; finite groups).
    pub fn is_subgroup(&self, set: &[usize]) -> bool {
        let mut member = vec![false; self.order()];
        for &x in set {
            member[x] = true;
        }
        member[self.identity]
            && set
                .iter()
                .all(|&x| set.iter().all(|&y| member[self.mul(x, y)]))
    }

    /// Whether `set` is normal: closed under conjugation by every element.
    pub fn is_normal(&self, set: &[usize]) -> bool {
        let mut member = vec![false; self.order()];
        for &x in set {
            member[x] = true;
        }
        (0..self.order()).all(|g| {
            set.iter()
                .all(|&k| member[self.mul(self.mul(self.inv(g), k), g)])
        })
    }
}

#[derive(Serialize, Deserialize)]
struct RawGroup {
    names: Vec<String>,
    table: Vec<Vec<usize>>,
}

impl From<FiniteGroup> for RawGroup {
    fn from(g: FiniteGroup) -> RawGroup {
        RawGroup {
            names: g.names,
            table: g.table,
        }
    }
}

impl TryFrom<RawGroup> for FiniteGroup {
    type Error = Error;
    fn try_from(r: RawGroup) -> Result<FiniteGroup> {
        FiniteGroup::from_table(r.names, r.table)
    }
}

fn permutations(p: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == p.len() {
        out.push(p.clone());
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, out);
        p.swap(k, i);
    }
}

fn cycle_notation(p: &[usize]) -> String {
    let mut seen = vec![false; p.len()];
    let mut out = String::new();
    for s in 0..p.len() {
        if seen[s] || p[s] == s {
            continue;
        }
        out.push('(');
        let mut i = s;
        while !seen[i] {
            seen[i] = true;
            out.push_str(&(i + 1).to_string());
            i = p[i];
        }
        out.push(')');
    }
    if out.is_empty() {
        "1".into()
    } else {
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Factor {
    A,
    B,
}

impl Factor {
    pub fn other(self) -> Factor {
        match self {
            Factor::A => Factor::B,
            Factor::B => Factor::A,
        }
    }

    fn idx(self) -> usize {
        self as usize
    }
}

/// An element of one of the factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Syllable {
    pub factor: Factor,
    pub elem: usize,
}

/// An element of the amalgam in normal form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeAut {
    syllables: Vec<Syllable>,
    h: usize,
}

impl TreeAut {
    pub fn syllables(&self) -> &[Syllable] {
        &self.syllables
    }

    /// The trailing element of `H`.
    pub fn h(&self) -> usize {
        self.h
    }

    /// Number of syllables of the normal form.
    pub fn len(&self) -> usize {
        self.syllables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.syllables.is_empty()
    }
}

/// A vertex `gF` of the Bass–Serre tree, stored by the syllables of the
/// shortest normal form of a coset member (never ending in `F`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex {
    pub factor: Factor,
    pub path: Vec<Syllable>,
}

impl Vertex {
    pub fn base(factor: Factor) -> Vertex {
        Vertex {
            factor,
            path: Vec::new(),
        }
    }
}

/// `A ∗_H B` with `H` embedded in both factors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "RawAmalgam", try_from = "RawAmalgam")]
pub struct Amalgam {
    factors: [FiniteGroup; 2],
    h: FiniteGroup,
    inj: [Vec<usize>; 2],
    /// Left transversal of `H` in each factor, identity first.
    reps: [Vec<usize>; 2],
    /// For each factor element `g`, `(i, k)` with `g = reps[i]·inj(k)`.
    split: [Vec<(usize, usize)>; 2],
}

#[derive(Serialize, Deserialize)]
struct RawAmalgam {
    a: FiniteGroup,
    b: FiniteGroup,
    h: FiniteGroup,
    inj_a: Vec<usize>,
    inj_b: Vec<usize>,
}

impl From<Amalgam> for RawAmalgam {
    fn from(g: Amalgam) -> RawAmalgam {
        let [a, b] = g.factors;
        let [inj_a, inj_b] = g.inj;
        RawAmalgam {
            a,
            b,
            h: g.h,
            inj_a,
            inj_b,
        }
    }
}

impl TryFrom<RawAmalgam> for Amalgam {
    type Error = Error;
    fn try_from(r: RawAmalgam) -> Result<Amalgam> {
        Amalgam::new(r.a, r.b, r.h, r.inj_a, r.inj_b)
    }
}

impl Amalgam {
    /// Checks that both injections are injective homomorphisms and fixes the
    /// transversals (the least index in each coset).
    pub fn new(
        a: FiniteGroup,
        b: FiniteGroup,
        h: FiniteGroup,
        inj_a: Vec<usize>,
        inj_b: Vec<usize>,
    ) -> Result<Amalgam> {
        let mut reps: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        let mut split: [Vec<(usize, usize)>; 2] = [Vec::new(), Vec::new()];
        for (f, (g, inj)) in [(&a, &inj_a), (&b, &inj_b)].into_iter().enumerate() {
            let name = if f == 0 { "A" } else { "B" };
            if inj.len() != h.order() || inj.iter().any(|&x| x >= g.order()) {
                return Err(Error::BadTable(format!(
                    "H → {name} is not a map into {name}"
                )));
            }
            for x in 0..h.order() {
                for y in 0..h.order() {
                    if inj[h.mul(x, y)] != g.mul(inj[x], inj[y]) {
                        return Err(Error::BadTable(format!(
                            "H → {name} is not a homomorphism at ({}, {})",
                            h.name(x),
                            h.name(y)
                        )));
                    }
                }
                if let Some(y) = (0..x).find(|&y| inj[y] == inj[x]) {
                    return Err(Error::BadTable(format!(
                        "H → {name} is not injective: {} and {}",
                        h.name(y),
                        h.name(x)
                    )));
                }
            }
            let mut sp = vec![None; g.order()];
            let order =
                std::iter::once(g.identity()).chain((0..g.order()).filter(|&x| x != g.identity()));
            for t in order {
                if sp[t].is_some() {
                    continue;
                }
                let i = reps[f].len();
                reps[f].push(t);
                for k in 0..h.order() {
                    sp[g.mul(t, inj[k])] = Some((i, k));
                }
            }
            split[f] = sp.into_iter().map(|s| s.expect("cosets cover")).collect();
        }
        Ok(Amalgam {
            factors: [a, b],
            h,
            inj: [inj_a, inj_b],
            reps,
            split,
        })
    }

    /// `ℤ/m ∗ ℤ/n` with generators named `a` and `b`.
    pub fn free_product_cyclic(m: usize, a: &str, n: usize, b: &str) -> Amalgam {
        let h = FiniteGroup::cyclic(1, "e");
        Amalgam::new(
            FiniteGroup::cyclic(m, a),
            FiniteGroup::cyclic(n, b),
            h,
            vec![0],
            vec![0],
        )
        .expect("free product")
    }

    pub fn factor(&self, f: Factor) -> &FiniteGroup {
        &self.factors[f.idx()]
    }

    pub fn subgroup(&self) -> &FiniteGroup {
        &self.h
    }

    pub fn injection(&self, f: Factor) -> &[usize] {
        &self.inj[f.idx()]
    }

    pub fn transversal(&self, f: Factor) -> &[usize] {
        &self.reps[f.idx()]
    }

    /// `[F : H]`, the degree of every `F`-vertex.
    pub fn index(&self, f: Factor) -> usize {
        self.reps[f.idx()].len()
    }

    /// `([A:H] − 1)([B:H] − 1) ≥ 2`.
    pub fn index_condition(&self) -> bool {
        (self.index(Factor::A) - 1) * (self.index(Factor::B) - 1) >= 2
    }

    pub fn identity(&self) -> TreeAut {
        TreeAut {
            syllables: Vec::new(),
            h: self.h.identity(),
        }
    }

    pub fn is_identity(&self, g: &TreeAut) -> bool {
        g.syllables.is_empty() && g.h == self.h.identity()
    }

    /// Right multiplication by one factor element.
    fn push(&self, g: &mut TreeAut, s: Syllable) {
        let f = s.factor.idx();
        let grp = &self.factors[f];
        let mut y = grp.mul(self.inj[f][g.h], s.elem);
        if let Some(last) = g.syllables.last() {
            if last.factor == s.factor {
                y = grp.mul(last.elem, y);
                g.syllables.pop();
            }
        }
        let (i, k) = self.split[f][y];
        if i != 0 {
            g.syllables.push(Syllable {
                factor: s.factor,
                elem: self.reps[f][i],
            });
        }
        g.h = k;
    }

    fn check(&self, s: Syllable) -> Result<()> {
        if s.elem < self.factor(s.factor).order() {
            Ok(())
        } else {
            Err(Error::BadLetter(format!("{:?}:{}", s.factor, s.elem)))
        }
    }

    /// The normal form of a product of factor elements.
    pub fn normal_form(&self, word: &[Syllable]) -> Result<TreeAut> {
        let mut g = self.identity();
        for &s in word {
            self.check(s)?;
            self.push(&mut g, s);
        }
        Ok(g)
    }

    /// The element as a word of factor elements (`h` as an `A`-letter).
    pub fn letters(&self, g: &TreeAut) -> Vec<Syllable> {
        let mut out = g.syllables.clone();
        if g.h != self.h.identity() {
            out.push(Syllable {
                factor: Factor::A,
                elem: self.inj[0][g.h],
            });
        }
        out
    }

    pub fn mul(&self, x: &TreeAut, y: &TreeAut) -> TreeAut {
        let mut g = x.clone();
        for s in self.letters(y) {
            self.push(&mut g, s);
        }
        g
    }

    pub fn inverse(&self, g: &TreeAut) -> TreeAut {
        let mut out = self.identity();
        for s in self.letters(g).iter().rev() {
            let inv = self.factor(s.factor).inv(s.elem);
            self.push(
                &mut out,
                Syllable {
                    factor: s.factor,
                    elem: inv,
                },
            );
        }
        out
    }

    pub fn pow(&self, g: &TreeAut, e: i64) -> TreeAut {
        let base = if e < 0 { self.inverse(g) } else { g.clone() };
        (0..e.unsigned_abs()).fold(self.identity(), |acc, _| self.mul(&acc, &base))
    }

    /// The element of `H` as an amalgam element.
    pub fn from_h(&self, k: usize) -> TreeAut {
        TreeAut {
            syllables: Vec::new(),
            h: k,
        }
    }

    /// Parses one letter: `A:name`, `B:name`, or a name found in exactly
    /// one factor; `1` is the identity.
    pub fn parse_letter(&self, tok: &str) -> Result<Option<Syllable>> {
        if tok == "1" {
            return Ok(None);
        }
        let lookup = |f: Factor, name: &str| {
            self.factor(f)
                .index_of(name)
                .map(|elem| Syllable { factor: f, elem })
        };
        if let Some(rest) = tok.strip_prefix("A:") {
            return lookup(Factor::A, rest)
                .map(Some)
                .ok_or_else(|| Error::BadLetter(tok.into()));
        }
        if let Some(rest) = tok.strip_prefix("B:") {
            return lookup(Factor::B, rest)
                .map(Some)
                .ok_or_else(|| Error::BadLetter(tok.into()));
        }
        match (lookup(Factor::A, tok), lookup(Factor::B, tok)) {
            (Some(s), None) | (None, Some(s)) => Ok(Some(s)),
            (Some(_), Some(_)) => Err(Error::BadLetter(format!(
                "{tok} is ambiguous; prefix A: or B:"
            ))),
            (None, None) => Err(Error::BadLetter(tok.into())),
        }
    }

    /// Parses a whitespace-separated word of letters.
    pub fn parse_word(&self, s: &str) -> Result<Vec<Syllable>> {
        let mut out = Vec::new();
        for tok in s.split_whitespace() {
            out.extend(self.parse_letter(tok)?);
        }
        Ok(out)
    }

    pub fn parse(&self, s: &str) -> Result<TreeAut> {
        self.normal_form(&self.parse_word(s)?)
    }

    pub fn format_letter(&self, s: Syllable) -> String {
        let name = self.factor(s.factor).name(s.elem);
        if self.factor(s.factor.other()).index_of(name).is_some() {
            format!("{:?}:{name}", s.factor)
        } else {
            name.to_string()
        }
    }

    pub fn format_word(&self, w: &[Syllable]) -> String {
        if w.is_empty() {
            return "1".into();
        }
        w.iter()
            .map(|&s| self.format_letter(s))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn format(&self, g: &TreeAut) -> String {
        self.format_word(&self.letters(g))
    }

    pub fn format_vertex(&self, v: &Vertex) -> String {
        format!("{}·{:?}", self.format_word(&v.path), v.factor)
    }

    /// The vertex `g·F`.
    pub fn vertex_of(&self, g: &TreeAut, factor: Factor) -> Vertex {
        let mut path = g.syllables.clone();
        if path.last().is_some_and(|s| s.factor == factor) {
            path.pop();
        }
        Vertex { factor, path }
    }

    fn element_of(&self, v: &Vertex) -> TreeAut {
        TreeAut {
            syllables: v.path.clone(),
            h: self.h.identity(),
        }
    }

    pub fn act(&self, g: &TreeAut, v: &Vertex) -> Vertex {
        self.vertex_of(&self.mul(g, &self.element_of(v)), v.factor)
    }

    /// Neighbors in transversal order.
    pub fn neighbors(&self, v: &Vertex) -> Vec<Vertex> {
        let base = self.element_of(v);
        self.transversal(v.factor)
            .iter()
            .map(|&t| {
                let mut g = base.clone();
                self.push(
                    &mut g,
                    Syllable {
                        factor: v.factor,
                        elem: t,
                    },
                );
                self.vertex_of(&g, v.factor.other())
            })
            .collect()
    }

    /// Vertices on the geodesic from the `A`-base vertex to `v`.
    fn root_path(&self, v: &Vertex) -> Vec<Vertex> {
        let mut out = vec![Vertex::base(Factor::A)];
        let starts_b = v
            .path
            .first()
            .map_or(v.factor == Factor::B, |s| s.factor == Factor::B);
        if starts_b {
            out.push(Vertex::base(Factor::B));
        }
        for i in 1..=v.path.len() {
            out.push(Vertex {
                factor: v.path[i - 1].factor.other(),
                path: v.path[..i].to_vec(),
            });
        }
        out
    }

    pub fn distance(&self, u: &Vertex, v: &Vertex) -> usize {
        let (pu, pv) = (self.root_path(u), self.root_path(v));
        let common = pu.iter().zip(&pv).take_while(|(a, b)| a == b).count();
        pu.len() + pv.len() - 2 * common
    }

    /// The vertices of the geodesic from `u` to `v`, inclusive.
    pub fn geodesic(&self, u: &Vertex, v: &Vertex) -> Vec<Vertex> {
        let (pu, pv) = (self.root_path(u), self.root_path(v));
        let common = pu.iter().zip(&pv).take_while(|(a, b)| a == b).count();
        let mut out: Vec<Vertex> = pu[common - 1..].iter().rev().cloned().collect();
        out.extend(pv[common..].iter().cloned());
        out
    }

    /// The ball of the given radius, in breadth-first order.
    pub fn expand_tree(&self, center: &Vertex, radius: usize) -> TreeBall {
        let mut index: HashMap<Vertex, usize> = HashMap::new();
        let mut vertices = vec![center.clone()];
        let mut depth = vec![0];
        let mut edges = Vec::new();
        index.insert(center.clone(), 0);
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            if depth[i] == radius {
                continue;
            }
            for w in self.neighbors(&vertices[i]) {
                if index.contains_key(&w) {
                    continue;
                }
                let j = vertices.len();
                index.insert(w.clone(), j);
                vertices.push(w);
                depth.push(depth[i] + 1);
                edges.push((i, j));
                queue.push_back(j);
            }
        }
        TreeBall {
            center: center.clone(),
            radius,
            vertices,
            depth,
            edges,
            index,
        }
    }

    /// Elliptic/hyperbolic classification from the cyclically reduced
    /// normal form, with the fixed vertex or a coherent axis edge checked
    /// against tree distances inside the ball of radius `budget` around the
    /// `A`-base vertex.
    pub fn classify(&self, g: &TreeAut, budget: usize) -> Classification {
        let base = Vertex::base(Factor::A);
        let mut conj = self.identity();
        let mut x = g.clone();
        while x.syllables.len() >= 2 && x.syllables[0].factor == x.syllables[x.len() - 1].factor {
            let t = TreeAut {
                syllables: vec![x.syllables[0]],
                h: self.h.identity(),
            };
            x = self.mul(&self.mul(&self.inverse(&t), &x), &t);
            conj = self.mul(&conj, &t);
        }
        if x.len() <= 1 {
            let f = x.syllables.first().map_or(Factor::A, |s| s.factor);
            let fixed = self.act(&conj, &Vertex::base(f));
            if self.distance(&base, &fixed) > budget || self.act(g, &fixed) != fixed {
                return Classification::Unknown;
            }
            return Classification::Elliptic { fixed };
        }
        let l = x.len();
        for (s, t) in [
            (Vertex::base(Factor::A), Vertex::base(Factor::B)),
            (Vertex::base(Factor::B), Vertex::base(Factor::A)),
        ] {
            let (s, t) = (self.act(&conj, &s), self.act(&conj, &t));
            if !self.coherent(g, &s, &t) || self.distance(&s, &self.act(g, &s)) != l {
                continue;
            }
            let within = [&s, &t, &self.act(g, &s), &self.act(g, &t)]
                .into_iter()
                .all(|v| self.distance(&base, v) <= budget);
            if within {
                return Classification::Hyperbolic {
                    translation_length: l,
                    axis: (s, t),
                };
            }
        }
        Classification::Unknown
    }

    /// Whether `s → t` and `g s → g t` lie in this order on one geodesic.
    pub fn coherent(&self, g: &TreeAut, s: &Vertex, t: &Vertex) -> bool {
        let (gs, gt) = (self.act(g, s), self.act(g, t));
        let d = self.distance(s, &gs);
        self.distance(s, t) == 1
            && d > 0
            && self.distance(s, &gt) == d + 1
            && self.distance(t, &gs) + 1 == d
    }

    /// Least displacement `d(v, g v)` over a ball.
    pub fn min_displacement(&self, g: &TreeAut, ball: &TreeBall) -> usize {
        ball.vertices
            .iter()
            .map(|v| self.distance(v, &self.act(g, v)))
            .min()
            .unwrap_or(0)
    }

    pub fn shadow(&self, x: Vertex, y: Vertex) -> Result<ShadowSet> {
        if self.distance(&x, &y) != 1 {
            return Err(Error::Invalid(
                "shadow base vertices are not adjacent".into(),
            ));
        }
        Ok(ShadowSet { x, y })
    }

    /// Whether `v` lies in the half-tree on `y`'s side of the edge.
    pub fn on_shadow_side(&self, v: &Vertex, s: &ShadowSet) -> bool {
        self.distance(v, &s.y) < self.distance(v, &s.x)
    }

    /// Whether the end of a geodesic ray beginning with `prefix` lies in the
    /// shadow. The prefix must be a geodesic path inside `ball`, and its last
    /// step must already decide the side.
    pub fn shadow_member(&self, prefix: &[Vertex], s: &ShadowSet, ball: &TreeBall) -> Result<bool> {
        if prefix.iter().any(|v| !ball.contains(v)) {
            return Err(Error::ExpandFurther);
        }
        if prefix.len() < 2 {
            return Err(Error::Invalid("a ray prefix needs two vertices".into()));
        }
        let geodesic = prefix.windows(2).all(|p| self.distance(&p[0], &p[1]) == 1)
            && self.distance(&prefix[0], &prefix[prefix.len() - 1]) == prefix.len() - 1;
        if !geodesic {
            return Err(Error::Invalid("prefix is not a geodesic path".into()));
        }
        let (u, v) = (&prefix[prefix.len() - 2], &prefix[prefix.len() - 1]);
        if (u == &s.x && v == &s.y) || (u == &s.y && v == &s.x) {
            return Ok(v == &s.y);
        }
        let to_edge = |w: &Vertex| self.distance(w, &s.x).min(self.distance(w, &s.y));
        if to_edge(v) > to_edge(u) {
            Ok(self.on_shadow_side(v, s))
        } else {
            Err(Error::ExpandFurther)
        }
    }

    /// Whether the half-tree of `inner` lies inside that of `outer`.
    fn half_tree_within(&self, inner: &ShadowSet, outer: &ShadowSet) -> bool {
        let rev = ShadowSet {
            x: outer.y.clone(),
            y: outer.x.clone(),
        };
        self.half_trees_disjoint(inner, &rev)
    }

    fn half_trees_disjoint(&self, s: &ShadowSet, t: &ShadowSet) -> bool {
        !self.on_shadow_side(&s.y, t) && !self.on_shadow_side(&t.y, s)
    }

    /// A shadow contained in both, if the two share an end. Shadows of
    /// intersecting half-trees share an end exactly when the intersection
    /// contains a whole half-tree, which then hangs off the geodesic between
    /// the two `y` vertices.
    pub fn common_shadow(&self, s: &ShadowSet, t: &ShadowSet) -> Option<ShadowSet> {
        if self.half_trees_disjoint(s, t) {
            return None;
        }
        if self.half_tree_within(t, s) {
            return Some(t.clone());
        }
        if self.half_tree_within(s, t) {
            return Some(s.clone());
        }
        for z in self.geodesic(&s.y, &t.y) {
            for w in self.neighbors(&z) {
                let c = ShadowSet { x: z.clone(), y: w };
                if self.half_tree_within(&c, s) && self.half_tree_within(&c, t) {
                    return Some(c);
                }
            }
        }
        None
    }

    pub fn shadow_image(&self, g: &TreeAut, s: &ShadowSet) -> ShadowSet {
        ShadowSet {
            x: self.act(g, &s.x),
            y: self.act(g, &s.y),
        }
    }

    /// `g(∂T ∖ R) ⊆ A`, refuted by a shadow outside `R` whose image misses
    /// `A`.
    pub fn map_verdict(&self, g: &TreeAut, a: &ShadowSet, r: &ShadowSet) -> MapVerdict<ShadowSet> {
        let image = self.shadow_image(g, &r.complement());
        match self.common_shadow(&image, &a.complement()) {
            None => MapVerdict::Backed,
            Some(w) => MapVerdict::Refuted(self.shadow_image(&self.inverse(g), &w)),
        }
    }

    pub fn set_verdict(&self, s: &ShadowSet, t: &ShadowSet) -> SetVerdict<ShadowSet> {
        match self.common_shadow(s, t) {
            None => SetVerdict::Disjoint,
            Some(w) => SetVerdict::Overlap(w),
        }
    }

    /// Ping-pong with shadows along the axes. With `p₀ → p₁` the coherent
    /// edge of `g` and `L` its translation length, `A⁺ = Shadow(pₐ → pₐ₊₁)`
    /// for `a = ⌊L/2⌋` and `R⁺ = g⁻¹·Shadow(pₐ₊₁ → pₐ)`, so that `g` maps the
    /// complement of `R⁺` onto `A⁺`; `g⁻¹` uses the same pair swapped.
    pub fn tree_pingpong(&self, elements: &[TreeAut], budget: usize) -> Result<TreeTuple> {
        let mut players = Vec::new();
        for g in elements {
            let (l, (s, t)) = match self.classify(g, budget) {
                Classification::Hyperbolic {
                    translation_length,
                    axis,
                } => (translation_length, axis),
                Classification::Elliptic { .. } => return Err(Error::NotHyperbolic),
                Classification::Unknown => return Err(Error::ExpandFurther),
            };
            let seg = self.geodesic(&s, &self.act(g, &t));
            let a = l / 2;
            let a_plus = ShadowSet {
                x: seg[a].clone(),
                y: seg[a + 1].clone(),
            };
            let r_plus = self.shadow_image(&self.inverse(g), &a_plus.complement());
            players.push(TreePlayer {
                element: g.clone(),
                sets: FourSets::simple(a_plus, r_plus),
            });
        }
        let verdict = self.tuple_verdict(&players);
        Ok(TreeTuple { players, verdict })
    }

    pub fn tuple_verdict(&self, players: &[TreePlayer]) -> TupleVerdict<ShadowSet> {
        let sets: Vec<FourSets<ShadowSet>> = players.iter().map(|p| p.sets.clone()).collect();
        let mapping: Vec<_> = players
            .iter()
            .map(|p| {
                let inv = self.inverse(&p.element);
                (
                    self.map_verdict(&p.element, &p.sets.a_plus, &p.sets.r_plus),
                    self.map_verdict(&inv, &p.sets.a_minus, &p.sets.r_minus),
                )
            })
            .collect();
        certify_four_sets(&sets, &mapping, |s, t| self.set_verdict(s, t))
    }

    /// The largest subgroup of `H` normal in both factors, as indices of
    /// `H`: repeated normal cores until stable.
    pub fn kernel_of_action(&self) -> Vec<usize> {
        let mut k: Vec<usize> = (0..self.h.order()).collect();
        loop {
            let mut next = k.clone();
            for f in [Factor::A, Factor::B] {
                let grp = self.factor(f);
                let inj = self.injection(f);
                let image: Vec<usize> = next.iter().map(|&x| inj[x]).collect();
                next.retain(|&x| {
                    (0..grp.order())
                        .all(|g| image.contains(&grp.mul(grp.mul(grp.inv(g), inj[x]), g)))
                });
            }
            if next == k {
                return k;
            }
            k = next;
        }
    }
}

impl WordGroup for Amalgam {
    type Elem = TreeAut;
    fn identity(&self) -> TreeAut {
        Amalgam::identity(self)
    }
    fn mul(&self, a: &TreeAut, b: &TreeAut) -> TreeAut {
        Amalgam::mul(self, a, b)
    }
    fn is_identity(&self, a: &TreeAut) -> bool {
        Amalgam::is_identity(self, a)
    }
}

/// A finite ball of the tree.
#[derive(Clone, Debug)]
pub struct TreeBall {
    pub center: Vertex,
    pub radius: usize,
    pub vertices: Vec<Vertex>,
    pub depth: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    index: HashMap<Vertex, usize>,
}

impl TreeBall {
    pub fn contains(&self, v: &Vertex) -> bool {
        self.index.contains_key(v)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == i || b == i)
            .count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Elliptic {
        fixed: Vertex,
    },
    Hyperbolic {
        translation_length: usize,
        axis: (Vertex, Vertex),
    },
    Unknown,
}

/// The ends seen from `x` through `y`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShadowSet {
    pub x: Vertex,
    pub y: Vertex,
}

impl ShadowSet {
    pub fn complement(&self) -> ShadowSet {
        ShadowSet {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreePlayer {
    pub element: TreeAut,
    pub sets: FourSets<ShadowSet>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeTuple {
    pub players: Vec<TreePlayer>,
    pub verdict: TupleVerdict<ShadowSet>,
}
