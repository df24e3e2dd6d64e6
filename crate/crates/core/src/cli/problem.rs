//! The line-oriented problem file format (grammar in `docs/problem-format.md`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::pingpong::FourSets;
use crate::projective::{ProjHyperplane, ProjMat, ProjPoint, ProjSet, Shape};
use crate::scalar::{parse_rat, Place, Rat};
use crate::synthesis::{MarkedGroup, NormalData, WrapSpec};
use crate::tree::{Amalgam, Factor, FiniteGroup, Syllable};
use crate::words::{parse_word, Word};

pub const FORMAT_VERSION: u32 = 1;

/// Task keys accepted in `[task]` besides `normal` and `wrap` lines.
const TASK_KEYS: &[&str] = &[
    "op",
    "element",
    "g",
    "x",
    "b",
    "word",
    "center",
    "epsilon_sq",
    "r_sq",
    "g_epsilon_sq",
    "target_epsilon_sq",
    "oracle_len",
    "radius",
];

/// Budget names accepted as `budget.NAME` keys or `--budget NAME=VALUE`.
pub const BUDGET_KEYS: &[&str] = &[
    "conj_len",
    "factors",
    "power",
    "exponent",
    "schedule",
    "k_max",
    "m_max",
    "word_len",
    "max_power",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Matrix(MarkedGroup),
    Amalgam(Amalgam),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerSpec {
    Matrix { word: Word, sets: FourSets<ProjSet> },
    Tree { word: Vec<Syllable> },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub op: String,
    pub params: BTreeMap<String, String>,
    pub sets: BTreeMap<String, ProjSet>,
    pub normals: Vec<NormalData>,
    pub wrap: Option<WrapSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub format: u32,
    pub place: Place,
    pub backend: Backend,
    pub players: Vec<PlayerSpec>,
    pub task: TaskSpec,
}

/// Command-line overrides applied while parsing.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub place: Option<Place>,
    pub params: BTreeMap<String, String>,
}

fn perr(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        col,
        msg: msg.into(),
    }
}

/// One significant line with its 1-based number and the column of its
/// first character.
struct Line<'a> {
    no: usize,
    text: &'a str,
    indent: usize,
}

impl Line<'_> {
    fn err(&self, at: &str, msg: impl Into<String>) -> Error {
        // Column of `at` when it is a subslice of this line.
        let col = (at.as_ptr() as usize)
            .checked_sub(self.text.as_ptr() as usize)
            .filter(|&d| d <= self.text.len())
            .map_or(1, |d| d + 1)
            + self.indent;
        perr(self.no, col, msg)
    }
}

fn rat_at(l: &Line, s: &str) -> Result<Rat> {
    parse_rat(s).map_err(|e| l.err(s.trim_start(), e.to_string()))
}

/// `[a, b, c]` as rationals.
fn vector(l: &Line, s: &str) -> Result<Vec<Rat>> {
    let t = s.trim();
    let inner = t
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| l.err(t, "expected [ … ]"))?;
    if inner.trim().is_empty() {
        return Err(l.err(t, "empty vector"));
    }
    inner.split(',').map(|x| rat_at(l, x)).collect()
}

/// `[[a, b], [c, d]]`.
fn matrix(l: &Line, s: &str) -> Result<Mat> {
    let t = s.trim();
    let inner = t
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| l.err(t, "expected [[ … ], …]"))?;
    let mut rows = Vec::new();
    let mut rest = inner;
    loop {
        let r = rest.trim_start();
        if r.is_empty() {
            break;
        }
        let r = r.strip_prefix(',').map_or(r, str::trim_start);
        let end = r.find(']').ok_or_else(|| l.err(r, "unclosed row"))?;
        rows.push(vector(l, &r[..=end])?);
        rest = &r[end + 1..];
    }
    Mat::from_rows(rows).map_err(|e| l.err(t, e.to_string()))
}

/// `ball [v] r | nbhd [f] r | …`.
fn set(l: &Line, s: &str) -> Result<ProjSet> {
    let mut shapes = Vec::new();
    for part in s.split('|') {
        let p = part.trim();
        let (kind, rest) = p
            .split_once(char::is_whitespace)
            .ok_or_else(|| l.err(p, "expected a shape"))?;
        let close = rest
            .rfind(']')
            .ok_or_else(|| l.err(rest, "expected [ … ]"))?;
        let coords = vector(l, &rest[..=close])?;
        let r = rat_at(l, &rest[close + 1..])?;
        let shape = match kind {
            "ball" => Shape::Ball {
                center: ProjPoint::new(coords).map_err(|e| l.err(rest, e.to_string()))?,
                radius_sq: r,
            },
            "nbhd" => Shape::Nbhd {
                plane: ProjHyperplane::new(coords).map_err(|e| l.err(rest, e.to_string()))?,
                radius_sq: r,
            },
            _ => return Err(l.err(kind, format!("unknown shape `{kind}`"))),
        };
        shapes.push(shape);
    }
    ProjSet::from_shapes(shapes).map_err(|e| l.err(s.trim_start(), e.to_string()))
}

fn word_at(l: &Line, s: &str) -> Result<Word> {
    parse_word(s).map_err(|e| l.err(s.trim_start(), e.to_string()))
}

fn words_at(l: &Line, s: &str) -> Result<Vec<Word>> {
    s.split_whitespace().map(|w| word_at(l, w)).collect()
}

fn key_value<'a>(l: &Line<'a>) -> Result<(&'a str, &'a str)> {
    let (k, v) = l
        .text
        .split_once('=')
        .ok_or_else(|| l.err(l.text, "expected `key = value`"))?;
    Ok((k.trim(), v.trim()))
}

#[derive(Default)]
struct GroupSpec {
    kind: Option<(usize, String, Vec<String>)>,
    rows: BTreeMap<String, (usize, Vec<String>)>,
}

#[derive(Default)]
struct AmalgamSpec {
    groups: BTreeMap<String, GroupSpec>,
    inj: BTreeMap<String, (usize, Vec<String>)>,
}

enum Section {
    None,
    Group,
    Amalgam,
    Players,
    Task,
}

/// Parses a problem file. Errors carry the 1-based line and column.
pub fn parse_problem(text: &str, ov: &Overrides) -> Result<Problem> {
    let mut lines = text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let trimmed = body.trim();
        (!trimmed.is_empty()).then(|| Line {
            no: i + 1,
            text: trimmed,
            indent: body.len() - body.trim_start().len(),
        })
    });
    let first = lines.next().ok_or_else(|| perr(1, 1, "empty file"))?;
    match first.text.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["format", "1"] => {}
        ["format", v] => return Err(first.err(v, format!("unsupported format {v}"))),
        _ => return Err(first.err(first.text, "expected `format 1`")),
    }
    let second = lines
        .next()
        .ok_or_else(|| perr(first.no + 1, 1, "expected `place …`"))?;
    let place_text = second
        .text
        .strip_prefix("place")
        .filter(|r| r.starts_with(char::is_whitespace))
        .ok_or_else(|| second.err(second.text, "expected `place arch` or `place p:PRIME`"))?;
    let header_place: Place = place_text
        .trim()
        .parse()
        .map_err(|e: Error| second.err(place_text.trim(), e.to_string()))?;
    let place = ov.place.unwrap_or(header_place);

    let mut section = Section::None;
    let mut gens: Vec<(usize, String, Mat)> = Vec::new();
    let mut amalgam: Option<(usize, AmalgamSpec)> = None;
    let mut group_line: Option<usize> = None;
    let mut players_raw: Vec<(usize, String)> = Vec::new();
    let mut player_lines: Vec<Line> = Vec::new();
    let mut task = TaskSpec::default();
    let mut task_seen = false;
    for l in lines {
        if l.text.starts_with('[') {
            section = match l.text {
                "[group]" => {
                    group_line.get_or_insert(l.no);
                    Section::Group
                }
                "[amalgam]" => {
                    amalgam.get_or_insert_with(|| (l.no, AmalgamSpec::default()));
                    Section::Amalgam
                }
                "[players]" => Section::Players,
                "[task]" => {
                    task_seen = true;
                    Section::Task
                }
                other => return Err(l.err(other, format!("unknown section {other}"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(l.err(l.text, "expected a section header")),
            Section::Group => {
                let (k, v) = key_value(&l)?;
                let expected = (b'a' + gens.len() as u8) as char;
                if k.len() != 1 || !k.starts_with(expected) {
                    return Err(l.err(
                        k,
                        format!("generators are named a, b, c, … in order; expected `{expected}`"),
                    ));
                }
                gens.push((l.no, k.to_string(), matrix(&l, v)?));
            }
            Section::Amalgam => {
                let spec = &mut amalgam.as_mut().expect("section opened").1;
                let (k, v) = key_value(&l)?;
                let toks: Vec<String> = v.split_whitespace().map(String::from).collect();
                if let Some(f) = k.strip_prefix("inj").map(str::trim) {
                    if f != "A" && f != "B" {
                        return Err(l.err(k, "expected `inj A` or `inj B`"));
                    }
                    spec.inj.insert(f.to_string(), (l.no, toks));
                } else if let Some((g, rest)) = k.split_once(".row") {
                    let name = rest.trim();
                    if name.is_empty() {
                        return Err(l.err(k, "expected `X.row NAME = ENTRIES`"));
                    }
                    spec.groups
                        .entry(g.to_string())
                        .or_default()
                        .rows
                        .insert(name.to_string(), (l.no, toks));
                } else if matches!(k, "A" | "B" | "H") {
                    let (kind, args) = toks
                        .split_first()
                        .ok_or_else(|| l.err(v, "expected a group"))?;
                    let g = spec.groups.entry(k.to_string()).or_default();
                    if g.kind.is_some() {
                        return Err(l.err(k, format!("{k} declared twice")));
                    }
                    g.kind = Some((l.no, kind.clone(), args.to_vec()));
                } else {
                    return Err(l.err(k, format!("unknown amalgam key `{k}`")));
                }
            }
            Section::Players => {
                let rest = l
                    .text
                    .strip_prefix("player")
                    .filter(|r| r.starts_with(char::is_whitespace))
                    .ok_or_else(|| l.err(l.text, "expected `player …`"))?;
                players_raw.push((l.no, rest.trim().to_string()));
                player_lines.push(l);
            }
            Section::Task => {
                if let Some(rest) = l
                    .text
                    .strip_prefix("normal")
                    .filter(|r| r.starts_with(char::is_whitespace))
                {
                    let (label, body) = rest
                        .split_once('=')
                        .ok_or_else(|| l.err(rest, "expected `normal LABEL = …`"))?;
                    let (class, cosets) = body
                        .split_once('/')
                        .ok_or_else(|| l.err(body, "expected `CLASS REPS / COSET REPS`"))?;
                    task.normals.push(NormalData {
                        label: label.trim().to_string(),
                        class_reps: words_at(&l, class)?,
                        coset_reps: words_at(&l, cosets)?,
                    });
                    continue;
                }
                let (k, v) = key_value(&l)?;
                if k == "wrap" {
                    let (hs, reps) = v
                        .split_once('/')
                        .ok_or_else(|| l.err(v, "expected `H1 H2 / REPS`"))?;
                    let hs = words_at(&l, hs)?;
                    let [h1, h2] = <[Word; 2]>::try_from(hs)
                        .map_err(|_| l.err(v, "wrap needs two words h1 h2"))?;
                    task.wrap = Some(WrapSpec {
                        h1,
                        h2,
                        reps: words_at(&l, reps)?,
                    });
                } else if k == "attract" || k == "repel" {
                    task.sets.insert(k.to_string(), set(&l, v)?);
                } else if k == "op" {
                    task.op = v.to_string();
                } else if TASK_KEYS.contains(&k)
                    || k.strip_prefix("budget.")
                        .is_some_and(|b| BUDGET_KEYS.contains(&b))
                {
                    if task.params.insert(k.to_string(), v.to_string()).is_some() {
                        return Err(l.err(k, format!("duplicate key `{k}`")));
                    }
                } else {
                    return Err(l.err(k, format!("unknown task key `{k}`")));
                }
            }
        }
    }
    if !task_seen || task.op.is_empty() {
        return Err(perr(
            text.lines().count().max(1),
            1,
            "missing [task] section with `op = …`",
        ));
    }
    for (k, v) in &ov.params {
        task.params.insert(k.clone(), v.clone());
    }

    let backend = match (group_line, amalgam) {
        (Some(_), Some(_)) => return Err(Error::BackendMismatch),
        (Some(gl), None) => {
            if gens.is_empty() {
                return Err(perr(gl, 1, "[group] declares no generators"));
            }
            let mut mats = Vec::new();
            let mut names = Vec::new();
            for (no, name, m) in gens {
                mats.push(ProjMat::new(m, place).map_err(|e| perr(no, 1, e.to_string()))?);
                names.push(name);
            }
            Backend::Matrix(MarkedGroup::new(names, mats)?)
        }
        (None, Some((_, spec))) => Backend::Amalgam(build_amalgam(spec)?),
        (None, None) => return Err(perr(2, 1, "no [group] or [amalgam] section")),
    };

    let mut players = Vec::new();
    for (l, (_, raw)) in player_lines.iter().zip(&players_raw) {
        let mut parts = raw.split(';');
        let word_text = parts.next().unwrap_or("").trim();
        let decls: Vec<&str> = parts.collect();
        match &backend {
            Backend::Matrix(_) => {
                let word = word_at(l, word_text)?;
                let mut named: BTreeMap<&str, ProjSet> = BTreeMap::new();
                for d in decls {
                    let (name, s) = d
                        .split_once('=')
                        .ok_or_else(|| l.err(d, "expected `NAME = SET`"))?;
                    let name = name.trim();
                    if !matches!(name, "A+" | "R+" | "A-" | "R-") {
                        return Err(l.err(name, "set names are A+, R+, A-, R-"));
                    }
                    named.insert(name, set(l, s)?);
                }
                let (Some(a), Some(r)) = (named.get("A+").cloned(), named.get("R+").cloned())
                else {
                    return Err(l.err(l.text, "a matrix player needs A+ and R+"));
                };
                let sets = FourSets {
                    a_minus: named.get("A-").cloned().unwrap_or_else(|| r.clone()),
                    r_minus: named.get("R-").cloned().unwrap_or_else(|| a.clone()),
                    a_plus: a,
                    r_plus: r,
                };
                players.push(PlayerSpec::Matrix { word, sets });
            }
            Backend::Amalgam(am) => {
                if !decls.is_empty() {
                    return Err(Error::BackendMismatch);
                }
                let word = am
                    .parse_word(word_text)
                    .map_err(|e| l.err(word_text, e.to_string()))?;
                players.push(PlayerSpec::Tree { word });
            }
        }
    }
    Ok(Problem {
        format: FORMAT_VERSION,
        place,
        backend,
        players,
        task,
    })
}

fn build_group(
    name: &str,
    spec: &GroupSpec,
    a: Option<&FiniteGroup>,
    b: Option<&FiniteGroup>,
) -> Result<(FiniteGroup, Option<[Vec<usize>; 2]>)> {
    let Some((no, kind, args)) = &spec.kind else {
        if name == "H" {
            return Ok((FiniteGroup::cyclic(1, "e"), None));
        }
        return Err(perr(1, 1, format!("group {name} is not declared")));
    };
    let bad = |msg: String| perr(*no, 1, msg);
    let count = |s: &String| {
        s.parse::<usize>()
            .map_err(|_| bad(format!("bad order `{s}`")))
    };
    let g = match (kind.as_str(), args.as_slice()) {
        ("cyclic", [n, gen]) => {
            let n = count(n)?;
            if n == 0 {
                return Err(bad("order must be positive".into()));
            }
            FiniteGroup::cyclic(n, gen)
        }
        ("symmetric", [n]) => {
            let n = count(n)?;
            if !(1..=5).contains(&n) {
                return Err(bad("symmetric groups of degree 1 to 5 only".into()));
            }
            FiniteGroup::symmetric(n)
        }
        ("trivial", []) => FiniteGroup::cyclic(1, "e"),
        ("table", names) if !names.is_empty() => {
            let mut table = Vec::new();
            for n in names {
                let (rno, row) = spec
                    .rows
                    .get(n)
                    .ok_or_else(|| bad(format!("missing row `{name}.row {n}`")))?;
                if row.len() != names.len() {
                    return Err(perr(
                        *rno,
                        1,
                        format!(
                            "row {n} has {} entries, expected {}",
                            row.len(),
                            names.len()
                        ),
                    ));
                }
                let idx = row
                    .iter()
                    .map(|x| {
                        names
                            .iter()
                            .position(|m| m == x)
                            .ok_or_else(|| perr(*rno, 1, format!("unknown element `{x}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                table.push(idx);
            }
            FiniteGroup::from_table(names.to_vec(), table)?
        }
        ("subgroup", names) if name == "H" && !names.is_empty() => {
            let (Some(a), Some(b)) = (a, b) else {
                return Err(bad("subgroup needs A and B".into()));
            };
            let mut inj = [Vec::new(), Vec::new()];
            for (f, g) in [a, b].into_iter().enumerate() {
                for n in names {
                    inj[f].push(g.index_of(n).ok_or_else(|| {
                        bad(format!("`{n}` is not an element of {}", ["A", "B"][f]))
                    })?);
                }
            }
            let table = inj[0]
                .iter()
                .map(|&x| {
                    inj[0]
                        .iter()
                        .map(|&y| {
                            inj[0]
                                .iter()
                                .position(|&z| z == a.mul(x, y))
                                .ok_or_else(|| bad("not a subgroup of A".into()))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let h = FiniteGroup::from_table(names.to_vec(), table)?;
            return Ok((h, Some(inj)));
        }
        _ => {
            return Err(bad(format!(
                "unknown group description `{kind}` for {name}"
            )))
        }
    };
    Ok((g, None))
}

fn build_amalgam(spec: AmalgamSpec) -> Result<Amalgam> {
    let empty = GroupSpec::default();
    let (a, _) = build_group("A", spec.groups.get("A").unwrap_or(&empty), None, None)?;
    let (b, _) = build_group("B", spec.groups.get("B").unwrap_or(&empty), None, None)?;
    let (h, given) = build_group(
        "H",
        spec.groups.get("H").unwrap_or(&empty),
        Some(&a),
        Some(&b),
    )?;
    let inj = match given {
        Some(inj) => inj,
        None => {
            let mut out = [Vec::new(), Vec::new()];
            for (f, g) in [(0, &a), (1, &b)] {
                let key = ["A", "B"][f];
                out[f] = match spec.inj.get(key) {
                    Some((no, names)) => names
                        .iter()
                        .map(|n| {
                            g.index_of(n).ok_or_else(|| {
                                perr(*no, 1, format!("`{n}` is not an element of {key}"))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?,
                    None if h.order() == 1 => vec![g.identity()],
                    None => return Err(perr(1, 1, format!("missing `inj {key} = …`"))),
                };
            }
            out
        }
    };
    let [ia, ib] = inj;
    Amalgam::new(a, b, h, ia, ib)
}

/// The base vertex named by `A` or `B`.
pub fn parse_factor(s: &str) -> Result<Factor> {
    match s {
        "A" => Ok(Factor::A),
        "B" => Ok(Factor::B),
        _ => Err(Error::Invalid(format!("expected A or B, got `{s}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SANOV: &str = "format 1\nplace arch\n[group]\na = [[1, 2], [0, 1]]\nb = [[1, 0], [2, 1]]\n[task]\nop = pingpong\n";

    #[test]
    fn parses_matrix_problem() {
        let p = parse_problem(SANOV, &Overrides::default()).unwrap();
        let Backend::Matrix(g) = &p.backend else {
            panic!()
        };
        assert_eq!(g.rank(), 2);
        assert_eq!(p.task.op, "pingpong");
        let ov = Overrides {
            place: Some(Place::PAdic(5)),
            ..Overrides::default()
        };
        assert_eq!(parse_problem(SANOV, &ov).unwrap().place, Place::PAdic(5));
    }

    #[test]
    fn positioned_errors() {
        let bad = SANOV.replace("[0, 1]]\nb", "[0, 1/0]]\nb");
        match parse_problem(&bad, &Overrides::default()) {
            Err(Error::Parse { line, col, .. }) => assert_eq!((line, col), (4, 18)),
            other => panic!("{other:?}"),
        }
        let bad = SANOV.replace("b =", "c =");
        assert!(matches!(
            parse_problem(&bad, &Overrides::default()),
            Err(Error::Parse {
                line: 5,
                col: 1,
                ..
            })
        ));
        assert!(parse_problem("format 2\nplace arch\n", &Overrides::default()).is_err());
    }

    #[test]
    fn parses_amalgam_and_players() {
        let text = "format 1\nplace arch\n[amalgam]\nA = cyclic 2 s\nB = cyclic 3 t\n[players]\nplayer s t s t2\nplayer s t2 s t\n[task]\nop = pingpong\n";
        let p = parse_problem(text, &Overrides::default()).unwrap();
        assert_eq!(p.players.len(), 2);
        let mixed = text.replace("player s t2 s t", "player s t ; A+ = ball [1, 0] 1/4");
        assert_eq!(
            parse_problem(&mixed, &Overrides::default()),
            Err(Error::BackendMismatch)
        );
        let both = text.replace("[players]", "[group]\na = [[1, 0], [0, 2]]\n[players]");
        assert_eq!(
            parse_problem(&both, &Overrides::default()),
            Err(Error::BackendMismatch)
        );
    }

    #[test]
    fn table_groups() {
        let text = "format 1\nplace arch\n[amalgam]\nA = symmetric 3\nB = symmetric 3\nH = table e r\nH.row e = e r\nH.row r = r e\ninj A = 1 (12)\ninj B = 1 (12)\n[task]\nop = kernel\n";
        let p = parse_problem(text, &Overrides::default()).unwrap();
        let Backend::Amalgam(am) = &p.backend else {
            panic!()
        };
        assert_eq!(am.kernel_of_action(), vec![0]);
        let bad = text.replace("H.row r = r e", "H.row r = r r");
        assert!(matches!(
            parse_problem(&bad, &Overrides::default()),
            Err(Error::BadTable(_))
        ));
    }
}
