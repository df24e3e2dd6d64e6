//! Runs a parsed problem and packages the result as a certificate.

use std::collections::BTreeMap;

use crate::dynamics::{
    certify_contracting, certify_proximal, certify_very_proximal, power_to_proximal,
    singular_profile, Verdict,
};
use crate::error::{Error, Result};
use crate::pingpong::{
    certify_tuple, freeness_oracle, matrix_oracle, OracleResult, ProjPlayer, TupleVerdict,
};
use crate::projective::{ProjMat, ProjSet};
use crate::scalar::{parse_rat, Rat};
use crate::synthesis::{
    b1b2b3_synthesize, conjugate_contract, coset_pingpong, double_coset_wrap, normal_proximal,
    truncated_prodense, very_proximal_power, very_proximal_search, Budgets, HostRegion,
    MarkedGroup, NormalData, Radii, ReportVerdict,
};
use crate::tree::{Amalgam, Classification, TreeAut, Vertex};
use crate::words::{parse_word, Word};

use super::cert::{Certificate, Evidence, Outcome, TOOL};
use super::problem::{parse_factor, Backend, PlayerSpec, Problem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Pingpong,
    Synthesize,
    Tree,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Pingpong => "pingpong",
            Command::Synthesize => "synthesize",
            Command::Tree => "tree",
        }
    }

    pub fn from_name(s: &str) -> Option<Command> {
        [
            Command::Analyze,
            Command::Pingpong,
            Command::Synthesize,
            Command::Tree,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }

    fn ops(self) -> &'static [&'static str] {
        match self {
            Command::Analyze => &[
                "profile",
                "contracting",
                "proximal",
                "very-proximal",
                "power",
            ],
            Command::Pingpong => &["pingpong"],
            Command::Synthesize => &[
                "conjugate-contract",
                "b1b2b3",
                "very-proximal",
                "normal-proximal",
                "coset-pingpong",
                "double-coset",
                "truncated-prodense",
            ],
            Command::Tree => &["normal-form", "classify", "expand", "pingpong", "kernel"],
        }
    }
}

pub const DEFAULT_RADIUS: usize = 8;
pub const DEFAULT_MATRIX_ORACLE: usize = 6;
pub const DEFAULT_TREE_ORACLE: usize = 8;

/// Typed access to `[task]` values with defaults.
pub struct Params<'a>(pub &'a BTreeMap<String, String>);

impl Params<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn rat(&self, key: &str, default: Rat) -> Result<Rat> {
        self.raw(key).map_or(Ok(default), |s| {
            parse_rat(s).map_err(|e| Error::Invalid(format!("{key}: {e}")))
        })
    }

    pub fn num<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        self.raw(key).map_or(Ok(default), |s| {
            s.parse().map_err(|_| {
                Error::Invalid(format!("{key}: expected a non-negative integer, got `{s}`"))
            })
        })
    }

    pub fn text<'b>(&'b self, key: &str, default: &'b str) -> &'b str {
        self.raw(key).unwrap_or(default)
    }

    pub fn required(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| Error::Invalid(format!("missing task key `{key}`")))
    }

    pub fn radii(&self) -> Result<Radii> {
        Ok(Radii {
            r_sq: self.rat("r_sq", Rat::new(1.into(), 4.into()))?,
            epsilon_sq: self.rat("epsilon_sq", Rat::new(1.into(), 64.into()))?,
        })
    }

    pub fn budgets(&self) -> Result<Budgets> {
        let d = Budgets::default();
        Ok(Budgets {
            conj_len: self.num("budget.conj_len", d.conj_len)?,
            factors: self.num("budget.factors", d.factors)?,
            power: self.num("budget.power", d.power)?,
            exponent: self.num("budget.exponent", d.exponent)?,
            schedule: self.num("budget.schedule", d.schedule)?,
        })
    }

    pub fn radius(&self) -> Result<usize> {
        self.num("radius", DEFAULT_RADIUS)
    }
}

pub fn matrix_backend(p: &Problem) -> Result<&MarkedGroup> {
    match &p.backend {
        Backend::Matrix(g) => Ok(g),
        Backend::Amalgam(_) => Err(Error::BackendMismatch),
    }
}

pub fn amalgam_backend(p: &Problem) -> Result<&Amalgam> {
    match &p.backend {
        Backend::Amalgam(a) => Ok(a),
        Backend::Matrix(_) => Err(Error::BackendMismatch),
    }
}

pub fn word_param(group: &MarkedGroup, text: &str) -> Result<(Word, ProjMat)> {
    let w = parse_word(text)?;
    group.check_word(&w)?;
    let m = group.eval(&w);
    Ok((w, m))
}

pub fn matrix_players(p: &Problem, group: &MarkedGroup) -> Result<Vec<ProjPlayer>> {
    p.players
        .iter()
        .map(|pl| match pl {
            PlayerSpec::Matrix { word, sets } => {
                group.check_word(word)?;
                Ok(ProjPlayer::new(group.eval(word), sets.clone()))
            }
            PlayerSpec::Tree { .. } => Err(Error::BackendMismatch),
        })
        .collect()
}

pub fn tree_players(p: &Problem, am: &Amalgam) -> Result<Vec<TreeAut>> {
    p.players
        .iter()
        .map(|pl| match pl {
            PlayerSpec::Tree { word } => am.normal_form(word),
            PlayerSpec::Matrix { .. } => Err(Error::BackendMismatch),
        })
        .collect()
}

pub fn tree_oracle(am: &Amalgam, elements: &[TreeAut], len: usize) -> OracleResult {
    let invs: Vec<TreeAut> = elements.iter().map(|g| am.inverse(g)).collect();
    freeness_oracle(am, elements, &invs, len)
}

fn yes_no<T>(v: &Verdict<T>) -> Outcome {
    match v {
        Verdict::Yes(_) => Outcome::Yes,
        Verdict::No(_) => Outcome::No,
        Verdict::Unknown => Outcome::Unknown,
    }
}

fn found<T>(o: &Option<T>) -> Outcome {
    if o.is_some() {
        Outcome::Found
    } else {
        Outcome::NotFound
    }
}

/// Combines a ping-pong verdict with the oracle: a certified tuple with a
/// relation would be a soundness failure and is never reported as certified.
pub fn pingpong_outcome<P>(v: &TupleVerdict<P>, oracle: &OracleResult) -> Outcome {
    match (v, oracle) {
        (TupleVerdict::Certified, OracleResult::NoRelationFound) => Outcome::Certified,
        (TupleVerdict::Refuted(_), _) => Outcome::Refuted,
        _ => Outcome::Unknown,
    }
}

pub fn oracle_outcome(o: &OracleResult) -> Outcome {
    match o {
        OracleResult::NoRelationFound => Outcome::NoRelationFound,
        OracleResult::Relation(_) => Outcome::RelationFound,
    }
}

fn first_normal(p: &Problem) -> Result<&NormalData> {
    p.task.normals.first().ok_or(Error::NothingToIntersect)
}

fn task_set<'a>(p: &'a Problem, key: &str) -> Result<&'a ProjSet> {
    p.task
        .sets
        .get(key)
        .ok_or_else(|| Error::Invalid(format!("missing task set `{key}`")))
}

/// Runs `problem` under `command`.
pub fn run(command: Command, problem: Problem) -> Result<Certificate> {
    let op = problem.task.op.as_str();
    if !command.ops().contains(&op) {
        return Err(Error::Invalid(format!(
            "`{op}` is not a {} operation (expected one of: {})",
            command.name(),
            command.ops().join(", ")
        )));
    }
    let (verdict, evidence) = match command {
        Command::Analyze => analyze(&problem)?,
        Command::Pingpong => pingpong(&problem)?,
        Command::Synthesize => synthesize(&problem)?,
        Command::Tree => tree(&problem)?,
    };
    Ok(Certificate {
        format: super::problem::FORMAT_VERSION,
        tool: TOOL.into(),
        seed: 0,
        command: command.name().into(),
        problem,
        verdict,
        evidence,
    })
}

fn analyze(p: &Problem) -> Result<(Outcome, Evidence)> {
    let group = matrix_backend(p)?;
    let params = Params(&p.task.params);
    let (_, element) = word_param(group, params.text("element", "a"))?;
    let radii = params.radii()?;
    Ok(match p.task.op.as_str() {
        "profile" => {
            let profile = singular_profile(&element);
            (Outcome::Computed, Evidence::Profile { element, profile })
        }
        "contracting" => {
            let verdict = certify_contracting(&element, &radii.epsilon_sq)?;
            (yes_no(&verdict), Evidence::Contracting { element, verdict })
        }
        "proximal" => {
            let verdict = certify_proximal(&element, &radii.r_sq, &radii.epsilon_sq)?;
            (yes_no(&verdict), Evidence::Proximal { element, verdict })
        }
        "very-proximal" => {
            let verdict = certify_very_proximal(&element, &radii.r_sq, &radii.epsilon_sq)?;
            (yes_no(&verdict), Evidence::Proximal { element, verdict })
        }
        _ => {
            let max = params.num("budget.max_power", 8u32)?;
            let found = power_to_proximal(&element, &radii.r_sq, &radii.epsilon_sq, max)?;
            (self::found(&found), Evidence::Power { element, found })
        }
    })
}

fn pingpong(p: &Problem) -> Result<(Outcome, Evidence)> {
    let params = Params(&p.task.params);
    match &p.backend {
        Backend::Matrix(group) => {
            let len = params.num("oracle_len", DEFAULT_MATRIX_ORACLE)?;
            if p.players.is_empty() {
                let elements = group.gens.clone();
                let oracle = matrix_oracle(&elements, len);
                return Ok((
                    oracle_outcome(&oracle),
                    Evidence::Oracle { elements, oracle },
                ));
            }
            let tuple = certify_tuple(matrix_players(p, group)?)?;
            let elements: Vec<ProjMat> = tuple.players.iter().map(|q| q.element.clone()).collect();
            let oracle = matrix_oracle(&elements, len);
            Ok((
                pingpong_outcome(&tuple.verdict, &oracle),
                Evidence::PingPong { tuple, oracle },
            ))
        }
        Backend::Amalgam(_) => tree_pingpong(p),
    }
}

fn tree_pingpong(p: &Problem) -> Result<(Outcome, Evidence)> {
    let am = amalgam_backend(p)?;
    let params = Params(&p.task.params);
    let elements = tree_players(p, am)?;
    if elements.is_empty() {
        return Err(Error::Invalid("no players".into()));
    }
    let tuple = am.tree_pingpong(&elements, params.radius()?)?;
    let oracle = tree_oracle(
        am,
        &elements,
        params.num("oracle_len", DEFAULT_TREE_ORACLE)?,
    );
    Ok((
        pingpong_outcome(&tuple.verdict, &oracle),
        Evidence::TreePingPong { tuple, oracle },
    ))
}

fn synthesize(p: &Problem) -> Result<(Outcome, Evidence)> {
    let group = matrix_backend(p)?;
    let params = Params(&p.task.params);
    let radii = params.radii()?;
    let budgets = params.budgets()?;
    Ok(match p.task.op.as_str() {
        "conjugate-contract" => {
            let (_, g) = word_param(group, params.required("g")?)?;
            let (_, x) = word_param(group, params.required("x")?)?;
            let g_cert = certify_very_proximal(&g, &radii.r_sq, &radii.epsilon_sq)?
                .yes()
                .ok_or_else(|| Error::Hypothesis("g is not certified very proximal".into()))?;
            let target = params.rat("target_epsilon_sq", radii.epsilon_sq.clone())?;
            let found =
                conjugate_contract(&g, &g_cert, &x, params.num("budget.m_max", 16)?, &target)?;
            (
                self::found(&found),
                Evidence::ConjugateContract { g_cert, found },
            )
        }
        "b1b2b3" => {
            let (_, g) = word_param(group, params.required("g")?)?;
            let bs = params
                .required("b")?
                .split_whitespace()
                .map(|w| word_param(group, w).map(|x| x.1))
                .collect::<Result<Vec<_>>>()?;
            let [b1, b2, b3] = <[ProjMat; 3]>::try_from(bs)
                .map_err(|_| Error::Invalid("b needs three words".into()))?;
            let (a, r) = (task_set(p, "attract")?, task_set(p, "repel")?);
            let found =
                b1b2b3_synthesize(&g, a, r, [&b1, &b2, &b3], params.num("budget.k_max", 32)?)?;
            (self::found(&found), Evidence::B1b2b3 { found })
        }
        "very-proximal" => {
            let (_, g) = word_param(group, params.required("g")?)?;
            let g_eps = params.rat("g_epsilon_sq", radii.epsilon_sq.clone())?;
            let g_cert = certify_contracting(&g, &g_eps)?
                .yes()
                .ok_or_else(|| Error::Hypothesis("g is not certified contracting".into()))?;
            let found = very_proximal_search(
                &g,
                &g_cert,
                group,
                params.num("budget.word_len", 2)?,
                &radii.r_sq,
                &radii.epsilon_sq,
            )?;
            (
                self::found(&found),
                Evidence::VeryProximal { g_cert, found },
            )
        }
        "normal-proximal" => {
            let found = normal_proximal(
                group,
                first_normal(p)?,
                &HostRegion::default(),
                &radii,
                &budgets,
            )?;
            (self::found(&found), Evidence::NormalProximal { found })
        }
        "coset-pingpong" => {
            let n = first_normal(p)?;
            let a_n = normal_proximal(group, n, &HostRegion::default(), &radii, &budgets)?;
            let found = match &a_n {
                Some(a) => Some(coset_pingpong(group, n, a, &budgets)?),
                None => None,
            };
            let done = found.as_ref().is_some_and(|c| {
                c.reserve.is_some()
                    && c.outcomes
                        .iter()
                        .all(|o| matches!(o, crate::synthesis::CosetOutcome::Found(_)))
            });
            let outcome = if done {
                Outcome::Found
            } else {
                Outcome::NotFound
            };
            (outcome, Evidence::CosetPingPong { a_n, found })
        }
        "double-coset" => {
            let spec = p.task.wrap.as_ref().ok_or_else(|| {
                Error::Invalid("double-coset needs a `wrap = H1 H2 / REPS` line".into())
            })?;
            let max = params.num("budget.max_power", budgets.power)?;
            let h1 = very_proximal_power(group, &spec.h1, &radii, max)?;
            let h2 = very_proximal_power(group, &spec.h2, &radii, max)?;
            let outcomes = match (&h1, &h2) {
                (Some(a), Some(b)) => double_coset_wrap(group, a, b, &spec.reps, &budgets)?,
                _ => Vec::new(),
            };
            let done = h1.is_some()
                && h2.is_some()
                && outcomes
                    .iter()
                    .all(|o| !matches!(o, crate::synthesis::WrapOutcome::NotFound { .. }));
            let outcome = if done {
                Outcome::Found
            } else {
                Outcome::NotFound
            };
            (outcome, Evidence::DoubleCoset { h1, h2, outcomes })
        }
        _ => {
            let report = truncated_prodense(
                group,
                &p.task.normals,
                p.task.wrap.as_ref(),
                &radii,
                &budgets,
            )?;
            let outcome = match report.verdict {
                ReportVerdict::Certified => Outcome::Certified,
                ReportVerdict::Unknown => Outcome::Unknown,
            };
            (outcome, Evidence::TruncatedProdense { report })
        }
    })
}

fn tree(p: &Problem) -> Result<(Outcome, Evidence)> {
    let am = amalgam_backend(p)?;
    let params = Params(&p.task.params);
    Ok(match p.task.op.as_str() {
        "normal-form" => {
            let element = am.parse(params.required("word")?)?;
            let text = am.format(&element);
            (Outcome::Computed, Evidence::NormalForm { element, text })
        }
        "classify" => {
            let element = am.parse(params.required("word")?)?;
            let class = am.classify(&element, params.radius()?);
            let outcome = if class == Classification::Unknown {
                Outcome::Unknown
            } else {
                Outcome::Computed
            };
            (outcome, Evidence::Classify { element, class })
        }
        "expand" => {
            let center = Vertex::base(parse_factor(params.text("center", "A"))?);
            let radius = params.radius()?;
            let ball = am.expand_tree(&center, radius);
            (
                Outcome::Computed,
                Evidence::Expand {
                    center,
                    radius,
                    vertices: ball.vertices,
                    edges: ball.edges,
                },
            )
        }
        "pingpong" => tree_pingpong(p)?,
        _ => {
            let h = am.subgroup();
            let kernel = am
                .kernel_of_action()
                .into_iter()
                .map(|k| h.name(k).to_string())
                .collect();
            (Outcome::Computed, Evidence::Kernel { kernel })
        }
    })
}
