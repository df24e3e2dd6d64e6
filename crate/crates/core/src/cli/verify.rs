//! Independent re-checking of certificates. Nothing here searches: stored
//! witnesses are checked, and cheap deterministic results are recomputed.

use crate::dynamics::{
    certify_contracting, certify_proximal, certify_very_proximal, power_to_proximal,
    singular_profile, Verdict,
};
use crate::pingpong::SetName;
use crate::pingpong::{certify_tuple, matrix_oracle, verify_tuple, ProjPlayer, TupleVerdict};
use crate::projective::{closure_within, push_set, ProjMat};
use crate::synthesis::{
    coset_correct, is_product_of_conjugates, nested_in, proximal_player, verify_report,
    CertifiedWord, CosetOutcome, MarkedGroup, NormalElement, WrapOutcome,
};
use crate::tree::Classification;
use crate::words::{power, reduced_words, Word};

use super::cert::{Certificate, Evidence, Outcome, TOOL};
use super::commands::{
    amalgam_backend, matrix_backend, matrix_players, oracle_outcome, pingpong_outcome, tree_oracle,
    tree_players, word_param, Command, Params, DEFAULT_MATRIX_ORACLE, DEFAULT_TREE_ORACLE,
};
use super::problem::{parse_factor, FORMAT_VERSION};

type Check = std::result::Result<(), String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: crate::Error) -> String {
    e.to_string()
}

fn same(a: &ProjMat, b: &ProjMat) -> bool {
    a.place() == b.place() && a.dim() == b.dim() && a.equals_projectively(b)
}

fn word_is(group: &MarkedGroup, w: &Word, m: &ProjMat) -> bool {
    group.check_word(w).is_ok() && same(&group.eval(w), m)
}

fn certified_word(group: &MarkedGroup, c: &CertifiedWord) -> bool {
    word_is(group, &c.word, &c.element)
        && c.cert.very.is_some()
        && c.cert.verify(&c.element)
        && proximal_player(&c.element, &c.cert).as_ref() == Some(&c.player)
}

fn normal_element(group: &MarkedGroup, a: &NormalElement, class_reps: &[Word]) -> bool {
    word_is(group, &a.word, &a.element)
        && a.cert.very.is_some()
        && a.cert.verify(&a.element)
        && proximal_player(&a.element, &a.cert).as_ref() == Some(&a.player)
        && is_product_of_conjugates(&a.word, &a.factors, class_reps)
}

/// Checks a certificate. `Err` carries the first failed check.
pub fn verify_certificate(c: &Certificate) -> Check {
    ensure(
        c.format == FORMAT_VERSION && c.problem.format == FORMAT_VERSION,
        "unsupported format",
    )?;
    ensure(
        c.tool == TOOL,
        format!("certificate written by `{}`", c.tool),
    )?;
    ensure(c.seed == 0, "nonzero seed")?;
    let command =
        Command::from_name(&c.command).ok_or_else(|| format!("unknown command `{}`", c.command))?;
    let p = &c.problem;
    let params = Params(&p.task.params);
    ensure(
        op_of(&c.evidence).contains(&p.task.op.as_str()),
        "evidence does not match the task op",
    )?;
    let expected = match (&c.evidence, command) {
        (Evidence::Profile { element, profile }, Command::Analyze) => {
            let group = matrix_backend(p).map_err(err)?;
            let (_, m) = word_param(group, params.text("element", "a")).map_err(err)?;
            ensure(
                p.task.op == "profile" && same(&m, element),
                "element does not match the problem",
            )?;
            ensure(
                singular_profile(element) == *profile,
                "singular profile differs",
            )?;
            Outcome::Computed
        }
        (Evidence::Contracting { element, verdict }, Command::Analyze) => {
            let group = matrix_backend(p).map_err(err)?;
            let (_, m) = word_param(group, params.text("element", "a")).map_err(err)?;
            ensure(
                p.task.op == "contracting" && same(&m, element),
                "element does not match the problem",
            )?;
            let eps = params.radii().map_err(err)?.epsilon_sq;
            match verdict {
                Verdict::Yes(cert) => ensure(
                    cert.epsilon_sq == eps && cert.verify(element),
                    "contraction certificate rejected",
                )?,
                other => ensure(
                    certify_contracting(element, &eps).map_err(err)? == *other,
                    "recomputed verdict differs",
                )?,
            }
            yes_no(verdict)
        }
        (Evidence::Proximal { element, verdict }, Command::Analyze) => {
            let group = matrix_backend(p).map_err(err)?;
            let (_, m) = word_param(group, params.text("element", "a")).map_err(err)?;
            let very = p.task.op == "very-proximal";
            ensure(
                (very || p.task.op == "proximal") && same(&m, element),
                "element does not match the problem",
            )?;
            let radii = params.radii().map_err(err)?;
            match verdict {
                Verdict::Yes(cert) => ensure(
                    cert.r_sq == radii.r_sq
                        && cert.epsilon_sq == radii.epsilon_sq
                        && cert.very.is_some() == very
                        && cert.verify(element),
                    "proximality certificate rejected",
                )?,
                other => {
                    let again = if very {
                        certify_very_proximal(element, &radii.r_sq, &radii.epsilon_sq)
                    } else {
                        certify_proximal(element, &radii.r_sq, &radii.epsilon_sq)
                    };
                    ensure(again.map_err(err)? == *other, "recomputed verdict differs")?
                }
            }
            yes_no(verdict)
        }
        (Evidence::Power { element, found }, Command::Analyze) => {
            let group = matrix_backend(p).map_err(err)?;
            let (_, m) = word_param(group, params.text("element", "a")).map_err(err)?;
            ensure(
                p.task.op == "power" && same(&m, element),
                "element does not match the problem",
            )?;
            let radii = params.radii().map_err(err)?;
            let max = params.num("budget.max_power", 8u32).map_err(err)?;
            match found {
                Some((n, cert)) => {
                    let g = element.pow(*n as i64).normalized();
                    ensure(
                        *n >= 1
                            && *n <= max
                            && cert.r_sq == radii.r_sq
                            && cert.epsilon_sq == radii.epsilon_sq
                            && cert.verify(&g),
                        "power certificate rejected",
                    )?;
                    if *n > 1 {
                        let smaller =
                            power_to_proximal(element, &radii.r_sq, &radii.epsilon_sq, n - 1)
                                .map_err(err)?;
                        ensure(smaller.is_none(), "a smaller power is proximal")?;
                    }
                    Outcome::Found
                }
                None => {
                    let again = power_to_proximal(element, &radii.r_sq, &radii.epsilon_sq, max)
                        .map_err(err)?;
                    ensure(again.is_none(), "recomputation finds a proximal power")?;
                    Outcome::NotFound
                }
            }
        }
        (Evidence::Oracle { elements, oracle }, Command::Pingpong) => {
            let group = matrix_backend(p).map_err(err)?;
            ensure(
                p.players.is_empty() && *elements == group.gens,
                "oracle elements differ from the generators",
            )?;
            let len = params
                .num("oracle_len", DEFAULT_MATRIX_ORACLE)
                .map_err(err)?;
            ensure(
                matrix_oracle(elements, len) == *oracle,
                "oracle result differs",
            )?;
            oracle_outcome(oracle)
        }
        (Evidence::PingPong { tuple, oracle }, Command::Pingpong) => {
            let group = matrix_backend(p).map_err(err)?;
            let stated = matrix_players(p, group).map_err(err)?;
            ensure(stated.len() == tuple.players.len(), "player count differs")?;
            for (s, t) in stated.iter().zip(&tuple.players) {
                ensure(
                    same(&s.element, &t.element) && s.sets == t.sets,
                    "players differ from the problem",
                )?;
            }
            match &tuple.verdict {
                TupleVerdict::Certified => {
                    ensure(verify_tuple(&tuple.players), "ping-pong evidence rejected")?
                }
                other => {
                    let bare: Vec<ProjPlayer> = stated
                        .iter()
                        .map(|s| ProjPlayer::new(s.element.clone(), s.sets.clone()))
                        .collect();
                    let again = certify_tuple(bare).map_err(err)?;
                    ensure(again.verdict == *other, "recomputed verdict differs")?
                }
            }
            let elements: Vec<ProjMat> = tuple.players.iter().map(|q| q.element.clone()).collect();
            let len = params
                .num("oracle_len", DEFAULT_MATRIX_ORACLE)
                .map_err(err)?;
            ensure(
                matrix_oracle(&elements, len) == *oracle,
                "oracle result differs",
            )?;
            pingpong_outcome(&tuple.verdict, oracle)
        }
        (Evidence::TreePingPong { tuple, oracle }, Command::Pingpong | Command::Tree) => {
            let am = amalgam_backend(p).map_err(err)?;
            let elements = tree_players(p, am).map_err(err)?;
            let radius = params.radius().map_err(err)?;
            let stated: Vec<_> = tuple.players.iter().map(|q| q.element.clone()).collect();
            ensure(stated == elements, "players differ from the problem")?;
            let again = am.tree_pingpong(&elements, radius).map_err(err)?;
            ensure(again == *tuple, "recomputed tree ping-pong differs")?;
            let len = params.num("oracle_len", DEFAULT_TREE_ORACLE).map_err(err)?;
            ensure(
                tree_oracle(am, &elements, len) == *oracle,
                "oracle result differs",
            )?;
            pingpong_outcome(&tuple.verdict, oracle)
        }
        (Evidence::ConjugateContract { g_cert, found }, Command::Synthesize) => {
            let group = matrix_backend(p).map_err(err)?;
            let (_, g) = word_param(group, params.required("g").map_err(err)?).map_err(err)?;
            let (_, x) = word_param(group, params.required("x").map_err(err)?).map_err(err)?;
            let radii = params.radii().map_err(err)?;
            ensure(
                g_cert.very.is_some()
                    && g_cert.r_sq == radii.r_sq
                    && g_cert.epsilon_sq == radii.epsilon_sq
                    && g_cert.verify(&g),
                "certificate for g rejected",
            )?;
            let target = params
                .rat("target_epsilon_sq", radii.epsilon_sq.clone())
                .map_err(err)?;
            let m_max = params.num("budget.m_max", 16u32).map_err(err)?;
            match found {
                Some(f) => {
                    let gm = g.pow(f.m as i64);
                    let y = gm.mul(&x).mul(&gm.inverse());
                    ensure(
                        f.m <= m_max
                            && same(&y, &f.y)
                            && f.cert.epsilon_sq == target
                            && f.cert.verify(&f.y),
                        "conjugate contraction rejected",
                    )?;
                    Outcome::Found
                }
                None => Outcome::NotFound,
            }
        }
        (Evidence::B1b2b3 { found }, Command::Synthesize) => {
            let group = matrix_backend(p).map_err(err)?;
            let (_, g) = word_param(group, params.required("g").map_err(err)?).map_err(err)?;
            let bs = params
                .required("b")
                .map_err(err)?
                .split_whitespace()
                .map(|w| word_param(group, w).map(|x| x.1))
                .collect::<crate::Result<Vec<_>>>()
                .map_err(err)?;
            ensure(bs.len() == 3, "b needs three words")?;
            let a = p.task.sets.get("attract").ok_or("missing attract set")?;
            let r = p.task.sets.get("repel").ok_or("missing repel set")?;
            let k_max = params.num("budget.k_max", 32u32).map_err(err)?;
            match found {
                Some(f) => {
                    let place = g.place();
                    let ginv = g.inverse();
                    let k = f.k as i64;
                    let element = g
                        .mul(&bs[0])
                        .mul(&ginv.pow(1 + k))
                        .mul(&bs[1])
                        .mul(&g.pow(k + 1))
                        .mul(&bs[2])
                        .mul(&ginv);
                    let omega = push_set(&ginv.pow(k), r);
                    let derived = |b: &ProjMat| omega.as_ref().and_then(|o| push_set(&g.mul(b), o));
                    ensure(
                        derived(&bs[0]).as_ref() == Some(&f.attract)
                            && derived(&bs[2].inverse()).as_ref() == Some(&f.repel),
                        "sets differ from g b1 g^-k R and g b3^-1 g^-k R",
                    )?;
                    ensure(
                        f.k <= k_max
                            && same(&element, &f.element)
                            && closure_within(&f.attract, a, place)
                            && closure_within(&f.repel, a, place)
                            && f.evidence.verify(&f.element, &f.attract, &f.repel),
                        "b1 b2 b3 element rejected",
                    )?;
                    Outcome::Found
                }
                None => Outcome::NotFound,
            }
        }
        (Evidence::VeryProximal { g_cert, found }, Command::Synthesize) => {
            let group = matrix_backend(p).map_err(err)?;
            let (_, g) = word_param(group, params.required("g").map_err(err)?).map_err(err)?;
            let radii = params.radii().map_err(err)?;
            let g_eps = params
                .rat("g_epsilon_sq", radii.epsilon_sq.clone())
                .map_err(err)?;
            ensure(
                g_cert.epsilon_sq == g_eps && g_cert.verify(&g),
                "certificate for g rejected",
            )?;
            let word_len = params.num("budget.word_len", 2usize).map_err(err)?;
            match found {
                Some(f) => {
                    let short = |w: &Word| {
                        !w.is_empty()
                            && w.len() <= word_len
                            && reduced_words(group.rank(), w.len(), w.len()).contains(w)
                    };
                    let element = g
                        .mul(&group.eval(&f.f1))
                        .mul(&g.inverse())
                        .mul(&group.eval(&f.f2));
                    ensure(
                        short(&f.f1)
                            && short(&f.f2)
                            && same(&element, &f.element)
                            && f.cert.very.is_some()
                            && f.cert.r_sq == radii.r_sq
                            && f.cert.epsilon_sq == radii.epsilon_sq
                            && f.cert.verify(&f.element),
                        "very proximal element rejected",
                    )?;
                    Outcome::Found
                }
                None => Outcome::NotFound,
            }
        }
        (Evidence::NormalProximal { found }, Command::Synthesize) => {
            let group = matrix_backend(p).map_err(err)?;
            let n = p.task.normals.first().ok_or("no normal subgroup")?;
            if let Some(a) = found {
                ensure(
                    normal_element(group, a, &n.class_reps),
                    "element of N rejected",
                )?;
            }
            found_outcome(found.is_some())
        }
        (Evidence::CosetPingPong { a_n, found }, Command::Synthesize) => {
            let group = matrix_backend(p).map_err(err)?;
            let place = group.place();
            let n = p.task.normals.first().ok_or("no normal subgroup")?;
            let mut done = false;
            if let Some(a) = a_n {
                ensure(
                    normal_element(group, a, &n.class_reps),
                    "element of N rejected",
                )?;
                let f = found.as_ref().ok_or("coset search missing")?;
                if let Some(res) = &f.reserve {
                    let k = res.word.len() / a.word.len().max(1);
                    ensure(
                        res.word == power(&a.word, k as i64) && certified_word(group, res),
                        "reserve power rejected",
                    )?;
                }
                for o in &f.outcomes {
                    if let CosetOutcome::Found(e) = o {
                        ensure(
                            word_is(group, &e.word, &e.element)
                                && e.cert.verify(&e.element)
                                && proximal_player(&e.element, &e.cert).as_ref() == Some(&e.player)
                                && n.coset_reps.get(e.coset) == Some(&e.rep)
                                && coset_correct(e, &n.class_reps)
                                && nested_in(&e.player, &a.player, place),
                            format!(
                                "coset element for {} rejected",
                                crate::words::format_word(&e.rep)
                            ),
                        )?;
                    }
                }
                done = f.reserve.is_some()
                    && f.outcomes.len() == n.coset_reps.len()
                    && f.outcomes
                        .iter()
                        .all(|o| matches!(o, CosetOutcome::Found(_)));
            } else {
                ensure(found.is_none(), "coset search without an element of N")?;
            }
            found_outcome(done)
        }
        (Evidence::DoubleCoset { h1, h2, outcomes }, Command::Synthesize) => {
            let group = matrix_backend(p).map_err(err)?;
            let place = group.place();
            let spec = p.task.wrap.as_ref().ok_or("no wrap line")?;
            for (h, w) in [(h1, &spec.h1), (h2, &spec.h2)] {
                if let Some(h) = h {
                    let k = h.word.len() / w.len().max(1);
                    ensure(
                        h.word == power(w, k as i64) && certified_word(group, h),
                        "wrapping element rejected",
                    )?;
                }
            }
            for o in outcomes {
                if let WrapOutcome::Found(e) = o {
                    let h1 = h1.as_ref().ok_or("wrap outcome without h1")?;
                    let inside = [
                        SetName::APlus,
                        SetName::RPlus,
                        SetName::AMinus,
                        SetName::RMinus,
                    ]
                    .iter()
                    .all(|&s| closure_within(e.player.sets.get(s), &h1.player.sets.a_plus, place));
                    ensure(
                        spec.reps.contains(&e.rep)
                            && word_is(group, &e.word, &e.element)
                            && e.cert.verify(&e.element)
                            && proximal_player(&e.element, &e.cert).as_ref() == Some(&e.player)
                            && inside,
                        "wrapped element rejected",
                    )?;
                }
            }
            let done = h1.is_some()
                && h2.is_some()
                && outcomes.len() == spec.reps.len()
                && outcomes
                    .iter()
                    .all(|o| !matches!(o, WrapOutcome::NotFound { .. }));
            found_outcome(done)
        }
        (Evidence::TruncatedProdense { report }, Command::Synthesize) => {
            let group = matrix_backend(p).map_err(err)?;
            ensure(
                report.radii == params.radii().map_err(err)?
                    && report.budgets == params.budgets().map_err(err)?,
                "radii or budgets differ from the problem",
            )?;
            ensure(
                verify_report(group, &p.task.normals, report),
                "synthesis report rejected",
            )?;
            match report.verdict {
                crate::synthesis::ReportVerdict::Certified => Outcome::Certified,
                crate::synthesis::ReportVerdict::Unknown => Outcome::Unknown,
            }
        }
        (Evidence::NormalForm { element, text }, Command::Tree) => {
            let am = amalgam_backend(p).map_err(err)?;
            let again = am
                .parse(params.required("word").map_err(err)?)
                .map_err(err)?;
            ensure(
                again == *element && am.format(element) == *text,
                "normal form differs",
            )?;
            Outcome::Computed
        }
        (Evidence::Classify { element, class }, Command::Tree) => {
            let am = amalgam_backend(p).map_err(err)?;
            let again = am
                .parse(params.required("word").map_err(err)?)
                .map_err(err)?;
            ensure(again == *element, "element differs from the problem")?;
            match class {
                Classification::Elliptic { fixed } => {
                    ensure(
                        am.act(element, fixed) == *fixed,
                        "stated vertex is not fixed",
                    )?;
                    Outcome::Computed
                }
                Classification::Hyperbolic {
                    translation_length,
                    axis: (s, t),
                } => {
                    ensure(
                        *translation_length > 0
                            && am.distance(s, t) == 1
                            && am.coherent(element, s, t)
                            && am.distance(s, &am.act(element, s)) == *translation_length,
                        "stated axis edge is not coherent",
                    )?;
                    Outcome::Computed
                }
                Classification::Unknown => {
                    let radius = params.radius().map_err(err)?;
                    ensure(
                        am.classify(element, radius) == Classification::Unknown,
                        "recomputation classifies",
                    )?;
                    Outcome::Unknown
                }
            }
        }
        (
            Evidence::Expand {
                center,
                radius,
                vertices,
                edges,
            },
            Command::Tree,
        ) => {
            let am = amalgam_backend(p).map_err(err)?;
            let c =
                crate::tree::Vertex::base(parse_factor(params.text("center", "A")).map_err(err)?);
            ensure(
                c == *center && *radius == params.radius().map_err(err)?,
                "center or radius differs",
            )?;
            let ball = am.expand_tree(center, *radius);
            ensure(
                ball.vertices == *vertices && ball.edges == *edges,
                "ball differs",
            )?;
            Outcome::Computed
        }
        (Evidence::Kernel { kernel }, Command::Tree) => {
            let am = amalgam_backend(p).map_err(err)?;
            let h = am.subgroup();
            let again: Vec<String> = am
                .kernel_of_action()
                .into_iter()
                .map(|k| h.name(k).to_string())
                .collect();
            ensure(again == *kernel, "kernel differs")?;
            Outcome::Computed
        }
        _ => return Err(format!("evidence does not belong to `{}`", c.command)),
    };
    ensure(
        expected == c.verdict,
        format!(
            "stated verdict {:?}, evidence supports {:?}",
            c.verdict, expected
        ),
    )?;
    Ok(())
}

fn yes_no<T>(v: &Verdict<T>) -> Outcome {
    match v {
        Verdict::Yes(_) => Outcome::Yes,
        Verdict::No(_) => Outcome::No,
        Verdict::Unknown => Outcome::Unknown,
    }
}

fn found_outcome(done: bool) -> Outcome {
    if done {
        Outcome::Found
    } else {
        Outcome::NotFound
    }
}

fn op_of(e: &Evidence) -> &'static [&'static str] {
    match e {
        Evidence::Profile { .. } => &["profile"],
        Evidence::Contracting { .. } => &["contracting"],
        Evidence::Proximal { .. } => &["proximal", "very-proximal"],
        Evidence::Power { .. } => &["power"],
        Evidence::Oracle { .. } | Evidence::PingPong { .. } | Evidence::TreePingPong { .. } => {
            &["pingpong"]
        }
        Evidence::ConjugateContract { .. } => &["conjugate-contract"],
        Evidence::B1b2b3 { .. } => &["b1b2b3"],
        Evidence::VeryProximal { .. } => &["very-proximal"],
        Evidence::NormalProximal { .. } => &["normal-proximal"],
        Evidence::CosetPingPong { .. } => &["coset-pingpong"],
        Evidence::DoubleCoset { .. } => &["double-coset"],
        Evidence::TruncatedProdense { .. } => &["truncated-prodense"],
        Evidence::NormalForm { .. } => &["normal-form"],
        Evidence::Classify { .. } => &["classify"],
        Evidence::Expand { .. } => &["expand"],
        Evidence::Kernel { .. } => &["kernel"],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::problem::{parse_problem, Overrides};
    use crate::cli::run;

    fn kernel_cert() -> Certificate {
        let text = "format 1\nplace arch\n[amalgam]\nA = symmetric 3\nB = symmetric 3\nH = subgroup 1 (123) (132)\n[task]\nop = kernel\n";
        run(
            Command::Tree,
            parse_problem(text, &Overrides::default()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn accepts_and_rejects() {
        let c = kernel_cert();
        assert_eq!(verify_certificate(&c), Ok(()));
        let mut wrong_command = c.clone();
        wrong_command.command = "analyze".into();
        assert!(verify_certificate(&wrong_command).is_err());
        let mut wrong_op = c.clone();
        wrong_op.problem.task.op = "expand".into();
        assert!(verify_certificate(&wrong_op).is_err());
        let mut wrong_kernel = c;
        wrong_kernel.evidence = Evidence::Kernel {
            kernel: vec!["1".into()],
        };
        assert_eq!(
            verify_certificate(&wrong_kernel),
            Err("kernel differs".into())
        );
    }
}
