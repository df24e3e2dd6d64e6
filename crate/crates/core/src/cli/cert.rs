//! Certificate documents written by every command and read back by `verify`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ContractionCert, ProximalCert, SingularProfile, Verdict};
use crate::error::{Error, Result};
use crate::pingpong::{OracleResult, ProjTuple};
use crate::projective::ProjMat;
use crate::synthesis::{
    CertifiedWord, ConjugateContraction, CosetPingPong, NormalElement, SynthesisReport,
    VeryProximalFound, WrapOutcome, B1B2B3,
};
use crate::tree::{Classification, TreeAut, TreeTuple, Vertex};

use super::problem::Problem;

pub const TOOL: &str = concat!("prodense ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Yes,
    No,
    Unknown,
    Certified,
    Refuted,
    NoRelationFound,
    RelationFound,
    Found,
    NotFound,
    Computed,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Yes
            | Outcome::Certified
            | Outcome::NoRelationFound
            | Outcome::Found
            | Outcome::Computed => 0,
            Outcome::No | Outcome::Refuted | Outcome::RelationFound => 3,
            Outcome::Unknown | Outcome::NotFound => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    Profile {
        element: ProjMat,
        profile: SingularProfile,
    },
    Contracting {
        element: ProjMat,
        verdict: Verdict<ContractionCert>,
    },
    Proximal {
        element: ProjMat,
        verdict: Verdict<ProximalCert>,
    },
    Power {
        element: ProjMat,
        found: Option<(u32, ProximalCert)>,
    },
    Oracle {
        elements: Vec<ProjMat>,
        oracle: OracleResult,
    },
    PingPong {
        tuple: ProjTuple,
        oracle: OracleResult,
    },
    TreePingPong {
        tuple: TreeTuple,
        oracle: OracleResult,
    },
    ConjugateContract {
        g_cert: ProximalCert,
        found: Option<ConjugateContraction>,
    },
    B1b2b3 {
        found: Option<B1B2B3>,
    },
    VeryProximal {
        g_cert: ContractionCert,
        found: Option<VeryProximalFound>,
    },
    NormalProximal {
        found: Option<NormalElement>,
    },
    CosetPingPong {
        a_n: Option<NormalElement>,
        found: Option<CosetPingPong>,
    },
    DoubleCoset {
        h1: Option<CertifiedWord>,
        h2: Option<CertifiedWord>,
        outcomes: Vec<WrapOutcome>,
    },
    TruncatedProdense {
        report: SynthesisReport,
    },
    NormalForm {
        element: TreeAut,
        text: String,
    },
    Classify {
        element: TreeAut,
        class: Classification,
    },
    Expand {
        center: Vertex,
        radius: usize,
        vertices: Vec<Vertex>,
        edges: Vec<(usize, usize)>,
    },
    Kernel {
        kernel: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub format: u32,
    pub tool: String,
    pub seed: u64,
    pub command: String,
    pub problem: Problem,
    pub verdict: Outcome,
    pub evidence: Evidence,
}

impl Certificate {
    /// Pretty JSON with keys sorted at every level.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("certificates serialize");
        let mut s = serde_json::to_string_pretty(&value).expect("values serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Certificate> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            col: e.column(),
            msg: e.to_string(),
        })
    }
}
