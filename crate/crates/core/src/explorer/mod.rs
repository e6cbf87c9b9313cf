//! Poset-generic commands: generation, checking, compatibility graphs,
//! antichain search, decomposition into pairwise compatible pieces and
//! finite generic runs. Everything is deterministic in the parameters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::bits::BitString;
use crate::centered::{h_split, hechler_leq, p4_leq, p4_merge, Branch, HechlerCondition, P4Condition};
use crate::exact::Rat;
use crate::gamma::{p1_check, p1_star_valid, ConvSeq, GammaElem, P1Check, P1Condition, P1StarCondition};
use crate::knaster::{mini_generic, q_leq, search_common_extension, Compatibility, Generator, QCondition};
use crate::measure::{in_cell, p3_leq, CellIndex, ClopenTree, P3Condition};
use crate::norm::{
    build_params, p2_check, qeta_check, qeta_leq, FiniteNormTree, P2Approx, P2Check, ParamMode, TreeCheck, TreeParams,
    DEFAULT_TOY_SCALE,
};
use crate::ordinal::{
    heart, homog_compatible, is_homogeneous, q_compatible, q_leq as qint_leq, qstar_check, qstar_compatible, qstar_leq,
    BitSource, IntervalCondition, OrdRange, Ordinal, QStarCheck, QStarCondition,
};
use crate::seq::{EvConstSeq, FinSeq, ScheduleConfig, SigmaFamily};

pub mod suites;

/// Antichain search is exhaustive up to this many vertices, greedy beyond.
pub const ANTICHAIN_EXHAUSTIVE_LIMIT: usize = 20;
/// Clique covers are minimum up to this many vertices, greedy beyond.
pub const COVER_EXHAUSTIVE_LIMIT: usize = 12;
/// Random draws allowed per generated condition before giving up.
pub const GEN_ATTEMPTS: usize = 256;

#[derive(Debug, Error)]
pub enum ExplorerError {
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("unknown poset kind `{0}`")]
    UnknownKind(String),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("document holds `{found}` conditions, expected `{expected}`")]
    KindMismatch { expected: Kind, found: Kind },
    #[error("malformed condition {index}: {message}")]
    BadCondition { index: usize, message: String },
    #[error("need at least {0} conditions")]
    TooFewConditions(usize),
    #[error("no condition passing the checker after {0} draws")]
    GenerationFailed(usize),
    #[error("{0}")]
    Poset(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn poset_err(e: impl fmt::Display) -> ExplorerError {
    ExplorerError::Poset(e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Knaster,
    P1,
    P1star,
    Qeta,
    P2,
    P3,
    P4,
    Hechler,
    Qint,
    Qstar,
    Homog0,
    Homog1,
}

impl Kind {
    pub const ALL: [Kind; 12] = [
        Kind::Knaster,
        Kind::P1,
        Kind::P1star,
        Kind::Qeta,
        Kind::P2,
        Kind::P3,
        Kind::P4,
        Kind::Hechler,
        Kind::Qint,
        Kind::Qstar,
        Kind::Homog0,
        Kind::Homog1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Knaster => "knaster",
            Kind::P1 => "p1",
            Kind::P1star => "p1star",
            Kind::Qeta => "qeta",
            Kind::P2 => "p2",
            Kind::P3 => "p3",
            Kind::P4 => "p4",
            Kind::Hechler => "hechler",
            Kind::Qint => "qint",
            Kind::Qstar => "qstar",
            Kind::Homog0 => "homog0",
            Kind::Homog1 => "homog1",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = ExplorerError;

    fn from_str(s: &str) -> Result<Self, ExplorerError> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ExplorerError::UnknownKind(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Toy,
}

impl FromStr for Mode {
    type Err = ExplorerError;

    fn from_str(s: &str) -> Result<Self, ExplorerError> {
        match s {
            "exact" => Ok(Mode::Exact),
            "toy" => Ok(Mode::Toy),
            _ => Err(ExplorerError::BadParams(format!(
                "mode must be exact or toy, got `{s}`"
            ))),
        }
    }
}

/// Parameters shared by every kind; each kind reads the fields it needs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    /// Seeds the σ-family schedule, the bit source and the generator.
    pub seed: u64,
    /// Working precision of `p1`, level of `p4`.
    pub precision: usize,
    /// Level of `knaster`, tree depth of `qeta`, `p2` and `p3`, length of generic runs.
    pub depth: usize,
    /// Order-type bound of `qstar`.
    pub delta: Ordinal,
    pub mode: Mode,
    /// Search bound for `knaster` compatibility.
    pub bound: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            seed: 0,
            precision: 2,
            depth: 2,
            delta: Ordinal::omega_pow(Ordinal::nat(2)),
            mode: Mode::Toy,
            bound: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosetHandle {
    pub kind: Kind,
    pub params: Params,
}

impl PosetHandle {
    pub fn new(kind: Kind, params: Params) -> Self {
        PosetHandle { kind, params }
    }
}

/// A list of conditions of one kind, plus the σ-family state for kinds that
/// depend on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub kind: Kind,
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    pub conditions: Vec<Value>,
}

impl Document {
    pub fn handle(&self) -> PosetHandle {
        PosetHandle::new(self.kind, self.params.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub index: usize,
    pub ok: bool,
    pub detail: Value,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome<C> {
    Compatible(C),
    Incompatible(String),
    Undecided(String),
}

/// The per-kind operations behind every command.
pub trait Lab {
    type Cond: Clone + Serialize + DeserializeOwned;

    fn generate(&mut self, rng: &mut ChaCha8Rng) -> Result<Self::Cond, ExplorerError>;
    fn check(&mut self, c: &Self::Cond) -> Result<(bool, Value), ExplorerError>;
    fn compat(&mut self, a: &Self::Cond, b: &Self::Cond) -> Result<Outcome<Self::Cond>, ExplorerError>;
    /// `weaker ≤ stronger`.
    fn leq(&mut self, weaker: &Self::Cond, stronger: &Self::Cond) -> Result<bool, ExplorerError>;

    /// A label shared only by conditions in one centered or linked piece.
    fn piece_key(&mut self, _c: &Self::Cond) -> Result<Option<Value>, ExplorerError> {
        Ok(None)
    }

    fn context(&self) -> Option<String> {
        None
    }
}

fn family(params: &Params, context: Option<&str>) -> Result<SigmaFamily, ExplorerError> {
    match context {
        Some(text) => SigmaFamily::from_text(text).map_err(poset_err),
        None => SigmaFamily::new(ScheduleConfig {
            seed: params.seed,
            ..ScheduleConfig::default()
        })
        .map_err(|e| ExplorerError::BadParams(e.to_string())),
    }
}

fn tree_params(params: &Params) -> Result<TreeParams, ExplorerError> {
    if params.depth == 0 {
        return Err(ExplorerError::BadParams("depth must be at least 1".into()));
    }
    let mode = match params.mode {
        Mode::Exact => ParamMode::Exact,
        Mode::Toy => ParamMode::Toy,
    };
    build_params(params.depth, mode, DEFAULT_TOY_SCALE).map_err(|e| ExplorerError::BadParams(e.to_string()))
}

/// Runs `$body` with `$lab` bound to the lab of `$handle`.
macro_rules! with_lab {
    ($handle:expr, $ctx:expr, $lab:ident => $body:expr) => {{
        let h: &PosetHandle = $handle;
        let ctx: Option<&str> = $ctx;
        match h.kind {
            Kind::Knaster => {
                #[allow(unused_mut)]
                let mut $lab = KnasterLab::new(&h.params, ctx)?;
                $body
            }
            Kind::P1 => {
                #[allow(unused_mut)]
                let mut $lab = P1Lab::new(&h.params, ctx)?;
                $body
            }
            Kind::P1star => {
                #[allow(unused_mut)]
                let mut $lab = P1StarLab;
                $body
            }
            Kind::Qeta => {
                #[allow(unused_mut)]
                let mut $lab = QetaLab::new(&h.params)?;
                $body
            }
            Kind::P2 => {
                #[allow(unused_mut)]
                let mut $lab = P2Lab(QetaLab::new(&h.params)?);
                $body
            }
            Kind::P3 => {
                #[allow(unused_mut)]
                let mut $lab = P3Lab::new(&h.params)?;
                $body
            }
            Kind::P4 => {
                #[allow(unused_mut)]
                let mut $lab = P4Lab::new(&h.params)?;
                $body
            }
            Kind::Hechler => {
                #[allow(unused_mut)]
                let mut $lab = HechlerLab;
                $body
            }
            Kind::Qint => {
                #[allow(unused_mut)]
                let mut $lab = QintLab;
                $body
            }
            Kind::Qstar => {
                #[allow(unused_mut)]
                let mut $lab = QStarLab::new(&h.params)?;
                $body
            }
            Kind::Homog0 | Kind::Homog1 => {
                let color = if h.kind == Kind::Homog0 { 0 } else { 1 };
                #[allow(unused_mut)]
                let mut $lab = HomogLab {
                    src: BitSource::new(h.params.seed),
                    color,
                };
                $body
            }
        }
    }};
}

impl PosetHandle {
    pub fn validate(&self) -> Result<(), ExplorerError> {
        with_lab!(self, None, _lab => Ok(()))
    }
}

pub struct KnasterLab {
    pub fam: SigmaFamily,
    level: usize,
    bound: usize,
}

impl KnasterLab {
    pub fn new(params: &Params, ctx: Option<&str>) -> Result<Self, ExplorerError> {
        if params.depth > 6 {
            return Err(ExplorerError::BadParams("knaster level is capped at 6".into()));
        }
        Ok(KnasterLab {
            fam: family(params, ctx)?,
            level: params.depth,
            bound: params.bound,
        })
    }
}

impl Lab for KnasterLab {
    type Cond = QCondition;

    fn generate(&mut self, rng: &mut ChaCha8Rng) -> Result<QCondition, ExplorerError> {
        let size = if self.level == 0 { 1 } else { rng.gen_range(1..=3) };
        let mut indices: Vec<u64> = (0..8).collect();
        indices.shuffle(rng);
        let mut entries = BTreeMap::new();
        let mut used = BTreeSet::new();
        for &a in &indices[..size] {
            let s = FinSeq((0..self.level).map(|_| rng.gen_range(0..3)).collect());
            if used.insert(s.clone()) {
                entries.insert(a, s);
            }
        }
        QCondition::new(self.level, entries).map_err(poset_err)
    }

    fn check(&mut self, c: &QCondition) -> Result<(bool, Value), ExplorerError> {
        Ok((true, json!({ "level": c.level(), "size": c.len() })))
    }

    fn compat(&mut self, a: &QCondition, b: &QCondition) -> Result<Outcome<QCondition>, ExplorerError> {
        Ok(
            match search_common_extension(&mut self.fam, a, b, self.bound).map_err(poset_err)? {
                Compatibility::Compatible(q) => Outcome::Compatible(q),
                Compatibility::Incompatible(why) => Outcome::Incompatible(why),
                Compatibility::Undecided => {
                    Outcome::Undecided(format!("no common extension found at search bound {}", self.bound))
                }
            },
        )
    }

    fn leq(&mut self, weaker: &QCondition, stronger: &QCondition) -> Result<bool, ExplorerError> {
        q_leq(&mut self.fam, weaker, stronger).map_err(poset_err)
    }

    fn context(&self) -> Option<String> {
        Some(self.fam.to_text())
    }
}

pub struct P1Lab {
    pub fam: SigmaFamily,
    precision: usize,
}

impl P1Lab {
    pub fn new(params: &Params, ctx: Option<&str>) -> Result<Self, ExplorerError> {
        if params.precision == 0 {
            return Err(ExplorerError::BadParams("precision must be at least 1".into()));
        }
        Ok(P1Lab {
            fam: family(params, ctx)?,
            precision: params.precision,
        })
    }
}

fn random_real(rng: &mut ChaCha8Rng) -> EvConstSeq {
    let len = rng.gen_range(0..=3);
    EvConstSeq::new(
        FinSeq((0..len).map(|_| rng.gen_range(0..3)).collect()),
        rng.gen_range(0..3),
    )
}

fn describe_p1(check: &P1Check) -> (bool, Value) {
    match check {
        P1Check::Ok(_) => (true, json!("ok")),
        P1Check::Violation { x, y, kind } => (false, json!({ "violation": kind, "x": x, "y": y })),
        P1Check::Indeterminate { x, y, reason } => (false, json!({ "indeterminate": reason, "x": x, "y": y })),
    }
}

impl Lab for P1Lab {
    type Cond = P1Condition;

    fn generate(&mut self, rng: &mut ChaCha8Rng) -> Result<P1Condition, ExplorerError> {
        for _ in 0..GEN_ATTEMPTS {
            let mut elems = BTreeSet::new();
            for _ in 0..rng.gen_range(1..=3) {
                let chain: Vec<EvConstSeq> = (0..rng.gen_range(1..=2)).map(|_| random_real(rng)).collect();
                if let Ok(x) = GammaElem::new(chain) {
                    elems.insert(x);
                }
            }
            if let P1Check::Ok(c) = p1_check(&mut self.fam, &elems, self.precision).map_err(poset_err)? {
                return Ok(c);
            }
        }
        Ok(P1Condition::empty(self.precision))
    }

    fn check(&mut self, c: &P1Condition) -> Result<(bool, Value), ExplorerError> {
        Ok(describe_p1(
            &p1_check(&mut self.fam, &c.elems, c.precision).map_err(poset_err)?,
        ))
    }

    fn compat(&mut self, a: &P1Condition, b: &P1Condition) -> Result<Outcome<P1Condition>, ExplorerError> {
        if a.precision != b.precision {
            return Ok(Outcome::Undecided(format!(
                "precisions {} and {} differ",
                a.precision, b.precision
            )));
        }
        let union = a.elems.union(&b.elems).cloned().collect();
        Ok(match p1_check(&mut self.fam, &union, a.precision).map_err(poset_err)? {
            P1Check::Ok(c) => Outcome::Compatible(c),
            P1Check::Violation { kind, .. } => Outcome::Incompatible(format!("{kind:?}")),
            P1Check::Indeterminate { reason, .. } => Outcome::Undecided(reason),
        })
    }

    fn leq(&mut self, weaker: &P1Condition, stronger: &P1Condition) -> Result<bool, ExplorerError> {
        Ok(weaker.precision == stronger.precision
            && weaker.elems.is_subset(&stronger.elems)
            && p1_check(&mut self.fam, &stronger.elems, stronger.precision)
                .map_err(poset_err)?
                .is_ok())
    }

    fn context(&self) -> Option<String> {
        Some(self.fam.to_text())
    }
}

pub struct P1StarLab;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl Lab for P1StarLab {
    type Cond = P1StarCondition;

    fn generate(&mut self, rng: &mut ChaCha8Rng) -> Result<P1StarCondition, ExplorerError> {
        for _ in 0..GEN_ATTEMPTS {
            let mut seqs = BTreeSet::new();
            for _ in 0..rng.gen_range(1..=3) {
                let limit = rat(rng.gen_range(-4..=4), rng.gen_range(1..=3));
                let mut ks: Vec<i64> = (1..=6).collect();
                ks.shuffle(rng);
                let len = rng.gen_range(1..=5);
                let mut ks = ks[..len].to_vec();
                ks.sort_unstable();
                let terms = ks.iter().map(|&k| &limit + rat(1, k)).collect();
                seqs.insert(ConvSeq::new(terms, limit).map_err(poset_err)?);
            }
            if let Ok(p) = P1StarCondition::new(seqs) {
                return Ok(p);
            }
        }
        Err(ExplorerError::GenerationFailed(GEN_ATTEMPTS))
    }

    fn check(&mut self, c: &P1StarCondition) -> Result<(bool, Value), ExplorerError> {
        Ok((p1_star_valid(c.seqs()), json!({ "sequences": c.seqs().len() })))
    }

    fn compat(&mut self, a: &P1StarCondition, b: &P1StarCondition) -> Result<Outcome<P1StarCondition>, ExplorerError> {
        Ok(match a.union(b) {
            Ok(u) => Outcome::Compatible(u),
            Err(e) => Outcome::Incompatible(e.to_string()),
        })
    }

    fn leq(&mut self, weaker: &P1StarCondition, stronger: &P1StarCondition) -> Result<bool, ExplorerError> {
        Ok(weaker.is_subset(stronger))
    }
}

pub struct QetaLab {
    pub params: TreeParams,
}

impl QetaLab {
    pub fn new(params: &Params) -> Result<Self, ExplorerError> {
        Ok(QetaLab {
            params: tree_params(params)?,
        })
    }

    fn random_tree(&self, rng: &mut ChaCha8Rng) -> Result<FiniteNormTree, ExplorerError> {
        let height = rng.gen_range(1..=self.params.depth());
        let mut removed: BTreeMap<FinSeq, BTreeSet<u64>> = BTreeMap::new();
        for level in 0..height {
            for node in self.params.nodes_at(level).map_err(poset_err)? {
                let reachable =
                    (0..level).all(|k| removed.get(&node.restrict(k)).is_none_or(|r| !r.contains(&node.0[k])));
                if !reachable || (level > 0 && rng.gen_bool(0.5)) {
                    continue;
                }
                let data = self.params.node(&node).map_err(poset_err)?;
                let f = data.f.to_u64().unwrap_or(u64::MAX);
                let by_norm = if level == 0 {
                    u64::MAX
                } else {
                    (&data.g / level as u64).to_u64().unwrap_or(u64::MAX)
                };
                let cap = (f - 1).min(by_norm).min(3);
                let size = rng.gen_range(0..=cap);
                let set: BTreeSet<u64> = (0..f.min(6))
                    .collect::<Vec<_>>()
                    .choose_multiple(rng, size as usize)
                    .copied()
                    .collect();
                if !set.is_empty() {
                    removed.insert(node, set);
                }
            }
        }
        FiniteNormTree::new(FinSeq::empty(), height, removed).map_err(poset_err)
    }
}

fn tree_verdict(check: TreeCheck) -> (bool, Value) {
    let ok = check == TreeCheck::Ok;
    (ok, serde_json::to_value(check).unwrap_or(Value::Null))
}

fn end_extension_outcome(a: &FiniteNormTree, b: &FiniteNormTree) -> Result<Outcome<FiniteNormTree>, ExplorerError> {
    if a.root() != b.root() {
        return Ok(Outcome::Incompatible("different roots".into()));
    }
    if qeta_leq(a, b).map_err(poset_err)? {
        Ok(Outcome::Compatible(b.clone()))
    } else if qeta_leq(b, a).map_err(poset_err)? {
        Ok(Outcome::Compatible(a.clone()))
    } else {
        Ok(Outcome::Incompatible("neither tree end-extends the other".into()))
    }
}

impl Lab for QetaLab {
    type Cond = FiniteNormTree;

    fn generate(&mut self, rng: &mut ChaCha8Rng) -> Result<FiniteNormTree, ExplorerError> {
        self.random_tree(rng)
    }

    fn check(&mut self, c: &FiniteNormTree) -> Result<(bool, Value), ExplorerError> {
        Ok(tree_verdict(qeta_check(&self.params, c)))
    }

    fn compat(&mut self, a: &FiniteNormTree, b: &FiniteNormTree) -> Result<Outcome<FiniteNormTree>, ExplorerError> {
        end_extension_outcome(a, b)
    }

    fn leq(&mut self, weaker: &FiniteNormTree, stronger: &FiniteNormTree) -> Result<bool, ExplorerError> {
        Ok(weaker.root() == stronger.root() && qeta_leq(weaker, stronger).map_err(poset_err)?)
    }
}

pub struct P2Lab(pub QetaLab);

fn integer(n: usize) -> Rat {
    Rat(BigRational::from_integer(BigInt::from(n)))
}

impl Lab for P2Lab {
    type Cond = P2Approx;

    fn generate(&mut self, rng: &mut ChaCha8Rng) -> Result<P2Approx, ExplorerError> {
        let tree = self.0.random_tree(rng)?;
        let schedule = (0..tree.height()).map(integer).collect();
        Ok(P2Approx {
            tree: Some(tree),
            schedule,
            tail_increment: integer(1),
        })
    }

    fn check(&mut self, c: &P2Approx) -> Result<(bool, Value), ExplorerError> {
        let check = p2_check(&self.0.params, c);
        Ok((check == P2Check::Ok, serde_json::to_value(check)?))
    }

    fn compat(&mut self, a: &P2Approx, b: &P2Approx) -> Result<Outcome<P2Approx>, ExplorerError> {
        let (Some(ta), Some(tb)) = (&a.tree, &b.tree) else {
            return Ok(Outcome::Incompatible("a condition has no root".into()));
        };
        let tree = match end_extension_outcome(ta, tb)? {
            Outcome::Compatible(t) => t,
            other => {
                return Ok(match other {
                    Outcome::Incompatible(why) => Outcome::Incompatible(why),
                    _ => Outcome::Undecided("tree comparison undecided".into()),
                })
            }
        };
        let len = a.schedule.len().max(b.schedule.len());
        let schedule = (0..len).map(|l| Rat(a.promised(l).max(b.promised(l)))).collect();
        let tail_increment = Rat(a.tail_increment.0.clone().max(b.tail_increment.0.clone()));
        let w = P2Approx {
            tree: Some(tree),
            schedule,
            tail_increment,
        };
        if p2_check(&self.0.params, &w) == P2Check::Ok {
            Ok(Outcome::Compatible(w))
        } else {
            Ok(Outcome::Undecided(
                "the combined schedule is not met by the known levels".into(),
            ))
        }
    }

    fn leq(&mut self, weaker: &P2Approx, stronger: &P2Approx) -> Result<bool, ExplorerError> {
        let (Some(tw), Some(ts)) = (&weaker.tree, &stronger.tree) else {
            return Ok(false);
        };
        let len = weaker.schedule.len().max(stronger.schedule.len());
        Ok(tw.root() == ts.root()
            && qeta_leq(tw, ts).map_err(poset_err)?
            && (0..=len).all(|l| stronger.promised(l) >= weaker.promised(l))
            && stronger.tail_increment.0 >= weaker.tail_increment.0)
    }
}

pub struct P3Lab {
    depth: usize,
}

impl P3Lab {
    pub fn new(params: &Params) -> Result<Self, ExplorerError> {
        if params.depth == 0 || params.depth > 12 {
            return Err(ExplorerError::BadParams("p3 depth must lie in 1..=12".into()));
        }
        Ok(P3Lab { depth: params.depth })
    }
}

/// The coarsest cell `U(T↾m, n, m)` containing `c`.
pub fn coarse_cell(c: &P3Condition) -> Result<CellIndex, ExplorerError> {
    let top = c.tree().depth().max(c.n() + 1);
    let tree = c.tree().refine(top).map_err(poset_err)?;
    for m in c.n() + 1..=top {
        let cell = CellIndex::new(c.n(), tree.restrict(m).map_err(poset_err)?).map_err(poset_err)?;
        if in_cell(c, &cell).map_err(poset_err)? {
            return Ok(cell);
        }
    }
    Err(ExplorerError::Poset("the condition lies in no cell".into()))
}

impl Lab for P3Lab {
    type Cond = P3Condition;

    fn generate(&mut self, rng: &mut ChaCha8Rng) -> Result<P3Condition, ExplorerError> {
        let n = rng.gen_range(0..=self.depth.min(3));
        loop {
            let leaves: Vec<BitString> = BitString::all(self.depth).filter(|_| rng.gen_bool(0.75)).collect();
            if !leaves.is_empty() {
                let tree = ClopenTree::new(self.depth, leaves).map_err(poset_err)?;
                return P3Condition::new(n, tree).map_err(poset_err);
            }
        }
    }

    fn check(&mut self, c: &P3Condition) -> Result<(bool, Value), ExplorerError> {
        Ok((
            !c.tree().is_empty(),
            json!({ "n": c.n(), "leaves": c.tree().leaf_count() }),
        ))
    }

    fn compat(&mut self, a: &P3Condition, b: &P3Condition) -> Result<Outcome<P3Condition>, ExplorerError> {
        let tree = a.tree().intersection(b.tree()).map_err(poset_err)?;
        let w = P3Condition::new(a.n().max(b.n()), tree).map_err(poset_err)?;
        if !w.tree().is_empty() && p3_leq(a, &w).map_err(poset_err)? && p3_leq(b, &w).map_err(poset_err)? {
            Ok(Outcome::Compatible(w))
        } else {
            Ok(Outcome::Incompatible(
                "the intersection loses a node below the stem level".into(),
            ))
        }
    }

    fn leq(&mut self, weaker: &P3Condition, stronger: &P3Condition) -> Result<bool, ExplorerError> {
        p3_leq(weaker, stronger).map_err(poset_err)
    }

    fn piece_key(&mut self, c: &P3Condition) -> Result<Option<Value>, ExplorerError> {
        Ok(Some(serde_json::to_value(coarse_cell(c)?)?))
    }
}

pub struct P4Lab {
    n: usize,
}

impl P4Lab {
    pub fn new(params: &Params) -> Result<Self, ExplorerError> {
        Ok(P4Lab { n: params.precision })
    }
}

fn p4_traces(c: &P4Condition, k: usize) -> BTreeSet<BitString> {
    c.branches().iter().map(|x| x.restrict(k)).collect()
}

impl Lab for P4Lab {
    type Cond = P4Condition;

    fn generate(&mut self, rng: &mut ChaCha8Rng) -> Result<P4Condition, ExplorerError> {
        for _ in 0..GEN_ATTEMPTS {
            let branches: BTreeSet<Branch> = (0..rng.gen_range(1..=4))
                .map(|_| {
                    Branch::new(BitString::new(
                        (0..rng.gen_range(0..=6)).map(|_| rng.gen_bool(0.5)).collect(),
                    ))
                })
                .collect();
            if let Ok(c) = P4Condition::new(self.n, branches) {
                return Ok(c);
            }
        }
        Err(ExplorerError::GenerationFailed(GEN_ATTEMPTS))
    }

    fn check(&mut self, c: &P4Condition) -> Result<(bool, Value), ExplorerError> {
        Ok((true, json!({ "n": c.n(), "branches": c.branches().len() })))
    }

    fn compat(&mut self, a: &P4Condition, b: &P4Condition) -> Result<Outcome<P4Condition>, ExplorerError> {
        if a.n() == b.n() && a.traces(a.n()) == b.traces(b.n()) {
            return Ok(Outcome::Compatible(
                p4_merge(&[a.clone(), b.clone()]).map_err(poset_err)?,
            ));
        }
        if !p4_traces(b, a.n()).is_subset(&a.traces(a.n())) || !p4_traces(a, b.n()).is_subset(&b.traces(b.n())) {
            return Ok(Outcome::Incompatible(
                "the union adds a trace below a stem level".into(),
            ));
        }
        let branches: BTreeSet<Branch> = a.branches().union(b.branches()).cloned().collect();
        let list: Vec<&Branch> = branches.iter().collect();
        let mut level = a.n().max(b.n());
        for (i, x) in list.iter().enumerate() {
            for y in &list[i + 1..] {
                level = level.max(h_split(x, y).map_err(poset_err)? + 1);
            }
        }
        let w = P4Condition::new(level, branches).map_err(poset_err)?;
        if p4_leq(a, &w) && p4_leq(b, &w) {
            Ok(Outcome::Compatible(w))
        } else {
            Ok(Outcome::Incompatible("no level keeps both trace sets".into()))
        }
    }

    fn leq(&mut self, weaker: &P4Condition, stronger: &P4Condition) -> Result<bool, ExplorerError> {
        Ok(p4_leq(weaker, stronger))
    }

    fn piece_key(&mut self, c: &P4Condition) -> Result<Option<Value>, ExplorerError> {
        Ok(Some(json!({ "n": c.n(), "traces": c.traces(c.n()) })))
    }
}

pub struct HechlerLab;

impl Lab for HechlerLab {
    type Cond = HechlerCondition;

    fn generate(&mut self, rng: &mut ChaCha8Rng) -> Result<HechlerCondition, ExplorerError> {
        let n = rng.gen_range(0..=3);
        let f = (0..6u64).map(|k| (k, rng.gen_range(0..4))).collect();
        Ok(HechlerCondition::new(n, f))
    }

    fn check(&mut self, c: &HechlerCondition) -> Result<(bool, Value), ExplorerError> {
        Ok((true, json!({ "n": c.n() })))
    }

    fn compat(
        &mut self,
        a: &HechlerCondition,
        b: &HechlerCondition,
    ) -> Result<Outcome<HechlerCondition>, ExplorerError> {
        let (lo, hi) = if a.n() <= b.n() { (a, b) } else { (b, a) };
        if let Some(k) = (0..lo.n() as u64).find(|&k| lo.value(k) != hi.value(k)) {
            return Ok(Outcome::Incompatible(format!("stems differ at {k}")));
        }
        if let Some(k) = (lo.n() as u64..hi.n() as u64).find(|&k| hi.value(k) < lo.value(k)) {
            return Ok(Outcome::Incompatible(format!(
                "the longer stem falls below the other function at {k}"
            )));
        }
        let keys: BTreeSet<u64> = a.support().chain(b.support()).collect();
        let f = keys.into_iter().map(|k| (k, a.value(k).max(b.value(k)))).collect();
        Ok(Outcome::Compatible(HechlerCondition::new(hi.n(), f)))
    }

    fn leq(&mut self, weaker: &HechlerCondition, stronger: &HechlerCondition) -> Result<bool, ExplorerError> {
        Ok(hechler_leq(weaker, stronger))
    }

    fn piece_key(&mut self, c: &HechlerCondition) -> Result<Option<Value>, ExplorerError> {
        let stem: Vec<u64> = (0..c.n() as u64).map(|k| c.value(k)).collect();
        Ok(Some(json!({ "n": c.n(), "stem": stem })))
    }
}

pub struct QintLab;

fn small_ordinal(rng: &mut ChaCha8Rng) -> Ordinal {
    let finite = Ordinal::nat(rng.gen_range(0..12));
    if rng.gen_bool(0.25) {
        Ordinal::omega().add(&finite)
    } else {
        finite
    }
}

impl Lab for QintLab {
    type Cond = IntervalCondition;

    fn generate(&mut self, rng: &mut ChaCha8Rng) -> Result<IntervalCondition, ExplorerError> {
        for _ in 0..GEN_ATTEMPTS {
            let pairs = (0..rng.gen_range(1..=3))
                .map(|_| {
                    let a = small_ordinal(rng);
                    let b = a.add(&Ordinal::nat(rng.gen_range(0..3)));
                    (a, b)
                })
                .collect();
            if let Ok(c) = IntervalCondition::new(pairs) {
                return Ok(c);
            }
        }
        Err(ExplorerError::GenerationFailed(GEN_ATTEMPTS))
    }

    fn check(&mut self, c: &IntervalCondition) -> Result<(bool, Value), ExplorerError> {
        Ok((true, json!({ "pairs": c.pairs().len() })))
    }

    fn compat(
        &mut self,
        a: &IntervalCondition,
        b: &IntervalCondition,
    ) -> Result<Outcome<IntervalCondition>, ExplorerError> {
        Ok(match a.union(b) {
            Ok(u) => Outcome::Compatible(u),
            Err(e) => Outcome::Incompatible(e.to_string()),
        })
    }

    fn leq(&mut self, weaker: &IntervalCondition, stronger: &IntervalCondition) -> Result<bool, ExplorerError> {
        Ok(qint_leq(weaker, stronger) && q_compatible(stronger, stronger))
    }
}

pub struct QStarLab {
    delta: Ordinal,
}

impl QStarLab {
    pub fn new(params: &Params) -> Result<Self, ExplorerError> {
        if !params.delta.is_indecomposable() {
            return Err(ExplorerError::BadParams(format!(
                "delta {} is not a power of w",
                params.delta
            )));
        }
        Ok(QStarLab {
            delta: params.delta.clone(),
        })
    }
}

impl Lab for QStarLab {
    type Cond = QStarCondition;

    fn generate(&mut self, rng: &mut ChaCha8Rng) -> Result<QStarCondition, ExplorerError> {
        for _ in 0..GEN_ATTEMPTS {
            let heart = (0..rng.gen_range(0..=2))
                .map(|_| {
                    let a = small_ordinal(rng);
                    let b = a.add(&Ordinal::nat(rng.gen_range(1..3)));
                    (a, b)
                })
                .collect();
            let mut singles = Vec::new();
            for _ in 0..rng.gen_range(0..=2) {
                let lo = small_ordinal(rng);
                let hi = if rng.gen_bool(0.3) {
                    Ordinal::omega().times(rng.gen_range(1..=2)).add(&Ordinal::omega())
                } else {
                    lo.add(&Ordinal::nat(rng.gen_range(1..4)))
                };
                if let Ok(r) = OrdRange::new(lo, hi) {
                    singles.push(r);
                }
            }
            let w = QStarCondition::new(heart, singles).map_err(poset_err)?;
            if qstar_check(&w, &self.delta).map_err(poset_err)?.is_ok() {
                return Ok(w);
            }
        }
        Ok(QStarCondition::empty())
    }

    fn check(&mut self, c: &QStarCondition) -> Result<(bool, Value), ExplorerError> {
        let check = qstar_check(c, &self.delta).map_err(poset_err)?;
        Ok((check.is_ok(), serde_json::to_value(&check)?))
    }

    fn compat(&mut self, a: &QStarCondition, b: &QStarCondition) -> Result<Outcome<QStarCondition>, ExplorerError> {
        if qstar_compatible(a, b, &self.delta).map_err(poset_err)? {
            Ok(Outcome::Compatible(a.union(b)))
        } else {
            let why = match qstar_check(&a.union(b), &self.delta).map_err(poset_err)? {
                QStarCheck::Violation(v) => serde_json::to_string(&v)?,
                QStarCheck::Ok { .. } => "rejected".into(),
            };
            Ok(Outcome::Incompatible(why))
        }
    }

    fn leq(&mut self, weaker: &QStarCondition, stronger: &QStarCondition) -> Result<bool, ExplorerError> {
        Ok(qstar_leq(weaker, stronger) && qstar_check(stronger, &self.delta).map_err(poset_err)?.is_ok())
    }

    fn piece_key(&mut self, c: &QStarCondition) -> Result<Option<Value>, ExplorerError> {
        Ok(Some(serde_json::to_value(heart(c))?))
    }
}

/// A finite set of naturals, homogeneous in one color.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HomogSet {
    pub points: BTreeSet<u64>,
}

pub struct HomogLab {
    pub src: BitSource,
    pub color: u8,
}

impl Lab for HomogLab {
    type Cond = HomogSet;

    fn generate(&mut self, rng: &mut ChaCha8Rng) -> Result<HomogSet, ExplorerError> {
        for _ in 0..GEN_ATTEMPTS {
            let points: BTreeSet<u64> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0..12)).collect();
            if is_homogeneous(&self.src, &points, self.color) {
                return Ok(HomogSet { points });
            }
        }
        Err(ExplorerError::GenerationFailed(GEN_ATTEMPTS))
    }

    fn check(&mut self, c: &HomogSet) -> Result<(bool, Value), ExplorerError> {
        Ok((
            is_homogeneous(&self.src, &c.points, self.color),
            json!({ "points": c.points.len() }),
        ))
    }

    fn compat(&mut self, a: &HomogSet, b: &HomogSet) -> Result<Outcome<HomogSet>, ExplorerError> {
        if homog_compatible(&self.src, &a.points, &b.points, self.color) {
            Ok(Outcome::Compatible(HomogSet {
                points: a.points.union(&b.points).copied().collect(),
            }))
        } else {
            Ok(Outcome::Incompatible(format!(
                "the union has an edge of color {}",
                1 - self.color
            )))
        }
    }

    fn leq(&mut self, weaker: &HomogSet, stronger: &HomogSet) -> Result<bool, ExplorerError> {
        Ok(weaker.points.is_subset(&stronger.points) && is_homogeneous(&self.src, &stronger.points, self.color))
    }
}

fn decode<C: DeserializeOwned>(values: &[Value]) -> Result<Vec<C>, ExplorerError> {
    values
        .iter()
        .enumerate()
        .map(|(index, v)| {
            serde_json::from_value(v.clone()).map_err(|e| ExplorerError::BadCondition {
                index,
                message: e.to_string(),
            })
        })
        .collect()
}

fn encode<C: Serialize>(items: &[C]) -> Result<Vec<Value>, ExplorerError> {
    items.iter().map(|c| Ok(serde_json::to_value(c)?)).collect()
}

/// `count` conditions drawn from a ChaCha stream seeded with the handle's seed.
pub fn cmd_gen(handle: &PosetHandle, count: usize) -> Result<Document, ExplorerError> {
    with_lab!(handle, None, lab => {
        let mut rng = ChaCha8Rng::seed_from_u64(handle.params.seed);
        let items = (0..count).map(|_| lab.generate(&mut rng)).collect::<Result<Vec<_>, _>>()?;
        Ok(Document { kind: handle.kind, params: handle.params.clone(), context: None, conditions: encode(&items)? })
    })
}

pub fn cmd_check(doc: &Document) -> Result<Vec<Verdict>, ExplorerError> {
    with_lab!(&doc.handle(), doc.context.as_deref(), lab => {
        let items = decode(&doc.conditions)?;
        items
            .iter()
            .enumerate()
            .map(|(index, c)| lab.check(c).map(|(ok, detail)| Verdict { index, ok, detail }))
            .collect()
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// A common extension of both endpoints.
    pub witness: Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub a: usize,
    pub b: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatGraph {
    pub kind: Kind,
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    pub vertices: Vec<Value>,
    pub edges: Vec<Edge>,
    pub incompatible: Vec<Pair>,
    pub undecided: Vec<Pair>,
}

impl CompatGraph {
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        let (a, b) = (a.min(b), a.max(b));
        self.edges.iter().any(|e| e.a == a && e.b == b)
    }

    pub fn to_dot(&self) -> String {
        let mut out = format!("graph {} {{\n", self.kind);
        for k in 0..self.vertices.len() {
            out.push_str(&format!("  v{k} [label=\"{k}\"];\n"));
        }
        for e in &self.edges {
            out.push_str(&format!("  v{} -- v{};\n", e.a, e.b));
        }
        for p in &self.undecided {
            out.push_str(&format!("  v{} -- v{} [style=dashed];\n", p.a, p.b));
        }
        out.push_str("}\n");
        out
    }
}

fn graph_with<L: Lab>(lab: &mut L, doc: &Document) -> Result<CompatGraph, ExplorerError> {
    let items: Vec<L::Cond> = decode(&doc.conditions)?;
    let (mut edges, mut incompatible, mut undecided) = (Vec::new(), Vec::new(), Vec::new());
    for a in 0..items.len() {
        for b in a + 1..items.len() {
            match lab.compat(&items[a], &items[b])? {
                Outcome::Compatible(w) => edges.push(Edge {
                    a,
                    b,
                    witness: serde_json::to_value(&w)?,
                }),
                Outcome::Incompatible(reason) => incompatible.push(Pair { a, b, reason }),
                Outcome::Undecided(reason) => undecided.push(Pair { a, b, reason }),
            }
        }
    }
    Ok(CompatGraph {
        kind: doc.kind,
        params: doc.params.clone(),
        context: lab.context(),
        vertices: doc.conditions.clone(),
        edges,
        incompatible,
        undecided,
    })
}

pub fn cmd_compat_graph(doc: &Document) -> Result<CompatGraph, ExplorerError> {
    with_lab!(&doc.handle(), doc.context.as_deref(), lab => graph_with(&mut lab, doc))
}

/// Re-checks every witness of `graph`; returns the edges whose witness fails.
pub fn replay_witnesses(graph: &CompatGraph) -> Result<Vec<(usize, usize)>, ExplorerError> {
    let handle = PosetHandle::new(graph.kind, graph.params.clone());
    with_lab!(&handle, graph.context.as_deref(), lab => {
        let items = decode(&graph.vertices)?;
        let mut bad = Vec::new();
        for e in &graph.edges {
            let w = decode(std::slice::from_ref(&e.witness))?.remove(0);
            let ok = lab.leq(&items[e.a], &w)? && lab.leq(&items[e.b], &w)? && lab.check(&w)?.0;
            if !ok {
                bad.push((e.a, e.b));
            }
        }
        Ok(bad)
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AntichainReport {
    pub size: usize,
    pub exhaustive: bool,
    pub found: Option<Vec<usize>>,
}

/// A set of `size` vertices with no edge and no undecided pair between them.
pub fn antichain(graph: &CompatGraph, size: usize) -> AntichainReport {
    let n = graph.vertices.len();
    let mut blocked = vec![vec![false; n]; n];
    for (a, b) in graph
        .edges
        .iter()
        .map(|e| (e.a, e.b))
        .chain(graph.undecided.iter().map(|p| (p.a, p.b)))
    {
        blocked[a][b] = true;
        blocked[b][a] = true;
    }
    let exhaustive = n <= ANTICHAIN_EXHAUSTIVE_LIMIT;
    let found = if exhaustive {
        let mut chosen = Vec::new();
        independent_search(&blocked, size, 0, &mut chosen).then_some(chosen)
    } else {
        let chosen = (0..n).fold(Vec::new(), |mut chosen: Vec<usize>, v| {
            if chosen.len() < size && chosen.iter().all(|&u| !blocked[u][v]) {
                chosen.push(v);
            }
            chosen
        });
        (chosen.len() == size).then_some(chosen)
    };
    AntichainReport {
        size,
        exhaustive,
        found,
    }
}

fn independent_search(blocked: &[Vec<bool>], size: usize, from: usize, chosen: &mut Vec<usize>) -> bool {
    if chosen.len() == size {
        return true;
    }
    let n = blocked.len();
    for v in from..n {
        if n - v < size - chosen.len() {
            return false;
        }
        if chosen.iter().all(|&u| !blocked[u][v]) {
            chosen.push(v);
            if independent_search(blocked, size, v + 1, chosen) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}

pub fn cmd_antichain(doc: &Document, size: usize) -> Result<AntichainReport, ExplorerError> {
    if size < 2 {
        return Err(ExplorerError::BadParams("antichain size must be at least 2".into()));
    }
    Ok(antichain(&cmd_compat_graph(doc)?, size))
}

/// Common extension of the first two conditions.
pub fn cmd_amalgamate(doc: &Document) -> Result<Document, ExplorerError> {
    if doc.conditions.len() < 2 {
        return Err(ExplorerError::TooFewConditions(2));
    }
    with_lab!(&doc.handle(), doc.context.as_deref(), lab => {
        let items = decode(&doc.conditions[..2])?;
        match lab.compat(&items[0], &items[1])? {
            Outcome::Compatible(w) => Ok(Document {
                kind: doc.kind,
                params: doc.params.clone(),
                context: lab.context(),
                conditions: encode(&[w])?,
            }),
            Outcome::Incompatible(why) => Err(ExplorerError::Poset(format!("incompatible: {why}"))),
            Outcome::Undecided(why) => Err(ExplorerError::Poset(format!("undecided: {why}"))),
        }
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<Value>,
    pub members: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `structural` when pieces come from the kind's own cells, otherwise `clique-cover`.
    pub method: String,
    pub minimum: bool,
    pub pieces: Vec<Piece>,
    /// Whether every pair inside every piece was found compatible.
    pub pairwise_compatible: bool,
}

/// Fewest classes with every pair inside a class adjacent.
pub fn clique_cover(n: usize, adjacent: &dyn Fn(usize, usize) -> bool) -> (Vec<Vec<usize>>, bool) {
    let mut best: Vec<Vec<usize>> = Vec::new();
    for v in 0..n {
        match best.iter_mut().find(|c| c.iter().all(|&u| adjacent(u, v))) {
            Some(c) => c.push(v),
            None => best.push(vec![v]),
        }
    }
    if n > COVER_EXHAUSTIVE_LIMIT {
        return (best, false);
    }
    fn go(
        v: usize,
        n: usize,
        adjacent: &dyn Fn(usize, usize) -> bool,
        cur: &mut Vec<Vec<usize>>,
        best: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() >= best.len() {
            return;
        }
        if v == n {
            *best = cur.clone();
            return;
        }
        for k in 0..cur.len() {
            if cur[k].iter().all(|&u| adjacent(u, v)) {
                cur[k].push(v);
                go(v + 1, n, adjacent, cur, best);
                cur[k].pop();
            }
        }
        cur.push(vec![v]);
        go(v + 1, n, adjacent, cur, best);
        cur.pop();
    }
    let mut cur = Vec::new();
    go(0, n, adjacent, &mut cur, &mut best);
    (best, true)
}

fn decompose_with<L: Lab>(lab: &mut L, doc: &Document) -> Result<Decomposition, ExplorerError> {
    let items: Vec<L::Cond> = decode(&doc.conditions)?;
    let graph = graph_with(lab, doc)?;
    let keys = items.iter().map(|c| lab.piece_key(c)).collect::<Result<Vec<_>, _>>()?;
    let (method, minimum, pieces) = if keys.iter().all(Option::is_some) && !keys.is_empty() {
        let mut groups: BTreeMap<String, Piece> = BTreeMap::new();
        for (k, key) in keys.into_iter().enumerate() {
            let key = key.expect("all keys present");
            groups
                .entry(key.to_string())
                .or_insert_with(|| Piece {
                    key: Some(key),
                    members: Vec::new(),
                })
                .members
                .push(k);
        }
        let mut pieces: Vec<Piece> = groups.into_values().collect();
        pieces.sort_by_key(|p| p.members[0]);
        ("structural", false, pieces)
    } else {
        let (cover, minimum) = clique_cover(items.len(), &|a, b| graph.adjacent(a, b));
        (
            "clique-cover",
            minimum,
            cover.into_iter().map(|members| Piece { key: None, members }).collect(),
        )
    };
    let pairwise_compatible = pieces.iter().all(|p| {
        p.members
            .iter()
            .enumerate()
            .all(|(i, &a)| p.members[i + 1..].iter().all(|&b| graph.adjacent(a, b)))
    });
    Ok(Decomposition {
        method: method.into(),
        minimum,
        pieces,
        pairwise_compatible,
    })
}

pub fn cmd_decompose(doc: &Document) -> Result<Decomposition, ExplorerError> {
    with_lab!(&doc.handle(), doc.context.as_deref(), lab => decompose_with(&mut lab, doc))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStep {
    pub offered: usize,
    pub accepted: bool,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterRun {
    pub kind: Kind,
    pub steps: Vec<FilterStep>,
    pub condition: Value,
}

fn filter_with<L: Lab>(lab: &mut L, doc: &Document) -> Result<FilterRun, ExplorerError> {
    let items: Vec<L::Cond> = decode(&doc.conditions)?;
    let mut current = items.first().cloned().ok_or(ExplorerError::TooFewConditions(1))?;
    let mut steps = Vec::new();
    for (offered, c) in items.iter().enumerate().skip(1) {
        let (accepted, reason) = match lab.compat(&current, c)? {
            Outcome::Compatible(w) => {
                current = w;
                (true, "extended".to_string())
            }
            Outcome::Incompatible(why) | Outcome::Undecided(why) => (false, why),
        };
        steps.push(FilterStep {
            offered,
            accepted,
            reason,
        });
    }
    Ok(FilterRun {
        kind: doc.kind,
        steps,
        condition: serde_json::to_value(&current)?,
    })
}

/// For `knaster`, a mini-generic run of `depth` rounds with generators drawn
/// from the seed; for every other kind, a greedy descent through the
/// document's conditions that keeps each offered condition compatible with
/// the current one.
pub fn cmd_generic(doc: &Document) -> Result<Value, ExplorerError> {
    if doc.kind == Kind::Knaster {
        let mut fam = family(&doc.params, doc.context.as_deref())?;
        let mut rng = ChaCha8Rng::seed_from_u64(doc.params.seed);
        let generators: Vec<Generator> = (0..doc.params.depth.max(1))
            .map(|_| match rng.gen_range(0..3) {
                0 => Generator::Extend,
                1 => Generator::Fresh {
                    index: rng.gen_range(0..8),
                },
                _ => {
                    let alpha = rng.gen_range(0..7);
                    Generator::LinkFresh {
                        alpha,
                        beta: rng.gen_range(alpha + 1..8),
                    }
                }
            })
            .collect();
        let start = match doc.conditions.first() {
            Some(v) => decode::<QCondition>(std::slice::from_ref(v))?.remove(0),
            None => QCondition::empty(0),
        };
        let run = mini_generic(&mut fam, &start, &generators, doc.params.depth).map_err(poset_err)?;
        return Ok(serde_json::to_value(run)?);
    }
    with_lab!(&doc.handle(), doc.context.as_deref(), lab => Ok(serde_json::to_value(filter_with(&mut lab, doc)?)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(kind: Kind, count: usize, seed: u64) -> Document {
        cmd_gen(
            &PosetHandle::new(
                kind,
                Params {
                    seed,
                    ..Params::default()
                },
            ),
            count,
        )
        .unwrap()
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        for kind in Kind::ALL {
            let d = doc(kind, 6, 7);
            assert_eq!(d, doc(kind, 6, 7), "{kind}");
            assert_eq!(d.conditions.len(), 6);
            assert!(cmd_check(&d).unwrap().iter().all(|v| v.ok), "{kind}");
            assert!(doc(kind, 0, 7).conditions.is_empty());
        }
    }

    #[test]
    fn graphs_replay() {
        for kind in Kind::ALL {
            let g = cmd_compat_graph(&doc(kind, 6, 3)).unwrap();
            assert!(replay_witnesses(&g).unwrap().is_empty(), "{kind}");
            for e in &g.edges {
                assert!(!g.undecided.iter().any(|p| p.a == e.a && p.b == e.b));
            }
            let d = cmd_decompose(&doc(kind, 6, 3)).unwrap();
            assert!(d.pairwise_compatible, "{kind}");
        }
    }

    #[test]
    fn single_vertex_and_knaster_bound_zero() {
        let g = cmd_compat_graph(&doc(Kind::P4, 1, 1)).unwrap();
        assert!(g.edges.is_empty());
        let a = QCondition::new(1, [(0, FinSeq(vec![0])), (2, FinSeq(vec![1]))].into()).unwrap();
        let b = QCondition::new(1, [(2, FinSeq(vec![1])), (3, FinSeq(vec![2]))].into()).unwrap();
        let d = Document {
            kind: Kind::Knaster,
            params: Params {
                bound: 0,
                depth: 1,
                ..Params::default()
            },
            context: None,
            conditions: encode(&[a, b]).unwrap(),
        };
        let g = cmd_compat_graph(&d).unwrap();
        assert_eq!(g.undecided.len(), 1);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn p4_same_cell_pair_merges() {
        let c = |n, bs: &[&str]| P4Condition::new(n, bs.iter().map(|s| s.parse().unwrap()).collect()).unwrap();
        let a = c(2, &["1", "01"]);
        let b = c(2, &["101", "01"]);
        let d = Document {
            kind: Kind::P4,
            params: Params::default(),
            context: None,
            conditions: encode(&[a.clone(), b.clone()]).unwrap(),
        };
        let g = cmd_compat_graph(&d).unwrap();
        let merged = p4_merge(&[a, b]).unwrap();
        assert_eq!(g.edges[0].witness, serde_json::to_value(merged).unwrap());
    }

    #[test]
    fn antichains() {
        let mut g = cmd_compat_graph(&doc(Kind::Homog0, 4, 1)).unwrap();
        g.edges.clear();
        g.undecided.clear();
        assert_eq!(antichain(&g, 3).found, Some(vec![0, 1, 2]));
        g.edges = (0..4)
            .flat_map(|a| {
                (a + 1..4).map(move |b| Edge {
                    a,
                    b,
                    witness: Value::Null,
                })
            })
            .collect();
        assert_eq!(antichain(&g, 2).found, None);
    }

    #[test]
    fn clique_cover_is_minimum() {
        // A 5-cycle needs three classes.
        let adj = |a: usize, b: usize| (a + 1) % 5 == b || (b + 1) % 5 == a;
        let (cover, minimum) = clique_cover(5, &adj);
        assert!(minimum);
        assert_eq!(cover.len(), 3);
    }

    #[test]
    fn bad_params() {
        let h = PosetHandle::new(
            Kind::Qstar,
            Params {
                delta: Ordinal::nat(3),
                ..Params::default()
            },
        );
        assert!(matches!(h.validate(), Err(ExplorerError::BadParams(_))));
        let h = PosetHandle::new(
            Kind::Qeta,
            Params {
                mode: Mode::Exact,
                depth: 2,
                ..Params::default()
            },
        );
        assert!(matches!(h.validate(), Err(ExplorerError::BadParams(_))));
        assert!("nope".parse::<Kind>().is_err());
    }
}
