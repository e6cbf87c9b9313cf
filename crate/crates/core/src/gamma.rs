//! Chain-coded conditions: the poset of finite sets of chains whose last
//! reals avoid each other's `F`-images, the singleton family that fails the
//! Knaster property, the wrapper that codes the generic filter by a set of
//! finite sequences, and the poset of finite sets of convergent sequences
//! together with its translation automorphisms.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seq::{EvConstSeq, FinSeq, Membership, SeqError, SigmaFamily};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GammaError {
    #[error("a chain must be nonempty and free of repetitions")]
    BadChain,
    #[error("precision must be at least 1")]
    ZeroPrecision,
    #[error("conditions have precisions {0} and {1}")]
    PrecisionMismatch(usize, usize),
    #[error("real at position {0} repeats an earlier one")]
    DuplicateReal(usize),
    #[error("a convergent sequence contains its own limit or repeats a term")]
    BadSequence,
    #[error("the limit of one sequence is a term of another")]
    LimitCollision,
    #[error("{0}")]
    Invalid(String),
}

/// A finite chain of reals; the last entry plays the role of the coded real.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGammaElem", into = "RawGammaElem")]
pub struct GammaElem {
    chain: Vec<EvConstSeq>,
}

#[derive(Serialize, Deserialize)]
struct RawGammaElem {
    chain: Vec<EvConstSeq>,
}

impl TryFrom<RawGammaElem> for GammaElem {
    type Error = GammaError;

    fn try_from(raw: RawGammaElem) -> Result<Self, GammaError> {
        GammaElem::new(raw.chain)
    }
}

impl From<GammaElem> for RawGammaElem {
    fn from(x: GammaElem) -> Self {
        RawGammaElem { chain: x.chain }
    }
}

impl GammaElem {
    pub fn new(chain: Vec<EvConstSeq>) -> Result<Self, GammaError> {
        let distinct: BTreeSet<&EvConstSeq> = chain.iter().collect();
        if chain.is_empty() || distinct.len() != chain.len() {
            return Err(GammaError::BadChain);
        }
        Ok(GammaElem { chain })
    }

    pub fn chain(&self) -> &[EvConstSeq] {
        &self.chain
    }

    pub fn last(&self) -> &EvConstSeq {
        self.chain.last().expect("chains are nonempty")
    }
}

/// `x <_Γ y`: the chain of `x` is a proper initial segment of the chain of `y`.
pub fn gamma_lt(x: &GammaElem, y: &GammaElem) -> bool {
    x.chain.len() < y.chain.len() && y.chain[..x.chain.len()] == x.chain[..]
}

pub fn gamma_equiv(x: &GammaElem, y: &GammaElem) -> bool {
    x.chain == y.chain
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct P1Condition {
    pub elems: BTreeSet<GammaElem>,
    pub precision: usize,
}

impl P1Condition {
    pub fn empty(precision: usize) -> Self {
        P1Condition {
            elems: BTreeSet::new(),
            precision,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum ViolationKind {
    /// Two coded reals agree up to the working precision.
    PrefixCollision,
    /// The smaller coded real is `f_i` of the larger.
    FMember(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum P1Check {
    Ok(P1Condition),
    Violation {
        x: GammaElem,
        y: GammaElem,
        kind: ViolationKind,
    },
    Indeterminate {
        x: GammaElem,
        y: GammaElem,
        reason: String,
    },
}

impl P1Check {
    pub fn is_ok(&self) -> bool {
        matches!(self, P1Check::Ok(_))
    }
}

/// Certifies the two condition invariants, reporting the first failing pair.
pub fn p1_check(fam: &mut SigmaFamily, elems: &BTreeSet<GammaElem>, precision: usize) -> Result<P1Check, GammaError> {
    if precision == 0 {
        return Err(GammaError::ZeroPrecision);
    }
    let items: Vec<&GammaElem> = elems.iter().collect();
    for (k, x) in items.iter().enumerate() {
        for y in &items[k + 1..] {
            if x.last().restrict(precision) == y.last().restrict(precision) {
                return Ok(P1Check::Violation {
                    x: (*x).clone(),
                    y: (*y).clone(),
                    kind: ViolationKind::PrefixCollision,
                });
            }
        }
    }
    for x in &items {
        for y in &items {
            if !gamma_lt(x, y) {
                continue;
            }
            match fam.f_membership(x.last(), y.last(), precision) {
                Ok(Membership::No) => {}
                Ok(Membership::Yes(i)) => {
                    return Ok(P1Check::Violation {
                        x: (*x).clone(),
                        y: (*y).clone(),
                        kind: ViolationKind::FMember(i),
                    })
                }
                Ok(Membership::Unknown) => {
                    return Ok(P1Check::Indeterminate {
                        x: (*x).clone(),
                        y: (*y).clone(),
                        reason: "membership undecided".into(),
                    })
                }
                Err(e @ SeqError::BoundExceeded { .. }) => {
                    return Ok(P1Check::Indeterminate {
                        x: (*x).clone(),
                        y: (*y).clone(),
                        reason: e.to_string(),
                    })
                }
                Err(e) => return Err(GammaError::Invalid(e.to_string())),
            }
        }
    }
    Ok(P1Check::Ok(P1Condition {
        elems: elems.clone(),
        precision,
    }))
}

pub fn p1_compatible(fam: &mut SigmaFamily, p: &P1Condition, q: &P1Condition) -> Result<bool, GammaError> {
    if p.precision != q.precision {
        return Err(GammaError::PrecisionMismatch(p.precision, q.precision));
    }
    let union: BTreeSet<GammaElem> = p.elems.union(&q.elems).cloned().collect();
    Ok(p1_check(fam, &union, p.precision)?.is_ok())
}

/// Least `m ≥ 1` at which the given reals have pairwise distinct prefixes.
pub fn separating_precision(xs: &[EvConstSeq]) -> usize {
    let mut m = 1;
    for (k, x) in xs.iter().enumerate() {
        for y in &xs[k + 1..] {
            if let Some(d) = x.first_difference(y) {
                m = m.max(d + 1);
            }
        }
    }
    m
}

/// Singletons `p_α = {y_α}` with chain `⟨x_0, …, x_α⟩`, all at the least
/// precision separating the reals.
pub fn knaster_witness_family(xs: &[EvConstSeq]) -> Result<Vec<P1Condition>, GammaError> {
    for (k, x) in xs.iter().enumerate() {
        if xs[..k].contains(x) {
            return Err(GammaError::DuplicateReal(k));
        }
    }
    let precision = separating_precision(xs);
    (1..=xs.len())
        .map(|len| {
            let y = GammaElem::new(xs[..len].to_vec())?;
            Ok(P1Condition {
                elems: BTreeSet::from([y]),
                precision,
            })
        })
        .collect()
}

/// A condition paired with a finite set of finite sequences.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RCCondition {
    pub p: P1Condition,
    pub w: BTreeSet<FinSeq>,
}

/// `q1 ≤ q2`. Restrictions `x↾n` are taken of the coded real `π₂(x)`.
pub fn rc_leq(q1: &RCCondition, q2: &RCCondition) -> bool {
    if !q1.p.elems.is_subset(&q2.p.elems) || !q1.w.is_subset(&q2.w) {
        return false;
    }
    q2.w.difference(&q1.w)
        .all(|s| q1.p.elems.iter().all(|x| &x.last().restrict(s.len()) != s))
}

/// Members of `pool` that agree with `r` on every coded-real prefix whose
/// length occurs in `r`.
pub fn rc_decode(r: &BTreeSet<FinSeq>, pool: &[RCCondition]) -> Vec<RCCondition> {
    let lengths: BTreeSet<usize> = r.iter().map(FinSeq::len).collect();
    pool.iter()
        .filter(|c| {
            c.w.is_subset(r)
                && c.p.elems.iter().all(|x| {
                    lengths.iter().all(|&n| {
                        let s = x.last().restrict(n);
                        r.contains(&s) == c.w.contains(&s)
                    })
                })
        })
        .cloned()
        .collect()
}

/// A finite convergent sequence of rationals with its limit kept explicitly.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawConvSeq", into = "RawConvSeq")]
pub struct ConvSeq {
    terms: Vec<BigRational>,
    limit: BigRational,
}

#[derive(Serialize, Deserialize)]
struct RawConvSeq {
    #[serde(with = "crate::exact::vec")]
    terms: Vec<BigRational>,
    #[serde(with = "crate::exact")]
    limit: BigRational,
}

impl TryFrom<RawConvSeq> for ConvSeq {
    type Error = GammaError;

    fn try_from(raw: RawConvSeq) -> Result<Self, GammaError> {
        ConvSeq::new(raw.terms, raw.limit)
    }
}

impl From<ConvSeq> for RawConvSeq {
    fn from(s: ConvSeq) -> Self {
        RawConvSeq {
            terms: s.terms,
            limit: s.limit,
        }
    }
}

impl ConvSeq {
    pub fn new(terms: Vec<BigRational>, limit: BigRational) -> Result<Self, GammaError> {
        let distinct: BTreeSet<&BigRational> = terms.iter().collect();
        if distinct.len() != terms.len() || distinct.contains(&limit) {
            return Err(GammaError::BadSequence);
        }
        Ok(ConvSeq { terms, limit })
    }

    /// `limit + 1/(k+1)` for `k < len`.
    pub fn harmonic(limit: BigRational, len: usize) -> Self {
        let terms = (1..=len as i64)
            .map(|k| &limit + BigRational::new(BigInt::one(), BigInt::from(k)))
            .collect();
        ConvSeq { terms, limit }
    }

    pub fn terms(&self) -> &[BigRational] {
        &self.terms
    }

    pub fn limit(&self) -> &BigRational {
        &self.limit
    }

    pub fn contains(&self, v: &BigRational) -> bool {
        self.terms.contains(v)
    }

    pub fn shifted(&self, d: &BigRational) -> ConvSeq {
        ConvSeq {
            terms: self.terms.iter().map(|t| t + d).collect(),
            limit: &self.limit + d,
        }
    }

    fn points(&self) -> impl Iterator<Item = &BigRational> {
        self.terms.iter().chain(std::iter::once(&self.limit))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawP1Star", into = "RawP1Star")]
pub struct P1StarCondition {
    seqs: BTreeSet<ConvSeq>,
}

#[derive(Serialize, Deserialize)]
struct RawP1Star {
    seqs: BTreeSet<ConvSeq>,
}

impl TryFrom<RawP1Star> for P1StarCondition {
    type Error = GammaError;

    fn try_from(raw: RawP1Star) -> Result<Self, GammaError> {
        P1StarCondition::new(raw.seqs)
    }
}

impl From<P1StarCondition> for RawP1Star {
    fn from(p: P1StarCondition) -> Self {
        RawP1Star { seqs: p.seqs }
    }
}

impl P1StarCondition {
    pub fn new(seqs: BTreeSet<ConvSeq>) -> Result<Self, GammaError> {
        if p1_star_valid(&seqs) {
            Ok(P1StarCondition { seqs })
        } else {
            Err(GammaError::LimitCollision)
        }
    }

    pub fn empty() -> Self {
        P1StarCondition { seqs: BTreeSet::new() }
    }

    pub fn seqs(&self) -> &BTreeSet<ConvSeq> {
        &self.seqs
    }

    pub fn is_subset(&self, other: &P1StarCondition) -> bool {
        self.seqs.is_subset(&other.seqs)
    }

    pub fn union(&self, other: &P1StarCondition) -> Result<P1StarCondition, GammaError> {
        P1StarCondition::new(self.seqs.union(&other.seqs).cloned().collect())
    }
}

/// `lim s ∉ t` for all distinct `s, t`.
pub fn p1_star_valid(seqs: &BTreeSet<ConvSeq>) -> bool {
    seqs.iter()
        .all(|s| seqs.iter().all(|t| s == t || !t.contains(&s.limit)))
}

pub fn translate(p: &P1StarCondition, d: &BigRational) -> P1StarCondition {
    P1StarCondition {
        seqs: p.seqs.iter().map(|s| s.shifted(d)).collect(),
    }
}

/// The rationals in a fixed order: `0`, then `q, −q` for `q` running
/// through the Calkin–Wilf enumeration of the positive rationals.
pub fn rational_enumeration() -> impl Iterator<Item = BigRational> {
    let zero = std::iter::once(BigRational::zero());
    let positives = std::iter::successors(Some(BigRational::one()), |x| {
        let two_floor = x.floor() * BigRational::from_integer(BigInt::from(2));
        Some((two_floor - x + BigRational::one()).recip())
    });
    zero.chain(positives.flat_map(|q| [q.clone(), -q]))
}

/// The finite set `{a − b}` that `−d` has to avoid.
pub fn forbidden_differences(p1: &P1StarCondition, p2: &P1StarCondition) -> BTreeSet<BigRational> {
    let mut out = BTreeSet::new();
    for s in &p1.seqs {
        for r in &p2.seqs {
            for a in s.points() {
                for b in r.points() {
                    out.insert(a - b);
                }
            }
        }
    }
    out
}

/// The first rational `d` of [`rational_enumeration`] with `−d` outside
/// [`forbidden_differences`]; the translate of `p1` by `d` is compatible with `p2`.
pub fn find_translation(p1: &P1StarCondition, p2: &P1StarCondition) -> BigRational {
    let forbidden = forbidden_differences(p1, p2);
    rational_enumeration()
        .find(|d| !forbidden.contains(&-d))
        .expect("the forbidden set is finite")
}
