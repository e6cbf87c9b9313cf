//! Ordinals below ε₀ in Cantor normal form, interval conditions built from
//! separated pairs of ordinals, the variant with a countable singleton part
//! bounded in order type, and edge colorings of pairs of naturals driven by a
//! seeded bit stream.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const LCG_MUL: u64 = 6364136223846793005;
pub const LCG_INC: u64 = 1442695040888963407;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrdinalError {
    #[error("cannot subtract {a} from the smaller ordinal {b}")]
    SubtractUnderflow { a: Ordinal, b: Ordinal },
    #[error("{0} is not additively indecomposable")]
    NotIndecomposable(Ordinal),
    #[error("ranges {0} and {1} overlap")]
    OverlappingRanges(OrdRange, OrdRange),
    #[error("range [{lo}, {hi}) is empty")]
    EmptyRange { lo: Ordinal, hi: Ordinal },
    #[error("pair ({0}, {1}) is not increasing")]
    BadPair(Ordinal, Ordinal),
    #[error("pairs ({0}, {1}) and ({2}, {3}) are not separated")]
    NotSeparated(Ordinal, Ordinal, Ordinal, Ordinal),
    #[error("edge ({alpha}, {beta}) needs beta < alpha")]
    EdgeOrder { alpha: u64, beta: u64 },
    #[error("bad ordinal `{0}`")]
    Parse(String),
    #[error("terms are not in Cantor normal form")]
    NonCanonical,
}

/// `ω^e₁·c₁ + … + ω^eₖ·cₖ` with `e₁ > … > eₖ` and every `cᵢ > 0`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Ordinal {
    terms: Vec<(Ordinal, u64)>,
}

impl Ordinal {
    pub fn zero() -> Self {
        Ordinal { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Ordinal::nat(1)
    }

    pub fn nat(n: u64) -> Self {
        if n == 0 {
            Ordinal::zero()
        } else {
            Ordinal {
                terms: vec![(Ordinal::zero(), n)],
            }
        }
    }

    pub fn omega() -> Self {
        Ordinal::omega_pow(Ordinal::one())
    }

    /// `ω^e`.
    pub fn omega_pow(e: Ordinal) -> Self {
        Ordinal { terms: vec![(e, 1)] }
    }

    pub fn from_terms(terms: Vec<(Ordinal, u64)>) -> Result<Self, OrdinalError> {
        let ok = terms.iter().all(|t| t.1 > 0) && terms.windows(2).all(|w| w[0].0 > w[1].0);
        if ok {
            Ok(Ordinal { terms })
        } else {
            Err(OrdinalError::NonCanonical)
        }
    }

    pub fn terms(&self) -> &[(Ordinal, u64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_nat(&self) -> Option<u64> {
        match self.terms.as_slice() {
            [] => Some(0),
            [(e, c)] if e.is_zero() => Some(*c),
            _ => None,
        }
    }

    pub fn is_successor(&self) -> bool {
        self.terms.last().is_some_and(|t| t.0.is_zero())
    }

    pub fn succ(&self) -> Ordinal {
        self.add(&Ordinal::one())
    }

    /// Ordinal sum; lower terms of `self` are absorbed by the leading term of `other`.
    pub fn add(&self, other: &Ordinal) -> Ordinal {
        let Some((lead, c)) = other.terms.first() else {
            return self.clone();
        };
        let mut terms: Vec<(Ordinal, u64)> = self.terms.iter().take_while(|t| t.0 > *lead).cloned().collect();
        let carry = self.terms.iter().find(|t| t.0 == *lead).map_or(0, |t| t.1);
        terms.push((lead.clone(), carry + c));
        terms.extend(other.terms[1..].iter().cloned());
        Ordinal { terms }
    }

    /// The unique `γ` with `self + γ = b`.
    pub fn left_subtract(&self, b: &Ordinal) -> Result<Ordinal, OrdinalError> {
        let underflow = || OrdinalError::SubtractUnderflow {
            a: self.clone(),
            b: b.clone(),
        };
        let i = self.terms.iter().zip(&b.terms).take_while(|(x, y)| x == y).count();
        match (self.terms.get(i), b.terms.get(i)) {
            (None, _) => Ok(Ordinal {
                terms: b.terms[i..].to_vec(),
            }),
            (Some(_), None) => Err(underflow()),
            (Some((ea, ca)), Some((eb, cb))) => match ea.cmp(eb) {
                Ordering::Less => Ok(Ordinal {
                    terms: b.terms[i..].to_vec(),
                }),
                Ordering::Greater => Err(underflow()),
                Ordering::Equal if cb > ca => {
                    let mut terms = vec![(eb.clone(), cb - ca)];
                    terms.extend(b.terms[i + 1..].iter().cloned());
                    Ok(Ordinal { terms })
                }
                Ordering::Equal => Err(underflow()),
            },
        }
    }

    /// `self · n`.
    pub fn times(&self, n: u64) -> Ordinal {
        if n == 0 || self.is_zero() {
            return Ordinal::zero();
        }
        let mut terms = self.terms.clone();
        terms[0].1 *= n;
        Ordinal { terms }
    }

    /// Hessenberg sum: coefficients of equal exponents add, nothing is absorbed.
    pub fn natural_sum(&self, other: &Ordinal) -> Ordinal {
        let mut terms: Vec<(Ordinal, u64)> = Vec::new();
        let (mut a, mut b) = (self.terms.iter().peekable(), other.terms.iter().peekable());
        loop {
            let next = match (a.peek(), b.peek()) {
                (None, None) => break,
                (Some(_), None) => a.next().cloned(),
                (None, Some(_)) => b.next().cloned(),
                (Some(x), Some(y)) => match x.0.cmp(&y.0) {
                    Ordering::Greater => a.next().cloned(),
                    Ordering::Less => b.next().cloned(),
                    Ordering::Equal => {
                        let c = x.1 + y.1;
                        let e = x.0.clone();
                        a.next();
                        b.next();
                        Some((e, c))
                    }
                },
            };
            terms.extend(next);
        }
        Ordinal { terms }
    }

    /// True iff `self = ω^γ`.
    pub fn is_indecomposable(&self) -> bool {
        matches!(self.terms.as_slice(), [(_, 1)])
    }
}

impl Ord for Ordinal {
    fn cmp(&self, other: &Self) -> Ordering {
        for (x, y) in self.terms.iter().zip(&other.terms) {
            let o = x.0.cmp(&y.0).then(x.1.cmp(&y.1));
            if o != Ordering::Equal {
                return o;
            }
        }
        self.terms.len().cmp(&other.terms.len())
    }
}

impl PartialOrd for Ordinal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (k, (e, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            match e.as_nat() {
                Some(0) => write!(f, "{c}")?,
                Some(1) => f.write_str("w")?,
                _ => write!(f, "w^({e})")?,
            }
            if *c != 1 && !e.is_zero() {
                write!(f, "*{c}")?;
            }
        }
        Ok(())
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.s.get(self.pos).is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, b: u8) -> bool {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Option<u64> {
        self.skip_ws();
        let start = self.pos;
        while self.s.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos]).ok()?.parse().ok()
    }

    fn sum(&mut self) -> Option<Ordinal> {
        let mut acc = self.term()?;
        while self.eat(b'+') {
            acc = acc.add(&self.term()?);
        }
        Some(acc)
    }

    fn term(&mut self) -> Option<Ordinal> {
        if !(self.eat(b'w') || self.eat(b'\xcf') && self.eat(b'\x89')) {
            return self.number().map(Ordinal::nat);
        }
        let e = if self.eat(b'^') {
            if self.eat(b'(') {
                let e = self.sum()?;
                self.eat(b')').then_some(e)?
            } else {
                Ordinal::nat(self.number()?)
            }
        } else {
            Ordinal::one()
        };
        let c = if self.eat(b'*') { self.number()? } else { 1 };
        Some(Ordinal::omega_pow(e).times(c))
    }
}

impl FromStr for Ordinal {
    type Err = OrdinalError;

    /// Accepts `w^(E)*c + …` with `w^n` shorthand; sums are evaluated, so
    /// non-canonical input such as `1 + w` is normalised.
    fn from_str(s: &str) -> Result<Self, OrdinalError> {
        let mut p = Parser {
            s: s.as_bytes(),
            pos: 0,
        };
        let out = p.sum();
        p.skip_ws();
        match out {
            Some(o) if p.pos == s.len() => Ok(o),
            _ => Err(OrdinalError::Parse(s.to_string())),
        }
    }
}

impl Serialize for Ordinal {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ordinal {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        String::deserialize(de)?.parse().map_err(D::Error::custom)
    }
}

/// The half-open interval `[lo, hi)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawRange")]
pub struct OrdRange {
    lo: Ordinal,
    hi: Ordinal,
}

#[derive(Deserialize)]
struct RawRange {
    lo: Ordinal,
    hi: Ordinal,
}

impl TryFrom<RawRange> for OrdRange {
    type Error = OrdinalError;

    fn try_from(raw: RawRange) -> Result<Self, OrdinalError> {
        OrdRange::new(raw.lo, raw.hi)
    }
}

impl OrdRange {
    pub fn new(lo: Ordinal, hi: Ordinal) -> Result<Self, OrdinalError> {
        if lo < hi {
            Ok(OrdRange { lo, hi })
        } else {
            Err(OrdinalError::EmptyRange { lo, hi })
        }
    }

    pub fn point(a: &Ordinal) -> Self {
        OrdRange {
            lo: a.clone(),
            hi: a.succ(),
        }
    }

    pub fn lo(&self) -> &Ordinal {
        &self.lo
    }

    pub fn hi(&self) -> &Ordinal {
        &self.hi
    }

    pub fn contains(&self, a: &Ordinal) -> bool {
        self.lo <= *a && *a < self.hi
    }

    /// Order type of the range itself.
    pub fn length(&self) -> Ordinal {
        self.lo.left_subtract(&self.hi).expect("lo < hi")
    }
}

impl fmt::Display for OrdRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

/// Order type of a union of pairwise disjoint ranges.
pub fn range_order_type(ranges: &[OrdRange]) -> Result<Ordinal, OrdinalError> {
    let mut sorted: Vec<&OrdRange> = ranges.iter().collect();
    sorted.sort();
    for w in sorted.windows(2) {
        if w[0].hi > w[1].lo {
            return Err(OrdinalError::OverlappingRanges(w[0].clone(), w[1].clone()));
        }
    }
    Ok(sorted.iter().fold(Ordinal::zero(), |acc, r| acc.add(&r.length())))
}

fn separated(p: &(Ordinal, Ordinal), q: &(Ordinal, Ordinal)) -> bool {
    p.1 < q.0 || q.1 < p.0
}

fn first_unseparated(pairs: &BTreeSet<(Ordinal, Ordinal)>) -> Option<OrdinalError> {
    // Sorted by left end, separation reduces to neighbours.
    let list: Vec<&(Ordinal, Ordinal)> = pairs.iter().collect();
    list.windows(2)
        .find(|w| !separated(w[0], w[1]))
        .map(|w| OrdinalError::NotSeparated(w[0].0.clone(), w[0].1.clone(), w[1].0.clone(), w[1].1.clone()))
}

/// A finite set of pairs `α ≤ β`, any two of them disjoint as closed intervals.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval")]
pub struct IntervalCondition {
    pairs: BTreeSet<(Ordinal, Ordinal)>,
}

#[derive(Deserialize)]
struct RawInterval {
    pairs: BTreeSet<(Ordinal, Ordinal)>,
}

impl TryFrom<RawInterval> for IntervalCondition {
    type Error = OrdinalError;

    fn try_from(raw: RawInterval) -> Result<Self, OrdinalError> {
        IntervalCondition::new(raw.pairs)
    }
}

impl IntervalCondition {
    pub fn new(pairs: BTreeSet<(Ordinal, Ordinal)>) -> Result<Self, OrdinalError> {
        if let Some((a, b)) = pairs.iter().find(|(a, b)| a > b) {
            return Err(OrdinalError::BadPair(a.clone(), b.clone()));
        }
        match first_unseparated(&pairs) {
            Some(e) => Err(e),
            None => Ok(IntervalCondition { pairs }),
        }
    }

    pub fn empty() -> Self {
        IntervalCondition::default()
    }

    pub fn from_nats(pairs: &[(u64, u64)]) -> Result<Self, OrdinalError> {
        IntervalCondition::new(pairs.iter().map(|&(a, b)| (Ordinal::nat(a), Ordinal::nat(b))).collect())
    }

    pub fn pairs(&self) -> &BTreeSet<(Ordinal, Ordinal)> {
        &self.pairs
    }

    pub fn union(&self, other: &IntervalCondition) -> Result<IntervalCondition, OrdinalError> {
        IntervalCondition::new(self.pairs.union(&other.pairs).cloned().collect())
    }
}

/// `c1 ≤ c2` iff `c1 ⊆ c2`.
pub fn q_leq(c1: &IntervalCondition, c2: &IntervalCondition) -> bool {
    c1.pairs.is_subset(&c2.pairs)
}

pub fn q_compatible(c1: &IntervalCondition, c2: &IntervalCondition) -> bool {
    c1.union(c2).is_ok()
}

/// A finite heart of pairs `α < β` plus a singleton part `{(γ, γ) : γ ∈ ⋃ singles}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawQStar")]
pub struct QStarCondition {
    heart: BTreeSet<(Ordinal, Ordinal)>,
    singles: Vec<OrdRange>,
}

#[derive(Deserialize)]
struct RawQStar {
    #[serde(default)]
    heart: BTreeSet<(Ordinal, Ordinal)>,
    #[serde(default)]
    singles: Vec<OrdRange>,
}

impl TryFrom<RawQStar> for QStarCondition {
    type Error = OrdinalError;

    fn try_from(raw: RawQStar) -> Result<Self, OrdinalError> {
        QStarCondition::new(raw.heart, raw.singles)
    }
}

impl QStarCondition {
    /// Merges overlapping or adjacent singleton ranges; separation and the
    /// order-type bound are left to [`qstar_check`].
    pub fn new(heart: BTreeSet<(Ordinal, Ordinal)>, mut singles: Vec<OrdRange>) -> Result<Self, OrdinalError> {
        if let Some((a, b)) = heart.iter().find(|(a, b)| a >= b) {
            return Err(OrdinalError::BadPair(a.clone(), b.clone()));
        }
        singles.sort();
        let mut merged: Vec<OrdRange> = Vec::with_capacity(singles.len());
        for r in singles {
            match merged.last_mut() {
                Some(last) if r.lo <= last.hi => {
                    if r.hi > last.hi {
                        last.hi = r.hi;
                    }
                }
                _ => merged.push(r),
            }
        }
        Ok(QStarCondition { heart, singles: merged })
    }

    pub fn empty() -> Self {
        QStarCondition::default()
    }

    pub fn singles(&self) -> &[OrdRange] {
        &self.singles
    }

    pub fn union(&self, other: &QStarCondition) -> QStarCondition {
        let heart = self.heart.union(&other.heart).cloned().collect();
        let singles = self.singles.iter().chain(&other.singles).cloned().collect();
        QStarCondition::new(heart, singles).expect("parts already valid")
    }

    /// The ranges whose union is the set of left coordinates.
    pub fn left_ranges(&self) -> Vec<OrdRange> {
        let mut out = self.singles.clone();
        out.extend(self.heart.iter().map(|(a, _)| OrdRange::point(a)));
        out
    }
}

pub fn heart(w: &QStarCondition) -> &BTreeSet<(Ordinal, Ordinal)> {
    &w.heart
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QStarViolation {
    HeartOverlap {
        first: (Ordinal, Ordinal),
        second: (Ordinal, Ordinal),
    },
    SingleInsideHeart {
        range: OrdRange,
        pair: (Ordinal, Ordinal),
    },
    OrderType {
        order_type: Ordinal,
        bound: Ordinal,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum QStarCheck {
    Ok { order_type: Ordinal },
    Violation(QStarViolation),
}

impl QStarCheck {
    pub fn is_ok(&self) -> bool {
        matches!(self, QStarCheck::Ok { .. })
    }
}

fn separation_violation(w: &QStarCondition) -> Option<QStarViolation> {
    let list: Vec<&(Ordinal, Ordinal)> = w.heart.iter().collect();
    if let Some(p) = list.windows(2).find(|p| !separated(p[0], p[1])) {
        return Some(QStarViolation::HeartOverlap {
            first: p[0].clone(),
            second: p[1].clone(),
        });
    }
    for pair in &w.heart {
        // A singleton γ is separated from (α, β) iff γ ∉ [α, β].
        if let Some(r) = w.singles.iter().find(|r| r.lo <= pair.1 && pair.0 < r.hi) {
            return Some(QStarViolation::SingleInsideHeart {
                range: r.clone(),
                pair: pair.clone(),
            });
        }
    }
    None
}

/// Separation of all parts and order type of the left coordinates below `delta`.
pub fn qstar_check(w: &QStarCondition, delta: &Ordinal) -> Result<QStarCheck, OrdinalError> {
    if !delta.is_indecomposable() {
        return Err(OrdinalError::NotIndecomposable(delta.clone()));
    }
    if let Some(v) = separation_violation(w) {
        return Ok(QStarCheck::Violation(v));
    }
    let order_type = range_order_type(&w.left_ranges())?;
    if order_type < *delta {
        Ok(QStarCheck::Ok { order_type })
    } else {
        Ok(QStarCheck::Violation(QStarViolation::OrderType {
            order_type,
            bound: delta.clone(),
        }))
    }
}

/// Accepts a separated union when the natural sum of the two order types is
/// below `delta`; `None` means the exact merge has to decide.
pub fn qstar_fast_accept(
    w1: &QStarCondition,
    w2: &QStarCondition,
    delta: &Ordinal,
) -> Result<Option<bool>, OrdinalError> {
    let ot = |w: &QStarCondition| match qstar_check(w, delta)? {
        QStarCheck::Ok { order_type } => Ok(Some(order_type)),
        QStarCheck::Violation(_) => Ok(None),
    };
    let (Some(a), Some(b)) = (ot(w1)?, ot(w2)?) else {
        return Ok(None);
    };
    if separation_violation(&w1.union(w2)).is_some() {
        return Ok(None);
    }
    Ok((a.natural_sum(&b) < *delta).then_some(true))
}

pub fn qstar_compatible_exact(w1: &QStarCondition, w2: &QStarCondition, delta: &Ordinal) -> Result<bool, OrdinalError> {
    Ok(qstar_check(&w1.union(w2), delta)?.is_ok())
}

pub fn qstar_compatible(w1: &QStarCondition, w2: &QStarCondition, delta: &Ordinal) -> Result<bool, OrdinalError> {
    match qstar_fast_accept(w1, w2, delta)? {
        Some(v) => Ok(v),
        None => qstar_compatible_exact(w1, w2, delta),
    }
}

/// `w1 ≤ w2` iff `w1 ⊆ w2` as sets of pairs.
pub fn qstar_leq(w1: &QStarCondition, w2: &QStarCondition) -> bool {
    w1.heart.is_subset(&w2.heart)
        && w1
            .singles
            .iter()
            .all(|r| w2.singles.iter().any(|s| s.lo <= r.lo && r.hi <= s.hi))
}

/// The Cantor pairing `(a+b)(a+b+1)/2 + b`.
pub fn cantor_pair(a: u64, b: u64) -> u128 {
    let s = a as u128 + b as u128;
    s * (s + 1) / 2 + b as u128
}

/// Bits of the LCG stream `x_{k+1} = a·x_k + c mod 2^64`, `x_0 = seed`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitSource {
    pub seed: u64,
}

impl BitSource {
    pub fn new(seed: u64) -> Self {
        BitSource { seed }
    }

    /// `x_k`, by squaring the affine step.
    pub fn state(&self, mut k: u128) -> u64 {
        let (mut mul, mut inc) = (LCG_MUL, LCG_INC);
        let (mut acc_mul, mut acc_inc) = (1u64, 0u64);
        while k > 0 {
            if k & 1 == 1 {
                acc_mul = acc_mul.wrapping_mul(mul);
                acc_inc = acc_inc.wrapping_mul(mul).wrapping_add(inc);
            }
            inc = inc.wrapping_mul(mul.wrapping_add(1));
            mul = mul.wrapping_mul(mul);
            k >>= 1;
        }
        acc_mul.wrapping_mul(self.seed).wrapping_add(acc_inc)
    }

    /// Top bit of `x_{k+1}`.
    pub fn bit(&self, k: u128) -> u8 {
        (self.state(k + 1) >> 63) as u8
    }
}

/// Color of the edge `{β, α}` with `β < α`.
pub fn color_edge(src: &BitSource, alpha: u64, beta: u64) -> Result<u8, OrdinalError> {
    if beta >= alpha {
        return Err(OrdinalError::EdgeOrder { alpha, beta });
    }
    Ok(src.bit(cantor_pair(alpha, beta)))
}

fn edge(src: &BitSource, x: u64, y: u64) -> u8 {
    src.bit(cantor_pair(x.max(y), x.min(y)))
}

pub fn is_homogeneous(src: &BitSource, h: &BTreeSet<u64>, color: u8) -> bool {
    let v: Vec<u64> = h.iter().copied().collect();
    v.iter()
        .enumerate()
        .all(|(i, &b)| v[i + 1..].iter().all(|&a| edge(src, a, b) == color))
}

pub fn homog_compatible(src: &BitSource, h1: &BTreeSet<u64>, h2: &BTreeSet<u64>, color: u8) -> bool {
    is_homogeneous(src, &h1.union(h2).copied().collect(), color)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonTransitive {
    pub h1: BTreeSet<u64>,
    pub h2: BTreeSet<u64>,
    pub h3: BTreeSet<u64>,
}

/// Singletons `{a}, {b}, {c}` below `bound` with `{a}~{b}`, `{b}~{c}` and `{a}≁{c}`.
pub fn find_nontransitive(src: &BitSource, color: u8, bound: u64) -> Option<NonTransitive> {
    for b in 0..bound {
        for a in 0..bound {
            if a == b || edge(src, a, b) != color {
                continue;
            }
            for c in 0..bound {
                if c != a && c != b && edge(src, b, c) == color && edge(src, a, c) != color {
                    return Some(NonTransitive {
                        h1: [a].into(),
                        h2: [b].into(),
                        h3: [c].into(),
                    });
                }
            }
        }
    }
    None
}
