//! Finite sets of eventually-zero binary branches separated at a level, the
//! split function `h`, the Hechler order on stems with dominating tails, and
//! finite versions of the homogeneous-partition and predictor conditions
//! attached to a set `b` of split levels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::bits::{BitString, BitsParseError};

/// Above this many branches the partition search is greedy.
pub const EXACT_PARTITION_LIMIT: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CenteredError {
    #[error("branches `{0}` and `{1}` share the trace at level {2}")]
    TraceCollision(Branch, Branch, usize),
    #[error("h is undefined on equal branches")]
    EqualBranches,
    #[error("nothing to merge")]
    NoConditions,
    #[error("conditions disagree on their level or trace set")]
    TraceMismatch,
    #[error("branches `{0}` and `{1}` agree below the precision {2}")]
    PrecisionTooSmall(Branch, Branch, usize),
    #[error("cut points must increase strictly")]
    CutsNotIncreasing,
}

/// A branch of `2^ω` that is eventually zero, stored without trailing zeros.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Branch(BitString);

impl Branch {
    pub fn new(prefix: BitString) -> Self {
        Branch(prefix.trimmed())
    }

    pub fn zero() -> Self {
        Branch(BitString::empty())
    }

    pub fn prefix(&self) -> &BitString {
        &self.0
    }

    pub fn value(&self, k: usize) -> bool {
        self.0.bit(k)
    }

    /// `x↾n`, padded with zeros.
    pub fn restrict(&self, n: usize) -> BitString {
        BitString::new((0..n).map(|k| self.value(k)).collect())
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for Branch {
    type Err = BitsParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Branch::new(s.parse()?))
    }
}

impl Serialize for Branch {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Branch {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        Ok(Branch::new(BitString::deserialize(de)?))
    }
}

/// `h(x, y)`: the first place where the branches differ.
pub fn h_split(x: &Branch, y: &Branch) -> Result<usize, CenteredError> {
    let len = x.0.len().max(y.0.len());
    (0..len)
        .find(|&k| x.value(k) != y.value(k))
        .ok_or(CenteredError::EqualBranches)
}

/// A pair `(n, F)` whose branches have pairwise distinct traces at level `n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawP4", into = "RawP4")]
pub struct P4Condition {
    n: usize,
    branches: BTreeSet<Branch>,
}

#[derive(Serialize, Deserialize)]
struct RawP4 {
    n: usize,
    branches: BTreeSet<Branch>,
}

impl TryFrom<RawP4> for P4Condition {
    type Error = CenteredError;

    fn try_from(raw: RawP4) -> Result<Self, CenteredError> {
        P4Condition::new(raw.n, raw.branches)
    }
}

impl From<P4Condition> for RawP4 {
    fn from(c: P4Condition) -> Self {
        RawP4 {
            n: c.n,
            branches: c.branches,
        }
    }
}

impl P4Condition {
    pub fn new(n: usize, branches: BTreeSet<Branch>) -> Result<Self, CenteredError> {
        let mut seen: BTreeMap<BitString, &Branch> = BTreeMap::new();
        for x in &branches {
            if let Some(y) = seen.insert(x.restrict(n), x) {
                return Err(CenteredError::TraceCollision(y.clone(), x.clone(), n));
            }
        }
        Ok(P4Condition { n, branches })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn branches(&self) -> &BTreeSet<Branch> {
        &self.branches
    }

    /// `{x↾k : x ∈ F}`.
    pub fn traces(&self, k: usize) -> BTreeSet<BitString> {
        self.branches.iter().map(|x| x.restrict(k)).collect()
    }
}

/// `c1 ≤ c2`: `n1 ≤ n2`, `F1 ⊆ F2`, and both have the same traces at `n1`.
pub fn p4_leq(c1: &P4Condition, c2: &P4Condition) -> bool {
    c1.n <= c2.n && c1.branches.is_subset(&c2.branches) && c1.traces(c1.n) == c2.traces(c1.n)
}

/// The union of conditions sharing level and traces, at the least level
/// that separates every pair of branches.
pub fn p4_merge(cs: &[P4Condition]) -> Result<P4Condition, CenteredError> {
    let first = cs.first().ok_or(CenteredError::NoConditions)?;
    let traces = first.traces(first.n);
    if cs.iter().any(|c| c.n != first.n || c.traces(c.n) != traces) {
        return Err(CenteredError::TraceMismatch);
    }
    let branches: BTreeSet<Branch> = cs.iter().flat_map(|c| c.branches.iter().cloned()).collect();
    let list: Vec<&Branch> = branches.iter().collect();
    let mut m = first.n;
    for (k, x) in list.iter().enumerate() {
        for y in &list[k + 1..] {
            m = m.max(h_split(x, y)? + 1);
        }
    }
    P4Condition::new(m, branches)
}

/// A Hechler condition: a stem length and a finitely supported function.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "RawHechler", into = "RawHechler")]
pub struct HechlerCondition {
    n: usize,
    f: BTreeMap<u64, u64>,
}

#[derive(Serialize, Deserialize)]
struct RawHechler {
    n: usize,
    f: BTreeMap<u64, u64>,
}

impl From<RawHechler> for HechlerCondition {
    fn from(raw: RawHechler) -> Self {
        HechlerCondition::new(raw.n, raw.f)
    }
}

impl From<HechlerCondition> for RawHechler {
    fn from(c: HechlerCondition) -> Self {
        RawHechler { n: c.n, f: c.f }
    }
}

impl HechlerCondition {
    pub fn new(n: usize, f: BTreeMap<u64, u64>) -> Self {
        HechlerCondition {
            n,
            f: f.into_iter().filter(|&(_, v)| v != 0).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self, k: u64) -> u64 {
        self.f.get(&k).copied().unwrap_or(0)
    }

    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        self.f.keys().copied()
    }
}

/// `c1 ≤ c2`: the longer stem keeps the shorter one and `f2` dominates `f1`.
pub fn hechler_leq(c1: &HechlerCondition, c2: &HechlerCondition) -> bool {
    c1.n <= c2.n && (0..c1.n as u64).all(|k| c1.value(k) == c2.value(k)) && c1.f.iter().all(|(&k, &v)| v <= c2.value(k))
}

/// The pointwise maximum of two conditions with the same stem.
pub fn hechler_join(c1: &HechlerCondition, c2: &HechlerCondition) -> Option<HechlerCondition> {
    if c1.n != c2.n || (0..c1.n as u64).any(|k| c1.value(k) != c2.value(k)) {
        return None;
    }
    let keys: BTreeSet<u64> = c1.support().chain(c2.support()).collect();
    Some(HechlerCondition::new(
        c1.n,
        keys.into_iter().map(|k| (k, c1.value(k).max(c2.value(k)))).collect(),
    ))
}

fn check_precision(xs: &[Branch], m: usize) -> Result<Vec<Vec<usize>>, CenteredError> {
    let mut h = vec![vec![0; xs.len()]; xs.len()];
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let v = h_split(&xs[i], &xs[j])?;
            if v >= m {
                return Err(CenteredError::PrecisionTooSmall(xs[i].clone(), xs[j].clone(), m));
            }
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    Ok(h)
}

/// Fewest classes (as index lists) such that every pair inside a class
/// splits at a level in `b`. Exact up to [`EXACT_PARTITION_LIMIT`] branches,
/// greedy beyond.
pub fn b_homog_partition(xs: &[Branch], b: &BTreeSet<usize>, m: usize) -> Result<Vec<Vec<usize>>, CenteredError> {
    let h = check_precision(xs, m)?;
    let ok = |i: usize, j: usize| b.contains(&h[i][j]);
    let greedy = {
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for i in 0..xs.len() {
            match classes.iter_mut().find(|c| c.iter().all(|&j| ok(i, j))) {
                Some(c) => c.push(i),
                None => classes.push(vec![i]),
            }
        }
        classes
    };
    if xs.len() > EXACT_PARTITION_LIMIT {
        return Ok(greedy);
    }
    let mut best = greedy;
    let mut current: Vec<Vec<usize>> = Vec::new();
    search_partition(0, xs.len(), &ok, &mut current, &mut best);
    Ok(best)
}

fn search_partition(
    i: usize,
    n: usize,
    ok: &dyn Fn(usize, usize) -> bool,
    current: &mut Vec<Vec<usize>>,
    best: &mut Vec<Vec<usize>>,
) {
    if current.len() >= best.len() {
        return;
    }
    if i == n {
        *best = current.clone();
        return;
    }
    for c in 0..current.len() {
        if current[c].iter().all(|&j| ok(i, j)) {
            current[c].push(i);
            search_partition(i + 1, n, ok, current, best);
            current[c].pop();
        }
    }
    current.push(vec![i]);
    search_partition(i + 1, n, ok, current, best);
    current.pop();
}

/// A guessing function on short strings and, per branch, the level after
/// which it guesses that branch right at every level outside `b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predictor {
    pub table: BTreeMap<BitString, bool>,
    pub thresholds: Vec<usize>,
    /// Levels outside `b` at which two branches split.
    pub conflicts: BTreeSet<usize>,
}

impl Predictor {
    pub fn guess(&self, s: &BitString) -> bool {
        self.table.get(s).copied().unwrap_or(false)
    }

    /// Levels `n` with `threshold < n < m`, `n ∉ b` where the guess is wrong,
    /// as `(branch index, n)`.
    pub fn mistakes(&self, xs: &[Branch], b: &BTreeSet<usize>, m: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, x) in xs.iter().enumerate() {
            for n in self.thresholds[i] + 1..m {
                if !b.contains(&n) && self.guess(&x.restrict(n)) != x.value(n) {
                    out.push((i, n));
                }
            }
        }
        out
    }
}

/// Builds a predictor whose largest threshold is as small as possible. At a
/// split outside `b` the guess follows the side with more branches; the
/// other side's branches get that level as threshold.
pub fn predictor_thresholds(xs: &[Branch], b: &BTreeSet<usize>, m: usize) -> Result<Predictor, CenteredError> {
    let h = check_precision(xs, m)?;
    let mut votes: BTreeMap<BitString, [usize; 2]> = BTreeMap::new();
    for x in xs {
        for n in 0..m {
            votes.entry(x.restrict(n)).or_default()[x.value(n) as usize] += 1;
        }
    }
    let table: BTreeMap<BitString, bool> = votes.iter().map(|(s, v)| (s.clone(), v[1] > v[0])).collect();
    let mut thresholds = vec![0; xs.len()];
    let mut conflicts = BTreeSet::new();
    for (s, v) in &votes {
        let n = s.len();
        if v[0] > 0 && v[1] > 0 && !b.contains(&n) {
            conflicts.insert(n);
            for (i, x) in xs.iter().enumerate() {
                if &x.restrict(n) == s && x.value(n) != table[s] {
                    thresholds[i] = thresholds[i].max(n);
                }
            }
        }
    }
    debug_assert!({
        let splits: BTreeSet<usize> = (0..xs.len())
            .flat_map(|i| (i + 1..xs.len()).map(move |j| (i, j)))
            .map(|(i, j)| h[i][j])
            .filter(|v| !b.contains(v))
            .collect();
        splits == conflicts
    });
    let out = Predictor {
        table,
        thresholds,
        conflicts,
    };
    debug_assert!(out.mistakes(xs, b, m).is_empty());
    Ok(out)
}

/// Indices `k` with `b ∩ [cuts[k], cuts[k+1]) = ∅`.
pub fn interval_gaps(b: &BTreeSet<u64>, cuts: &[u64]) -> Result<Vec<usize>, CenteredError> {
    if cuts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CenteredError::CutsNotIncreasing);
    }
    Ok(cuts
        .windows(2)
        .enumerate()
        .filter(|(_, w)| b.range(w[0]..w[1]).next().is_none())
        .map(|(k, _)| k)
        .collect())
}
