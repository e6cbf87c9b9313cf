//! The poset of finite, index-labelled families of equal-length sequences,
//! with constructive amalgamation of aligned pairs, one-level extension and
//! the linking step that forces `x_α = f_n(x_β)`.
//!
//! Indices are naturals standing in for countable ordinals. A condition `q`
//! is stronger than `p` (`p ≤ q`) when it has a larger domain, end-extends
//! every sequence, and keeps every `R_i` relation (`i < n(p)`) between
//! indices `α < β` of `p`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seq::{FinSeq, SeqError, SigmaFamily, StarRequest};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KnasterError {
    #[error("invalid condition: {0}")]
    Invalid(String),
    #[error("conditions are not aligned: {0}")]
    NotAligned(String),
    #[error("phi_{row} would send point {point} to both {first} and {second}")]
    MultiValuedPhi {
        row: usize,
        point: usize,
        first: usize,
        second: usize,
    },
    #[error("link impossible: {0}")]
    LinkImpossible(String),
    #[error(transparent)]
    Seq(#[from] SeqError),
}

/// A condition: finitely many indices, each carrying a sequence of length `level`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawQCondition", into = "RawQCondition")]
pub struct QCondition {
    level: usize,
    entries: BTreeMap<u64, FinSeq>,
}

#[derive(Serialize, Deserialize)]
struct RawQCondition {
    level: usize,
    entries: BTreeMap<u64, FinSeq>,
}

impl TryFrom<RawQCondition> for QCondition {
    type Error = KnasterError;

    fn try_from(raw: RawQCondition) -> Result<Self, Self::Error> {
        QCondition::new(raw.level, raw.entries)
    }
}

impl From<QCondition> for RawQCondition {
    fn from(q: QCondition) -> Self {
        RawQCondition {
            level: q.level,
            entries: q.entries,
        }
    }
}

impl QCondition {
    pub fn new(level: usize, entries: BTreeMap<u64, FinSeq>) -> Result<Self, KnasterError> {
        if let Some((a, s)) = entries.iter().find(|(_, s)| s.len() != level) {
            return Err(KnasterError::Invalid(format!(
                "entry {a} has length {} but the level is {level}",
                s.len()
            )));
        }
        let distinct: BTreeSet<&FinSeq> = entries.values().collect();
        if distinct.len() != entries.len() {
            return Err(KnasterError::Invalid("two indices carry the same sequence".into()));
        }
        Ok(QCondition { level, entries })
    }

    pub fn empty(level: usize) -> Self {
        QCondition {
            level,
            entries: BTreeMap::new(),
        }
    }

    pub fn singleton(index: u64, seq: FinSeq) -> Self {
        QCondition {
            level: seq.len(),
            entries: BTreeMap::from([(index, seq)]),
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn entries(&self) -> &BTreeMap<u64, FinSeq> {
        &self.entries
    }

    pub fn get(&self, index: u64) -> Option<&FinSeq> {
        self.entries.get(&index)
    }

    pub fn domain(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Restriction of the domain to indices below `bound`.
    pub fn below(&self, bound: u64) -> QCondition {
        QCondition {
            level: self.level,
            entries: self.entries.range(..bound).map(|(&a, s)| (a, s.clone())).collect(),
        }
    }

    /// Canonical text form: `level n` then sorted `index: v0 v1 …` lines.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for QCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "level {}", self.level)?;
        for (a, s) in &self.entries {
            if s.is_empty() {
                writeln!(f, "{a}:")?;
            } else {
                writeln!(f, "{a}: {s}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for QCondition {
    type Err = KnasterError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = |m: String| KnasterError::Invalid(m);
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let level = lines
            .next()
            .and_then(|l| l.strip_prefix("level "))
            .and_then(|l| l.trim().parse::<usize>().ok())
            .ok_or_else(|| bad("missing `level n` header".into()))?;
        let mut entries = BTreeMap::new();
        for line in lines {
            let (a, s) = line.split_once(':').ok_or_else(|| bad(format!("bad line `{line}`")))?;
            let a = a
                .trim()
                .parse::<u64>()
                .map_err(|_| bad(format!("bad index in `{line}`")))?;
            let s = s.parse::<FinSeq>()?;
            if entries.insert(a, s).is_some() {
                return Err(bad(format!("index {a} repeated")));
            }
        }
        QCondition::new(level, entries)
    }
}

/// `q ≤ p`: `p` is at least as strong as `q`.
pub fn q_leq(fam: &mut SigmaFamily, q: &QCondition, p: &QCondition) -> Result<bool, SeqError> {
    for (a, s) in &q.entries {
        match p.entries.get(a) {
            Some(t) if s.is_prefix_of(t) => {}
            _ => return Ok(false),
        }
    }
    let items: Vec<(&u64, &FinSeq)> = q.entries.iter().collect();
    for (x, &(a, qa)) in items.iter().enumerate() {
        for &(b, qb) in &items[x + 1..] {
            for i in 0..q.level {
                if fam.rel_r(i, qa, qb)? && !fam.rel_r(i, &p.entries[a], &p.entries[b])? {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Checks the hypotheses under which two conditions amalgamate: equal
/// levels, agreement on the common domain, and a separator below which the
/// domains agree and above which they are disjoint.
pub fn check_aligned(qa: &QCondition, qb: &QCondition) -> Result<(), KnasterError> {
    if qa.level != qb.level {
        return Err(KnasterError::NotAligned(format!(
            "levels {} and {}",
            qa.level, qb.level
        )));
    }
    let common: BTreeSet<u64> = qa.domain().filter(|a| qb.entries.contains_key(a)).collect();
    for a in &common {
        if qa.entries[a] != qb.entries[a] {
            return Err(KnasterError::NotAligned(format!(
                "conditions differ at common index {a}"
            )));
        }
    }
    if let Some(&top) = common.iter().next_back() {
        let lowest_private = qa.domain().chain(qb.domain()).filter(|a| !common.contains(a)).min();
        if let Some(low) = lowest_private {
            if low < top {
                return Err(KnasterError::NotAligned(format!(
                    "private index {low} lies below common index {top}"
                )));
            }
        }
    }
    Ok(())
}

/// One row per `i < rows`: `φ_i(j0) = j1` whenever `j1 < j0`, both indices lie
/// on the same side, and `q̄(γ_{j1}) R_i q̄(γ_{j0})`.
fn relation_rows(
    fam: &mut SigmaFamily,
    merged: &[(u64, FinSeq)],
    sides: &[&QCondition],
    rows: usize,
) -> Result<Vec<Vec<Option<usize>>>, KnasterError> {
    let n = merged.len();
    let mut phis = vec![vec![None; n]; rows];
    let same_side = |a: u64, b: u64| {
        sides
            .iter()
            .any(|q| q.entries.contains_key(&a) && q.entries.contains_key(&b))
    };
    for (i, row) in phis.iter_mut().enumerate() {
        for j0 in 0..n {
            for j1 in 0..j0 {
                let (a1, s1) = &merged[j1];
                let (a0, s0) = &merged[j0];
                if same_side(*a1, *a0) && fam.rel_r(i, s1, s0)? {
                    match row[j0] {
                        Some(prev) if prev != j1 => {
                            return Err(KnasterError::MultiValuedPhi {
                                row: i,
                                point: j0,
                                first: prev,
                                second: j1,
                            })
                        }
                        _ => row[j0] = Some(j1),
                    }
                }
            }
        }
    }
    Ok(phis)
}

/// Appends the witness block of the request built from `rows` to every entry.
fn extend_by_rows(
    fam: &mut SigmaFamily,
    merged: Vec<(u64, FinSeq)>,
    level: usize,
    rows: &[Vec<Option<usize>>],
) -> Result<QCondition, KnasterError> {
    let request = StarRequest::from_partial(merged.len(), rows);
    let block = fam.realise(request)?;
    let entries = merged
        .into_iter()
        .zip(block)
        .map(|((a, s), digit)| (a, s.appended(digit)))
        .collect();
    QCondition::new(level + 1, entries)
}

fn merge(qa: &QCondition, qb: &QCondition) -> Vec<(u64, FinSeq)> {
    let mut merged = qa.entries.clone();
    for (a, s) in &qb.entries {
        merged.entry(*a).or_insert_with(|| s.clone());
    }
    merged.into_iter().collect()
}

/// A common extension of an aligned pair, one level higher.
pub fn amalgamate(fam: &mut SigmaFamily, qa: &QCondition, qb: &QCondition) -> Result<QCondition, KnasterError> {
    check_aligned(qa, qb)?;
    let merged = merge(qa, qb);
    let rows = relation_rows(fam, &merged, &[qa, qb], qa.level)?;
    extend_by_rows(fam, merged, qa.level, &rows)
}

/// A stronger condition with the same domain, one level higher.
pub fn extend_level(fam: &mut SigmaFamily, q: &QCondition) -> Result<QCondition, KnasterError> {
    let merged: Vec<(u64, FinSeq)> = q.entries.clone().into_iter().collect();
    let rows = relation_rows(fam, &merged, &[q], q.level)?;
    extend_by_rows(fam, merged, q.level, &rows)
}

/// Amalgamates an aligned pair with `qa(α) = qb(β)` so that the result has
/// `q(α) R_n q(β)` at the old level `n`.
pub fn link_amalgamate(
    fam: &mut SigmaFamily,
    qa: &QCondition,
    qb: &QCondition,
    alpha: u64,
    beta: u64,
) -> Result<QCondition, KnasterError> {
    let sa = qa
        .get(alpha)
        .ok_or_else(|| KnasterError::LinkImpossible(format!("{alpha} is not in the first domain")))?;
    let sb = qb
        .get(beta)
        .ok_or_else(|| KnasterError::LinkImpossible(format!("{beta} is not in the second domain")))?;
    if alpha >= beta {
        return Err(KnasterError::LinkImpossible(format!("need {alpha} < {beta}")));
    }
    if sa != sb {
        return Err(KnasterError::LinkImpossible(format!(
            "sequences at {alpha} and {beta} differ"
        )));
    }
    check_aligned(qa, qb)?;
    let merged = merge(qa, qb);
    let n = qa.level;
    let mut rows = relation_rows(fam, &merged, &[qa, qb], n)?;
    let pos = |idx: u64| merged.iter().position(|(a, _)| *a == idx).expect("index is merged");
    let mut link_row = vec![None; merged.len()];
    link_row[pos(beta)] = Some(pos(alpha));
    rows.push(link_row);
    let q = extend_by_rows(fam, merged, n, &rows)?;
    debug_assert!(fam.rel_r(n, &q.entries[&alpha], &q.entries[&beta])?);
    Ok(q)
}

/// Outcome of the bounded common-extension search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Compatibility {
    Compatible(QCondition),
    Incompatible(String),
    Undecided,
}

/// Bounded search for a common extension of an arbitrary pair.
///
/// Aligned pairs are amalgamated. Pairs that disagree on a common index are
/// incompatible. With `bound ≥ 1`, equal-level pairs that agree on their
/// common domain are merged directly when the side-wise relation maps stay
/// single-valued. Everything else is `Undecided`.
pub fn search_common_extension(
    fam: &mut SigmaFamily,
    qa: &QCondition,
    qb: &QCondition,
    bound: usize,
) -> Result<Compatibility, KnasterError> {
    for (a, s) in &qa.entries {
        if let Some(t) = qb.entries.get(a) {
            if !s.is_prefix_of(t) && !t.is_prefix_of(s) {
                return Ok(Compatibility::Incompatible(format!(
                    "index {a} carries clashing sequences"
                )));
            }
        }
    }
    if check_aligned(qa, qb).is_ok() {
        return Ok(Compatibility::Compatible(amalgamate(fam, qa, qb)?));
    }
    if bound == 0 || qa.level != qb.level {
        return Ok(Compatibility::Undecided);
    }
    let merged = merge(qa, qb);
    let rows = match relation_rows(fam, &merged, &[qa, qb], qa.level) {
        Ok(rows) => rows,
        Err(KnasterError::MultiValuedPhi { .. }) => return Ok(Compatibility::Undecided),
        Err(e) => return Err(e),
    };
    let q = extend_by_rows(fam, merged, qa.level, &rows)?;
    if q_leq(fam, qa, &q)? && q_leq(fam, qb, &q)? {
        Ok(Compatibility::Compatible(q))
    } else {
        Ok(Compatibility::Undecided)
    }
}

/// One requirement met by a mini-generic run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// Raise the level by one.
    Extend,
    /// Adjoin a new index.
    Fresh { index: u64 },
    /// Adjoin `beta` and force `x_alpha = f_n(x_beta)` at the current level `n`.
    LinkFresh { alpha: u64, beta: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenericStep {
    pub requested: Generator,
    pub applied: Generator,
    pub level: usize,
}

/// A finite stand-in for the generic sequences `x_α = ⋃ q(α)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenericRun {
    pub condition: QCondition,
    pub steps: Vec<GenericStep>,
    /// `(alpha, beta, n)` for every link forced along the way.
    pub links: Vec<(u64, u64, usize)>,
}

impl GenericRun {
    pub fn prefixes(&self) -> &BTreeMap<u64, FinSeq> {
        self.condition.entries()
    }
}

fn fresh_sequence(level: usize, taken: &QCondition) -> Option<FinSeq> {
    if level == 0 {
        return taken.is_empty().then(FinSeq::empty);
    }
    let used: BTreeSet<&FinSeq> = taken.entries.values().collect();
    (0u64..)
        .map(|v| {
            let mut items = vec![0; level];
            items[level - 1] = v;
            FinSeq(items)
        })
        .find(|s| !used.contains(s))
}

/// Runs `steps` rounds starting at `start`, meeting `generators[k mod len]` at
/// round `k`. A generator that cannot be met in the current state falls back
/// to [`Generator::Extend`], so every round raises the level by exactly one.
pub fn mini_generic(
    fam: &mut SigmaFamily,
    start: &QCondition,
    generators: &[Generator],
    steps: usize,
) -> Result<GenericRun, KnasterError> {
    let mut p = start.clone();
    let mut trace = Vec::with_capacity(steps);
    let mut links = Vec::new();
    for k in 0..steps {
        let requested = generators
            .get(k % generators.len().max(1))
            .copied()
            .unwrap_or(Generator::Extend);
        let (next, applied) = match requested {
            Generator::Extend => (extend_level(fam, &p)?, Generator::Extend),
            Generator::Fresh { index } if p.get(index).is_none() => {
                let below = p.below(index);
                match fresh_sequence(p.level, &below) {
                    Some(s) => {
                        let mut u = below;
                        u.entries.insert(index, s);
                        (amalgamate(fam, &p, &u)?, requested)
                    }
                    None => (extend_level(fam, &p)?, Generator::Extend),
                }
            }
            Generator::LinkFresh { alpha, beta } if alpha < beta && p.get(beta).is_none() && p.get(alpha).is_some() => {
                let mut u = p.below(alpha);
                u.entries.insert(beta, p.entries[&alpha].clone());
                let n = p.level;
                let q = link_amalgamate(fam, &p, &u, alpha, beta)?;
                links.push((alpha, beta, n));
                (q, requested)
            }
            _ => (extend_level(fam, &p)?, Generator::Extend),
        };
        p = next;
        trace.push(GenericStep {
            requested,
            applied,
            level: p.level,
        });
    }
    Ok(GenericRun {
        condition: p,
        steps: trace,
        links,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::ScheduleConfig;

    fn fam() -> SigmaFamily {
        let mut f = SigmaFamily::new(ScheduleConfig::default()).unwrap();
        f.extend(50).unwrap();
        f
    }

    fn q(level: usize, entries: &[(u64, &[u64])]) -> QCondition {
        QCondition::new(level, entries.iter().map(|(a, s)| (*a, FinSeq(s.to_vec()))).collect()).unwrap()
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(QCondition::new(2, BTreeMap::from([(0, FinSeq(vec![1]))])).is_err());
        assert!(QCondition::new(1, BTreeMap::from([(0, FinSeq(vec![1])), (3, FinSeq(vec![1]))])).is_err());
    }

    #[test]
    fn text_form_round_trips() {
        let c = q(2, &[(3, &[0, 1]), (7, &[4, 4])]);
        assert_eq!(c.to_text(), "level 2\n3: 0 1\n7: 4 4\n");
        assert_eq!(c.to_text().parse::<QCondition>().unwrap(), c);
        assert_eq!(
            QCondition::empty(0).to_text().parse::<QCondition>().unwrap(),
            QCondition::empty(0)
        );
    }

    #[test]
    fn leq_is_reflexive_and_needs_domain() {
        let mut f = fam();
        let a = q(1, &[(0, &[1]), (2, &[3])]);
        assert!(q_leq(&mut f, &a, &a).unwrap());
        let b = q(1, &[(0, &[1])]);
        assert!(q_leq(&mut f, &b, &a).unwrap());
        assert!(!q_leq(&mut f, &a, &b).unwrap());
    }

    #[test]
    fn amalgamating_equal_conditions_extends_them() {
        let mut f = fam();
        let a = q(1, &[(0, &[1]), (2, &[3])]);
        let out = amalgamate(&mut f, &a, &a).unwrap();
        assert_eq!(out.level(), 2);
        assert_eq!(out.domain().collect::<Vec<_>>(), vec![0, 2]);
        assert!(q_leq(&mut f, &a, &out).unwrap());
    }

    #[test]
    fn equal_sequences_get_distinct_digits() {
        let mut f = fam();
        let a = q(2, &[(4, &[1, 1])]);
        let b = q(2, &[(9, &[1, 1])]);
        let out = amalgamate(&mut f, &a, &b).unwrap();
        assert_ne!(out.get(4).unwrap().get(2), out.get(9).unwrap().get(2));
        assert!(q_leq(&mut f, &a, &out).unwrap());
        assert!(q_leq(&mut f, &b, &out).unwrap());
    }

    #[test]
    fn relations_on_common_part_survive() {
        let mut f = fam();
        let t = FinSeq(vec![5, 6]);
        let s = f.f_apply(0, &t).unwrap();
        if s == t {
            return;
        }
        let mut entries = BTreeMap::from([(0, s.clone()), (1, t.clone())]);
        let a = QCondition::new(2, entries.clone()).unwrap();
        entries.insert(5, FinSeq(vec![9, 9]));
        let b = QCondition::new(2, entries).unwrap();
        let out = amalgamate(&mut f, &a, &b).unwrap();
        assert!(f.rel_r(0, out.get(0).unwrap(), out.get(1).unwrap()).unwrap());
    }

    #[test]
    fn misaligned_pairs_are_rejected() {
        let mut f = fam();
        let a = q(1, &[(0, &[1]), (5, &[2])]);
        let b = q(1, &[(3, &[4]), (5, &[2])]);
        assert!(matches!(amalgamate(&mut f, &a, &b), Err(KnasterError::NotAligned(_))));
        let c = q(2, &[(0, &[1, 1])]);
        assert!(matches!(amalgamate(&mut f, &a, &c), Err(KnasterError::NotAligned(_))));
    }

    #[test]
    fn extend_level_of_empty_condition() {
        let mut f = fam();
        assert_eq!(
            extend_level(&mut f, &QCondition::empty(3)).unwrap(),
            QCondition::empty(4)
        );
        let one = q(1, &[(2, &[8])]);
        let out = extend_level(&mut f, &one).unwrap();
        assert_eq!(out.get(2).unwrap().restrict(1), FinSeq(vec![8]));
    }

    #[test]
    fn linking_forces_the_relation() {
        let mut f = fam();
        let a = q(2, &[(1, &[3, 0])]);
        let b = q(2, &[(6, &[3, 0])]);
        let out = link_amalgamate(&mut f, &a, &b, 1, 6).unwrap();
        assert!(f.rel_r(2, out.get(1).unwrap(), out.get(6).unwrap()).unwrap());
        assert!(q_leq(&mut f, &a, &out).unwrap());
        assert!(q_leq(&mut f, &b, &out).unwrap());
        let c = q(2, &[(6, &[3, 1])]);
        assert!(matches!(
            link_amalgamate(&mut f, &a, &c, 1, 6),
            Err(KnasterError::LinkImpossible(_))
        ));
    }

    #[test]
    fn bounded_search_reports_undecided() {
        let mut f = fam();
        let a = q(1, &[(0, &[1]), (5, &[2])]);
        let b = q(1, &[(3, &[4]), (5, &[2])]);
        assert_eq!(
            search_common_extension(&mut f, &a, &b, 0).unwrap(),
            Compatibility::Undecided
        );
        assert!(matches!(
            search_common_extension(&mut f, &a, &b, 1).unwrap(),
            Compatibility::Compatible(_)
        ));
        let c = q(1, &[(5, &[3])]);
        assert!(matches!(
            search_common_extension(&mut f, &a, &c, 0).unwrap(),
            Compatibility::Incompatible(_)
        ));
    }

    #[test]
    fn mini_generic_grows_and_links() {
        let mut f = fam();
        let start = q(1, &[(0, &[0])]);
        let gens = [
            Generator::Fresh { index: 2 },
            Generator::LinkFresh { alpha: 2, beta: 5 },
            Generator::Extend,
        ];
        let run = mini_generic(&mut f, &start, &gens, 6).unwrap();
        assert_eq!(run.condition.level(), 7);
        assert_eq!(run.links, vec![(2, 5, 2)]);
        let x2 = run.condition.get(2).unwrap();
        let x5 = run.condition.get(5).unwrap();
        for m in 3..=7 {
            assert!(f.rel_r(2, &x2.restrict(m), &x5.restrict(m)).unwrap());
        }
        assert_eq!(mini_generic(&mut f, &start, &gens, 0).unwrap().condition, start);
    }
}
