//! Binary trees that are full above a finite depth, their exact dyadic
//! cone measures, the poset of pairs `(n, T)` with positive measure above
//! every node of length `n`, its linked cells, and partitions by a cone
//! classifier.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;

/// Deepest supported tree; leaves are kept as a bitset of size `2^depth`.
pub const MAX_DEPTH: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeasureError {
    #[error("depth {0} exceeds the supported maximum")]
    DepthTooLarge(usize),
    #[error("leaf `{leaf}` does not have length {depth}")]
    BadLeaf { leaf: BitString, depth: usize },
    #[error("level {n} lies above the tree depth {depth}")]
    LevelAboveDepth { n: usize, depth: usize },
    #[error("a cell needs n < m, got n = {n}, m = {m}")]
    BadCell { n: usize, m: usize },
    #[error("condition does not lie in the cell")]
    CellMismatch,
    #[error("conditions {first} and {second} meet in a null set above `{node}`")]
    ClassifierViolation {
        first: usize,
        second: usize,
        node: BitString,
    },
}

/// `num / 2^exp`, kept with `num` odd or `exp = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(i128, u32)", into = "(i128, u32)")]
pub struct Dyadic {
    num: i128,
    exp: u32,
}

impl From<(i128, u32)> for Dyadic {
    fn from((num, exp): (i128, u32)) -> Self {
        Dyadic::new(num, exp)
    }
}

impl From<Dyadic> for (i128, u32) {
    fn from(d: Dyadic) -> Self {
        (d.num, d.exp)
    }
}

impl Dyadic {
    pub fn new(mut num: i128, mut exp: u32) -> Self {
        if num == 0 {
            return Dyadic { num: 0, exp: 0 };
        }
        while exp > 0 && num % 2 == 0 {
            num /= 2;
            exp -= 1;
        }
        Dyadic { num, exp }
    }

    pub fn zero() -> Self {
        Dyadic::new(0, 0)
    }

    pub fn one() -> Self {
        Dyadic::new(1, 0)
    }

    pub fn numerator(&self) -> i128 {
        self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn is_positive(&self) -> bool {
        self.num > 0
    }

    fn aligned(self, other: Dyadic) -> (i128, i128, u32) {
        let exp = self.exp.max(other.exp);
        (self.num << (exp - self.exp), other.num << (exp - other.exp), exp)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;

    fn add(self, other: Dyadic) -> Dyadic {
        let (a, b, exp) = self.aligned(other);
        Dyadic::new(a + b, exp)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;

    fn sub(self, other: Dyadic) -> Dyadic {
        let (a, b, exp) = self.aligned(other);
        Dyadic::new(a - b, exp)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(*other);
        a.cmp(&b)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

/// A tree `W ⊆ 2^{≤depth}` closed under initial segments in which every node
/// reaches level `depth`, identified with its set of leaves; above `depth`
/// it is full. Leaf `t` sits at bit `code(t)`, most significant bit first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawClopenTree", into = "RawClopenTree")]
pub struct ClopenTree {
    depth: usize,
    words: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct RawClopenTree {
    depth: usize,
    leaves: Vec<BitString>,
}

impl TryFrom<RawClopenTree> for ClopenTree {
    type Error = MeasureError;

    fn try_from(raw: RawClopenTree) -> Result<Self, MeasureError> {
        ClopenTree::new(raw.depth, raw.leaves)
    }
}

impl From<ClopenTree> for RawClopenTree {
    fn from(t: ClopenTree) -> Self {
        RawClopenTree {
            depth: t.depth,
            leaves: t.leaves(),
        }
    }
}

fn word_count(depth: usize) -> usize {
    (1usize << depth).div_ceil(64)
}

impl ClopenTree {
    pub fn new(depth: usize, leaves: impl IntoIterator<Item = BitString>) -> Result<Self, MeasureError> {
        let mut t = ClopenTree::empty(depth)?;
        for leaf in leaves {
            if leaf.len() != depth {
                return Err(MeasureError::BadLeaf { leaf, depth });
            }
            t.set(leaf.code());
        }
        Ok(t)
    }

    pub fn empty(depth: usize) -> Result<Self, MeasureError> {
        if depth > MAX_DEPTH {
            return Err(MeasureError::DepthTooLarge(depth));
        }
        Ok(ClopenTree {
            depth,
            words: vec![0; word_count(depth)],
        })
    }

    pub fn full(depth: usize) -> Result<Self, MeasureError> {
        let mut t = ClopenTree::empty(depth)?;
        t.fill(0, 1 << depth);
        Ok(t)
    }

    /// Leaves given as a bitmask, for depths up to 6.
    pub fn from_mask(depth: usize, mask: u64) -> Result<Self, MeasureError> {
        if depth > 6 {
            return Err(MeasureError::DepthTooLarge(depth));
        }
        let used = if depth == 6 {
            u64::MAX
        } else {
            (1u64 << (1 << depth)) - 1
        };
        Ok(ClopenTree {
            depth,
            words: vec![mask & used],
        })
    }

    /// The leaf bitmask, for depths up to 6.
    pub fn mask(&self) -> Option<u64> {
        (self.depth <= 6).then(|| self.words[0])
    }

    fn set(&mut self, code: u64) {
        self.words[(code / 64) as usize] |= 1 << (code % 64);
    }

    fn has(&self, code: u64) -> bool {
        self.words[(code / 64) as usize] >> (code % 64) & 1 == 1
    }

    fn fill(&mut self, lo: u64, hi: u64) {
        for c in lo..hi {
            self.set(c);
        }
    }

    fn count_range(&self, lo: u64, hi: u64) -> u64 {
        let mut total = 0;
        let mut c = lo;
        while c < hi {
            let w = (c / 64) as usize;
            let start = c % 64;
            let end = (hi - (w as u64) * 64).min(64);
            let width = end - start;
            let mask = if width == 64 {
                u64::MAX
            } else {
                ((1u64 << width) - 1) << start
            };
            total += (self.words[w] & mask).count_ones() as u64;
            c = (w as u64 + 1) * 64;
        }
        total
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaf_count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn leaves(&self) -> Vec<BitString> {
        (0..1u64 << self.depth)
            .filter(|&c| self.has(c))
            .map(|c| BitString::from_code(c, self.depth))
            .collect()
    }

    /// `W(t)`: the number of leaves extending `t`, for `|t| ≤ depth`.
    pub fn count(&self, t: &BitString) -> u64 {
        if t.len() > self.depth {
            return self.has(t.restrict(self.depth).code()) as u64;
        }
        let shift = self.depth - t.len();
        let lo = t.code() << shift;
        self.count_range(lo, lo + (1 << shift))
    }

    pub fn contains(&self, t: &BitString) -> bool {
        self.count(t) > 0
    }

    /// The measure of the branches through `t`.
    pub fn mu_cone(&self, t: &BitString) -> Dyadic {
        Dyadic::new(self.count(t) as i128, t.len().max(self.depth) as u32)
    }

    /// The same tree described at a larger depth.
    pub fn refine(&self, depth: usize) -> Result<ClopenTree, MeasureError> {
        if depth <= self.depth {
            return Ok(self.clone());
        }
        let mut out = ClopenTree::empty(depth)?;
        let shift = depth - self.depth;
        for c in (0..1u64 << self.depth).filter(|&c| self.has(c)) {
            out.fill(c << shift, (c + 1) << shift);
        }
        Ok(out)
    }

    /// `W ∩ 2^{≤n}` as a tree of depth `n`.
    pub fn restrict(&self, n: usize) -> Result<ClopenTree, MeasureError> {
        if n > self.depth {
            return Err(MeasureError::LevelAboveDepth { n, depth: self.depth });
        }
        let mut out = ClopenTree::empty(n)?;
        let shift = self.depth - n;
        for c in 0..1u64 << n {
            if self.count_range(c << shift, (c + 1) << shift) > 0 {
                out.set(c);
            }
        }
        Ok(out)
    }

    /// Nodes of length `n ≤ depth`.
    pub fn level(&self, n: usize) -> Result<Vec<BitString>, MeasureError> {
        Ok(self.restrict(n)?.leaves())
    }

    fn co_refine(&self, other: &ClopenTree) -> Result<(ClopenTree, ClopenTree), MeasureError> {
        let d = self.depth.max(other.depth);
        Ok((self.refine(d)?, other.refine(d)?))
    }

    pub fn intersection(&self, other: &ClopenTree) -> Result<ClopenTree, MeasureError> {
        let (mut a, b) = self.co_refine(other)?;
        for (x, y) in a.words.iter_mut().zip(&b.words) {
            *x &= y;
        }
        Ok(a)
    }

    pub fn is_subset(&self, other: &ClopenTree) -> Result<bool, MeasureError> {
        let (a, b) = self.co_refine(other)?;
        Ok(a.words.iter().zip(&b.words).all(|(x, y)| x & !y == 0))
    }

    /// Equality as sets of branches.
    pub fn same_branches(&self, other: &ClopenTree) -> Result<bool, MeasureError> {
        let (a, b) = self.co_refine(other)?;
        Ok(a == b)
    }

    /// The part of the tree through `t`.
    pub fn cone(&self, t: &BitString) -> Result<ClopenTree, MeasureError> {
        let d = self.depth.max(t.len());
        let mut out = ClopenTree::empty(d)?;
        let base = self.refine(d)?;
        let shift = d - t.len();
        let lo = t.restrict(d).code() << shift;
        for c in lo..lo + (1 << shift) {
            if base.has(c) {
                out.set(c);
            }
        }
        Ok(out)
    }
}

/// A pair `(n, T)`; every node of `T` reaches the leaf level, so each node of
/// length `n` has positive measure above it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawP3", into = "RawP3")]
pub struct P3Condition {
    n: usize,
    tree: ClopenTree,
}

#[derive(Serialize, Deserialize)]
struct RawP3 {
    n: usize,
    tree: ClopenTree,
}

impl TryFrom<RawP3> for P3Condition {
    type Error = MeasureError;

    fn try_from(raw: RawP3) -> Result<Self, MeasureError> {
        P3Condition::new(raw.n, raw.tree)
    }
}

impl From<P3Condition> for RawP3 {
    fn from(c: P3Condition) -> Self {
        RawP3 { n: c.n, tree: c.tree }
    }
}

impl P3Condition {
    pub fn new(n: usize, tree: ClopenTree) -> Result<Self, MeasureError> {
        if n > tree.depth {
            return Err(MeasureError::LevelAboveDepth { n, depth: tree.depth });
        }
        Ok(P3Condition { n, tree })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tree(&self) -> &ClopenTree {
        &self.tree
    }
}

/// `c1 ≤ c2`: `n1 ≤ n2`, `T2 ⊆ T1`, and the trees agree up to level `n1`.
pub fn p3_leq(c1: &P3Condition, c2: &P3Condition) -> Result<bool, MeasureError> {
    if c1.n > c2.n {
        return Ok(false);
    }
    let (t1, t2) = c1.tree.co_refine(&c2.tree)?;
    if !t2.is_subset(&t1)? {
        return Ok(false);
    }
    Ok(t1.restrict(c1.n)? == t2.restrict(c1.n)?)
}

/// The cell `U(W, n, m)` with `m = depth(W)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub n: usize,
    pub w: ClopenTree,
}

impl CellIndex {
    pub fn new(n: usize, w: ClopenTree) -> Result<Self, MeasureError> {
        if n >= w.depth {
            return Err(MeasureError::BadCell { n, m: w.depth });
        }
        Ok(CellIndex { n, w })
    }

    pub fn m(&self) -> usize {
        self.w.depth
    }
}

/// Membership in `U(W, n, m)`: same `n`, `T↾m = W`, and more than half of
/// each cone of `W` at level `n` survives in `T`.
pub fn in_cell(c: &P3Condition, cell: &CellIndex) -> Result<bool, MeasureError> {
    let m = cell.m();
    if c.n != cell.n {
        return Ok(false);
    }
    let tree = c.tree.refine(m)?;
    if tree.restrict(m)? != cell.w {
        return Ok(false);
    }
    let extra = tree.depth - m;
    for t in cell.w.level(cell.n)? {
        let kept = tree.count(&t) as u128;
        let whole = (cell.w.count(&t) as u128) << extra;
        if 2 * kept <= whole {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The cell built from the condition itself at depth `max(depth, n + 1)`.
pub fn cell_of(c: &P3Condition) -> Result<CellIndex, MeasureError> {
    let m = c.tree.depth.max(c.n + 1);
    CellIndex::new(c.n, c.tree.refine(m)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeCertificate {
    pub node: BitString,
    pub measure: Dyadic,
    /// `μ₁(t) + μ₂(t) − W(t)/2^m`.
    pub lower_bound: Dyadic,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkedWitness {
    pub condition: P3Condition,
    pub certificates: Vec<ConeCertificate>,
}

/// A common extension of two members of one cell: the intersection of the trees.
pub fn linked_witness(cell: &CellIndex, c1: &P3Condition, c2: &P3Condition) -> Result<LinkedWitness, MeasureError> {
    if !in_cell(c1, cell)? || !in_cell(c2, cell)? {
        return Err(MeasureError::CellMismatch);
    }
    let tree = c1.tree.intersection(&c2.tree)?;
    let m = cell.m() as u32;
    let mut certificates = Vec::new();
    for t in cell.w.level(cell.n)? {
        let whole = Dyadic::new(cell.w.count(&t) as i128, m);
        certificates.push(ConeCertificate {
            measure: tree.mu_cone(&t),
            lower_bound: c1.tree.mu_cone(&t) + c2.tree.mu_cone(&t) - whole,
            node: t,
        });
    }
    Ok(LinkedWitness {
        condition: P3Condition::new(cell.n, tree)?,
        certificates,
    })
}

/// One class of [`q_cells`]: same `n`, same tree up to level `n`, and the
/// same classifier value on every cone at level `n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QCell {
    pub n: usize,
    pub nodes: Vec<BitString>,
    pub classes: Vec<u64>,
    pub members: Vec<usize>,
}

/// Groups conditions by `(n, T↾n, t ↦ classifier(t, n, cone of T at t))` and
/// checks that any two members of a group meet in positive measure above
/// every node of length `n`.
pub fn q_cells<F>(conditions: &[P3Condition], classifier: F) -> Result<Vec<QCell>, MeasureError>
where
    F: Fn(&BitString, usize, &ClopenTree) -> u64,
{
    let mut groups: BTreeMap<(usize, Vec<BitString>, Vec<u64>), Vec<usize>> = BTreeMap::new();
    for (idx, c) in conditions.iter().enumerate() {
        let nodes = c.tree.level(c.n)?;
        let classes = nodes
            .iter()
            .map(|t| Ok(classifier(t, c.n, &c.tree.cone(t)?)))
            .collect::<Result<Vec<_>, MeasureError>>()?;
        groups.entry((c.n, nodes, classes)).or_default().push(idx);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((n, nodes, classes), members) in groups {
        for (k, &a) in members.iter().enumerate() {
            for &b in &members[k + 1..] {
                let meet = conditions[a].tree.intersection(&conditions[b].tree)?;
                if let Some(t) = nodes.iter().find(|t| !meet.contains(t)) {
                    return Err(MeasureError::ClassifierViolation {
                        first: a,
                        second: b,
                        node: t.clone(),
                    });
                }
            }
        }
        out.push(QCell {
            n,
            nodes,
            classes,
            members,
        });
    }
    Ok(out)
}
