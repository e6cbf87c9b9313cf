//! Trees of finite sequences whose successor sets carry a norm
//! `nor_η(A) = g(η) / |f(η) ∖ A|`, the parameter tables `f`, `g` that make the
//! norms behave, finite trees with norm lower bounds, truncated approximations
//! of trees whose level norms diverge, and the search for a family of
//! successor tuples with a common node and empty coordinate intersections.
//!
//! Successor sets are stored by complement: `removed = f(η) ∖ A`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::exact::Rat;
use crate::seq::FinSeq;

pub const DEFAULT_DIGIT_CAP: usize = 4096;
pub const DEFAULT_NODE_CAP: usize = 1 << 20;
pub const DEFAULT_TOY_SCALE: u64 = 2;
const EXACT_SCALE: u64 = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormError {
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("resource bound exceeded: {0}")]
    ResourceBound(String),
    #[error("node `{0}` is not a parameterised node")]
    NotInTree(FinSeq),
    #[error("successor sets live on different nodes")]
    NodeMismatch,
    #[error("trees have different roots")]
    RootMismatch,
    #[error("removed value {value} is not a successor of `{node}`")]
    RemovedOutOfRange { node: FinSeq, value: u64 },
    #[error("at least one successor set is required")]
    NoSets,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamMode {
    /// The full inequalities, with `2^f` products and the offset 100.
    Exact,
    /// Plain products of `f` and the offset `toy_scale`.
    Toy,
    /// Caller-supplied tables, checked only for tree shape.
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResourceCaps {
    pub max_digits: usize,
    pub max_nodes: usize,
}

impl Default for ResourceCaps {
    fn default() -> Self {
        ResourceCaps {
            max_digits: DEFAULT_DIGIT_CAP,
            max_nodes: DEFAULT_NODE_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeData {
    #[serde(with = "crate::exact::big_uint")]
    pub f: BigUint,
    #[serde(with = "crate::exact::big_uint")]
    pub g: BigUint,
    /// `∏{f(ν) : f(ν) < f(η)}`.
    #[serde(with = "crate::exact::big_uint")]
    pub smaller_product: BigUint,
    /// How many successor sets of norm ≥ 1 are guaranteed a common member:
    /// `∏{2^f(ν) : f(ν) < f(η)}` in exact mode, `smaller_product` otherwise.
    #[serde(with = "crate::exact::big_uint")]
    pub product_bound: BigUint,
}

/// Parameter tables for the levels `0..depth` of the tree, nodes of each
/// level listed in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTreeParams", into = "RawTreeParams")]
pub struct TreeParams {
    mode: ParamMode,
    toy_scale: u64,
    levels: Vec<Vec<NodeData>>,
    child_start: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawTreeParams {
    mode: ParamMode,
    toy_scale: u64,
    levels: Vec<Vec<NodeData>>,
}

impl TryFrom<RawTreeParams> for TreeParams {
    type Error = NormError;

    fn try_from(raw: RawTreeParams) -> Result<Self, NormError> {
        TreeParams::assemble(raw.mode, raw.toy_scale, raw.levels)
    }
}

impl From<TreeParams> for RawTreeParams {
    fn from(p: TreeParams) -> Self {
        RawTreeParams {
            mode: p.mode,
            toy_scale: p.toy_scale,
            levels: p.levels,
        }
    }
}

fn digits(n: &BigUint) -> usize {
    (n.bits() as usize * 30103).div_ceil(100000).max(1)
}

fn to_usize(n: &BigUint) -> Option<usize> {
    usize::try_from(n).ok()
}

/// Minimal-choice parameters for `depth` levels.
pub fn build_params(depth: usize, mode: ParamMode, toy_scale: u64) -> Result<TreeParams, NormError> {
    build_params_capped(depth, mode, toy_scale, ResourceCaps::default())
}

pub fn build_params_capped(
    depth: usize,
    mode: ParamMode,
    toy_scale: u64,
    caps: ResourceCaps,
) -> Result<TreeParams, NormError> {
    if depth == 0 {
        return Err(NormError::ZeroDepth);
    }
    if mode == ParamMode::Custom {
        return Err(NormError::Invalid(
            "custom tables are built with TreeParams::custom".into(),
        ));
    }
    let cap_bits = (caps.max_digits as u64) * 10 / 3 + 1;
    let mut levels: Vec<Vec<NodeData>> = Vec::with_capacity(depth);
    let mut product = BigUint::one();
    let mut exponent = BigUint::zero();
    let mut prev_f = BigUint::zero();
    let mut count = 1usize;
    let mut total = 0usize;
    for lh in 0..depth {
        total += count;
        if total > caps.max_nodes {
            return Err(NormError::ResourceBound(format!(
                "level {lh} would bring the node count to {total}"
            )));
        }
        let offset = match mode {
            ParamMode::Exact => EXACT_SCALE,
            _ => toy_scale,
        } + lh as u64;
        let mut level = Vec::with_capacity(count);
        let mut next = BigUint::zero();
        for _ in 0..count {
            let g = BigUint::from(count) * &product * offset + 1u32;
            let product_bound = match mode {
                ParamMode::Exact => {
                    let e = u64::try_from(&exponent)
                        .ok()
                        .filter(|&e| e <= cap_bits)
                        .ok_or_else(|| NormError::ResourceBound(format!("2^{exponent} exceeds the digit cap")))?;
                    BigUint::one() << e
                }
                _ => product.clone(),
            };
            let f = (&g * &product_bound + 1u32).max(&prev_f + 1u32);
            if digits(&f) > caps.max_digits {
                return Err(NormError::ResourceBound(format!(
                    "f at level {lh} needs {} digits",
                    digits(&f)
                )));
            }
            product *= &f;
            exponent += &f;
            next += &f;
            prev_f = f.clone();
            level.push(NodeData {
                f,
                g,
                smaller_product: BigUint::zero(),
                product_bound,
            });
        }
        levels.push(level);
        if lh + 1 < depth {
            count = to_usize(&next)
                .filter(|&c| c <= caps.max_nodes)
                .ok_or_else(|| NormError::ResourceBound(format!("level {} has {next} nodes", lh + 1)))?;
        }
    }
    fill_smaller_products(&mut levels);
    if mode == ParamMode::Toy {
        for node in levels.iter_mut().flatten() {
            node.product_bound = node.smaller_product.clone();
        }
    }
    TreeParams::assemble(mode, toy_scale, levels)
}

/// `∏{f(ν) : f(ν) < f(η)}` over all listed nodes.
fn fill_smaller_products(levels: &mut [Vec<NodeData>]) {
    let mut values: Vec<BigUint> = levels.iter().flatten().map(|n| n.f.clone()).collect();
    values.sort();
    let mut below: Vec<(BigUint, BigUint)> = Vec::new();
    let mut running = BigUint::one();
    let mut k = 0;
    while k < values.len() {
        let v = values[k].clone();
        below.push((v.clone(), running.clone()));
        while k < values.len() && values[k] == v {
            running *= &values[k];
            k += 1;
        }
    }
    for node in levels.iter_mut().flatten() {
        let idx = below
            .binary_search_by(|(v, _)| v.cmp(&node.f))
            .expect("value is listed");
        node.smaller_product = below[idx].1.clone();
    }
}

impl TreeParams {
    /// Tables given per node as `(f, g)`, level by level. The successor
    /// bound for guaranteed nonempty intersections is the plain product of smaller `f`.
    pub fn custom(levels: Vec<Vec<(u64, u64)>>) -> Result<TreeParams, NormError> {
        let mut levels: Vec<Vec<NodeData>> = levels
            .into_iter()
            .map(|lvl| {
                lvl.into_iter()
                    .map(|(f, g)| NodeData {
                        f: f.into(),
                        g: g.into(),
                        smaller_product: BigUint::zero(),
                        product_bound: BigUint::zero(),
                    })
                    .collect()
            })
            .collect();
        fill_smaller_products(&mut levels);
        for node in levels.iter_mut().flatten() {
            node.product_bound = node.smaller_product.clone();
        }
        TreeParams::assemble(ParamMode::Custom, 0, levels)
    }

    /// Every node of level `lh` gets the same `(f, g)`.
    pub fn uniform(per_level: &[(u64, u64)]) -> Result<TreeParams, NormError> {
        let mut levels = Vec::new();
        let mut count = 1u64;
        for &(f, g) in per_level {
            if count > DEFAULT_NODE_CAP as u64 {
                return Err(NormError::ResourceBound(format!("{count} nodes on one level")));
            }
            levels.push(vec![(f, g); count as usize]);
            count = count.saturating_mul(f);
        }
        TreeParams::custom(levels)
    }

    fn assemble(mode: ParamMode, toy_scale: u64, levels: Vec<Vec<NodeData>>) -> Result<TreeParams, NormError> {
        if levels.is_empty() {
            return Err(NormError::ZeroDepth);
        }
        if levels[0].len() != 1 {
            return Err(NormError::Invalid("the root level must hold one node".into()));
        }
        let mut child_start = Vec::with_capacity(levels.len());
        for (lh, level) in levels.iter().enumerate() {
            if level.iter().any(|n| n.f.is_zero() || n.g.is_zero()) {
                return Err(NormError::Invalid(format!("zero entry on level {lh}")));
            }
            if lh + 1 < levels.len() {
                let mut starts = Vec::with_capacity(level.len());
                let mut acc = 0usize;
                for node in level {
                    starts.push(acc);
                    acc = to_usize(&node.f)
                        .and_then(|f| acc.checked_add(f))
                        .ok_or_else(|| NormError::ResourceBound(format!("level {} is too wide", lh + 1)))?;
                }
                if acc != levels[lh + 1].len() {
                    return Err(NormError::Invalid(format!(
                        "level {} lists {} nodes but level {lh} has {acc} successors",
                        lh + 1,
                        levels[lh + 1].len()
                    )));
                }
                child_start.push(starts);
            }
        }
        Ok(TreeParams {
            mode,
            toy_scale,
            levels,
            child_start,
        })
    }

    pub fn mode(&self) -> ParamMode {
        self.mode
    }

    pub fn toy_scale(&self) -> u64 {
        self.toy_scale
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Vec<NodeData>] {
        &self.levels
    }

    fn position(&self, node: &FinSeq) -> Option<usize> {
        if node.len() > self.depth() {
            return None;
        }
        let mut pos = 0usize;
        for (lh, &c) in node.as_slice().iter().enumerate() {
            let parent = &self.levels[lh][pos];
            if BigUint::from(c) >= parent.f {
                return None;
            }
            if lh + 1 < self.depth() {
                pos = self.child_start[lh][pos] + c as usize;
            }
        }
        Some(pos)
    }

    /// Membership in the tree, including the unparameterised leaf level.
    pub fn contains(&self, node: &FinSeq) -> bool {
        self.position(node).is_some()
    }

    pub fn node(&self, node: &FinSeq) -> Result<&NodeData, NormError> {
        match self.position(node) {
            Some(pos) if node.len() < self.depth() => Ok(&self.levels[node.len()][pos]),
            _ => Err(NormError::NotInTree(node.clone())),
        }
    }

    /// Nodes of a parameterised level, in lexicographic order.
    pub fn nodes_at(&self, lh: usize) -> Result<Vec<FinSeq>, NormError> {
        if lh >= self.depth() {
            return Err(NormError::Invalid(format!("level {lh} is not parameterised")));
        }
        let mut out = vec![FinSeq::empty()];
        for k in 0..lh {
            let mut next = Vec::with_capacity(self.levels[k + 1].len());
            for (pos, parent) in out.iter().enumerate() {
                let f = to_usize(&self.levels[k][pos].f).expect("checked when assembled");
                next.extend((0..f as u64).map(|c| parent.appended(c)));
            }
            out = next;
        }
        Ok(out)
    }

    /// Re-evaluates the defining inequalities, returning a description of
    /// each failure.
    pub fn verify(&self) -> Vec<String> {
        let mut failures = Vec::new();
        let flat: Vec<(usize, &NodeData)> = self
            .levels
            .iter()
            .enumerate()
            .flat_map(|(lh, lvl)| lvl.iter().map(move |n| (lh, n)))
            .collect();
        if self.mode != ParamMode::Custom {
            for w in flat.windows(2) {
                if w[0].1.f >= w[1].1.f {
                    failures.push(format!("f does not increase at level {}", w[1].0));
                }
            }
        }
        for (idx, &(lh, node)) in flat.iter().enumerate() {
            let smaller: Vec<&BigUint> = flat.iter().map(|(_, n)| &n.f).filter(|f| **f < node.f).collect();
            let prod: BigUint = smaller.iter().copied().product();
            let width = BigUint::from(self.levels[lh].len());
            let (offset, bound) = match self.mode {
                ParamMode::Exact => {
                    let sum: BigUint = smaller.iter().copied().sum();
                    match u64::try_from(&sum) {
                        Ok(e) => (EXACT_SCALE, BigUint::one() << e),
                        Err(_) => {
                            failures.push(format!("node {idx}: exponent too large to check"));
                            continue;
                        }
                    }
                }
                ParamMode::Toy => (self.toy_scale, prod.clone()),
                ParamMode::Custom => continue,
            };
            if node.g <= width * &prod * (offset + lh as u64) {
                failures.push(format!("g too small at node {idx} of level {lh}"));
            }
            if node.f <= &node.g * &bound {
                failures.push(format!("f too small at node {idx} of level {lh}"));
            }
        }
        failures
    }
}

/// A norm value; a full successor set has infinite norm.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Norm {
    Finite(BigRational),
    Infinite,
}

impl Norm {
    pub fn from_integer(n: u64) -> Norm {
        Norm::Finite(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn divided(&self, m: usize) -> Norm {
        match self {
            Norm::Finite(q) => Norm::Finite(q / BigRational::from_integer(BigInt::from(m))),
            Norm::Infinite => Norm::Infinite,
        }
    }

    pub fn at_least(&self, bound: &BigRational) -> bool {
        match self {
            Norm::Finite(q) => q >= bound,
            Norm::Infinite => true,
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Norm::Finite(q) => write!(f, "{q}"),
            Norm::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Norm {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            Norm::Finite(q) => crate::exact::serialize(q, ser),
            Norm::Infinite => ser.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Norm {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Norm, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            Pair(Rat),
        }
        match Raw::deserialize(de)? {
            Raw::Word(w) if w == "inf" => Ok(Norm::Infinite),
            Raw::Word(w) => Err(D::Error::custom(format!("unknown norm `{w}`"))),
            Raw::Pair(q) => Ok(Norm::Finite(q.0)),
        }
    }
}

/// `g / removed`, infinite when nothing is removed.
pub fn norm_value(g: &BigUint, removed: usize) -> Norm {
    if removed == 0 {
        Norm::Infinite
    } else {
        Norm::Finite(BigRational::new(BigInt::from(g.clone()), BigInt::from(removed)))
    }
}

/// A successor set of `node`, given by the successors it leaves out.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SuccSet {
    pub node: FinSeq,
    pub removed: BTreeSet<u64>,
}

fn check_removed(data: &NodeData, node: &FinSeq, removed: &BTreeSet<u64>) -> Result<(), NormError> {
    match removed.iter().next_back() {
        Some(&v) if BigUint::from(v) >= data.f => Err(NormError::RemovedOutOfRange {
            node: node.clone(),
            value: v,
        }),
        _ => Ok(()),
    }
}

pub fn norm_of(params: &TreeParams, node: &FinSeq, removed: &BTreeSet<u64>) -> Result<Norm, NormError> {
    let data = params.node(node)?;
    check_removed(data, node, removed)?;
    Ok(norm_value(&data.g, removed.len()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intersection {
    pub set: SuccSet,
    pub norm: Norm,
    /// The least norm among the inputs.
    pub zeta: Norm,
    /// `zeta / m`, which `norm` never falls below.
    pub lower_bound: Norm,
    /// Whether the inputs meet the hypotheses forcing a nonempty intersection.
    pub nonempty_guaranteed: bool,
    pub nonempty: bool,
}

pub fn intersect_norm(params: &TreeParams, node: &FinSeq, sets: &[SuccSet]) -> Result<Intersection, NormError> {
    if sets.is_empty() {
        return Err(NormError::NoSets);
    }
    if sets.iter().any(|s| &s.node != node) {
        return Err(NormError::NodeMismatch);
    }
    let data = params.node(node)?;
    let mut union = BTreeSet::new();
    let mut zeta = Norm::Infinite;
    for s in sets {
        check_removed(data, node, &s.removed)?;
        zeta = zeta.min(norm_value(&data.g, s.removed.len()));
        union.extend(s.removed.iter().copied());
    }
    let norm = norm_value(&data.g, union.len());
    let m = sets.len();
    let nonempty_guaranteed = zeta.at_least(&BigRational::one()) && BigUint::from(m) <= data.product_bound;
    let nonempty = BigUint::from(union.len()) < data.f;
    Ok(Intersection {
        set: SuccSet {
            node: node.clone(),
            removed: union,
        },
        norm,
        lower_bound: zeta.divided(m),
        zeta,
        nonempty_guaranteed,
        nonempty,
    })
}

/// The same arithmetic on nodes with at most 64 successors, with removed
/// sets as bitmasks and rationals kept unreduced. Meant for exhaustive sweeps.
pub mod small {
    use std::cmp::Ordering;

    /// `num / den`; `den = 0` stands for infinity.
    #[derive(Clone, Copy, Debug)]
    pub struct SmallNorm {
        pub num: u64,
        pub den: u64,
    }

    impl SmallNorm {
        pub const INFINITE: SmallNorm = SmallNorm { num: 1, den: 0 };

        pub fn is_infinite(&self) -> bool {
            self.den == 0
        }

        pub fn divided(self, m: u64) -> SmallNorm {
            if self.is_infinite() {
                self
            } else {
                SmallNorm {
                    num: self.num,
                    den: self.den * m,
                }
            }
        }
    }

    impl PartialEq for SmallNorm {
        fn eq(&self, other: &Self) -> bool {
            self.cmp(other) == Ordering::Equal
        }
    }

    impl Eq for SmallNorm {}

    impl PartialOrd for SmallNorm {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }

    impl Ord for SmallNorm {
        fn cmp(&self, other: &Self) -> Ordering {
            match (self.is_infinite(), other.is_infinite()) {
                (true, true) => Ordering::Equal,
                (true, false) => Ordering::Greater,
                (false, true) => Ordering::Less,
                _ => (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128)),
            }
        }
    }

    pub fn norm(g: u64, removed: u64) -> SmallNorm {
        SmallNorm {
            num: g,
            den: removed.count_ones() as u64,
        }
    }

    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    pub struct SmallIntersection {
        pub removed: u64,
        pub norm: SmallNorm,
        pub zeta: SmallNorm,
        pub lower_bound: SmallNorm,
    }

    pub fn intersect(g: u64, sets: &[u64]) -> SmallIntersection {
        let mut removed = 0u64;
        let mut zeta = SmallNorm::INFINITE;
        for &s in sets {
            removed |= s;
            zeta = zeta.min(norm(g, s));
        }
        SmallIntersection {
            removed,
            norm: norm(g, removed),
            zeta,
            lower_bound: zeta.divided(sets.len().max(1) as u64),
        }
    }

    /// `norm ≥ 1`.
    pub fn at_least_one(n: SmallNorm) -> bool {
        n.is_infinite() || n.num >= n.den
    }
}

/// A finite tree above `root` whose leaves sit at length `height`. Nodes
/// without an entry keep all their successors.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawTree", into = "RawTree")]
pub struct FiniteNormTree {
    root: FinSeq,
    height: usize,
    removed: BTreeMap<FinSeq, BTreeSet<u64>>,
}

#[derive(Serialize, Deserialize)]
struct RawTree {
    root: FinSeq,
    height: usize,
    removed: Vec<SuccSet>,
}

impl TryFrom<RawTree> for FiniteNormTree {
    type Error = NormError;

    fn try_from(raw: RawTree) -> Result<Self, NormError> {
        let mut map = BTreeMap::new();
        for s in raw.removed {
            if map.insert(s.node.clone(), s.removed).is_some() {
                return Err(NormError::Invalid(format!("node `{}` listed twice", s.node)));
            }
        }
        FiniteNormTree::new(raw.root, raw.height, map)
    }
}

impl From<FiniteNormTree> for RawTree {
    fn from(t: FiniteNormTree) -> Self {
        RawTree {
            root: t.root,
            height: t.height,
            removed: t
                .removed
                .into_iter()
                .map(|(node, removed)| SuccSet { node, removed })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum TreeViolation {
    NotInTree,
    Unreachable,
    RemovedOutOfRange { value: u64 },
    NoSuccessors,
    NormBelowLength { norm: Norm },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TreeCheck {
    Ok,
    Violation { node: FinSeq, violation: TreeViolation },
}

impl FiniteNormTree {
    pub fn new(root: FinSeq, height: usize, removed: BTreeMap<FinSeq, BTreeSet<u64>>) -> Result<Self, NormError> {
        if height < root.len() {
            return Err(NormError::Invalid(format!("height {height} is below the root")));
        }
        for node in removed.keys() {
            if !root.is_prefix_of(node) || node.len() >= height {
                return Err(NormError::Invalid(format!(
                    "node `{node}` is not an inner node of the tree"
                )));
            }
        }
        let removed = removed.into_iter().filter(|(_, r)| !r.is_empty()).collect();
        Ok(FiniteNormTree { root, height, removed })
    }

    /// The tree with every successor kept.
    pub fn full(root: FinSeq, height: usize) -> Result<Self, NormError> {
        FiniteNormTree::new(root, height, BTreeMap::new())
    }

    pub fn root(&self) -> &FinSeq {
        &self.root
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn removed(&self) -> &BTreeMap<FinSeq, BTreeSet<u64>> {
        &self.removed
    }

    pub fn removed_at(&self, node: &FinSeq) -> Option<&BTreeSet<u64>> {
        self.removed.get(node)
    }

    /// Whether `node` (extending the root) survives every removal above it.
    pub fn reaches(&self, node: &FinSeq) -> bool {
        if !self.root.is_prefix_of(node) || node.len() > self.height {
            return false;
        }
        (self.root.len()..node.len()).all(|k| {
            let c = node.as_slice()[k];
            self.removed.get(&node.restrict(k)).is_none_or(|r| !r.contains(&c))
        })
    }

    pub fn truncate(&self, height: usize) -> Result<FiniteNormTree, NormError> {
        let kept = self
            .removed
            .iter()
            .filter(|(n, _)| n.len() < height)
            .map(|(n, r)| (n.clone(), r.clone()));
        FiniteNormTree::new(self.root.clone(), height.min(self.height), kept.collect())
    }

    /// Adds levels up to `height`, with removals only on the new levels.
    pub fn end_extend(
        &self,
        height: usize,
        extra: BTreeMap<FinSeq, BTreeSet<u64>>,
    ) -> Result<FiniteNormTree, NormError> {
        if height < self.height {
            return Err(NormError::Invalid("an end extension cannot lower the height".into()));
        }
        let mut removed = self.removed.clone();
        for (node, r) in extra {
            if node.len() < self.height {
                return Err(NormError::Invalid(format!("node `{node}` lies below the old height")));
            }
            removed.insert(node, r);
        }
        FiniteNormTree::new(self.root.clone(), height, removed)
    }

    /// Per level from the root up, the least norm of a reachable inner node.
    pub fn level_min_norms(&self, params: &TreeParams) -> Result<Vec<(usize, Norm)>, NormError> {
        let mut out: Vec<(usize, Norm)> = (self.root.len()..self.height).map(|lh| (lh, Norm::Infinite)).collect();
        for (node, r) in &self.removed {
            if !self.reaches(node) {
                continue;
            }
            let n = norm_of(params, node, r)?;
            let slot = &mut out[node.len() - self.root.len()].1;
            if n < *slot {
                *slot = n;
            }
        }
        Ok(out)
    }

    fn structure_violation(&self, params: &TreeParams) -> Option<(FinSeq, TreeViolation)> {
        if !params.contains(&self.root) || self.height > params.depth() {
            return Some((self.root.clone(), TreeViolation::NotInTree));
        }
        for (node, r) in &self.removed {
            let Ok(data) = params.node(node) else {
                return Some((node.clone(), TreeViolation::NotInTree));
            };
            if !params.contains(node) {
                return Some((node.clone(), TreeViolation::NotInTree));
            }
            if !self.reaches(node) {
                return Some((node.clone(), TreeViolation::Unreachable));
            }
            if let Err(NormError::RemovedOutOfRange { value, .. }) = check_removed(data, node, r) {
                return Some((node.clone(), TreeViolation::RemovedOutOfRange { value }));
            }
            if BigUint::from(r.len()) >= data.f {
                return Some((node.clone(), TreeViolation::NoSuccessors));
            }
        }
        None
    }
}

/// Every inner node at or above the root keeps a successor set of norm at
/// least its own length.
pub fn qeta_check(params: &TreeParams, t: &FiniteNormTree) -> TreeCheck {
    if let Some((node, violation)) = t.structure_violation(params) {
        return TreeCheck::Violation { node, violation };
    }
    for (node, r) in &t.removed {
        let data = params.node(node).expect("structure was checked");
        let norm = norm_value(&data.g, r.len());
        if !norm.at_least(&BigRational::from_integer(BigInt::from(node.len()))) {
            return TreeCheck::Violation {
                node: node.clone(),
                violation: TreeViolation::NormBelowLength { norm },
            };
        }
    }
    TreeCheck::Ok
}

/// `t1 ≤ t2`: `t2` end-extends `t1`.
pub fn qeta_leq(t1: &FiniteNormTree, t2: &FiniteNormTree) -> Result<bool, NormError> {
    if t1.root != t2.root {
        return Err(NormError::RootMismatch);
    }
    Ok(t2.height >= t1.height && &t2.truncate(t1.height)? == t1)
}

/// The union of a chain of end extensions.
pub fn union_chain(chain: &[FiniteNormTree]) -> Result<FiniteNormTree, NormError> {
    let first = chain.first().ok_or(NormError::NoSets)?;
    for w in chain.windows(2) {
        if !qeta_leq(&w[0], &w[1])? {
            return Err(NormError::Invalid("the trees do not form a chain".into()));
        }
    }
    let mut removed = first.removed.clone();
    let mut height = first.height;
    for t in &chain[1..] {
        removed.extend(t.removed.iter().map(|(n, r)| (n.clone(), r.clone())));
        height = height.max(t.height);
    }
    FiniteNormTree::new(first.root.clone(), height, removed)
}

/// A tree known up to its height, together with promised lower bounds on
/// the least norm of each level. Levels past the schedule are promised the
/// last scheduled bound plus `tail_increment` per level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct P2Approx {
    pub tree: Option<FiniteNormTree>,
    pub schedule: Vec<Rat>,
    pub tail_increment: Rat,
}

impl P2Approx {
    pub fn promised(&self, level: usize) -> BigRational {
        match self.schedule.get(level) {
            Some(q) => q.0.clone(),
            None => {
                let (base, at) = match self.schedule.last() {
                    Some(q) => (q.0.clone(), self.schedule.len() - 1),
                    None => (BigRational::zero(), 0),
                };
                let steps = BigRational::from_integer(BigInt::from(level - at));
                base + &self.tail_increment.0 * steps
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum P2Check {
    Ok,
    NoRoot,
    NotDivergent,
    Structure { node: FinSeq, violation: TreeViolation },
    BelowSchedule { level: usize, min: Norm, promised: Rat },
}

pub fn p2_check(params: &TreeParams, a: &P2Approx) -> P2Check {
    let Some(tree) = &a.tree else {
        return P2Check::NoRoot;
    };
    if a.tail_increment.0 <= BigRational::zero() {
        return P2Check::NotDivergent;
    }
    if let Some((node, violation)) = tree.structure_violation(params) {
        return P2Check::Structure { node, violation };
    }
    let mins = tree.level_min_norms(params).expect("structure was checked");
    for (level, min) in mins {
        let promised = a.promised(level);
        if !min.at_least(&promised) {
            return P2Check::BelowSchedule {
                level,
                min,
                promised: Rat(promised),
            };
        }
    }
    P2Check::Ok
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimWitness {
    /// The node shared by every chosen tree.
    pub rho: FinSeq,
    /// Indices into the tuple family.
    pub members: Vec<usize>,
}

/// Looks for a node `ρ` of length `n_sharp + 1` such that the tuples whose
/// trees contain `ρ` have empty intersection in every coordinate.
///
/// `tuples[a][k]` is a successor set of the `k`-th node of length `n_sharp`;
/// `trees[a]` lists the nodes of length `n_sharp + 1` in the tree of tuple `a`.
pub fn claim_search(
    params: &TreeParams,
    tuples: &[Vec<SuccSet>],
    trees: &[BTreeSet<FinSeq>],
    n_sharp: usize,
) -> Result<Option<ClaimWitness>, NormError> {
    if tuples.len() != trees.len() {
        return Err(NormError::Invalid("one tree is needed per tuple".into()));
    }
    let Some(first) = tuples.first() else {
        return Ok(None);
    };
    let coords: Vec<&FinSeq> = first.iter().map(|s| &s.node).collect();
    let bound = BigRational::from_integer(BigInt::from(n_sharp));
    for tuple in tuples {
        if tuple.len() != coords.len() || tuple.iter().zip(&coords).any(|(s, n)| &s.node != *n) {
            return Err(NormError::NodeMismatch);
        }
        for s in tuple {
            if s.node.len() != n_sharp {
                return Err(NormError::Invalid(format!(
                    "node `{}` does not have length {n_sharp}",
                    s.node
                )));
            }
            if !norm_of(params, &s.node, &s.removed)?.at_least(&bound) {
                return Err(NormError::Invalid(format!(
                    "a successor set of `{}` has norm below {n_sharp}",
                    s.node
                )));
            }
        }
    }
    let sizes: Vec<&BigUint> = coords
        .iter()
        .map(|n| params.node(n).map(|d| &d.f))
        .collect::<Result<_, _>>()?;
    let candidates: BTreeSet<&FinSeq> = trees.iter().flatten().filter(|r| r.len() == n_sharp + 1).collect();
    for rho in candidates {
        let members: Vec<usize> = (0..tuples.len()).filter(|&a| trees[a].contains(rho)).collect();
        let all_empty = (0..coords.len()).all(|k| {
            let union: BTreeSet<u64> = members
                .iter()
                .flat_map(|&a| tuples[a][k].removed.iter().copied())
                .collect();
            BigUint::from(union.len()).cmp(sizes[k]) == Ordering::Equal
        });
        if all_empty {
            return Ok(Some(ClaimWitness {
                rho: rho.clone(),
                members,
            }));
        }
    }
    Ok(None)
}
