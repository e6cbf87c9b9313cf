//! Sequences over the naturals, the sigma family with its block-realisation
//! property, the maps `f_i`, the relations `R_i` and sunflower extraction.
//!
//! Infinite sequences are represented as eventually-constant sequences
//! ([`EvConstSeq`]) so that equality and `f_i`-images stay decidable.
//!
//! The sigma family is built by a deterministic schedule of *star requests*
//! `(N, φ_0..φ_{k-1})`. Processing a request at the current bound `m0` sets
//! `σ_i(m0 + j) = m0 + φ_i(j)` and then closes every table with the identity
//! up to the new bound `m1 = max(m0, 1 + largest value mentioned)`. The block
//! `m0..m0+N` is recorded as the witness for the request.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard ceiling on the sigma-table bound unless overridden.
pub const DEFAULT_BOUND_CAP: u64 = 1 << 22;

/// Families up to this size are searched exhaustively first; larger ones try
/// a greedy pass per kernel before the exhaustive fallback.
pub const SUNFLOWER_EXHAUSTIVE_LIMIT: usize = 40;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeqError {
    #[error("sigma tables would exceed the bound cap {cap} (value {needed} requested)")]
    BoundExceeded { needed: u64, cap: u64 },
    #[error("invalid schedule configuration: {0}")]
    BadSchedule(String),
    #[error("malformed star request: {0}")]
    BadRequest(String),
    #[error("malformed sigma table text: {0}")]
    Parse(String),
    #[error("a sunflower needs at least two petals, got {0}")]
    BadPetalCount(usize),
}

/// A finite sequence of naturals, an element of `ω^{<ω}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FinSeq(pub Vec<u64>);

impl FinSeq {
    pub fn new(items: Vec<u64>) -> Self {
        FinSeq(items)
    }

    pub fn empty() -> Self {
        FinSeq(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<u64> {
        self.0.get(k).copied()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    /// `s↾k`; saturates at the full sequence when `k > len`.
    pub fn restrict(&self, k: usize) -> FinSeq {
        FinSeq(self.0[..k.min(self.0.len())].to_vec())
    }

    pub fn is_prefix_of(&self, other: &FinSeq) -> bool {
        other.0.starts_with(&self.0)
    }

    /// `s⌢v`
    pub fn appended(&self, v: u64) -> FinSeq {
        let mut items = self.0.clone();
        items.push(v);
        FinSeq(items)
    }
}

impl From<Vec<u64>> for FinSeq {
    fn from(items: Vec<u64>) -> Self {
        FinSeq(items)
    }
}

impl FromIterator<u64> for FinSeq {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        FinSeq(iter.into_iter().collect())
    }
}

impl fmt::Display for FinSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        write!(f, "{}", parts.join(" "))
    }
}

impl FromStr for FinSeq {
    type Err = SeqError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split_whitespace()
            .map(|tok| {
                tok.parse::<u64>()
                    .map_err(|_| SeqError::Parse(format!("bad sequence value `{tok}`")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(FinSeq)
    }
}

/// An eventually constant element of Baire space: `prefix` followed by
/// `tail` repeated forever.
///
/// Values are kept canonical (no trailing prefix entries equal to the tail),
/// so structural equality is equality of the infinite sequences.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "RawEvConstSeq", into = "RawEvConstSeq")]
pub struct EvConstSeq {
    prefix: FinSeq,
    tail: u64,
}

#[derive(Serialize, Deserialize)]
struct RawEvConstSeq {
    prefix: FinSeq,
    tail: u64,
}

impl From<RawEvConstSeq> for EvConstSeq {
    fn from(raw: RawEvConstSeq) -> Self {
        EvConstSeq::new(raw.prefix, raw.tail)
    }
}

impl From<EvConstSeq> for RawEvConstSeq {
    fn from(x: EvConstSeq) -> Self {
        RawEvConstSeq {
            prefix: x.prefix,
            tail: x.tail,
        }
    }
}

impl EvConstSeq {
    pub fn new(prefix: FinSeq, tail: u64) -> Self {
        let mut items = prefix.0;
        while items.last() == Some(&tail) {
            items.pop();
        }
        EvConstSeq {
            prefix: FinSeq(items),
            tail,
        }
    }

    pub fn constant(v: u64) -> Self {
        EvConstSeq {
            prefix: FinSeq::empty(),
            tail: v,
        }
    }

    pub fn prefix(&self) -> &FinSeq {
        &self.prefix
    }

    pub fn tail(&self) -> u64 {
        self.tail
    }

    pub fn value(&self, k: usize) -> u64 {
        self.prefix.get(k).unwrap_or(self.tail)
    }

    /// `x↾n`
    pub fn restrict(&self, n: usize) -> FinSeq {
        (0..n).map(|k| self.value(k)).collect()
    }

    /// Least `k` with `self(k) != other(k)`, or `None` when equal.
    pub fn first_difference(&self, other: &EvConstSeq) -> Option<usize> {
        let span = self.prefix.len().max(other.prefix.len());
        (0..span)
            .find(|&k| self.value(k) != other.value(k))
            .or_else(|| (self.tail != other.tail).then_some(span))
    }

    /// Every value the sequence takes.
    pub fn values(&self) -> impl Iterator<Item = u64> + '_ {
        self.prefix.0.iter().copied().chain(std::iter::once(self.tail))
    }
}

impl fmt::Display for EvConstSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.prefix.is_empty() {
            write!(f, ";{}", self.tail)
        } else {
            write!(f, "{};{}", self.prefix, self.tail)
        }
    }
}

impl FromStr for EvConstSeq {
    type Err = SeqError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, tail) = s
            .split_once(';')
            .ok_or_else(|| SeqError::Parse(format!("expected `prefix;tail`, got `{s}`")))?;
        let tail = tail
            .trim()
            .parse::<u64>()
            .map_err(|_| SeqError::Parse(format!("bad tail in `{s}`")))?;
        Ok(EvConstSeq::new(head.parse()?, tail))
    }
}

/// A request `(N, φ_0..φ_{k-1})` for `N` distinct points `n_0..n_{N-1}` with
/// `φ_i(j0) = j1 ⇒ σ_i(n_{j0}) = n_{j1}`.
///
/// Each row has length `N`. A value `≥ N` places no constraint.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StarRequest {
    pub points: usize,
    pub phis: Vec<Vec<u64>>,
}

impl StarRequest {
    pub fn new(points: usize, phis: Vec<Vec<u64>>) -> Result<Self, SeqError> {
        if let Some(row) = phis.iter().find(|row| row.len() != points) {
            return Err(SeqError::BadRequest(format!(
                "row of length {} for {} points",
                row.len(),
                points
            )));
        }
        Ok(StarRequest { points, phis })
    }

    /// Builds a request from partial maps, dropping trailing rows without constraints.
    pub fn from_partial(points: usize, rows: &[Vec<Option<usize>>]) -> Self {
        let mut phis: Vec<Vec<u64>> = rows
            .iter()
            .map(|row| {
                (0..points)
                    .map(|j| match row.get(j).copied().flatten() {
                        Some(target) => target as u64,
                        None => points as u64,
                    })
                    .collect()
            })
            .collect();
        while phis.last().is_some_and(|row| row.iter().all(|&v| v >= points as u64)) {
            phis.pop();
        }
        StarRequest { points, phis }
    }

    /// `(i, j0, j1)` for every binding constraint `φ_i(j0) = j1 < N`.
    pub fn constraints(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.phis.iter().enumerate().flat_map(move |(i, row)| {
            row.iter()
                .enumerate()
                .filter(move |&(_, &v)| v < self.points as u64)
                .map(move |(j0, &v)| (i, j0, v as usize))
        })
    }

    fn max_value(&self) -> u64 {
        self.phis.iter().flatten().copied().max().unwrap_or(0)
    }
}

impl fmt::Display for StarRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .phis
            .iter()
            .map(|row| {
                if row.is_empty() {
                    "-".to_string()
                } else {
                    row.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
                }
            })
            .collect();
        write!(f, "{} [{}]", self.points, rows.join(";"))
    }
}

impl FromStr for StarRequest {
    type Err = SeqError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SeqError::Parse(format!("bad star request `{s}`"));
        let (points, rest) = s.trim().split_once(' ').ok_or_else(bad)?;
        let points: usize = points.parse().map_err(|_| bad())?;
        let body = rest
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(bad)?;
        let phis = if body.is_empty() {
            Vec::new()
        } else {
            body.split(';')
                .map(|row| {
                    if row == "-" {
                        Ok(Vec::new())
                    } else {
                        row.split(',').map(|v| v.parse::<u64>().map_err(|_| bad())).collect()
                    }
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        StarRequest::new(points, phis)
    }
}

/// The deterministic enumeration of star requests with `N ≤ max_points` and
/// all `φ` values below `value_bound`.
///
/// Requests are grouped by `N`; round `r` takes entry `(r + seed) mod size(N)`
/// from every class that still has an `r`-th entry, in increasing `N`. The
/// enumeration then repeats, so the schedule never runs dry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub max_points: usize,
    pub value_bound: u64,
    pub seed: u64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            max_points: 3,
            value_bound: 3,
            seed: 0,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<(), SeqError> {
        if self.max_points == 0 {
            return Err(SeqError::BadSchedule("max_points must be at least 1".into()));
        }
        if self.value_bound == 0 {
            return Err(SeqError::BadSchedule("value_bound must be at least 1".into()));
        }
        let bits = (self.max_points * self.max_points) as f64 * (self.value_bound as f64).log2();
        if bits > 60.0 {
            return Err(SeqError::BadSchedule(format!(
                "schedule classes too large ({} points, values < {})",
                self.max_points, self.value_bound
            )));
        }
        Ok(())
    }

    fn class_size(&self, points: usize) -> u64 {
        self.value_bound.pow((points * points) as u32)
    }

    /// Number of distinct requests before the schedule repeats.
    pub fn period(&self) -> u64 {
        (0..=self.max_points).map(|n| self.class_size(n)).sum()
    }

    fn entries_before_round(&self, round: u64) -> u64 {
        (0..=self.max_points).map(|n| self.class_size(n).min(round)).sum()
    }

    /// The request at absolute schedule position `pos`.
    pub fn entry(&self, pos: u64) -> StarRequest {
        let p = pos % self.period();
        let largest = self.class_size(self.max_points);
        // Largest round whose start is at or before p.
        let (mut lo, mut hi) = (0u64, largest);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if self.entries_before_round(mid) <= p {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let round = lo;
        let offset = p - self.entries_before_round(round);
        let points = (0..=self.max_points)
            .filter(|&n| self.class_size(n) > round)
            .nth(offset as usize)
            .expect("offset lies inside the round");
        let size = self.class_size(points);
        let mut index = (round + self.seed % size) % size;
        let mut digits = vec![0u64; points * points];
        for d in digits.iter_mut().rev() {
            *d = index % self.value_bound;
            index /= self.value_bound;
        }
        let phis = digits.chunks(points.max(1)).take(points).map(<[u64]>::to_vec).collect();
        StarRequest { points, phis }
    }
}

/// Where a recorded witness block came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Scheduled(u64),
    Demand,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub origin: Origin,
    pub request: StarRequest,
    pub start: u64,
}

impl Block {
    pub fn witness(&self) -> Vec<u64> {
        (self.start..self.start + self.request.points as u64).collect()
    }
}

/// The lazily extended family `⟨σ_i⟩`.
///
/// Every table is defined on `0..bound` and maps it into itself. Rows past
/// `tables.len()` are the identity on `0..bound`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SigmaFamily {
    config: ScheduleConfig,
    bound: u64,
    bound_cap: u64,
    tables: Vec<Vec<u64>>,
    cursor: u64,
    history: Vec<Block>,
    index: HashMap<StarRequest, usize>,
}

/// Outcome of an `F`-membership query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    Yes(usize),
    No,
    Unknown,
}

impl SigmaFamily {
    pub fn new(config: ScheduleConfig) -> Result<Self, SeqError> {
        config.validate()?;
        Ok(SigmaFamily {
            config,
            bound: 0,
            bound_cap: DEFAULT_BOUND_CAP,
            tables: Vec::new(),
            cursor: 0,
            history: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn with_bound_cap(mut self, cap: u64) -> Self {
        self.bound_cap = cap;
        self
    }

    pub fn config(&self) -> &ScheduleConfig {
        &self.config
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    /// Length of the defined initial segment of `σ_i`.
    pub fn defined_upto(&self, _i: usize) -> u64 {
        self.bound
    }

    /// Number of scheduled entries processed so far.
    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    pub fn history(&self) -> &[Block] {
        &self.history
    }

    pub fn rows(&self) -> usize {
        self.tables.len()
    }

    /// `σ_i(v)` if it is already defined.
    pub fn sigma(&self, i: usize, v: u64) -> Option<u64> {
        if v >= self.bound {
            return None;
        }
        Some(self.tables.get(i).map_or(v, |row| row[v as usize]))
    }

    /// `σ_i(v)`, running the schedule forward until `v` is in range.
    pub fn sigma_at(&mut self, i: usize, v: u64) -> Result<u64, SeqError> {
        self.ensure_defined(v)?;
        Ok(self.sigma(i, v).expect("defined after extension"))
    }

    /// Runs the schedule until every value `≤ v` is in the domain.
    pub fn ensure_defined(&mut self, v: u64) -> Result<(), SeqError> {
        if v >= self.bound_cap {
            return Err(SeqError::BoundExceeded {
                needed: v,
                cap: self.bound_cap,
            });
        }
        while self.bound <= v {
            self.extend(1)?;
        }
        Ok(())
    }

    /// Processes the next `steps` schedule entries in place.
    pub fn extend(&mut self, steps: u64) -> Result<(), SeqError> {
        for _ in 0..steps {
            let request = self.config.entry(self.cursor);
            self.process(request, Origin::Scheduled(self.cursor))?;
            self.cursor += 1;
        }
        Ok(())
    }

    /// Returns a copy extended by `steps` schedule entries.
    pub fn sigma_extend(&self, steps: u64) -> Result<SigmaFamily, SeqError> {
        let mut next = self.clone();
        next.extend(steps)?;
        Ok(next)
    }

    /// Processes an off-schedule request and returns its block start.
    pub fn demand(&mut self, request: StarRequest) -> Result<u64, SeqError> {
        self.process(request, Origin::Demand)
    }

    fn process(&mut self, request: StarRequest, origin: Origin) -> Result<u64, SeqError> {
        let m0 = self.bound;
        let n = request.points as u64;
        if n > 0 {
            let top = m0 + (n - 1).max(request.max_value());
            let m1 = self.bound.max(top + 1);
            if m1 > self.bound_cap {
                return Err(SeqError::BoundExceeded {
                    needed: m1,
                    cap: self.bound_cap,
                });
            }
            while self.tables.len() < request.phis.len() {
                self.tables.push((0..self.bound).collect());
            }
            for row in &mut self.tables {
                row.extend(m0..m1);
            }
            for (i, phi) in request.phis.iter().enumerate() {
                for (j0, &v) in phi.iter().enumerate() {
                    self.tables[i][(m0 + j0 as u64) as usize] = m0 + v;
                }
            }
            self.bound = m1;
        }
        self.index.entry(request.clone()).or_insert(self.history.len());
        self.history.push(Block {
            origin,
            request,
            start: m0,
        });
        Ok(m0)
    }

    /// Independent check that `witness` realises `request` in the defined region.
    pub fn check_star(&self, request: &StarRequest, witness: &[u64]) -> bool {
        if witness.len() != request.points {
            return false;
        }
        let distinct: HashSet<u64> = witness.iter().copied().collect();
        if distinct.len() != witness.len() || witness.iter().any(|&v| v >= self.bound) {
            return false;
        }
        request
            .constraints()
            .all(|(i, j0, j1)| self.sigma(i, witness[j0]) == Some(witness[j1]))
    }

    /// Looks for distinct `n_0..n_{N-1}` inside the defined region realising `request`.
    ///
    /// Recorded blocks for the identical request are returned first; otherwise
    /// a complete backtracking search runs over `0..bound`.
    pub fn verify_star(&self, request: &StarRequest) -> Option<Vec<u64>> {
        if request.points == 0 {
            return Some(Vec::new());
        }
        if let Some(&h) = self.index.get(request) {
            let witness = self.history[h].witness();
            if self.check_star(request, &witness) {
                return Some(witness);
            }
        }
        StarSearch::new(self, request).solve()
    }

    /// A witness for `request`, processing it on demand when the defined
    /// region has no recorded block for it.
    pub fn realise(&mut self, request: StarRequest) -> Result<Vec<u64>, SeqError> {
        if let Some(&h) = self.index.get(&request) {
            return Ok(self.history[h].witness());
        }
        let start = self.demand(request.clone())?;
        Ok((start..start + request.points as u64).collect())
    }

    /// `f_i(s)`: identity below `i`, `σ_i` from `i` on.
    pub fn f_apply(&mut self, i: usize, s: &FinSeq) -> Result<FinSeq, SeqError> {
        s.0.iter()
            .enumerate()
            .map(|(k, &v)| if k < i { Ok(v) } else { self.sigma_at(i, v) })
            .collect::<Result<Vec<_>, _>>()
            .map(FinSeq)
    }

    /// `f_i(x)` on an eventually constant sequence.
    pub fn f_apply_ev(&mut self, i: usize, x: &EvConstSeq) -> Result<EvConstSeq, SeqError> {
        let span = x.prefix().len().max(i);
        let mut items = Vec::with_capacity(span);
        for k in 0..span {
            let v = x.value(k);
            items.push(if k < i { v } else { self.sigma_at(i, v)? });
        }
        let tail = self.sigma_at(i, x.tail())?;
        Ok(EvConstSeq::new(FinSeq(items), tail))
    }

    /// `s R_i t`: `i < |s| = |t|`, `s↾i = t↾i` and `s(l) = σ_i(t(l))` for `l ≥ i`.
    pub fn rel_r(&mut self, i: usize, s: &FinSeq, t: &FinSeq) -> Result<bool, SeqError> {
        if s.len() != t.len() || i >= s.len() || s.0[..i] != t.0[..i] {
            return Ok(false);
        }
        for l in i..s.len() {
            if s.0[l] != self.sigma_at(i, t.0[l])? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Decides `x ∈ F(y) = {f_i(y)}`.
    ///
    /// For `x ≠ y` only `i ≤ h(x, y)` can work, so the answer is exact. For
    /// `x = y` the indices `i < i_max` are tried and `Unknown` is returned
    /// when none of them fixes `y`.
    pub fn f_membership(&mut self, x: &EvConstSeq, y: &EvConstSeq, i_max: usize) -> Result<Membership, SeqError> {
        let candidates = match x.first_difference(y) {
            Some(d) => d + 1,
            None => i_max,
        };
        for i in 0..candidates {
            if &self.f_apply_ev(i, y)? == x {
                return Ok(Membership::Yes(i));
            }
        }
        Ok(if x == y { Membership::Unknown } else { Membership::No })
    }

    /// Rebuilds a family from its configuration and block history.
    pub fn replay(config: ScheduleConfig, history: &[Block]) -> Result<SigmaFamily, SeqError> {
        let mut fam = SigmaFamily::new(config)?;
        for block in history {
            match block.origin {
                Origin::Scheduled(pos) => {
                    if pos != fam.cursor || config.entry(pos) != block.request {
                        return Err(SeqError::Parse(format!(
                            "history entry at position {pos} does not match the schedule"
                        )));
                    }
                    fam.extend(1)?;
                }
                Origin::Demand => {
                    fam.demand(block.request.clone())?;
                }
            }
            if fam.history.last().map(|b| b.start) != Some(block.start) {
                return Err(SeqError::Parse("block start does not replay".into()));
            }
        }
        Ok(fam)
    }

    /// Canonical text form: a header, one table line per row and one line per block.
    ///
    /// ```text
    /// sigma-family bound=6 cursor=3 max_points=3 value_bound=3 seed=0 rows=2
    /// 0: 0 1 2 3 4 5 | defined<6 identity-beyond-rows
    /// block scheduled 0 0 0 []
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "sigma-family bound={} cursor={} max_points={} value_bound={} seed={} rows={}\n",
            self.bound,
            self.cursor,
            self.config.max_points,
            self.config.value_bound,
            self.config.seed,
            self.tables.len()
        );
        for (i, row) in self.tables.iter().enumerate() {
            let values: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&format!("{i}: {} | defined<{}\n", values.join(" "), self.bound));
        }
        for block in &self.history {
            let origin = match block.origin {
                Origin::Scheduled(pos) => format!("scheduled {pos}"),
                Origin::Demand => "demand -".to_string(),
            };
            out.push_str(&format!("block {origin} {} {}\n", block.start, block.request));
        }
        out
    }

    /// Parses [`SigmaFamily::to_text`] output, replaying the history and
    /// rejecting tables that do not match the replay.
    pub fn from_text(text: &str) -> Result<SigmaFamily, SeqError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| SeqError::Parse("empty input".into()))?;
        let mut fields: HashMap<&str, u64> = HashMap::new();
        let mut words = header.split_whitespace();
        if words.next() != Some("sigma-family") {
            return Err(SeqError::Parse("missing `sigma-family` header".into()));
        }
        for word in words {
            let (k, v) = word
                .split_once('=')
                .ok_or_else(|| SeqError::Parse(format!("bad header field `{word}`")))?;
            let v = v
                .parse::<u64>()
                .map_err(|_| SeqError::Parse(format!("bad header value `{word}`")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| SeqError::Parse(format!("header lacks `{k}`")))
        };
        let config = ScheduleConfig {
            max_points: get("max_points")? as usize,
            value_bound: get("value_bound")?,
            seed: get("seed")?,
        };
        let mut tables = Vec::new();
        let mut history = Vec::new();
        for line in lines {
            if let Some(rest) = line.strip_prefix("block ") {
                let mut parts = rest.splitn(4, ' ');
                let kind = parts.next().unwrap_or_default();
                let pos = parts.next().unwrap_or_default();
                let start = parts.next().unwrap_or_default();
                let request = parts.next().unwrap_or_default();
                let origin = match kind {
                    "scheduled" => Origin::Scheduled(
                        pos.parse()
                            .map_err(|_| SeqError::Parse(format!("bad block `{line}`")))?,
                    ),
                    "demand" => Origin::Demand,
                    _ => return Err(SeqError::Parse(format!("bad block `{line}`"))),
                };
                let start = start
                    .parse()
                    .map_err(|_| SeqError::Parse(format!("bad block `{line}`")))?;
                history.push(Block {
                    origin,
                    request: request.parse()?,
                    start,
                });
            } else {
                let (_, body) = line
                    .split_once(':')
                    .ok_or_else(|| SeqError::Parse(format!("bad table line `{line}`")))?;
                let values = body.split('|').next().unwrap_or_default();
                tables.push(values.parse::<FinSeq>()?.0);
            }
        }
        let fam = SigmaFamily::replay(config, &history)?;
        if fam.tables != tables || fam.bound != get("bound")? || fam.cursor != get("cursor")? {
            return Err(SeqError::Parse("tables do not match the replayed history".into()));
        }
        Ok(fam)
    }
}

/// Backtracking search for a star witness over the defined region.
struct StarSearch<'a> {
    fam: &'a SigmaFamily,
    points: usize,
    constraints: Vec<(usize, usize, usize)>,
    preimages: HashMap<usize, HashMap<u64, Vec<u64>>>,
}

impl<'a> StarSearch<'a> {
    fn new(fam: &'a SigmaFamily, request: &StarRequest) -> Self {
        let constraints: Vec<_> = request.constraints().collect();
        let mut preimages: HashMap<usize, HashMap<u64, Vec<u64>>> = HashMap::new();
        for &(i, _, _) in &constraints {
            preimages.entry(i).or_insert_with(|| {
                let mut inverse: HashMap<u64, Vec<u64>> = HashMap::new();
                for v in 0..fam.bound {
                    inverse.entry(fam.sigma(i, v).unwrap()).or_default().push(v);
                }
                inverse
            });
        }
        StarSearch {
            fam,
            points: request.points,
            constraints,
            preimages,
        }
    }

    /// Variables grouped into connected components, each in BFS order.
    fn components(&self) -> Vec<Vec<usize>> {
        let mut adjacency = vec![Vec::new(); self.points];
        for &(_, a, b) in &self.constraints {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let mut seen = vec![false; self.points];
        let mut out = Vec::new();
        for start in 0..self.points {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut order = Vec::new();
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                for &w in &adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            out.push(order);
        }
        out
    }

    fn candidates(&self, var: usize, assigned: &[Option<u64>]) -> Vec<u64> {
        for &(i, a, b) in &self.constraints {
            if b == var && a != var {
                if let Some(v) = assigned[a] {
                    return vec![self.fam.sigma(i, v).unwrap()];
                }
            }
        }
        for &(i, a, b) in &self.constraints {
            if a == var && b != var {
                if let Some(v) = assigned[b] {
                    return self.preimages[&i].get(&v).cloned().unwrap_or_default();
                }
            }
        }
        (0..self.fam.bound).collect()
    }

    fn consistent(&self, var: usize, assigned: &[Option<u64>]) -> bool {
        self.constraints.iter().all(|&(i, a, b)| {
            if a != var && b != var {
                return true;
            }
            match (assigned[a], assigned[b]) {
                (Some(x), Some(y)) => self.fam.sigma(i, x) == Some(y),
                _ => true,
            }
        })
    }

    fn backtrack(
        &self,
        order: &[usize],
        depth: usize,
        assigned: &mut Vec<Option<u64>>,
        used: &mut HashSet<u64>,
    ) -> bool {
        let Some(&var) = order.get(depth) else {
            return true;
        };
        for c in self.candidates(var, assigned) {
            if used.contains(&c) {
                continue;
            }
            assigned[var] = Some(c);
            if self.consistent(var, assigned) {
                used.insert(c);
                if self.backtrack(order, depth + 1, assigned, used) {
                    return true;
                }
                used.remove(&c);
            }
            assigned[var] = None;
        }
        false
    }

    fn solve(&self) -> Option<Vec<u64>> {
        let components = self.components();
        // A component with no solution at all makes the whole request fail;
        // checking that first avoids retrying it for every choice elsewhere.
        for comp in &components {
            let mut assigned = vec![None; self.points];
            if !self.backtrack(comp, 0, &mut assigned, &mut HashSet::new()) {
                return None;
            }
        }
        let order: Vec<usize> = components.concat();
        let mut assigned = vec![None; self.points];
        if self.backtrack(&order, 0, &mut assigned, &mut HashSet::new()) {
            Some(assigned.into_iter().map(|v| v.unwrap()).collect())
        } else {
            None
        }
    }
}

/// A sunflower (Δ-system): members pairwise intersecting exactly in `kernel`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sunflower {
    pub kernel: BTreeSet<u64>,
    pub indices: Vec<usize>,
}

impl Sunflower {
    /// Direct check of the kernel property against `family`.
    pub fn verify(&self, family: &[BTreeSet<u64>]) -> bool {
        let distinct: BTreeSet<usize> = self.indices.iter().copied().collect();
        if distinct.len() != self.indices.len() || self.indices.iter().any(|&i| i >= family.len()) {
            return false;
        }
        self.indices.iter().enumerate().all(|(a, &i)| {
            self.indices[a + 1..]
                .iter()
                .all(|&j| family[i].intersection(&family[j]).copied().collect::<BTreeSet<_>>() == self.kernel)
        })
    }
}

/// Finds `k` members of `family` forming a sunflower.
///
/// The kernel of any sunflower with at least two petals is the intersection of
/// two of its members, so every pairwise intersection is tried as a kernel;
/// for each, members containing it are searched for `k` pairwise disjoint
/// petals. `None` is exact.
pub fn delta_system(family: &[BTreeSet<u64>], k: usize) -> Result<Option<Sunflower>, SeqError> {
    if k < 2 {
        return Err(SeqError::BadPetalCount(k));
    }
    if family.len() < k {
        return Ok(None);
    }
    let mut kernels = BTreeSet::new();
    for (a, x) in family.iter().enumerate() {
        for y in &family[a + 1..] {
            kernels.insert(x.intersection(y).copied().collect::<BTreeSet<u64>>());
        }
    }
    if family.len() > SUNFLOWER_EXHAUSTIVE_LIMIT {
        for kernel in &kernels {
            if let Some(indices) = greedy_petals(family, kernel, k) {
                return Ok(Some(Sunflower {
                    kernel: kernel.clone(),
                    indices,
                }));
            }
        }
    }
    for kernel in kernels {
        let members: Vec<usize> = (0..family.len()).filter(|&i| family[i].is_superset(&kernel)).collect();
        if members.len() < k {
            continue;
        }
        let petals: Vec<BTreeSet<u64>> = members
            .iter()
            .map(|&i| family[i].difference(&kernel).copied().collect())
            .collect();
        let mut chosen = Vec::new();
        if pick_disjoint(&petals, 0, k, &mut chosen) {
            let indices = chosen.iter().map(|&c| members[c]).collect();
            return Ok(Some(Sunflower { kernel, indices }));
        }
    }
    Ok(None)
}

fn greedy_petals(family: &[BTreeSet<u64>], kernel: &BTreeSet<u64>, k: usize) -> Option<Vec<usize>> {
    let mut covered: BTreeSet<u64> = BTreeSet::new();
    let mut picked = Vec::new();
    for (i, set) in family.iter().enumerate() {
        if !set.is_superset(kernel) {
            continue;
        }
        let petal: BTreeSet<u64> = set.difference(kernel).copied().collect();
        if petal.is_disjoint(&covered) {
            covered.extend(petal);
            picked.push(i);
            if picked.len() == k {
                return Some(picked);
            }
        }
    }
    None
}

fn pick_disjoint(petals: &[BTreeSet<u64>], from: usize, k: usize, chosen: &mut Vec<usize>) -> bool {
    if chosen.len() == k {
        return true;
    }
    if petals.len() - from < k - chosen.len() {
        return false;
    }
    for c in from..petals.len() {
        if chosen.iter().all(|&o| petals[o].is_disjoint(&petals[c])) {
            chosen.push(c);
            if pick_disjoint(petals, c + 1, k, chosen) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam() -> SigmaFamily {
        SigmaFamily::new(ScheduleConfig::default()).unwrap()
    }

    #[test]
    fn ev_const_seq_is_canonical() {
        let x = EvConstSeq::new(FinSeq::new(vec![1, 2, 5, 5]), 5);
        assert_eq!(x, EvConstSeq::new(FinSeq::new(vec![1, 2]), 5));
        assert_eq!(x.value(10), 5);
        assert_eq!(x.restrict(4), FinSeq::new(vec![1, 2, 5, 5]));
        assert_eq!(x.to_string().parse::<EvConstSeq>().unwrap(), x);
    }

    #[test]
    fn first_difference_sees_tails() {
        let x = EvConstSeq::new(FinSeq::new(vec![1, 2]), 0);
        let y = EvConstSeq::new(FinSeq::new(vec![1, 2]), 3);
        assert_eq!(x.first_difference(&y), Some(2));
        assert_eq!(x.first_difference(&x), None);
        let z = EvConstSeq::new(FinSeq::new(vec![1, 2, 0, 0, 7]), 0);
        assert_eq!(x.first_difference(&z), Some(4));
    }

    #[test]
    fn zero_steps_leave_family_unchanged() {
        let f = fam();
        assert_eq!(f.sigma_extend(0).unwrap(), f);
    }

    #[test]
    fn schedule_starts_with_small_requests() {
        let cfg = ScheduleConfig::default();
        assert_eq!(
            cfg.entry(0),
            StarRequest {
                points: 0,
                phis: vec![]
            }
        );
        assert_eq!(
            cfg.entry(1),
            StarRequest {
                points: 1,
                phis: vec![vec![0]]
            }
        );
        assert_eq!(cfg.entry(2).points, 2);
        assert_eq!(cfg.entry(3).points, 3);
        assert_eq!(cfg.period(), 1 + 3 + 81 + 19683);
        // The enumeration covers every class member exactly once per period.
        let twos: BTreeSet<_> = (0..cfg.period())
            .map(|p| cfg.entry(p))
            .filter(|r| r.points == 2)
            .collect();
        assert_eq!(twos.len(), 81);
    }

    #[test]
    fn fixed_point_request_is_recorded() {
        let mut f = fam();
        let m0 = f.bound();
        let req = StarRequest::new(1, vec![vec![0]]).unwrap();
        f.demand(req.clone()).unwrap();
        assert_eq!(f.sigma(0, m0), Some(m0));
        assert_eq!(f.verify_star(&req), Some(vec![m0]));
    }

    #[test]
    fn swap_request_builds_a_two_cycle() {
        let mut f = fam();
        f.extend(5).unwrap();
        let m0 = f.bound();
        f.demand(StarRequest::new(2, vec![vec![1, 0], vec![0, 1]]).unwrap())
            .unwrap();
        assert_eq!(f.sigma(0, m0), Some(m0 + 1));
        assert_eq!(f.sigma(0, m0 + 1), Some(m0));
        assert_eq!(f.sigma(1, m0), Some(m0));
        assert_eq!(f.bound(), m0 + 2);
    }

    #[test]
    fn verify_star_vacuous_and_missing() {
        let f = fam();
        assert_eq!(f.verify_star(&StarRequest::new(0, vec![]).unwrap()), Some(vec![]));
        let req = StarRequest::new(2, vec![vec![1, 0]]).unwrap();
        assert_eq!(f.verify_star(&req), None);
    }

    #[test]
    fn general_search_finds_blocks_of_other_requests() {
        let mut f = fam();
        f.extend(40).unwrap();
        // A fixed point of σ_0 exists somewhere even without an exact record.
        let req = StarRequest::new(1, vec![vec![0], vec![0]]).unwrap();
        let w = f.verify_star(&req).unwrap();
        assert!(f.check_star(&req, &w));
    }

    #[test]
    fn f_apply_keeps_prefix_below_index() {
        let mut f = fam();
        f.extend(30).unwrap();
        let s = FinSeq::new(vec![4, 5]);
        assert_eq!(f.f_apply(2, &s).unwrap(), s);
        let img = f.f_apply(0, &s).unwrap();
        assert_eq!(img, FinSeq::new(vec![f.sigma(0, 4).unwrap(), f.sigma(0, 5).unwrap()]));
    }

    #[test]
    fn rel_r_edge_cases() {
        let mut f = fam();
        let s = FinSeq::new(vec![1, 2]);
        assert!(!f.rel_r(0, &s, &FinSeq::new(vec![1])).unwrap());
        assert!(!f.rel_r(2, &s, &s).unwrap());
        let t = FinSeq::new(vec![3, 1, 4]);
        let img = f.f_apply(1, &t).unwrap();
        assert!(f.rel_r(1, &img, &t).unwrap());
    }

    #[test]
    fn membership_is_exact_for_distinct_reals() {
        let mut f = fam();
        f.extend(60).unwrap();
        let y = EvConstSeq::new(FinSeq::new(vec![7, 8, 9]), 2);
        let x = f.f_apply_ev(2, &y).unwrap();
        if x != y {
            assert!(matches!(f.f_membership(&x, &y, 8).unwrap(), Membership::Yes(i) if i <= 2));
        }
        let z = EvConstSeq::new(FinSeq::new(vec![100_000]), 0);
        let w = EvConstSeq::new(FinSeq::new(vec![1]), 0);
        assert_eq!(f.f_membership(&z, &w, 8).unwrap(), Membership::No);
    }

    #[test]
    fn membership_of_equal_reals_can_be_unknown() {
        // Rows of σ_i for i ≥ 1 are never constrained by a one-point schedule,
        // so build a family where σ_0 moves the tail and look only at i < 1.
        let mut f = SigmaFamily::new(ScheduleConfig {
            max_points: 1,
            value_bound: 2,
            seed: 1,
        })
        .unwrap();
        f.extend(2).unwrap();
        let moved = (0..f.bound()).find(|&v| f.sigma(0, v) != Some(v)).unwrap();
        let x = EvConstSeq::constant(moved);
        assert_eq!(f.f_membership(&x, &x, 1).unwrap(), Membership::Unknown);
        assert_eq!(f.f_membership(&x, &x, 2).unwrap(), Membership::Yes(1));
    }

    #[test]
    fn bound_cap_is_enforced() {
        let mut f = fam().with_bound_cap(10);
        assert!(matches!(f.sigma_at(0, 50), Err(SeqError::BoundExceeded { .. })));
    }

    #[test]
    fn text_round_trip_and_tamper_detection() {
        let mut f = fam();
        f.extend(25).unwrap();
        f.demand(StarRequest::new(2, vec![vec![1, 2]]).unwrap()).unwrap();
        let text = f.to_text();
        assert_eq!(SigmaFamily::from_text(&text).unwrap(), f);
        let tampered = text.replacen("0: 0 ", "0: 1 ", 1);
        assert!(SigmaFamily::from_text(&tampered).is_err());
    }

    fn sets(v: &[&[u64]]) -> Vec<BTreeSet<u64>> {
        v.iter().map(|s| s.iter().copied().collect()).collect()
    }

    #[test]
    fn sunflower_disjoint_family() {
        let family = sets(&[&[1, 2], &[3], &[4, 5, 6]]);
        let sf = delta_system(&family, 3).unwrap().unwrap();
        assert!(sf.kernel.is_empty());
        assert_eq!(sf.indices, vec![0, 1, 2]);
    }

    #[test]
    fn sunflower_identical_sets() {
        let family = sets(&[&[1, 2], &[1, 2], &[1, 2]]);
        let sf = delta_system(&family, 3).unwrap().unwrap();
        assert_eq!(sf.kernel, [1, 2].into_iter().collect());
        assert!(sf.verify(&family));
    }

    #[test]
    fn sunflower_rejects_small_k() {
        assert_eq!(delta_system(&[], 1), Err(SeqError::BadPetalCount(1)));
    }

    #[test]
    fn sunflower_absent_in_triangle() {
        // {0,1},{1,2},{0,2}: every pair meets in a different point.
        let family = sets(&[&[0, 1], &[1, 2], &[0, 2]]);
        assert_eq!(delta_system(&family, 3).unwrap(), None);
    }
}
