//! Property suites run by the `verify` command. Each property reports how
//! many cases it checked and the first counterexample, if any.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{coarse_cell, ExplorerError};
use crate::bits::BitString;
use crate::centered::{p4_leq, p4_merge, Branch, P4Condition};
use crate::gamma::{find_translation, knaster_witness_family, p1_compatible, translate, ConvSeq, P1StarCondition};
use crate::knaster::{amalgamate, link_amalgamate, q_leq, QCondition};
use crate::measure::{in_cell, linked_witness, CellIndex, ClopenTree, P3Condition};
use crate::norm::small;
use crate::ordinal::{
    cantor_pair, find_nontransitive, homog_compatible, qstar_compatible_exact, qstar_fast_accept, BitSource, OrdRange,
    Ordinal, QStarCondition, LCG_INC, LCG_MUL,
};
use crate::seq::{EvConstSeq, FinSeq, Membership, ScheduleConfig, SigmaFamily};

pub const SUITES: [&str; 10] = [
    "seq-star",
    "knaster-amalgamation",
    "knaster-link",
    "gamma-family",
    "p1star-translation",
    "norm-lemma",
    "measure-cells",
    "centered-merge",
    "ordinal-arith",
    "coloring",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub suite: String,
    pub property: String,
    pub passed: bool,
    pub checked: u64,
    pub counterexample: Option<Value>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub results: Vec<PropertyResult>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }
}

struct Tally {
    suite: &'static str,
    property: &'static str,
    checked: u64,
    counterexample: Option<Value>,
}

impl Tally {
    fn new(suite: &'static str, property: &'static str) -> Self {
        Tally {
            suite,
            property,
            checked: 0,
            counterexample: None,
        }
    }

    fn record(&mut self, ok: bool, case: impl FnOnce() -> Value) {
        self.checked += 1;
        if !ok && self.counterexample.is_none() {
            self.counterexample = Some(case());
        }
    }

    fn finish(self) -> PropertyResult {
        PropertyResult {
            suite: self.suite.into(),
            property: self.property.into(),
            passed: self.counterexample.is_none(),
            checked: self.checked,
            counterexample: self.counterexample,
        }
    }
}

/// Runs one suite, or every suite for `all`.
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport, ExplorerError> {
    let names: Vec<&str> = if name == "all" { SUITES.to_vec() } else { vec![name] };
    let mut report = SuiteReport::default();
    for n in names {
        let results = match n {
            "seq-star" => seq_star(seed),
            "knaster-amalgamation" => knaster_amalgamation(seed),
            "knaster-link" => knaster_link(seed),
            "gamma-family" => gamma_family(seed),
            "p1star-translation" => p1star_translation(seed),
            "norm-lemma" => vec![norm_lemma(12, 24, 4)],
            "measure-cells" => measure_cells(),
            "centered-merge" => vec![centered_merge()],
            "ordinal-arith" => ordinal_arith(seed),
            "coloring" => coloring(),
            other => return Err(ExplorerError::UnknownSuite(other.to_string())),
        };
        report.results.extend(results);
    }
    Ok(report)
}

fn err_value(e: impl std::fmt::Display) -> Value {
    json!({ "error": e.to_string() })
}

fn seq_star(seed: u64) -> Vec<PropertyResult> {
    let config = ScheduleConfig {
        seed,
        ..ScheduleConfig::default()
    };
    let mut t = Tally::new("seq-star", "every scheduled request has a verified witness");
    match SigmaFamily::new(config).and_then(|mut fam| fam.extend(config.period()).map(|_| fam)) {
        Ok(fam) => {
            for block in fam.history() {
                let ok = fam
                    .verify_star(&block.request)
                    .is_some_and(|w| fam.check_star(&block.request, &w));
                t.record(ok, || json!(block.request));
            }
        }
        Err(e) => t.record(false, || err_value(e)),
    }
    vec![t.finish()]
}

fn random_seq(rng: &mut ChaCha8Rng, level: usize) -> FinSeq {
    FinSeq((0..level).map(|_| rng.gen_range(0..3)).collect())
}

/// A pair sharing indices below `c` and with private indices above.
pub fn random_aligned_pair(rng: &mut ChaCha8Rng, level: usize) -> Option<(QCondition, QCondition)> {
    let common = rng.gen_range(0..=2u64);
    let private_a = rng.gen_range(0..=2u64);
    let private_b = rng.gen_range(0..=2u64);
    let mut shared = BTreeMap::new();
    for a in 0..common {
        shared.insert(a, random_seq(rng, level));
    }
    let mut qa = shared.clone();
    let mut qb = shared;
    for k in 0..private_a {
        qa.insert(common + k, random_seq(rng, level));
    }
    for k in 0..private_b {
        qb.insert(common + private_a + k, random_seq(rng, level));
    }
    Some((QCondition::new(level, qa).ok()?, QCondition::new(level, qb).ok()?))
}

fn knaster_amalgamation(seed: u64) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("knaster-amalgamation", "amalgamate extends both aligned inputs");
    let mut fam = SigmaFamily::new(ScheduleConfig {
        seed,
        ..ScheduleConfig::default()
    })
    .expect("default schedule");
    while t.checked < 300 {
        let level = rng.gen_range(0..=3);
        let Some((qa, qb)) = random_aligned_pair(&mut rng, level) else {
            continue;
        };
        let ok = match amalgamate(&mut fam, &qa, &qb) {
            Ok(q) => {
                q.level() == level + 1
                    && q_leq(&mut fam, &qa, &q).unwrap_or(false)
                    && q_leq(&mut fam, &qb, &q).unwrap_or(false)
            }
            Err(_) => false,
        };
        t.record(ok, || json!({ "a": qa, "b": qb }));
    }
    vec![t.finish()]
}

fn knaster_link(seed: u64) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new(
        "knaster-link",
        "link_amalgamate relates the linked entries at the old level",
    );
    let mut fam = SigmaFamily::new(ScheduleConfig {
        seed,
        ..ScheduleConfig::default()
    })
    .expect("default schedule");
    while t.checked < 200 {
        let level = rng.gen_range(1..=3);
        let size = rng.gen_range(1..=3u64);
        let entries: BTreeMap<u64, FinSeq> = (0..size).map(|a| (a, random_seq(&mut rng, level))).collect();
        let Ok(qa) = QCondition::new(level, entries) else {
            continue;
        };
        let alpha = rng.gen_range(0..size);
        let beta = size + rng.gen_range(0..3);
        let mut below = qa.below(alpha).entries().clone();
        below.insert(beta, qa.entries()[&alpha].clone());
        let qb = QCondition::new(level, below).expect("distinct sequences");
        let ok = match link_amalgamate(&mut fam, &qa, &qb, alpha, beta) {
            Ok(q) => {
                fam.rel_r(level, &q.entries()[&alpha], &q.entries()[&beta])
                    .unwrap_or(false)
                    && q_leq(&mut fam, &qa, &q).unwrap_or(false)
                    && q_leq(&mut fam, &qb, &q).unwrap_or(false)
            }
            Err(_) => false,
        };
        t.record(ok, || json!({ "a": qa, "b": qb, "alpha": alpha, "beta": beta }));
    }
    vec![t.finish()]
}

fn random_real(rng: &mut ChaCha8Rng) -> EvConstSeq {
    let len = rng.gen_range(0..=3);
    EvConstSeq::new(
        FinSeq((0..len).map(|_| rng.gen_range(0..3)).collect()),
        rng.gen_range(0..3),
    )
}

/// Four random reals and images of them under random `f_i`, duplicates dropped.
pub fn linked_reals(fam: &mut SigmaFamily, rng: &mut ChaCha8Rng) -> Vec<EvConstSeq> {
    let mut xs: Vec<EvConstSeq> = Vec::new();
    while xs.len() < 8 {
        let x = if xs.len() >= 2 && rng.gen_bool(0.5) {
            let y = xs.choose(rng).expect("nonempty").clone();
            match fam.f_apply_ev(rng.gen_range(0..3), &y) {
                Ok(z) => z,
                Err(_) => continue,
            }
        } else {
            random_real(rng)
        };
        if !xs.contains(&x) {
            xs.push(x);
        }
    }
    xs
}

fn gamma_family(seed: u64) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new(
        "gamma-family",
        "compatibility in the witness family is the complement of F-linking",
    );
    let mut fam = SigmaFamily::new(ScheduleConfig {
        seed,
        ..ScheduleConfig::default()
    })
    .expect("default schedule");
    for _ in 0..20 {
        let xs = linked_reals(&mut fam, &mut rng);
        let Ok(ps) = knaster_witness_family(&xs) else {
            t.record(false, || json!(xs));
            continue;
        };
        let precision = ps[0].precision;
        for a in 0..xs.len() {
            for b in a + 1..xs.len() {
                let linked = matches!(fam.f_membership(&xs[a], &xs[b], precision), Ok(Membership::Yes(_)));
                let compatible = p1_compatible(&mut fam, &ps[a], &ps[b]).unwrap_or(linked);
                t.record(compatible != linked, || json!({ "reals": xs, "a": a, "b": b }));
            }
        }
    }
    vec![t.finish()]
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn random_p1star(rng: &mut ChaCha8Rng) -> P1StarCondition {
    loop {
        let mut seqs = BTreeSet::new();
        for _ in 0..rng.gen_range(1..=3) {
            let limit = rat(rng.gen_range(-3..=3), rng.gen_range(1..=2));
            let len = rng.gen_range(1..=5);
            let step = rng.gen_range(1..=2);
            let terms = (1..=len).map(|k| &limit + rat(1, k * step)).collect();
            if let Ok(s) = ConvSeq::new(terms, limit) {
                seqs.insert(s);
            }
        }
        if let Ok(p) = P1StarCondition::new(seqs) {
            return p;
        }
    }
}

fn p1star_translation(seed: u64) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new(
        "p1star-translation",
        "the translate found is compatible with the other condition",
    );
    for _ in 0..300 {
        let (p1, p2) = (random_p1star(&mut rng), random_p1star(&mut rng));
        let d = find_translation(&p1, &p2);
        let ok = translate(&p1, &d).union(&p2).is_ok();
        t.record(ok, || json!({ "p1": p1, "p2": p2 }));
    }
    vec![t.finish()]
}

/// Every tuple of `m ≤ m_max` removed sets inside `f ≤ f_max` successors, up
/// to relabelling successors, for every `g ≤ g_max`: the intersection has norm
/// at least `ζ/m`, and is nonempty when `ζ ≥ 1` and `m·g < f`.
pub fn norm_lemma(f_max: u64, g_max: u64, m_max: usize) -> PropertyResult {
    let mut t = Tally::new("norm-lemma", "intersection norm bound and nonemptiness");
    for m in 1..=m_max {
        let regions = (1usize << m) - 1;
        let mut counts = vec![0u64; regions];
        venn_vectors(&mut counts, 0, f_max, &mut |counts| {
            let mut sets = vec![0u64; m];
            let mut next = 0;
            for (r, &c) in counts.iter().enumerate() {
                let block = ((1u64 << c) - 1) << next;
                next += c;
                for (l, s) in sets.iter_mut().enumerate() {
                    if (r + 1) >> l & 1 == 1 {
                        *s |= block;
                    }
                }
            }
            let union = next;
            for g in 1..=g_max {
                let x = small::intersect(g, &sets);
                let hyp_zeta = small::at_least_one(x.zeta);
                for f in union.max(1)..=f_max {
                    let guaranteed = hyp_zeta && (m as u64) * g < f;
                    let ok = x.norm >= x.lower_bound && (!guaranteed || union < f);
                    t.record(ok, || json!({ "f": f, "g": g, "sets": sets }));
                }
            }
        });
    }
    t.finish()
}

fn venn_vectors(counts: &mut [u64], at: usize, left: u64, visit: &mut dyn FnMut(&[u64])) {
    if at == counts.len() {
        visit(counts);
        return;
    }
    for c in 0..=left {
        counts[at] = c;
        venn_vectors(counts, at + 1, left - c, visit);
    }
    counts[at] = 0;
}

fn measure_cells() -> Vec<PropertyResult> {
    let depth = 3;
    let trees: Vec<ClopenTree> = (1..1u64 << (1 << depth))
        .map(|mask| ClopenTree::from_mask(depth, mask).expect("small depth"))
        .collect();
    let mut linked = Tally::new("measure-cells", "members of one cell meet above every stem node");
    let mut covered = Tally::new("measure-cells", "every condition lies in a cell");
    for m in 1..=depth {
        for w in (1..1u64 << (1 << m)).map(|mask| ClopenTree::from_mask(m, mask).expect("small depth")) {
            for n in 0..m {
                let cell = CellIndex::new(n, w.clone()).expect("n < m");
                let members: Vec<P3Condition> = trees
                    .iter()
                    .map(|tr| P3Condition::new(n, tr.clone()).expect("n ≤ depth"))
                    .filter(|c| in_cell(c, &cell).unwrap_or(false))
                    .collect();
                for (i, a) in members.iter().enumerate() {
                    for b in &members[i..] {
                        let ok = linked_witness(&cell, a, b).is_ok_and(|lw| {
                            lw.certificates
                                .iter()
                                .all(|c| c.measure >= c.lower_bound && c.measure.is_positive())
                        });
                        linked.record(ok, || json!({ "cell": cell, "a": a, "b": b }));
                    }
                }
            }
        }
    }
    for tr in &trees {
        for n in 0..=depth {
            let c = P3Condition::new(n, tr.clone()).expect("n ≤ depth");
            covered.record(coarse_cell(&c).is_ok(), || json!(c));
        }
    }
    vec![linked.finish(), covered.finish()]
}

fn centered_merge() -> PropertyResult {
    let mut t = Tally::new("centered-merge", "same-cell conditions merge above both");
    let branches: Vec<Branch> = (0..=4)
        .flat_map(BitString::all)
        .map(Branch::new)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    for n in 0..=2 {
        let mut cells: BTreeMap<BTreeSet<BitString>, Vec<P4Condition>> = BTreeMap::new();
        for mask in 1u32..1 << branches.len() {
            let set: BTreeSet<Branch> = branches
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, b)| b.clone())
                .collect();
            if set.len() > 3 {
                continue;
            }
            if let Ok(c) = P4Condition::new(n, set) {
                cells.entry(c.traces(n)).or_default().push(c);
            }
        }
        for members in cells.values() {
            for (i, a) in members.iter().enumerate() {
                for b in &members[i..] {
                    let ok = p4_merge(&[a.clone(), b.clone()]).is_ok_and(|w| p4_leq(a, &w) && p4_leq(b, &w));
                    t.record(ok, || json!({ "a": a, "b": b }));
                }
            }
        }
    }
    t.finish()
}

/// Ordinals with at most two terms, exponents among `0, 1, 2, ω, ω+1, ω·2`
/// and coefficients at most 3.
pub fn small_cnf_universe() -> Vec<Ordinal> {
    let w = Ordinal::omega();
    let exps = [
        Ordinal::zero(),
        Ordinal::one(),
        Ordinal::nat(2),
        w.clone(),
        w.succ(),
        w.times(2),
    ];
    let mut out = vec![Ordinal::zero()];
    for (i, e1) in exps.iter().enumerate() {
        for c1 in 1..=3 {
            out.push(Ordinal::from_terms(vec![(e1.clone(), c1)]).expect("one term"));
            for e2 in &exps[..i] {
                for c2 in 1..=3 {
                    out.push(Ordinal::from_terms(vec![(e1.clone(), c1), (e2.clone(), c2)]).expect("descending"));
                }
            }
        }
    }
    out.sort();
    out
}

fn random_qstar(rng: &mut ChaCha8Rng) -> QStarCondition {
    let point = |rng: &mut ChaCha8Rng| {
        let k = Ordinal::nat(rng.gen_range(0..8));
        match rng.gen_range(0..3) {
            0 => k,
            1 => Ordinal::omega().add(&k),
            _ => Ordinal::omega_pow(Ordinal::nat(2)).add(&k),
        }
    };
    let heart = (0..rng.gen_range(0..=2))
        .map(|_| {
            let a = point(rng);
            let b = a.add(&Ordinal::nat(rng.gen_range(1..3)));
            (a, b)
        })
        .collect();
    let singles = (0..rng.gen_range(0..=2))
        .filter_map(|_| {
            let lo = point(rng);
            let hi = if rng.gen_bool(0.4) {
                lo.add(&Ordinal::omega())
            } else {
                lo.add(&Ordinal::nat(rng.gen_range(1..4)))
            };
            OrdRange::new(lo, hi).ok()
        })
        .collect();
    QStarCondition::new(heart, singles).expect("pairs increase")
}

fn ordinal_arith(seed: u64) -> Vec<PropertyResult> {
    let u = small_cnf_universe();
    let mut assoc = Tally::new("ordinal-arith", "addition is associative");
    for a in &u {
        for b in &u {
            let ab = a.add(b);
            for c in &u {
                assoc.record(ab.add(c) == a.add(&b.add(c)), || json!([a, b, c]));
            }
        }
    }
    let mut sub = Tally::new("ordinal-arith", "a + (b - a) = b");
    for a in &u {
        for b in u.iter().filter(|b| *b >= a) {
            let ok = a.left_subtract(b).is_ok_and(|g| a.add(&g) == *b);
            sub.record(ok, || json!([a, b]));
        }
    }
    let mut absorb = Tally::new("ordinal-arith", "finite summands are absorbed by infinite ones");
    for n in 0..5 {
        for a in u.iter().filter(|a| a.terms().first().is_some_and(|t| !t.0.is_zero())) {
            absorb.record(Ordinal::nat(n).add(a) == *a, || json!([n, a]));
        }
    }
    let mut indec = Tally::new("ordinal-arith", "indecomposable iff closed under sums below");
    for a in u.iter().filter(|a| !a.is_zero()) {
        let below: Vec<&Ordinal> = u.iter().filter(|b| *b < a).collect();
        let closed = below.iter().all(|b| below.iter().all(|c| b.add(c) < *a));
        // The universe only samples the ordinals below `a`, so only one direction is exact.
        indec.record(!a.is_indecomposable() || closed, || json!(a));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut diff = Tally::new("ordinal-arith", "qstar fast accept agrees with the exact merge");
    let deltas = [
        Ordinal::omega(),
        Ordinal::omega_pow(Ordinal::nat(2)),
        Ordinal::omega_pow(Ordinal::nat(3)),
    ];
    for _ in 0..2000 {
        let delta = &deltas[rng.gen_range(0..3)];
        let (w1, w2) = (random_qstar(&mut rng), random_qstar(&mut rng));
        let fast = qstar_fast_accept(&w1, &w2, delta);
        let exact = qstar_compatible_exact(&w1, &w2, delta);
        let ok = match (fast, exact) {
            (Ok(Some(f)), Ok(e)) => f == e,
            (Ok(None), Ok(_)) => true,
            _ => false,
        };
        diff.record(ok, || json!({ "w1": w1, "w2": w2, "delta": delta }));
    }
    vec![
        assoc.finish(),
        sub.finish(),
        absorb.finish(),
        indec.finish(),
        diff.finish(),
    ]
}

fn coloring() -> Vec<PropertyResult> {
    let src = BitSource::new(1);
    let top = cantor_pair(6, 5) as usize;
    let mut bits = Vec::with_capacity(top + 1);
    let mut x = 1u64;
    for _ in 0..=top {
        x = x.wrapping_mul(LCG_MUL).wrapping_add(LCG_INC);
        bits.push((x >> 63) as u8);
    }
    let homog = |h: u32, color: u8| {
        (0..7u64).all(|b| {
            (b + 1..7).all(|a| h >> a & 1 == 0 || h >> b & 1 == 0 || bits[cantor_pair(a, b) as usize] == color)
        })
    };
    let set = |h: u32| -> BTreeSet<u64> { (0..7).filter(|k| h >> k & 1 == 1).collect() };
    let mut agree = Tally::new("coloring", "homog_compatible matches the bit stream");
    for h1 in 0..128u32 {
        for h2 in 0..128u32 {
            for color in 0..2 {
                let ok = homog_compatible(&src, &set(h1), &set(h2), color) == homog(h1 | h2, color);
                agree.record(ok, || json!({ "h1": set(h1), "h2": set(h2), "color": color }));
            }
        }
    }
    let mut nt = Tally::new("coloring", "compatibility is not transitive");
    for color in 0..2 {
        let ok = find_nontransitive(&src, color, 16).is_some_and(|w| {
            homog_compatible(&src, &w.h1, &w.h2, color)
                && homog_compatible(&src, &w.h2, &w.h3, color)
                && !homog_compatible(&src, &w.h1, &w.h3, color)
        });
        nt.record(ok, || json!({ "color": color }));
    }
    vec![agree.finish(), nt.finish()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite() {
        assert!(matches!(run_suite("nope", 0), Err(ExplorerError::UnknownSuite(_))));
    }

    #[test]
    fn quick_suites_pass() {
        for name in [
            "seq-star",
            "knaster-link",
            "p1star-translation",
            "centered-merge",
            "coloring",
        ] {
            let r = run_suite(name, 1).unwrap();
            assert!(r.all_passed(), "{name}: {:?}", r.results);
        }
        assert!(norm_lemma(6, 8, 3).passed);
    }
}
