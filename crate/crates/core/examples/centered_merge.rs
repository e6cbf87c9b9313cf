//! Merges branch conditions with equal traces and joins Hechler conditions.

use std::collections::{BTreeMap, BTreeSet};

use forcing_lab::bits::BitString;
use forcing_lab::centered::{hechler_join, hechler_leq, p4_leq, p4_merge, Branch, HechlerCondition, P4Condition};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let branch = |s: &str| -> Result<Branch, Box<dyn std::error::Error>> { Ok(Branch::new(s.parse::<BitString>()?)) };
    let a = P4Condition::new(2, BTreeSet::from([branch("0010")?, branch("1100")?]))?;
    let b = P4Condition::new(2, BTreeSet::from([branch("0011")?, branch("1101")?]))?;
    let merged = p4_merge(&[a.clone(), b.clone()])?;
    println!("merged level {} with {} branches", merged.n(), merged.branches().len());
    println!("extends both: {} {}", p4_leq(&a, &merged), p4_leq(&b, &merged));

    let f = HechlerCondition::new(1, BTreeMap::from([(0, 3), (2, 5)]));
    let g = HechlerCondition::new(1, BTreeMap::from([(0, 3), (1, 4), (2, 1)]));
    let join = hechler_join(&f, &g).ok_or("stems differ")?;
    let values: Vec<u64> = (0..4).map(|k| join.value(k)).collect();
    println!(
        "hechler join: {values:?}, above both: {}",
        hechler_leq(&f, &join) && hechler_leq(&g, &join)
    );
    Ok(())
}
