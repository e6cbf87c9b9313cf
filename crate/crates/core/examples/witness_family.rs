//! Pairwise compatible singletons over a chain of reals, and translations of convergent sequences.

use std::collections::BTreeSet;

use num_rational::BigRational;

use forcing_lab::gamma::{
    find_translation, knaster_witness_family, p1_compatible, translate, ConvSeq, P1StarCondition,
};
use forcing_lab::seq::{EvConstSeq, FinSeq, ScheduleConfig, SigmaFamily};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut fam = SigmaFamily::new(ScheduleConfig::default())?;
    let reals: Vec<EvConstSeq> = (0..5u64)
        .map(|k| EvConstSeq::new(FinSeq::new(vec![k * 37 % 11, k + 400]), k % 3))
        .collect();
    let family = knaster_witness_family(&reals)?;
    println!("{} conditions at precision {}", family.len(), family[0].precision);
    for (a, p) in family.iter().enumerate() {
        let row: Vec<&str> = family
            .iter()
            .map(|q| {
                if p1_compatible(&mut fam, p, q).unwrap_or(false) {
                    "+"
                } else {
                    "."
                }
            })
            .collect();
        println!("  {a}: {}", row.join(" "));
    }

    let rat = |n: i64, d: i64| BigRational::new(n.into(), d.into());
    let one = P1StarCondition::new(BTreeSet::from([ConvSeq::harmonic(rat(0, 1), 4)]))?;
    let two = P1StarCondition::new(BTreeSet::from([ConvSeq::harmonic(rat(1, 2), 4)]))?;
    let d = find_translation(&one, &two);
    println!("union before translating: {}", one.union(&two).is_ok());
    let moved = translate(&one, &d);
    println!("after translating by {d}: {}", moved.union(&two).is_ok());
    Ok(())
}
