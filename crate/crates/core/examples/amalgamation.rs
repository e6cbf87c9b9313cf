//! Amalgamates two aligned conditions, links two indices and runs a short generic.

use std::collections::BTreeMap;

use forcing_lab::knaster::{amalgamate, link_amalgamate, mini_generic, q_leq, Generator, QCondition};
use forcing_lab::seq::{FinSeq, ScheduleConfig, SigmaFamily};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut fam = SigmaFamily::new(ScheduleConfig::default())?;
    let shared = FinSeq::new(vec![1, 0]);

    let qa = QCondition::new(2, BTreeMap::from([(0, shared.clone()), (2, FinSeq::new(vec![0, 1]))]))?;
    let qb = QCondition::new(2, BTreeMap::from([(0, shared.clone()), (5, FinSeq::new(vec![2, 2]))]))?;

    let q = amalgamate(&mut fam, &qa, &qb)?;
    println!("first:  {}", qa.to_text());
    println!("second: {}", qb.to_text());
    println!("joint:  {}", q.to_text());
    println!(
        "joint extends both: {} {}",
        q_leq(&mut fam, &qa, &q)?,
        q_leq(&mut fam, &qb, &q)?
    );

    let left = QCondition::new(2, BTreeMap::from([(1, shared.clone())]))?;
    let right = QCondition::new(2, BTreeMap::from([(4, shared)]))?;
    let linked = link_amalgamate(&mut fam, &left, &right, 1, 4)?;
    println!("linked: {}", linked.to_text());

    let generators = [
        Generator::Fresh { index: 3 },
        Generator::Extend,
        Generator::Fresh { index: 7 },
    ];
    let run = mini_generic(&mut fam, &q, &generators, 4)?;
    println!("generic run: {run:?}");
    Ok(())
}
