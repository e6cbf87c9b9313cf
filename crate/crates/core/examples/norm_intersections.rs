//! Builds toy norm parameters, intersects successor sets and checks a norm tree.

use std::collections::{BTreeMap, BTreeSet};

use forcing_lab::norm::{build_params, intersect_norm, qeta_check, FiniteNormTree, ParamMode, SuccSet};
use forcing_lab::seq::FinSeq;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = build_params(2, ParamMode::Toy, 2)?;
    let root = FinSeq::empty();
    let data = params.node(&root)?;
    println!(
        "root: f = {}, g = {}, guaranteed meets = {}",
        data.f, data.g, data.product_bound
    );

    let sets: Vec<SuccSet> = [[0u64], [1], [0]]
        .iter()
        .map(|r| SuccSet {
            node: root.clone(),
            removed: r.iter().copied().collect(),
        })
        .collect();
    let meet = intersect_norm(&params, &root, &sets)?;
    println!("removed after intersecting: {:?}", meet.set.removed);
    println!(
        "norm {}  least input {}  lower bound {}",
        meet.norm, meet.zeta, meet.lower_bound
    );
    println!(
        "guaranteed nonempty: {}, nonempty: {}",
        meet.nonempty_guaranteed, meet.nonempty
    );

    let tree = FiniteNormTree::new(root.clone(), 2, BTreeMap::from([(root, BTreeSet::from([3]))]))?;
    println!("tree check: {:?}", qeta_check(&params, &tree));
    Ok(())
}
