//! Places two clopen conditions in a common cell and certifies their common extension.

use forcing_lab::bits::BitString;
use forcing_lab::measure::{in_cell, linked_witness, p3_leq, CellIndex, ClopenTree, P3Condition};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let leaves = |depth: usize, codes: &[u64]| {
        codes
            .iter()
            .map(|&c| BitString::from_code(c, depth))
            .collect::<Vec<_>>()
    };
    let cell = CellIndex::new(1, ClopenTree::new(2, leaves(2, &[0, 1, 2]))?)?;
    let a = P3Condition::new(1, ClopenTree::new(3, leaves(3, &[0, 1, 2, 4, 5]))?)?;
    let b = P3Condition::new(1, ClopenTree::new(3, leaves(3, &[0, 2, 3, 4, 5]))?)?;
    println!(
        "both in the cell of depth {}: {} {}",
        cell.m(),
        in_cell(&a, &cell)?,
        in_cell(&b, &cell)?
    );

    let witness = linked_witness(&cell, &a, &b)?;
    for cert in &witness.certificates {
        println!("node {}: measure {} >= {}", cert.node, cert.measure, cert.lower_bound);
    }
    let c = &witness.condition;
    println!("measure of the extension: {}", c.tree().mu_cone(&BitString::empty()));
    println!("extends both: {} {}", p3_leq(&a, c)?, p3_leq(&b, c)?);
    Ok(())
}
