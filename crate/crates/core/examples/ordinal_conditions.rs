//! Cantor normal form arithmetic and compatibility of ordinal-indexed conditions.

use std::collections::BTreeSet;

use forcing_lab::ordinal::{
    qstar_check, qstar_compatible, qstar_compatible_exact, qstar_fast_accept, OrdRange, Ordinal, QStarCheck,
    QStarCondition,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a: Ordinal = "w^2*3 + w + 4".parse()?;
    let b: Ordinal = "w^2 + 5".parse()?;
    println!("({a}) + ({b}) = {}", a.add(&b));
    println!("({b}) + ({a}) = {}", b.add(&a));
    println!("natural sum = {}", a.natural_sum(&b));
    println!("({b}) + ({}) = {a}", b.left_subtract(&a)?);

    let delta = Ordinal::omega_pow(Ordinal::nat(2));
    let w = |lo: &str, hi: &str| -> Result<QStarCondition, Box<dyn std::error::Error>> {
        Ok(QStarCondition::new(
            BTreeSet::new(),
            vec![OrdRange::new(lo.parse()?, hi.parse()?)?],
        )?)
    };
    let first = w("0", "w*3")?;
    let second = w("w*5", "w*9")?;
    if let QStarCheck::Ok { order_type } = qstar_check(&first, &delta)? {
        println!("first has order type {order_type}");
    }
    println!("fast accept: {:?}", qstar_fast_accept(&first, &second, &delta)?);
    println!(
        "compatible: {} (exact {})",
        qstar_compatible(&first, &second, &delta)?,
        qstar_compatible_exact(&first, &second, &delta)?
    );
    Ok(())
}
