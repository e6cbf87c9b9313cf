//! Colors pairs with a seeded bit stream and looks for homogeneous sets.

use std::collections::BTreeSet;

use forcing_lab::ordinal::{color_edge, find_nontransitive, is_homogeneous, BitSource};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let src = BitSource::new(7);
    for alpha in 1..8 {
        let row: Vec<String> = (0..alpha)
            .map(|beta| color_edge(&src, alpha, beta).map(|c| c.to_string()))
            .collect::<Result<_, _>>()?;
        println!("{alpha}: {}", row.join(" "));
    }

    for color in 0..2 {
        let mut h = BTreeSet::new();
        for x in 0..40 {
            h.insert(x);
            if !is_homogeneous(&src, &h, color) {
                h.remove(&x);
            }
        }
        println!("greedy {color}-homogeneous set: {h:?}");
        if let Some(t) = find_nontransitive(&src, color, 10) {
            println!("compatibility is not transitive: {:?} {:?} {:?}", t.h1, t.h2, t.h3);
        }
    }
    Ok(())
}
