//! Generates conditions of every kind and reports their compatibility graphs.

use forcing_lab::explorer::{cmd_compat_graph, cmd_decompose, cmd_gen, Kind, Params, PosetHandle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for kind in Kind::ALL {
        let doc = cmd_gen(&PosetHandle::new(kind, Params::default()), 6)?;
        let graph = cmd_compat_graph(&doc)?;
        let dec = cmd_decompose(&doc)?;
        println!(
            "{kind:>8}: {:>2} edges, {:>2} incompatible, {:>2} undecided, {} pieces by {}",
            graph.edges.len(),
            graph.incompatible.len(),
            graph.undecided.len(),
            dec.pieces.len(),
            dec.method
        );
    }
    let doc = cmd_gen(&PosetHandle::new(Kind::Hechler, Params::default()), 4)?;
    print!("{}", cmd_compat_graph(&doc)?.to_dot());
    Ok(())
}
