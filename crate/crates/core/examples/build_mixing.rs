//! Builds pull/push mixing matrices on a random strongly connected ring and
//! shows the root-set precondition rejecting a bad pair.
//!
//! ```text
//! cargo run --example build_mixing
//! ```

use nalgebra::DVector;
use rcpp::{build_mixing, make_ring, Digraph, WeightScheme};

fn fmt(v: &DVector<f64>) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}

fn main() -> rcpp::Result<()> {
    let g = make_ring(6, 4, 7)?;
    println!("ring with chords, {} edges incl. self-loops", g.edge_count());
    println!("strongly connected: {}", g.is_strongly_connected());

    let m = build_mixing(&g, &g, WeightScheme::Perturbed { seed: 7 })?;
    m.check()?;
    println!("R row sums:    {}", fmt(&m.pull.column_sum()));
    println!("C column sums: {}", fmt(&m.push.row_sum().transpose()));
    println!("u_R = {}", fmt(&m.pull_vector));
    println!("u_C = {}", fmt(&m.push_vector));
    println!("u_R . u_C = {:.4}", m.perron_overlap());

    // A chain pulls from its head; pushing along the reversed chain reaches
    // the same head, so the pair is admissible.
    let chain = Digraph::from_edges(3, [(0, 1), (1, 2)])?.with_self_loops();
    println!("\nchain roots {:?}, reversed chain roots {:?}", chain.root_set(), chain.reversed().root_set());
    let ok = build_mixing(&chain, &chain.reversed(), WeightScheme::Uniform)?;
    println!("u_R = {}", fmt(&ok.pull_vector));

    match build_mixing(&chain, &chain, WeightScheme::Uniform) {
        Ok(_) => println!("unexpected: chain/chain accepted"),
        Err(e) => println!("chain/chain rejected: {e}"),
    }
    Ok(())
}
