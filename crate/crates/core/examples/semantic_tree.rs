// Build the master semantic tree of a small codebook, print it, and show the
// order in which its leaves are pruned.
//
// Run with `cargo run --example semantic_tree`.

use kb_resize::ranking::build_semantic_tree;
use kb_resize::{compute_removal_order, prune_to_size, EuclideanCodebook};

pub fn run_example() -> kb_resize::Result<()> {
    // A coarse vector near the origin with two finer families farther out.
    let kb = EuclideanCodebook::from_rows(&[
        [0.05, 0.00],
        [0.60, 0.10],
        [0.90, 0.35],
        [0.95, -0.20],
        [-0.55, 0.15],
        [-0.90, 0.45],
        [-0.85, -0.30],
    ])?;
    let (points, tree) = build_semantic_tree(&kb)?;
    println!(
        "root {} (norm {:.3})",
        tree.root(),
        points.norm(tree.root())
    );
    print!("{}", tree.to_dot());

    let order = compute_removal_order(&tree, &points)?;
    println!("removal order: {:?}", order.sequence);
    for k in (1..=kb.size()).rev() {
        println!("K={k}: keep {:?}", prune_to_size(&tree, &order, k)?);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> kb_resize::Result<()> {
    run_example()
}
