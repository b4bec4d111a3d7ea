//! Carleson boxes, top halves and the dyadic tree over the circle.
use carleson::geometry::{box_area, build_tree, top_half, CarlesonBox, DyadicArc, DyadicTree};

fn main() -> anyhow::Result<()> {
    for l in [1.0, 0.5, 0.125, 1.0 / 1024.0] {
        let b = CarlesonBox::free(0.3, l)?;
        let t = top_half(&b);
        println!("|I| = {l:<12} |Q| = {:.6e}  |T| = {:.6e}  ratio {:.4}", box_area(&b)?, t.area(), t.area() / b.area());
    }
    let tree = build_tree(DyadicArc::circle(), 4)?;
    println!("depth 4 tree: {} nodes", tree.node_count());
    let i = DyadicTree::level_start(3) + 5;
    let arc = tree.arc(i);
    println!("node {i}: path {} start {} length {}", arc.path(), arc.start(), arc.length());
    if let Some(leaf) = tree.locate(0.7, 0.05) {
        println!("point (theta 0.7, 1-|z| 0.05) sits in top half of {}", tree.arc(leaf).path());
    }
    Ok(())
}
