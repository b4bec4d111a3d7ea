//! Dyadic maximal and minimal functions and the radial non-dyadic maximal function.
use carleson::geometry::{build_tree, DyadicArc, DyadicTree};
use carleson::operators::{dyadic_maximal, dyadic_minimal, nondyadic_maximal_radial};
use carleson::weights::{load_weight, BoxIntegralCache};

fn main() -> anyhow::Result<()> {
    let w = load_weight("builtin:example52?x=1.5")?;
    let tree = build_tree(DyadicArc::circle(), 12)?;
    let cache = BoxIntegralCache::build(&w, &tree, &[1.0])?;
    let max = dyadic_maximal(&tree, &cache);
    let min = dyadic_minimal(&tree, &cache);
    for d in [0, 4, 8, 12] {
        let i = DyadicTree::level_start(d);
        println!("depth {d:>2}: M_Q w = {:.6}  m_Q w = {:.6}", max.value(i), min.value(i));
    }
    for r in [0.5, 0.1, 0.01] {
        println!("non-dyadic M w at 1-|z| = {r}: {:.6}", nondyadic_maximal_radial(&w, 1.0 - r)?);
    }
    Ok(())
}
