//! Where the reverse Hölder and B_q traces of the shell weight change verdict.
use carleson::conditions::{bp_constant, critical_exponent, rhi_constant, BoxFamily, FamilyConfig, Orientation};
use carleson::weights::load_weight;

fn main() -> anyhow::Result<()> {
    let x: f64 = 1.5;
    let w = load_weight(&format!("builtin:example52?x={x}"))?;
    let fam = BoxFamily::build(&w, &FamilyConfig { depth: 20, ..Default::default() }, &[1.0])?;
    let grid = [1.2, 1.5, 2.0, 3.0, 5.0];
    let bq = critical_exponent("bp", &grid, Orientation::BoundedAbove, 0.01, &|q| bp_constant(&fam, q))?;
    let rhi = critical_exponent("rhi", &grid, Orientation::BoundedBelow, 0.05, &|p| rhi_constant(&fam, p))?;
    println!("B_q flips near {:?}; closed form 1 + log x / log 2 = {:.4}", bq.estimate, 1.0 + x.ln() / 2f64.ln());
    println!("RHI flips near {:?}; closed form log 2 / log x = {:.4}", rhi.estimate, 2f64.ln() / x.ln());
    println!("RHI growth-rate extrapolation: {:?}", rhi.extrapolated);
    Ok(())
}
