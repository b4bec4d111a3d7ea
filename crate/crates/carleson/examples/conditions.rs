//! Box-family constants: B_p, reverse Hölder, B_log, doubling and B_∞.
use carleson::conditions::{
    binfty_profile, blog_constant, bp_constant, doubling_constant, rhi_constant, BoxFamily, FamilyConfig,
};
use carleson::weights::load_weight;

fn main() -> anyhow::Result<()> {
    let w = load_weight("builtin:power?a=0.5")?;
    let fam = BoxFamily::build(&w, &FamilyConfig { depth: 14, ..Default::default() }, &[1.0])?;
    println!("{} boxes", fam.len());
    let mut all = vec![bp_constant(&fam, 2.0)?, rhi_constant(&fam, 2.0)?, blog_constant(&fam)?, doubling_constant(&fam)?];
    all.extend(binfty_profile(&fam, &[0.5, 0.1])?);
    for c in all {
        println!("{:<10} {:?}  {:.6}  ({})", c.name, c.params, c.value, c.verdict.as_str());
    }
    Ok(())
}
