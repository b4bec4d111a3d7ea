//! Mean oscillation norms over Carleson boxes.
use carleson::conditions::{bmo_c_norm, bmo_c_norm_log, BoxFamily, FamilyConfig};
use carleson::weights::expr::parse;
use carleson::weights::load_weight;

fn main() -> anyhow::Result<()> {
    let w = load_weight("builtin:example52?x=1.5")?;
    let fam = BoxFamily::build(&w, &FamilyConfig { depth: 12, per_decade: 20, ..Default::default() }, &[1.0])?;
    println!("‖log w‖ = {:.6}", bmo_c_norm_log(&fam)?.value);
    println!("‖log(1-|z|)‖ = {:.6}", bmo_c_norm(&parse("log(r)")?, &fam)?.value);
    Ok(())
}
