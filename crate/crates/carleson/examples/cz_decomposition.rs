//! Calderón-Zygmund decompositions under Lebesgue and weighted measure.
use carleson::report::cz;
use carleson::weights::Measure;

fn main() -> anyhow::Result<()> {
    let src = "builtin:example52?x=1.5";
    print!("{}", cz(src, 10, 3.0, true, Measure::Lebesgue, 1.0)?.text());
    println!();
    print!("{}", cz(src, 10, 2.0, true, Measure::Weighted, -1.0)?.text());
    Ok(())
}
