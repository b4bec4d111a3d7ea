//! Cross-checks of the characterizations on a weight that is FW but not B_∞.
use carleson::conditions::{theorem_suite, SuiteConfig};
use carleson::report::cli::suite_table;
use carleson::weights::load_weight;

fn main() -> anyhow::Result<()> {
    let w = load_weight("builtin:example53")?;
    let s = theorem_suite(&w, &SuiteConfig { depth: 18, ..Default::default() })?;
    print!("{}", suite_table(&s));
    for (name, f) in &s.flags {
        println!("{name:<12} {}  {}", f.verdict.symbol(), f.reason);
    }
    Ok(())
}
