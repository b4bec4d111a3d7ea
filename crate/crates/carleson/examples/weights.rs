//! Loading weights and integrating them over boxes, checked against the oracle.
use carleson::geometry::CarlesonBox;
use carleson::weights::oracle::oracle_box_integral;
use carleson::weights::{box_integral, load_weight};

fn main() -> anyhow::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/weights/product.toml");
    for src in ["builtin:constant", "builtin:power?a=0.5", "builtin:example52?x=1.5", path] {
        let w = load_weight(src)?;
        let b = CarlesonBox::free(0.1, 0.25)?;
        let fast = box_integral(&w, &b, 1.0)?;
        let slow = oracle_box_integral(&w, &b, 1.0)?;
        println!("{:<10} w(0.1, 0.2) = {:.6}  ∫_Q w = {fast:.10}  oracle {slow:.10}", w.name, w.eval(0.1, 0.2));
    }
    Ok(())
}
