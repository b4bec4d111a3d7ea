//! Numerical toolkit for weights on the unit disc and Carleson-box conditions.
//!
//! Points are written `(r, θ)` with `r = 1 - |z|` and `θ` measured in turns.
//! A box `Q_I` over an arc of length `ℓ` is `{r < ℓ, θ ∈ I}`. Box integrals
//! are kept as logarithms throughout, so weights like `exp(-1/r²)` stay
//! usable far past the point where the masses underflow.
//!
//! The runnable examples under `examples/` cover one area each:
//!
//! - `geometry`: boxes, top-halves and the dyadic tree
//! - `weights`: loading definitions and the box-integral cache
//! - `maximal`: dyadic and non-dyadic maximal functions
//! - `cz_decomposition`: Calderón-Zygmund selection at a level
//! - `conditions`: single conditions over a depth range
//! - `critical_exponents`: scans for the exponent where a condition breaks
//! - `theorem_suite`: the equivalence checks with their verdicts
//! - `bmo`: the BMO norm of `log w`
//! - `report`: building and serialising a full report
//!
//! ```
//! use carleson::geometry::CarlesonBox;
//! use carleson::weights::{box_integral_ln, load_weight};
//!
//! let w = load_weight("builtin:example53").unwrap();
//! let b = CarlesonBox::free(0.25, 1.0 / 64.0).unwrap();
//! // w(Q) = 2πℓ exp(-1/ℓ²), far below f64::MIN_POSITIVE
//! let ln_mass = box_integral_ln(&w, &b, 1.0).unwrap();
//! assert!(ln_mass < -4000.0);
//! ```
pub mod conditions;
pub mod error;
pub mod extended;
pub mod geometry;
pub mod operators;
pub mod quad;
pub mod report;
pub mod weights;

pub use error::{Error, Result};
