//! Construction and certification of star-finite coverings of finite
//! truncations of c0(Γ) by smooth convex bodies.

pub mod bodies;
pub mod covering;
pub mod error;
pub mod format;
pub mod index;
pub mod nets;
pub mod probes;
pub mod norms;
pub mod sparse;
pub mod verifier;

pub use bodies::{dist_lower, intersects, Body, BodyLabel, DisjointnessCertificate, Intersection};
pub use error::{Error, Result};
pub use norms::{eval_dual_norm, eval_norm, gauge, norming_functional, NormSpec};
pub use sparse::{DualFunctional, Index, SparseVector};
