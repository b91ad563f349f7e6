//! Executable fine-grained reductions.
//!
//! Instance transformers between min-plus products, exact triangles, 3SUM,
//! orthogonal vectors, colorful Boolean products and triangle collection,
//! each paired with a brute-force oracle so correctness and constructed
//! sizes can be checked mechanically.

pub mod matrix;
pub mod numeric;
pub mod instances;
pub mod oracles;
pub mod ledger;
pub mod red_apsp;
pub mod red_exacttri;
pub mod red_3sum;
pub mod red_mono;
pub mod red_colorful;
pub mod tri_co;
pub mod pipeline;
