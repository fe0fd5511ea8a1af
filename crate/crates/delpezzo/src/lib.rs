//! Anticanonical evaluation codes from weak del Pezzo surfaces over small
//! finite fields: exact construction of generator matrices, exhaustive
//! minimum-distance verification, and divisor class-group comparisons.

pub mod code;
pub mod families;
pub mod gf;
pub mod lattice;
pub mod plane;
