//! Numerical laboratory for ordered products `S_n = T_n ⋯ T_1` of decreasing
//! chains of positive contractions `T_1 >= T_2 >= ...` on `C^d`.

pub mod chain;
pub mod cli;
pub mod corpus;
pub mod export;
pub mod gap;
pub mod nonexample;
pub mod operator;
pub mod product;
pub mod random;

pub use operator::{Interval, Operator, Projection, SpectralDecomposition, Tolerances};
