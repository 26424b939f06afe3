//! Solvers and verification tools for non-autonomous evolutionary inclusions
//! `(u, f) ∈ ∂₀,ρ M₀(t) + M₁(t) + A` on a causal discrete time grid.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod inclusion_solver;
pub mod linalg;
pub mod material_laws;
pub mod model_gallery;
pub mod monotone_relations;
pub mod problems;
pub mod property_harness;
pub mod time_calculus;
pub mod weighted_space;

pub use error::{Error, Result};
