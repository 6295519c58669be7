//! Phase retrieval from the magnitudes of orthogonal projections.
//!
//! Given orthogonal projections `P₁, …, P_N` of `R^M`, the magnitude map
//! `x ↦ (‖P₁x‖², …, ‖P_Nx‖²)` determines `x` up to sign exactly when, for every
//! nonzero `x`, the vectors `P₁x, …, P_Nx` span `R^M`. This crate samples
//! projection collections, certifies or refutes that spanning condition,
//! turns refutations into explicit colliding vectors, reconstructs vectors
//! from measurements, and evaluates the counting bounds on how many
//! projections are needed.

pub mod error;
pub mod experiments;
pub mod injectivity;
pub mod linalg;
pub mod projection;
pub mod reconstruction;
pub mod rng;
pub mod sharpness;
pub mod sphere;

pub use error::{Error, Result};
pub use injectivity::{
    certify_injective, collision_from_witness, complement_property, find_witness,
    measurement_map, min_defect_search, spanning_defect, CertGrid, CollisionPair,
    InjectivityVerdict, SearchBudget, SpanningDefect, Status, Tolerances, Witness,
    WitnessBudget,
};
pub use projection::{Projection, ProjectionCollection, Provenance, Subspace, Violation};
pub use reconstruction::{reconstruct, recovery_error, MeasurementVector, ReconstructBudget, ReconstructionResult};
pub use sharpness::{central_binomial_2adic, obstruction_predicate, rank1_witness_by_linear_algebra, BoundReport};
