//! Global data association for 3D line and plane landmarks.
//!
//! Lines and planes are treated as points on the affine Grassmannian, compared
//! with a translation-invariant subspace distance, matched by selecting the
//! densest mutually consistent set of candidate correspondences, and finally
//! registered in closed form.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod clique;
pub mod consistency;
mod error;
pub mod graff;
pub mod registration;
pub mod transform;

pub use clique::{brute_force_densest, solve_densest, ConstraintGraph, Selection, SolverParams};
pub use consistency::{
    build_affinity, generate_candidates, AffinityMatrix, Candidate, ConsistencyParams, Landmark,
    Scan,
};
pub use error::{Error, Result};
pub use graff::{GraffElement, Kind, LinePD, PlaneHesse, PrincipalAngles, Rho, StiefelCoords};
pub use registration::{
    alignment_error, estimate_transform, estimate_transform_trimmed, residual, AlignmentError,
    MatchSet, Residual, Thresholds, TrimParams, TrimmedFit,
};
pub use transform::RigidTransform;
