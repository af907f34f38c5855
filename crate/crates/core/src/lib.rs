//! Pointwise curvature machinery for submanifolds of complex projective space,
//! randomized inequality campaigns over pinched data, and the equivariant mean
//! curvature flow of geodesic spheres in `CP^n` and `HP^n`.
//!
//! Module map:
//!
//! - [`ambient`]: tangent-space model of `KP^n(4c)`.
//! - [`frames`]: point data, adapted frames, Kähler angles, random generators.
//! - [`algebra`]: traceless split, `R1`, `R2`, reaction terms, `Z`, pinching quantities.
//! - [`verifier`]: inequality suites, mutants, shrinking, constant scans.
//! - [`flow`]: geodesic-sphere radius ODE and evolution-equation checks.
//! - [`cli`]: configuration, orchestration and report persistence.

pub mod algebra;
pub mod ambient;
pub mod cli;
mod eigen;
pub mod error;
pub mod flow;
pub mod frames;
mod nonfinite;
pub mod verifier;

pub use ambient::{AmbientConstants, AmbientSpace, AmbientVector, FrameTensor, SpaceKind};
pub use error::{Error, Result};
pub use frames::{KahlerAngles, PointData};
