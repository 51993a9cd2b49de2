//! Checksum-based fault tolerance for 2D/3D stencil computations.
//!
//! A stencil sweep updates every grid cell with a fixed weighted sum of its
//! neighbors plus an optional constant term. Row and column checksums of the
//! grid are cheap algebraic invariants of that update: the checksum vectors
//! after a sweep can be predicted by applying the stencil's 1D analogue to
//! the checksum vectors before the sweep. Comparing the predicted checksums
//! against directly computed ones detects silent data corruption (memory
//! bit-flips) without replicating any work, and the mismatch coordinates
//! localize the corrupted cell so it can be reconstructed in place.
//!
//! The crate provides:
//!
//! - [`grid`]: grids, stencils, boundary policies and the reference sweep
//! - [`checksum`]: direct checksums and the fused sweep-plus-checksum kernel
//! - [`online`]: per-iteration interpolation, detection and in-place repair
//! - [`offline`]: periodic detection with checkpoint/rollback recovery
//! - [`fault`]: deterministic seeded bit-flip injection
//! - [`kernels`]: built-in stencil definitions, including a thermal kernel
//! - [`campaign`]: fault-injection experiment orchestration and statistics
//! - [`io`]: the `ABFTGRID` grid file format and checkpoint spill files

pub mod campaign;
pub mod checksum;
mod element;
mod error;
pub mod fault;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod offline;
pub mod online;
mod parallel;
pub mod rng;

pub use element::{Dtype, Element};
pub use error::{Axis, Error, Result, Uncorrectable};
pub use parallel::Parallelism;
