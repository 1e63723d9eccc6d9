//! Non-Hermitian directed-chain lattices and the pure skin effect.
//!
//! The crate builds ring, chart, open-chain and 2D cascaded Hamiltonians
//! with non-reciprocal hopping, diagonalizes them with a dense complex
//! eigensolver, and checks the resulting eigenstates: exponential profiles
//! without oscillation, decay constants that split a fixed logarithmic
//! budget between the two chain directions, the boundary-matching
//! determinant condition, and closed-form spectra.

pub mod eigensolve;
pub mod error;
pub mod experiment;
pub mod export;
pub mod gbz;
pub mod lattice;
pub mod matrix;
pub mod pse;
pub mod spectra;

pub use eigensolve::{degeneracy_groups, eigendecompose, residual_check, EigenSystem};
pub use error::{Error, Result};
pub use lattice::{
    build_chart, build_lattice2d, build_obc_chain, build_ring, build_segmented_ring,
    build_uniform_ring, ChartSpec, Direction, HoppingRatio, Lattice2DSpec, ModelSpec,
    ObcChainSpec, RingSpec, SegmentedRingSpec, UniformRingSpec,
};
pub use matrix::ComplexMatrix;
pub use num_complex::Complex64;
