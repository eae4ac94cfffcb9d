//! Analytical toolkit for absolute NV-center vector magnetometry.
//!
//! The crate is organized along the processing chain of an ODMR
//! magnetometer:
//!
//! * [`model`] – NV calibration constants, the ground-state spin Hamiltonian
//!   and its depressed characteristic cubic.
//! * [`eigen`] – a cyclic Jacobi eigensolver for real symmetric 3×3
//!   matrices, used as an independent numerical reference.
//! * [`forward`] – resonance frequencies from a known field (closed-form
//!   trigonometric roots).
//! * [`inverse`] – field magnitude and cone angle per NV axis from a
//!   measured resonance pair, hyperfine preprocessing and the aligned-field
//!   approximation.
//! * [`budget`] – itemized accuracy budget of a field measurement.
//! * [`reconstruct`], [`symmetry`], [`calibration`] – four-axis vector
//!   reconstruction, the 48-fold cubic ambiguity and frame calibration.
//! * [`lineshape`] – Gaussian/Lorentzian/Voigt ODMR models, the Faddeeva
//!   function, damped least-squares fitting and shot-noise sensitivity.
//! * [`pipeline`], [`baseline`], [`bench`] – the end-to-end analytical chain,
//!   a gradient-descent reference solver and the timing harness comparing
//!   them.
//!
//! Units throughout: frequencies in MHz, fields in mT, gyromagnetic ratio in
//! MHz/mT.

// `!(x > 0.0)` is how NaN gets rejected along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod bench;
pub mod budget;
pub mod calibration;
pub mod eigen;
pub mod error;
pub mod forward;
pub mod inverse;
pub mod lineshape;
pub mod model;
pub mod pipeline;
pub mod reconstruct;
pub mod symmetry;

pub use error::{Error, Result};
pub use forward::{resonances, resonances_all_axes, viete_roots, ResonancePair, NV_AXES};
pub use inverse::{AxisMeasurement, Estimate, HyperfineMode, SpectralLine};
pub use model::{FieldPolar, GTensor, NvParams};
pub use reconstruct::{reconstruct, ConeSet, FieldVector, SignTuple};
