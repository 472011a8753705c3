//! Numerical time-frequency analysis: ordered bases and lattices, moderate
//! weights, short-time Fourier transforms, mixed quasi-norms, Wiener amalgam
//! and modulation-space norms, Gabor frames and periodic Fourier analysis.

pub mod error;
pub mod field;
pub mod gabor;
pub mod lattice;
pub mod convolution;
pub mod corpus;
pub mod mixed;
pub mod modulation;
pub mod parallel;
pub mod periodic;
pub mod stft;
pub mod study;
pub mod sum;
pub mod weight;
pub mod wiener;
pub mod window;

pub use error::{Error, Result};
pub use lattice::{cell_index, phase_split, Lattice, OrderedBasis, PhaseSplitBasis};
pub use field::{Codomain, GridSpec, SampledField};
pub use mixed::{Exponent, ExponentVector, LatticeSequence, MixedNormSpec};
pub use periodic::TrigPolynomial;
pub use stft::StftField;
pub use weight::Weight;
pub use window::Window;

pub use num_complex::Complex64;
