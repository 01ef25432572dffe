//! Certifying and decomposing random overcomplete third-order tensors.
//!
//! The crate works with symmetric tensors `T = Σ_i a_i^{⊗3}` (optionally
//! plus a small dense perturbation) and provides
//!
//! * a component-aware upper bound on the injective norm ([`certificate`]),
//! * a low-degree moment relaxation for tiny component-free instances ([`moment`]),
//! * component recovery by multi-start ascent with deflation ([`decomposition`]),
//! * Monte Carlo checks of the concentration steps behind the bound ([`lab`]).
//!
//! All randomness is derived from explicit seeds through [`rng::stream`].

pub mod certificate;
pub mod decomposition;
pub mod error;
pub mod instances;
pub mod io;
pub mod lab;
pub mod moment;
pub mod rng;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{ComponentSet, DenseTensor, Ensemble, SymmetricTensor3};
