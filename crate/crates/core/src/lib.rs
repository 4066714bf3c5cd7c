//! Level-by-level construction of singular solutions for generalized Métivier operators
//! and numerical certification of the estimates behind their sharp Gevrey index.

pub mod error;
pub mod exactnum;
pub mod poly;
pub mod spectral;
pub mod coeffs;
pub mod quad;
pub mod cutoff;
pub mod greens;
pub mod solver;
pub mod transform;
pub mod suite;

pub use error::{Error, Result};
pub use exactnum::{derive_params, ComplexHP, Params, Q};
