//! Numerical evaluation of meromorphic modular forms with poles at
//! CM-points, their weight 2-2k polar harmonic Maass companions, higher
//! Green's functions on SL2(Z), and regularized Petersson inner products,
//! with cross-checked closed-form and quadrature evaluation routes.

pub mod ellexp;
pub mod error;
pub mod operators;
pub mod policy;

pub mod greens;
pub mod hyperbolic;
pub mod inner;
pub mod latsum;
pub mod qform;
pub mod modforms;
pub mod specfun;

pub use error::{Error, Result};
pub use hyperbolic::HPoint;
pub use policy::{EvalResult, SumPolicy, Weight};
pub use qform::{BinaryQuadraticForm, UnimodularMatrix};
