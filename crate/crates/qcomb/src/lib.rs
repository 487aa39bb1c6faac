//! Quantum combs, interactive measurements and the uncertainty bounds that
//! constrain them.
//!
//! The numerical core (`tensor`, `comb`, `measurement`) is generic over a
//! floating-point scalar; the optimisation layers (`sdp`, `roulette`,
//! `causal`) run in `f64`. `majorization` only needs ordered field
//! arithmetic, so it also works over exact rationals.

pub mod causal;
pub mod comb;
pub mod error;
pub mod format;
pub mod linalg;
pub mod majorization;
pub mod measurement;
pub mod roulette;
pub mod scalar;
pub mod sdp;
pub mod spec;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Real;

pub type C64 = num_complex::Complex<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type Operator = tensor::LabeledOperator<f64>;
pub type Channel = comb::Channel<f64>;
pub type Fragment = comb::CircuitFragment<f64>;
pub type Tester = measurement::InteractiveMeasurement<f64>;
