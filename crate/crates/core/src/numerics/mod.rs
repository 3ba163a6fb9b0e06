//! Numerical building blocks shared by the model, attribution and
//! correction layers.

pub mod binom;
pub mod dd;
pub mod lm;
pub mod lstsq;
pub mod quadrature;
pub mod sum;

pub use binom::{binomial, binomial_dd};
pub use dd::DoubleDouble;
pub use lstsq::{lstsq, LstsqError};
pub use quadrature::GaussLegendre;
pub use sum::{compensated_sum, NeumaierSum};
