//! Error exponents for joint source-channel coding with side information at
//! the decoder, evaluated numerically on finite alphabets.
//!
//! Every quantity is in bits. Infinite exponents are `f64::INFINITY`.

pub mod channel;
pub mod error;
pub mod joint;
pub mod optim;
pub mod probkit;
pub mod sim;
pub mod source;
pub mod tradeoff;

pub use error::{Error, Result};
pub use probkit::{ConditionalDistribution, Distribution, JointDistribution};
