//! Distribution-specific agnostic boosting over the Boolean cube.
//!
//! The crate covers the function-space substrate ([`space`]), example and
//! residual oracles ([`oracles`]), weak learners ([`learners`]), the three
//! boosting loops ([`boost`]), end-to-end learners ([`apps`]) and hard-core
//! measure construction ([`hardcore`]).

pub mod apps;
pub mod boost;
pub mod codec;
pub mod concepts;
pub mod error;
pub mod fourier;
pub mod hardcore;
pub mod learners;
pub mod numeric;
pub mod oracles;
pub mod rng;
pub mod space;

pub use error::{Error, Result};
