//! Exact and sampled machinery for the limiting marginals of random 2-SAT.

pub mod acceptance;
pub mod analysis;
pub mod densityev;
pub mod distance;
pub mod error;
pub mod formula;
pub mod gwsim;
pub mod population;
pub mod rng;
pub mod sign;
pub mod transform;
pub mod treebp;

pub use error::{Error, Result};
pub use sign::Sign;
