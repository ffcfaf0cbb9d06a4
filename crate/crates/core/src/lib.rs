pub mod error;
pub mod funcclass;
pub mod rng;
pub mod surrogate;
pub mod distributions;
pub mod oracle;
pub mod projection;
pub mod version_space;
pub mod learner;
pub mod evaluation;
pub mod cli;
