pub mod autodiff;
pub mod cli;
pub mod error;
pub mod genmod;
pub mod nn;
pub mod objectives;
pub mod odeflow;
pub mod optim;
pub mod report;
pub mod rl;
pub mod rng;
pub mod statutil;
pub mod stochastic;
pub mod uat;

pub use error::{Error, Result};
