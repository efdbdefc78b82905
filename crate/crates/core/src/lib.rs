pub mod error;
pub mod inference;
pub mod io;
pub mod kernels;
pub mod numerics;
pub mod fit;
pub mod baselines;
pub mod cli;
pub mod evaluation;
pub mod predict;
pub mod simulator;
