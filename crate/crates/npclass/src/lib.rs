//! File formats, the simulation harness and the command-line front end for `npclass-core`.

pub use npclass_core as core;

pub mod cli;
pub mod io;
pub mod model_file;
pub mod quadrature;
pub mod sim;
pub mod theory;
