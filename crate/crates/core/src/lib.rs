//! Low-fidelity synthetic data (LFSD) generation and pre-release checks.

pub mod affix;
pub mod dataset;
pub mod numeric;
pub mod schema;
pub mod synthesis;
pub mod transform;
pub mod risk;
pub mod sdc;
pub mod checks;
pub mod fidelity;
pub mod config;
pub mod pipeline;
