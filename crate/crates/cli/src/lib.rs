//! Experiment runner on top of `chebexpo-core`: TOML configs, path and
//! approximant files, exposure experiments, adaptive sweeps, XVA and
//! diagnostics reports.

pub mod adaptive;
pub mod bench;
pub mod config;
pub mod diagnostics;
pub mod experiment;
pub mod formats;
pub mod report;
pub mod xva;

pub use config::RunConfig;
