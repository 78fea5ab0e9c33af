//! Command-line plumbing for the `altserve` binary: experiment specs,
//! grid evaluation, CSV rendering and the built-in figure presets.

pub mod error;
pub mod run;
pub mod spec;

use altserve_core::distributions::fit;
use altserve_core::{Law, Moments, ServiceLaw};
use serde::Serialize;

pub use error::CliError;
pub use spec::ExperimentSpec;

/// Built-in experiment presets, by subcommand name.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "fig2" => Some(include_str!("../presets/fig2.json")),
        "fig3" => Some(include_str!("../presets/fig3.json")),
        "fig4" => Some(include_str!("../presets/fig4.json")),
        _ => None,
    }
}

/// A fitted law with the moments it actually reproduces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub law: ServiceLaw,
    pub mean: f64,
    pub scv: f64,
}

pub fn fit_report(mean: f64, scv: f64) -> Result<FitReport, CliError> {
    let law = fit(Moments::new(mean, scv)?)?;
    Ok(FitReport { mean: law.mean(), scv: law.scv()?, law })
}

/// Worker count from `ALTSERVE_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("ALTSERVE_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::spec(format!("ALTSERVE_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}
