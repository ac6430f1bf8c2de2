//! JSON scenario files and the pipeline that runs them.

mod config;
mod output;
mod run;

pub use config::*;
pub use output::{emit_outputs, sha256_hex, write_atomic};
pub use run::{
    run_scenario, ApproxSpectrum, ApproxSummary, ComparisonTrace, Deviation, EigenSummary,
    EnsembleSummary, FileRecord, Histogram, ResolvedPulse, RunReport, ScenarioOutput, StageTiming,
    UnitsEcho,
};

/// Runs a scenario and writes its outputs.
pub fn run_and_emit(config: &ScenarioConfig) -> crate::Result<ScenarioOutput> {
    let mut out = run_scenario(config)?;
    emit_outputs(&mut out)?;
    Ok(out)
}

/// Runs a scenario with both solvers and returns the per-dot deviation.
pub fn compare_som_tb(config: &ScenarioConfig) -> crate::Result<(Deviation, ScenarioOutput)> {
    let mut cfg = config.clone();
    cfg.solver = Some(SolverSelection::Both);
    let out = run_scenario(&cfg)?;
    let dev = out
        .report
        .comparison
        .clone()
        .expect("both solvers produce a comparison");
    Ok((dev, out))
}
