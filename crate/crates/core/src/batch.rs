//! Running many independent simulations.
//!
//! With the `parallel` feature (default) jobs are spread over a rayon pool;
//! without it they run one after another. Results keep job order either way.

use std::collections::BTreeSet;

use crate::controller::{Strategy, StrategyConfig};
use crate::engine::{run, EngineError};
use crate::metrics::MetricsReport;
use crate::scenario::Scenario;

pub type Job<'a> = (&'a Scenario, StrategyConfig);

pub fn run_sequential(jobs: &[Job<'_>]) -> Vec<Result<MetricsReport, EngineError>> {
    jobs.iter().map(|(s, c)| run(s, c)).collect()
}

#[cfg(feature = "parallel")]
pub fn run_batch(jobs: &[Job<'_>]) -> Vec<Result<MetricsReport, EngineError>> {
    use rayon::prelude::*;
    jobs.par_iter().map(|(s, c)| run(s, c)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_batch(jobs: &[Job<'_>]) -> Vec<Result<MetricsReport, EngineError>> {
    run_sequential(jobs)
}

#[cfg(feature = "parallel")]
fn both<A: Send, B: Send>(a: impl FnOnce() -> A + Send, b: impl FnOnce() -> B + Send) -> (A, B) {
    rayon::join(a, b)
}

#[cfg(not(feature = "parallel"))]
fn both<A, B>(a: impl FnOnce() -> A, b: impl FnOnce() -> B) -> (A, B) {
    (a(), b())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub baseline: MetricsReport,
    pub optimized: MetricsReport,
}

impl Comparison {
    /// First (vehicle, payload) delivered under one strategy but not the other.
    pub fn first_divergence(&self) -> Option<String> {
        let a = self.baseline.delivered();
        let b = self.optimized.delivered();
        let vehicles: BTreeSet<_> = a.keys().chain(b.keys()).collect();
        let empty = BTreeSet::new();
        for v in vehicles {
            let x = a.get(v).unwrap_or(&empty);
            let y = b.get(v).unwrap_or(&empty);
            if let Some(p) = x.symmetric_difference(y).next() {
                let only = if x.contains(p) {
                    Strategy::Baseline
                } else {
                    Strategy::Optimized
                };
                return Some(format!("vehicle {v} payload {p} delivered only under {only}"));
            }
        }
        None
    }
}

/// Runs both strategies on one scenario. `cfg.strategy` is ignored.
pub fn compare(scenario: &Scenario, cfg: &StrategyConfig) -> Result<Comparison, EngineError> {
    let base = StrategyConfig {
        strategy: Strategy::Baseline,
        ..*cfg
    };
    let opt = StrategyConfig {
        strategy: Strategy::Optimized,
        ..*cfg
    };
    let (b, o) = both(|| run(scenario, &base), || run(scenario, &opt));
    Ok(Comparison {
        baseline: b?,
        optimized: o?,
    })
}
