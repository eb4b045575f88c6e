//! Shared fixtures for the benchmarks.

use ssvcqr::simulation::{generate_dataset, DgpConfig, ErrorLaw, SimulatedData};
use ssvcqr::{lambda_anchors, PenaltyConfig};

/// The synthetic design with `n` sites under normal errors.
pub fn design(n: usize) -> SimulatedData {
    generate_dataset(&DgpConfig::new(n, ErrorLaw::Normal, 1)).expect("valid design")
}

/// Unit-weight penalties at the grid anchors, in full-sample units.
pub fn anchor_penalty(sim: &SimulatedData) -> PenaltyConfig {
    let (a1, a2) = lambda_anchors(&sim.train, &sim.graph, 0.5).expect("anchors");
    let n = sim.train.n() as f64;
    PenaltyConfig::new(0.5, a1 * n, a2 * n, sim.train.p())
}
