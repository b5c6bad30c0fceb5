//! Disk-model spectrum opportunities.
//!
//! A secondary transmitter at `tx` may reach a secondary receiver at `rx` in
//! a slot when no primary receiver lies within the secondary interference
//! range of `tx` and no primary transmitter lies within the primary
//! interference range of `rx`. Blocking is boundary inclusive.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{BoxRegion, Point2D};
use crate::pointprocess::{
    sample_primary_slot, PrimarySlotRealization, SeededRng, SimulationParams,
};

#[derive(Debug, Clone, Copy)]
pub struct OpportunityContext<'a> {
    pub primary: &'a PrimarySlotRealization,
    /// Protection radius around the secondary transmitter.
    pub secondary_interference_range: f64,
    /// Radius around the secondary receiver that must be free of primary transmitters.
    pub primary_interference_range: f64,
}

impl<'a> OpportunityContext<'a> {
    pub fn new(primary: &'a PrimarySlotRealization, params: &SimulationParams) -> Self {
        Self {
            primary,
            secondary_interference_range: params.secondary_interference_range,
            primary_interference_range: params.primary_interference_range,
        }
    }

    /// A primary receiver inside the protection disk of `p` silences it as a transmitter.
    pub fn blocks_transmit(&self, p: &Point2D) -> bool {
        self.primary
            .rx_index()
            .any_within(p, self.secondary_interference_range)
    }

    /// A primary transmitter near `p` jams it as a receiver.
    pub fn blocks_receive(&self, p: &Point2D) -> bool {
        self.primary
            .tx_index()
            .any_within(p, self.primary_interference_range)
    }

    /// True when `p` can take part in a bidirectional link this slot.
    pub fn node_available(&self, p: &Point2D) -> bool {
        !self.blocks_transmit(p) && !self.blocks_receive(p)
    }
}

pub fn has_opportunity(tx: &Point2D, rx: &Point2D, ctx: &OpportunityContext<'_>) -> bool {
    !ctx.blocks_transmit(tx) && !ctx.blocks_receive(rx)
}

/// Opportunity in both directions; symmetric in its endpoints.
pub fn has_bidirectional_opportunity(
    a: &Point2D,
    b: &Point2D,
    ctx: &OpportunityContext<'_>,
) -> bool {
    has_opportunity(a, b, ctx) && has_opportunity(b, a, ctx)
}

/// Monte Carlo frequency with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl ProbabilityEstimate {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        let p = successes as f64 / trials as f64;
        Self {
            estimate: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }
}

/// Endpoints of a test pair of length `hop_length` centred in `region`.
pub fn centered_pair(region: &BoxRegion, hop_length: f64) -> (Point2D, Point2D) {
    let c = region.center();
    (
        Point2D::new(c.x - 0.5 * hop_length, c.y),
        Point2D::new(c.x + 0.5 * hop_length, c.y),
    )
}

/// Probability that a fixed pair at separation `hop_length` sees a
/// bidirectional opportunity in a fresh slot.
pub fn estimate_p0(
    hop_length: f64,
    params: &SimulationParams,
    region: &BoxRegion,
    n_trials: u64,
    rng: &SeededRng,
) -> ProbabilityEstimate {
    assert!(n_trials >= 1, "need at least one trial");
    let (a, b) = centered_pair(region, hop_length);
    let successes = (0..n_trials)
        .into_par_iter()
        .filter(|&trial| {
            let field = sample_primary_slot(params, region, trial, rng);
            let ctx = OpportunityContext::new(&field, params);
            has_bidirectional_opportunity(&a, &b, &ctx)
        })
        .count() as u64;
    ProbabilityEstimate::from_counts(successes, n_trials)
}

/// Smallest square around the test pair whose padded primary field covers
/// every primary user able to affect the pair.
pub fn local_region(params: &SimulationParams, hop_length: f64) -> BoxRegion {
    let half = 0.5 * hop_length
        + params.primary_range
        + params
            .secondary_interference_range
            .max(params.primary_interference_range);
    BoxRegion::centered_square(half.max(params.secondary_range)).expect("positive half side")
}
