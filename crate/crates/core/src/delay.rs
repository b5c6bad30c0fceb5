//! Minimum multihop delay by contention-free flooding.
//!
//! Every informed secondary forwards the message over each communication
//! link of the current slot. With zero propagation delay a message
//! crosses a whole communication component instantly; with positive delay
//! each hop costs `propagation_delay` and must finish inside the slot it
//! started in.

use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::{self, Write};
use thiserror::Error;

use crate::graph::{build_comm_graph, giant_component, LinkGraph, TopoGraph};
use crate::pointprocess::{
    sample_primary_slot, ParamError, SecondaryNetwork, SeededRng, SimulationParams,
};
use crate::stats::{quantile_sorted, sorted_copy};

pub const DEFAULT_HORIZON_SLOTS: u64 = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DelayError {
    #[error("source node {node} is not in a network of {nodes} nodes")]
    SourceNotInNetwork { node: u32, nodes: usize },
    #[error("horizon must be at least one slot")]
    ZeroHorizon,
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("distance band [{lo}, {hi}) km holds {found} points, need at least {needed}")]
    TooFewPoints {
        lo: f64,
        hi: f64,
        found: usize,
        needed: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeStatus {
    Reached,
    /// Topologically reachable but not informed within the horizon.
    Horizon,
    /// No topological path from the source.
    Unreachable,
}

impl NodeStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeStatus::Reached => "reached",
            NodeStatus::Horizon => "horizon",
            NodeStatus::Unreachable => "unreachable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub newly_informed: usize,
    pub comm_edges: usize,
    pub giant_present: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayTrace {
    pub records: Vec<SlotRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloodResult {
    pub source: u32,
    /// First reception time in seconds, `None` if never informed.
    pub arrival_time: Vec<Option<f64>>,
    /// Slot index of first reception.
    pub arrival_slot: Vec<Option<u64>>,
    pub status: Vec<NodeStatus>,
    pub slots_used: u64,
    pub horizon_slots: u64,
    pub trace: DelayTrace,
}

impl FloodResult {
    pub fn reached(&self) -> usize {
        self.arrival_time.iter().filter(|a| a.is_some()).count()
    }

    pub fn count_status(&self, status: NodeStatus) -> usize {
        self.status.iter().filter(|&&s| s == status).count()
    }
}

/// Floods a message from `source` over the slotted communication graphs of
/// `topo`'s network. Slot `t` uses the primary field derived from
/// `rng` and `t`, so extending the horizon never alters earlier slots.
pub fn flood(
    topo: &TopoGraph,
    source: u32,
    params: &SimulationParams,
    horizon_slots: u64,
    rng: &SeededRng,
) -> Result<FloodResult, DelayError> {
    params.validate()?;
    let n = topo.node_count();
    if source as usize >= n {
        return Err(DelayError::SourceNotInNetwork {
            node: source,
            nodes: n,
        });
    }
    if horizon_slots == 0 {
        return Err(DelayError::ZeroHorizon);
    }
    let region = *topo.network().region();
    let topo_comps = topo.components();
    let source_label = topo_comps.label(source);
    let target = topo_comps.size_of(source_label);

    let mut slot_of: Vec<Option<u64>> = vec![None; n];
    let mut time_of: Vec<Option<f64>> = vec![None; n];
    slot_of[source as usize] = Some(0);
    time_of[source as usize] = Some(0.0);
    let mut informed = vec![source];
    let mut trace = DelayTrace::default();
    let mut slots_used = 0;

    let max_hops = if params.propagation_delay > 0.0 {
        // Guard against T/τ landing a hair under an integer.
        ((params.slot_length / params.propagation_delay) * (1.0 + 1e-12)).floor() as u64
    } else {
        u64::MAX
    };
    let mut hops = vec![u64::MAX; n];
    let mut component_hot = vec![false; n];

    for t in 0..horizon_slots {
        if informed.len() == target {
            break;
        }
        slots_used = t + 1;
        let field = sample_primary_slot(params, &region, t, rng);
        let comm = build_comm_graph(topo, &field, params);
        let slot_start = t as f64 * params.slot_length;
        let before = informed.len();

        if params.propagation_delay == 0.0 {
            let comps = comm.components();
            for &u in &informed {
                component_hot[comps.label(u) as usize] = true;
            }
            for v in 0..n as u32 {
                if slot_of[v as usize].is_none() && component_hot[comps.label(v) as usize] {
                    slot_of[v as usize] = Some(t);
                    time_of[v as usize] = Some(slot_start);
                    informed.push(v);
                }
            }
            for &u in &informed[..before] {
                component_hot[comps.label(u) as usize] = false;
            }
            for &u in &informed[before..] {
                component_hot[comps.label(u) as usize] = false;
            }
        } else {
            // Earliest arrival inside the slot; every hop costs the same
            // delay, so (hop count, node id) orders the queue.
            let mut heap = BinaryHeap::new();
            for &u in &informed {
                hops[u as usize] = 0;
                heap.push(Reverse((0u64, u)));
            }
            while let Some(Reverse((h, u))) = heap.pop() {
                if h > hops[u as usize] || h >= max_hops {
                    continue;
                }
                for &v in comm.neighbors(u) {
                    if h + 1 < hops[v as usize] {
                        hops[v as usize] = h + 1;
                        heap.push(Reverse((h + 1, v)));
                    }
                }
            }
            for v in 0..n as u32 {
                let h = hops[v as usize];
                if h != u64::MAX && slot_of[v as usize].is_none() {
                    slot_of[v as usize] = Some(t);
                    time_of[v as usize] = Some(slot_start + h as f64 * params.propagation_delay);
                    informed.push(v);
                }
                hops[v as usize] = u64::MAX;
            }
        }

        trace.records.push(SlotRecord {
            slot: t,
            newly_informed: informed.len() - before,
            comm_edges: comm.edge_count(),
            giant_present: giant_component(&comm, &region).is_some(),
        });
    }

    let status = (0..n as u32)
        .map(|v| {
            if slot_of[v as usize].is_some() {
                NodeStatus::Reached
            } else if topo_comps.label(v) == source_label {
                NodeStatus::Horizon
            } else {
                NodeStatus::Unreachable
            }
        })
        .collect();

    Ok(FloodResult {
        source,
        arrival_time: time_of,
        arrival_slot: slot_of,
        status,
        slots_used,
        horizon_slots,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub node: u32,
    /// Source-to-node distance, km.
    pub distance: f64,
    /// Arrival time over distance, s/km.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCurve {
    pub points: Vec<RatioPoint>,
    /// Nodes other than the source that were never informed.
    pub unreached: usize,
}

/// MMD-to-distance ratio for every informed node other than the source.
/// Nodes co-located with the source are dropped.
pub fn mmd_ratio_curve(result: &FloodResult, network: &SecondaryNetwork) -> RatioCurve {
    let pts = network.points();
    let src = pts[result.source as usize];
    let mut points = Vec::new();
    let mut unreached = 0;
    for (v, arrival) in result.arrival_time.iter().enumerate() {
        if v as u32 == result.source {
            continue;
        }
        let Some(t) = arrival else {
            unreached += 1;
            continue;
        };
        let d = src.distance(&pts[v]);
        if d > 0.0 {
            points.push(RatioPoint {
                node: v as u32,
                distance: d,
                ratio: t / d,
            });
        }
    }
    RatioCurve { points, unreached }
}

/// Half-open distance interval `[lo, hi)` in km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBand {
    pub lo: f64,
    pub hi: f64,
}

impl DistanceBand {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, d: f64) -> bool {
        d >= self.lo && d < self.hi
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.lo * s, self.hi * s)
    }
}

/// `[0.5,1), [1,2), [2,3), [3,4), [4,5)` km.
pub fn default_bands() -> Vec<DistanceBand> {
    vec![
        DistanceBand::new(0.5, 1.0),
        DistanceBand::new(1.0, 2.0),
        DistanceBand::new(2.0, 3.0),
        DistanceBand::new(3.0, 4.0),
        DistanceBand::new(4.0, 5.0),
    ]
}

pub const MIN_BAND_POINTS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub band: DistanceBand,
    /// Median ratio in the band, s/km.
    pub rate: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub count: usize,
}

pub fn band_ratios(points: &[RatioPoint], band: DistanceBand) -> Vec<f64> {
    points
        .iter()
        .filter(|p| band.contains(p.distance))
        .map(|p| p.ratio)
        .collect()
}

/// Median ratio and interquartile range over the points in `band`.
pub fn fit_scaling_rate(points: &[RatioPoint], band: DistanceBand) -> Result<RateFit, DelayError> {
    let ratios = band_ratios(points, band);
    if ratios.len() < MIN_BAND_POINTS {
        return Err(DelayError::TooFewPoints {
            lo: band.lo,
            hi: band.hi,
            found: ratios.len(),
            needed: MIN_BAND_POINTS,
        });
    }
    let sorted = sorted_copy(&ratios);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    Ok(RateFit {
        band,
        rate: quantile_sorted(&sorted, 0.5),
        q1,
        q3,
        iqr: q3 - q1,
        count: sorted.len(),
    })
}

/// CSV with columns `node_id,x_km,y_km,distance_km,arrival_s,status`;
/// `arrival_s` is empty for nodes never informed.
pub fn write_flood_csv<W: Write>(
    result: &FloodResult,
    network: &SecondaryNetwork,
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "node_id,x_km,y_km,distance_km,arrival_s,status")?;
    let pts = network.points();
    let src = pts[result.source as usize];
    for (v, p) in pts.iter().enumerate() {
        let arrival = result.arrival_time[v]
            .map(|t| t.to_string())
            .unwrap_or_default();
        writeln!(
            w,
            "{v},{},{},{},{arrival},{}",
            p.x,
            p.y,
            src.distance(p),
            result.status[v].as_str()
        )?;
    }
    Ok(())
}
