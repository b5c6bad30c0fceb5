//! Continuum-percolation Monte Carlo simulator for ad hoc cognitive radio
//! networks: Poisson secondary and primary fields, disk-model spectrum
//! opportunities, per-slot communication graphs, flooding-based minimum
//! multihop delay, and the experiment drivers built on them.

pub mod cli;
pub mod config;
pub mod delay;
pub mod experiments;
pub mod geometry;
pub mod graph;
pub mod opportunity;
pub mod pointprocess;
pub mod stats;

pub use geometry::{distance, BoxRegion, Point2D, SpatialIndex};
pub use graph::{
    build_comm_graph, build_topo_graph, crossing_exists, giant_component, theta_estimate,
    CommGraph, Components, LinkGraph, Orientation, TopoGraph, UnionFind,
};
pub use opportunity::{
    estimate_p0, has_bidirectional_opportunity, has_opportunity, OpportunityContext,
};
pub use pointprocess::{
    sample_poisson_points, sample_primary_slot, sample_secondary_network, PrimarySlotRealization,
    SecondaryNetwork, SeededRng, SimulationParams,
};
