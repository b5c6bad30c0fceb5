//! Topological and per-slot communication graphs over the secondary
//! network, union-find component labelling, and rectangle crossings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use std::sync::Arc;
use thiserror::Error;

use crate::geometry::{within, BoxRegion, GeometryError, SpatialIndex};
use crate::opportunity::OpportunityContext;
use crate::pointprocess::{
    sample_primary_slot, sample_secondary_network, PrimarySlotRealization, SecondaryNetwork,
    SeededRng, SimulationParams,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("crossing rectangle: {0}")]
    DegenerateRect(#[from] GeometryError),
}

/// Disjoint sets with path compression and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = x;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    /// Returns `true` if the two sets were distinct.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (big, small) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        true
    }

    pub fn same(&mut self, a: u32, b: u32) -> bool {
        self.find(a) == self.find(b)
    }

    /// Canonical labelling: each component is named by its smallest member.
    pub fn into_components(mut self) -> Components {
        let n = self.len();
        let mut min_of_root = vec![u32::MAX; n];
        let mut labels = vec![0u32; n];
        for u in 0..n as u32 {
            let r = self.find(u) as usize;
            if min_of_root[r] == u32::MAX {
                min_of_root[r] = u;
            }
            labels[u as usize] = min_of_root[r];
        }
        Components::from_labels(labels)
    }
}

/// Component labels; a label is the smallest node id of its component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    labels: Vec<u32>,
    size_by_label: Vec<u32>,
    count: usize,
}

impl Components {
    fn from_labels(labels: Vec<u32>) -> Self {
        let mut size_by_label = vec![0u32; labels.len()];
        for &l in &labels {
            size_by_label[l as usize] += 1;
        }
        let count = size_by_label.iter().filter(|&&s| s > 0).count();
        Self {
            labels,
            size_by_label,
            count,
        }
    }

    pub fn label(&self, u: u32) -> u32 {
        self.labels[u as usize]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn size_of(&self, label: u32) -> usize {
        self.size_by_label[label as usize] as usize
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `(label, size)` pairs in ascending label order.
    pub fn sizes(&self) -> Vec<(u32, usize)> {
        self.size_by_label
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0)
            .map(|(l, &s)| (l as u32, s as usize))
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Adjacency {
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl Adjacency {
    fn from_edges(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut offsets = vec![0u32; n + 1];
        for &(u, v) in edges {
            offsets[u as usize + 1] += 1;
            offsets[v as usize + 1] += 1;
        }
        for i in 1..=n {
            offsets[i] += offsets[i - 1];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0u32; 2 * edges.len()];
        // Edges are sorted, so each neighbour list comes out ascending.
        for &(u, v) in edges {
            targets[fill[u as usize] as usize] = v;
            fill[u as usize] += 1;
        }
        for &(u, v) in edges {
            targets[fill[v as usize] as usize] = u;
            fill[v as usize] += 1;
        }
        for u in 0..n {
            targets[offsets[u] as usize..offsets[u + 1] as usize].sort_unstable();
        }
        Self { offsets, targets }
    }

    fn neighbors(&self, u: u32) -> &[u32] {
        &self.targets[self.offsets[u as usize] as usize..self.offsets[u as usize + 1] as usize]
    }
}

fn components_of(n: usize, edges: &[(u32, u32)]) -> Components {
    let mut uf = UnionFind::new(n);
    for &(u, v) in edges {
        uf.union(u, v);
    }
    uf.into_components()
}

/// Common read access to topological and communication graphs.
pub trait LinkGraph {
    fn network(&self) -> &SecondaryNetwork;
    /// Secondary transmission range the graph was built with.
    fn range(&self) -> f64;
    /// Undirected edges `(u, v)` with `u < v`, sorted.
    fn edges(&self) -> &[(u32, u32)];
    fn neighbors(&self, u: u32) -> &[u32];
    fn components(&self) -> &Components;

    fn node_count(&self) -> usize {
        self.network().len()
    }

    fn edge_count(&self) -> usize {
        self.edges().len()
    }
}

/// The static disk graph: secondaries within `range` of each other are linked.
#[derive(Debug, Clone)]
pub struct TopoGraph {
    network: Arc<SecondaryNetwork>,
    range: f64,
    edges: Vec<(u32, u32)>,
    adjacency: Adjacency,
    components: Components,
}

impl LinkGraph for TopoGraph {
    fn network(&self) -> &SecondaryNetwork {
        &self.network
    }
    fn range(&self) -> f64 {
        self.range
    }
    fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }
    fn neighbors(&self, u: u32) -> &[u32] {
        self.adjacency.neighbors(u)
    }
    fn components(&self) -> &Components {
        &self.components
    }
}

impl TopoGraph {
    pub fn network_arc(&self) -> &Arc<SecondaryNetwork> {
        &self.network
    }
}

/// Exact disk graph (boundary inclusive). Each undirected pair is found
/// once by scanning a cell against itself and four forward neighbours.
pub fn build_topo_graph(network: Arc<SecondaryNetwork>, range: f64) -> TopoGraph {
    let rebuilt;
    let index: &SpatialIndex = if network.index().cell_size() >= range {
        network.index()
    } else {
        rebuilt = SpatialIndex::build(network.points().to_vec(), range);
        &rebuilt
    };
    let pts = network.points();
    let ((x0, y0), (nx, ny)) = index.cell_bounds();
    const FORWARD: [(i64, i64); 4] = [(1, 0), (-1, 1), (0, 1), (1, 1)];
    let mut edges = Vec::new();
    for cy in y0..y0 + ny as i64 {
        for cx in x0..x0 + nx as i64 {
            let here = index.cell_members((cx, cy));
            for (i, &u) in here.iter().enumerate() {
                for &v in &here[i + 1..] {
                    if within(&pts[u as usize], &pts[v as usize], range) {
                        edges.push((u.min(v), u.max(v)));
                    }
                }
            }
            for (dx, dy) in FORWARD {
                let there = index.cell_members((cx + dx, cy + dy));
                for &u in here {
                    for &v in there {
                        if within(&pts[u as usize], &pts[v as usize], range) {
                            edges.push((u.min(v), u.max(v)));
                        }
                    }
                }
            }
        }
    }
    edges.sort_unstable();
    let n = pts.len();
    TopoGraph {
        adjacency: Adjacency::from_edges(n, &edges),
        components: components_of(n, &edges),
        network,
        range,
        edges,
    }
}

/// Communication links of one primary slot.
#[derive(Debug, Clone)]
pub struct CommGraph {
    slot: u64,
    network: Arc<SecondaryNetwork>,
    range: f64,
    available: Vec<bool>,
    edges: Vec<(u32, u32)>,
    adjacency: Adjacency,
    components: Components,
}

impl LinkGraph for CommGraph {
    fn network(&self) -> &SecondaryNetwork {
        &self.network
    }
    fn range(&self) -> f64 {
        self.range
    }
    fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }
    fn neighbors(&self, u: u32) -> &[u32] {
        self.adjacency.neighbors(u)
    }
    fn components(&self) -> &Components {
        &self.components
    }
}

impl CommGraph {
    pub fn slot(&self) -> u64 {
        self.slot
    }

    /// Whether node `u` is free of blocking primaries this slot.
    pub fn is_available(&self, u: u32) -> bool {
        self.available[u as usize]
    }
}

/// Keeps the topological links that see a bidirectional opportunity.
///
/// A bidirectional opportunity on `(u, v)` requires both endpoints to be
/// clear of primary receivers within the secondary interference range and
/// of primary transmitters within the primary interference range, so the
/// test reduces to a per-node availability flag.
pub fn build_comm_graph(
    topo: &TopoGraph,
    realization: &PrimarySlotRealization,
    params: &SimulationParams,
) -> CommGraph {
    let ctx = OpportunityContext::new(realization, params);
    let available: Vec<bool> = topo
        .network
        .points()
        .iter()
        .map(|p| ctx.node_available(p))
        .collect();
    let edges: Vec<(u32, u32)> = topo
        .edges
        .iter()
        .copied()
        .filter(|&(u, v)| available[u as usize] && available[v as usize])
        .collect();
    let n = available.len();
    CommGraph {
        slot: realization.slot(),
        network: Arc::clone(&topo.network),
        range: topo.range,
        adjacency: Adjacency::from_edges(n, &edges),
        components: components_of(n, &edges),
        available,
        edges,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    LeftRight,
    TopBottom,
}

/// Clusters of the graph restricted to `rect`, with which sides each touches.
struct RectClusters {
    /// Per node inside `rect`: its restricted-cluster root.
    members: Vec<(u32, u32)>,
    /// Per root: bit 0 left, 1 right, 2 bottom, 3 top.
    touches: Vec<u8>,
}

const LEFT: u8 = 1;
const RIGHT: u8 = 2;
const BOTTOM: u8 = 4;
const TOP: u8 = 8;

fn rect_clusters<G: LinkGraph + ?Sized>(graph: &G, rect: &BoxRegion, range: f64) -> RectClusters {
    let pts = graph.network().points();
    let n = pts.len();
    let inside: Vec<bool> = pts.iter().map(|p| rect.contains(p)).collect();
    let mut uf = UnionFind::new(n);
    for &(u, v) in graph.edges() {
        if inside[u as usize] && inside[v as usize] {
            uf.union(u, v);
        }
    }
    let tol = 0.5 * range;
    let mut touches = vec![0u8; n];
    let mut members = Vec::new();
    for u in 0..n as u32 {
        if !inside[u as usize] {
            continue;
        }
        let p = &pts[u as usize];
        let root = uf.find(u);
        let mut t = 0u8;
        if (p.x - rect.x_min).abs() <= tol {
            t |= LEFT;
        }
        if (p.x - rect.x_max).abs() <= tol {
            t |= RIGHT;
        }
        if (p.y - rect.y_min).abs() <= tol {
            t |= BOTTOM;
        }
        if (p.y - rect.y_max).abs() <= tol {
            t |= TOP;
        }
        touches[root as usize] |= t;
        members.push((u, root));
    }
    RectClusters { members, touches }
}

fn spans(touch: u8, orientation: Orientation) -> bool {
    let need = match orientation {
        Orientation::LeftRight => LEFT | RIGHT,
        Orientation::TopBottom => BOTTOM | TOP,
    };
    touch & need == need
}

/// Whether a chain of graph-adjacent nodes, all inside `rect`, joins the
/// two sides of `rect` for `orientation`, with its end nodes within
/// `range / 2` of the respective sides.
pub fn crossing_exists<G: LinkGraph + ?Sized>(
    graph: &G,
    rect: &BoxRegion,
    orientation: Orientation,
    range: f64,
) -> Result<bool, GraphError> {
    let rect = BoxRegion::new(rect.x_min, rect.x_max, rect.y_min, rect.y_max)?;
    let clusters = rect_clusters(graph, &rect, range);
    Ok(clusters.touches.iter().any(|&t| spans(t, orientation)))
}

/// Finite-window stand-in for the infinite component: the component holding
/// both a left-right and a top-bottom crossing of `region` shrunk by the
/// transmission range. Ties go to the larger, then lower-labelled component.
pub fn giant_component<G: LinkGraph + ?Sized>(graph: &G, region: &BoxRegion) -> Option<u32> {
    let central = region.shrunk(graph.range()).ok()?;
    let clusters = rect_clusters(graph, &central, graph.range());
    let comps = graph.components();
    let n = graph.node_count();
    // Per full-graph label: bit 0 has LR-crossing cluster, bit 1 TB.
    let mut flags = vec![0u8; n];
    for &(u, root) in &clusters.members {
        if u != root {
            continue;
        }
        let t = clusters.touches[root as usize];
        let label = comps.label(u) as usize;
        if spans(t, Orientation::LeftRight) {
            flags[label] |= 1;
        }
        if spans(t, Orientation::TopBottom) {
            flags[label] |= 2;
        }
    }
    (0..n as u32)
        .filter(|&l| flags[l as usize] == 3)
        .max_by(|&a, &b| comps.size_of(a).cmp(&comps.size_of(b)).then(b.cmp(&a)))
}

/// Fraction of nodes inside the central sub-box that belong to the giant
/// component, or 0 when there is none.
pub fn giant_fraction<G: LinkGraph + ?Sized>(graph: &G, region: &BoxRegion) -> (f64, bool) {
    let Ok(central) = region.shrunk(graph.range()) else {
        return (0.0, false);
    };
    let giant = giant_component(graph, region);
    let pts = graph.network().points();
    let mut inside = 0usize;
    let mut in_giant = 0usize;
    for (u, p) in pts.iter().enumerate() {
        if central.contains(p) {
            inside += 1;
            if Some(graph.components().label(u as u32)) == giant {
                in_giant += 1;
            }
        }
    }
    if inside == 0 {
        (0.0, giant.is_some())
    } else {
        (in_giant as f64 / inside as f64, giant.is_some())
    }
}

/// Sample mean and standard error of the giant-component fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub estimate: f64,
    /// Standard error of the mean; 0 when only one draw was made.
    pub stderr: f64,
    pub draws: u64,
    /// Share of draws in which a giant component existed.
    pub giant_share: f64,
}

impl ThetaEstimate {
    pub fn from_samples(samples: &[(f64, bool)]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().map(|s| s.0).sum::<f64>() / n;
        let stderr = if samples.len() > 1 {
            let var = samples.iter().map(|s| (s.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self {
            estimate: mean,
            stderr,
            draws: samples.len() as u64,
            giant_share: samples.iter().filter(|s| s.1).count() as f64 / n,
        }
    }

    /// Strictly positive at two standard errors.
    pub fn is_positive(&self) -> bool {
        self.estimate - 2.0 * self.stderr > 0.0
    }
}

/// One independent (network, primary field) draw's giant fraction.
pub fn theta_sample(
    params: &SimulationParams,
    region: &BoxRegion,
    draw: &SeededRng,
) -> (f64, bool) {
    let network = Arc::new(sample_secondary_network(params, region, draw));
    let topo = build_topo_graph(network, params.secondary_range);
    let field = sample_primary_slot(params, region, 0, draw);
    let comm = build_comm_graph(&topo, &field, params);
    giant_fraction(&comm, region)
}

pub fn theta_estimate(
    params: &SimulationParams,
    region: &BoxRegion,
    n_slots: u64,
    rng: &SeededRng,
) -> ThetaEstimate {
    assert!(n_slots >= 1, "need at least one draw");
    let samples: Vec<(f64, bool)> = (0..n_slots)
        .into_par_iter()
        .map(|i| theta_sample(params, region, &rng.derive("theta-draw", i)))
        .collect();
    ThetaEstimate::from_samples(&samples)
}

/// `nodes N edges M` header followed by one `u v` line per edge.
pub fn write_edge_list<G: LinkGraph + ?Sized, W: Write>(graph: &G, mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "nodes {} edges {}",
        graph.node_count(),
        graph.edge_count()
    )?;
    for &(u, v) in graph.edges() {
        writeln!(w, "{u} {v}")?;
    }
    Ok(())
}

/// Sidecar of `id x y` lines for [`write_edge_list`].
pub fn write_node_coords<G: LinkGraph + ?Sized, W: Write>(graph: &G, mut w: W) -> io::Result<()> {
    for (i, p) in graph.network().points().iter().enumerate() {
        writeln!(w, "{i} {} {}", p.x, p.y)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2D;

    fn net(points: Vec<Point2D>, half: f64, cell: f64) -> Arc<SecondaryNetwork> {
        Arc::new(
            SecondaryNetwork::from_points(points, BoxRegion::centered_square(half).unwrap(), cell)
                .unwrap(),
        )
    }

    #[test]
    fn union_find_basics() {
        let mut uf = UnionFind::new(6);
        assert!(uf.union(4, 2));
        assert!(uf.union(2, 5));
        assert!(!uf.union(5, 4));
        assert!(uf.same(4, 5));
        assert!(!uf.same(0, 4));
        let r = uf.find(5);
        assert_eq!(uf.find(5), r);
        let comps = uf.into_components();
        assert_eq!(comps.labels(), &[0, 1, 2, 3, 2, 2]);
        assert_eq!(comps.count(), 4);
        assert_eq!(comps.sizes(), vec![(0, 1), (1, 1), (2, 3), (3, 1)]);
    }

    #[test]
    fn pair_at_exact_range_is_linked() {
        let g = build_topo_graph(
            net(
                vec![Point2D::new(0.0, 0.0), Point2D::new(0.05, 0.0)],
                1.0,
                0.05,
            ),
            0.05,
        );
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn collinear_chain_is_a_path() {
        let pts = (0..3).map(|i| Point2D::new(0.03 * i as f64, 0.0)).collect();
        let g = build_topo_graph(net(pts, 1.0, 0.05), 0.05);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.components().count(), 1);
        assert_eq!(g.neighbors(1), &[0, 2]);
    }

    #[test]
    fn small_cells_are_rebuilt() {
        let pts = vec![
            Point2D::new(0.0, 0.0),
            Point2D::new(0.3, 0.0),
            Point2D::new(0.7, 0.0),
        ];
        let g = build_topo_graph(net(pts, 1.0, 0.05), 0.4);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn no_primaries_keeps_every_link() {
        let p = SimulationParams::reference(0.0, 0.0);
        let region = BoxRegion::centered_square(0.5).unwrap();
        let n = Arc::new(sample_secondary_network(&p, &region, &SeededRng::new(3)));
        let topo = build_topo_graph(n, p.secondary_range);
        let comm = build_comm_graph(&topo, &PrimarySlotRealization::empty(0), &p);
        assert_eq!(comm.edges(), topo.edges());
        assert_eq!(comm.components(), topo.components());
    }

    #[test]
    fn blocked_node_loses_all_links() {
        let p = SimulationParams::reference(10.0, 0.0);
        let pts = vec![
            Point2D::new(0.0, 0.0),
            Point2D::new(0.04, 0.0),
            Point2D::new(-0.04, 0.0),
            Point2D::new(0.0, 0.04),
        ];
        let topo = build_topo_graph(net(pts, 1.0, 0.05), p.secondary_range);
        assert_eq!(topo.neighbors(0).len(), 3);
        // Primary receiver just within r_i of node 0, transmitter far off.
        let field = PrimarySlotRealization::from_pairs(
            0,
            vec![Point2D::new(0.0, 0.9)],
            vec![Point2D::new(0.0, -0.07)],
            0.08,
        );
        let comm = build_comm_graph(&topo, &field, &p);
        assert!(comm.neighbors(0).is_empty());
        assert!(!comm.is_available(0));
    }

    #[test]
    fn crossing_needs_nodes() {
        let g = build_topo_graph(net(Vec::new(), 1.0, 0.05), 0.05);
        let rect = BoxRegion::new(-0.5, 0.5, -0.1, 0.1).unwrap();
        assert!(!crossing_exists(&g, &rect, Orientation::LeftRight, 0.05).unwrap());
        assert!(giant_component(&g, &BoxRegion::centered_square(1.0).unwrap()).is_none());
    }

    #[test]
    fn explicit_chain_crosses() {
        let r = 0.05;
        let rect = BoxRegion::new(0.0, 0.5, 0.0, 0.1).unwrap();
        // Spacing 0.9 r from x = 0.01, closing at x = 0.49.
        let mut pts: Vec<Point2D> = (0..=10)
            .map(|i| Point2D::new(0.01 + 0.9 * r * i as f64, 0.05))
            .collect();
        pts.push(Point2D::new(0.49, 0.05));
        let g = build_topo_graph(net(pts.clone(), 1.0, r), r);
        assert!(crossing_exists(&g, &rect, Orientation::LeftRight, r).unwrap());
        assert!(!crossing_exists(&g, &rect, Orientation::TopBottom, r).unwrap());
        // Dropping a middle node breaks it.
        pts.remove(5);
        let g = build_topo_graph(net(pts, 1.0, r), r);
        assert!(!crossing_exists(&g, &rect, Orientation::LeftRight, r).unwrap());
    }

    #[test]
    fn degenerate_rect_rejected() {
        let g = build_topo_graph(net(Vec::new(), 1.0, 0.05), 0.05);
        let rect = BoxRegion {
            x_min: 0.0,
            x_max: 0.0,
            y_min: 0.0,
            y_max: 1.0,
        };
        assert!(crossing_exists(&g, &rect, Orientation::LeftRight, 0.05).is_err());
    }

    #[test]
    fn edge_list_dump() {
        let pts = vec![Point2D::new(0.0, 0.0), Point2D::new(0.04, 0.0)];
        let g = build_topo_graph(net(pts, 1.0, 0.05), 0.05);
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "nodes 2 edges 1\n0 1\n");
        let mut buf = Vec::new();
        write_node_coords(&g, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0 0 0\n1 0.04 0\n");
    }

    #[test]
    fn theta_single_draw_has_zero_stderr() {
        let t = ThetaEstimate::from_samples(&[(0.5, true)]);
        assert_eq!(t.stderr, 0.0);
        assert_eq!(t.giant_share, 1.0);
    }
}
