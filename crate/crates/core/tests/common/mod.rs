//! Brute-force oracles shared by the integration suites. Everything here is
//! quadratic and index-free on purpose.
#![allow(dead_code)]

use std::collections::VecDeque;

use cogperc::pointprocess::sample_primary_slot;
use cogperc::{
    BoxRegion, Orientation, Point2D, PrimarySlotRealization, SeededRng, SimulationParams,
};
use rand::Rng;

pub fn within(a: &Point2D, b: &Point2D, r: f64) -> bool {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy <= r * r
}

pub fn disk_edges(points: &[Point2D], r: f64) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if within(&points[i], &points[j], r) {
                out.push((i as u32, j as u32));
            }
        }
    }
    out
}

pub fn normalized(edges: &[(u32, u32)]) -> Vec<(u32, u32)> {
    let mut v: Vec<(u32, u32)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    v.sort_unstable();
    v
}

/// No primary receiver within `r_i` and no primary transmitter within `R_i`.
pub fn available(p: &Point2D, field: &PrimarySlotRealization, params: &SimulationParams) -> bool {
    !field
        .rx_points()
        .iter()
        .any(|q| within(p, q, params.secondary_interference_range))
        && !field
            .tx_points()
            .iter()
            .any(|q| within(p, q, params.primary_interference_range))
}

pub fn comm_edges(
    points: &[Point2D],
    field: &PrimarySlotRealization,
    params: &SimulationParams,
) -> Vec<(u32, u32)> {
    let ok: Vec<bool> = points.iter().map(|p| available(p, field, params)).collect();
    disk_edges(points, params.secondary_range)
        .into_iter()
        .filter(|&(a, b)| ok[a as usize] && ok[b as usize])
        .collect()
}

pub fn adjacency(n: usize, edges: &[(u32, u32)]) -> Vec<Vec<u32>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    }
    adj
}

/// Component label per node: the smallest node id in its component.
pub fn bfs_labels(n: usize, edges: &[(u32, u32)]) -> Vec<u32> {
    let adj = adjacency(n, edges);
    let mut label = vec![u32::MAX; n];
    for s in 0..n {
        if label[s] != u32::MAX {
            continue;
        }
        label[s] = s as u32;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if label[v as usize] == u32::MAX {
                    label[v as usize] = s as u32;
                    q.push_back(v as usize);
                }
            }
        }
    }
    label
}

/// BFS over nodes inside `rect` from those within `r/2` of the start side.
pub fn bfs_crossing(
    points: &[Point2D],
    edges: &[(u32, u32)],
    rect: &BoxRegion,
    orientation: Orientation,
    r: f64,
) -> bool {
    let tol = 0.5 * r;
    let inside = |p: &Point2D| rect.contains(p);
    let (start, end): (Box<dyn Fn(&Point2D) -> bool>, Box<dyn Fn(&Point2D) -> bool>) =
        match orientation {
            Orientation::LeftRight => (
                Box::new(move |p: &Point2D| (p.x - rect.x_min).abs() <= tol),
                Box::new(move |p: &Point2D| (p.x - rect.x_max).abs() <= tol),
            ),
            Orientation::TopBottom => (
                Box::new(move |p: &Point2D| (p.y - rect.y_min).abs() <= tol),
                Box::new(move |p: &Point2D| (p.y - rect.y_max).abs() <= tol),
            ),
        };
    let adj = adjacency(points.len(), edges);
    let mut seen = vec![false; points.len()];
    let mut q = VecDeque::new();
    for (i, p) in points.iter().enumerate() {
        if inside(p) && start(p) {
            seen[i] = true;
            q.push_back(i);
        }
    }
    while let Some(u) = q.pop_front() {
        if end(&points[u]) {
            return true;
        }
        for &v in &adj[u] {
            let v = v as usize;
            if !seen[v] && inside(&points[v]) {
                seen[v] = true;
                q.push_back(v);
            }
        }
    }
    false
}

/// Slot of first arrival per node under instantaneous spreading, drawing the
/// same primary fields as the simulator.
pub fn flood_tau0(
    points: &[Point2D],
    region: &BoxRegion,
    source: u32,
    params: &SimulationParams,
    horizon: u64,
    rng: &SeededRng,
) -> Vec<Option<u64>> {
    let n = points.len();
    let topo_labels = bfs_labels(n, &disk_edges(points, params.secondary_range));
    let target = topo_labels
        .iter()
        .filter(|&&l| l == topo_labels[source as usize])
        .count();
    let mut arrival = vec![None; n];
    arrival[source as usize] = Some(0);
    let mut count = 1;
    for t in 0..horizon {
        if count == target {
            break;
        }
        let field = sample_primary_slot(params, region, t, rng);
        let labels = bfs_labels(n, &comm_edges(points, &field, params));
        let hot: std::collections::HashSet<u32> = (0..n)
            .filter(|&u| arrival[u].is_some())
            .map(|u| labels[u])
            .collect();
        for u in 0..n {
            if arrival[u].is_none() && hot.contains(&labels[u]) {
                arrival[u] = Some(t);
                count += 1;
            }
        }
    }
    arrival
}

pub fn uniform_points(n: usize, region: &BoxRegion, rng: &mut impl Rng) -> Vec<Point2D> {
    (0..n)
        .map(|_| region.point_at(rng.random(), rng.random()))
        .collect()
}

/// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at level 0.001.
pub fn ks_critical(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}
