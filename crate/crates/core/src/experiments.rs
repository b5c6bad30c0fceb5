//! Multi-trial studies: connectivity phase diagram, critical density from
//! crossing probabilities, MMD scaling rates, sub-critical cluster-diameter
//! tails and the single-hop waiting-time distribution.
//!
//! Every trial draws its randomness from a stream keyed by its indices, and
//! results are collected in index order, so thread count never changes a
//! reported number.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::sync::Arc;
use thiserror::Error;

use crate::delay::{
    band_ratios, fit_scaling_rate, flood, mmd_ratio_curve, DelayError, DistanceBand, NodeStatus,
    RateFit, RatioPoint,
};
use crate::geometry::{BoxRegion, Point2D};
use crate::graph::{
    build_comm_graph, build_topo_graph, crossing_exists, giant_component, giant_fraction,
    LinkGraph, Orientation, ThetaEstimate, TopoGraph,
};
use crate::opportunity::{
    centered_pair, estimate_p0, has_bidirectional_opportunity, local_region, OpportunityContext,
    ProbabilityEstimate,
};
use crate::pointprocess::{
    sample_primary_field, sample_secondary_network, ParamError, PrimarySlotRealization,
    SecondaryNetwork, SeededRng, SimulationParams,
};
use crate::stats::{bootstrap_ci, least_squares, logistic_fit, median, LogisticFit};

/// Resamples behind every bootstrap interval.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Critical density of the unit-range disk graph implied by the 576 km⁻²
/// reference at 50 m range; scales as `1 / range²`.
pub const UNIT_RANGE_CRITICAL_DENSITY: f64 = 576.0 * 0.05 * 0.05;

pub fn reference_critical_density(range: f64) -> f64 {
    UNIT_RANGE_CRITICAL_DENSITY / (range * range)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Delay(#[from] DelayError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("crossing probabilities for window {window} km do not bracket 0.5 (range {min:.3}..{max:.3}); widen the density range")]
    NoBracket { window: f64, min: f64, max: f64 },
    #[error("logistic fits of the crossing curves do not intersect")]
    NoIntersection,
    #[error("no cluster reached beyond h = {h} km in any trial; use smaller h values")]
    TailAllZero { h: f64 },
}

// ---------------------------------------------------------------------------
// Phase diagram
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Connectivity {
    Disconnected,
    IntermittentlyConnected,
    InstantaneouslyConnected,
}

impl Connectivity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Connectivity::Disconnected => "disconnected",
            Connectivity::IntermittentlyConnected => "intermittently-connected",
            Connectivity::InstantaneouslyConnected => "instantaneously-connected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub secondary_densities: Vec<f64>,
    pub primary_densities: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub secondary_density: f64,
    pub primary_density: f64,
    pub theta: ThetaEstimate,
    pub classification: Connectivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub secondary_density: f64,
    /// Largest probed primary density still connected, if any.
    pub max_primary_density: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagramResult {
    pub critical_density: f64,
    /// Row-major: secondary density outer, primary density inner, both as given.
    pub cells: Vec<PhaseCell>,
    pub boundary: Vec<BoundaryPoint>,
}

pub fn classify(
    secondary_density: f64,
    critical_density: f64,
    theta: &ThetaEstimate,
) -> Connectivity {
    if secondary_density < critical_density {
        Connectivity::Disconnected
    } else if theta.is_positive() {
        Connectivity::InstantaneouslyConnected
    } else {
        Connectivity::IntermittentlyConnected
    }
}

/// θ̂ over a (secondary density × primary density) grid.
///
/// Draw `j` reuses the same secondary network across a column and builds
/// the primary fields of increasing density by superposing independent
/// layers, so along a column the fields are nested.
pub fn run_phase_diagram(
    grid: &PhaseGrid,
    template: &SimulationParams,
    region: &BoxRegion,
    trials_per_cell: u64,
    critical_density: f64,
    rng: &SeededRng,
) -> Result<PhaseDiagramResult, ExperimentError> {
    template.validate()?;
    if grid.secondary_densities.is_empty() || grid.primary_densities.is_empty() {
        return Err(ExperimentError::Invalid("phase grid is empty".into()));
    }
    if trials_per_cell == 0 {
        return Err(ExperimentError::Invalid(
            "trials per cell must be positive".into(),
        ));
    }
    if let Some(d) = grid
        .secondary_densities
        .iter()
        .chain(&grid.primary_densities)
        .find(|d| !d.is_finite() || **d < 0.0)
    {
        return Err(ExperimentError::Invalid(format!(
            "density {d} is not a non-negative number"
        )));
    }
    let mut order: Vec<usize> = (0..grid.primary_densities.len()).collect();
    order.sort_by(|&a, &b| grid.primary_densities[a].total_cmp(&grid.primary_densities[b]));

    let n_pt = grid.primary_densities.len();
    let jobs: Vec<(usize, u64)> = (0..grid.secondary_densities.len())
        .flat_map(|i| (0..trials_per_cell).map(move |j| (i, j)))
        .collect();
    // samples[(i, j)] = per primary density (in given order) giant fraction.
    let samples: Vec<Vec<(f64, bool)>> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let draw = rng.derive("phase-draw", j);
            let params = SimulationParams {
                secondary_density: grid.secondary_densities[i],
                ..*template
            };
            let network = Arc::new(sample_secondary_network(
                &params,
                region,
                &draw.derive("column", i as u64),
            ));
            let topo = build_topo_graph(network, params.secondary_range);
            let mut out = vec![(0.0, false); n_pt];
            let mut field = PrimarySlotRealization::empty(0);
            let mut prev = 0.0;
            for (layer, &k) in order.iter().enumerate() {
                let level = grid.primary_densities[k];
                if level > prev {
                    let extra = sample_primary_field(
                        level - prev,
                        &params,
                        region,
                        layer as u64,
                        &draw.derive("layer", 0),
                    );
                    field = field.superposed(&extra);
                    prev = level;
                }
                let comm = build_comm_graph(&topo, &field, &params);
                out[k] = giant_fraction(&comm, region);
            }
            out
        })
        .collect();

    let mut cells = Vec::new();
    let mut boundary = Vec::new();
    for (i, &lambda_s) in grid.secondary_densities.iter().enumerate() {
        let mut best: Option<f64> = None;
        for (k, &lambda_pt) in grid.primary_densities.iter().enumerate() {
            let col: Vec<(f64, bool)> = (0..trials_per_cell as usize)
                .map(|j| samples[i * trials_per_cell as usize + j][k])
                .collect();
            let theta = ThetaEstimate::from_samples(&col);
            if theta.is_positive() {
                best = Some(best.map_or(lambda_pt, |b: f64| b.max(lambda_pt)));
            }
            cells.push(PhaseCell {
                secondary_density: lambda_s,
                primary_density: lambda_pt,
                classification: classify(lambda_s, critical_density, &theta),
                theta,
            });
        }
        boundary.push(BoundaryPoint {
            secondary_density: lambda_s,
            max_primary_density: best,
        });
    }
    Ok(PhaseDiagramResult {
        critical_density,
        cells,
        boundary,
    })
}

// ---------------------------------------------------------------------------
// Critical density
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingPoint {
    /// Window side, km.
    pub window: f64,
    pub density: f64,
    pub crossings: u64,
    pub trials: u64,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub window: f64,
    pub intercept: f64,
    pub slope: f64,
    /// Density at which the fitted crossing probability is one half.
    pub midpoint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalDensityResult {
    pub range: f64,
    pub lambda_c_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: Vec<CrossingPoint>,
    pub fits: Vec<WindowFit>,
}

/// Whether a `λ_PT = 0` network of the given density in a square of side
/// `window` has a left-right crossing.
pub fn crossing_trial(range: f64, window: f64, density: f64, rng: &SeededRng) -> bool {
    let region = BoxRegion::centered_square(0.5 * window).expect("positive window");
    let params = SimulationParams {
        secondary_density: density,
        primary_density: 0.0,
        secondary_range: range,
        secondary_interference_range: 0.0,
        primary_range: 0.0,
        primary_interference_range: 0.0,
        slot_length: 1.0,
        propagation_delay: 0.0,
    };
    let network = Arc::new(sample_secondary_network(&params, &region, rng));
    let topo = build_topo_graph(network, range);
    crossing_exists(&topo, &region, Orientation::LeftRight, range).expect("window is a valid box")
}

fn fit_windows(
    windows: &[f64],
    densities: &[f64],
    counts: &[Vec<u64>],
    trials: u64,
) -> Option<Vec<LogisticFit>> {
    windows
        .iter()
        .enumerate()
        .map(|(w, _)| {
            let groups: Vec<(f64, u64, u64)> = densities
                .iter()
                .enumerate()
                .map(|(d, &lambda)| (lambda, counts[w][d], trials))
                .collect();
            logistic_fit(&groups)
        })
        .collect()
}

fn pairwise_crossing(fits: &[LogisticFit]) -> Option<f64> {
    let mut xs = Vec::new();
    for i in 0..fits.len() {
        for j in i + 1..fits.len() {
            if let Some(x) = fits[i].intersection(&fits[j]) {
                if x.is_finite() {
                    xs.push(x);
                }
            }
        }
    }
    if xs.is_empty() {
        None
    } else {
        Some(median(&xs))
    }
}

/// Crossing-probability curves for several window sizes; their common
/// intersection estimates the critical density.
pub fn estimate_critical_density(
    range: f64,
    windows: &[f64],
    densities: &[f64],
    trials: u64,
    rng: &SeededRng,
) -> Result<CriticalDensityResult, ExperimentError> {
    if !(range > 0.0 && range.is_finite()) {
        return Err(ExperimentError::Invalid(format!(
            "range must be positive, got {range}"
        )));
    }
    if windows.len() < 2 {
        return Err(ExperimentError::Invalid(
            "need at least two window sizes".into(),
        ));
    }
    if densities.len() < 2 || trials == 0 {
        return Err(ExperimentError::Invalid(
            "need at least two densities and one trial".into(),
        ));
    }
    if windows.iter().any(|w| !(*w > range)) {
        return Err(ExperimentError::Invalid(
            "every window must exceed the range".into(),
        ));
    }
    let jobs: Vec<(usize, usize, u64)> = (0..windows.len())
        .flat_map(|w| (0..densities.len()).flat_map(move |d| (0..trials).map(move |t| (w, d, t))))
        .collect();
    let outcomes: Vec<bool> = jobs
        .par_iter()
        .map(|&(w, d, t)| {
            let stream = rng
                .derive("critical-window", w as u64)
                .derive("density", d as u64)
                .derive("trial", t);
            crossing_trial(range, windows[w], densities[d], &stream)
        })
        .collect();
    let counts: Vec<Vec<u64>> = (0..windows.len())
        .map(|w| {
            (0..densities.len())
                .map(|d| {
                    let base = (w * densities.len() + d) * trials as usize;
                    outcomes[base..base + trials as usize]
                        .iter()
                        .filter(|&&x| x)
                        .count() as u64
                })
                .collect()
        })
        .collect();

    let mut points = Vec::new();
    for (w, &window) in windows.iter().enumerate() {
        let probs: Vec<f64> = counts[w]
            .iter()
            .map(|&c| c as f64 / trials as f64)
            .collect();
        let min = probs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(min < 0.5 && max > 0.5) {
            return Err(ExperimentError::NoBracket { window, min, max });
        }
        for (d, &density) in densities.iter().enumerate() {
            points.push(CrossingPoint {
                window,
                density,
                crossings: counts[w][d],
                trials,
                probability: probs[d],
            });
        }
    }

    let fits =
        fit_windows(windows, densities, &counts, trials).ok_or(ExperimentError::NoIntersection)?;
    let lambda_c_hat = pairwise_crossing(&fits).ok_or(ExperimentError::NoIntersection)?;

    let mut boot_rng = rng.derive("critical-bootstrap", 0).rng();
    let mut boots = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let resampled: Vec<Vec<u64>> = counts
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&c| {
                        let p = c as f64 / trials as f64;
                        Binomial::new(trials, p)
                            .expect("valid binomial")
                            .sample(&mut boot_rng)
                    })
                    .collect()
            })
            .collect();
        if let Some(x) =
            fit_windows(windows, densities, &resampled, trials).and_then(|f| pairwise_crossing(&f))
        {
            boots.push(x);
        }
    }
    let (ci_low, ci_high) = if boots.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let sorted = crate::stats::sorted_copy(&boots);
        (
            crate::stats::quantile_sorted(&sorted, 0.025),
            crate::stats::quantile_sorted(&sorted, 0.975),
        )
    };

    Ok(CriticalDensityResult {
        range,
        lambda_c_hat,
        ci_low,
        ci_high,
        points,
        fits: windows
            .iter()
            .zip(&fits)
            .map(|(&window, f)| WindowFit {
                window,
                intercept: f.intercept,
                slope: f.slope,
                midpoint: f.midpoint(),
            })
            .collect(),
    })
}

// ---------------------------------------------------------------------------
// Scaling study
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceRun {
    pub tau: f64,
    pub run: u64,
    pub source: u32,
    pub source_x: f64,
    pub source_y: f64,
    /// The node nearest the centre was outside the giant topological
    /// component and a giant-component node was used instead.
    pub source_resampled: bool,
    pub nodes: usize,
    pub reached: usize,
    pub horizon_unreached: usize,
    pub unreachable: usize,
    pub slots_used: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandRate {
    pub tau: f64,
    pub band: DistanceBand,
    pub fit: Option<RateFit>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauSummary {
    pub tau: f64,
    /// Median ratio in the farthest band with enough points: β̂ when
    /// τ = 0, γ̂(τ) otherwise.
    pub rate: Option<f64>,
    pub rate_band: Option<DistanceBand>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub min_ratio: Option<f64>,
    pub reached: usize,
    pub unreached: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudyResult {
    pub runs: Vec<SourceRun>,
    pub bands: Vec<BandRate>,
    pub summaries: Vec<TauSummary>,
    /// Pooled ratio points per τ, in the order of `summaries`.
    #[serde(skip)]
    pub curves: Vec<Vec<RatioPoint>>,
    /// Run index of each pooled point, parallel to `curves`.
    #[serde(skip)]
    pub curve_runs: Vec<Vec<u64>>,
    /// Per τ: count of reached nodes by arrival slot.
    pub slot_histograms: Vec<Vec<u64>>,
}

impl ScalingStudyResult {
    pub fn summary(&self, tau: f64) -> Option<&TauSummary> {
        self.summaries.iter().find(|s| s.tau == tau)
    }

    pub fn band_rate(&self, tau: f64, band: DistanceBand) -> Option<&BandRate> {
        self.bands.iter().find(|b| b.tau == tau && b.band == band)
    }

    /// Share of reached nodes informed no later than `slot`.
    pub fn share_by_slot(&self, tau: f64, slot: u64) -> Option<f64> {
        let i = self.summaries.iter().position(|s| s.tau == tau)?;
        let h = &self.slot_histograms[i];
        let total: u64 = h.iter().sum();
        let early: u64 = h.iter().take(slot as usize + 1).sum();
        Some(early as f64 / total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub taus: Vec<f64>,
    pub horizon: u64,
    pub n_sources: u64,
    pub bands: Vec<DistanceBand>,
}

/// Picks the flooding source: the node nearest the window centre, or the
/// giant-topological-component node nearest it when the former lies outside.
pub fn choose_source<G: LinkGraph>(topo: &G, region: &BoxRegion) -> Option<(u32, bool)> {
    let net = topo.network();
    let center = region.center();
    let nearest = net.nearest(&center)?;
    let Some(giant) = giant_component(topo, region) else {
        return Some((nearest, false));
    };
    if topo.components().label(nearest) == giant {
        return Some((nearest, false));
    }
    let pts = net.points();
    let best = (0..pts.len() as u32)
        .filter(|&u| topo.components().label(u) == giant)
        .min_by(|&a, &b| {
            pts[a as usize]
                .distance_sq(&center)
                .total_cmp(&pts[b as usize].distance_sq(&center))
                .then(a.cmp(&b))
        })?;
    Some((best, true))
}

/// Network, topology, source and flood stream of run `k` of a scaling study.
pub struct ScalingRun {
    pub network: Arc<SecondaryNetwork>,
    pub topo: TopoGraph,
    pub source: u32,
    pub resampled: bool,
    pub flood_rng: SeededRng,
}

pub fn prepare_scaling_run(
    params: &SimulationParams,
    region: &BoxRegion,
    k: u64,
    rng: &SeededRng,
) -> Result<ScalingRun, ExperimentError> {
    let (network, topo) = sample_topology(params, region, &rng.derive("scaling-network", k));
    let (source, resampled) = choose_source(&topo, region)
        .ok_or_else(|| ExperimentError::Invalid("window holds no secondary users".into()))?;
    Ok(ScalingRun {
        network,
        topo,
        source,
        resampled,
        flood_rng: rng.derive("scaling-flood", k),
    })
}

/// Floods from the window centre for each τ and each of `n_sources`
/// independent networks; τ values share networks and primary fields.
pub fn run_scaling_study(
    params: &SimulationParams,
    region: &BoxRegion,
    config: &ScalingConfig,
    rng: &SeededRng,
) -> Result<ScalingStudyResult, ExperimentError> {
    params.validate()?;
    if config.taus.is_empty() || config.n_sources == 0 {
        return Err(ExperimentError::Invalid(
            "need at least one τ and one source".into(),
        ));
    }
    for &tau in &config.taus {
        SimulationParams {
            propagation_delay: tau,
            ..*params
        }
        .validate()?;
    }
    let per_run: Vec<Vec<(SourceRun, Vec<RatioPoint>, Vec<u64>)>> = (0..config.n_sources)
        .into_par_iter()
        .map(|k| -> Result<_, ExperimentError> {
            let ScalingRun {
                network,
                topo,
                source,
                resampled,
                flood_rng,
            } = prepare_scaling_run(params, region, k, rng)?;
            config
                .taus
                .iter()
                .map(|&tau| {
                    let p = SimulationParams {
                        propagation_delay: tau,
                        ..*params
                    };
                    let result = flood(&topo, source, &p, config.horizon, &flood_rng)?;
                    let curve = mmd_ratio_curve(&result, &network);
                    let mut hist = vec![0u64; result.slots_used.max(1) as usize];
                    for s in result.arrival_slot.iter().flatten() {
                        hist[*s as usize] += 1;
                    }
                    let src = network.points()[source as usize];
                    let run = SourceRun {
                        tau,
                        run: k,
                        source,
                        source_x: src.x,
                        source_y: src.y,
                        source_resampled: resampled,
                        nodes: network.len(),
                        reached: result.reached(),
                        horizon_unreached: result.count_status(NodeStatus::Horizon),
                        unreachable: result.count_status(NodeStatus::Unreachable),
                        slots_used: result.slots_used,
                    };
                    Ok((run, curve.points, hist))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let mut runs = Vec::new();
    let mut curves = vec![Vec::new(); config.taus.len()];
    let mut curve_runs = vec![Vec::new(); config.taus.len()];
    let mut histograms = vec![Vec::new(); config.taus.len()];
    for run_set in per_run {
        for (ti, (run, points, hist)) in run_set.into_iter().enumerate() {
            curve_runs[ti].extend(std::iter::repeat_n(run.run, points.len()));
            runs.push(run);
            curves[ti].extend(points);
            let h: &mut Vec<u64> = &mut histograms[ti];
            if h.len() < hist.len() {
                h.resize(hist.len(), 0);
            }
            for (i, c) in hist.into_iter().enumerate() {
                h[i] += c;
            }
        }
    }
    runs.sort_by(|a, b| a.tau.total_cmp(&b.tau).then(a.run.cmp(&b.run)));

    let mut bands = Vec::new();
    let mut summaries = Vec::new();
    for (ti, &tau) in config.taus.iter().enumerate() {
        let points = &curves[ti];
        let mut boot = rng.derive("scaling-bootstrap", ti as u64).rng();
        let mut last: Option<BandRate> = None;
        for &band in &config.bands {
            let fit = fit_scaling_rate(points, band).ok();
            let (ci_low, ci_high) = match fit {
                Some(_) => {
                    let ratios = band_ratios(points, band);
                    let (lo, hi) =
                        bootstrap_ci(&ratios, BOOTSTRAP_RESAMPLES, 0.05, &mut boot, median);
                    (Some(lo), Some(hi))
                }
                None => (None, None),
            };
            let rate = BandRate {
                tau,
                band,
                fit,
                ci_low,
                ci_high,
            };
            if fit.is_some() && last.is_none_or(|l| l.band.lo <= band.lo) {
                last = Some(rate);
            }
            bands.push(rate);
        }
        let runs_tau = runs.iter().filter(|r| r.tau == tau);
        let (reached, unreached) = runs_tau.fold((0, 0), |(a, b), r| {
            (a + r.reached, b + r.horizon_unreached + r.unreachable)
        });
        summaries.push(TauSummary {
            tau,
            rate: last.and_then(|l| l.fit.map(|f| f.rate)),
            rate_band: last.map(|l| l.band),
            ci_low: last.and_then(|l| l.ci_low),
            ci_high: last.and_then(|l| l.ci_high),
            min_ratio: points.iter().map(|p| p.ratio).min_by(f64::total_cmp),
            reached,
            unreached,
        });
    }
    Ok(ScalingStudyResult {
        runs,
        bands,
        summaries,
        curves,
        curve_runs,
        slot_histograms: histograms,
    })
}

// ---------------------------------------------------------------------------
// Cluster-diameter tail
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    /// Half side of the box around the origin node, km.
    pub h: f64,
    pub hits: u64,
    pub trials: u64,
    pub survival: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFitResult {
    pub points: Vec<TailPoint>,
    /// Decay rate: survival ≈ c1 · exp(−c2 · h).
    pub c2: f64,
    pub c1: f64,
    pub log_c1: f64,
    pub r_squared: f64,
    /// Number of h values with positive survival used in the fit.
    pub fitted_points: usize,
    /// Survival at the largest h is still at least half that at the smallest.
    pub plateau: bool,
    pub accepted: bool,
}

/// Chebyshev radius of the communication cluster holding the node nearest
/// the window centre, measured from that node.
pub fn cluster_reach(params: &SimulationParams, region: &BoxRegion, draw: &SeededRng) -> f64 {
    let network = Arc::new(sample_secondary_network(params, region, draw));
    let Some(origin) = network.nearest(&region.center()) else {
        return 0.0;
    };
    let topo = build_topo_graph(Arc::clone(&network), params.secondary_range);
    let field = sample_primary_field(params.primary_density, params, region, 0, draw);
    let comm = build_comm_graph(&topo, &field, params);
    let comps = comm.components();
    let label = comps.label(origin);
    let o = network.points()[origin as usize];
    network
        .points()
        .iter()
        .enumerate()
        .filter(|(u, _)| comps.label(*u as u32) == label)
        .map(|(_, p)| (p.x - o.x).abs().max((p.y - o.y).abs()))
        .fold(0.0, f64::max)
}

/// Frequency with which the origin's communication cluster leaves `B_h`,
/// and a log-linear fit of that survival curve in `h`.
pub fn fit_diameter_tail(
    params: &SimulationParams,
    h_values: &[f64],
    trials: u64,
    rng: &SeededRng,
) -> Result<TailFitResult, ExperimentError> {
    params.validate()?;
    if h_values.is_empty() || trials == 0 {
        return Err(ExperimentError::Invalid("need h values and trials".into()));
    }
    if h_values.windows(2).any(|w| w[1] <= w[0]) || h_values[0] <= 0.0 {
        return Err(ExperimentError::Invalid(
            "h values must be positive and increasing".into(),
        ));
    }
    let h_max = *h_values.last().expect("non-empty");
    let region = BoxRegion::centered_square(h_max + 3.0 * params.secondary_range)
        .map_err(|e| ExperimentError::Invalid(e.to_string()))?;
    let reaches: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| cluster_reach(params, &region, &rng.derive("tail-trial", t)))
        .collect();
    let points: Vec<TailPoint> = h_values
        .iter()
        .map(|&h| {
            let hits = reaches.iter().filter(|&&r| r > h).count() as u64;
            TailPoint {
                h,
                hits,
                trials,
                survival: hits as f64 / trials as f64,
            }
        })
        .collect();
    if points[0].hits == 0 {
        return Err(ExperimentError::TailAllZero { h: points[0].h });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.hits > 0)
        .map(|p| (p.h, p.survival.ln()))
        .unzip();
    let fit = least_squares(&xs, &ys);
    let plateau = points.last().expect("non-empty").survival >= 0.5 * points[0].survival;
    let (c2, log_c1, r2) = match fit {
        Some(f) => (-f.slope, f.intercept, f.r_squared),
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    let accepted = fit.is_some() && c2 > 0.0 && r2 >= 0.9 && !plateau;
    Ok(TailFitResult {
        points,
        c2,
        c1: log_c1.exp(),
        log_c1,
        r_squared: r2,
        fitted_points: xs.len(),
        plateau,
        accepted,
    })
}

// ---------------------------------------------------------------------------
// Single-hop delay
// ---------------------------------------------------------------------------

/// Waiting slots are capped here; a pair that waits this long is reported
/// at the cap.
pub const MAX_WAIT_SLOTS: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitBin {
    pub wait: u64,
    /// The last bin collects every wait at or above `wait`.
    pub open_ended: bool,
    pub observed: u64,
    pub expected: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemorylessCheck {
    pub a: u64,
    pub b: u64,
    /// P{W ≥ a + b | W ≥ a}.
    pub conditional: f64,
    /// P{W ≥ b}.
    pub unconditional: f64,
    pub stderr: f64,
    pub within_3se: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopDelayReport {
    pub hop_length: f64,
    pub trials: u64,
    pub p0: ProbabilityEstimate,
    pub mean_wait: f64,
    pub bins: Vec<WaitBin>,
    pub chi_square: f64,
    pub dof: u64,
    pub p_value: f64,
    pub memoryless: MemorylessCheck,
}

/// Slots a fixed pair waits for its first bidirectional opportunity.
pub fn waiting_slots(
    params: &SimulationParams,
    region: &BoxRegion,
    a: &Point2D,
    b: &Point2D,
    rng: &SeededRng,
) -> u64 {
    for slot in 0..MAX_WAIT_SLOTS {
        let field = sample_primary_field(params.primary_density, params, region, slot, rng);
        let ctx = OpportunityContext::new(&field, params);
        if has_bidirectional_opportunity(a, b, &ctx) {
            return slot;
        }
    }
    MAX_WAIT_SLOTS
}

/// Chi-square bins over `0, 1, …` with expected count ≥ 5 each and an
/// open-ended tail bin.
fn geometric_bins(waits: &[u64], p0: f64) -> Vec<WaitBin> {
    let n = waits.len() as f64;
    let count_eq = |k: u64| waits.iter().filter(|&&w| w == k).count() as u64;
    let count_ge = |k: u64| waits.iter().filter(|&&w| w >= k).count() as u64;
    let q = 1.0 - p0;
    let mut bins = Vec::new();
    let mut k = 0u64;
    loop {
        let tail_expected = n * q.powi(k as i32);
        let this_expected = n * p0 * q.powi(k as i32);
        let next_tail = tail_expected - this_expected;
        if this_expected < 5.0 || next_tail < 5.0 {
            bins.push(WaitBin {
                wait: k,
                open_ended: true,
                observed: count_ge(k),
                expected: tail_expected,
            });
            break;
        }
        bins.push(WaitBin {
            wait: k,
            open_ended: false,
            observed: count_eq(k),
            expected: this_expected,
        });
        k += 1;
    }
    bins
}

pub fn memoryless_check(waits: &[u64], a: u64, b: u64) -> MemorylessCheck {
    let n = waits.len() as f64;
    let ge = |k: u64| waits.iter().filter(|&&w| w >= k).count() as f64;
    let (n_a, n_ab, n_b) = (ge(a), ge(a + b), ge(b));
    let unconditional = n_b / n;
    if n_a == 0.0 {
        return MemorylessCheck {
            a,
            b,
            conditional: unconditional,
            unconditional,
            stderr: 0.0,
            within_3se: unconditional == 0.0,
        };
    }
    let conditional = n_ab / n_a;
    let stderr = (conditional * (1.0 - conditional) / n_a
        + unconditional * (1.0 - unconditional) / n)
        .sqrt();
    let diff = (conditional - unconditional).abs();
    MemorylessCheck {
        a,
        b,
        conditional,
        unconditional,
        stderr,
        within_3se: diff <= 3.0 * stderr,
    }
}

/// Goodness of fit of simulated single-hop waits against a geometric law
/// whose parameter comes from an independent [`estimate_p0`] run.
pub fn single_hop_delay_test(
    hop_length: f64,
    params: &SimulationParams,
    trials: u64,
    rng: &SeededRng,
) -> Result<HopDelayReport, ExperimentError> {
    params.validate()?;
    if !(hop_length > 0.0 && hop_length <= params.secondary_range) {
        return Err(ExperimentError::Invalid(format!(
            "hop length must lie in (0, {}], got {hop_length}",
            params.secondary_range
        )));
    }
    if trials == 0 {
        return Err(ExperimentError::Invalid("need at least one trial".into()));
    }
    let region = local_region(params, hop_length);
    let (a, b) = centered_pair(&region, hop_length);
    let waits: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|i| waiting_slots(params, &region, &a, &b, &rng.derive("hop-wait", i)))
        .collect();
    let p0 = estimate_p0(
        hop_length,
        params,
        &region,
        trials,
        &rng.derive("hop-p0", 0),
    );
    let bins = geometric_bins(&waits, p0.estimate);
    let chi_square: f64 = bins
        .iter()
        .filter(|b| b.expected > 0.0)
        .map(|b| (b.observed as f64 - b.expected).powi(2) / b.expected)
        .sum();
    let dof = bins.len().saturating_sub(1) as u64;
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64)
            .expect("positive dof")
            .cdf(chi_square)
    };
    Ok(HopDelayReport {
        hop_length,
        trials,
        p0,
        mean_wait: waits.iter().sum::<u64>() as f64 / trials as f64,
        bins,
        chi_square,
        dof,
        p_value,
        memoryless: memoryless_check(&waits, 1, 1),
    })
}

/// Draws one uniform point in `region`; used by property tests that need
/// random probe locations from a labelled stream.
pub fn random_point(region: &BoxRegion, rng: &SeededRng) -> Point2D {
    let mut r = rng.rng();
    region.point_at(r.random(), r.random())
}

/// Secondary network and its topological graph for a labelled draw.
pub fn sample_topology(
    params: &SimulationParams,
    region: &BoxRegion,
    rng: &SeededRng,
) -> (Arc<SecondaryNetwork>, TopoGraph) {
    let network = Arc::new(sample_secondary_network(params, region, rng));
    let topo = build_topo_graph(Arc::clone(&network), params.secondary_range);
    (network, topo)
}
