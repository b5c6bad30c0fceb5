//! Poisson sampling of the secondary network and of per-slot primary
//! transmitter/receiver fields, plus the seed-derivation scheme that keeps
//! every sample reproducible independent of evaluation order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::geometry::{BoxRegion, Point2D, SpatialIndex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("invalid parameter `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

impl ParamError {
    pub fn field(&self) -> &'static str {
        match self {
            ParamError::Invalid { field, .. } => field,
        }
    }
}

/// Physical model scalars. Densities in km⁻², lengths in km, times in s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    /// Density of secondary users.
    pub secondary_density: f64,
    /// Density of active primary transmitters per slot.
    pub primary_density: f64,
    /// Secondary transmission range; two secondaries within it share a topological link.
    pub secondary_range: f64,
    /// Protection radius around a secondary transmitter that must hold no primary receiver.
    pub secondary_interference_range: f64,
    /// Primary transmission range; receivers sit uniformly within it of their transmitter.
    pub primary_range: f64,
    /// Radius around a secondary receiver that must hold no primary transmitter.
    pub primary_interference_range: f64,
    pub slot_length: f64,
    /// Per-hop propagation delay.
    pub propagation_delay: f64,
}

impl SimulationParams {
    /// Parameters of the reference scenario: 700 secondaries per km², 50 m
    /// secondary and primary ranges, 80 m interference ranges, 1 s slots.
    pub fn reference(primary_density: f64, propagation_delay: f64) -> Self {
        Self {
            secondary_density: 700.0,
            primary_density,
            secondary_range: 0.05,
            secondary_interference_range: 0.08,
            primary_range: 0.05,
            primary_interference_range: 0.08,
            slot_length: 1.0,
            propagation_delay,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let fields = [
            ("secondary_density", self.secondary_density),
            ("primary_density", self.primary_density),
            ("secondary_range", self.secondary_range),
            (
                "secondary_interference_range",
                self.secondary_interference_range,
            ),
            ("primary_range", self.primary_range),
            (
                "primary_interference_range",
                self.primary_interference_range,
            ),
            ("slot_length", self.slot_length),
            ("propagation_delay", self.propagation_delay),
        ];
        for (field, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(ParamError::Invalid {
                    field,
                    reason: format!("must be finite and non-negative, got {v}"),
                });
            }
        }
        if self.secondary_range <= 0.0 {
            return Err(ParamError::Invalid {
                field: "secondary_range",
                reason: "must be positive".into(),
            });
        }
        if self.slot_length <= 0.0 {
            return Err(ParamError::Invalid {
                field: "slot_length",
                reason: "must be positive".into(),
            });
        }
        if self.propagation_delay > self.slot_length {
            return Err(ParamError::Invalid {
                field: "propagation_delay",
                reason: format!(
                    "must not exceed slot_length ({} > {})",
                    self.propagation_delay, self.slot_length
                ),
            });
        }
        Ok(())
    }

    /// Margin by which primaries are sampled beyond the observation window.
    pub fn primary_padding(&self) -> f64 {
        self.primary_range
            .max(self.primary_interference_range)
            .max(self.secondary_interference_range)
    }

    /// All lengths multiplied by `s`, densities divided by `s²`, times unchanged.
    pub fn rescaled(&self, s: f64) -> Self {
        Self {
            secondary_density: self.secondary_density / (s * s),
            primary_density: self.primary_density / (s * s),
            secondary_range: self.secondary_range * s,
            secondary_interference_range: self.secondary_interference_range * s,
            primary_range: self.primary_range * s,
            primary_interference_range: self.primary_interference_range * s,
            ..*self
        }
    }
}

/// Splittable seed: a 64-bit key from which labelled child keys and
/// ChaCha streams are derived. Children depend only on the parent key and
/// the `(label, index)` pair, never on how many draws anyone made.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeededRng {
    master_seed: u64,
    key: u64,
}

impl SeededRng {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            key: splitmix64(master_seed ^ 0x6a09_e667_f3bc_c908),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn derive(&self, label: &str, index: u64) -> SeededRng {
        let k = splitmix64(self.key ^ fnv1a(label.as_bytes()));
        let k = splitmix64(k ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        Self {
            master_seed: self.master_seed,
            key: k,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let mut s = self.key;
        for chunk in seed.chunks_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        <ChaCha8Rng as rand::SeedableRng>::from_seed(seed)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Exact Poisson variate: sequential inversion for small means, the
/// `rand_distr` rejection sampler otherwise.
pub fn sample_poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < 30.0 {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
            if p == 0.0 && cdf < u {
                // cdf saturated below u from rounding; remaining mass is negligible.
                break;
            }
        }
        return k;
    }
    let dist = Poisson::new(mean).expect("finite positive Poisson mean");
    dist.sample(rng) as u64
}

/// Homogeneous Poisson process of intensity `lambda` on `region`.
pub fn sample_poisson_points<R: Rng + ?Sized>(
    lambda: f64,
    region: &BoxRegion,
    rng: &mut R,
) -> Vec<Point2D> {
    let n = sample_poisson_count(lambda * region.area(), rng);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            region.point_at(u, v)
        })
        .collect()
}

/// Uniform point on the disk of radius `radius` around `center`.
pub fn displace_uniform_disk<R: Rng + ?Sized>(
    center: &Point2D,
    radius: f64,
    rng: &mut R,
) -> Point2D {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    Point2D::new(center.x + r * theta.cos(), center.y + r * theta.sin())
}

/// Static secondary users with a grid index of cell size `secondary_range`.
#[derive(Debug, Clone)]
pub struct SecondaryNetwork {
    region: BoxRegion,
    index: SpatialIndex,
}

impl SecondaryNetwork {
    /// Wraps a hand-built point set. Points outside `region` are rejected.
    pub fn from_points(
        points: Vec<Point2D>,
        region: BoxRegion,
        cell_size: f64,
    ) -> Result<Self, ParamError> {
        if let Some(p) = points.iter().find(|p| !region.contains(p)) {
            return Err(ParamError::Invalid {
                field: "points",
                reason: format!("({}, {}) lies outside the region", p.x, p.y),
            });
        }
        Ok(Self {
            region,
            index: SpatialIndex::build(points, cell_size),
        })
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn points(&self) -> &[Point2D] {
        self.index.points()
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn nearest(&self, target: &Point2D) -> Option<u32> {
        self.index.nearest(target)
    }
}

pub fn sample_secondary_network(
    params: &SimulationParams,
    region: &BoxRegion,
    rng: &SeededRng,
) -> SecondaryNetwork {
    let mut stream = rng.derive("secondary-network", 0).rng();
    let points = sample_poisson_points(params.secondary_density, region, &mut stream);
    SecondaryNetwork {
        region: *region,
        index: SpatialIndex::build(points, params.secondary_range),
    }
}

/// One slot's active primary transmitters and their receivers;
/// `rx_points()[i]` belongs to `tx_points()[i]`.
#[derive(Debug, Clone)]
pub struct PrimarySlotRealization {
    slot: u64,
    tx_index: SpatialIndex,
    rx_index: SpatialIndex,
}

impl PrimarySlotRealization {
    pub fn from_pairs(
        slot: u64,
        tx_points: Vec<Point2D>,
        rx_points: Vec<Point2D>,
        cell_size: f64,
    ) -> Self {
        assert_eq!(tx_points.len(), rx_points.len(), "unpaired primary users");
        Self {
            slot,
            tx_index: SpatialIndex::build(tx_points, cell_size),
            rx_index: SpatialIndex::build(rx_points, cell_size),
        }
    }

    pub fn empty(slot: u64) -> Self {
        Self::from_pairs(slot, Vec::new(), Vec::new(), 1.0)
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn tx_points(&self) -> &[Point2D] {
        self.tx_index.points()
    }

    pub fn rx_points(&self) -> &[Point2D] {
        self.rx_index.points()
    }

    pub fn tx_index(&self) -> &SpatialIndex {
        &self.tx_index
    }

    pub fn rx_index(&self) -> &SpatialIndex {
        &self.rx_index
    }

    pub fn len(&self) -> usize {
        self.tx_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tx_index.is_empty()
    }

    /// Union of two independent fields; the result keeps this slot number.
    pub fn superposed(&self, other: &PrimarySlotRealization) -> Self {
        let tx = self
            .tx_points()
            .iter()
            .chain(other.tx_points())
            .copied()
            .collect();
        let rx = self
            .rx_points()
            .iter()
            .chain(other.rx_points())
            .copied()
            .collect();
        let cell = if self.is_empty() {
            other.tx_index.cell_size()
        } else {
            self.tx_index.cell_size()
        };
        Self::from_pairs(self.slot, tx, rx, cell)
    }
}

fn primary_cell_size(params: &SimulationParams) -> f64 {
    let c = params
        .secondary_interference_range
        .max(params.primary_interference_range);
    if c > 0.0 {
        c
    } else {
        params.secondary_range
    }
}

/// Draws the primary field of `slot`, sampling transmitters on the window
/// padded by [`SimulationParams::primary_padding`].
pub fn sample_primary_slot(
    params: &SimulationParams,
    region: &BoxRegion,
    slot: u64,
    rng: &SeededRng,
) -> PrimarySlotRealization {
    sample_primary_field(params.primary_density, params, region, slot, rng)
}

/// As [`sample_primary_slot`] with an explicit transmitter density; used to
/// build coupled fields by superposing independent layers.
pub fn sample_primary_field(
    density: f64,
    params: &SimulationParams,
    region: &BoxRegion,
    slot: u64,
    rng: &SeededRng,
) -> PrimarySlotRealization {
    let mut stream = rng.derive("primary-slot", slot).rng();
    let padded = region.padded(params.primary_padding());
    let tx = sample_poisson_points(density, &padded, &mut stream);
    let rx = tx
        .iter()
        .map(|t| displace_uniform_disk(t, params.primary_range, &mut stream))
        .collect();
    PrimarySlotRealization::from_pairs(slot, tx, rx, primary_cell_size(params))
}
