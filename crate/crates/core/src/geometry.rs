//! Planar points, axis-aligned boxes and a uniform-grid spatial index.
//!
//! Lengths are in kilometres throughout the crate. Every containment and
//! radius test is boundary inclusive (`d <= r`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite coordinate ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
    #[error("degenerate box [{x_min}, {x_max}] x [{y_min}, {y_max}]")]
    DegenerateBox {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const ORIGIN: Point2D = Point2D { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Checked constructor rejecting NaN and infinite coordinates.
    pub fn try_new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if x.is_finite() && y.is_finite() {
            Ok(Self { x, y })
        } else {
            Err(GeometryError::NonFinite { x, y })
        }
    }

    #[inline]
    pub fn distance_sq(&self, other: &Point2D) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn distance(&self, other: &Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn scaled(&self, s: f64) -> Point2D {
        Point2D::new(self.x * s, self.y * s)
    }
}

/// Euclidean distance between two points.
#[inline]
pub fn distance(a: Point2D, b: Point2D) -> f64 {
    a.distance(&b)
}

/// `d(a, b) <= r`, decided on squared distances so that queries and links
/// agree bit-for-bit on the boundary.
#[inline]
pub fn within(a: &Point2D, b: &Point2D, r: f64) -> bool {
    a.distance_sq(b) <= r * r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoxRegion {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self, GeometryError> {
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(GeometryError::DegenerateBox {
                x_min,
                x_max,
                y_min,
                y_max,
            });
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    /// `[-half, half]²`.
    pub fn centered_square(half_side: f64) -> Result<Self, GeometryError> {
        Self::new(-half_side, half_side, -half_side, half_side)
    }

    /// Square of the given half side centred on `center`.
    pub fn square_around(center: Point2D, half_side: f64) -> Result<Self, GeometryError> {
        Self::new(
            center.x - half_side,
            center.x + half_side,
            center.y - half_side,
            center.y + half_side,
        )
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point2D {
        Point2D::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn contains(&self, p: &Point2D) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn contains_box(&self, other: &BoxRegion) -> bool {
        other.x_min >= self.x_min
            && other.x_max <= self.x_max
            && other.y_min >= self.y_min
            && other.y_max <= self.y_max
    }

    /// Grow every side outwards by `margin`.
    pub fn padded(&self, margin: f64) -> BoxRegion {
        BoxRegion {
            x_min: self.x_min - margin,
            x_max: self.x_max + margin,
            y_min: self.y_min - margin,
            y_max: self.y_max + margin,
        }
    }

    /// Pull every side inwards by `margin`; fails when nothing is left.
    pub fn shrunk(&self, margin: f64) -> Result<BoxRegion, GeometryError> {
        BoxRegion::new(
            self.x_min + margin,
            self.x_max - margin,
            self.y_min + margin,
            self.y_max - margin,
        )
    }

    pub fn scaled(&self, s: f64) -> Result<BoxRegion, GeometryError> {
        BoxRegion::new(
            self.x_min * s,
            self.x_max * s,
            self.y_min * s,
            self.y_max * s,
        )
    }

    /// Map a pair of unit-interval variates onto the box.
    #[inline]
    pub fn point_at(&self, u: f64, v: f64) -> Point2D {
        Point2D::new(
            self.x_min + u * self.width(),
            self.y_min + v * self.height(),
        )
    }
}

/// Uniform grid over a fixed point set.
///
/// Cell of `p` is `(floor(p.x / cell_size), floor(p.y / cell_size))`. The
/// occupied bounding range of cells is stored densely in CSR form; cells
/// outside it are empty.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cell_size: f64,
    points: Vec<Point2D>,
    origin: (i64, i64),
    dims: (usize, usize),
    cell_start: Vec<u32>,
    ids: Vec<u32>,
}

impl SpatialIndex {
    /// Builds an index; `cell_size` must be positive and finite.
    pub fn build(points: Vec<Point2D>, cell_size: f64) -> Self {
        assert!(
            cell_size.is_finite() && cell_size > 0.0,
            "cell size must be positive, got {cell_size}"
        );
        assert!(points.len() < u32::MAX as usize, "too many points");
        if points.is_empty() {
            return Self {
                cell_size,
                points,
                origin: (0, 0),
                dims: (0, 0),
                cell_start: vec![0],
                ids: Vec::new(),
            };
        }
        let cells: Vec<(i64, i64)> = points.iter().map(|p| cell_of(p, cell_size)).collect();
        let (mut cx0, mut cy0, mut cx1, mut cy1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
        for &(cx, cy) in &cells {
            cx0 = cx0.min(cx);
            cy0 = cy0.min(cy);
            cx1 = cx1.max(cx);
            cy1 = cy1.max(cy);
        }
        let nx = (cx1 - cx0 + 1) as usize;
        let ny = (cy1 - cy0 + 1) as usize;
        let mut counts = vec![0u32; nx * ny + 1];
        let flat = |(cx, cy): (i64, i64)| (cy - cy0) as usize * nx + (cx - cx0) as usize;
        for &c in &cells {
            counts[flat(c) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut ids = vec![0u32; points.len()];
        // Ids are pushed in increasing order, so each cell's list is sorted.
        for (id, &c) in cells.iter().enumerate() {
            let slot = &mut fill[flat(c)];
            ids[*slot as usize] = id as u32;
            *slot += 1;
        }
        Self {
            cell_size,
            points,
            origin: (cx0, cy0),
            dims: (nx, ny),
            cell_start: counts,
            ids,
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn points(&self) -> &[Point2D] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cell_of(&self, p: &Point2D) -> (i64, i64) {
        cell_of(p, self.cell_size)
    }

    /// Identifiers stored in one cell, ascending.
    pub fn cell_members(&self, cell: (i64, i64)) -> &[u32] {
        match self.flat_index(cell) {
            Some(k) => {
                let lo = self.cell_start[k] as usize;
                let hi = self.cell_start[k + 1] as usize;
                &self.ids[lo..hi]
            }
            None => &[],
        }
    }

    /// Occupied cell range as `(origin, (nx, ny))`.
    pub fn cell_bounds(&self) -> ((i64, i64), (usize, usize)) {
        (self.origin, self.dims)
    }

    fn flat_index(&self, (cx, cy): (i64, i64)) -> Option<usize> {
        let dx = cx - self.origin.0;
        let dy = cy - self.origin.1;
        if dx < 0 || dy < 0 || dx as usize >= self.dims.0 || dy as usize >= self.dims.1 {
            None
        } else {
            Some(dy as usize * self.dims.0 + dx as usize)
        }
    }

    /// Calls `f` for every indexed point within `r` of `center`, stopping
    /// early when `f` returns `false`. Returns `false` iff stopped early.
    pub fn visit_within<F>(&self, center: &Point2D, r: f64, mut f: F) -> bool
    where
        F: FnMut(u32, &Point2D) -> bool,
    {
        if self.points.is_empty() || r < 0.0 || !r.is_finite() {
            return true;
        }
        let (lo_x, lo_y) = cell_of(&Point2D::new(center.x - r, center.y - r), self.cell_size);
        let (hi_x, hi_y) = cell_of(&Point2D::new(center.x + r, center.y + r), self.cell_size);
        let lo_x = lo_x.max(self.origin.0);
        let lo_y = lo_y.max(self.origin.1);
        let hi_x = hi_x.min(self.origin.0 + self.dims.0 as i64 - 1);
        let hi_y = hi_y.min(self.origin.1 + self.dims.1 as i64 - 1);
        let r2 = r * r;
        for cy in lo_y..=hi_y {
            for cx in lo_x..=hi_x {
                for &id in self.cell_members((cx, cy)) {
                    let p = &self.points[id as usize];
                    if p.distance_sq(center) <= r2 && !f(id, p) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Identifiers of all points with `d(p, center) <= r`.
    pub fn radius_query(&self, center: &Point2D, r: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.visit_within(center, r, |id, _| {
            out.push(id);
            true
        });
        out
    }

    pub fn any_within(&self, center: &Point2D, r: f64) -> bool {
        !self.visit_within(center, r, |_, _| false)
    }

    /// Index of the point nearest to `target`; ties go to the smallest id.
    pub fn nearest(&self, target: &Point2D) -> Option<u32> {
        if self.points.is_empty() {
            return None;
        }
        // Expand the search ring until a hit is found, then confirm with
        // one more radius covering every cell that could hold a closer one.
        let mut r = self.cell_size;
        loop {
            let mut best: Option<(f64, u32)> = None;
            self.visit_within(target, r, |id, p| {
                let d2 = p.distance_sq(target);
                if best.is_none_or(|(bd, bid)| d2 < bd || (d2 == bd && id < bid)) {
                    best = Some((d2, id));
                }
                true
            });
            if let Some((_, id)) = best {
                return Some(id);
            }
            r *= 2.0;
            let span = self.cell_size * (self.dims.0.max(self.dims.1) as f64 + 2.0);
            if r > 4.0 * span + target.x.abs() + target.y.abs() {
                return self.nearest_linear(target);
            }
        }
    }

    fn nearest_linear(&self, target: &Point2D) -> Option<u32> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.distance_sq(target), i as u32))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, i)| i)
    }
}

#[inline]
fn cell_of(p: &Point2D, cell_size: f64) -> (i64, i64) {
    (
        (p.x / cell_size).floor() as i64,
        (p.y / cell_size).floor() as i64,
    )
}
