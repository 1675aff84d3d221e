//! Randomised star-shaped polygons inscribed in a circle.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::domain::Domain;
use super::geometry::{self, Vec2};
use super::SizeClass;

pub const MIN_VERTICES: usize = 4;
pub const MAX_VERTICES: usize = 8;
/// Smallest central angle between consecutive vertices.
pub const MIN_SECTOR: f64 = PI / 12.0;
/// Innermost vertex radius relative to the circumscribed radius.
pub const MIN_RADIUS_FACTOR: f64 = 0.75;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonParticle {
    pub center: Vec2,
    /// Absolute vertex positions, counter-clockwise.
    pub vertices: Vec<Vec2>,
    /// Circumscribed radius of the nominal size class.
    pub radius: f64,
    /// Nominal diameter of the size class this particle was drawn from.
    pub diameter_mm: f64,
}

/// Deterministic description of a polygon before placement.
#[derive(Clone, Debug, PartialEq)]
pub struct PolygonShape {
    /// Relative widths of the central sectors; normalised internally.
    pub sector_weights: Vec<f64>,
    /// Vertex distance from the centre as a fraction of the radius.
    pub radius_factors: Vec<f64>,
    /// Polar angle of the first vertex.
    pub rotation: f64,
}

impl PolygonShape {
    pub fn regular(n: usize) -> Self {
        Self {
            sector_weights: vec![1.0; n],
            radius_factors: vec![1.0; n],
            rotation: 0.0,
        }
    }

    /// Central angles, each at least [`MIN_SECTOR`], summing to 2π.
    pub fn sectors(&self) -> Vec<f64> {
        let n = self.sector_weights.len();
        let free = 2.0 * PI - n as f64 * MIN_SECTOR;
        let total: f64 = self.sector_weights.iter().sum();
        self.sector_weights
            .iter()
            .map(|w| MIN_SECTOR + free * w / total)
            .collect()
    }
}

impl PolygonParticle {
    pub fn from_shape(class: &SizeClass, shape: &PolygonShape) -> Self {
        let n = shape.sector_weights.len();
        assert_eq!(n, shape.radius_factors.len());
        let radius = class.radius();
        let mut angle = shape.rotation;
        let mut vertices = Vec::with_capacity(n);
        for (sector, factor) in shape.sectors().iter().zip(&shape.radius_factors) {
            vertices.push(Vec2::new(radius * factor * angle.cos(), radius * factor * angle.sin()));
            angle += sector;
        }
        Self {
            center: Vec2::default(),
            vertices,
            radius,
            diameter_mm: class.diameter_mm,
        }
    }

    /// Copy translated so its centre sits at `center`.
    pub fn placed(&self, center: Vec2) -> Self {
        let by = center - self.center;
        Self {
            center,
            vertices: geometry::translate(&self.vertices, by),
            radius: self.radius,
            diameter_mm: self.diameter_mm,
        }
    }

    /// Copy scaled about its own centre.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            center: self.center,
            vertices: self
                .vertices
                .iter()
                .map(|&v| self.center + (v - self.center) * factor)
                .collect(),
            radius: self.radius * factor,
            diameter_mm: self.diameter_mm,
        }
    }

    pub fn area(&self) -> f64 {
        geometry::signed_area(&self.vertices)
    }

    /// Largest vertex distance from the centre.
    pub fn extent(&self) -> f64 {
        self.vertices
            .iter()
            .map(|&v| (v - self.center).norm())
            .fold(0.0, f64::max)
    }

    fn bbox(&self) -> (Vec2, Vec2) {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            min.x = min.x.min(v.x);
            min.y = min.y.min(v.y);
            max.x = max.x.max(v.x);
            max.y = max.y.max(v.y);
        }
        (min, max)
    }

    /// Signed distance from `p` to the nearest periodic image (negative inside).
    pub fn signed_distance(&self, p: Vec2, domain: &Domain) -> f64 {
        let extent = self.extent();
        let mut best = f64::INFINITY;
        for off in domain.image_offsets() {
            // The circumscribed circle bounds the distance from below.
            let lower = (p - (self.center + off)).norm() - extent;
            if lower >= best {
                continue;
            }
            let d = geometry::signed_distance(p - off, &self.vertices);
            if d < best {
                best = d;
            }
        }
        best
    }

    /// Sorted, de-duplicated indices of pixels whose centres lie inside.
    pub fn covered_pixels(&self, domain: &Domain) -> Vec<usize> {
        let (min, max) = self.bbox();
        let mut out = Vec::new();
        for off in domain.image_offsets() {
            domain.pixels_in_box(min + off, max + off, |r, c| {
                let p = domain.pixel_center(r, c) - off;
                if geometry::contains(p, &self.vertices) {
                    out.push(r * domain.width + c);
                }
            });
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Draws a random polygon for `class`, centred at the origin.
///
/// The vertex count is uniform on 4..=8, the central angles are a random
/// partition of the full turn with every sector in `[MIN_SECTOR, π)`, and each
/// vertex radius is uniform on `[0.75 r, r]`. Sectors below π keep the polygon
/// star-shaped about its centre, hence simple.
pub fn make_polygon<R: Rng + ?Sized>(class: &SizeClass, rng: &mut R) -> PolygonParticle {
    let n = rng.gen_range(MIN_VERTICES..=MAX_VERTICES);
    let shape = loop {
        let shape = PolygonShape {
            sector_weights: (0..n).map(|_| rng.gen::<f64>() + f64::EPSILON).collect(),
            radius_factors: (0..n).map(|_| rng.gen_range(MIN_RADIUS_FACTOR..=1.0)).collect(),
            rotation: rng.gen_range(0.0..2.0 * PI),
        };
        if shape.sectors().iter().all(|&s| s < PI) {
            break shape;
        }
    };
    let particle = PolygonParticle::from_shape(class, &shape);
    debug_assert!(geometry::is_simple(&particle.vertices));
    particle
}
