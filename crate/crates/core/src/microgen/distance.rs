//! Level-set bookkeeping for overlap-free placement.

use rand::Rng;

use super::domain::Domain;
use super::geometry::Vec2;
use super::polygon::PolygonParticle;
use super::MicrogenError;
use crate::grid::Grid;

/// Signed distance (mm) from each pixel centre to the nearest particle
/// boundary, positive outside all particles. An empty domain holds `+∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceGrid {
    pub values: Grid<f64>,
    pub domain: Domain,
}

impl DistanceGrid {
    pub fn empty(domain: Domain) -> Self {
        Self {
            values: Grid::filled(domain.height, domain.width, f64::INFINITY),
            domain,
        }
    }

    pub fn pitch(&self) -> f64 {
        self.domain.pitch
    }

    /// Pixels where a circle of `radius` plus `clearance` fits without
    /// touching any placed particle.
    pub fn admissible_pixels(&self, radius: f64, clearance: f64) -> Vec<usize> {
        let threshold = radius + clearance;
        self.values
            .data()
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > threshold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Uniform draw over the admissible pixel set; returns the pixel centre.
    pub fn sample_admissible_center<R: Rng + ?Sized>(
        &self,
        radius: f64,
        clearance: f64,
        rng: &mut R,
    ) -> Result<Vec2, MicrogenError> {
        let admissible = self.admissible_pixels(radius, clearance);
        if admissible.is_empty() {
            return Err(MicrogenError::NoAdmissibleRegion { radius, clearance });
        }
        let idx = admissible[rng.gen_range(0..admissible.len())];
        let w = self.domain.width;
        Ok(self.domain.pixel_center(idx / w, idx % w))
    }

    /// Lowers the field to the particle's signed distance where it is closer.
    ///
    /// Fails with `OverlapViolation` when a pixel centre is inside both the
    /// new particle and an existing one.
    pub fn insert_particle(&mut self, particle: &PolygonParticle) -> Result<(), MicrogenError> {
        let domain = self.domain;
        let mut updates = Vec::new();
        for r in 0..domain.height {
            for c in 0..domain.width {
                let old = *self.values.get(r, c);
                let p = domain.pixel_center(r, c);
                let d = particle.signed_distance(p, &domain);
                if d <= 0.0 && old < 0.0 {
                    return Err(MicrogenError::OverlapViolation { row: r, col: c });
                }
                if d < old {
                    updates.push((r * domain.width + c, d));
                }
            }
        }
        let values = self.values.data_mut();
        for (i, d) in updates {
            values[i] = d;
        }
        Ok(())
    }
}
