//! Three-phase rasters: aggregate, interfacial transition zone, mortar.

use serde::{Deserialize, Serialize};

use super::domain::Domain;
use super::polygon::PolygonParticle;
use crate::grid::Grid;
use crate::scenario::Wrap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Phase {
    Aggregate = 0,
    Itz = 1,
    Mortar = 2,
}

impl Phase {
    /// Geometry channel value: aggregate 0, ITZ 0.5, mortar 1.
    pub fn rho(self) -> f32 {
        match self {
            Phase::Aggregate => 0.0,
            Phase::Itz => 0.5,
            Phase::Mortar => 1.0,
        }
    }

    /// Inverse of [`Phase::rho`] with nearest-level rounding.
    pub fn from_rho(v: f32) -> Phase {
        if v < 0.25 {
            Phase::Aggregate
        } else if v < 0.75 {
            Phase::Itz
        } else {
            Phase::Mortar
        }
    }

    /// Mortar and ITZ carry the imposed shrinkage; aggregate is volumetrically stable.
    pub fn shrinks(self) -> bool {
        !matches!(self, Phase::Aggregate)
    }
}

/// Label raster value for pixels outside every particle.
pub const NO_PARTICLE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub codes: Grid<Phase>,
    /// Millimetres per pixel.
    pub pitch: f64,
}

impl PhaseGrid {
    pub fn uniform(height: usize, width: usize, pitch: f64, phase: Phase) -> Self {
        Self {
            codes: Grid::filled(height, width, phase),
            pitch,
        }
    }

    pub fn height(&self) -> usize {
        self.codes.height()
    }

    pub fn width(&self) -> usize {
        self.codes.width()
    }

    pub fn rho(&self) -> Grid<f32> {
        self.codes.map(|p| p.rho())
    }

    pub fn from_rho(rho: &Grid<f32>, pitch: f64) -> Self {
        Self {
            codes: rho.map(|&v| Phase::from_rho(v)),
            pitch,
        }
    }

    pub fn count(&self, phase: Phase) -> usize {
        self.codes.data().iter().filter(|&&p| p == phase).count()
    }

    pub fn fraction(&self, phase: Phase) -> f64 {
        self.count(phase) as f64 / self.codes.len() as f64
    }

    /// Same raster with a different code array (shape preserved).
    pub fn with_codes(&self, codes: Grid<Phase>) -> Self {
        Self {
            codes,
            pitch: self.pitch,
        }
    }
}

/// Marks every non-aggregate pixel 8-adjacent to aggregate as ITZ and every
/// other non-aggregate pixel as mortar.
pub fn reskin(codes: &mut Grid<Phase>, wrap: Wrap) {
    let (h, w) = (codes.height(), codes.width());
    let src = codes.clone();
    for r in 0..h {
        for c in 0..w {
            if *src.get(r, c) == Phase::Aggregate {
                continue;
            }
            let mut touches = false;
            'n: for dr in -1..=1 {
                for dc in -1..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    if let Some((rr, cc)) = src.neighbor(r, c, dr, dc, wrap.y, wrap.x) {
                        if *src.get(rr, cc) == Phase::Aggregate {
                            touches = true;
                            break 'n;
                        }
                    }
                }
            }
            codes.set(r, c, if touches { Phase::Itz } else { Phase::Mortar });
        }
    }
}

/// Rasterises particles and records which particle owns each aggregate pixel.
pub fn rasterize_labeled(particles: &[PolygonParticle], domain: &Domain) -> (PhaseGrid, Grid<u32>) {
    let mut codes = Grid::filled(domain.height, domain.width, Phase::Mortar);
    let mut labels = Grid::filled(domain.height, domain.width, NO_PARTICLE);
    for (k, p) in particles.iter().enumerate() {
        for idx in p.covered_pixels(domain) {
            codes.data_mut()[idx] = Phase::Aggregate;
            if labels.data()[idx] == NO_PARTICLE {
                labels.data_mut()[idx] = k as u32;
            }
        }
    }
    reskin(&mut codes, domain.wrap);
    (
        PhaseGrid {
            codes,
            pitch: domain.pitch,
        },
        labels,
    )
}

/// Aggregate where a pixel centre lies inside a particle (edges count as
/// inside), a one-pixel ITZ ring around it, mortar elsewhere.
pub fn rasterize(particles: &[PolygonParticle], domain: &Domain) -> PhaseGrid {
    rasterize_labeled(particles, domain).0
}
