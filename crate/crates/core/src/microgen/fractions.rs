use serde::{Deserialize, Serialize};

use super::phase::{Phase, NO_PARTICLE};
use super::Microstructure;

/// Aggregate area ratios per size class, measured on pixel counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaFractions {
    /// Class diameters (mm) in the order of `per_class`.
    pub diameters: Vec<f64>,
    pub per_class: Vec<f64>,
    pub total: f64,
}

impl AreaFractions {
    /// Fraction for a nominal diameter, zero if the class is absent.
    pub fn of(&self, diameter_mm: f64) -> f64 {
        self.diameters
            .iter()
            .position(|&d| (d - diameter_mm).abs() < 1e-9)
            .map_or(0.0, |i| self.per_class[i])
    }
}

/// Aggregate pixels are attributed to classes through the label raster; ITZ
/// counts as matrix. Aggregate pixels without an owner (hand-made rasters)
/// enter the total but no class.
pub fn area_fractions(micro: &Microstructure) -> AreaFractions {
    let diameters = micro.class_diameters.clone();
    let mut counts = vec![0usize; diameters.len()];
    let mut total = 0usize;
    for (code, &label) in micro.phase.codes.data().iter().zip(micro.labels.data()) {
        if *code != Phase::Aggregate {
            continue;
        }
        total += 1;
        if label == NO_PARTICLE {
            continue;
        }
        let d = micro.particles[label as usize].diameter_mm;
        if let Some(i) = diameters.iter().position(|&x| (x - d).abs() < 1e-9) {
            counts[i] += 1;
        }
    }
    let n = micro.phase.codes.len() as f64;
    AreaFractions {
        diameters,
        per_class: counts.iter().map(|&c| c as f64 / n).collect(),
        total: total as f64 / n,
    }
}
