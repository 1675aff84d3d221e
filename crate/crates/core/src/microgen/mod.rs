//! Level-set placement of polygonal coarse aggregate in a (semi-)periodic cell.
//!
//! Particles are inserted class by class, largest first. A signed distance
//! field to all placed particles is kept on the pixel grid; a new particle of
//! circumscribed radius `r` may only be centred on pixels whose distance
//! exceeds `r` plus the configured clearance, so overlaps cannot occur.

mod distance;
mod domain;
mod fractions;
pub mod geometry;
mod phase;
mod polygon;
mod smooth;
mod transform;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use distance::DistanceGrid;
pub use domain::Domain;
pub use fractions::{area_fractions, AreaFractions};
pub use geometry::Vec2;
pub use phase::{rasterize, rasterize_labeled, reskin, Phase, PhaseGrid, NO_PARTICLE};
pub use polygon::{make_polygon, PolygonParticle, PolygonShape};
pub use smooth::{aggregate_perimeter, smooth};
pub use transform::{augment, erase_outer_layer, Augmentation};

use crate::grid::Grid;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MicrogenError {
    #[error("no admissible centre for radius {radius} mm with clearance {clearance} mm")]
    NoAdmissibleRegion { radius: f64, clearance: f64 },
    #[error("particle overlaps existing aggregate at pixel ({row}, {col})")]
    OverlapViolation { row: usize, col: usize },
    #[error("target fractions {targets:?} unreachable, achieved {achieved:?}")]
    TargetUnreachable { targets: Vec<f64>, achieved: Vec<f64> },
    #[error("augmentation {op:?} is not admitted in the {scenario} scenario")]
    IllegalAugmentation { op: Augmentation, scenario: Scenario },
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeClass {
    /// Nominal (circumscribed) diameter in millimetres.
    pub diameter_mm: f64,
    /// Target share of the cell area covered by this class.
    pub target_fraction: f64,
}

impl SizeClass {
    pub fn new(diameter_mm: f64, target_fraction: f64) -> Self {
        Self {
            diameter_mm,
            target_fraction,
        }
    }

    pub fn radius(&self) -> f64 {
        self.diameter_mm / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub height: usize,
    pub width: usize,
    pub pitch_mm: f64,
    /// Insertion order; diameters must be strictly decreasing.
    pub classes: Vec<SizeClass>,
    /// Minimum gap between a new particle's circumscribed circle and placed aggregate.
    pub min_clearance_mm: f64,
    /// Rejected draws tolerated per inserted particle.
    pub max_attempts: usize,
    /// Absolute tolerance on each class's achieved area fraction.
    pub fraction_tolerance: f64,
    pub scenario: Scenario,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            height: 100,
            width: 100,
            pitch_mm: 0.32,
            classes: vec![
                SizeClass::new(16.0, 0.2),
                SizeClass::new(8.0, 0.1),
                SizeClass::new(4.0, 0.05),
            ],
            min_clearance_mm: 0.32,
            max_attempts: 10_000,
            fraction_tolerance: 0.02,
            scenario: Scenario::Uniform,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn domain(&self) -> Domain {
        Domain::new(self.height, self.width, self.pitch_mm, self.scenario.wrap())
    }

    pub fn validate(&self) -> Result<(), MicrogenError> {
        let bad = |m: &str| Err(MicrogenError::InvalidConfig(m.to_string()));
        if self.height == 0 || self.width == 0 {
            return bad("grid dimensions must be positive");
        }
        if !(self.pitch_mm > 0.0) {
            return bad("pitch must be positive");
        }
        if self.min_clearance_mm < 0.0 {
            return bad("clearance must be non-negative");
        }
        let mut total = 0.0;
        for (i, c) in self.classes.iter().enumerate() {
            if !(c.diameter_mm > 0.0) {
                return bad("diameters must be positive");
            }
            if !(0.0..=1.0).contains(&c.target_fraction) {
                return bad("target fractions must lie in [0, 1]");
            }
            if i > 0 && c.diameter_mm >= self.classes[i - 1].diameter_mm {
                return bad("size classes must be ordered by strictly decreasing diameter");
            }
            total += c.target_fraction;
        }
        if total > 0.5 + 1e-12 {
            return bad("total target fraction exceeds 0.5");
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }
}

/// Random grading for dataset generation: a composition cluster is drawn
/// (16 mm only; 16 + 8 mm; 16 + 8 + 4 mm), then a total fraction and the
/// split between classes.
pub fn random_classes<R: Rng + ?Sized>(rng: &mut R) -> Vec<SizeClass> {
    match rng.gen_range(0..3) {
        0 => vec![SizeClass::new(16.0, rng.gen_range(0.15..0.35))],
        1 => {
            let total = rng.gen_range(0.2..0.45);
            let s = rng.gen_range(0.3..0.8);
            vec![SizeClass::new(16.0, total * s), SizeClass::new(8.0, total * (1.0 - s))]
        }
        _ => {
            let total = rng.gen_range(0.2..0.45);
            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(0.2..1.0)).collect();
            let sum: f64 = w.iter().sum();
            [16.0, 8.0, 4.0]
                .iter()
                .zip(&w)
                .map(|(&d, &wi)| SizeClass::new(d, total * wi / sum))
                .collect()
        }
    }
}

/// Why insertion of a class ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Reached,
    Saturated,
    AttemptsExhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenReport {
    pub achieved: Vec<f64>,
    pub stops: Vec<StopReason>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Microstructure {
    pub phase: PhaseGrid,
    /// Owning particle index per pixel, [`NO_PARTICLE`] outside aggregate.
    pub labels: Grid<u32>,
    pub particles: Vec<PolygonParticle>,
    pub scenario: Scenario,
    pub seed: u64,
    /// Diameters of the configured size classes, largest first.
    pub class_diameters: Vec<f64>,
}

impl Microstructure {
    /// Aggregate-free cell.
    pub fn homogeneous(height: usize, width: usize, pitch: f64, scenario: Scenario) -> Self {
        Self {
            phase: PhaseGrid::uniform(height, width, pitch, Phase::Mortar),
            labels: Grid::filled(height, width, NO_PARTICLE),
            particles: Vec::new(),
            scenario,
            seed: 0,
            class_diameters: vec![16.0, 8.0, 4.0],
        }
    }

    /// Wraps a bare phase raster (no particle geometry), e.g. a hand-drawn cell.
    pub fn from_phase(phase: PhaseGrid, scenario: Scenario) -> Self {
        let labels = Grid::filled(phase.height(), phase.width(), NO_PARTICLE);
        Self {
            phase,
            labels,
            particles: Vec::new(),
            scenario,
            seed: 0,
            class_diameters: vec![16.0, 8.0, 4.0],
        }
    }

    pub fn domain(&self) -> Domain {
        Domain::new(
            self.phase.height(),
            self.phase.width(),
            self.phase.pitch,
            self.scenario.wrap(),
        )
    }

    pub fn aggregate_fraction(&self) -> f64 {
        self.phase.fraction(Phase::Aggregate)
    }
}

pub fn generate(config: &GenConfig) -> Result<Microstructure, MicrogenError> {
    generate_with_report(config).map(|(m, _)| m)
}

/// Places particles class by class and reports the achieved fractions.
///
/// A class stops once its pixel fraction is within tolerance of the target,
/// when no admissible centre is left, or after `max_attempts` consecutive
/// draws that would overshoot. Only the last case is an error, and only when
/// the class is still outside the tolerance band.
pub fn generate_with_report(config: &GenConfig) -> Result<(Microstructure, GenReport), MicrogenError> {
    config.validate()?;
    let domain = config.domain();
    let n_pix = domain.n_pixels() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dist = DistanceGrid::empty(domain);
    let mut particles: Vec<PolygonParticle> = Vec::new();
    let mut report = GenReport {
        achieved: Vec::new(),
        stops: Vec::new(),
    };
    let mut unreachable = false;

    for class in &config.classes {
        let target = class.target_fraction * n_pix;
        let tol = config.fraction_tolerance * n_pix;
        let mut achieved = 0usize;
        let mut attempts = 0usize;
        let stop = loop {
            if class.target_fraction == 0.0 || achieved as f64 >= target - tol {
                break StopReason::Reached;
            }
            let shape = make_polygon(class, &mut rng);
            let estimate = shape.area() / (domain.pitch * domain.pitch);
            if achieved as f64 + estimate > target + tol + 0.5 * estimate.sqrt() {
                attempts += 1;
                if attempts >= config.max_attempts {
                    break StopReason::AttemptsExhausted;
                }
                continue;
            }
            let center = match dist.sample_admissible_center(class.radius(), config.min_clearance_mm, &mut rng) {
                Ok(c) => c,
                Err(MicrogenError::NoAdmissibleRegion { .. }) => break StopReason::Saturated,
                Err(e) => return Err(e),
            };
            let placed = shape.placed(center);
            let footprint = placed.covered_pixels(&domain).len();
            if achieved as f64 + footprint as f64 > target + tol {
                attempts += 1;
                if attempts >= config.max_attempts {
                    break StopReason::AttemptsExhausted;
                }
                continue;
            }
            dist.insert_particle(&placed)?;
            particles.push(placed);
            achieved += footprint;
            attempts = 0;
        };
        let frac = achieved as f64 / n_pix;
        if stop == StopReason::AttemptsExhausted && (frac - class.target_fraction).abs() > config.fraction_tolerance {
            unreachable = true;
        }
        report.achieved.push(frac);
        report.stops.push(stop);
    }

    if unreachable {
        return Err(MicrogenError::TargetUnreachable {
            targets: config.classes.iter().map(|c| c.target_fraction).collect(),
            achieved: report.achieved,
        });
    }

    let (phase, labels) = rasterize_labeled(&particles, &domain);
    Ok((
        Microstructure {
            phase,
            labels,
            particles,
            scenario: config.scenario,
            seed: config.seed,
            class_diameters: config.classes.iter().map(|c| c.diameter_mm).collect(),
        },
        report,
    ))
}
