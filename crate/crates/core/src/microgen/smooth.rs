//! Radial smoothing of particle contours.
//!
//! The smoothed body of a particle is its outward offset by `s = s̄·r`
//! (which rounds the corners), shrunk about the centre until it covers as
//! many pixels as the particle did. Because the particle is star-shaped about
//! its centre, so is the offset, and scaled copies of it are nested; a pixel
//! therefore enters the body at a well-defined scale factor and the body at a
//! given pixel count is just the pixels with the smallest entry scales.

use super::domain::Domain;
use super::geometry::{self, Vec2};
use super::phase::{reskin, Phase, NO_PARTICLE};
use super::polygon::PolygonParticle;
use super::Microstructure;
use crate::grid::Grid;
use crate::scenario::Wrap;

const MAX_SCALE: f64 = 1.25;
const BISECTION_STEPS: usize = 48;
const MAX_SHRINK_ROUNDS: usize = 100;

/// Smallest λ for which `x` lies in the offset body scaled by λ, or `None`
/// beyond [`MAX_SCALE`].
fn entry_scale(x: Vec2, particle: &PolygonParticle, offset: f64) -> Option<f64> {
    let c = particle.center;
    let inside = |lambda: f64| {
        let y = c + (x - c) * (1.0 / lambda);
        geometry::signed_distance(y, &particle.vertices) <= offset
    };
    if !inside(MAX_SCALE) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, MAX_SCALE);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Pixels ordered by entry scale into the particle's smoothed body.
fn ranked_pixels(particle: &PolygonParticle, offset: f64, domain: &Domain) -> Vec<usize> {
    let reach = MAX_SCALE * (particle.extent() + offset) + domain.pitch;
    let c = particle.center;
    let mut scored: Vec<(f64, usize)> = Vec::new();
    domain.pixels_in_box(c - Vec2::new(reach, reach), c + Vec2::new(reach, reach), |r, col| {
        let idx = r * domain.width + col;
        let p = domain.pixel_center(r, col);
        // Nearest periodic image of the pixel relative to the centre.
        let x = domain
            .image_offsets()
            .into_iter()
            .map(|off| p - off)
            .min_by(|a, b| (*a - c).norm().total_cmp(&(*b - c).norm()))
            .unwrap();
        if let Some(scale) = entry_scale(x, particle, offset) {
            scored.push((scale, idx));
        }
    });
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.dedup_by_key(|e| e.1);
    scored.into_iter().map(|(_, i)| i).collect()
}

/// Smooths every particle with threshold `s_bar` relative to its
/// circumscribed radius while preserving its pixel count. Where smoothed
/// bodies would claim the same pixel, the bodies involved shrink in steps of
/// 1% of their size until they are disjoint.
///
/// Particle geometry in the result is the unsmoothed polygon record.
pub fn smooth(micro: &Microstructure, s_bar: f64) -> Microstructure {
    assert!((0.0..=0.5).contains(&s_bar), "s_bar must lie in [0, 0.5]");
    if s_bar == 0.0 || micro.particles.is_empty() {
        return micro.clone();
    }
    let domain = micro.domain();
    let mut counts = vec![0usize; micro.particles.len()];
    for &l in micro.labels.data() {
        if l != NO_PARTICLE {
            counts[l as usize] += 1;
        }
    }
    let ranked: Vec<Vec<usize>> = micro
        .particles
        .iter()
        .map(|p| ranked_pixels(p, s_bar * p.radius, &domain))
        .collect();
    let mut take: Vec<usize> = counts.iter().zip(&ranked).map(|(&n, r)| n.min(r.len())).collect();

    let n_pix = domain.n_pixels();
    let mut labels = vec![NO_PARTICLE; n_pix];
    for _ in 0..MAX_SHRINK_ROUNDS {
        labels.iter_mut().for_each(|l| *l = NO_PARTICLE);
        let mut offenders = vec![false; take.len()];
        for (k, r) in ranked.iter().enumerate() {
            for &idx in &r[..take[k]] {
                let owner = labels[idx];
                if owner == NO_PARTICLE {
                    labels[idx] = k as u32;
                } else {
                    offenders[k] = true;
                    offenders[owner as usize] = true;
                }
            }
        }
        if !offenders.contains(&true) {
            break;
        }
        for (k, off) in offenders.iter().enumerate() {
            if *off {
                let step = (counts[k] as f64 * 0.01).ceil() as usize;
                take[k] = take[k].saturating_sub(step.max(1));
            }
        }
    }

    let mut codes = Grid::filled(domain.height, domain.width, Phase::Mortar);
    for (i, &l) in labels.iter().enumerate() {
        if l != NO_PARTICLE {
            codes.data_mut()[i] = Phase::Aggregate;
        }
    }
    reskin(&mut codes, domain.wrap);
    Microstructure {
        phase: micro.phase.with_codes(codes),
        labels: Grid::from_vec(domain.height, domain.width, labels),
        ..micro.clone()
    }
}

/// Contour length (mm) of the aggregate phase by the four-direction Crofton
/// estimator: boundary crossings along rows, columns and both diagonals.
pub fn aggregate_perimeter(codes: &Grid<Phase>, pitch: f64, wrap: Wrap) -> f64 {
    let is_agg = |r: usize, c: usize| *codes.get(r, c) == Phase::Aggregate;
    let mut axis = 0usize;
    let mut diag = 0usize;
    for r in 0..codes.height() {
        for c in 0..codes.width() {
            let a = is_agg(r, c);
            for (dr, dc, is_diag) in [(0, 1, false), (1, 0, false), (1, 1, true), (1, -1, true)] {
                if let Some((rr, cc)) = codes.neighbor(r, c, dr, dc, wrap.y, wrap.x) {
                    if is_agg(rr, cc) != a {
                        if is_diag {
                            diag += 1;
                        } else {
                            axis += 1;
                        }
                    }
                }
            }
        }
    }
    std::f64::consts::PI / 8.0 * pitch * (axis as f64 + diag as f64 / 2f64.sqrt())
}
