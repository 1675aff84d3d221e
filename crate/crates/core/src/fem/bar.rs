//! Uniaxial bar softening test for the crack-band regularisation.

use serde::{Deserialize, Serialize};

use super::damage::solve_damage;
use super::material::MaterialParams;
use super::FemError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarResult {
    pub n_elements: usize,
    /// Work of the end force minus recoverable elastic energy, per unit
    /// cross-section, J/m².
    pub dissipated_per_area: f64,
    pub peak_stress: f64,
}

/// Bar of `n_elements` equal two-node elements pulled at one end. The first
/// element is 1% weaker so the crack localises there; the others unload
/// elastically. The path is followed by controlling the strain of the
/// softening element, which stays stable through snap-back.
pub fn bar_dissipation(n_elements: usize, length: f64, mat: &MaterialParams) -> Result<BarResult, FemError> {
    assert!(n_elements >= 1);
    let f_t = mat.f_t.expect("bar test needs a softening material");
    let weak = MaterialParams {
        f_t: Some(0.99 * f_t),
        ..*mat
    };
    let h = length / n_elements as f64;
    let e = mat.e;
    let others = (n_elements - 1) as f64 * h;
    let onset = weak.onset_strain();

    // Elastic branch up to onset: work = ½ σ u.
    let sigma0 = e * onset;
    let u0 = onset * length;
    let mut work = 0.5 * sigma0 * u0;
    let (mut sigma_prev, mut u_prev) = (sigma0, u0);
    let mut peak = sigma0;
    let mut kappa = onset;
    // Strain increments small against the softening scale G_f / (h f_t).
    let scale = weak.g_f.unwrap() / (h * 0.99 * f_t);
    let dk = scale.min(onset) * 2e-4;
    while sigma_prev > 1e-9 * f_t {
        kappa += dk;
        let w = solve_damage(kappa, &weak, h)?;
        let sigma = (1.0 - w) * e * kappa;
        let u = h * kappa + others * sigma / e;
        work += 0.5 * (sigma + sigma_prev) * (u - u_prev);
        peak = peak.max(sigma);
        sigma_prev = sigma;
        u_prev = u;
    }
    let stored = 0.5 * sigma_prev * sigma_prev / e * length;
    Ok(BarResult {
        n_elements,
        dissipated_per_area: work - stored,
        peak_stress: peak,
    })
}
