//! Reading samples back from dataset directories.

use std::path::Path;

use mesoshrink_core::eval::{cluster_assign, rgb_code, SampleRecord};
use mesoshrink_core::fem::{SimResult, SimSnapshot};
use mesoshrink_core::io::{read_scalars, trajectory_from_fgrd, Fgrd, IoError, ScalarRow};
use mesoshrink_core::microgen::{area_fractions, Microstructure};
use mesoshrink_core::{Grid, Scenario};

pub fn exists(dir: &Path, stem: &str, exts: &[&str]) -> bool {
    exts.iter().all(|ext| dir.join(format!("{stem}.{ext}")).is_file())
}

/// Damage snapshots and scalar rows of one stored trajectory.
pub fn load_trajectory(dir: &Path, stem: &str) -> Result<(Vec<Grid<f64>>, Vec<ScalarRow>), IoError> {
    let omega = trajectory_from_fgrd(&Fgrd::load(&dir.join(format!("{stem}.fgrd")))?);
    let rows = read_scalars(&dir.join(format!("{stem}.csv")))?;
    if omega.len() != rows.len() {
        return Err(IoError::Invalid(format!(
            "{stem}: {} damage frames but {} scalar rows",
            omega.len(),
            rows.len()
        )));
    }
    Ok((omega, rows))
}

/// Rebuilds a simulation result from disk. Damage comes back at the `f32`
/// precision it was stored with; solver logs are not stored.
pub fn load_sim(dir: &Path, stem: &str, scenario: Scenario) -> Result<SimResult, IoError> {
    let (omega, rows) = load_trajectory(dir, stem)?;
    let snapshots = omega
        .into_iter()
        .zip(rows)
        .map(|(omega, r)| SimSnapshot {
            t: r.t,
            omega,
            eps_imposed_surface: r.eps_imposed_surface,
            eps_observed: r.eps_observed,
            k: r.k_pa,
            omega_total: r.omega_total,
        })
        .collect();
    Ok(SimResult {
        scenario,
        snapshots,
        log: Vec::new(),
        wall_time_s: 0.0,
    })
}

/// Exploration scalars of one sample from its geometry and scalar rows.
pub fn sample_record(micro: &Microstructure, rows: &[ScalarRow]) -> SampleRecord {
    let f = area_fractions(micro);
    let (first, last) = (rows.first(), rows.last());
    SampleRecord {
        aggregate_fraction: f.total,
        omega_final: last.map_or(f64::NAN, |r| r.omega_total),
        eps_final: last.map_or(f64::NAN, |r| r.eps_observed),
        k_initial: first.map_or(f64::NAN, |r| r.k_pa),
        k_final: last.map_or(f64::NAN, |r| r.k_pa),
        cluster: cluster_assign(&f).ok(),
        rgb: rgb_code(&f),
    }
}

pub fn class_fractions(micro: &Microstructure) -> [f64; 3] {
    let f = area_fractions(micro);
    [f.of(16.0), f.of(8.0), f.of(4.0)]
}
