//! Imposed shrinkage eigenstrain as a function of pseudo-time and depth.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FemError;
use crate::grid::Grid;

/// Solver steps in a load program.
pub const N_STEPS: usize = 100;
/// Steps between recorded snapshots.
pub const SNAPSHOT_STRIDE: usize = 10;
pub const N_SNAPSHOTS: usize = N_STEPS / SNAPSHOT_STRIDE + 1;
/// Eigenstrain added per step at the drying surface (contraction is negative).
pub const STEP_EIGENSTRAIN: f64 = -10e-6;
pub const MAX_EIGENSTRAIN: f64 = STEP_EIGENSTRAIN * N_STEPS as f64;

/// Surface (or uniform) eigenstrain after `step` solver steps.
pub fn surface_eigenstrain(step: f64) -> f64 {
    STEP_EIGENSTRAIN * step
}

/// Centroid depth of raster row `r` below the drying surface (the bottom
/// row of an `h`-row cell), mm.
pub fn row_depth_mm(r: usize, h: usize, pitch_mm: f64) -> f64 {
    (h - r) as f64 * pitch_mm - 0.5 * pitch_mm
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ShrinkageProfile {
    /// Same eigenstrain everywhere.
    Uniform,
    /// `ε_surf(t)·max(0, 1 − y/d(t))^m` with front depth `d(t) = D·sqrt(t/100)`.
    DepthDecay { front_depth_mm: f64, exponent: f64 },
    /// Tabulated per snapshot, interpolated linearly in depth and time.
    Table(ProfileTable),
}

impl Default for ShrinkageProfile {
    fn default() -> Self {
        ShrinkageProfile::Uniform
    }
}

impl ShrinkageProfile {
    pub fn depth_decay() -> Self {
        ShrinkageProfile::DepthDecay {
            front_depth_mm: 40.0,
            exponent: 2.0,
        }
    }

    /// Eigenstrain after `step` (possibly fractional) steps at `depth_mm`
    /// from the drying surface.
    pub fn eigenstrain(&self, step: f64, depth_mm: f64) -> f64 {
        match self {
            ShrinkageProfile::Uniform => surface_eigenstrain(step),
            ShrinkageProfile::DepthDecay {
                front_depth_mm,
                exponent,
            } => {
                if step <= 0.0 {
                    return 0.0;
                }
                let front = front_depth_mm * (step / N_STEPS as f64).sqrt();
                let rel = (1.0 - depth_mm.max(0.0) / front).max(0.0);
                surface_eigenstrain(step) * rel.powf(*exponent)
            }
            ShrinkageProfile::Table(t) => t.eigenstrain(step, depth_mm),
        }
    }

    /// Eigenstrain at every pixel centroid of an `h × w` cell.
    pub fn field(&self, step: f64, h: usize, w: usize, pitch_mm: f64) -> Grid<f64> {
        let rows: Vec<f64> = (0..h)
            .map(|r| self.eigenstrain(step, row_depth_mm(r, h, pitch_mm)))
            .collect();
        Grid::from_fn(h, w, |r, _| rows[r])
    }
}

/// Eigenstrain profiles on a common depth grid, one per snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub depths_mm: Vec<f64>,
    /// `values[snapshot][depth index]`.
    pub values: Vec<Vec<f64>>,
}

impl ProfileTable {
    /// Parses CSV rows `depth_mm,snapshot,eigenstrain` (header required).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, FemError> {
        let mismatch = |m: String| FemError::ProfileTableMismatch(m);
        let mut rdr = csv::Reader::from_reader(reader);
        let mut rows: Vec<(f64, usize, f64)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| mismatch(e.to_string()))?;
            let field = |i: usize| rec.get(i).map(str::trim).ok_or_else(|| mismatch("short row".into()));
            let depth: f64 = field(0)?.parse().map_err(|_| mismatch("bad depth".into()))?;
            let snap: usize = field(1)?.parse().map_err(|_| mismatch("bad snapshot index".into()))?;
            let eps: f64 = field(2)?.parse().map_err(|_| mismatch("bad eigenstrain".into()))?;
            rows.push((depth, snap, eps));
        }
        let mut depths: Vec<f64> = rows.iter().map(|r| r.0).collect();
        depths.sort_by(f64::total_cmp);
        depths.dedup();
        let mut values = vec![vec![f64::NAN; depths.len()]; N_SNAPSHOTS];
        for (d, s, e) in rows {
            if s >= N_SNAPSHOTS {
                return Err(mismatch(format!("snapshot index {s} out of range")));
            }
            let j = depths.binary_search_by(|x| x.total_cmp(&d)).unwrap();
            values[s][j] = e;
        }
        if values.iter().flatten().any(|v| v.is_nan()) {
            return Err(mismatch("every snapshot needs a value at every depth".into()));
        }
        Ok(Self {
            depths_mm: depths,
            values,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, FemError> {
        let f = std::fs::File::open(path).map_err(|e| FemError::ProfileTableMismatch(e.to_string()))?;
        Self::from_csv(f)
    }

    /// The depth grid must start at the surface and reach through the mesh.
    pub fn check(&self, mesh_depth_mm: f64, pitch_mm: f64) -> Result<(), FemError> {
        let mismatch = |m: String| Err(FemError::ProfileTableMismatch(m));
        if self.values.len() != N_SNAPSHOTS {
            return mismatch(format!("expected {N_SNAPSHOTS} snapshots"));
        }
        let (Some(&first), Some(&last)) = (self.depths_mm.first(), self.depths_mm.last()) else {
            return mismatch("empty depth grid".into());
        };
        if first > 0.5 * pitch_mm {
            return mismatch(format!("depth grid starts at {first} mm, not at the surface"));
        }
        if last < mesh_depth_mm - 0.5 * pitch_mm {
            return mismatch(format!("depth grid ends at {last} mm, mesh is {mesh_depth_mm} mm deep"));
        }
        if self
            .values
            .iter()
            .flatten()
            .any(|v| v.abs() > MAX_EIGENSTRAIN.abs() * (1.0 + 1e-9))
        {
            return mismatch("eigenstrain magnitude exceeds the program maximum".into());
        }
        Ok(())
    }

    fn at_snapshot(&self, s: usize, depth: f64) -> f64 {
        let d = &self.depths_mm;
        let v = &self.values[s];
        if depth <= d[0] {
            return v[0];
        }
        if depth >= d[d.len() - 1] {
            return v[d.len() - 1];
        }
        let j = d.partition_point(|&x| x <= depth);
        let w = (depth - d[j - 1]) / (d[j] - d[j - 1]);
        v[j - 1] * (1.0 - w) + v[j] * w
    }

    pub fn eigenstrain(&self, step: f64, depth_mm: f64) -> f64 {
        let pos = (step / SNAPSHOT_STRIDE as f64).clamp(0.0, (N_SNAPSHOTS - 1) as f64);
        let s0 = pos.floor() as usize;
        if s0 + 1 >= N_SNAPSHOTS {
            return self.at_snapshot(N_SNAPSHOTS - 1, depth_mm);
        }
        let w = pos - s0 as f64;
        self.at_snapshot(s0, depth_mm) * (1.0 - w) + self.at_snapshot(s0 + 1, depth_mm) * w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_reaches_program_maximum() {
        let p = ShrinkageProfile::Uniform;
        assert!((p.eigenstrain(100.0, 7.0) + 1000e-6).abs() < 1e-18);
        assert_eq!(p.eigenstrain(0.0, 0.0), 0.0);
    }

    #[test]
    fn depth_decay_surface_is_linear_and_monotone() {
        let p = ShrinkageProfile::depth_decay();
        for t in 0..=100 {
            assert!((p.eigenstrain(t as f64, 0.0) - (-10e-6 * t as f64)).abs() < 1e-18);
        }
        for y in [0.0, 3.0, 10.0, 31.0, 45.0] {
            assert_eq!(p.eigenstrain(0.0, y), 0.0);
            let mut last = 0.0;
            for t in 0..=100 {
                let e = p.eigenstrain(t as f64, y);
                assert!(e <= last + 1e-18 && e.abs() <= 1000e-6 + 1e-15);
                last = e;
            }
        }
        for t in [10.0, 50.0, 100.0] {
            let mut last = f64::NEG_INFINITY;
            for k in 0..200 {
                let e = p.eigenstrain(t, k as f64 * 0.25);
                assert!(e >= last, "deeper layers shrink less");
                last = e;
            }
        }
    }

    #[test]
    fn table_interpolates_and_validates() {
        let mut csv = String::from("depth_mm,snapshot,eigenstrain\n");
        for s in 0..N_SNAPSHOTS {
            for d in [0.0, 16.0, 32.0] {
                let e = -100e-6 * s as f64 * (1.0 - d / 32.0);
                csv.push_str(&format!("{d},{s},{e}\n"));
            }
        }
        let t = ProfileTable::from_csv(csv.as_bytes()).unwrap();
        t.check(32.0, 0.32).unwrap();
        assert!((t.eigenstrain(15.0, 8.0) - (-150e-6 * 0.75)).abs() < 1e-15);
        assert!(t.check(50.0, 0.32).is_err());
        let short = "depth_mm,snapshot,eigenstrain\n0,0,0\n";
        assert!(matches!(
            ProfileTable::from_csv(short.as_bytes()).and_then(|t| t.check(32.0, 0.32)),
            Err(FemError::ProfileTableMismatch(_))
        ));
    }
}
