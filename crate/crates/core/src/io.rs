//! On-disk formats: FGRD float rasters, microstructure sidecars, PGM
//! previews and the per-sample scalars CSV.
//!
//! FGRD layout (little-endian): `b"FGRD"`, version `u32 = 1`, `H`, `W`, `C`
//! as `u32`, pitch in mm as `f32` (24 header bytes), then `C·H·W` `f32`
//! values, channel-major and row-major within a channel.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fem::{SimResult, SimSnapshot};
use crate::grid::Grid;
use crate::microgen::{Microstructure, Phase, PhaseGrid, PolygonParticle, NO_PARTICLE};
use crate::scenario::Scenario;

pub const FGRD_MAGIC: [u8; 4] = *b"FGRD";
pub const FGRD_VERSION: u32 = 1;
pub const FGRD_HEADER_LEN: usize = 24;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("not an FGRD file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported FGRD version {0}")]
    BadVersion(u32),
    #[error("FGRD size mismatch: header implies {expected} bytes, found {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("inconsistent data: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Stack of equally sized `f32` rasters.
#[derive(Clone, Debug, PartialEq)]
pub struct Fgrd {
    pub pitch_mm: f32,
    pub channels: Vec<Grid<f32>>,
}

impl Fgrd {
    pub fn new(pitch_mm: f32, channels: Vec<Grid<f32>>) -> Result<Self, IoError> {
        if let Some(first) = channels.first() {
            let dims = (first.height(), first.width());
            if channels.iter().any(|g| (g.height(), g.width()) != dims) {
                return Err(IoError::Invalid("channels differ in size".into()));
            }
        }
        Ok(Self { pitch_mm, channels })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.channels.first().map_or((0, 0), |g| (g.height(), g.width()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (h, w) = self.dims();
        let c = self.channels.len();
        let mut out = Vec::with_capacity(FGRD_HEADER_LEN + 4 * c * h * w);
        out.extend_from_slice(&FGRD_MAGIC);
        for v in [FGRD_VERSION, h as u32, w as u32, c as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.pitch_mm.to_le_bytes());
        for g in &self.channels {
            for v in g.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IoError> {
        if bytes.len() < FGRD_HEADER_LEN {
            return Err(IoError::SizeMismatch {
                expected: FGRD_HEADER_LEN,
                actual: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != FGRD_MAGIC {
            return Err(IoError::BadMagic(magic));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
        let version = word(1);
        if version != FGRD_VERSION {
            return Err(IoError::BadVersion(version));
        }
        let (h, w, c) = (word(2) as usize, word(3) as usize, word(4) as usize);
        let pitch_mm = f32::from_le_bytes(bytes[20..24].try_into().unwrap());
        let expected = c
            .checked_mul(h)
            .and_then(|n| n.checked_mul(w))
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(FGRD_HEADER_LEN))
            .unwrap_or(usize::MAX);
        if bytes.len() != expected {
            return Err(IoError::SizeMismatch {
                expected,
                actual: bytes.len(),
            });
        }
        let values: Vec<f32> = bytes[FGRD_HEADER_LEN..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let channels = if h * w == 0 {
            (0..c).map(|_| Grid::from_vec(h, w, Vec::new())).collect()
        } else {
            values
                .chunks_exact(h * w)
                .map(|v| Grid::from_vec(h, w, v.to_vec()))
                .collect()
        };
        Ok(Self { pitch_mm, channels })
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Writes through a temporary sibling so an interrupted job never leaves a
/// truncated file under the final name.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let tmp = path.with_extension(format!(
        "{}.part",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// JSON companion of a microstructure raster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroSidecar {
    pub seed: u64,
    pub scenario: Scenario,
    pub height: usize,
    pub width: usize,
    pub pitch_mm: f64,
    pub config_hash: String,
    pub class_diameters: Vec<f64>,
    pub particles: Vec<PolygonParticle>,
}

/// Raster channels of a stored microstructure: `ρ` and the particle label
/// (`-1` outside aggregate).
pub fn micro_to_fgrd(micro: &Microstructure) -> Fgrd {
    let rho = micro.phase.rho();
    let labels = micro.labels.map(|&l| if l == NO_PARTICLE { -1.0 } else { l as f32 });
    Fgrd {
        pitch_mm: micro.phase.pitch as f32,
        channels: vec![rho, labels],
    }
}

pub fn save_micro(dir: &Path, stem: &str, micro: &Microstructure, config_hash: &str) -> Result<(), IoError> {
    micro_to_fgrd(micro).save(&dir.join(format!("{stem}.fgrd")))?;
    let side = MicroSidecar {
        seed: micro.seed,
        scenario: micro.scenario,
        height: micro.phase.height(),
        width: micro.phase.width(),
        pitch_mm: micro.phase.pitch,
        config_hash: config_hash.to_string(),
        class_diameters: micro.class_diameters.clone(),
        particles: micro.particles.clone(),
    };
    write_atomic(&dir.join(format!("{stem}.json")), &serde_json::to_vec_pretty(&side)?)
}

pub fn load_micro(dir: &Path, stem: &str) -> Result<(Microstructure, MicroSidecar), IoError> {
    let grid = Fgrd::load(&dir.join(format!("{stem}.fgrd")))?;
    let side: MicroSidecar = serde_json::from_slice(&fs::read(dir.join(format!("{stem}.json")))?)?;
    if grid.dims() != (side.height, side.width) || grid.channels.is_empty() {
        return Err(IoError::Invalid(format!("{stem}: raster and sidecar disagree")));
    }
    let phase = PhaseGrid {
        codes: grid.channels[0].map(|&v| Phase::from_rho(v)),
        pitch: side.pitch_mm,
    };
    let labels = match grid.channels.get(1) {
        Some(l) => l.map(|&v| if v < 0.0 { NO_PARTICLE } else { v as u32 }),
        None => Grid::filled(side.height, side.width, NO_PARTICLE),
    };
    let micro = Microstructure {
        phase,
        labels,
        particles: side.particles.clone(),
        scenario: side.scenario,
        seed: side.seed,
        class_diameters: side.class_diameters.clone(),
    };
    Ok((micro, side))
}

/// Binary greyscale preview: aggregate 0, ITZ 128, mortar 255.
pub fn phase_pgm(phase: &PhaseGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", phase.width(), phase.height()).into_bytes();
    out.extend(phase.codes.data().iter().map(|p| match p {
        Phase::Aggregate => 0u8,
        Phase::Itz => 128,
        Phase::Mortar => 255,
    }));
    out
}

/// One row of the scalars CSV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarRow {
    pub t: usize,
    pub eps_imposed_surface: f64,
    pub eps_observed: f64,
    pub k_pa: f64,
    pub omega_total: f64,
}

impl From<&SimSnapshot> for ScalarRow {
    fn from(s: &SimSnapshot) -> Self {
        Self {
            t: s.t,
            eps_imposed_surface: s.eps_imposed_surface,
            eps_observed: s.eps_observed,
            k_pa: s.k,
            omega_total: s.omega_total,
        }
    }
}

pub fn scalars_csv(rows: &[ScalarRow]) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| IoError::Io(e.into_error()))
}

pub fn read_scalars(path: &Path) -> Result<Vec<ScalarRow>, IoError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(IoError::from)).collect()
}

/// `ω` snapshots as one FGRD channel each.
pub fn trajectory_fgrd(omega: &[Grid<f64>], pitch_mm: f64) -> Result<Fgrd, IoError> {
    Fgrd::new(pitch_mm as f32, omega.iter().map(|g| g.map(|&v| v as f32)).collect())
}

pub fn trajectory_from_fgrd(grid: &Fgrd) -> Vec<Grid<f64>> {
    grid.channels.iter().map(|g| g.map(|&v| v as f64)).collect()
}

/// Writes `<stem>.fgrd` (damage trajectory) and `<stem>.csv` (scalars).
pub fn save_result(dir: &Path, stem: &str, result: &SimResult, pitch_mm: f64) -> Result<(), IoError> {
    let omega: Vec<Grid<f64>> = result.snapshots.iter().map(|s| s.omega.clone()).collect();
    trajectory_fgrd(&omega, pitch_mm)?.save(&dir.join(format!("{stem}.fgrd")))?;
    let rows: Vec<ScalarRow> = result.snapshots.iter().map(ScalarRow::from).collect();
    write_atomic(&dir.join(format!("{stem}.csv")), &scalars_csv(&rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microgen::{generate, GenConfig};

    #[test]
    fn fgrd_round_trip_and_size() {
        let a = Grid::from_fn(3, 4, |r, c| (r * 4 + c) as f32 * 0.5);
        let b = a.map(|v| -v);
        let f = Fgrd::new(0.32, vec![a, b]).unwrap();
        let bytes = f.to_bytes();
        assert_eq!(bytes.len(), FGRD_HEADER_LEN + 4 * 2 * 3 * 4);
        assert_eq!(&bytes[..4], b"FGRD");
        assert_eq!(Fgrd::from_bytes(&bytes).unwrap(), f);
    }

    #[test]
    fn fgrd_header_is_little_endian() {
        let f = Fgrd::new(1.0, vec![Grid::filled(2, 3, 7.0f32)]).unwrap();
        let bytes = f.to_bytes();
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[2, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[3, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &[1, 0, 0, 0]);
        assert_eq!(&bytes[20..24], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[24..28], &7.0f32.to_le_bytes());
    }

    #[test]
    fn fgrd_rejects_bad_magic_and_size() {
        let mut bytes = Fgrd::new(0.32, vec![Grid::filled(2, 2, 1.0f32)]).unwrap().to_bytes();
        bytes.pop();
        assert!(matches!(Fgrd::from_bytes(&bytes), Err(IoError::SizeMismatch { .. })));
        bytes.push(0);
        bytes.push(0);
        assert!(matches!(Fgrd::from_bytes(&bytes), Err(IoError::SizeMismatch { .. })));
        bytes.pop();
        bytes[0] = b'X';
        assert!(matches!(Fgrd::from_bytes(&bytes), Err(IoError::BadMagic(_))));
        assert!(matches!(Fgrd::from_bytes(b"FGR"), Err(IoError::SizeMismatch { .. })));
    }

    #[test]
    fn micro_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate(&GenConfig {
            seed: 3,
            ..GenConfig::default()
        })
        .unwrap();
        save_micro(dir.path(), "s", &m, "abc").unwrap();
        let (back, side) = load_micro(dir.path(), "s").unwrap();
        assert_eq!(back, m);
        assert_eq!(side.config_hash, "abc");
    }

    #[test]
    fn pgm_levels() {
        let mut codes = Grid::filled(1, 3, Phase::Mortar);
        codes.set(0, 0, Phase::Aggregate);
        codes.set(0, 1, Phase::Itz);
        let pgm = phase_pgm(&PhaseGrid { codes, pitch: 0.32 });
        assert!(pgm.starts_with(b"P5\n3 1\n255\n"));
        assert_eq!(&pgm[pgm.len() - 3..], &[0, 128, 255]);
    }

    #[test]
    fn scalars_header_and_round_trip() {
        let rows = vec![
            ScalarRow {
                t: 0,
                eps_imposed_surface: 0.0,
                eps_observed: 0.0,
                k_pa: 2.5e10,
                omega_total: 0.0,
            },
            ScalarRow {
                t: 1,
                eps_imposed_surface: -1e-4,
                eps_observed: -8.1234567e-5,
                k_pa: 2.4e10,
                omega_total: 0.013,
            },
        ];
        let bytes = scalars_csv(&rows).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("t,eps_imposed_surface,eps_observed,k_pa,omega_total\n"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, bytes).unwrap();
        assert_eq!(read_scalars(&p).unwrap(), rows);
    }
}
