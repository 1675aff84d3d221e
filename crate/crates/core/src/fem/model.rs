//! Structured quad mesh over a phase raster with periodic constraint maps.
//!
//! Uniform: nodes on an `H × W` torus; the displacement of a node reached
//! across a periodic edge is the leader's plus `H · period`, where the
//! macroscopic displacement gradient `H` carries extra degrees of freedom.
//! One node is pinned and the skew component `H_yx` is fixed, which removes
//! the two translations and the rotation.
//!
//! NonUniform: `(H + 1) × W` nodes, periodic in x only with the axial strain
//! `H_xx` as the single macroscopic unknown (plane sections). The core of the
//! beam between the mesh and the mid-plane is a stack of axial trusses that
//! share `H_xx`.

use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};

use super::cholesky::{Factor, SymbolicFactor};
use super::element::{UnitElement, N_GAUSS};
use super::material::PhaseMaterials;
use super::profile::{row_depth_mm, ShrinkageProfile};
use super::FemError;
use crate::microgen::{Phase, PhaseGrid};
use crate::scenario::Scenario;

/// Free global dofs that a local element dof depends on, with coefficients.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct DofLink {
    pub idx: [u32; 3],
    pub coef: [f64; 3],
    pub len: u8,
}

impl DofLink {
    fn push(&mut self, idx: Option<usize>, coef: f64) {
        if let Some(i) = idx {
            self.idx[self.len as usize] = i as u32;
            self.coef[self.len as usize] = coef;
            self.len += 1;
        }
    }

    #[inline]
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len as usize).map(move |k| (self.idx[k] as usize, self.coef[k]))
    }
}

#[derive(Clone, Copy, Debug)]
struct ScatterEntry {
    pos: u32,
    slot: u8,
    coef: f64,
}

/// The core of the half-beam as horizontal trusses sharing the axial strain.
#[derive(Clone, Debug, PartialEq)]
pub struct CoreTrusses {
    /// Undamaged homogenised axial modulus of the meshed part, Pa.
    pub modulus: f64,
    /// Observed over imposed axial shrinkage of the undamaged meshed part;
    /// scales the profile eigenstrain carried by the trusses.
    pub eigen_ratio: f64,
    /// Centroid depths of the truss layers below the drying surface, mm.
    pub depths_mm: Vec<f64>,
    /// Thickness of each layer, mm.
    pub layer_mm: f64,
}

impl CoreTrusses {
    pub fn depth_mm(&self) -> f64 {
        self.layer_mm * self.depths_mm.len() as f64
    }
}

pub struct QuadModel {
    pub scenario: Scenario,
    pub height: usize,
    pub width: usize,
    /// Element side, m.
    pub pitch: f64,
    pub phases: Vec<Phase>,
    pub materials: PhaseMaterials,
    /// Centroid depth of each element below the drying surface, mm.
    pub depth_mm: Vec<f64>,
    pub core: Option<CoreTrusses>,
    pub(crate) unit: UnitElement,
    pub(crate) links: Vec<[DofLink; 8]>,
    pub(crate) n_free: usize,
    pub(crate) hxx: usize,
    pub(crate) hyy: Option<usize>,
    scatter: Vec<ScatterEntry>,
    scatter_start: Vec<u32>,
    pattern: SymbolicSparseColMat<usize>,
    symbolic: SymbolicFactor,
    hxx_diag: usize,
}

impl QuadModel {
    pub fn n_elements(&self) -> usize {
        self.height * self.width
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn period_x(&self) -> f64 {
        self.width as f64 * self.pitch
    }

    pub fn mesh_depth(&self) -> f64 {
        self.height as f64 * self.pitch
    }

    /// Volume (per unit thickness) the homogenised stiffness refers to.
    pub fn volume(&self) -> f64 {
        let core = self.core.as_ref().map_or(0.0, |c| c.depth_mm() * 1e-3);
        self.period_x() * (self.mesh_depth() + core)
    }

    /// Stiffness factor of the truss stack on the `H_xx` diagonal.
    pub(crate) fn core_stiffness(&self) -> f64 {
        self.core
            .as_ref()
            .map_or(0.0, |c| c.modulus * self.period_x() * c.depth_mm() * 1e-3)
    }

    /// Axial force on `H_xx` exerted by the trusses at `H_xx = 0` under the
    /// given profile: `E_c L Σ dy ε_c`.
    pub(crate) fn core_eigen_force(&self, profile: &ShrinkageProfile, step: f64) -> f64 {
        self.core.as_ref().map_or(0.0, |c| {
            let sum: f64 = c.depths_mm.iter().map(|&d| profile.eigenstrain(step, d)).sum();
            c.modulus * self.period_x() * c.layer_mm * 1e-3 * c.eigen_ratio * sum
        })
    }

    pub(crate) fn local_u(&self, e: usize, u: &[f64]) -> [f64; 8] {
        let mut out = [0.0; 8];
        for (i, link) in self.links[e].iter().enumerate() {
            out[i] = link.iter().map(|(g, c)| c * u[g]).sum();
        }
        out
    }

    pub(crate) fn scatter_vec(&self, e: usize, fe: &[f64; 8], f: &mut [f64]) {
        for (i, link) in self.links[e].iter().enumerate() {
            for (g, c) in link.iter() {
                f[g] += c * fe[i];
            }
        }
    }

    /// Lower-triangle CSC values of the secant stiffness for per-Gauss-point
    /// moduli `scale[4e + q] = (1 − ω) E`.
    pub(crate) fn assemble(&self, scale: &[f64], core_stiffness: f64) -> Vec<f64> {
        let mut values = vec![0.0; self.pattern.row_idx().len()];
        let mut ke = [0.0; 64];
        for e in 0..self.n_elements() {
            let s = &scale[N_GAUSS * e..N_GAUSS * e + N_GAUSS];
            for (slot, k) in ke.iter_mut().enumerate() {
                *k = s[0] * self.unit.k[0][slot]
                    + s[1] * self.unit.k[1][slot]
                    + s[2] * self.unit.k[2][slot]
                    + s[3] * self.unit.k[3][slot];
            }
            let range = self.scatter_start[e] as usize..self.scatter_start[e + 1] as usize;
            for entry in &self.scatter[range] {
                values[entry.pos as usize] += entry.coef * ke[entry.slot as usize];
            }
        }
        values[self.hxx_diag] += core_stiffness;
        values
    }

    pub(crate) fn factor(&self, values: &[f64]) -> Result<Factor, FemError> {
        self.symbolic
            .factor(SparseColMatRef::new(self.pattern.as_ref(), values))
    }

    /// `y = K x` from lower-triangle values.
    #[cfg(test)]
    pub(crate) fn matvec(&self, values: &[f64], x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let col_ptr = self.pattern.col_ptr();
        let row_idx = self.pattern.row_idx();
        for c in 0..self.n_free {
            for p in col_ptr[c]..col_ptr[c + 1] {
                let r = row_idx[p];
                let v = values[p];
                y[r] += v * x[c];
                if r != c {
                    y[c] += v * x[r];
                }
            }
        }
    }

    /// Stored entries of the lower triangle (for diagnostics and oracles).
    pub fn nnz(&self) -> usize {
        self.pattern.row_idx().len()
    }
}

/// Builds the mesh, constraint maps and sparsity structure. For NonUniform
/// the undamaged meshed part is homogenised first to size the core trusses.
pub fn build_model(
    phase: &PhaseGrid,
    scenario: Scenario,
    materials: &PhaseMaterials,
    core_depth_mm: f64,
) -> Result<QuadModel, FemError> {
    let nu = materials
        .common_nu()
        .ok_or_else(|| FemError::InvalidModel("all phases must share one Poisson ratio".into()))?;
    let (h, w) = (phase.height(), phase.width());
    if h < 2 || w < 2 {
        return Err(FemError::InvalidModel("mesh needs at least 2×2 elements".into()));
    }
    let pitch = phase.pitch * 1e-3;
    let (period_x, period_y) = (w as f64 * pitch, h as f64 * pitch);
    let node_rows = match scenario {
        Scenario::Uniform => h,
        Scenario::NonUniform => h + 1,
    };
    let n_nodes = node_rows * w;
    // Full numbering: node dofs, then macroscopic gradient components.
    let n_macro = match scenario {
        Scenario::Uniform => 4,
        Scenario::NonUniform => 2,
    };
    let full = 2 * n_nodes + n_macro;
    let m_xx = 2 * n_nodes;
    let (m_xy, m_yx, m_yy) = match scenario {
        Scenario::Uniform => (Some(m_xx + 1), m_xx + 2, Some(m_xx + 3)),
        Scenario::NonUniform => (None, m_xx + 1, None),
    };
    let fixed = [0usize, 1, m_yx];
    let mut free_of = vec![None; full];
    let mut n_free = 0;
    for (g, slot) in free_of.iter_mut().enumerate() {
        if !fixed.contains(&g) {
            *slot = Some(n_free);
            n_free += 1;
        }
    }
    let hxx = free_of[m_xx].unwrap();
    let hyy = m_yy.and_then(|g| free_of[g]);

    let mut links = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let nodes = [(r, c), (r, c + 1), (r + 1, c + 1), (r + 1, c)];
            let mut el = [DofLink::default(); 8];
            for (i, &(nr, nc)) in nodes.iter().enumerate() {
                let jump_x = nc == w;
                let jump_y = scenario == Scenario::Uniform && nr == h;
                let leader = (if jump_y { 0 } else { nr }) * w + if jump_x { 0 } else { nc };
                let (ux, uy) = (&mut el[2 * i], &mut DofLink::default());
                ux.push(free_of[2 * leader], 1.0);
                if jump_x {
                    ux.push(free_of[m_xx], period_x);
                }
                if jump_y {
                    ux.push(m_xy.and_then(|g| free_of[g]), period_y);
                }
                uy.push(free_of[2 * leader + 1], 1.0);
                if jump_x {
                    uy.push(free_of[m_yx], period_x);
                }
                if jump_y {
                    uy.push(m_yy.and_then(|g| free_of[g]), period_y);
                }
                el[2 * i + 1] = *uy;
            }
            links.push(el);
        }
    }

    // Sparsity of the lower triangle and the per-element scatter plan.
    let mut raw: Vec<(u64, u8, f64)> = Vec::new();
    let mut scatter_start = Vec::with_capacity(h * w + 1);
    let key = |row: usize, col: usize| (col as u64) * (n_free as u64) + row as u64;
    for el in &links {
        scatter_start.push(raw.len() as u32);
        for i in 0..8 {
            for j in 0..8 {
                for (gi, ci) in el[i].iter() {
                    for (gj, cj) in el[j].iter() {
                        if gi >= gj {
                            raw.push((key(gi, gj), (i * 8 + j) as u8, ci * cj));
                        }
                    }
                }
            }
        }
    }
    scatter_start.push(raw.len() as u32);
    let mut keys: Vec<u64> = raw.iter().map(|e| e.0).collect();
    keys.push(key(hxx, hxx));
    keys.sort_unstable();
    keys.dedup();
    let mut col_ptr = vec![0usize; n_free + 1];
    let mut row_idx = Vec::with_capacity(keys.len());
    for &k in &keys {
        let col = (k / n_free as u64) as usize;
        col_ptr[col + 1] += 1;
        row_idx.push((k % n_free as u64) as usize);
    }
    for c in 0..n_free {
        col_ptr[c + 1] += col_ptr[c];
    }
    let scatter: Vec<ScatterEntry> = raw
        .iter()
        .map(|&(k, slot, coef)| ScatterEntry {
            pos: keys.binary_search(&k).unwrap() as u32,
            slot,
            coef,
        })
        .collect();
    let hxx_diag = keys.binary_search(&key(hxx, hxx)).unwrap();
    let pattern = SymbolicSparseColMat::new_checked(n_free, n_free, col_ptr, None, row_idx);
    let symbolic = SymbolicFactor::new(pattern.as_ref())?;

    let phases = phase.codes.data().to_vec();
    let depth_mm = (0..h * w).map(|e| row_depth_mm(e / w, h, phase.pitch)).collect();
    let mut model = QuadModel {
        scenario,
        height: h,
        width: w,
        pitch,
        phases,
        materials: *materials,
        depth_mm,
        core: None,
        unit: UnitElement::new(pitch, nu),
        links,
        n_free,
        hxx,
        hyy,
        scatter,
        scatter_start,
        pattern,
        symbolic,
        hxx_diag,
    };
    if scenario == Scenario::NonUniform && core_depth_mm > 0.0 {
        model.core = Some(size_core(&model, core_depth_mm)?);
    }
    Ok(model)
}

fn size_core(model: &QuadModel, core_depth_mm: f64) -> Result<CoreTrusses, FemError> {
    let scale = model.undamaged_scale();
    let values = model.assemble(&scale, 0.0);
    let llt = model.factor(&values)?;
    let mut unit = vec![0.0; model.n_free];
    unit[model.hxx] = 1.0;
    llt.solve_in_place(&mut unit);
    let modulus = 1.0 / (unit[model.hxx] * model.period_x() * model.mesh_depth());
    let eps = vec![1.0; model.n_elements()];
    let mut f = model.eigen_force(&scale, &eps, 0.0);
    llt.solve_in_place(&mut f);
    let pitch_mm = model.pitch * 1e3;
    let n = ((core_depth_mm / pitch_mm).round() as usize).max(1);
    let layer_mm = core_depth_mm / n as f64;
    let top = model.height as f64 * pitch_mm;
    Ok(CoreTrusses {
        modulus,
        eigen_ratio: f[model.hxx],
        depths_mm: (0..n).map(|i| top + (i as f64 + 0.5) * layer_mm).collect(),
        layer_mm,
    })
}

impl QuadModel {
    /// Per-Gauss-point Young's moduli.
    pub(crate) fn undamaged_scale(&self) -> Vec<f64> {
        self.phases
            .iter()
            .flat_map(|&p| [self.materials.get(p).e; N_GAUSS])
            .collect()
    }

    /// Nodal forces of the element eigenstrains `eps[e]` (isotropic, applied
    /// only where the phase shrinks) plus the truss force on `H_xx`.
    pub(crate) fn eigen_force(&self, scale: &[f64], eps: &[f64], core_force: f64) -> Vec<f64> {
        let mut f = vec![0.0; self.n_free];
        for e in 0..self.n_elements() {
            if eps[e] == 0.0 || !self.materials.get(self.phases[e]).shrinks {
                continue;
            }
            let mut fe = [0.0; 8];
            for q in 0..N_GAUSS {
                let s = scale[N_GAUSS * e + q] * eps[e];
                for (i, v) in fe.iter_mut().enumerate() {
                    *v += s * self.unit.g[q][i];
                }
            }
            self.scatter_vec(e, &fe, &mut f);
        }
        f[self.hxx] += core_force;
        f
    }
}
