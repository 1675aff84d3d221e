//! Second solution route: the full symmetric matrix assembled from element
//! matrices in reverse element order into CSR, solved by Jacobi-preconditioned
//! conjugate gradients. Shares only the mesh maps with the direct route.

use super::element::N_GAUSS;
use super::model::QuadModel;
use super::FemError;

const CG_TOL: f64 = 1e-13;

pub(crate) struct IterativeSystem {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl IterativeSystem {
    pub fn assemble(model: &QuadModel, scale: &[f64], core_stiffness: f64) -> Self {
        let n = model.n_free();
        let mut trip: Vec<(usize, usize, f64)> = Vec::new();
        for e in (0..model.n_elements()).rev() {
            let mut ke = [[0.0; 8]; 8];
            for q in (0..N_GAUSS).rev() {
                let s = scale[N_GAUSS * e + q];
                for i in 0..8 {
                    for j in 0..8 {
                        ke[i][j] += s * model.unit.k[q][i * 8 + j];
                    }
                }
            }
            let links = &model.links[e];
            for i in 0..8 {
                for j in 0..8 {
                    for (gi, ci) in links[i].iter() {
                        for (gj, cj) in links[j].iter() {
                            trip.push((gi, gj, ci * cj * ke[i][j]));
                        }
                    }
                }
            }
        }
        trip.push((model.hxx, model.hxx, core_stiffness));
        trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::new();
        let mut val: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(c);
                val.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { n, row_ptr, col, val }
    }

    pub fn eigen_force(model: &QuadModel, scale: &[f64], eps: &[f64], core_force: f64) -> Vec<f64> {
        let mut f = vec![0.0; model.n_free()];
        for e in (0..model.n_elements()).rev() {
            if !model.materials.get(model.phases[e]).shrinks || eps[e] == 0.0 {
                continue;
            }
            let mut fe = [0.0; 8];
            for q in (0..N_GAUSS).rev() {
                for i in 0..8 {
                    fe[i] += scale[N_GAUSS * e + q] * eps[e] * model.unit.g[q][i];
                }
            }
            for (i, link) in model.links[e].iter().enumerate() {
                for (g, c) in link.iter() {
                    f[g] += c * fe[i];
                }
            }
        }
        f[model.hxx] += core_force;
        f
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            y[r] = (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(|p| self.val[p] * x[self.col[p]])
                .sum();
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, FemError> {
        let n = self.n;
        let mut inv_diag = vec![0.0; n];
        for r in 0..n {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col[p] == r {
                    inv_diag[r] = 1.0 / self.val[p];
                }
            }
        }
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = vec![0.0; n];
        if b_norm == 0.0 {
            return Ok(x);
        }
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        for _ in 0..20 * n {
            self.apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                return Err(FemError::SingularSystem);
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r_norm <= CG_TOL * b_norm {
                return Ok(x);
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(FemError::SingularSystem)
    }
}
