//! Bilinear square plane-stress element with 2×2 Gauss quadrature.
//!
//! Every element of the structured mesh has the same geometry and, with a
//! shared Poisson ratio, the same unit-modulus matrices; only the scalar
//! factor `(1 − ω) E` per Gauss point differs.

pub const N_GAUSS: usize = 4;

/// Local node order: top-left, top-right, bottom-right, bottom-left in image
/// coordinates (x right, y down).
const XI: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
const ETA: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];

#[derive(Clone, Debug)]
pub struct UnitElement {
    pub side: f64,
    /// Strain-displacement matrices per Gauss point, `[xx, yy, γxy] × 8`.
    pub b: [[[f64; 8]; 3]; N_GAUSS],
    /// Unit-modulus plane-stress matrix.
    pub d: [[f64; 3]; 3],
    /// `Bᵀ D B |J|` per Gauss point, row-major 8×8.
    pub k: [[f64; 64]; N_GAUSS],
    /// `Bᵀ D [1, 1, 0] |J|` per Gauss point: nodal forces of a unit isotropic eigenstrain.
    pub g: [[f64; 8]; N_GAUSS],
    /// Gauss weight times Jacobian determinant (unit thickness).
    pub dv: f64,
}

impl UnitElement {
    pub fn new(side: f64, nu: f64) -> Self {
        let c = 1.0 / (1.0 - nu * nu);
        let d = [[c, c * nu, 0.0], [c * nu, c, 0.0], [0.0, 0.0, c * (1.0 - nu) / 2.0]];
        let gp = 1.0 / 3f64.sqrt();
        let points = [(-gp, -gp), (gp, -gp), (gp, gp), (-gp, gp)];
        let dv = side * side / 4.0;
        let mut b = [[[0.0; 8]; 3]; N_GAUSS];
        let mut k = [[0.0; 64]; N_GAUSS];
        let mut g = [[0.0; 8]; N_GAUSS];
        for (q, &(xi, eta)) in points.iter().enumerate() {
            for i in 0..4 {
                let dx = 0.25 * XI[i] * (1.0 + eta * ETA[i]) * 2.0 / side;
                let dy = 0.25 * ETA[i] * (1.0 + xi * XI[i]) * 2.0 / side;
                b[q][0][2 * i] = dx;
                b[q][1][2 * i + 1] = dy;
                b[q][2][2 * i] = dy;
                b[q][2][2 * i + 1] = dx;
            }
            let mut db = [[0.0; 8]; 3];
            for r in 0..3 {
                for j in 0..8 {
                    db[r][j] = (0..3).map(|s| d[r][s] * b[q][s][j]).sum();
                }
            }
            for i in 0..8 {
                for j in 0..8 {
                    k[q][i * 8 + j] = (0..3).map(|r| b[q][r][i] * db[r][j]).sum::<f64>() * dv;
                }
                g[q][i] = (db[0][i] + db[1][i]) * dv;
            }
        }
        Self { side, b, d, k, g, dv }
    }

    pub fn strain(&self, q: usize, u: &[f64; 8]) -> [f64; 3] {
        let mut e = [0.0; 3];
        for r in 0..3 {
            e[r] = (0..8).map(|j| self.b[q][r][j] * u[j]).sum();
        }
        e
    }

    /// Stress for modulus `e` and strain `eps` (Voigt, engineering shear).
    pub fn stress(&self, e: f64, eps: [f64; 3]) -> [f64; 3] {
        let mut s = [0.0; 3];
        for r in 0..3 {
            s[r] = e * (0..3).map(|c| self.d[r][c] * eps[c]).sum::<f64>();
        }
        s
    }

    /// Adds `Bᵀ σ |J|` at Gauss point `q` to `f`.
    pub fn add_internal_force(&self, q: usize, sigma: [f64; 3], f: &mut [f64; 8]) {
        for j in 0..8 {
            f[j] += (0..3).map(|r| self.b[q][r][j] * sigma[r]).sum::<f64>() * self.dv;
        }
    }
}
