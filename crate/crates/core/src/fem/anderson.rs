//! Anderson mixing for the preconditioned fixed-point map `u ↦ u + P⁻¹R(u)`.

/// Keeps the last `depth` iterate and update differences.
pub(crate) struct Anderson {
    depth: usize,
    du: Vec<Vec<f64>>,
    df: Vec<Vec<f64>>,
    last: Option<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            du: Vec::new(),
            df: Vec::new(),
            last: None,
        }
    }

    pub fn reset(&mut self) {
        self.du.clear();
        self.df.clear();
        self.last = None;
    }

    /// Next iterate from the current iterate `u` and its plain update `f`
    /// (so that the undamped fixed-point step would be `u + f`).
    pub fn next(&mut self, u: &[f64], f: &[f64]) -> Vec<f64> {
        if let Some((pu, pf)) = self.last.take() {
            self.du.push(u.iter().zip(&pu).map(|(a, b)| a - b).collect());
            self.df.push(f.iter().zip(&pf).map(|(a, b)| a - b).collect());
            if self.du.len() > self.depth {
                self.du.remove(0);
                self.df.remove(0);
            }
        }
        self.last = Some((u.to_vec(), f.to_vec()));
        let mut out: Vec<f64> = u.iter().zip(f).map(|(a, b)| a + b).collect();
        let m = self.df.len();
        if m == 0 {
            return out;
        }
        // Least squares min |f − ΔF γ| through regularised normal equations.
        let mut a = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            for j in 0..=i {
                let v = dot(&self.df[i], &self.df[j]);
                a[i * m + j] = v;
                a[j * m + i] = v;
            }
            rhs[i] = dot(&self.df[i], f);
        }
        let trace: f64 = (0..m).map(|i| a[i * m + i]).sum();
        if !(trace > 0.0) {
            return out;
        }
        for i in 0..m {
            a[i * m + i] += 1e-10 * trace / m as f64;
        }
        let Some(gamma) = solve_spd(&mut a, &mut rhs, m) else {
            self.reset();
            return out;
        };
        for (k, g) in gamma.iter().enumerate() {
            for i in 0..out.len() {
                out[i] -= g * (self.du[k][i] + self.df[k][i]);
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense Cholesky solve of a small symmetric positive definite system.
fn solve_spd(a: &mut [f64], b: &mut [f64], m: usize) -> Option<Vec<f64>> {
    for j in 0..m {
        let mut d = a[j * m + j];
        for k in 0..j {
            d -= a[j * m + k] * a[j * m + k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        a[j * m + j] = d;
        for i in j + 1..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = s / d;
        }
    }
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * m + k] * b[k];
        }
        b[i] = s / a[i * m + i];
    }
    for i in (0..m).rev() {
        let mut s = b[i];
        for k in i + 1..m {
            s -= a[k * m + i] * b[k];
        }
        b[i] = s / a[i * m + i];
    }
    Some(b.to_vec())
}
