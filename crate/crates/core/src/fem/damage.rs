//! Isotropic damage with exponential softening and crack-band regularisation.

use super::material::MaterialParams;
use super::FemError;

/// Principal values `(σ1, σ2)` with `σ1 ≥ σ2` of a plane tensor in Voigt
/// form `[xx, yy, xy]`, and the polar angle of the σ1 direction.
pub fn principal(s: [f64; 3]) -> (f64, f64, f64) {
    let mean = 0.5 * (s[0] + s[1]);
    let rad = (0.25 * (s[0] - s[1]).powi(2) + s[2] * s[2]).sqrt();
    let theta = 0.5 * (2.0 * s[2]).atan2(s[0] - s[1]);
    (mean + rad, mean - rad, theta)
}

/// `ε̃ = sqrt(Σ ⟨σ_I⟩²) / E` over the in-plane principal effective stresses
/// (the out-of-plane one vanishes in plane stress).
pub fn equivalent_strain(effective_stress: [f64; 3], e: f64) -> f64 {
    let (s1, s2, _) = principal(effective_stress);
    let p1 = s1.max(0.0);
    let p2 = s2.max(0.0);
    (p1 * p1 + p2 * p2).sqrt() / e
}

/// Projection of a square element of side `l` onto the unit vector at angle
/// `theta`.
pub fn crack_band_width(l: f64, theta: f64) -> f64 {
    l * (theta.cos().abs() + theta.sin().abs())
}

const DAMAGE_MAX_ITER: usize = 200;

/// Damage `ω` solving `(1 − ω) E κ = f_t exp(−h ω κ f_t / G_f)`.
///
/// Safeguarded Newton iteration on `[0, 1]`; the residual is driven below
/// `1e-12 f_t`.
pub fn solve_damage(kappa: f64, mat: &MaterialParams, h: f64) -> Result<f64, FemError> {
    let (Some(f_t), Some(g_f)) = (mat.f_t, mat.g_f) else {
        return Ok(0.0);
    };
    let e = mat.e;
    if !(kappa > f_t / e) {
        return Ok(0.0);
    }
    let a = h * kappa * f_t / g_f;
    let ek = e * kappa;
    let f = |w: f64| (1.0 - w) * ek - f_t * (-a * w).exp();
    let tol = 1e-12 * f_t;
    // F(0) > 0 > F(1); keep a bracket and fall back to bisection whenever a
    // Newton step leaves it.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut w = 1.0 - f_t / ek;
    for _ in 0..DAMAGE_MAX_ITER {
        let r = f(w);
        if r.abs() <= tol {
            return Ok(w);
        }
        if r > 0.0 {
            lo = w;
        } else {
            hi = w;
        }
        let dr = -ek + a * f_t * (-a * w).exp();
        let next = w - r / dr;
        w = if dr < 0.0 && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON {
            return Ok(w);
        }
    }
    Err(FemError::NonConvergence { kappa })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(kappa: f64, mat: &MaterialParams, h: f64) -> f64 {
        let (ft, gf, e) = (mat.f_t.unwrap(), mat.g_f.unwrap(), mat.e);
        let f = |w: f64| (1.0 - w) * e * kappa - ft * (-h * w * kappa * ft / gf).exp();
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn equivalent_strain_closed_forms() {
        assert!((equivalent_strain([4e6, 0.0, 0.0], 25e9) - 1.6e-4).abs() < 1e-18);
        assert_eq!(equivalent_strain([-10e6, -10e6, 0.0], 25e9), 0.0);
        let eq = equivalent_strain([3e6, 3e6, 0.0], 25e9);
        assert!((eq - 2f64.sqrt() * 3e6 / 25e9).abs() < 1e-18);
        assert!((eq - 1.697e-4).abs() < 1e-7);
        // Pure shear: principal ±τ, only the tensile one counts.
        assert!((equivalent_strain([0.0, 0.0, 2e6], 25e9) - 2e6 / 25e9).abs() < 1e-18);
    }

    #[test]
    fn crack_band_projection() {
        let l = 0.32e-3;
        assert!((crack_band_width(l, 0.0) - l).abs() < 1e-18);
        assert!((crack_band_width(l, std::f64::consts::FRAC_PI_2) - l).abs() < 1e-15);
        assert!((crack_band_width(l, std::f64::consts::FRAC_PI_4) - l * 2f64.sqrt()).abs() < 1e-15);
        let h30 = crack_band_width(l, 30f64.to_radians());
        assert!((h30 - 0.4372e-3).abs() < 1e-7);
    }

    #[test]
    fn no_damage_at_onset() {
        let m = MaterialParams::MORTAR;
        assert_eq!(solve_damage(1.6e-4, &m, 0.32e-3).unwrap(), 0.0);
        assert_eq!(solve_damage(0.0, &m, 0.32e-3).unwrap(), 0.0);
        assert_eq!(solve_damage(1.0, &MaterialParams::AGGREGATE, 0.32e-3).unwrap(), 0.0);
    }

    #[test]
    fn matches_bisection_oracle() {
        let m = MaterialParams::MORTAR;
        let w = solve_damage(3.2e-4, &m, 0.32e-3).unwrap();
        let oracle = bisect(3.2e-4, &m, 0.32e-3);
        assert!((w - oracle).abs() < 1e-10);
        assert!((w - 0.50103).abs() < 5e-6, "ω = {w}");
        let r = (1.0 - w) * m.e * 3.2e-4 - 4e6 * (-0.32e-3 * w * 3.2e-4 * 4e6 / 100.0).exp();
        assert!(r.abs() <= 1e-12 * 4e6);
    }

    #[test]
    fn monotone_and_tends_to_one() {
        for m in [MaterialParams::MORTAR, MaterialParams::ITZ] {
            let mut last = 0.0;
            for i in 0..2000 {
                let kappa = 1e-4 * 1.004f64.powi(i);
                let w = solve_damage(kappa, &m, 0.4e-3).unwrap();
                assert!(w >= last - 1e-15, "κ = {kappa}");
                assert!((w - bisect(kappa, &m, 0.4e-3)).abs() < 1e-9 || kappa <= m.onset_strain());
                last = w;
            }
            assert!(solve_damage(1e-1, &m, 0.4e-3).unwrap() > 0.999);
        }
    }
}
