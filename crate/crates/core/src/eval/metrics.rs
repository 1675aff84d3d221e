use super::EvalError;
use crate::grid::Grid;
use crate::microgen::{Phase, PhaseGrid};

fn check_shape<A: Clone, B: Clone>(a: &Grid<A>, b: &Grid<B>) -> Result<(), EvalError> {
    if (a.height(), a.width()) != (b.height(), b.width()) {
        return Err(EvalError::ShapeMismatch(
            (a.height(), a.width()),
            (b.height(), b.width()),
        ));
    }
    Ok(())
}

/// Mean absolute damage difference over mortar and ITZ pixels.
pub fn pixel_error(reference: &Grid<f64>, pred: &Grid<f64>, phase: &PhaseGrid) -> Result<f64, EvalError> {
    check_shape(reference, pred)?;
    check_shape(reference, &phase.codes)?;
    let (mut sum, mut n) = (0.0, 0usize);
    for ((a, b), p) in reference.data().iter().zip(pred.data()).zip(phase.codes.data()) {
        if *p != Phase::Aggregate {
            sum += (a - b).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(EvalError::EmptyMask);
    }
    Ok(sum / n as f64)
}

/// `|ref − pred| / |ref|`.
pub fn relative_error(reference: f64, pred: f64) -> Result<f64, EvalError> {
    if reference == 0.0 {
        return Err(EvalError::ZeroReference);
    }
    Ok((reference - pred).abs() / reference.abs())
}

pub fn total_damage_error(reference: f64, pred: f64) -> Result<f64, EvalError> {
    relative_error(reference, pred)
}

/// Relative errors of observed shrinkage and homogenised stiffness; each is
/// undefined on its own when its reference vanishes.
pub fn property_errors(
    eps_ref: f64,
    eps_pred: f64,
    k_ref: f64,
    k_pred: f64,
) -> (Result<f64, EvalError>, Result<f64, EvalError>) {
    (relative_error(eps_ref, eps_pred), relative_error(k_ref, k_pred))
}

/// Population variance of the five-point Laplacian. Without `periodic` only
/// pixels with a full stencil inside the grid contribute.
pub fn laplacian_variance(field: &Grid<f64>, periodic: bool) -> f64 {
    let (h, w) = (field.height(), field.width());
    assert!(h >= 3 && w >= 3, "laplacian needs at least a 3x3 field");
    let mut values = Vec::with_capacity(h * w);
    let (rows, cols) = if periodic { (0..h, 0..w) } else { (1..h - 1, 1..w - 1) };
    for r in rows {
        for c in cols.clone() {
            let up = *field.get((r + h - 1) % h, c);
            let down = *field.get((r + 1) % h, c);
            let left = *field.get(r, (c + w - 1) % w);
            let right = *field.get(r, (c + 1) % w);
            values.push(up + down + left + right - 4.0 * field.get(r, c));
        }
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}
