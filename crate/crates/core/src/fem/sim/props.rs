//! Property tests on small random cells.

use proptest::prelude::*;

use super::*;
use crate::microgen::{reskin, Phase, PhaseGrid};
use crate::scenario::Wrap;

const N: usize = 10;

/// Random aggregate blobs (unions of pixel squares) with their ITZ skin.
fn cell() -> impl Strategy<Value = PhaseGrid> {
    prop::collection::vec((0..N, 0..N, 1usize..4), 1..4).prop_map(|blobs| {
        let mut codes = Grid::filled(N, N, Phase::Mortar);
        for (r0, c0, size) in blobs {
            for dr in 0..size {
                for dc in 0..size {
                    codes.set((r0 + dr) % N, (c0 + dc) % N, Phase::Aggregate);
                }
            }
        }
        reskin(&mut codes, Wrap::BOTH);
        PhaseGrid { codes, pitch: 0.32 }
    })
}

struct Trace {
    omega: Vec<Grid<f64>>,
    eps: Vec<f64>,
    total: Vec<f64>,
    kx: Vec<f64>,
    ky: Vec<f64>,
}

/// Snapshot quantities every ten steps up to `steps`, with per-step history
/// monotonicity asserted along the way.
fn trace(phase: &PhaseGrid, steps: usize) -> Result<Trace, TestCaseError> {
    let config = SimConfig::default();
    let model = build_model(phase, Scenario::Uniform, &config.materials, 0.0).unwrap();
    let mut sim = Simulator::new(&model, config);
    let mut state = sim.initial_state();
    let mut out = Trace {
        omega: Vec::new(),
        eps: Vec::new(),
        total: Vec::new(),
        kx: Vec::new(),
        ky: Vec::new(),
    };
    for t in 0..=steps {
        if t > 0 {
            let next = sim.step(&state, t as f64).unwrap().0;
            for i in 0..next.history.kappa.len() {
                prop_assert!(next.history.kappa[i] >= state.history.kappa[i]);
                prop_assert!(next.history.omega[i] >= state.history.omega[i]);
                prop_assert!((0.0..1.0).contains(&next.history.omega[i]));
            }
            state = next;
        }
        if t % 10 == 0 {
            let omega = sim.omega_field(&state);
            out.total.push(omega.data().iter().sum::<f64>() / omega.len() as f64);
            out.omega.push(omega);
            out.eps.push(sim.observed_shrinkage(&state));
            out.kx.push(sim.homogenized_stiffness(&state).unwrap());
            out.ky.push(sim.transverse_stiffness(&state).unwrap());
        }
    }
    Ok(out)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn fields_close(a: &Grid<f64>, b: &Grid<f64>, abs: f64) -> bool {
    mean_abs_diff(a, b) <= abs
}

/// Tolerances per snapshot. While damage is still diffuse the response is
/// reproduced to round-off. Later, converged states are only determined up
/// to the equilibrium tolerance, and where a crack may grow along either of
/// two nearly equivalent paths that slack is amplified; there scalars agree
/// to about 1e-3 and pixel damage on average.
fn tolerance(total: f64) -> (f64, f64) {
    if total < DIFFUSE {
        (1e-6, 1e-6)
    } else {
        (2e-3, 2e-3)
    }
}

const DIFFUSE: f64 = 0.01;

fn mean_abs_diff(a: &Grid<f64>, b: &Grid<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

const STEPS: usize = N_STEPS;

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn history_is_irreversible(phase in cell()) {
        let tr = trace(&phase, STEPS)?;
        for pair in tr.omega.windows(2) {
            prop_assert!(pair[0].data().iter().zip(pair[1].data()).all(|(a, b)| b >= a));
        }
        for pair in tr.kx.windows(2) {
            prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn quarter_turn_rotates_the_response(phase in cell()) {
        let a = trace(&phase, STEPS)?;
        let b = trace(&phase.with_codes(phase.codes.rot90(1)), STEPS)?;
        for i in 0..a.omega.len() {
            let (rel, abs) = tolerance(a.total[i]);
            prop_assert!(close(a.eps[i], b.eps[i], rel), "eps at {i}");
            prop_assert!(close(a.total[i], b.total[i], rel), "total damage at {i}: {} vs {}", a.total[i], b.total[i]);
            // The x modulus of the rotated cell is the y modulus of the original.
            prop_assert!(close(a.ky[i], b.kx[i], rel), "stiffness at {i}");
            prop_assert!(close(a.kx[i], b.ky[i], rel), "stiffness at {i}");
            prop_assert!(fields_close(&a.omega[i].rot90(1), &b.omega[i], abs), "field at {i}");
        }
    }

    #[test]
    fn circular_shift_shifts_the_response(phase in cell(), dy in 0isize..N as isize, dx in 0isize..N as isize) {
        let a = trace(&phase, STEPS)?;
        let b = trace(&phase.with_codes(phase.codes.shift(dy, dx)), STEPS)?;
        for i in 0..a.omega.len() {
            let (rel, abs) = tolerance(a.total[i]);
            prop_assert!(close(a.eps[i], b.eps[i], rel));
            prop_assert!(close(a.kx[i], b.kx[i], rel), "kx at {i}: {} vs {} ({:?})", a.kx[i], b.kx[i], a.total);
            prop_assert!(close(a.ky[i], b.ky[i], rel));
            prop_assert!(fields_close(&a.omega[i].shift(dy, dx), &b.omega[i], abs));
        }
    }
}
