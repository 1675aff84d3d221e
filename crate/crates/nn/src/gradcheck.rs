//! Central finite-difference verification of graph gradients.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{LayerSpec, ModelGraph, Tape};
use crate::tensor::Tensor;
use crate::NnError;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Perturbation `h = rel_step · max(|θ|, 1)`.
    pub rel_step: f64,
    /// Entries probed per parameter tensor; `None` probes every entry.
    pub per_tensor: Option<usize>,
    /// Input entries probed; `None` probes every entry.
    pub input_entries: Option<usize>,
    /// Gradients below this magnitude are compared absolutely.
    pub floor: f64,
    /// Entries far below their tensor's typical gradient are compared
    /// against `scale_floor · rms(tensor gradient)`; forward round-off sets
    /// an absolute resolution that tiny components cannot beat.
    pub scale_floor: f64,
    /// Skips probes whose perturbation flips a ReLU sign or a max-pool
    /// winner; finite differences across a kink measure neither one-sided
    /// derivative.
    pub skip_kinks: bool,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            rel_step: 1e-5,
            per_tensor: None,
            input_entries: None,
            floor: 1e-8,
            scale_floor: 1e-3,
            skip_kinks: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradReport {
    pub max_rel_error: f64,
    /// Where the largest error occurred, e.g. `003.weight[17]` or `input[4]`.
    pub worst: String,
    /// Analytic and numeric values at `worst`.
    pub worst_pair: (f64, f64),
    pub checked: usize,
    /// Probes left out because the perturbation crossed a kink.
    pub kinks_skipped: usize,
}

impl GradReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

fn rel_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt()
}

fn probe(len: usize, k: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match k {
        Some(k) if k < len => {
            let mut idx = sample(rng, len, k).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..len).collect(),
    }
}

/// Checks parameter and input gradients of the scalar `L = Σ r ⊙ f(x)` for
/// a fixed random weighting `r`.
pub fn grad_check(
    graph: &mut ModelGraph<f64>,
    input: &Tensor<f64>,
    opts: &GradCheckOptions,
) -> Result<GradReport, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let out_dims = graph.forward(input)?.dims();
    let r = Tensor::from_fn(out_dims, |_| rng.gen_range(-1.0..1.0));
    let loss = |g: &ModelGraph<f64>, x: &Tensor<f64>| -> Result<(f64, u64), NnError> {
        let tape = g.forward_tape(x)?;
        let l = tape.output().data().iter().zip(r.data()).map(|(a, b)| a * b).sum();
        Ok((l, kink_pattern(g, &tape)))
    };

    graph.zero_grad();
    let tape = graph.forward_tape(input)?;
    let dx = graph.backward(&tape, &r)?;
    let base = kink_pattern(graph, &tape);
    drop(tape);
    let crossed = |a: u64, b: u64| opts.skip_kinks && (a != base || b != base);

    let mut report = GradReport {
        max_rel_error: 0.0,
        worst: String::new(),
        worst_pair: (0.0, 0.0),
        checked: 0,
        kinks_skipped: 0,
    };
    let record = |report: &mut GradReport, floor: f64, name: String, a: f64, n: f64| {
        let e = rel_error(a, n, floor);
        report.checked += 1;
        if report.worst.is_empty() || e > report.max_rel_error {
            report.max_rel_error = e;
            report.worst = name;
            report.worst_pair = (a, n);
        }
    };

    for p in 0..graph.params().len() {
        let len = graph.params()[p].value.len();
        let floor = opts.floor.max(opts.scale_floor * rms(graph.params()[p].grad.data()));
        for i in probe(len, opts.per_tensor, &mut rng) {
            let theta = graph.params()[p].value.data()[i];
            let h = opts.rel_step * theta.abs().max(1.0);
            graph.params_mut()[p].value.data_mut()[i] = theta + h;
            let (lp, kp) = loss(graph, input)?;
            graph.params_mut()[p].value.data_mut()[i] = theta - h;
            let (lm, km) = loss(graph, input)?;
            graph.params_mut()[p].value.data_mut()[i] = theta;
            if crossed(kp, km) {
                report.kinks_skipped += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = graph.params()[p].grad.data()[i];
            record(
                &mut report,
                floor,
                format!("{}[{i}]", graph.params()[p].name),
                analytic,
                numeric,
            );
        }
    }

    let mut x = input.clone();
    let floor = opts.floor.max(opts.scale_floor * rms(dx.data()));
    for i in probe(x.len(), opts.input_entries, &mut rng) {
        let v = x.data()[i];
        let h = opts.rel_step * v.abs().max(1.0);
        x.data_mut()[i] = v + h;
        let (lp, kp) = loss(graph, &x)?;
        x.data_mut()[i] = v - h;
        let (lm, km) = loss(graph, &x)?;
        x.data_mut()[i] = v;
        if crossed(kp, km) {
            report.kinks_skipped += 1;
            continue;
        }
        record(
            &mut report,
            floor,
            format!("input[{i}]"),
            dx.data()[i],
            (lp - lm) / (2.0 * h),
        );
    }
    Ok(report)
}

/// Hash of every ReLU sign and max-pool winner in a forward pass.
fn kink_pattern(graph: &ModelGraph<f64>, tape: &Tape<f64>) -> u64 {
    const PRIME: u64 = 0x100_0000_01b3;
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    let mut mix = |v: u64| hash = (hash ^ v).wrapping_mul(PRIME);
    for (i, layer) in graph.architecture().layers.iter().enumerate() {
        let x = tape.input_of(i);
        match layer.spec {
            LayerSpec::Relu => x.data().iter().for_each(|&v| mix((v > 0.0) as u64)),
            LayerSpec::Maxpool2x2 => {
                let [n, c, h, w] = x.dims();
                for plane in (0..n).flat_map(|b| (0..c).map(move |ch| (b, ch))) {
                    let p = x.plane(plane.0, plane.1);
                    for y in (0..h).step_by(2) {
                        for xx in (0..w).step_by(2) {
                            let cand = [y * w + xx, y * w + xx + 1, (y + 1) * w + xx, (y + 1) * w + xx + 1];
                            let best = (0..4).fold(0, |b, k| if p[cand[k]] > p[cand[b]] { k } else { b });
                            mix(best as u64);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    hash
}
