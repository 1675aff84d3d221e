//! Training loops. The U-Net is trained auto-regressively: at every snapshot
//! its own (detached, clamped) previous prediction is the damage input, and
//! the weights are updated after each snapshot. The CNN is trained on pooled
//! (sample, snapshot) pairs with the reference damage as input.

use std::io::Write;

use mesoshrink_core::microgen::Augmentation;
use mesoshrink_core::{Grid, Scenario};
use mesoshrink_nn::{Adam, ModelGraph, ReduceOnPlateau, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{assemble_input, stack_images, unstack_fields, Sample};
use crate::loss::{loss_damage_grad, loss_properties, loss_properties_grad, PropertyLoss};
use crate::rollout::{enforce_monotone, rollout_batch};
use crate::SurrogateError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub batch_size: usize,
    /// Random symmetry transforms admitted by the scenario, drawn per sample
    /// and epoch.
    pub augment: bool,
    pub seed: u64,
    pub property_loss: PropertyLoss,
    /// An epoch loss above this multiple of the first one aborts training.
    pub divergence_factor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 1e-3,
            plateau_factor: 0.5,
            plateau_patience: 5,
            batch_size: 16,
            augment: true,
            seed: 0,
            property_loss: PropertyLoss::Absolute,
            divergence_factor: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    /// `epoch,mean_loss,lr` table.
    pub fn to_csv(&self) -> Result<Vec<u8>, SurrogateError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.epochs {
            w.serialize(r)?;
        }
        let mut out = w.into_inner().map_err(|e| SurrogateError::Io(e.into_error()))?;
        out.flush()?;
        Ok(out)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.mean_loss)
    }
}

/// Which network a transform is drawn for. Stiffness is measured along x,
/// so quarter turns would swap it for the transverse value; the property
/// network only sees mirrors and shifts.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Target {
    Damage,
    Properties,
}

fn draw_ops(rng: &mut ChaCha8Rng, scenario: Scenario, h: usize, w: usize, target: Target) -> Vec<Augmentation> {
    let mut ops = Vec::with_capacity(3);
    let dx = rng.gen_range(0..w) as isize;
    match scenario {
        Scenario::Uniform => {
            if target == Target::Damage && h == w {
                ops.push(Augmentation::Rot90(rng.gen_range(0..4)));
            }
            if rng.gen_bool(0.5) {
                ops.push(Augmentation::FlipH);
            }
            if target == Target::Properties && rng.gen_bool(0.5) {
                ops.push(Augmentation::FlipV);
            }
            let dy = rng.gen_range(0..h) as isize;
            ops.push(Augmentation::Shift { dy, dx });
        }
        Scenario::NonUniform => {
            if rng.gen_bool(0.5) {
                ops.push(Augmentation::FlipH);
            }
            ops.push(Augmentation::Shift { dy: 0, dx });
        }
    }
    ops
}

fn transform(g: &Grid<f32>, ops: &[Augmentation]) -> Grid<f32> {
    ops.iter().fold(g.clone(), |g, op| op.apply_grid(&g))
}

fn transformed_sample(s: &Sample, ops: &[Augmentation]) -> Sample {
    ops.iter().fold(s.clone(), |s, &op| s.augmented(op))
}

fn check_dataset(data: &[Sample]) -> Result<usize, SurrogateError> {
    let Some(first) = data.first() else {
        return Err(SurrogateError::Data("empty training set".into()));
    };
    let steps = first.inputs.steps();
    for s in data {
        if s.inputs.steps() != steps || s.targets.omega.len() != steps + 1 || s.targets.k_bar.len() != steps + 1 {
            return Err(SurrogateError::Data("inconsistent snapshot counts".into()));
        }
        if s.inputs.scenario != first.inputs.scenario {
            return Err(SurrogateError::ScenarioMismatch);
        }
    }
    Ok(steps)
}

struct Schedule {
    plateau: ReduceOnPlateau,
    first: Option<f64>,
    factor: f64,
}

impl Schedule {
    fn new(config: &TrainConfig) -> Self {
        Self {
            plateau: ReduceOnPlateau::new(config.plateau_factor, config.plateau_patience),
            first: None,
            factor: config.divergence_factor,
        }
    }

    /// Records an epoch and returns the next learning rate.
    fn end_epoch(&mut self, epoch: usize, mean: f64, lr: f64, history: &mut History) -> Result<f64, SurrogateError> {
        history.epochs.push(EpochRecord {
            epoch,
            mean_loss: mean,
            lr,
        });
        log::info!("epoch {epoch}: loss {mean:.6e}, lr {lr:.2e}");
        let first = *self.first.get_or_insert(mean);
        if !mean.is_finite() || mean > self.factor * first {
            return Err(SurrogateError::DivergenceDetected { epoch, loss: mean });
        }
        Ok(self.plateau.observe(mean, lr))
    }
}

/// Trains the damage U-Net in place.
pub fn train_unet(
    model: &mut ModelGraph<f32>,
    data: &[Sample],
    config: &TrainConfig,
) -> Result<History, SurrogateError> {
    let mut history = History::default();
    if config.epochs == 0 {
        return Ok(history);
    }
    let steps = check_dataset(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(model.params(), config.learning_rate);
    let mut schedule = Schedule::new(config);
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let batch: Vec<Sample> = chunk
                .iter()
                .map(|&i| {
                    let s = &data[i];
                    if config.augment {
                        let (h, w) = (s.inputs.height(), s.inputs.width());
                        let ops = draw_ops(&mut rng, s.inputs.scenario, h, w, Target::Damage);
                        transformed_sample(s, &ops)
                    } else {
                        s.clone()
                    }
                })
                .collect();
            let mut prev: Vec<Grid<f32>> = batch
                .iter()
                .map(|s| Grid::filled(s.inputs.height(), s.inputs.width(), 0.0))
                .collect();
            for t in 1..=steps {
                let images = batch
                    .iter()
                    .zip(&prev)
                    .map(|(s, w)| assemble_input(&s.inputs, t, w))
                    .collect::<Result<Vec<_>, _>>()?;
                let tape = model.forward_tape(&stack_images(&images))?;
                let y = tape.output();
                let reference: Vec<f32> = batch
                    .iter()
                    .flat_map(|s| s.targets.omega[t].data().iter().copied())
                    .collect();
                let (loss, grad) = loss_damage_grad(y.data(), &reference);
                let dy = Tensor::from_vec(y.dims(), grad)?;
                let pred = unstack_fields(y);
                model.zero_grad();
                model.backward(&tape, &dy)?;
                adam.update(model.params_mut());
                total += loss * batch.len() as f64;
                prev = prev.iter().zip(&pred).map(|(p, n)| enforce_monotone(p, n)).collect();
            }
        }
        let mean = total / (data.len() * steps) as f64;
        adam.lr = schedule.end_epoch(epoch, mean, adam.lr, &mut history)?;
    }
    Ok(history)
}

/// Trains the property CNN in place on every snapshot of every sample,
/// including the undamaged start.
pub fn train_cnn(
    model: &mut ModelGraph<f32>,
    data: &[Sample],
    config: &TrainConfig,
) -> Result<History, SurrogateError> {
    let mut history = History::default();
    if config.epochs == 0 {
        return Ok(history);
    }
    let steps = check_dataset(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(model.params(), config.learning_rate);
    let mut schedule = Schedule::new(config);
    let mut items: Vec<(usize, usize)> = (0..data.len()).flat_map(|i| (0..=steps).map(move |t| (i, t))).collect();

    for epoch in 1..=config.epochs {
        items.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in items.chunks(config.batch_size.max(1)) {
            let mut images = Vec::with_capacity(chunk.len());
            let mut targets = Vec::with_capacity(chunk.len());
            for &(i, t) in chunk {
                let s = &data[i];
                let mut img = assemble_input(&s.inputs, t, &s.targets.omega[t])?;
                if config.augment {
                    let (h, w) = (s.inputs.height(), s.inputs.width());
                    let ops = draw_ops(&mut rng, s.inputs.scenario, h, w, Target::Properties);
                    img = img.map(|g| transform(&g, &ops));
                }
                images.push(img);
                targets.push((s.targets.eps_bar[t] as f64, s.targets.k_bar[t] as f64));
            }
            let tape = model.forward_tape(&stack_images(&images))?;
            let y = tape.output();
            let n = chunk.len() as f64;
            let mut dy = Tensor::zeros(y.dims());
            for (b, &target) in targets.iter().enumerate() {
                let pred = (y.item(b)[0] as f64, y.item(b)[1] as f64);
                total += loss_properties(pred, target, config.property_loss);
                let (ge, gk) = loss_properties_grad(pred, target, config.property_loss);
                dy.item_mut(b).copy_from_slice(&[(ge / n) as f32, (gk / n) as f32]);
            }
            model.zero_grad();
            model.backward(&tape, &dy)?;
            adam.update(model.params_mut());
        }
        let mean = total / items.len() as f64;
        adam.lr = schedule.end_epoch(epoch, mean, adam.lr, &mut history)?;
    }
    Ok(history)
}

/// Mean rollout pixel MSE over snapshots `1..`, averaged over samples.
pub fn evaluate_unet(model: &ModelGraph<f32>, data: &[Sample], batch: usize) -> Result<f64, SurrogateError> {
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in data.chunks(batch.max(1)) {
        let inputs: Vec<_> = chunk.iter().map(|s| &s.inputs).collect();
        for (s, r) in chunk.iter().zip(rollout_batch(model, None, &inputs)?) {
            for t in 1..r.omega.len() {
                total += crate::loss::loss_damage(r.omega[t].data(), s.targets.omega[t].data());
                count += 1;
            }
        }
    }
    Ok(total / count.max(1) as f64)
}

/// Mean absolute `(ε̄, k̄)` errors over all snapshots with reference damage
/// as input.
pub fn evaluate_cnn(model: &ModelGraph<f32>, data: &[Sample]) -> Result<(f64, f64), SurrogateError> {
    let (mut de, mut dk, mut n) = (0.0, 0.0, 0usize);
    for s in data {
        let steps = s.inputs.steps();
        let images = (0..=steps)
            .map(|t| assemble_input(&s.inputs, t, &s.targets.omega[t]))
            .collect::<Result<Vec<_>, _>>()?;
        let y = model.forward(&stack_images(&images))?;
        for t in 0..=steps {
            de += (y.item(t)[0] as f64 - s.targets.eps_bar[t] as f64).abs();
            dk += (y.item(t)[1] as f64 - s.targets.k_bar[t] as f64).abs();
            n += 1;
        }
    }
    Ok((de / n.max(1) as f64, dk / n.max(1) as f64))
}
