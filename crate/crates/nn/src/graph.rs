//! Static layer graphs. Each layer reads the previous layer's output;
//! `Concat` additionally reads an earlier output saved under a name, which
//! is enough for encoder-decoder skip connections.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ops::{self, Padding};
use crate::real::Real;
use crate::tensor::Tensor;
use crate::NnError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Pad {
        mode: Padding,
        width: usize,
    },
    Crop {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
    },
    Conv3x3 {
        cin: usize,
        cout: usize,
    },
    Conv1x1 {
        cin: usize,
        cout: usize,
    },
    Upconv2x2 {
        cin: usize,
        cout: usize,
    },
    Maxpool2x2,
    Avgpool2x2,
    Relu,
    Sigmoid,
    Softplus,
    /// Previous output followed by the channels of the named output.
    Concat {
        with: String,
    },
    Flatten,
    Dense {
        inputs: usize,
        outputs: usize,
    },
}

impl LayerSpec {
    /// Weight and bias shapes, if the layer is parametric.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Conv3x3 { cin, cout } => Some((vec![cout, cin, 3, 3], vec![cout])),
            LayerSpec::Conv1x1 { cin, cout } => Some((vec![cout, cin, 1, 1], vec![cout])),
            LayerSpec::Upconv2x2 { cin, cout } => Some((vec![cin, cout, 2, 2], vec![cout])),
            LayerSpec::Dense { inputs, outputs } => Some((vec![outputs, inputs], vec![outputs])),
            _ => None,
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes()
            .map_or(0, |(w, b)| w.iter().product::<usize>() + b.iter().product::<usize>())
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv3x3 { cin, .. } => 9 * cin,
            LayerSpec::Conv1x1 { cin, .. } | LayerSpec::Upconv2x2 { cin, .. } => cin,
            LayerSpec::Dense { inputs, .. } => inputs,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Saves this layer's output for a later `Concat`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub spec: LayerSpec,
}

impl Layer {
    pub fn new(spec: LayerSpec) -> Self {
        Self { name: None, spec }
    }

    pub fn named(name: impl Into<String>, spec: LayerSpec) -> Self {
        Self {
            name: Some(name.into()),
            spec,
        }
    }
}

/// Input shape (channels, height, width) and layer list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: [usize; 3],
    pub layers: Vec<Layer>,
}

impl Architecture {
    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.spec.param_count()).sum()
    }

    /// Output shape of every layer, checking the graph on the way.
    pub fn shapes(&self) -> Result<Vec<[usize; 3]>, NnError> {
        let mut shapes = vec![self.input];
        let mut named: HashMap<&str, usize> = HashMap::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let [c, h, w] = shapes[i];
            let bad = |what: String| NnError::DimMismatch(format!("layer {i}: {what}"));
            let out = match &layer.spec {
                LayerSpec::Pad { width, .. } => [c, h + 2 * width, w + 2 * width],
                LayerSpec::Crop {
                    top,
                    left,
                    height,
                    width,
                } => {
                    if top + height > h || left + width > w {
                        return Err(bad(format!("crop outside {h}×{w}")));
                    }
                    [c, *height, *width]
                }
                LayerSpec::Conv3x3 { cin, cout } | LayerSpec::Conv1x1 { cin, cout } => {
                    let k = if matches!(layer.spec, LayerSpec::Conv3x3 { .. }) {
                        3
                    } else {
                        1
                    };
                    if *cin != c || h < k || w < k {
                        return Err(bad(format!("conv expects {cin} channels, got {c} at {h}×{w}")));
                    }
                    [*cout, h - k + 1, w - k + 1]
                }
                LayerSpec::Upconv2x2 { cin, cout } => {
                    if *cin != c {
                        return Err(bad(format!("upconv expects {cin} channels, got {c}")));
                    }
                    [*cout, 2 * h, 2 * w]
                }
                LayerSpec::Maxpool2x2 | LayerSpec::Avgpool2x2 => {
                    if h % 2 != 0 || w % 2 != 0 {
                        return Err(NnError::OddDims { height: h, width: w });
                    }
                    [c, h / 2, w / 2]
                }
                LayerSpec::Relu | LayerSpec::Sigmoid | LayerSpec::Softplus => [c, h, w],
                LayerSpec::Concat { with } => {
                    let j = *named
                        .get(with.as_str())
                        .ok_or_else(|| NnError::UnknownName(with.clone()))?;
                    let [cs, hs, ws] = shapes[j];
                    if (hs, ws) != (h, w) {
                        return Err(bad(format!("concat of {h}×{w} with {hs}×{ws}")));
                    }
                    [c + cs, h, w]
                }
                LayerSpec::Flatten => [c * h * w, 1, 1],
                LayerSpec::Dense { inputs, outputs } => {
                    if *inputs != c * h * w {
                        return Err(bad(format!("dense expects {inputs} inputs, got {}", c * h * w)));
                    }
                    [*outputs, 1, 1]
                }
            };
            if let Some(name) = &layer.name {
                if named.insert(name, i + 1).is_some() {
                    return Err(bad(format!("duplicate name `{name}`")));
                }
            }
            shapes.push(out);
        }
        Ok(shapes)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Real> Param<T> {
    fn new(name: String, shape: Vec<usize>) -> Self {
        let mut dims = [1usize; 4];
        for (d, &s) in dims.iter_mut().zip(&shape) {
            *d = s;
        }
        Self {
            name,
            shape,
            value: Tensor::zeros(dims),
            grad: Tensor::zeros(dims),
        }
    }
}

/// Activations recorded by a forward pass.
pub struct Tape<T> {
    acts: Vec<Tensor<T>>,
}

impl<T: Real> Tape<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.acts.last().unwrap()
    }

    /// Input of layer `i`.
    pub fn input_of(&self, i: usize) -> &Tensor<T> {
        &self.acts[i]
    }

    pub fn into_output(mut self) -> Tensor<T> {
        self.acts.pop().unwrap()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelGraph<T> {
    arch: Architecture,
    params: Vec<Param<T>>,
    /// Index of the weight parameter per layer; the bias follows it.
    slot: Vec<Option<usize>>,
    named: HashMap<String, usize>,
}

impl<T: Real> ModelGraph<T> {
    /// Builds the graph with seeded He-normal weights (`√(2/fan_in)` before a
    /// ReLU, `√(1/fan_in)` otherwise) and zero biases.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self, NnError> {
        let mut g = Self::zeroed(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, layer) in g.arch.layers.iter().enumerate() {
            let Some(p) = g.slot[i] else { continue };
            let gain = match g.arch.layers.get(i + 1).map(|l| &l.spec) {
                Some(LayerSpec::Relu) => 2.0,
                _ => 1.0,
            };
            let std = (gain / layer.spec.fan_in() as f64).sqrt();
            for v in g.params[p].value.data_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = T::from_f64(std * z);
            }
        }
        Ok(g)
    }

    /// Builds the graph with every parameter zero.
    pub fn zeroed(arch: Architecture) -> Result<Self, NnError> {
        arch.shapes()?;
        let mut params = Vec::new();
        let mut slot = Vec::with_capacity(arch.layers.len());
        let mut named = HashMap::new();
        for (i, layer) in arch.layers.iter().enumerate() {
            if let Some((w, b)) = layer.spec.param_shapes() {
                slot.push(Some(params.len()));
                params.push(Param::new(format!("{i:03}.weight"), w));
                params.push(Param::new(format!("{i:03}.bias"), b));
            } else {
                slot.push(None);
            }
            if let Some(n) = &layer.name {
                named.insert(n.clone(), i + 1);
            }
        }
        Ok(Self {
            arch,
            params,
            slot,
            named,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::ZERO);
        }
    }

    /// Same graph with parameters converted to another element type.
    pub fn cast<U: Real>(&self) -> ModelGraph<U> {
        ModelGraph {
            arch: self.arch.clone(),
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    value: p.value.cast(),
                    grad: p.grad.cast(),
                })
                .collect(),
            slot: self.slot.clone(),
            named: self.named.clone(),
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(), NnError> {
        let [_, c, h, w] = x.dims();
        if [c, h, w] != self.arch.input {
            return Err(NnError::DimMismatch(format!(
                "graph input {:?}, got {:?}",
                self.arch.input,
                [c, h, w]
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        Ok(self.forward_tape(x)?.into_output())
    }

    pub fn forward_tape(&self, x: &Tensor<T>) -> Result<Tape<T>, NnError> {
        self.check_input(x)?;
        let mut acts: Vec<Tensor<T>> = Vec::with_capacity(self.arch.layers.len() + 1);
        acts.push(x.clone());
        for (i, layer) in self.arch.layers.iter().enumerate() {
            let a = &acts[i];
            let wb = self.slot[i].map(|p| (&self.params[p].value, self.params[p + 1].value.data()));
            let y = match &layer.spec {
                LayerSpec::Pad { mode, width } => ops::pad(a, *mode, *width),
                LayerSpec::Crop {
                    top,
                    left,
                    height,
                    width,
                } => ops::crop(a, *top, *left, *height, *width),
                LayerSpec::Conv3x3 { .. } => {
                    let (w, b) = wb.unwrap();
                    ops::conv(a, w, b, 3)?
                }
                LayerSpec::Conv1x1 { .. } => {
                    let (w, b) = wb.unwrap();
                    ops::conv(a, w, b, 1)?
                }
                LayerSpec::Upconv2x2 { .. } => {
                    let (w, b) = wb.unwrap();
                    ops::upconv2x2(a, w, b)?
                }
                LayerSpec::Maxpool2x2 => ops::maxpool2x2(a)?,
                LayerSpec::Avgpool2x2 => ops::avgpool2x2(a)?,
                LayerSpec::Relu => ops::relu(a),
                LayerSpec::Sigmoid => ops::sigmoid(a),
                LayerSpec::Softplus => ops::softplus(a),
                LayerSpec::Concat { with } => ops::concat(a, &acts[self.named[with]])?,
                LayerSpec::Flatten => {
                    let n = a.batch();
                    let f = a.item_len();
                    a.clone().reshape([n, f, 1, 1])?
                }
                LayerSpec::Dense { .. } => {
                    let (w, b) = wb.unwrap();
                    ops::dense(a, w.data(), b)?
                }
            };
            acts.push(y);
        }
        Ok(Tape { acts })
    }

    /// Accumulates parameter gradients of `Σ dy · output` and returns the
    /// input gradient.
    pub fn backward(&mut self, tape: &Tape<T>, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let acts = &tape.acts;
        if dy.dims() != tape.output().dims() {
            return Err(NnError::DimMismatch(format!(
                "output gradient {:?} for output {:?}",
                dy.dims(),
                tape.output().dims()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; acts.len()];
        grads[acts.len() - 1] = Some(dy.clone());
        for (i, layer) in self.arch.layers.iter().enumerate().rev() {
            let Some(g) = grads[i + 1].take() else { continue };
            let x = &acts[i];
            let dx = match &layer.spec {
                LayerSpec::Pad { mode, width } => ops::pad_backward(&g, *mode, *width, x.dims()),
                LayerSpec::Crop { top, left, .. } => ops::crop_backward(&g, *top, *left, x.dims()),
                LayerSpec::Conv3x3 { .. } | LayerSpec::Conv1x1 { .. } | LayerSpec::Upconv2x2 { .. } => {
                    let p = self.slot[i].unwrap();
                    let w = &self.params[p].value;
                    let (dx, pg) = match layer.spec {
                        LayerSpec::Conv3x3 { .. } => ops::conv_backward(x, w, &g, 3),
                        LayerSpec::Conv1x1 { .. } => ops::conv_backward(x, w, &g, 1),
                        _ => ops::upconv2x2_backward(x, w, &g),
                    };
                    accumulate(&mut self.params, p, &pg);
                    dx
                }
                LayerSpec::Dense { .. } => {
                    let p = self.slot[i].unwrap();
                    let (dx, pg) = ops::dense_backward(x, self.params[p].value.data(), &g);
                    accumulate(&mut self.params, p, &pg);
                    dx
                }
                LayerSpec::Maxpool2x2 => ops::maxpool2x2_backward(x, &g),
                LayerSpec::Avgpool2x2 => ops::avgpool2x2_backward(&g, x.dims()),
                LayerSpec::Relu => ops::relu_backward(x, &g),
                LayerSpec::Sigmoid => ops::sigmoid_backward(&acts[i + 1], &g),
                LayerSpec::Softplus => ops::softplus_backward(x, &g),
                LayerSpec::Concat { with } => {
                    let (da, db) = ops::concat_backward(&g, x.channels());
                    add_grad(&mut grads[self.named[with]], db);
                    da
                }
                LayerSpec::Flatten => g.reshape(x.dims())?,
            };
            add_grad(&mut grads[i], dx);
        }
        Ok(grads[0].take().unwrap_or_else(|| Tensor::zeros(acts[0].dims())))
    }
}

fn accumulate<T: Real>(params: &mut [Param<T>], p: usize, pg: &ops::ParamGrads<T>) {
    for (a, &b) in params[p].grad.data_mut().iter_mut().zip(&pg.dw) {
        *a += b;
    }
    for (a, &b) in params[p + 1].grad.data_mut().iter_mut().zip(&pg.db) {
        *a += b;
    }
}

fn add_grad<T: Real>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}
