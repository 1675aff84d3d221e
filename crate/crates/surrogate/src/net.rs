//! Layer lists for the damage U-Net and the property CNN.

use mesoshrink_core::Scenario;
use mesoshrink_nn::{Architecture, Layer, LayerSpec, PadMode, Padding};
use serde::{Deserialize, Serialize};

use crate::SurrogateError;

/// Image channels: geometry, imposed shrinkage, damage.
pub const INPUT_CHANNELS: usize = 3;

/// Boundary treatment matching the cell's periodicity: wrap-around along
/// periodic axes, edge replication across the drying surface.
pub fn scenario_padding(scenario: Scenario) -> Padding {
    let wrap = scenario.wrap();
    let mode = |periodic| {
        if periodic {
            PadMode::Periodic
        } else {
            PadMode::Replicate
        }
    };
    Padding {
        x: mode(wrap.x),
        y: mode(wrap.y),
    }
}

/// Smallest side `≥ size` divisible by `2^levels` whose excess over `size` is
/// even, so it can be split evenly between both borders.
pub fn padded_side(size: usize, levels: usize) -> usize {
    let m = 1 << levels;
    let mut p = size.div_ceil(m) * m;
    if (p - size) % 2 != 0 {
        p += m;
    }
    p
}

fn square(input: [usize; 2]) -> Result<usize, SurrogateError> {
    if input[0] != input[1] || input[0] == 0 {
        return Err(SurrogateError::Config(format!(
            "networks need a square raster, got {input:?}"
        )));
    }
    Ok(input[0])
}

fn conv3(layers: &mut Vec<Layer>, pad: Padding, cin: usize, cout: usize) {
    layers.push(Layer::new(LayerSpec::Pad { mode: pad, width: 1 }));
    layers.push(Layer::new(LayerSpec::Conv3x3 { cin, cout }));
    layers.push(Layer::new(LayerSpec::Relu));
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UNetConfig {
    /// Channels at the finest level; doubled at every pool.
    pub base_width: usize,
    /// Number of pooling levels.
    pub depth: usize,
    pub scenario: Scenario,
    /// Raster height and width.
    pub input: [usize; 2],
}

impl UNetConfig {
    pub fn desk(scenario: Scenario) -> Self {
        Self {
            base_width: 8,
            depth: 3,
            scenario,
            input: [100, 100],
        }
    }

    pub fn paper(scenario: Scenario) -> Self {
        Self {
            base_width: 32,
            depth: 4,
            ..Self::desk(scenario)
        }
    }
}

/// Encoder-decoder with skip connections. The raster is padded up to a side
/// divisible by `2^depth` before the first convolution and cropped back
/// before the output head.
pub fn build_unet(config: &UNetConfig) -> Result<Architecture, SurrogateError> {
    let size = square(config.input)?;
    if config.base_width == 0 {
        return Err(SurrogateError::Config("base_width must be positive".into()));
    }
    let pad = scenario_padding(config.scenario);
    let border = (padded_side(size, config.depth) - size) / 2;
    let width = |level: usize| config.base_width << level;

    let mut layers = Vec::new();
    if border > 0 {
        layers.push(Layer::new(LayerSpec::Pad {
            mode: pad,
            width: border,
        }));
    }
    let mut cin = INPUT_CHANNELS;
    for level in 0..config.depth {
        conv3(&mut layers, pad, cin, width(level));
        conv3(&mut layers, pad, width(level), width(level));
        layers.last_mut().unwrap().name = Some(format!("skip{level}"));
        layers.push(Layer::new(LayerSpec::Maxpool2x2));
        cin = width(level);
    }
    conv3(&mut layers, pad, cin, width(config.depth));
    conv3(&mut layers, pad, width(config.depth), width(config.depth));
    for level in (0..config.depth).rev() {
        let c = width(level);
        layers.push(Layer::new(LayerSpec::Upconv2x2 { cin: 2 * c, cout: c }));
        layers.push(Layer::new(LayerSpec::Concat {
            with: format!("skip{level}"),
        }));
        conv3(&mut layers, pad, 2 * c, c);
        conv3(&mut layers, pad, c, c);
    }
    if border > 0 {
        layers.push(Layer::new(LayerSpec::Crop {
            top: border,
            left: border,
            height: size,
            width: size,
        }));
    }
    layers.push(Layer::new(LayerSpec::Conv1x1 {
        cin: config.base_width,
        cout: 1,
    }));
    layers.push(Layer::new(LayerSpec::Sigmoid));
    let arch = Architecture {
        input: [INPUT_CHANNELS, size, size],
        layers,
    };
    arch.shapes()?;
    Ok(arch)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyNetConfig {
    /// Channels of each convolution level.
    pub widths: Vec<usize>,
    pub convs_per_level: usize,
    /// Average pooling follows each of the first `pools` levels.
    pub pools: usize,
    pub scenario: Scenario,
    pub input: [usize; 2],
}

impl PropertyNetConfig {
    pub fn desk(scenario: Scenario) -> Self {
        Self {
            widths: vec![8, 16, 32, 32, 64],
            convs_per_level: 2,
            pools: 3,
            scenario,
            input: [100, 100],
        }
    }

    pub fn paper(scenario: Scenario) -> Self {
        Self {
            widths: vec![16, 32, 64, 64, 128],
            ..Self::desk(scenario)
        }
    }
}

/// Convolution stack with average pooling, flattened into a dense layer with
/// two softplus outputs: normalised observed shrinkage and stiffness.
pub fn build_cnn(config: &PropertyNetConfig) -> Result<Architecture, SurrogateError> {
    let size = square(config.input)?;
    if config.widths.is_empty() || config.convs_per_level == 0 || config.pools > config.widths.len() {
        return Err(SurrogateError::Config(format!("invalid property network {config:?}")));
    }
    let pad = scenario_padding(config.scenario);
    let side = padded_side(size, config.pools);
    let border = (side - size) / 2;

    let mut layers = Vec::new();
    if border > 0 {
        layers.push(Layer::new(LayerSpec::Pad {
            mode: pad,
            width: border,
        }));
    }
    let mut cin = INPUT_CHANNELS;
    for (level, &c) in config.widths.iter().enumerate() {
        for _ in 0..config.convs_per_level {
            conv3(&mut layers, pad, cin, c);
            cin = c;
        }
        if level < config.pools {
            layers.push(Layer::new(LayerSpec::Avgpool2x2));
        }
    }
    let last = side >> config.pools;
    layers.push(Layer::new(LayerSpec::Flatten));
    layers.push(Layer::new(LayerSpec::Dense {
        inputs: cin * last * last,
        outputs: 2,
    }));
    layers.push(Layer::new(LayerSpec::Softplus));
    let arch = Architecture {
        input: [INPUT_CHANNELS, size, size],
        layers,
    };
    arch.shapes()?;
    Ok(arch)
}
