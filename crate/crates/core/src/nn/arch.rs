use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sin,
    None,
}

impl Activation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::None => 0,
            Activation::Relu => 1,
            Activation::Sin => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::None),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Sin),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// The network input is concatenated after the previous layer's output.
    pub takes_skip: bool,
}

/// Layer plan for `layers` affine maps of width `hidden`.
///
/// Layers are numbered from 1. The input vector is concatenated into every
/// odd-numbered layer other than the first and the last. Hidden layers use
/// ReLU and the last layer uses `sin`.
pub fn build_arch(
    input_dim: usize,
    output_dim: usize,
    layers: usize,
    hidden: usize,
) -> Result<Vec<LayerSpec>> {
    if layers < 2 {
        return Err(Error::InvalidParam(format!(
            "need at least 2 layers, got {layers}"
        )));
    }
    if input_dim == 0 || output_dim == 0 || hidden == 0 {
        return Err(Error::InvalidParam("layer widths must be positive".into()));
    }
    let specs = (1..=layers)
        .map(|l| {
            let first = l == 1;
            let last = l == layers;
            let takes_skip = !first && !last && l % 2 == 1;
            let base_in = if first { input_dim } else { hidden };
            LayerSpec {
                in_dim: base_in + if takes_skip { input_dim } else { 0 },
                out_dim: if last { output_dim } else { hidden },
                activation: if last { Activation::Sin } else { Activation::Relu },
                takes_skip,
            }
        })
        .collect();
    Ok(specs)
}

/// Checks that consecutive layer widths chain, including skip widths.
pub(crate) fn validate_chain(input_dim: usize, specs: &[LayerSpec]) -> Result<()> {
    let mut prev = input_dim;
    for (i, s) in specs.iter().enumerate() {
        let expect = prev + if s.takes_skip { input_dim } else { 0 };
        if (i == 0 && s.takes_skip) || s.in_dim != expect {
            return Err(Error::Shape(format!(
                "layer {} expects input width {} but the chain provides {expect}",
                i + 1,
                s.in_dim
            )));
        }
        prev = s.out_dim;
    }
    Ok(())
}
