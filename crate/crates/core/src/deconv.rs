//! Projection of a layer's representation back to pixel space.
//!
//! Starting from a (masked) activation, layers are undone from the selected
//! one down to the input: conv by its flipped-filter adjoint, ReLU by
//! clamping, max-pooling by unpooling through the forward pass's switches
//! and fc by the transposed matrix.

use std::fmt;
use std::str::FromStr;

use crate::engine::{ForwardTrace, LayerWeights, WeightSet};
use crate::error::{Error, Result};
use crate::io::image::RgbImage;
use crate::netspec::{LayerSpec, NetSpec};
use crate::ops;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    /// The whole representation.
    Full,
    /// One feature map (one output for fc layers).
    Filter(usize),
    /// A single activation.
    Neuron { channel: usize, row: usize, col: usize },
    /// The `n` feature maps with the highest maximum activation.
    TopKFilters(usize),
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SelectionMode::Full => write!(f, "full"),
            SelectionMode::Filter(k) => write!(f, "filter:{}", k),
            SelectionMode::Neuron { channel, row, col } => write!(f, "neuron:{},{},{}", channel, row, col),
            SelectionMode::TopKFilters(n) => write!(f, "topk:{}", n),
        }
    }
}

impl FromStr for SelectionMode {
    type Err = Error;

    /// `full`, `filter:K`, `neuron:K,ROW,COL` or `topk:N`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Selection(format!("cannot parse selection `{}`", s));
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        match s.split_once(':') {
            None if s == "full" => Ok(SelectionMode::Full),
            Some(("filter", k)) => Ok(SelectionMode::Filter(num(k)?)),
            Some(("topk", n)) => Ok(SelectionMode::TopKFilters(num(n)?)),
            Some(("neuron", rest)) => {
                let parts: Vec<&str> = rest.split(',').collect();
                let [k, r, c] = parts[..] else {
                    return Err(bad());
                };
                Ok(SelectionMode::Neuron {
                    channel: num(k)?,
                    row: num(r)?,
                    col: num(c)?,
                })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub layer: String,
    pub mode: SelectionMode,
}

impl Selection {
    pub fn new(layer: impl Into<String>, mode: SelectionMode) -> Self {
        Self {
            layer: layer.into(),
            mode,
        }
    }

    pub fn full(layer: impl Into<String>) -> Self {
        Self::new(layer, SelectionMode::Full)
    }
}

/// Channels, height and width of an activation; fc outputs are `(n, 1, 1)`.
fn extent(t: &Tensor) -> (usize, usize, usize) {
    match *t.shape() {
        [c, h, w] => (c, h, w),
        _ => (t.len(), 1, 1),
    }
}

/// Zeroes everything outside the selection.
pub fn mask_activation(activation: &Tensor, mode: SelectionMode) -> Result<Tensor> {
    let (channels, h, w) = extent(activation);
    let plane = h * w;
    let keep_channels = |keep: &[usize]| {
        let mut out = Tensor::zeros(activation.shape());
        for &k in keep {
            out.data_mut()[k * plane..(k + 1) * plane]
                .copy_from_slice(&activation.data()[k * plane..(k + 1) * plane]);
        }
        out
    };
    match mode {
        SelectionMode::Full => Ok(activation.clone()),
        SelectionMode::Filter(k) => {
            if k >= channels {
                return Err(Error::Selection(format!("filter {} out of range (layer has {})", k, channels)));
            }
            Ok(keep_channels(&[k]))
        }
        SelectionMode::Neuron { channel, row, col } => {
            if channel >= channels || row >= h || col >= w {
                return Err(Error::Selection(format!(
                    "neuron ({}, {}, {}) outside ({}, {}, {})",
                    channel, row, col, channels, h, w
                )));
            }
            let mut out = Tensor::zeros(activation.shape());
            let idx = channel * plane + row * w + col;
            out.data_mut()[idx] = activation.data()[idx];
            Ok(out)
        }
        SelectionMode::TopKFilters(n) => {
            if n == 0 || n > channels {
                return Err(Error::Selection(format!(
                    "top-{} filters requested from a layer with {}",
                    n, channels
                )));
            }
            let peaks: Vec<f32> = (0..channels)
                .map(|k| {
                    activation.data()[k * plane..(k + 1) * plane]
                        .iter()
                        .copied()
                        .fold(f32::NEG_INFINITY, f32::max)
                })
                .collect();
            let mut order: Vec<usize> = (0..channels).collect();
            order.sort_by(|&a, &b| peaks[b].total_cmp(&peaks[a]).then(a.cmp(&b)));
            Ok(keep_channels(&order[..n]))
        }
    }
}

fn check_trace(net: &NetSpec, trace: &ForwardTrace) -> Result<Vec<Vec<usize>>> {
    let shapes = net.shape_trace()?;
    if trace.layers.len() != shapes.len()
        || trace
            .layers
            .iter()
            .zip(&shapes)
            .any(|(r, (name, shape))| &r.name != name || &r.shape != shape)
    {
        return Err(Error::Precondition("trace was not produced by this network".into()));
    }
    Ok(shapes.into_iter().map(|(_, s)| s).collect())
}

/// Undoes layers `index, index-1, ..., 0`, starting from `start` which must
/// have the output shape of layer `index`.
pub fn project_down(
    net: &NetSpec,
    weights: &WeightSet,
    trace: &ForwardTrace,
    index: usize,
    start: Tensor,
) -> Result<Tensor> {
    let shapes = check_trace(net, trace)?;
    let input = net.input_dims().to_vec();
    let mut current = start;
    for i in (0..=index).rev() {
        let layer = &net.layers()[i];
        let in_shape: &[usize] = if i == 0 { &input } else { &shapes[i - 1] };
        let name = layer.name();
        current = match layer {
            LayerSpec::Conv { stride, pad, .. } => match weights.get(name) {
                Some(LayerWeights::Conv(w)) => ops::conv_reverse(&current, w, *stride, *pad, in_shape)?,
                _ => return Err(Error::layer(name, "missing conv weights")),
            },
            LayerSpec::Relu { .. } => ops::relu_reverse(&current),
            LayerSpec::MaxPool { window, stride, .. } => {
                ops::maxpool_reverse(&current, trace.switches(name)?, in_shape, *window, *stride)?
            }
            LayerSpec::Fc { .. } => match weights.get(name) {
                Some(LayerWeights::Fc(w)) => ops::fc_reverse(&current, w, in_shape)?,
                _ => return Err(Error::layer(name, "missing fc weights")),
            },
            LayerSpec::Softmax { .. } => {
                return Err(Error::Selection(format!(
                    "softmax layer `{}` cannot be reversed; select the layer before it",
                    name
                )))
            }
        };
    }
    Ok(current)
}

/// Pixel-space reconstruction of the selected part of a layer's activation.
pub fn reconstruct(
    net: &NetSpec,
    weights: &WeightSet,
    trace: &ForwardTrace,
    sel: &Selection,
) -> Result<Tensor> {
    let index = net
        .layer_index(&sel.layer)
        .ok_or_else(|| Error::UnknownLayer(sel.layer.clone()))?;
    if matches!(net.layers()[index], LayerSpec::Softmax { .. }) {
        return Err(Error::Selection(format!(
            "softmax layer `{}` cannot be reconstructed",
            sel.layer
        )));
    }
    let start = mask_activation(trace.activation(&sel.layer)?, sel.mode)?;
    project_down(net, weights, trace, index, start)
}

/// Full-selection reconstructions of several layers, in the given order.
pub fn reconstruct_series(
    net: &NetSpec,
    weights: &WeightSet,
    trace: &ForwardTrace,
    layers: &[&str],
) -> Result<Vec<Tensor>> {
    layers
        .iter()
        .map(|name| reconstruct(net, weights, trace, &Selection::full(*name)))
        .collect()
}

/// Affine rescale to `0..=255` (min to 0, max to 255; constant images become
/// 128). One channel renders gray, three as RGB, any other count as the
/// channel mean.
pub fn to_displayable(x: &Tensor) -> Result<RgbImage> {
    let (c, h, w) = x.chw()?;
    let plane = h * w;
    let values: Vec<f32> = match c {
        1 | 3 => x.data().to_vec(),
        _ => (0..plane)
            .map(|i| (0..c).map(|ch| x.data()[ch * plane + i]).sum::<f32>() / c as f32)
            .collect(),
    };
    let (lo, hi) = values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let scaled: Vec<f32> = if hi > lo {
        let span = (hi - lo) as f64;
        values
            .iter()
            .map(|&v| (((v - lo) as f64 / span) * 255.0).round() as f32)
            .collect()
    } else {
        vec![128.0; values.len()]
    };
    let channels = if c == 3 { 3 } else { 1 };
    RgbImage::from_tensor(&Tensor::from_vec(&[channels, h, w], scaled)?)
}
