//! Forward inference over a [`NetSpec`] with recorded activations and
//! pooling switches.

use std::collections::{BTreeMap, HashSet};

use crate::error::{Error, Result};
use crate::netspec::{LayerSpec, NetSpec};
use crate::ops::{self, ConvWeights, FcWeights, Switches};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights {
    Conv(ConvWeights),
    Fc(FcWeights),
}

/// Parameters of every conv / fc layer, keyed by layer name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightSet {
    layers: BTreeMap<String, LayerWeights>,
}

impl WeightSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, layer: impl Into<String>, weights: LayerWeights) {
        self.layers.insert(layer.into(), weights);
    }

    pub fn get(&self, layer: &str) -> Option<&LayerWeights> {
        self.layers.get(layer)
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LayerWeights)> {
        self.layers.iter().map(|(k, v)| (k.as_str(), v))
    }

    fn conv(&self, layer: &str) -> Result<&ConvWeights> {
        match self.layers.get(layer) {
            Some(LayerWeights::Conv(w)) => Ok(w),
            Some(LayerWeights::Fc(_)) => Err(Error::layer(layer, "expected conv weights, found fc")),
            None => Err(Error::layer(layer, "missing weights")),
        }
    }

    fn fc(&self, layer: &str) -> Result<&FcWeights> {
        match self.layers.get(layer) {
            Some(LayerWeights::Fc(w)) => Ok(w),
            Some(LayerWeights::Conv(_)) => Err(Error::layer(layer, "expected fc weights, found conv")),
            None => Err(Error::layer(layer, "missing weights")),
        }
    }

    /// Checks that every conv/fc layer has weights of the right dimensions
    /// and that there are no entries for other names.
    pub fn validate(&self, net: &NetSpec) -> Result<()> {
        let mut shape = net.input_dims().to_vec();
        let mut expected = HashSet::new();
        for layer in net.layers() {
            match layer {
                LayerSpec::Conv {
                    name,
                    out_channels,
                    kernel,
                    ..
                } => {
                    let dims = self.conv(name)?.dims();
                    let want = (*out_channels, shape[0], kernel.0, kernel.1);
                    if dims != want {
                        return Err(Error::layer(
                            name,
                            format!("conv weights are {:?}, expected {:?}", dims, want),
                        ));
                    }
                    expected.insert(name.as_str());
                }
                LayerSpec::Fc { name, out_features } => {
                    let dims = self.fc(name)?.dims();
                    let want = (*out_features, shape.iter().product::<usize>());
                    if dims != want {
                        return Err(Error::layer(
                            name,
                            format!("fc weights are {:?}, expected {:?}", dims, want),
                        ));
                    }
                    expected.insert(name.as_str());
                }
                _ => {}
            }
            shape = layer.output_shape(&shape)?;
        }
        if let Some(extra) = self.layers.keys().find(|k| !expected.contains(k.as_str())) {
            return Err(Error::layer(extra, "weights given for a layer without parameters in the network"));
        }
        Ok(())
    }
}

/// Which activations a forward pass keeps. Switches and the final output are
/// always kept.
#[derive(Debug, Clone, Default)]
pub enum Retain {
    #[default]
    All,
    Only(HashSet<String>),
}

impl Retain {
    pub fn only<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Retain::Only(names.into_iter().map(Into::into).collect())
    }

    fn keeps(&self, name: &str) -> bool {
        match self {
            Retain::All => true,
            Retain::Only(set) => set.contains(name),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayerRecord {
    pub name: String,
    pub kind: &'static str,
    pub shape: Vec<usize>,
    pub activation: Option<Tensor>,
    pub switches: Option<Switches>,
}

/// Activations of one image's forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Tensor,
    pub layers: Vec<LayerRecord>,
}

impl ForwardTrace {
    pub fn record(&self, layer: &str) -> Result<&LayerRecord> {
        self.layers
            .iter()
            .find(|r| r.name == layer)
            .ok_or_else(|| Error::UnknownLayer(layer.to_string()))
    }

    /// Activation of a layer, if it was retained.
    pub fn activation(&self, layer: &str) -> Result<&Tensor> {
        self.record(layer)?
            .activation
            .as_ref()
            .ok_or_else(|| Error::layer(layer, "activation was not retained in this trace"))
    }

    pub fn switches(&self, layer: &str) -> Result<&Switches> {
        self.record(layer)?
            .switches
            .as_ref()
            .ok_or_else(|| Error::layer(layer, "not a max-pooling layer"))
    }

    /// Output of the last layer (the input for an empty network).
    pub fn output(&self) -> &Tensor {
        self.layers
            .last()
            .and_then(|r| r.activation.as_ref())
            .unwrap_or(&self.input)
    }
}

/// Mean subtraction. `mean` is either a `(C)` per-channel vector or a full
/// mean image with the same shape as `image`.
pub fn preprocess(image: &Tensor, mean: &Tensor) -> Result<Tensor> {
    let (c, h, w) = image.chw()?;
    let mut out = image.clone();
    if mean.shape() == [c] {
        let plane = h * w;
        for (ch, &m) in mean.data().iter().enumerate() {
            for v in &mut out.data_mut()[ch * plane..(ch + 1) * plane] {
                *v -= m;
            }
        }
    } else if mean.shape() == image.shape() {
        for (v, &m) in out.data_mut().iter_mut().zip(mean.data()) {
            *v -= m;
        }
    } else {
        return Err(Error::Shape(format!(
            "mean of shape {:?} does not fit image of shape {:?}",
            mean.shape(),
            image.shape()
        )));
    }
    Ok(out)
}

/// Runs every layer, keeping all activations.
pub fn run_forward(net: &NetSpec, weights: &WeightSet, x: &Tensor) -> Result<ForwardTrace> {
    run_forward_retaining(net, weights, x, &Retain::All)
}

pub fn run_forward_retaining(
    net: &NetSpec,
    weights: &WeightSet,
    x: &Tensor,
    retain: &Retain,
) -> Result<ForwardTrace> {
    if x.shape() != net.input_dims() {
        return Err(Error::Shape(format!(
            "network input is {:?}, got {:?}",
            net.input_dims(),
            x.shape()
        )));
    }
    let mut current = x.clone();
    let mut records = Vec::with_capacity(net.layers().len());
    let last = net.layers().len().saturating_sub(1);
    for (i, layer) in net.layers().iter().enumerate() {
        let name = layer.name();
        let mut switches = None;
        let tag = |e: Error| match e {
            Error::Shape(msg) => Error::layer(name, msg),
            other => other,
        };
        current = match layer {
            LayerSpec::Conv { stride, pad, .. } => {
                ops::conv_forward(&current, weights.conv(name)?, *stride, *pad).map_err(tag)?
            }
            LayerSpec::Relu { .. } => ops::relu_forward(&current),
            LayerSpec::MaxPool { window, stride, .. } => {
                let (y, sw) = ops::maxpool_forward(&current, *window, *stride).map_err(tag)?;
                switches = Some(sw);
                y
            }
            LayerSpec::Fc { .. } => ops::fc_forward(&current, weights.fc(name)?).map_err(tag)?,
            LayerSpec::Softmax { .. } => ops::softmax(&current),
        };
        let keep = i == last || retain.keeps(name);
        records.push(LayerRecord {
            name: name.to_string(),
            kind: layer.keyword(),
            shape: current.shape().to_vec(),
            activation: keep.then(|| current.clone()),
            switches,
        });
    }
    Ok(ForwardTrace {
        input: x.clone(),
        layers: records,
    })
}

/// A network, its weights and the optional input mean.
#[derive(Debug, Clone)]
pub struct Model {
    pub net: NetSpec,
    pub weights: WeightSet,
    pub mean: Option<Tensor>,
}

impl Model {
    /// Validates the weights against the network.
    pub fn new(net: NetSpec, weights: WeightSet, mean: Option<Tensor>) -> Result<Self> {
        weights.validate(&net)?;
        if let Some(m) = &mean {
            let (c, h, w) = net.input_shape();
            if m.shape() != [c] && m.shape() != [c, h, w] {
                return Err(Error::Shape(format!(
                    "mean of shape {:?} does not fit network input ({}, {}, {})",
                    m.shape(),
                    c,
                    h,
                    w
                )));
            }
        }
        Ok(Self { net, weights, mean })
    }

    /// Mean-subtracts a raw image.
    pub fn preprocess(&self, image: &Tensor) -> Result<Tensor> {
        match &self.mean {
            Some(mean) => preprocess(image, mean),
            None => Ok(image.clone()),
        }
    }

    pub fn forward(&self, image: &Tensor) -> Result<ForwardTrace> {
        self.forward_retaining(image, &Retain::All)
    }

    pub fn forward_retaining(&self, image: &Tensor, retain: &Retain) -> Result<ForwardTrace> {
        run_forward_retaining(&self.net, &self.weights, &self.preprocess(image)?, retain)
    }
}

/// A raw (not mean-subtracted) input image with a stable identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: Tensor,
}

impl Sample {
    pub fn new(id: impl Into<String>, image: Tensor) -> Self {
        Self {
            id: id.into(),
            image,
        }
    }

    /// Converts a raster to the network's input geometry: nearest-neighbor
    /// resize to `H x W`, and channel averaging for one-channel networks.
    pub fn from_rgb(id: impl Into<String>, img: &crate::io::image::RgbImage, net: &NetSpec) -> Result<Self> {
        let (c, h, w) = net.input_shape();
        let resized = if (img.width(), img.height()) == (w, h) {
            img.clone()
        } else {
            img.resize_nearest(w, h)
        };
        let rgb = resized.to_tensor();
        let image = match c {
            3 => rgb,
            1 => {
                let plane = h * w;
                let gray = (0..plane)
                    .map(|i| (0..3).map(|ch| rgb.data()[ch * plane + i]).sum::<f32>() / 3.0)
                    .collect();
                Tensor::from_vec(&[1, h, w], gray)?
            }
            other => {
                return Err(Error::Shape(format!(
                    "cannot feed an RGB image to a {}-channel network",
                    other
                )))
            }
        };
        Ok(Self::new(id, image))
    }
}

/// The `k` most probable classes, highest first (ties by lower index).
pub fn top_k_predictions(
    trace: &ForwardTrace,
    k: usize,
    labels: &[String],
) -> Result<Vec<(String, f32)>> {
    match trace.layers.last() {
        Some(r) if r.kind == "softmax" => {}
        _ => {
            return Err(Error::Precondition(
                "network does not end in a softmax layer".into(),
            ))
        }
    }
    let probs = trace.output().data();
    if labels.len() != probs.len() {
        return Err(Error::Precondition(format!(
            "{} labels for {} outputs",
            labels.len(),
            probs.len()
        )));
    }
    if k > probs.len() {
        return Err(Error::Precondition(format!(
            "k = {} exceeds the {} network outputs",
            k,
            probs.len()
        )));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| (labels[i].clone(), probs[i]))
        .collect())
}
