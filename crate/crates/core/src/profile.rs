//! Layer sparsity: the fraction of exactly-zero activations per layer,
//! aggregated over a dataset.

use rayon::prelude::*;

use crate::engine::{Model, Retain, Sample};
use crate::error::{Error, Result};
use crate::netspec::{LayerSpec, NetSpec};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerCount {
    pub layer: String,
    pub zeros: u64,
    pub total: u64,
}

impl LayerCount {
    pub fn sparsity(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.zeros as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityReport {
    /// In network order.
    pub layers: Vec<LayerCount>,
    pub images: usize,
}

impl SparsityReport {
    pub fn get(&self, layer: &str) -> Option<&LayerCount> {
        self.layers.iter().find(|c| c.layer == layer)
    }

    pub fn to_tsv(&self) -> String {
        crate::io::tsv::render(
            &["layer", "zeros", "total", "sparsity"],
            self.layers.iter().map(|c| {
                vec![
                    c.layer.clone(),
                    c.zeros.to_string(),
                    c.total.to_string(),
                    format!("{:.6}", c.sparsity()),
                ]
            }),
        )
    }
}

/// Entries with `|v| <= threshold` count as zero. A threshold of 0 means
/// exact zeros only.
pub fn count_zeros(t: &Tensor, threshold: f32) -> u64 {
    t.data().iter().filter(|v| v.abs() <= threshold).count() as u64
}

/// Layers profiled by default: post-ReLU outputs (relu and pool layers), or
/// conv outputs when `pre_relu` is set.
pub fn default_layers(net: &NetSpec, pre_relu: bool) -> Vec<String> {
    net.layers()
        .iter()
        .filter(|l| match l {
            LayerSpec::Conv { .. } => pre_relu,
            LayerSpec::Relu { .. } | LayerSpec::MaxPool { .. } => !pre_relu,
            _ => false,
        })
        .map(|l| l.name().to_string())
        .collect()
}

fn ordered_layers(net: &NetSpec, layers: &[String]) -> Result<Vec<String>> {
    let mut idx = Vec::with_capacity(layers.len());
    for name in layers {
        let i = net
            .layer_index(name)
            .ok_or_else(|| Error::UnknownLayer(name.clone()))?;
        if !idx.contains(&i) {
            idx.push(i);
        }
    }
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| net.layers()[i].name().to_string()).collect())
}

/// Zero counts of `layers` for one image, in network order.
pub fn image_counts(model: &Model, sample: &Sample, layers: &[String], threshold: f32) -> Result<Vec<LayerCount>> {
    let layers = ordered_layers(&model.net, layers)?;
    let trace = model.forward_retaining(&sample.image, &Retain::only(layers.iter().map(String::as_str)))?;
    layers
        .into_iter()
        .map(|layer| {
            let act = trace.activation(&layer)?;
            Ok(LayerCount {
                zeros: count_zeros(act, threshold),
                total: act.len() as u64,
                layer,
            })
        })
        .collect()
}

/// Streams the dataset through the model and sums zero counts. Only the
/// requested layers are retained and each trace is dropped after counting.
pub fn layer_sparsity(samples: &[Sample], model: &Model, layers: &[String], threshold: f32) -> Result<SparsityReport> {
    if samples.is_empty() {
        return Err(Error::Precondition("sparsity needs a nonempty dataset".into()));
    }
    let layers = ordered_layers(&model.net, layers)?;
    let zero: Vec<(u64, u64)> = vec![(0, 0); layers.len()];
    let sums = samples
        .par_iter()
        .map(|s| {
            image_counts(model, s, &layers, threshold)
                .map(|cs| cs.into_iter().map(|c| (c.zeros, c.total)).collect::<Vec<_>>())
        })
        .try_reduce(
            || zero.clone(),
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| (x.0 + y.0, x.1 + y.1)).collect()),
        )?;
    Ok(SparsityReport {
        layers: layers
            .into_iter()
            .zip(sums)
            .map(|(layer, (zeros, total))| LayerCount { layer, zeros, total })
            .collect(),
        images: samples.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityRow {
    pub layer: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

impl SparsityRow {
    /// `b - a` when both sides have the layer.
    pub fn diff(&self) -> Option<f64> {
        Some(self.b? - self.a?)
    }
}

/// Union of layer names, in `a`'s order followed by layers only in `b`.
pub fn compare_sparsity(a: &SparsityReport, b: &SparsityReport) -> Vec<SparsityRow> {
    let mut rows: Vec<SparsityRow> = a
        .layers
        .iter()
        .map(|c| SparsityRow {
            layer: c.layer.clone(),
            a: Some(c.sparsity()),
            b: b.get(&c.layer).map(LayerCount::sparsity),
        })
        .collect();
    rows.extend(b.layers.iter().filter(|c| a.get(&c.layer).is_none()).map(|c| SparsityRow {
        layer: c.layer.clone(),
        a: None,
        b: Some(c.sparsity()),
    }));
    rows
}

pub fn comparison_tsv(rows: &[SparsityRow]) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{:.6}", x));
    crate::io::tsv::render(
        &["layer", "a", "b", "diff"],
        rows.iter()
            .map(|r| vec![r.layer.clone(), cell(r.a), cell(r.b), cell(r.diff())]),
    )
}
