//! Forward kernels for conv / ReLU / max-pool / fully-connected layers and
//! their reverse (deconvnet) counterparts.
//!
//! The reverse of a linear layer is its adjoint with the bias dropped. For
//! convolution that is the sum over output maps of each map convolved with
//! the horizontally and vertically flipped filter slice, which is what the
//! scatter loop in [`conv_reverse`] computes.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Convolution filters `(out, in, kh, kw)` and per-filter bias `(out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub kernels: Tensor,
    pub bias: Tensor,
}

impl ConvWeights {
    pub fn new(kernels: Tensor, bias: Tensor) -> Result<Self> {
        let &[out, _, kh, kw] = kernels.shape() else {
            return Err(Error::Shape(format!(
                "conv kernels must be (out, in, kh, kw), got {:?}",
                kernels.shape()
            )));
        };
        if out < 1 || kh < 1 || kw < 1 {
            return Err(Error::Shape(format!("empty conv kernel {:?}", kernels.shape())));
        }
        if bias.shape() != [out] {
            return Err(Error::Shape(format!(
                "conv bias must be ({}), got {:?}",
                out,
                bias.shape()
            )));
        }
        Ok(Self { kernels, bias })
    }

    /// `(out, in, kh, kw)`
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        let s = self.kernels.shape();
        (s[0], s[1], s[2], s[3])
    }

    #[inline]
    fn weight(&self, k: usize, c: usize, u: usize, v: usize) -> f32 {
        let (_, cin, kh, kw) = self.dims();
        self.kernels.data()[((k * cin + c) * kh + u) * kw + v]
    }
}

/// Fully-connected weights `(out, in)` and bias `(out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FcWeights {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl FcWeights {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        let &[out, inp] = weights.shape() else {
            return Err(Error::Shape(format!(
                "fc weights must be (out, in), got {:?}",
                weights.shape()
            )));
        };
        if out < 1 || inp < 1 {
            return Err(Error::Shape(format!("empty fc weights {:?}", weights.shape())));
        }
        if bias.shape() != [out] {
            return Err(Error::Shape(format!(
                "fc bias must be ({}), got {:?}",
                out,
                bias.shape()
            )));
        }
        Ok(Self { weights, bias })
    }

    /// `(out, in)`
    pub fn dims(&self) -> (usize, usize) {
        let s = self.weights.shape();
        (s[0], s[1])
    }
}

/// Argmax locations recorded by [`maxpool_forward`], in input coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Switches {
    channels: usize,
    out_h: usize,
    out_w: usize,
    locations: Vec<(u32, u32)>,
}

impl Switches {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.out_h, self.out_w)
    }

    /// Input `(row, col)` that won window `(row, col)` of channel `c`.
    pub fn get(&self, c: usize, row: usize, col: usize) -> (usize, usize) {
        let (r, q) = self.locations[(c * self.out_h + row) * self.out_w + col];
        (r as usize, q as usize)
    }
}

fn out_dim(layer: &str, size: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::layer(layer, "stride must be >= 1"));
    }
    (size + 2 * pad)
        .checked_sub(k)
        .map(|span| span / stride + 1)
        .ok_or_else(|| Error::Underflow {
            layer: layer.to_string(),
            detail: format!("window {} does not fit input {} with pad {}", k, size, pad),
        })
}

/// Cross-correlation plus bias with zero padding.
pub fn conv_forward(x: &Tensor, w: &ConvWeights, stride: usize, pad: usize) -> Result<Tensor> {
    let (cin, h, wd) = x.chw()?;
    let (cout, wcin, kh, kw) = w.dims();
    if cin != wcin {
        return Err(Error::Shape(format!(
            "conv input has {} channels, kernels expect {}",
            cin, wcin
        )));
    }
    let oh = out_dim("conv", h, kh, stride, pad)?;
    let ow = out_dim("conv", wd, kw, stride, pad)?;
    let mut out = Tensor::zeros(&[cout, oh, ow]);
    let xs = x.data();
    for k in 0..cout {
        let bias = w.bias.data()[k] as f64;
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = bias;
                for c in 0..cin {
                    let plane = &xs[c * h * wd..(c + 1) * h * wd];
                    for u in 0..kh {
                        let Some(row) = (i * stride + u).checked_sub(pad).filter(|&r| r < h) else {
                            continue;
                        };
                        for v in 0..kw {
                            let Some(col) = (j * stride + v).checked_sub(pad).filter(|&q| q < wd)
                            else {
                                continue;
                            };
                            acc += plane[row * wd + col] as f64 * w.weight(k, c, u, v) as f64;
                        }
                    }
                }
                *out.at3_mut(k, i, j) = acc as f32;
            }
        }
    }
    Ok(out)
}

/// Projects a conv layer's maps back onto its input grid.
///
/// Each output value scatters its filter, scaled, into the input window it
/// was computed from; bias is ignored. `in_shape` is the forward input shape.
pub fn conv_reverse(
    y: &Tensor,
    w: &ConvWeights,
    stride: usize,
    pad: usize,
    in_shape: &[usize],
) -> Result<Tensor> {
    let &[cin, h, wd] = in_shape else {
        return Err(Error::Shape(format!("conv input shape must be rank 3, got {:?}", in_shape)));
    };
    let (cout, wcin, kh, kw) = w.dims();
    if cin != wcin {
        return Err(Error::Shape(format!(
            "conv input has {} channels, kernels expect {}",
            cin, wcin
        )));
    }
    let oh = out_dim("conv", h, kh, stride, pad)?;
    let ow = out_dim("conv", wd, kw, stride, pad)?;
    if y.shape() != [cout, oh, ow] {
        return Err(Error::Shape(format!(
            "conv reverse expects maps of shape {:?}, got {:?}",
            [cout, oh, ow],
            y.shape()
        )));
    }
    let mut acc = vec![0f64; cin * h * wd];
    for k in 0..cout {
        for i in 0..oh {
            for j in 0..ow {
                let value = y.at3(k, i, j) as f64;
                if value == 0.0 {
                    continue;
                }
                for c in 0..cin {
                    let plane = &mut acc[c * h * wd..(c + 1) * h * wd];
                    for u in 0..kh {
                        let Some(row) = (i * stride + u).checked_sub(pad).filter(|&r| r < h) else {
                            continue;
                        };
                        for v in 0..kw {
                            let Some(col) = (j * stride + v).checked_sub(pad).filter(|&q| q < wd)
                            else {
                                continue;
                            };
                            plane[row * wd + col] += value * w.weight(k, c, u, v) as f64;
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(in_shape, acc.into_iter().map(|v| v as f32).collect())
}

/// Elementwise `max(v, 0)`.
pub fn relu_forward(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Reverse rectification: reconstructed maps are clamped to be nonnegative,
/// exactly like the forward pass.
pub fn relu_reverse(r: &Tensor) -> Tensor {
    relu_forward(r)
}

/// Max-pooling with recorded switches. Ties go to the first maximum in a
/// row-major scan of the window.
pub fn maxpool_forward(
    x: &Tensor,
    window: (usize, usize),
    stride: usize,
) -> Result<(Tensor, Switches)> {
    let (c, h, w) = x.chw()?;
    if window.0 == 0 || window.1 == 0 {
        return Err(Error::layer("pool", "window dimensions must be >= 1"));
    }
    let oh = out_dim("pool", h, window.0, stride, 0)?;
    let ow = out_dim("pool", w, window.1, stride, 0)?;
    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut locations = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let plane = x.channel(ch);
        for i in 0..oh {
            for j in 0..ow {
                let (r0, c0) = (i * stride, j * stride);
                let mut best = (r0, c0);
                let mut best_val = plane[r0 * w + c0];
                for r in r0..r0 + window.0 {
                    for q in c0..c0 + window.1 {
                        let v = plane[r * w + q];
                        if v > best_val {
                            best_val = v;
                            best = (r, q);
                        }
                    }
                }
                *out.at3_mut(ch, i, j) = best_val;
                locations.push((best.0 as u32, best.1 as u32));
            }
        }
    }
    let switches = Switches {
        channels: c,
        out_h: oh,
        out_w: ow,
        locations,
    };
    Ok((out, switches))
}

/// Unpooling: each pooled value goes back to its recorded argmax location.
/// Overlapping windows that share a location sum their contributions.
pub fn maxpool_reverse(
    y: &Tensor,
    switches: &Switches,
    in_shape: &[usize],
    window: (usize, usize),
    stride: usize,
) -> Result<Tensor> {
    let &[c, h, w] = in_shape else {
        return Err(Error::Shape(format!("pool input shape must be rank 3, got {:?}", in_shape)));
    };
    let oh = out_dim("pool", h, window.0, stride, 0)?;
    let ow = out_dim("pool", w, window.1, stride, 0)?;
    if switches.shape() != (c, oh, ow) || y.shape() != [c, oh, ow] {
        return Err(Error::Shape(format!(
            "unpool geometry mismatch: input {:?} with {}x{}/{} pooling gives ({}, {}, {}), \
             switches are {:?} and maps are {:?}",
            in_shape,
            window.0,
            window.1,
            stride,
            c,
            oh,
            ow,
            switches.shape(),
            y.shape()
        )));
    }
    let mut out = Tensor::zeros(in_shape);
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let (r, q) = switches.get(ch, i, j);
                *out.at3_mut(ch, r, q) += y.at3(ch, i, j);
            }
        }
    }
    Ok(out)
}

/// `W x + b` over the flattened input.
pub fn fc_forward(x: &Tensor, w: &FcWeights) -> Result<Tensor> {
    let (out, inp) = w.dims();
    if x.len() != inp {
        return Err(Error::Shape(format!(
            "fc expects {} inputs, got {} (shape {:?})",
            inp,
            x.len(),
            x.shape()
        )));
    }
    let weights = w.weights.data();
    let values = (0..out)
        .map(|o| {
            let row = &weights[o * inp..(o + 1) * inp];
            let dot: f64 = row
                .iter()
                .zip(x.data())
                .map(|(&a, &b)| a as f64 * b as f64)
                .sum();
            (dot + w.bias.data()[o] as f64) as f32
        })
        .collect();
    Tensor::from_vec(&[out], values)
}

/// `Wᵀ y` reshaped to the forward input's shape; bias is ignored.
pub fn fc_reverse(y: &Tensor, w: &FcWeights, in_shape: &[usize]) -> Result<Tensor> {
    let (out, inp) = w.dims();
    if y.len() != out {
        return Err(Error::Shape(format!("fc reverse expects {} values, got {}", out, y.len())));
    }
    if in_shape.iter().product::<usize>() != inp {
        return Err(Error::Shape(format!(
            "fc reverse target shape {:?} does not hold {} values",
            in_shape, inp
        )));
    }
    let weights = w.weights.data();
    let mut acc = vec![0f64; inp];
    for (o, &value) in y.data().iter().enumerate() {
        if value == 0.0 {
            continue;
        }
        let row = &weights[o * inp..(o + 1) * inp];
        for (a, &wt) in acc.iter_mut().zip(row) {
            *a += value as f64 * wt as f64;
        }
    }
    Tensor::from_vec(in_shape, acc.into_iter().map(|v| v as f32).collect())
}

/// Numerically stable softmax (max subtraction, `f64` accumulation).
pub fn softmax(x: &Tensor) -> Tensor {
    let max = x.data().iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let exps: Vec<f64> = x.data().iter().map(|&v| (v as f64 - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let data = exps.into_iter().map(|e| (e / sum) as f32).collect();
    Tensor::from_vec(x.shape(), data).expect("same shape")
}
