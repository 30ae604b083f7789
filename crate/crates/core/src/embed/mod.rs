//! Representation spaces over image patches.
//!
//! Every spatial position of a layer is a point whose coordinates are the
//! activations of all filters there, and whose pixels are the receptive
//! field it sees. This module samples those points, embeds them in 2-D with
//! [`tsne`], lays them out on a grid canvas, and ranks filters and patches by
//! activation.

pub mod tsne;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::deconv::{self, Selection, SelectionMode};
use crate::engine::{Model, Retain, Sample};
use crate::error::{Error, Result};
use crate::io::image::RgbImage;
use crate::netspec::NeuronBox;
use crate::tensor::Tensor;

pub use tsne::{tsne, TsneConfig, TsneResult};

/// Value used for patch pixels that fall outside the image.
pub const PAD_GRAY: f32 = 128.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PatchRecord {
    pub image_id: String,
    /// Index of the source image in the dataset slice.
    pub image_index: usize,
    pub layer: String,
    pub row: usize,
    pub col: usize,
    /// Activation of every filter of the layer at this position.
    pub activation: Vec<f32>,
    pub bbox: NeuronBox,
    /// Raw pixels of the receptive field, gray-padded where it leaves the image.
    pub pixels: Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    All,
    Random { n: usize, seed: u64 },
    /// The `n` positions with the largest activation L2 norm.
    TopNorm(usize),
}

impl std::str::FromStr for Sampling {
    type Err = Error;

    /// `all`, `random:N[:SEED]` or `top-norm:N`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Precondition(format!("cannot parse sampling `{}`", s));
        let num = |t: &str| t.parse::<u64>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(':').collect();
        match parts[..] {
            ["all"] => Ok(Sampling::All),
            ["random", n] => Ok(Sampling::Random { n: num(n)? as usize, seed: 0 }),
            ["random", n, seed] => Ok(Sampling::Random {
                n: num(n)? as usize,
                seed: num(seed)?,
            }),
            ["top-norm", n] => Ok(Sampling::TopNorm(num(n)? as usize)),
            _ => Err(bad()),
        }
    }
}

/// Crops `bbox` out of a `(C, H, W)` image at full field size.
pub fn crop_patch(image: &Tensor, bbox: &NeuronBox) -> Result<Tensor> {
    crop_patch_with(image, bbox, PAD_GRAY)
}

/// As [`crop_patch`] with an explicit value for out-of-image pixels.
pub fn crop_patch_with(image: &Tensor, bbox: &NeuronBox, fill: f32) -> Result<Tensor> {
    let (c, h, w) = image.chw()?;
    let mut out = Tensor::full(&[c, bbox.height, bbox.width], fill);
    for ch in 0..c {
        for r in 0..bbox.height {
            let y = bbox.top + r as i64;
            if y < 0 || y >= h as i64 {
                continue;
            }
            for q in 0..bbox.width {
                let x = bbox.left + q as i64;
                if x < 0 || x >= w as i64 {
                    continue;
                }
                *out.at3_mut(ch, r, q) = image.at3(ch, y as usize, x as usize);
            }
        }
    }
    Ok(out)
}

fn spatial_activation<'a>(model: &Model, trace: &'a crate::engine::ForwardTrace, layer: &str) -> Result<&'a Tensor> {
    let act = trace.activation(layer)?;
    if act.rank() != 3 || model.net.receptive_fields().iter().all(|(n, _)| n != layer) {
        return Err(Error::layer(
            layer,
            "patches need a conv, relu or pool layer before the fully-connected stage",
        ));
    }
    Ok(act)
}

fn check_spatial_layer(model: &Model, layer: &str) -> Result<(usize, usize, usize)> {
    model
        .net
        .layer_index(layer)
        .ok_or_else(|| Error::UnknownLayer(layer.to_string()))?;
    if model.net.receptive_fields().iter().all(|(n, _)| n != layer) {
        return Err(Error::layer(
            layer,
            "patches need a conv, relu or pool layer before the fully-connected stage",
        ));
    }
    let shape = model.net.layer_shape(layer)?;
    Ok((shape[0], shape[1], shape[2]))
}

fn activation_vector(act: &Tensor, row: usize, col: usize) -> Vec<f32> {
    let (c, _, _) = act.chw().expect("rank 3");
    (0..c).map(|k| act.at3(k, row, col)).collect()
}

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&a| (a as f64) * (a as f64)).sum::<f64>().sqrt()
}

fn make_record(
    model: &Model,
    sample: &Sample,
    image_index: usize,
    layer: &str,
    (row, col): (usize, usize),
    activation: Vec<f32>,
) -> Result<PatchRecord> {
    let bbox = model.net.neuron_bbox(layer, row, col)?;
    Ok(PatchRecord {
        image_id: sample.id.clone(),
        image_index,
        layer: layer.to_string(),
        row,
        col,
        activation,
        pixels: crop_patch(&sample.image, &bbox)?,
        bbox,
    })
}

/// Samples patch records of `layer` across `samples`. Forward passes run in
/// parallel on the current rayon pool; output order is deterministic.
pub fn extract_patches(
    samples: &[Sample],
    model: &Model,
    layer: &str,
    sampling: Sampling,
) -> Result<Vec<PatchRecord>> {
    if samples.is_empty() {
        return Err(Error::Precondition("no images to extract patches from".into()));
    }
    let (_, h, w) = check_spatial_layer(model, layer)?;
    let positions = h * w;
    let retain = Retain::only([layer]);

    // Positions wanted from each image, or None for all of them.
    let wanted: Vec<Option<Vec<usize>>> = match sampling {
        Sampling::Random { n, seed } => {
            let total = samples.len() * positions;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picks = rand::seq::index::sample(&mut rng, total, n.min(total)).into_vec();
            picks.sort_unstable();
            let mut per_image = vec![Some(Vec::new()); samples.len()];
            for p in picks {
                per_image[p / positions].as_mut().expect("some").push(p % positions);
            }
            per_image
        }
        Sampling::All | Sampling::TopNorm(_) => vec![None; samples.len()],
    };

    let per_image: Vec<Vec<PatchRecord>> = samples
        .par_iter()
        .enumerate()
        .map(|(idx, sample)| -> Result<Vec<PatchRecord>> {
            if matches!(&wanted[idx], Some(list) if list.is_empty()) {
                return Ok(Vec::new());
            }
            let trace = model.forward_retaining(&sample.image, &retain)?;
            let act = spatial_activation(model, &trace, layer)?;
            let mut candidates: Vec<(usize, Vec<f32>)> = match &wanted[idx] {
                Some(list) => list
                    .iter()
                    .map(|&p| (p, activation_vector(act, p / w, p % w)))
                    .collect(),
                None => (0..positions)
                    .map(|p| (p, activation_vector(act, p / w, p % w)))
                    .collect(),
            };
            if let Sampling::TopNorm(n) = sampling {
                // the global top n is contained in the union of per-image top n
                sort_by_norm(&mut candidates);
                candidates.truncate(n);
            }
            candidates
                .into_iter()
                .map(|(p, v)| make_record(model, sample, idx, layer, (p / w, p % w), v))
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut records: Vec<PatchRecord> = per_image.into_iter().flatten().collect();
    if let Sampling::TopNorm(n) = sampling {
        let norms: Vec<f64> = records.iter().map(|r| norm(&r.activation)).collect();
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
        order.truncate(n);
        let mut slots: Vec<Option<PatchRecord>> = records.into_iter().map(Some).collect();
        records = order
            .into_iter()
            .map(|i| slots[i].take().expect("unique"))
            .collect();
    }
    Ok(records)
}

fn sort_by_norm(candidates: &mut [(usize, Vec<f32>)]) {
    // stable: equal norms keep row-major position order
    candidates.sort_by(|a, b| norm(&b.1).total_cmp(&norm(&a.1)));
}

/// Assigns every cell of a `grid x grid` canvas the patch whose embedded
/// point is nearest to the cell center, after rescaling the embedding to the
/// unit square per axis. Ties go to the lowest index. Cells are row-major
/// with `y` growing downwards.
pub fn grid_fill(embedding: &[[f64; 2]], grid: usize) -> Result<Vec<usize>> {
    if embedding.is_empty() {
        return Err(Error::Precondition("grid fill needs at least one patch".into()));
    }
    if grid == 0 {
        return Err(Error::Precondition("grid size must be >= 1".into()));
    }
    let unit = rescale_unit(embedding);
    let mut cells = Vec::with_capacity(grid * grid);
    for r in 0..grid {
        for c in 0..grid {
            let center = [(c as f64 + 0.5) / grid as f64, (r as f64 + 0.5) / grid as f64];
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, p) in unit.iter().enumerate() {
                let d = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            cells.push(best);
        }
    }
    Ok(cells)
}

/// Per-axis min-max rescale into `[0, 1]`; a degenerate axis maps to 0.5.
pub fn rescale_unit(embedding: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in embedding {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    embedding
        .iter()
        .map(|p| {
            let mut q = [0.5; 2];
            for d in 0..2 {
                if hi[d] > lo[d] {
                    q[d] = (p[d] - lo[d]) / (hi[d] - lo[d]);
                }
            }
            q
        })
        .collect()
}

/// Thumbnail of a raw-valued patch, nearest-neighbor scaled to `size`.
pub fn thumbnail(pixels: &Tensor, size: usize) -> Result<RgbImage> {
    Ok(RgbImage::from_tensor(pixels)?.resize_nearest(size, size))
}

/// Composite canvas of `grid x grid` thumbnails.
pub fn render_grid(cells: &[usize], patches: &[PatchRecord], grid: usize, thumb: usize) -> Result<RgbImage> {
    let mut canvas = RgbImage::new(grid * thumb, grid * thumb, [255; 3]);
    let thumbs: Vec<RgbImage> = patches
        .iter()
        .map(|p| thumbnail(&p.pixels, thumb))
        .collect::<Result<_>>()?;
    for (cell, &patch) in cells.iter().enumerate() {
        let (r, c) = (cell / grid, cell % grid);
        canvas.blit(&thumbs[patch], c * thumb, r * thumb);
    }
    Ok(canvas)
}

/// Indices of the `n` largest entries, descending, ties to the lower index.
pub fn top_activated_filters(activation: &[f32], n: usize) -> Result<Vec<usize>> {
    if n > activation.len() {
        return Err(Error::Precondition(format!(
            "asked for {} filters of {}",
            n,
            activation.len()
        )));
    }
    let mut order: Vec<usize> = (0..activation.len()).collect();
    order.sort_by(|&a, &b| activation[b].total_cmp(&activation[a]).then(a.cmp(&b)));
    order.truncate(n);
    Ok(order)
}

/// The `n` positions across the dataset where filter `filter` of `layer`
/// responds most strongly, highest first. Ties are ordered by image id, then
/// row, then column, so the result does not depend on dataset order.
pub fn top_patches_for_filter(
    samples: &[Sample],
    model: &Model,
    layer: &str,
    filter: usize,
    n: usize,
) -> Result<Vec<PatchRecord>> {
    if samples.is_empty() {
        return Err(Error::Precondition("no images to search".into()));
    }
    let (channels, h, w) = check_spatial_layer(model, layer)?;
    if filter >= channels {
        return Err(Error::Selection(format!(
            "filter {} out of range (layer `{}` has {})",
            filter, layer, channels
        )));
    }
    let available = samples.len() * h * w;
    if n > available {
        return Err(Error::Precondition(format!(
            "asked for {} patches but only {} positions exist",
            n, available
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let retain = Retain::only([layer]);
    let key = |r: &PatchRecord| (r.activation[filter], r.image_id.clone(), r.row, r.col);
    let cmp = |a: &PatchRecord, b: &PatchRecord| {
        let (va, ia, ra, ca) = key(a);
        let (vb, ib, rb, cb) = key(b);
        vb.total_cmp(&va)
            .then_with(|| ia.cmp(&ib))
            .then(ra.cmp(&rb))
            .then(ca.cmp(&cb))
    };
    let per_image: Vec<Vec<PatchRecord>> = samples
        .par_iter()
        .enumerate()
        .map(|(idx, sample)| -> Result<Vec<PatchRecord>> {
            let trace = model.forward_retaining(&sample.image, &retain)?;
            let act = spatial_activation(model, &trace, layer)?;
            let plane = act.channel(filter);
            let mut order: Vec<usize> = (0..plane.len()).collect();
            order.sort_by(|&a, &b| plane[b].total_cmp(&plane[a]).then(a.cmp(&b)));
            order.truncate(n);
            order
                .into_iter()
                .map(|p| make_record(model, sample, idx, layer, (p / w, p % w), activation_vector(act, p / w, p % w)))
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut all: Vec<PatchRecord> = per_image.into_iter().flatten().collect();
    all.sort_by(cmp);
    all.truncate(n);
    Ok(all)
}

/// Filter-mode deconv reconstruction of a patch's source image, cropped to
/// the patch's receptive field.
pub fn reconstruct_patch(model: &Model, sample: &Sample, patch: &PatchRecord, filter: usize) -> Result<Tensor> {
    let trace = model.forward(&sample.image)?;
    let sel = Selection::new(patch.layer.clone(), SelectionMode::Filter(filter));
    let full = deconv::reconstruct(&model.net, &model.weights, &trace, &sel)?;
    crop_patch_with(&full, &patch.bbox, 0.0)
}

/// Embedding dump: `patch_id, image_id, row, col, x, y`.
pub fn embedding_tsv(patches: &[PatchRecord], embedding: &[[f64; 2]]) -> String {
    crate::io::tsv::render(
        &["patch_id", "image_id", "row", "col", "x", "y"],
        patches.iter().zip(embedding).enumerate().map(|(i, (p, e))| {
            vec![
                i.to_string(),
                p.image_id.clone(),
                p.row.to_string(),
                p.col.to_string(),
                format!("{:.6}", e[0]),
                format!("{:.6}", e[1]),
            ]
        }),
    )
}
