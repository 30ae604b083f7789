//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use cnnprobe::deconv::{reconstruct, Selection, SelectionMode};
use cnnprobe::embed::tsne::{initial_layout, joint_affinities, kl_divergence, kl_gradient};
use cnnprobe::embed::{extract_patches, grid_fill, tsne, Sampling, TsneConfig};
use cnnprobe::engine::{run_forward, Model, Sample};
use cnnprobe::fixtures::{self, Fixture};
use cnnprobe::io::image::{decode_ppm, encode_ppm, ImageFormatError, RgbImage};
use cnnprobe::io::tsv;
use cnnprobe::io::weights::{decode_weights, encode_weights, WeightFile};
use cnnprobe::ops::{
    conv_forward, conv_reverse, fc_forward, fc_reverse, maxpool_forward, maxpool_reverse, ConvWeights, FcWeights,
    Switches,
};
use cnnprobe::profile::layer_sparsity;
use cnnprobe::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

// --- receptive-field tables -------------------------------------------------

const VGG: [(&str, &str, &str); 18] = [
    ("c1_1", "3", "1"), ("c1_2", "5", "1"), ("p1", "6", "2"),
    ("c2_1", "10", "2"), ("c2_2", "14", "2"), ("p2", "16", "4"),
    ("c3_1", "24", "4"), ("c3_2", "32", "4"), ("c3_3", "40", "4"), ("p3", "44", "8"),
    ("c4_1", "60", "8"), ("c4_2", "76", "8"), ("c4_3", "92", "8"), ("p4", "100", "16"),
    ("c5_1", "132", "16"), ("c5_2", "164", "16"), ("c5_3", "196", "16"), ("p5", "212", "32"),
];

const ALEX: [(&str, &str, &str); 8] = [
    ("c1", "11", "4"), ("p1", "15", "8"), ("c2", "47", "8"), ("p2", "55", "16"),
    ("c3", "87", "16"), ("c4", "119", "16"), ("c5", "151", "16"), ("p5", "167", "32"),
];

fn receptive_field_tables() -> Check {
    let mut slowest = Duration::ZERO;
    for (builtin, table) in [("vggcnn16", &VGG[..]), ("alexcnn", &ALEX[..])] {
        let start = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_cnnprobe"))
            .args(["arch", "--builtin", builtin])
            .output()
            .map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        slowest = slowest.max(elapsed);
        ensure(out.status.success(), || format!("arch {} failed", builtin))?;
        ensure(elapsed < Duration::from_secs(1), || format!("arch {} took {:?}", builtin, elapsed))?;
        let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
        let rows = tsv::parse(&text);
        for &(layer, size, stride) in table {
            let row = rows
                .iter()
                .find(|r| r[0] == layer)
                .ok_or_else(|| format!("{}: no row {}", builtin, layer))?;
            ensure((row[3], row[4]) == (size, stride), || {
                format!("{} {}: got {}/{}, want {}/{}", builtin, layer, row[3], row[4], size, stride)
            })?;
        }
    }
    Ok(format!("18 + 8 pairs exact, slowest run {:?}", slowest))
}

// --- adjoint suite ----------------------------------------------------------

fn gather(x: &Tensor, sw: &Switches) -> Tensor {
    let (c, oh, ow) = sw.shape();
    let mut out = Tensor::zeros(&[c, oh, ow]);
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let (r, q) = sw.get(ch, i, j);
                *out.at3_mut(ch, i, j) = x.at3(ch, r, q);
            }
        }
    }
    out
}

fn adjoint_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAD);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (cin, cout) = (rng.random_range(1..5), rng.random_range(1..5));
        let (kh, kw) = (rng.random_range(1..5), rng.random_range(1..5));
        let (stride, pad) = (rng.random_range(1..4), rng.random_range(0..3));
        let (h, w) = (rng.random_range(kh.max(2)..14), rng.random_range(kw.max(2)..14));
        let x = random(&[cin, h, w], &mut rng);
        let cw = ConvWeights::new(random(&[cout, cin, kh, kw], &mut rng), Tensor::zeros(&[cout])).unwrap();
        let fx = conv_forward(&x, &cw, stride, pad).map_err(|e| e.to_string())?;
        let y = random(fx.shape(), &mut rng);
        let ry = conv_reverse(&y, &cw, stride, pad, x.shape()).map_err(|e| e.to_string())?;
        let e = rel_err(fx.dot(&y), x.dot(&ry));
        worst = worst.max(e);
        ensure(e <= 1e-4, || format!("conv instance {}: relative error {:e}", i, e))?;
    }
    for i in 0..100 {
        let shape = [rng.random_range(1..5), rng.random_range(1..7), rng.random_range(1..7)];
        let n: usize = shape.iter().product();
        let out = rng.random_range(1..30);
        let x = random(&shape, &mut rng);
        let fw = FcWeights::new(random(&[out, n], &mut rng), Tensor::zeros(&[out])).unwrap();
        let fx = fc_forward(&x, &fw).map_err(|e| e.to_string())?;
        let y = random(&[out], &mut rng);
        let ry = fc_reverse(&y, &fw, &shape).map_err(|e| e.to_string())?;
        let e = rel_err(fx.dot(&y), x.dot(&ry));
        worst = worst.max(e);
        ensure(e <= 1e-4, || format!("fc instance {}: relative error {:e}", i, e))?;
    }
    for i in 0..100 {
        let k = rng.random_range(1..4);
        let s = rng.random_range(1..4);
        let shape = [rng.random_range(1..4), rng.random_range(k.max(2)..13), rng.random_range(k.max(2)..13)];
        let x = random(&shape, &mut rng);
        let (_, sw) = maxpool_forward(&x, (k, k), s).map_err(|e| e.to_string())?;
        let z = random(&shape, &mut rng);
        let gz = gather(&z, &sw);
        let y = random(gz.shape(), &mut rng);
        let ry = maxpool_reverse(&y, &sw, &shape, (k, k), s).map_err(|e| e.to_string())?;
        let e = rel_err(gz.dot(&y), z.dot(&ry));
        worst = worst.max(e);
        ensure(e <= 1e-4, || format!("unpool instance {}: relative error {:e}", i, e))?;
    }
    Ok(format!("300 instances, worst relative error {:.2e}", worst))
}

// --- forward oracles --------------------------------------------------------

fn naive_conv(x: &Tensor, k: &Tensor, b: &Tensor, stride: usize, pad: usize) -> (Vec<usize>, Vec<f64>) {
    let (cin, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (cout, kh, kw) = (k.shape()[0], k.shape()[2], k.shape()[3]);
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = Vec::with_capacity(cout * oh * ow);
    for o in 0..cout {
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = b.data()[o] as f64;
                for c in 0..cin {
                    for u in 0..kh {
                        for v in 0..kw {
                            let (y, q) = ((i * stride + u) as i64 - pad as i64, (j * stride + v) as i64 - pad as i64);
                            if y >= 0 && q >= 0 && (y as usize) < h && (q as usize) < w {
                                acc += k.data()[((o * cin + c) * kh + u) * kw + v] as f64
                                    * x.at3(c, y as usize, q as usize) as f64;
                            }
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    (vec![cout, oh, ow], out)
}

fn naive_pool(x: &Tensor, k: usize, s: usize) -> (Vec<usize>, Vec<f32>) {
    let (c, h, w) = x.chw().unwrap();
    let (oh, ow) = ((h - k) / s + 1, (w - k) / s + 1);
    let mut out = Vec::new();
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let mut m = f32::NEG_INFINITY;
                for u in 0..k {
                    for v in 0..k {
                        m = m.max(x.at3(ch, i * s + u, j * s + v));
                    }
                }
                out.push(m);
            }
        }
    }
    (vec![c, oh, ow], out)
}

fn oracle_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0AC);
    let mut cases = 0;
    for cin in 1..=4 {
        for h in 1..=12 {
            for w in [h, (h + 5) % 12 + 1] {
                let x = random(&[cin, h, w], &mut rng);
                for k in 1..=3.min(h).min(w) {
                    for s in 1..=2 {
                        for p in 0..=1 {
                            let kern = random(&[3, cin, k, k], &mut rng);
                            let bias = random(&[3], &mut rng);
                            let cw = ConvWeights::new(kern.clone(), bias.clone()).unwrap();
                            let got = conv_forward(&x, &cw, s, p).map_err(|e| e.to_string())?;
                            let (shape, want) = naive_conv(&x, &kern, &bias, s, p);
                            ensure(got.shape() == &shape[..], || format!("conv shape {:?} vs {:?}", got.shape(), shape))?;
                            for (g, e) in got.data().iter().zip(&want) {
                                ensure((*g as f64 - e).abs() <= 1e-5 * e.abs().max(1.0), || {
                                    format!("conv ({},{},{}) k{} s{} p{}: {} vs {}", cin, h, w, k, s, p, g, e)
                                })?;
                            }
                            cases += 1;
                        }
                        let (got, _) = maxpool_forward(&x, (k, k), s).map_err(|e| e.to_string())?;
                        let (shape, want) = naive_pool(&x, k, s);
                        ensure(got.shape() == &shape[..] && got.data() == &want[..], || {
                            format!("pool ({},{},{}) k{} s{}", cin, h, w, k, s)
                        })?;
                        cases += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{} conv/pool cases", cases))
}

// --- reconstruction locality --------------------------------------------------

fn reconstruction_locality() -> Check {
    let mut neurons = 0usize;
    for fixture in Fixture::ALL {
        let net = fixtures::net(fixture);
        let [_, h, w] = net.input_dims();
        if h > 20 || w > 20 {
            continue;
        }
        let weights = fixtures::random_weights(&net, 31);
        let trace = run_forward(&net, &weights, &fixtures::random_input(&net, 32)).map_err(|e| e.to_string())?;
        for (layer, _) in net.receptive_fields() {
            let shape = net.layer_shape(&layer).map_err(|e| e.to_string())?;
            for k in 0..shape[0] {
                for r in 0..shape[1] {
                    for c in 0..shape[2] {
                        let sel = Selection::new(layer.clone(), SelectionMode::Neuron { channel: k, row: r, col: c });
                        let recon = reconstruct(&net, &weights, &trace, &sel).map_err(|e| e.to_string())?;
                        let rect = net.neuron_bbox(&layer, r, c).map_err(|e| e.to_string())?.rect;
                        let (ch, ih, iw) = recon.chw().unwrap();
                        for z in 0..ch {
                            for y in 0..ih {
                                for x in 0..iw {
                                    if !rect.contains(y, x) && recon.at3(z, y, x) != 0.0 {
                                        return Err(format!(
                                            "{} {} neuron ({},{},{}): pixel ({},{}) = {}",
                                            fixture.name(), layer, k, r, c, y, x, recon.at3(z, y, x)
                                        ));
                                    }
                                }
                            }
                        }
                        neurons += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{} neurons, no pixel outside its box", neurons))
}

// --- t-SNE ------------------------------------------------------------------

fn cloud(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn mst_two_groups(y: &[[f64; 2]]) -> Vec<usize> {
    let n = y.len();
    let d = |a: usize, b: usize| ((y[a][0] - y[b][0]).powi(2) + (y[a][1] - y[b][1]).powi(2)).sqrt();
    let mut in_tree = vec![false; n];
    let mut best: Vec<(f64, usize)> = (0..n).map(|j| (d(0, j), 0)).collect();
    in_tree[0] = true;
    let mut edges = Vec::new();
    for _ in 1..n {
        let next = (0..n).filter(|&j| !in_tree[j]).min_by(|&a, &b| best[a].0.total_cmp(&best[b].0)).unwrap();
        in_tree[next] = true;
        edges.push((best[next].0, best[next].1, next));
        for j in 0..n {
            if !in_tree[j] && d(next, j) < best[j].0 {
                best[j] = (d(next, j), next);
            }
        }
    }
    let cut = (0..edges.len()).max_by(|&a, &b| edges[a].0.total_cmp(&edges[b].0)).unwrap();
    // flood fill from point 0 over the remaining edges
    let mut group = vec![1usize; n];
    group[0] = 0;
    let mut changed = true;
    while changed {
        changed = false;
        for (i, &(_, a, b)) in edges.iter().enumerate() {
            if i != cut && group[a] != group[b] {
                group[a] = 0;
                group[b] = 0;
                changed = true;
            }
        }
    }
    group
}

fn tsne_criteria() -> Check {
    // gradient vs central differences
    let aff = joint_affinities(&cloud(25, 6, 1), 6.0).map_err(|e| e.to_string())?;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for iterate in 0..10 {
        let y = initial_layout(25, 1.0, 500 + iterate);
        let g = kl_gradient(&aff.p, &y, 1.0);
        let (mut err, mut norm) = (0.0f64, 0.0f64);
        for i in 0..y.len() {
            for d in 0..2 {
                let (mut a, mut b) = (y.clone(), y.clone());
                a[i][d] += h;
                b[i][d] -= h;
                let fd = (kl_divergence(&aff.p, &a) - kl_divergence(&aff.p, &b)) / (2.0 * h);
                err += (fd - g[i][d]).powi(2);
                norm += fd * fd;
            }
        }
        let rel = err.sqrt() / norm.sqrt();
        worst = worst.max(rel);
        ensure(rel <= 1e-4, || format!("iterate {}: gradient relative error {:e}", iterate, rel))?;
    }

    // two clusters, 40 points
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let noise = rand_distr::Normal::new(0.0f32, 0.1).unwrap();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..40 {
        let label = usize::from(i >= 20);
        let mut p: Vec<f32> = (0..5).map(|_| rand_distr::Distribution::sample(&noise, &mut rng)).collect();
        p[0] += 10.0 * label as f32;
        points.push(p);
        labels.push(label);
    }
    let config = TsneConfig { perplexity: 10.0, ..TsneConfig::default() };
    let y = tsne(&points, &config).map_err(|e| e.to_string())?.embedding;
    let groups = mst_two_groups(&y);
    let agree = groups.iter().zip(&labels).filter(|(a, b)| a == b).count();
    let wrong = agree.min(40 - agree);
    ensure(wrong == 0, || format!("{} of 40 points misassigned", wrong))?;

    // perplexity calibration
    let mut worst_bits: f64 = 0.0;
    for (n, perp) in [(40, 5.0), (60, 10.0), (100, 30.0)] {
        let aff = joint_affinities(&cloud(n, 8, n as u64), perp).map_err(|e| e.to_string())?;
        for a in &aff.achieved_perplexity {
            worst_bits = worst_bits.max((a.log2() - f64::log2(perp)).abs());
        }
    }
    ensure(worst_bits < 1e-3, || format!("perplexity off by {:e} bits", worst_bits))?;
    Ok(format!(
        "gradient worst {:.2e}, 0/40 misassigned, perplexity within {:.1e} bits",
        worst, worst_bits
    ))
}

// --- sparsity -----------------------------------------------------------------

fn sparsity_criteria() -> Check {
    let mut checked = 0;
    for (fixture, pairs) in [
        (Fixture::Small, &[("c1", "r1"), ("c2", "r2")][..]),
        (Fixture::Rgb, &[("c1", "r1"), ("c2", "r2")][..]),
        (Fixture::MiniVgg, &[("c1_1", "r1_1"), ("c1_2", "r1_2"), ("c2_1", "r2_1"), ("fc6", "r6")][..]),
        (Fixture::MiniAlex, &[("c1", "r1"), ("c2", "r2"), ("fc6", "r6")][..]),
    ] {
        let net = fixtures::net(fixture);
        let w = fixtures::random_weights(&net, 13);
        for seed in 0..10 {
            let trace = run_forward(&net, &w, &fixtures::random_input(&net, seed)).map_err(|e| e.to_string())?;
            for &(pre, post) in pairs {
                let np = trace.activation(pre).unwrap().data().iter().filter(|&&v| v <= 0.0).count();
                let z = trace.activation(post).unwrap().data().iter().filter(|&&v| v == 0.0).count();
                ensure(np == z, || format!("{} {}: {} zeros vs {} non-positive", fixture.name(), post, z, np))?;
                checked += 1;
            }
        }
    }
    let mut pooled = 0;
    for (fixture, pairs) in [
        (Fixture::Small, &[("r1", "p1")][..]),
        (Fixture::Rgb, &[("r1", "p1")][..]),
        (Fixture::MiniVgg, &[("r1_2", "p1"), ("r2_1", "p2")][..]),
        (Fixture::MiniAlex, &[("r1", "p1"), ("r2", "p2")][..]),
    ] {
        let net = fixtures::net(fixture);
        let model = Model::new(net.clone(), fixtures::random_weights(&net, 14), None).map_err(|e| e.to_string())?;
        let data: Vec<Sample> = (0..50)
            .map(|i| Sample::new(format!("{}", i), fixtures::random_image(&net, 1000 + i)))
            .collect();
        let layers: Vec<String> = pairs.iter().flat_map(|&(a, b)| [a.to_string(), b.to_string()]).collect();
        let report = layer_sparsity(&data, &model, &layers, 0.0).map_err(|e| e.to_string())?;
        for &(before, after) in pairs {
            let (b, a) = (report.get(before).unwrap().sparsity(), report.get(after).unwrap().sparsity());
            ensure(a <= b, || format!("{}: {} {} > {} {}", fixture.name(), after, a, before, b))?;
            pooled += 1;
        }
    }
    Ok(format!("{} count equalities, {} pooling inequalities over 50 images", checked, pooled))
}

// --- I/O ----------------------------------------------------------------------

fn io_criteria() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10);
    for f in Fixture::ALL {
        let net = fixtures::net(f);
        let set = fixtures::random_weights(&net, rng.random());
        let mean = random(&net.input_dims(), &mut rng);
        let bytes = encode_weights(&set, Some(&mean));
        let (back, back_mean) = decode_weights(&bytes).map_err(|e| e.to_string())?;
        ensure(encode_weights(&back, back_mean.as_ref()) == bytes, || format!("CNNW round trip {}", f.name()))?;
    }
    for _ in 0..50 {
        let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
        let img = RgbImage::from_raw(w, h, (0..w * h * 3).map(|_| rng.random()).collect()).unwrap();
        let bytes = encode_ppm(&img);
        let back = decode_ppm(&bytes).map_err(|e| e.to_string())?;
        ensure(encode_ppm(&back) == bytes, || "PPM round trip".to_string())?;
    }

    // both fixtures keep their first 16 bytes inside the header
    let fixture = |name: &str| {
        std::fs::read(std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name))
            .map_err(|e| format!("{}: {}", name, e))
    };
    let (cnnw, ppm) = (fixture("tiny.cnnw")?, fixture("tiny.ppm")?);
    let original = decode_ppm(&ppm).map_err(|e| e.to_string())?;
    let mut rejected = 0;
    for i in 0..1000 {
        let mut m = cnnw.clone();
        for _ in 0..rng.random_range(1..=4) {
            let at = rng.random_range(0..16);
            m[at] ^= rng.random_range(1..=255u8);
        }
        if m == cnnw {
            continue;
        }
        let outcome = std::panic::catch_unwind(|| WeightFile::decode(&m).and_then(WeightFile::into_weights))
            .map_err(|_| format!("CNNW mutation {} panicked", i))?;
        ensure(outcome.is_err(), || format!("CNNW mutation {} accepted", i))?;
        rejected += 1;

        let mut m = ppm.clone();
        for _ in 0..rng.random_range(1..=4) {
            let at = rng.random_range(0..16.min(m.len()));
            m[at] ^= rng.random_range(1..=255u8);
        }
        let outcome = std::panic::catch_unwind(|| decode_ppm(&m)).map_err(|_| format!("PPM mutation {} panicked", i))?;
        match outcome {
            // edits inside the header comment are harmless
            Ok(img) => ensure(img == original, || format!("PPM mutation {} decoded to different pixels", i))?,
            Err(
                ImageFormatError::NotPpm
                | ImageFormatError::MalformedHeader(_)
                | ImageFormatError::UnsupportedMaxval(_)
                | ImageFormatError::Truncated { .. },
            ) => {}
            Err(other) => return Err(format!("PPM mutation {}: unexpected {:?}", i, other)),
        }
    }
    Ok(format!("round trips byte-exact, {} CNNW and 1000 PPM header mutations handled", rejected))
}

// --- grid fill ----------------------------------------------------------------

fn grid_fill_criterion() -> Check {
    let net = fixtures::net(Fixture::Rgb);
    let model = Model::new(net.clone(), fixtures::random_weights(&net, 8), None).map_err(|e| e.to_string())?;
    let data: Vec<Sample> = (0..10).map(|i| Sample::new(format!("{}", i), fixtures::random_image(&net, i))).collect();
    let patches = extract_patches(&data, &model, "r1", Sampling::Random { n: 50, seed: 5 }).map_err(|e| e.to_string())?;
    ensure(patches.len() == 50, || format!("{} patches", patches.len()))?;
    let vectors: Vec<Vec<f32>> = patches.iter().map(|p| p.activation.clone()).collect();
    let y = tsne(&vectors, &TsneConfig { perplexity: 10.0, iterations: 300, ..TsneConfig::default() })
        .map_err(|e| e.to_string())?
        .embedding;
    let g = 8;
    let got = grid_fill(&y, g).map_err(|e| e.to_string())?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = y.iter().map(|p| (p[0], p[1])).unzip();
    let range = |v: &[f64]| (v.iter().cloned().fold(f64::INFINITY, f64::min), v.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let ((x0, x1), (y0, y1)) = (range(&xs), range(&ys));
    for (cell, &assigned) in got.iter().enumerate() {
        let (cx, cy) = (((cell % g) as f64 + 0.5) / g as f64, ((cell / g) as f64 + 0.5) / g as f64);
        let mut best = (f64::INFINITY, 0);
        for (i, p) in y.iter().enumerate() {
            let d = ((p[0] - x0) / (x1 - x0) - cx).powi(2) + ((p[1] - y0) / (y1 - y0) - cy).powi(2);
            if d < best.0 {
                best = (d, i);
            }
        }
        ensure(assigned == best.1, || format!("cell {}: {} vs brute force {}", cell, assigned, best.1))?;
    }
    Ok("64 cells equal brute-force nearest-center assignment".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("receptive-field tables", Duration::from_secs(1), receptive_field_tables),
        ("adjoint suite", Duration::from_secs(30), adjoint_suite),
        ("oracle suite", Duration::from_secs(30), oracle_suite),
        ("reconstruction locality", Duration::from_secs(60), reconstruction_locality),
        ("t-SNE", Duration::from_secs(60), tsne_criteria),
        ("sparsity", Duration::from_secs(30), sparsity_criteria),
        ("I/O", Duration::from_secs(30), io_criteria),
        ("grid fill", Duration::from_secs(60), grid_fill_criterion),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= budget {
                Ok(detail)
            } else {
                Err(format!("took {:?}, budget {:?}", elapsed, budget))
            }
        });
        match result {
            Ok(detail) => println!("PASS  {:<24} {:>8.2?}  {}", name, elapsed, detail),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:<24} {:>8.2?}  {}", name, elapsed, why);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
