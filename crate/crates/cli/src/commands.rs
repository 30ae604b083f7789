use std::fmt;
use std::path::{Path, PathBuf};

use cnnprobe::deconv::{self, Selection, SelectionMode};
use cnnprobe::embed::{self, Sampling, TsneConfig};
use cnnprobe::engine::{top_k_predictions, Model, Sample};
use cnnprobe::io::image::{encode_for_path, read_image, RgbImage};
use cnnprobe::io::{manifest, plot, tsv, weights, write_atomic};
use cnnprobe::netspec::{builtin_netspec, parse_netspec, Builtin, LayerSpec, NetSpec};
use cnnprobe::profile::{self, LayerCount, SparsityReport};
use cnnprobe::{Error, Tensor};

use crate::{ModelArgs, NetArgs, OutArgs};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_DATA: u8 = 4;

/// Images are pushed through the sparsity profiler this many at a time.
const SPARSITY_CHUNK: usize = 32;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e {
                Error::Parse(_) | Error::Selection(_) | Error::UnknownLayer(_) => EXIT_USAGE,
                Error::Io { .. } => EXIT_IO,
                _ => EXIT_DATA,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{}", e),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Files are rendered in memory first and only written once every output of
/// a command has been computed.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    fn add_image(&mut self, path: PathBuf, img: &RgbImage) -> CliResult {
        let bytes = encode_for_path(&path, img)?;
        self.add(path, bytes);
        Ok(())
    }

    fn commit(self, dir: &Path) -> CliResult {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        for (path, bytes) in &self.files {
            write_atomic(path, bytes)?;
        }
        Ok(())
    }
}

fn image_ext(out: &OutArgs) -> CliResult<&'static str> {
    if out.png && !cfg!(feature = "png") {
        return Err(CliError::Usage(
            "--png needs a build with the `png` feature".into(),
        ));
    }
    Ok(if out.png { "png" } else { "ppm" })
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| {
        CliError::Core(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

pub fn load_net(args: &NetArgs) -> CliResult<NetSpec> {
    match (&args.builtin, &args.spec) {
        (Some(name), None) => {
            let which: Builtin = name
                .parse()
                .map_err(|e: Error| CliError::Usage(e.to_string()))?;
            Ok(builtin_netspec(which))
        }
        (None, Some(path)) => {
            let text = read_text(path)?;
            parse_netspec(&text).map_err(|e| {
                CliError::Usage(format!("{}: {}", path.display(), e))
            })
        }
        _ => Err(CliError::Usage("give exactly one of --builtin or --spec".into())),
    }
}

fn load_model(args: &ModelArgs) -> CliResult<Model> {
    let net = load_net(&args.net)?;
    let (set, mean) = weights::read_weights(&args.weights)?;
    Ok(Model::new(net, set, mean)?)
}

fn sample_id(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load_sample(path: &Path, net: &NetSpec) -> CliResult<Sample> {
    let img = read_image(path)?;
    Ok(Sample::from_rgb(sample_id(path), &img, net)?)
}

fn manifest_paths(path: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = manifest::read_manifest(path)?;
    if entries.is_empty() {
        return Err(Error::Precondition(format!("manifest {} lists no images", path.display())).into());
    }
    Ok(entries.into_iter().map(|e| e.path).collect())
}

fn load_dataset(path: &Path, net: &NetSpec) -> CliResult<Vec<Sample>> {
    manifest_paths(path)?
        .iter()
        .map(|p| load_sample(p, net))
        .collect()
}

fn split_names(list: &str) -> Vec<String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn arch(args: &NetArgs) -> CliResult {
    let net = load_net(args)?;
    print!("{}", arch_table(&net)?);
    Ok(())
}

/// Shape trace joined with receptive fields. Layers past the first
/// fully-connected layer have no receptive field and show `-`.
pub fn arch_table(net: &NetSpec) -> CliResult<String> {
    let shapes = net.shape_trace()?;
    let fields = net.receptive_fields();
    let rows = net.layers().iter().zip(&shapes).map(|(layer, (name, shape))| {
        let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
        let mut row = vec![name.clone(), layer.keyword().to_string(), dims.join("x")];
        match fields.iter().find(|(n, _)| n == name) {
            Some((_, rf)) => row.extend([rf.size, rf.stride, rf.offset].map(|v| v.to_string())),
            None => row.extend(["-", "-", "-"].map(String::from)),
        }
        row
    });
    Ok(tsv::render(
        &["layer", "kind", "shape", "size", "stride", "offset"],
        rows,
    ))
}

pub fn forward(args: &ModelArgs, image: &Path, labels: Option<&Path>, k: Option<usize>) -> CliResult {
    let model = load_model(args)?;
    let sample = load_sample(image, &model.net)?;
    let trace = model.forward(&sample.image)?;
    let outputs = trace.output().len();
    let labels: Vec<String> = match labels {
        Some(path) => read_text(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect(),
        None => (0..outputs).map(|i| format!("class{}", i)).collect(),
    };
    if labels.len() != outputs {
        return Err(CliError::Usage(format!(
            "{} labels given but the network has {} outputs",
            labels.len(),
            outputs
        )));
    }
    let k = k.unwrap_or(outputs);
    if k > outputs {
        return Err(CliError::Usage(format!("-k {} exceeds the {} outputs", k, outputs)));
    }
    let top = top_k_predictions(&trace, k, &labels)?;
    print!(
        "{}",
        tsv::render(
            &["rank", "label", "probability"],
            top.iter()
                .enumerate()
                .map(|(i, (l, p))| vec![(i + 1).to_string(), l.clone(), format!("{:.9}", p)]),
        )
    );
    Ok(())
}

fn resolve_layers(net: &NetSpec, spec: &str) -> CliResult<Vec<String>> {
    let names: Vec<String> = match spec {
        "all-conv" => net.conv_layer_names().into_iter().map(str::to_string).collect(),
        "all" => net
            .layers()
            .iter()
            .filter(|l| !matches!(l, LayerSpec::Softmax { .. }))
            .map(|l| l.name().to_string())
            .collect(),
        list => split_names(list),
    };
    if names.is_empty() {
        return Err(CliError::Usage(format!("no layers selected by `{}`", spec)));
    }
    for n in &names {
        if net.layer_index(n).is_none() {
            return Err(Error::UnknownLayer(n.clone()).into());
        }
    }
    Ok(names)
}

pub fn reconstruct(args: &ModelArgs, image: &Path, layers: &str, select: &str, out: &OutArgs) -> CliResult {
    let ext = image_ext(out)?;
    let mode: SelectionMode = select.parse()?;
    let net = load_net(&args.net)?;
    let layers = resolve_layers(&net, layers)?;
    let (set, mean) = weights::read_weights(&args.weights)?;
    let model = Model::new(net, set, mean)?;
    let sample = load_sample(image, &model.net)?;
    let trace = model.forward(&sample.image)?;
    let stem = image
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into());

    let mut files = Outputs::default();
    for layer in &layers {
        let sel = Selection::new(layer.clone(), mode);
        let recon = deconv::reconstruct(&model.net, &model.weights, &trace, &sel)?;
        let img = deconv::to_displayable(&recon)?;
        let path = out.out.join(format!("{}_{}.{}", stem, layer, ext));
        files.add_image(path.clone(), &img)?;
        println!("{}", path.display());
    }
    files.commit(&out.out)
}

pub struct EmbedOpts {
    pub perplexity: f64,
    pub iterations: usize,
    pub grid: usize,
    pub thumb: usize,
    pub seed: u64,
}

fn parse_sampling(s: &str, seed: u64) -> CliResult<Sampling> {
    let parsed: Sampling = s.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
    Ok(match parsed {
        // `random:N` without its own seed follows --seed
        Sampling::Random { n, .. } if s.matches(':').count() == 1 => Sampling::Random { n, seed },
        other => other,
    })
}

pub fn embed(
    args: &ModelArgs,
    manifest: &Path,
    layer: &str,
    sampling: &str,
    opts: EmbedOpts,
    out: &OutArgs,
) -> CliResult {
    let ext = image_ext(out)?;
    let sampling = parse_sampling(sampling, opts.seed)?;
    if opts.grid == 0 || opts.thumb == 0 {
        return Err(CliError::Usage("--grid and --thumb must be at least 1".into()));
    }
    let model = load_model(args)?;
    if model.net.layer_index(layer).is_none() {
        return Err(Error::UnknownLayer(layer.to_string()).into());
    }
    let samples = load_dataset(manifest, &model.net)?;
    let patches = embed::extract_patches(&samples, &model, layer, sampling)?;
    let vectors: Vec<Vec<f32>> = patches.iter().map(|p| p.activation.clone()).collect();
    let config = TsneConfig {
        perplexity: opts.perplexity,
        iterations: opts.iterations,
        seed: opts.seed,
        ..TsneConfig::default()
    };
    let result = embed::tsne(&vectors, &config)?;
    let cells = embed::grid_fill(&result.embedding, opts.grid)?;
    let canvas = embed::render_grid(&cells, &patches, opts.grid, opts.thumb)?;

    let mut files = Outputs::default();
    files.add(
        out.out.join("embedding.tsv"),
        embed::embedding_tsv(&patches, &result.embedding).into_bytes(),
    );
    files.add_image(out.out.join(format!("grid.{}", ext)), &canvas)?;
    files.commit(&out.out)?;
    if let Some((it, kl)) = result.kl_trace.last() {
        println!("{} patches, KL {:.6} at iteration {}", patches.len(), kl, it);
    }
    Ok(())
}

fn plot_reports(reports: &[&SparsityReport], layers: &[String]) -> RgbImage {
    let series: Vec<Vec<Option<f64>>> = reports
        .iter()
        .map(|r| layers.iter().map(|l| r.get(l).map(LayerCount::sparsity)).collect())
        .collect();
    plot::line_plot(&series, 640, 320)
}

pub fn sparsity(
    args: &ModelArgs,
    manifest: &Path,
    layers: Option<&str>,
    pre_relu: bool,
    threshold: f32,
    out: &OutArgs,
) -> CliResult {
    let ext = image_ext(out)?;
    let model = load_model(args)?;
    let layers = match layers {
        Some(list) => resolve_layers(&model.net, list)?,
        None => profile::default_layers(&model.net, pre_relu),
    };
    if layers.is_empty() {
        return Err(Error::Precondition("the network has no layers to profile".into()).into());
    }
    let paths = manifest_paths(manifest)?;

    // counts are summed chunk by chunk so memory stays bounded
    let mut report: Option<SparsityReport> = None;
    for chunk in paths.chunks(SPARSITY_CHUNK) {
        let samples: Vec<Sample> = chunk
            .iter()
            .map(|p| load_sample(p, &model.net))
            .collect::<CliResult<_>>()?;
        let part = profile::layer_sparsity(&samples, &model, &layers, threshold)?;
        report = Some(match report {
            None => part,
            Some(mut acc) => {
                for (a, b) in acc.layers.iter_mut().zip(&part.layers) {
                    a.zeros += b.zeros;
                    a.total += b.total;
                }
                acc.images += part.images;
                acc
            }
        });
    }
    let report = report.expect("manifest is nonempty");
    let ordered: Vec<String> = report.layers.iter().map(|c| c.layer.clone()).collect();

    let table = report.to_tsv();
    let mut files = Outputs::default();
    files.add(out.out.join("sparsity.tsv"), table.clone().into_bytes());
    files.add_image(
        out.out.join(format!("sparsity.{}", ext)),
        &plot_reports(&[&report], &ordered),
    )?;
    files.commit(&out.out)?;
    print!("{}", table);
    Ok(())
}

fn read_report(path: &Path) -> CliResult<SparsityReport> {
    let text = read_text(path)?;
    let bad = |line: usize| {
        CliError::Core(Error::Precondition(format!(
            "{}: row {} is not `layer zeros total sparsity`",
            path.display(),
            line
        )))
    };
    let layers = tsv::parse(&text)
        .into_iter()
        .enumerate()
        .map(|(i, row)| match row[..] {
            [layer, zeros, total, _] => Ok(LayerCount {
                layer: layer.to_string(),
                zeros: zeros.parse().map_err(|_| bad(i + 1))?,
                total: total.parse().map_err(|_| bad(i + 1))?,
            }),
            _ => Err(bad(i + 1)),
        })
        .collect::<CliResult<_>>()?;
    Ok(SparsityReport { layers, images: 0 })
}

pub fn compare_sparsity(a: &Path, b: &Path, out: &OutArgs) -> CliResult {
    let ext = image_ext(out)?;
    let (ra, rb) = (read_report(a)?, read_report(b)?);
    let rows = profile::compare_sparsity(&ra, &rb);
    let table = profile::comparison_tsv(&rows);
    let layers: Vec<String> = rows.iter().map(|r| r.layer.clone()).collect();
    let mut files = Outputs::default();
    files.add(out.out.join("comparison.tsv"), table.clone().into_bytes());
    files.add_image(
        out.out.join(format!("comparison.{}", ext)),
        &plot_reports(&[&ra, &rb], &layers),
    )?;
    files.commit(&out.out)?;
    print!("{}", table);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn top_patches(
    args: &ModelArgs,
    manifest: &Path,
    layer: &str,
    filter: usize,
    n: usize,
    thumb: usize,
    out: &OutArgs,
) -> CliResult {
    let ext = image_ext(out)?;
    if n == 0 || thumb == 0 {
        return Err(CliError::Usage("-n and --thumb must be at least 1".into()));
    }
    let model = load_model(args)?;
    let shape = model.net.layer_shape(layer).map_err(|_| Error::UnknownLayer(layer.into()))?;
    if filter >= shape[0] {
        return Err(CliError::Usage(format!(
            "filter {} out of range: layer `{}` has {} filters",
            filter, layer, shape[0]
        )));
    }
    let samples = load_dataset(manifest, &model.net)?;
    let patches = embed::top_patches_for_filter(&samples, &model, layer, filter, n)?;

    let mut strip = RgbImage::new(n * thumb, thumb, [255; 3]);
    let mut recons = RgbImage::new(n * thumb, thumb, [255; 3]);
    let mut rows = Vec::with_capacity(patches.len());
    for (i, p) in patches.iter().enumerate() {
        strip.blit(&embed::thumbnail(&p.pixels, thumb)?, i * thumb, 0);
        let r = embed::reconstruct_patch(&model, &samples[p.image_index], p, filter)?;
        recons.blit(
            &deconv::to_displayable(&r)?.resize_nearest(thumb, thumb),
            i * thumb,
            0,
        );
        rows.push(vec![
            (i + 1).to_string(),
            p.image_id.clone(),
            p.row.to_string(),
            p.col.to_string(),
            format!("{:.6}", p.activation[filter]),
        ]);
    }
    let mut files = Outputs::default();
    let base = format!("{}_f{}", layer, filter);
    files.add_image(out.out.join(format!("{}_patches.{}", base, ext)), &strip)?;
    files.add_image(out.out.join(format!("{}_recons.{}", base, ext)), &recons)?;
    files.commit(&out.out)?;
    print!(
        "{}",
        tsv::render(&["rank", "image", "row", "col", "activation"], rows)
    );
    Ok(())
}

pub fn init_weights(args: &NetArgs, seed: u64, mean: Option<&str>, output: &Path) -> CliResult {
    let net = load_net(args)?;
    let mean = match mean {
        None => None,
        Some(text) => {
            let values = text
                .split(',')
                .map(|v| v.trim().parse::<f32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::Usage(format!("cannot parse mean `{}`", text)))?;
            if values.len() != net.input_dims()[0] {
                return Err(CliError::Usage(format!(
                    "mean has {} values for {} input channels",
                    values.len(),
                    net.input_dims()[0]
                )));
            }
            Some(Tensor::from_vec(&[values.len()], values)?)
        }
    };
    let set = cnnprobe::fixtures::random_weights(&net, seed);
    weights::write_weights(output, &set, mean.as_ref())?;
    Ok(())
}
