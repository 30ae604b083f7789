//! Architecture descriptions: the line-oriented DSL, the two built-in
//! networks, shape inference and receptive-field arithmetic.
//!
//! DSL grammar, one directive per line, `#` starts a comment:
//!
//! ```text
//! input <C> <H> <W>
//! conv <name> <out_channels> <KH>x<KW> [stride <s>] [pad <p>]
//! relu <name>
//! pool <name> <KH>x<KW> [stride <s>]
//! fc <name> <out_features>
//! softmax <name>
//! ```

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, ParseError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        name: String,
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        pad: usize,
    },
    Relu {
        name: String,
    },
    MaxPool {
        name: String,
        window: (usize, usize),
        stride: usize,
    },
    Fc {
        name: String,
        out_features: usize,
    },
    Softmax {
        name: String,
    },
}

impl LayerSpec {
    pub fn name(&self) -> &str {
        match self {
            LayerSpec::Conv { name, .. }
            | LayerSpec::Relu { name }
            | LayerSpec::MaxPool { name, .. }
            | LayerSpec::Fc { name, .. }
            | LayerSpec::Softmax { name } => name,
        }
    }

    /// DSL keyword of this layer kind.
    pub fn keyword(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Relu { .. } => "relu",
            LayerSpec::MaxPool { .. } => "pool",
            LayerSpec::Fc { .. } => "fc",
            LayerSpec::Softmax { .. } => "softmax",
        }
    }

    pub fn is_conv(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. })
    }

    fn is_spatial(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::MaxPool { .. })
    }

    fn check_params(&self) -> std::result::Result<(), String> {
        match *self {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                ..
            } => {
                if out_channels < 1 {
                    return Err("out_channels must be >= 1".into());
                }
                if kernel.0 < 1 || kernel.1 < 1 {
                    return Err("kernel dimensions must be >= 1".into());
                }
                if stride < 1 {
                    return Err("stride must be >= 1".into());
                }
            }
            LayerSpec::MaxPool { window, stride, .. } => {
                if window.0 < 1 || window.1 < 1 {
                    return Err("window dimensions must be >= 1".into());
                }
                if stride < 1 {
                    return Err("stride must be >= 1".into());
                }
            }
            LayerSpec::Fc { out_features, .. } => {
                if out_features < 1 {
                    return Err("out_features must be >= 1".into());
                }
            }
            LayerSpec::Relu { .. } | LayerSpec::Softmax { .. } => {}
        }
        Ok(())
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let spatial = |kernel: (usize, usize), stride: usize, pad: usize| -> Result<(usize, usize)> {
            let [_, h, w] = *input else {
                return Err(Error::Shape(format!(
                    "layer `{}` expects a (C, H, W) input, got {:?}",
                    self.name(),
                    input
                )));
            };
            let out = |size: usize, k: usize| -> Option<usize> {
                (size + 2 * pad).checked_sub(k).map(|span| span / stride + 1)
            };
            match (out(h, kernel.0), out(w, kernel.1)) {
                (Some(oh), Some(ow)) => Ok((oh, ow)),
                _ => Err(Error::Underflow {
                    layer: self.name().to_string(),
                    detail: format!(
                        "{}x{} window does not fit {}x{} input with pad {}",
                        kernel.0, kernel.1, h, w, pad
                    ),
                }),
            }
        };
        match *self {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                pad,
                ..
            } => {
                let (oh, ow) = spatial(kernel, stride, pad)?;
                Ok(vec![out_channels, oh, ow])
            }
            LayerSpec::MaxPool { window, stride, .. } => {
                let (oh, ow) = spatial(window, stride, 0)?;
                Ok(vec![input[0], oh, ow])
            }
            LayerSpec::Fc { out_features, .. } => Ok(vec![out_features]),
            LayerSpec::Relu { .. } | LayerSpec::Softmax { .. } => Ok(input.to_vec()),
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv {
                name,
                out_channels,
                kernel,
                stride,
                pad,
            } => write!(
                f,
                "conv {} {} {}x{} stride {} pad {}",
                name, out_channels, kernel.0, kernel.1, stride, pad
            ),
            LayerSpec::Relu { name } => write!(f, "relu {}", name),
            LayerSpec::MaxPool {
                name,
                window,
                stride,
            } => write!(f, "pool {} {}x{} stride {}", name, window.0, window.1, stride),
            LayerSpec::Fc { name, out_features } => write!(f, "fc {} {}", name, out_features),
            LayerSpec::Softmax { name } => write!(f, "softmax {}", name),
        }
    }
}

/// A linear chain of layers applied to a fixed `(C, H, W)` input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetSpec {
    input_shape: (usize, usize, usize),
    layers: Vec<LayerSpec>,
}

/// Size, stride and padding offset of a layer's neurons in input pixels.
///
/// Neuron `(r, c)` covers rows `r * stride - offset .. + size` (and the same
/// for columns) before clipping to the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReceptiveField {
    pub size: usize,
    pub stride: usize,
    pub offset: usize,
}

/// Half-open pixel rectangle `[top, bottom) x [left, right)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl PixelRect {
    pub fn height(&self) -> usize {
        self.bottom - self.top
    }

    pub fn width(&self) -> usize {
        self.right - self.left
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.top..self.bottom).contains(&row) && (self.left..self.right).contains(&col)
    }
}

/// Receptive field of one neuron in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeuronBox {
    /// Unclipped top-left corner; may be negative inside the padding.
    pub top: i64,
    pub left: i64,
    /// Field extent in rows and columns (equal for square kernels).
    pub height: usize,
    pub width: usize,
    /// The part of the field that lies inside the image.
    pub rect: PixelRect,
    pub clipped: bool,
}

impl NetSpec {
    /// Builds and validates a network.
    pub fn new(input_shape: (usize, usize, usize), layers: Vec<LayerSpec>) -> Result<Self> {
        let net = Self {
            input_shape,
            layers,
        };
        net.validate(|_| 0).map_err(|(_, e)| e)?;
        Ok(net)
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input_shape
    }

    pub fn input_dims(&self) -> [usize; 3] {
        let (c, h, w) = self.input_shape;
        [c, h, w]
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name() == name)
    }

    pub fn layer(&self, name: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.name() == name)
    }

    pub fn conv_layer_names(&self) -> Vec<&str> {
        self.layers
            .iter()
            .filter(|l| l.is_conv())
            .map(|l| l.name())
            .collect()
    }

    /// Checks structural invariants; on failure returns the offending layer
    /// index (mapped through `line_of` by callers that track lines).
    fn validate(&self, line_of: impl Fn(usize) -> usize) -> std::result::Result<(), (usize, Error)> {
        let (c, h, w) = self.input_shape;
        if c < 1 || h < 1 || w < 1 {
            return Err((0, Error::Shape("input dimensions must be >= 1".into())));
        }
        let mut seen = HashSet::new();
        let mut seen_fc = false;
        let mut shape = vec![c, h, w];
        for (i, layer) in self.layers.iter().enumerate() {
            let at = |msg: String| (line_of(i), Error::layer(layer.name(), msg));
            layer.check_params().map_err(at)?;
            if !seen.insert(layer.name()) {
                return Err(at("duplicate layer name".into()));
            }
            if layer.is_spatial() && seen_fc {
                return Err(at(format!(
                    "{} layer after a fully-connected layer",
                    layer.keyword()
                )));
            }
            if matches!(layer, LayerSpec::Softmax { .. }) && i + 1 != self.layers.len() {
                return Err(at("softmax must be the last layer".into()));
            }
            seen_fc |= matches!(layer, LayerSpec::Fc { .. });
            shape = layer.output_shape(&shape).map_err(|e| (line_of(i), e))?;
        }
        Ok(())
    }

    /// `(layer name, output shape)` for every layer, in order.
    pub fn shape_trace(&self) -> Result<Vec<(String, Vec<usize>)>> {
        let mut shape = self.input_dims().to_vec();
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            shape = layer.output_shape(&shape)?;
            out.push((layer.name().to_string(), shape.clone()));
        }
        Ok(out)
    }

    /// Output shape of the named layer.
    pub fn layer_shape(&self, name: &str) -> Result<Vec<usize>> {
        self.shape_trace()?
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::UnknownLayer(name.to_string()))
    }

    /// Receptive fields of every layer before the first fully-connected
    /// layer. FC and softmax layers see the whole image and are omitted.
    pub fn receptive_fields(&self) -> Vec<(String, ReceptiveField)> {
        let mut rf = ReceptiveField {
            size: 1,
            stride: 1,
            offset: 0,
        };
        let mut out = Vec::new();
        for layer in &self.layers {
            match *layer {
                LayerSpec::Conv {
                    kernel,
                    stride,
                    pad,
                    ..
                } => {
                    // square fields; rectangular kernels use the height
                    rf = ReceptiveField {
                        size: rf.size + (kernel.0 - 1) * rf.stride,
                        offset: rf.offset + pad * rf.stride,
                        stride: rf.stride * stride,
                    };
                }
                LayerSpec::MaxPool { window, stride, .. } => {
                    rf = ReceptiveField {
                        size: rf.size + (window.0 - 1) * rf.stride,
                        offset: rf.offset,
                        stride: rf.stride * stride,
                    };
                }
                LayerSpec::Relu { .. } => {}
                LayerSpec::Fc { .. } | LayerSpec::Softmax { .. } => break,
            }
            out.push((layer.name().to_string(), rf));
        }
        out
    }

    /// Per-axis receptive field `(rows, cols)` of a layer. Differs from
    /// [`receptive_fields`](Self::receptive_fields) only for rectangular
    /// kernels.
    fn receptive_field_2d(&self, name: &str) -> Option<(ReceptiveField, ReceptiveField)> {
        let unit = ReceptiveField {
            size: 1,
            stride: 1,
            offset: 0,
        };
        let (mut rows, mut cols) = (unit, unit);
        let step = |rf: ReceptiveField, k: usize, s: usize, p: usize| ReceptiveField {
            size: rf.size + (k - 1) * rf.stride,
            offset: rf.offset + p * rf.stride,
            stride: rf.stride * s,
        };
        for layer in &self.layers {
            match *layer {
                LayerSpec::Conv {
                    kernel,
                    stride,
                    pad,
                    ..
                } => {
                    rows = step(rows, kernel.0, stride, pad);
                    cols = step(cols, kernel.1, stride, pad);
                }
                LayerSpec::MaxPool { window, stride, .. } => {
                    rows = step(rows, window.0, stride, 0);
                    cols = step(cols, window.1, stride, 0);
                }
                LayerSpec::Relu { .. } => {}
                LayerSpec::Fc { .. } | LayerSpec::Softmax { .. } => return None,
            }
            if layer.name() == name {
                return Some((rows, cols));
            }
        }
        None
    }

    /// Pixel rectangle seen by neuron `(row, col)` of a spatial layer.
    pub fn neuron_bbox(&self, layer: &str, row: usize, col: usize) -> Result<NeuronBox> {
        let shape = self.layer_shape(layer)?;
        let [_, oh, ow] = *shape.as_slice() else {
            return Err(Error::layer(layer, "layer has no spatial extent"));
        };
        if row >= oh || col >= ow {
            return Err(Error::Selection(format!(
                "position ({}, {}) outside {}x{} map of `{}`",
                row, col, oh, ow, layer
            )));
        }
        let (rows, cols) = self
            .receptive_field_2d(layer)
            .ok_or_else(|| Error::layer(layer, "layer has no spatial extent"))?;
        let (_, h, w) = self.input_shape;
        let top = (row * rows.stride) as i64 - rows.offset as i64;
        let left = (col * cols.stride) as i64 - cols.offset as i64;
        let clip = |start: i64, size: usize, limit: usize| {
            let lo = start.clamp(0, limit as i64) as usize;
            let hi = (start + size as i64).clamp(0, limit as i64) as usize;
            (lo, hi)
        };
        let (t, b) = clip(top, rows.size, h);
        let (l, r) = clip(left, cols.size, w);
        let clipped = top < 0
            || left < 0
            || top + rows.size as i64 > h as i64
            || left + cols.size as i64 > w as i64;
        Ok(NeuronBox {
            top,
            left,
            height: rows.size,
            width: cols.size,
            rect: PixelRect {
                top: t,
                left: l,
                bottom: b,
                right: r,
            },
            clipped,
        })
    }
}

impl fmt::Display for NetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (c, h, w) = self.input_shape;
        writeln!(f, "input {} {} {}", c, h, w)?;
        for layer in &self.layers {
            writeln!(f, "{}", layer)?;
        }
        Ok(())
    }
}

impl FromStr for NetSpec {
    type Err = ParseError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        parse_netspec(s)
    }
}

/// Parses the architecture DSL. Errors carry 1-based line numbers.
pub fn parse_netspec(text: &str) -> std::result::Result<NetSpec, ParseError> {
    let mut input: Option<(usize, usize, usize)> = None;
    let mut layers = Vec::new();
    let mut lines = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| ParseError::new(line_no, msg);
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let keyword = tokens[0];
        if keyword == "input" {
            if input.is_some() {
                return Err(err("duplicate `input` directive".into()));
            }
            if !layers.is_empty() {
                return Err(err("`input` must precede all layers".into()));
            }
            let [_, c, h, w] = tokens[..] else {
                return Err(err("expected `input <C> <H> <W>`".into()));
            };
            let dims = (number(c, line_no)?, number(h, line_no)?, number(w, line_no)?);
            if dims.0 < 1 || dims.1 < 1 || dims.2 < 1 {
                return Err(err("input dimensions must be >= 1".into()));
            }
            input = Some(dims);
            continue;
        }
        if input.is_none() {
            return Err(err("expected `input <C> <H> <W>` before the first layer".into()));
        }
        let layer = parse_layer(&tokens, line_no)?;
        if let Err(msg) = layer.check_params() {
            return Err(err(format!("layer `{}`: {}", layer.name(), msg)));
        }
        layers.push(layer);
        lines.push(line_no);
    }

    let input = input.ok_or_else(|| ParseError::new(1, "missing `input` directive"))?;
    let net = NetSpec { input_shape: input, layers };
    net.validate(|i| lines[i]).map_err(|(line, e)| {
        let message = match e {
            Error::Layer { layer, message } => format!("layer `{}`: {}", layer, message),
            other => other.to_string(),
        };
        ParseError::new(line, message)
    })?;
    Ok(net)
}

fn number(token: &str, line: usize) -> std::result::Result<usize, ParseError> {
    token
        .parse::<usize>()
        .map_err(|_| ParseError::new(line, format!("malformed number `{}`", token)))
}

fn dims(token: &str, line: usize) -> std::result::Result<(usize, usize), ParseError> {
    let (a, b) = token
        .split_once(['x', 'X'])
        .ok_or_else(|| ParseError::new(line, format!("expected `<KH>x<KW>`, got `{}`", token)))?;
    Ok((number(a, line)?, number(b, line)?))
}

/// Parses trailing `key value` pairs such as `stride 2 pad 1`.
fn options(
    tokens: &[&str],
    allowed: &[&str],
    line: usize,
) -> std::result::Result<Vec<(String, usize)>, ParseError> {
    if !tokens.len().is_multiple_of(2) {
        return Err(ParseError::new(line, "option without a value"));
    }
    let mut out: Vec<(String, usize)> = Vec::new();
    for pair in tokens.chunks(2) {
        let key = pair[0];
        if !allowed.contains(&key) {
            return Err(ParseError::new(line, format!("unknown option `{}`", key)));
        }
        if out.iter().any(|(k, _)| k == key) {
            return Err(ParseError::new(line, format!("option `{}` given twice", key)));
        }
        out.push((key.to_string(), number(pair[1], line)?));
    }
    Ok(out)
}

fn option(opts: &[(String, usize)], key: &str, default: usize) -> usize {
    opts.iter()
        .find(|(k, _)| k == key)
        .map_or(default, |&(_, v)| v)
}

fn parse_layer(tokens: &[&str], line: usize) -> std::result::Result<LayerSpec, ParseError> {
    let arity = |expected: &str| {
        ParseError::new(line, format!("expected `{}`", expected))
    };
    match tokens[0] {
        "conv" => {
            if tokens.len() < 4 {
                return Err(arity("conv <name> <out_channels> <KH>x<KW> [stride <s>] [pad <p>]"));
            }
            let opts = options(&tokens[4..], &["stride", "pad"], line)?;
            Ok(LayerSpec::Conv {
                name: tokens[1].to_string(),
                out_channels: number(tokens[2], line)?,
                kernel: dims(tokens[3], line)?,
                stride: option(&opts, "stride", 1),
                pad: option(&opts, "pad", 0),
            })
        }
        "relu" => match tokens {
            [_, name] => Ok(LayerSpec::Relu {
                name: name.to_string(),
            }),
            _ => Err(arity("relu <name>")),
        },
        "pool" => {
            if tokens.len() < 3 {
                return Err(arity("pool <name> <KH>x<KW> [stride <s>]"));
            }
            let opts = options(&tokens[3..], &["stride"], line)?;
            Ok(LayerSpec::MaxPool {
                name: tokens[1].to_string(),
                window: dims(tokens[2], line)?,
                stride: option(&opts, "stride", 1),
            })
        }
        "fc" => match tokens {
            [_, name, n] => Ok(LayerSpec::Fc {
                name: name.to_string(),
                out_features: number(n, line)?,
            }),
            _ => Err(arity("fc <name> <out_features>")),
        },
        "softmax" => match tokens {
            [_, name] => Ok(LayerSpec::Softmax {
                name: name.to_string(),
            }),
            _ => Err(arity("softmax <name>")),
        },
        other => Err(ParseError::new(
            line,
            format!("unknown layer keyword `{}`", other),
        )),
    }
}

/// The two reference architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Vggcnn16,
    Alexcnn,
}

impl Builtin {
    pub const ALL: [Builtin; 2] = [Builtin::Vggcnn16, Builtin::Alexcnn];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Vggcnn16 => "vggcnn16",
            Builtin::Alexcnn => "alexcnn",
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vggcnn16" => Ok(Builtin::Vggcnn16),
            "alexcnn" => Ok(Builtin::Alexcnn),
            other => Err(Error::Precondition(format!(
                "unknown built-in network `{}` (expected vggcnn16 or alexcnn)",
                other
            ))),
        }
    }
}

fn conv(name: &str, out_channels: usize, k: usize, stride: usize, pad: usize) -> LayerSpec {
    LayerSpec::Conv {
        name: name.into(),
        out_channels,
        kernel: (k, k),
        stride,
        pad,
    }
}

fn relu(name: &str) -> LayerSpec {
    LayerSpec::Relu { name: name.into() }
}

fn pool2(name: &str) -> LayerSpec {
    LayerSpec::MaxPool {
        name: name.into(),
        window: (2, 2),
        stride: 2,
    }
}

fn classifier(layers: &mut Vec<LayerSpec>) {
    for (fc, act, n) in [("fc6", Some("r6"), 4096), ("fc7", Some("r7"), 4096), ("fc8", None, 1000)] {
        layers.push(LayerSpec::Fc {
            name: fc.into(),
            out_features: n,
        });
        if let Some(act) = act {
            layers.push(relu(act));
        }
    }
    layers.push(LayerSpec::Softmax { name: "prob".into() });
}

/// Built-in reference network on a `3 x 224 x 224` input.
pub fn builtin_netspec(which: Builtin) -> NetSpec {
    let mut layers = Vec::new();
    match which {
        Builtin::Vggcnn16 => {
            let groups: [(usize, usize); 5] = [(2, 64), (2, 128), (3, 256), (3, 512), (3, 512)];
            for (g, &(convs, filters)) in groups.iter().enumerate() {
                for i in 1..=convs {
                    layers.push(conv(&format!("c{}_{}", g + 1, i), filters, 3, 1, 1));
                    layers.push(relu(&format!("r{}_{}", g + 1, i)));
                }
                layers.push(pool2(&format!("p{}", g + 1)));
            }
        }
        Builtin::Alexcnn => {
            layers.extend([
                conv("c1", 96, 11, 4, 2),
                relu("r1"),
                pool2("p1"),
                conv("c2", 256, 5, 1, 1),
                relu("r2"),
                pool2("p2"),
                conv("c3", 384, 3, 1, 1),
                relu("r3"),
                conv("c4", 384, 3, 1, 1),
                relu("r4"),
                conv("c5", 256, 3, 1, 1),
                relu("r5"),
                pool2("p5"),
            ]);
        }
    }
    classifier(&mut layers);
    NetSpec::new((3, 224, 224), layers).expect("built-in networks are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rf_of(net: &NetSpec, name: &str) -> ReceptiveField {
        net.receptive_fields()
            .into_iter()
            .find(|(n, _)| n == name)
            .unwrap()
            .1
    }

    #[test]
    fn parses_alexnet_first_layer() {
        let net = parse_netspec("input 3 224 224\nconv c1 96 11x11 stride 4 pad 2").unwrap();
        assert_eq!(net.input_shape(), (3, 224, 224));
        assert_eq!(
            net.layers(),
            &[LayerSpec::Conv {
                name: "c1".into(),
                out_channels: 96,
                kernel: (11, 11),
                stride: 4,
                pad: 2
            }]
        );
    }

    #[test]
    fn parses_single_relu_and_defaults() {
        let net = parse_netspec("input 1 8 8\nrelu r1").unwrap();
        assert_eq!(net.layers(), &[LayerSpec::Relu { name: "r1".into() }]);

        let net = parse_netspec("# comment\ninput 1 8 8\n\nconv a 2 3x3 # trailing\npool b 2x2").unwrap();
        match &net.layers()[0] {
            LayerSpec::Conv { stride, pad, .. } => assert_eq!((*stride, *pad), (1, 0)),
            other => panic!("unexpected {:?}", other),
        }
        match &net.layers()[1] {
            LayerSpec::MaxPool { stride, .. } => assert_eq!(*stride, 1),
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("input 3 224 224\nconv c1 96 11x11 stride 0", 2),
            ("input 3 8 8\nrelu a\nbogus b", 3),
            ("input 3 8 8\nconv a 4 3xq", 2),
            ("input 3 8 8\nrelu a\nrelu a", 3),
            ("input 3 8 8\nfc f 10\nconv c 4 3x3", 3),
            ("input 3 8 8\nconv c 4 3x3 stride", 2),
            ("input 3 8 8\nconv c 4 3x3 dilation 2", 2),
            ("input 3 4 4\nconv c 4 3x3\nconv d 4 3x3\nconv e 4 3x3", 3),
            ("relu a", 1),
            ("input 3 8 8\nsoftmax s\nrelu r", 2),
            ("input 3 8\nrelu r", 1),
        ];
        for (text, line) in cases {
            let err = parse_netspec(text).unwrap_err();
            assert_eq!(err.line, line, "{:?} -> {}", text, err);
        }
    }

    #[test]
    fn builtin_vgg_layout() {
        let net = builtin_netspec(Builtin::Vggcnn16);
        let count = |kw: &str| net.layers().iter().filter(|l| l.keyword() == kw).count();
        assert_eq!((count("conv"), count("pool"), count("fc")), (13, 5, 3));
        let filters: Vec<usize> = net
            .layers()
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Conv { out_channels, .. } => Some(*out_channels),
                _ => None,
            })
            .collect();
        assert_eq!(
            filters,
            [64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512]
        );
        let shapes = net.shape_trace().unwrap();
        assert_eq!(shapes.iter().find(|(n, _)| n == "p5").unwrap().1, vec![512, 7, 7]);
        assert_eq!(shapes.last().unwrap().1, vec![1000]);
    }

    #[test]
    fn builtin_alex_layout() {
        let net = builtin_netspec(Builtin::Alexcnn);
        assert_eq!(net.layers()[0], conv("c1", 96, 11, 4, 2));
        assert_eq!(net.layer("c2"), Some(&conv("c2", 256, 5, 1, 1)));
        for (name, filters) in [("c3", 384), ("c4", 384), ("c5", 256)] {
            assert_eq!(net.layer(name), Some(&conv(name, filters, 3, 1, 1)));
        }
        let pools: Vec<usize> = net
            .layers()
            .iter()
            .enumerate()
            .filter(|(_, l)| l.keyword() == "pool")
            .map(|(i, _)| i)
            .collect();
        assert_eq!(pools.len(), 3);
        let preceding_conv: Vec<&str> = pools
            .iter()
            .map(|&i| net.layers()[..i].iter().rev().find(|l| l.is_conv()).unwrap().name())
            .collect();
        assert_eq!(preceding_conv, ["c1", "c2", "c5"]);
        // stated parameters give 6x6 after p5, not VGG's 7x7
        assert_eq!(net.layer_shape("p5").unwrap(), vec![256, 6, 6]);
    }

    #[test]
    fn shape_recurrence() {
        let net = builtin_netspec(Builtin::Alexcnn);
        // floor((224 + 4 - 11) / 4) + 1
        assert_eq!(net.layer_shape("c1").unwrap(), vec![96, 55, 55]);

        let net = parse_netspec("input 1 5 5\nconv id 7 1x1").unwrap();
        assert_eq!(net.layer_shape("id").unwrap(), vec![7, 5, 5]);

        let net = parse_netspec("input 64 224 224\npool p 2x2 stride 2").unwrap();
        assert_eq!(net.layer_shape("p").unwrap(), vec![64, 112, 112]);
    }

    #[test]
    fn receptive_field_examples() {
        let vgg = builtin_netspec(Builtin::Vggcnn16);
        let p5 = rf_of(&vgg, "p5");
        assert_eq!((p5.size, p5.stride), (212, 32));
        let c33 = rf_of(&vgg, "c3_3");
        assert_eq!((c33.size, c33.stride), (40, 4));

        let alex = builtin_netspec(Builtin::Alexcnn);
        let c5 = rf_of(&alex, "c5");
        assert_eq!((c5.size, c5.stride), (151, 16));
        let p5 = rf_of(&alex, "p5");
        assert_eq!((p5.size, p5.stride), (167, 32));

        let single = parse_netspec("input 1 9 9\nconv c 1 3x3").unwrap();
        assert_eq!(
            rf_of(&single, "c"),
            ReceptiveField {
                size: 3,
                stride: 1,
                offset: 0
            }
        );
        assert!(vgg.receptive_fields().iter().all(|(n, _)| !n.starts_with("fc")));
    }

    #[test]
    fn neuron_boxes() {
        let vgg = builtin_netspec(Builtin::Vggcnn16);
        let b = vgg.neuron_bbox("c1_1", 0, 0).unwrap();
        assert_eq!((b.top, b.left, b.height, b.width), (-1, -1, 3, 3));
        assert_eq!(
            b.rect,
            PixelRect {
                top: 0,
                left: 0,
                bottom: 2,
                right: 2
            }
        );
        assert!(b.clipped);

        let alex = builtin_netspec(Builtin::Alexcnn);
        let b = alex.neuron_bbox("c1", 1, 1).unwrap();
        assert_eq!((b.top, b.left), (2, 2));
        assert!(!b.clipped);
        assert_eq!(b.rect.height(), 11);

        let plain = parse_netspec("input 1 10 10\nconv c 1 3x3\npool p 2x2 stride 2").unwrap();
        let b = plain.neuron_bbox("p", 0, 0).unwrap();
        assert_eq!((b.top, b.left, b.height, b.clipped), (0, 0, 4, false));

        assert!(matches!(
            plain.neuron_bbox("p", 4, 0),
            Err(Error::Selection(_))
        ));
        assert!(matches!(
            plain.neuron_bbox("nope", 0, 0),
            Err(Error::UnknownLayer(_))
        ));
    }

    #[test]
    fn display_round_trips_builtins() {
        for which in Builtin::ALL {
            let net = builtin_netspec(which);
            assert_eq!(parse_netspec(&net.to_string()).unwrap(), net);
        }
    }
}
