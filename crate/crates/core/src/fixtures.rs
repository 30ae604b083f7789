//! Tiny networks with seeded random weights for desk-scale checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::engine::{LayerWeights, WeightSet};
use crate::netspec::{parse_netspec, LayerSpec, NetSpec};
use crate::ops::{ConvWeights, FcWeights};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    /// Single-channel conv/relu/pool/conv/fc/softmax.
    Small,
    /// RGB input, strided padded first conv.
    Rgb,
    /// Overlapping 3x3/s2 pooling and a pad-2 conv on a 20x20 input.
    Overlap,
    /// No ReLU layers: every reverse step is linear.
    Linear,
    /// Three-stage VGG-shaped miniature.
    MiniVgg,
    /// Two-stage AlexNet-shaped miniature.
    MiniAlex,
}

impl Fixture {
    pub const ALL: [Fixture; 6] = [
        Fixture::Small,
        Fixture::Rgb,
        Fixture::Overlap,
        Fixture::Linear,
        Fixture::MiniVgg,
        Fixture::MiniAlex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Fixture::Small => "small",
            Fixture::Rgb => "rgb",
            Fixture::Overlap => "overlap",
            Fixture::Linear => "linear",
            Fixture::MiniVgg => "minivgg",
            Fixture::MiniAlex => "minialex",
        }
    }

    pub fn dsl(self) -> &'static str {
        match self {
            Fixture::Small => {
                "input 1 12 12\n\
                 conv c1 4 3x3 pad 1\n\
                 relu r1\n\
                 pool p1 2x2 stride 2\n\
                 conv c2 6 3x3\n\
                 relu r2\n\
                 fc f1 5\n\
                 softmax prob\n"
            }
            Fixture::Rgb => {
                "input 3 16 16\n\
                 conv c1 4 5x5 stride 2 pad 2\n\
                 relu r1\n\
                 pool p1 2x2 stride 2\n\
                 conv c2 8 3x3 pad 1\n\
                 relu r2\n\
                 fc f1 10\n\
                 softmax prob\n"
            }
            Fixture::Overlap => {
                "input 3 20 20\n\
                 conv c1 4 4x4 stride 2 pad 1\n\
                 relu r1\n\
                 pool p1 3x3 stride 2\n\
                 conv c2 5 3x3 pad 2\n\
                 relu r2\n"
            }
            Fixture::Linear => {
                "input 2 10 10\n\
                 conv c1 3 3x3 pad 1\n\
                 pool p1 2x2 stride 2\n\
                 conv c2 4 3x3 stride 2 pad 1\n\
                 fc f1 6\n"
            }
            Fixture::MiniVgg => {
                "input 3 16 16\n\
                 conv c1_1 4 3x3 pad 1\n\
                 relu r1_1\n\
                 conv c1_2 4 3x3 pad 1\n\
                 relu r1_2\n\
                 pool p1 2x2 stride 2\n\
                 conv c2_1 8 3x3 pad 1\n\
                 relu r2_1\n\
                 pool p2 2x2 stride 2\n\
                 fc fc6 8\n\
                 relu r6\n\
                 fc fc8 5\n\
                 softmax prob\n"
            }
            Fixture::MiniAlex => {
                "input 3 16 16\n\
                 conv c1 4 5x5 stride 2 pad 2\n\
                 relu r1\n\
                 pool p1 2x2 stride 2\n\
                 conv c2 8 3x3 pad 1\n\
                 relu r2\n\
                 pool p2 2x2 stride 2\n\
                 fc fc6 8\n\
                 relu r6\n\
                 fc fc8 5\n\
                 softmax prob\n"
            }
        }
    }
}

pub fn net(fixture: Fixture) -> NetSpec {
    parse_netspec(fixture.dsl()).expect("fixture networks parse")
}

/// He-normal kernels and small normal biases, reproducible from `seed`.
pub fn random_weights(net: &NetSpec, seed: u64) -> WeightSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bias_dist = Normal::new(0.0f32, 0.1).expect("valid normal");
    let mut set = WeightSet::new();
    let mut shape = net.input_dims().to_vec();
    for layer in net.layers() {
        match layer {
            LayerSpec::Conv {
                name,
                out_channels,
                kernel,
                ..
            } => {
                let dims = [*out_channels, shape[0], kernel.0, kernel.1];
                let fan_in = shape[0] * kernel.0 * kernel.1;
                let kernels = normal(&mut rng, &dims, (2.0 / fan_in as f32).sqrt());
                let bias = sample(&mut rng, &[*out_channels], &bias_dist);
                set.insert(
                    name.clone(),
                    LayerWeights::Conv(ConvWeights::new(kernels, bias).expect("consistent dims")),
                );
            }
            LayerSpec::Fc { name, out_features } => {
                let fan_in: usize = shape.iter().product();
                let weights = normal(&mut rng, &[*out_features, fan_in], (2.0 / fan_in as f32).sqrt());
                let bias = sample(&mut rng, &[*out_features], &bias_dist);
                set.insert(
                    name.clone(),
                    LayerWeights::Fc(FcWeights::new(weights, bias).expect("consistent dims")),
                );
            }
            _ => {}
        }
        shape = layer.output_shape(&shape).expect("validated network");
    }
    set
}

fn normal(rng: &mut ChaCha8Rng, shape: &[usize], std: f32) -> Tensor {
    sample(rng, shape, &Normal::new(0.0, std).expect("valid normal"))
}

fn sample(rng: &mut ChaCha8Rng, shape: &[usize], dist: &Normal<f32>) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| dist.sample(rng)).collect()).expect("sized")
}

/// Uniform `[-1, 1)` tensor of the network's input shape.
pub fn random_input(net: &NetSpec, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = net.input_dims();
    let n = dims.iter().product();
    Tensor::from_vec(&dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("sized")
}

/// Uniform `[0, 255]` integer-valued image of the network's input shape.
pub fn random_image(net: &NetSpec, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = net.input_dims();
    let n = dims.iter().product();
    Tensor::from_vec(&dims, (0..n).map(|_| rng.random_range(0..=255u8) as f32).collect())
        .expect("sized")
}
