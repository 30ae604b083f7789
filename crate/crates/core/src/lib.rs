//! CNN inference and introspection.
//!
//! * [`netspec`]: architecture DSL, built-in networks, shapes and receptive fields
//! * [`ops`]: forward and reverse layer kernels
//! * [`engine`]: forward passes with recorded activations and pooling switches
//! * [`deconv`]: projection of layer representations back to pixel space
//! * [`embed`]: patch representation spaces, t-SNE and grid canvases
//! * [`profile`]: activation sparsity per layer
//! * [`io`]: weight files, images, manifests and TSV reports

pub mod deconv;
pub mod embed;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod netspec;
pub mod ops;
pub mod profile;
pub mod tensor;

pub use error::{Error, ParseError, Result};
pub use tensor::Tensor;
