//! Single-shot noise shaping (SSNS) for quantizing bandlimited graph signals.
//!
//! A signal in the span of the `r` lowest Laplacian eigenvectors is reshaped
//! along kernel directions of the graph Fourier transform until at most `r`
//! entries lie strictly inside the ℓ∞ ball, then rounded entry-wise. The
//! reshaping leaves the low-pass content untouched, so the filtered
//! quantization error only sees the few unsaturated entries.

pub mod baselines;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod quantizer;
pub mod rng;
pub mod signal;
pub mod spectral;
pub mod ssns;

pub use error::{Error, Result};
pub use graph::{Graph, PointCloud};
pub use quantizer::Alphabet;
pub use signal::GraphSignal;
pub use spectral::SpectralBasis;
pub use ssns::{Engine, PreprocessResult, SsnsOutput};
