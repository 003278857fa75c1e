//! Monotone convolution of probability measures on the real line.
//!
//! Atomic measures are the exact computational class: `μ ▷ ν` is computed
//! through the composition law `F_{μ▷ν} = F_μ ∘ F_ν` of reciprocal Cauchy
//! transforms, by solving `F_ν(z) = x` branch by branch. On top of that sit a
//! sampler for the Markov chain whose transition kernels are `δₓ ▷ μₙ` and a
//! harness that checks stability of `D_{1/bₙ}(μ₁ ▷ ⋯ ▷ μₙ)`.

pub mod chain;
pub mod error;
pub mod lln;
pub mod measures;
pub mod monotone;
pub mod report;
mod roots;
pub mod selftest;
pub mod sequence;
pub mod transforms;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use measures::{AtomicMeasure, MeasureSpec};
pub use chain::{RngPolicy, TrajectoryBatch};
pub use monotone::{convolve, convolve_sequence, delta_convolve, ConvolutionOptions, Kernel};
pub use transforms::{nevanlinna_extract, NevanlinnaForm};
pub use sequence::{MeasureRule, NormalizerRule, SequenceSpec};
