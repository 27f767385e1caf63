//! Heat diffusion on graphs, and recovery of what drove it.
//!
//! The library simulates the diffusion model `dx/dt = -L x + q` on a
//! weighted undirected graph with Laplacian `L`, where `x(0)` is an
//! initial field and `q` a time-invariant external input. Observing the
//! field at `K` selected vertices over `T` sample times yields a linear
//! system with Khatri-Rao structure; solving it recovers `x(0)`, `q`, or
//! both. The crate covers the whole pipeline:
//!
//! - [`graph`]: graphs, Laplacians, JSON graph files;
//! - [`spectrum`]: canonical eigendecomposition, graph Fourier transform,
//!   spectral filters;
//! - [`mesh`]: triangle meshes, cotangent Laplacians, a plate-with-cavity
//!   generator;
//! - [`diffusion`]: closed-form field evolution from spectral kernels;
//! - [`sampling`]: vertex selection, observation operators, greedy sensor
//!   placement, conditioning diagnostics;
//! - [`recovery`]: rank-checked least-squares estimation of the sources;
//! - [`scenario`] / [`experiment`]: declarative experiment configs,
//!   Monte-Carlo noise trials, sweeps, and deterministic reports.
//!
//! The long-form guide lives in `book/`; its chapters compile and run as
//! doc-tests (see [`book`]).

pub mod diffusion;
mod error;
pub mod experiment;
pub mod graph;
pub mod mesh;
pub mod recovery;
pub mod sampling;
pub mod scenario;
pub mod spectrum;

#[doc(hidden)]
pub mod testutil;

pub use error::{Error, Result};

#[doc = include_str!("../../../README.md")]
#[cfg(doctest)]
pub mod readme {}

/// The guide's chapters, included verbatim so every code block in
/// `book/src/` is compiled and executed by `cargo test --doc`.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/graphs-and-spectra.md")]
    pub mod graphs_and_spectra {}
    #[doc = include_str!("../../../book/src/meshes.md")]
    pub mod meshes {}
    #[doc = include_str!("../../../book/src/diffusion.md")]
    pub mod diffusion {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    pub mod sampling {}
    #[doc = include_str!("../../../book/src/recovery.md")]
    pub mod recovery {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
}
