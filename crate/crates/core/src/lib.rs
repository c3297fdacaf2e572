//! Spatially coupled LDPC ensembles on the binary erasure channel.
//!
//! The crate covers the whole finite-length analysis pipeline for the random
//! `(l,r,L)` ensemble and the protograph-based `(l,r,L)_P` ensemble:
//!
//! - [`protograph`]: base protographs, coupling into a chain of `L` positions, edge-type numbering.
//! - [`dd`]: multi-edge-type degree distributions and their BEC initialization.
//! - [`sampler`]: finite Tanner graphs by copy-and-permute lifting or by the random socket construction.
//! - [`peeling`]: BEC transmission and the peeling decoder with deg1 trajectories.
//! - [`mean`]: the expected graph evolution (ODE), BP threshold, steady-state plateau and `gamma`.
//! - [`montecarlo`]: batches of seeded peeling trials and survivor-conditioned statistics of `c1`.
//! - [`variance`]: one-step variance proxy, Monte Carlo variance and covariance-decay fits.
//! - [`scaling`]: survival time `mu0`, waterfall error probability and M-equivalence.
//! - [`experiment`]: configuration, Monte Carlo WER sweeps and figure data used by the `scldpc` binary.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod dd;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod mean;
pub mod montecarlo;
pub mod peeling;
pub mod protograph;
pub mod rng;
pub mod sampler;
pub mod scaling;
pub mod variance;

pub use ensemble::{EnsembleSpec, Family};
pub use error::{Error, Result};
