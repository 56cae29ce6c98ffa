//! Dehazing of RF-like 2-D signals with score-based diffusion priors.
//!
//! Two independently learned score models — one for the clean signal, one for
//! structured haze — are combined by joint posterior reverse-SDE sampling with
//! data consistency enforced in a μ-law companded domain. Frames are processed
//! as overlapping patches whose diffusion trajectories are interleaved at every
//! step, so the final stitch needs no windowing or blending.
//!
//! Module map:
//! - [`grid`]: the 2-D sample container, elementwise ops, and the URF1 tensor
//!   file format.
//! - [`rng`]: deterministic random number generation (SplitMix64 + Box-Muller).
//! - [`fft`]: power-of-two FFT utilities shared by envelope detection,
//!   autocorrelation, and the haze synthesizer.
//! - [`compand`]: μ-law encode/decode with analytic derivatives.
//! - [`sde`]: the variance-exploding schedule, forward perturbation kernel, and
//!   Euler-Maruyama reverse step.
//! - [`score`]: score-model abstraction — analytic Gaussian/GMM oracles, a small
//!   trainable network with in-repo reverse-mode gradients, DSM training, and
//!   the `.hsnet` checkpoint format.
//! - [`patch`]: overlapping patch planning, per-step interleaving, and stitching.
//! - [`dehaze`]: the joint posterior sampler (data consistency + two reverse
//!   diffusions per step, CCDF initialization).
//! - [`phantom`]: synthetic tissue/haze generation and dataset assembly.
//! - [`imaging`]: envelope detection, log compression, brightness matching, and
//!   PNG export.
//! - [`metrics`]: PSNR, gCNR, KS statistic, lateral FWHM.
//! - [`roi`]: region-of-interest masks, polygon JSON, Douglas-Peucker
//!   simplification, and key-frame interpolation.
//! - [`config`]: the JSON run configuration and eval manifest.

pub mod compand;
pub mod config;
pub mod dehaze;
pub mod error;
pub mod fft;
pub mod grid;
pub mod imaging;
pub mod metrics;
pub mod patch;
pub mod phantom;
pub mod rng;
pub mod roi;
pub mod score;
pub mod sde;

pub use error::{CoreError, Result};
pub use grid::RFGrid;
pub use rng::SeededRng;
