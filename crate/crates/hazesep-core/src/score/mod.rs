//! Score-function abstraction s(x_t, t) ~ grad log p(x_t).
//!
//! Three families implement [`ScoreModel`]: exact analytic scores for Gaussian
//! and Gaussian-mixture priors (closed under the VE perturbation kernel, used
//! as verification oracles), and a small trainable network fitted by denoising
//! score matching with in-repo reverse-mode gradients.

mod analytic;
mod checkpoint;
mod net;
mod train;

pub use analytic::{AnalyticGaussianScore, AnalyticGmmScore, GaussianMean, GmmComponent};
pub use checkpoint::{
    load_checkpoint, load_checkpoint_bytes, load_checkpoint_file, save_checkpoint,
    save_checkpoint_file, Checkpoint, CheckpointHeader, ModelSpec, SaveModel,
};
pub use net::{ArchSpec, TrainableScoreNet};
pub use train::{augment, augment_with, dsm_loss_and_grad, train, TrainOptions};

use crate::error::Result;
use crate::grid::RFGrid;

/// An evaluatable approximation of grad log p(x_t) at noise scale t.
pub trait ScoreModel: Send + Sync {
    /// Score at `x` for diffusion time `t`; output has the shape of `x`.
    fn evaluate(&self, x: &RFGrid, t: f64) -> Result<RFGrid>;

    /// Patch shape the model is bound to, if any. `None` means the model
    /// evaluates on grids of any shape.
    fn patch_shape(&self) -> Option<(usize, usize)> {
        None
    }
}

/// Identically-zero score; handy as a test stand-in for "no prior".
pub struct ZeroScore;

impl ScoreModel for ZeroScore {
    fn evaluate(&self, x: &RFGrid, _t: f64) -> Result<RFGrid> {
        RFGrid::zeros(x.rows(), x.cols())
    }
}
