//! Variance-exploding diffusion schedule and Euler-Maruyama reverse stepping.
//!
//! The forward process has zero drift and diffusion coefficient
//! g(t) = sigma^t, so the perturbation kernel at time t is Gaussian with
//! variance beta(t) = (sigma^(2t) - 1) / (2 ln sigma) and unit signal scaling
//! (alpha_t = 1). The reverse-time update per step of size dt = 1/T is
//!
//!   x <- x + g(t)^2 * score * dt + g(t) * sqrt(dt) * z
//!
//! with the stochastic injection omitted on the final step so outputs are
//! denoised to the mean at t = 0. Time steps live on the uniform grid
//! t_k = k / T; step indices are snapped to that grid to avoid floating-point
//! drift over long trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::{gaussian_grid, RFGrid};
use crate::rng::SeededRng;

/// Variance-exploding schedule: sigma, step count T, CCDF start tau.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SdeSchedule {
    sigma: f64,
    steps_t: usize,
    tau: f64,
}

impl SdeSchedule {
    pub fn new(sigma: f64, steps_t: usize, tau: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 1.0) {
            return Err(CoreError::InvalidParam(format!("sigma must be > 1, got {sigma}")));
        }
        if steps_t == 0 {
            return Err(CoreError::InvalidParam("steps_T must be >= 1".into()));
        }
        if !(tau.is_finite() && tau > 0.0 && tau <= 1.0) {
            return Err(CoreError::InvalidParam(format!("tau must be in (0,1], got {tau}")));
        }
        Ok(SdeSchedule { sigma, steps_t, tau })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn steps_t(&self) -> usize {
        self.steps_t
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps_t as f64
    }

    /// Diffusion coefficient g(t) = sigma^t.
    pub fn g(&self, t: f64) -> f64 {
        self.sigma.powf(t)
    }

    /// Accumulated kernel variance beta(t) = (sigma^(2t) - 1) / (2 ln sigma).
    pub fn beta(&self, t: f64) -> f64 {
        let ln_sigma = self.sigma.ln();
        ((2.0 * t * ln_sigma).exp_m1()) / (2.0 * ln_sigma)
    }

    /// Kernel standard deviation sqrt(beta(t)); 0 at t = 0.
    pub fn kernel_std(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(CoreError::InvalidParam(format!("t must be in [0,1], got {t}")));
        }
        Ok(self.beta(t).sqrt())
    }

    /// Number of reverse steps when starting at tau: round(tau * T).
    pub fn ccdf_steps(&self) -> usize {
        (self.tau * self.steps_t as f64).round() as usize
    }
}

impl Default for SdeSchedule {
    fn default() -> Self {
        SdeSchedule {
            sigma: 25.0,
            steps_t: 200,
            tau: 0.8,
        }
    }
}

/// One point of a reverse trajectory: companded-domain iterate and its time.
#[derive(Debug, Clone)]
pub struct DiffusionState {
    pub x: RFGrid,
    pub t: f64,
}

/// Source of stochastic injections. Reverse steps are generic over this so
/// unit tests can pin the noise; production code passes a [`SeededRng`].
pub trait NoiseSource {
    fn gaussian(&mut self, rows: usize, cols: usize) -> RFGrid;
}

impl NoiseSource for SeededRng {
    fn gaussian(&mut self, rows: usize, cols: usize) -> RFGrid {
        gaussian_grid(self, rows, cols).expect("dimensions >= 1x1")
    }
}

/// Test hook: injects zero noise everywhere.
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn gaussian(&mut self, rows: usize, cols: usize) -> RFGrid {
        RFGrid::zeros(rows, cols).expect("dimensions >= 1x1")
    }
}

/// Sample from the perturbation kernel: x0 + sqrt(beta(t)) * z.
pub fn forward_perturb(
    x0: &RFGrid,
    t: f64,
    s: &SdeSchedule,
    noise: &mut impl NoiseSource,
) -> Result<RFGrid> {
    let std = s.kernel_std(t)?;
    let z = noise.gaussian(x0.rows(), x0.cols());
    x0.zip_map(&z, |x, n| x + std * n)
}

/// One Euler-Maruyama reverse step. The drift term f(t) x vanishes for the
/// variance-exploding family. When the step lands on t = 0 the noise
/// injection is omitted.
pub fn reverse_step(
    state: &DiffusionState,
    score: &RFGrid,
    s: &SdeSchedule,
    noise: &mut impl NoiseSource,
) -> Result<DiffusionState> {
    if state.t <= 0.0 {
        return Err(CoreError::InvalidParam(format!(
            "reverse_step requires t > 0, got {}",
            state.t
        )));
    }
    state.x.check_same_shape(score, "reverse_step score")?;
    let dt = s.dt();
    // Snap to the uniform grid t_k = k / T.
    let k = (state.t * s.steps_t as f64).round() as i64;
    let k_next = (k - 1).max(0);
    let t_next = k_next as f64 / s.steps_t as f64;
    let g = s.g(state.t);
    let drift = g * g * dt;
    let mut x = state.x.zip_map(score, |xv, sv| xv + drift * sv)?;
    if k_next > 0 {
        let z = noise.gaussian(x.rows(), x.cols());
        let amp = g * dt.sqrt();
        x = x.zip_map(&z, |xv, zv| xv + amp * zv)?;
    }
    if !x.is_finite() {
        return Err(CoreError::Numeric(format!(
            "reverse_step produced non-finite iterate at t={}",
            state.t
        )));
    }
    Ok(DiffusionState { x, t: t_next })
}

/// Score of the perturbation kernel at xt: -(xt - x0) / beta(t). This is the
/// regression target of denoising score matching; undefined at t = 0.
pub fn dsm_target(x0: &RFGrid, xt: &RFGrid, t: f64, s: &SdeSchedule) -> Result<RFGrid> {
    if t <= 0.0 {
        return Err(CoreError::InvalidParam("dsm_target requires t > 0".into()));
    }
    if t > 1.0 {
        return Err(CoreError::InvalidParam(format!("t must be in (0,1], got {t}")));
    }
    x0.check_same_shape(xt, "dsm_target")?;
    let beta = s.beta(t);
    xt.zip_map(x0, |xtv, x0v| -(xtv - x0v) / beta)
}
