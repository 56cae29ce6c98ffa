//! Joint posterior reverse diffusion over (x_t, h_t) with companded-domain
//! data consistency.
//!
//! Each reverse step runs, per patch and in this order:
//!
//! 1. data consistency — ascent on the log-likelihood of the corrupted
//!    measurement, log p(y_hat_t | x_t, h_t) ~ -|| y_hat_t - C(C^-1(x_t) +
//!    gamma * C^-1(h_t)) ||^2, with separate step sizes lambda (signal) and
//!    kappa (haze);
//! 2. one Euler-Maruyama reverse step for x with the signal score and one
//!    for h with the haze score, using independent noise draws;
//! 3. a patch-interleave barrier (handled by the driver).
//!
//! Trajectories start at t = tau from a forward-perturbed measurement (CCDF
//! initialization) with h seeded equal to x. The corrupted measurement
//! y_hat_t is redrawn from the perturbation kernel at every step; a
//! frozen-path variant reuses one noise draw for ablations.
//!
//! All randomness derives from one seed: patch i uses the child stream
//! seed XOR i, and draws within a patch happen in a fixed order, so results
//! are bit-identical for a given config regardless of worker count.

use crate::compand::{
    decode, decode_deriv_scalar, encode, encode_deriv_scalar, encode_scalar, normalize_to_unit,
    CompandParams,
};
use crate::error::{CoreError, Result};
use crate::grid::RFGrid;
use crate::patch::{extract_all, interleave, plan, stitch, PatchLayout};
use crate::rng::{child_seed, SeededRng};
use crate::score::ScoreModel;
use crate::sde::{reverse_step, DiffusionState, NoiseSource, SdeSchedule};

/// Everything the sampler consumes beyond the two score models.
#[derive(Debug, Clone)]
pub struct DehazeConfig {
    /// Data-consistency step size for the signal chain.
    pub lambda_x: f64,
    /// Data-consistency step size for the haze chain.
    pub kappa_h: f64,
    /// Haze amplitude in the forward model y = x + gamma * h; gamma = 0
    /// removes the haze contribution entirely.
    pub gamma: f64,
    pub compand: CompandParams,
    pub schedule: SdeSchedule,
    pub patch: PatchLayout,
    pub seed: u64,
    /// Reuse a single noise draw for y_hat_t along the whole trajectory
    /// instead of redrawing per step.
    pub frozen_y_path: bool,
    /// Initialize h with its own noise draw instead of h = x.
    pub independent_init: bool,
    /// Upper bound on patch workers; results do not depend on it.
    pub threads: usize,
}

impl Default for DehazeConfig {
    fn default() -> Self {
        DehazeConfig {
            lambda_x: 0.5,
            kappa_h: 0.5,
            gamma: 1.0,
            compand: CompandParams::default(),
            schedule: SdeSchedule::default(),
            patch: PatchLayout::default(),
            seed: 42,
            frozen_y_path: false,
            independent_init: false,
            threads: 1,
        }
    }
}

impl DehazeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda_x),
            ("kappa", self.kappa_h),
            ("gamma", self.gamma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CoreError::InvalidParam(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// The coupled iterates of the two chains at one diffusion time.
#[derive(Debug, Clone)]
pub struct JointState {
    pub x: RFGrid,
    pub h: RFGrid,
    pub t: f64,
}

/// Per-step measurements surfaced in the diagnostics CSV.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    /// Squared norm of the data-consistency residual, summed over patches.
    pub residual_sq_norm: f64,
    /// Samples outside [-1, 1] encountered by the companding maps.
    pub compand_out_of_range: usize,
}

/// Output of the full pipeline, expanded back to RF units.
#[derive(Debug, Clone)]
pub struct DehazeResult {
    pub x_rf: RFGrid,
    pub h_rf: RFGrid,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// CCDF initialization: x = y + sqrt(beta(tau)) * z at t = tau, h = x.
/// With `independent_init` the haze chain draws its own noise.
pub fn ccdf_init(
    y: &RFGrid,
    cfg: &DehazeConfig,
    noise: &mut impl NoiseSource,
) -> Result<JointState> {
    let s = &cfg.schedule;
    // Snap tau onto the step grid so the loop lands exactly on t = 0.
    let k = (s.tau() * s.steps_t() as f64).round().max(1.0) as usize;
    let t = k as f64 / s.steps_t() as f64;
    let std = s.kernel_std(t)?;
    let z = noise.gaussian(y.rows(), y.cols());
    let x = y.zip_map(&z, |yv, zv| yv + std * zv)?;
    let h = if cfg.independent_init {
        let z2 = noise.gaussian(y.rows(), y.cols());
        y.zip_map(&z2, |yv, zv| yv + std * zv)?
    } else {
        x.clone()
    };
    Ok(JointState { x, h, t })
}

struct DcEval {
    residual: RFGrid,
    sq_norm: f64,
    /// C^-1(x) + gamma * C^-1(h), the expanded-domain estimate.
    expanded_sum: RFGrid,
    out_of_range: usize,
}

fn dc_eval(y_hat: &RFGrid, x: &RFGrid, h: &RFGrid, cfg: &DehazeConfig) -> Result<DcEval> {
    y_hat.check_same_shape(x, "dc x")?;
    y_hat.check_same_shape(h, "dc h")?;
    let p = &cfg.compand;
    let (dec_x, oob_x) = decode(x, p)?;
    let (dec_h, oob_h) = decode(h, p)?;
    let gamma = cfg.gamma;
    let expanded_sum = dec_x.zip_map(&dec_h, |a, b| a + gamma * b)?;
    let oob_u = expanded_sum.values().iter().filter(|v| v.abs() > 1.0).count();
    let reencoded = expanded_sum.map(|v| encode_scalar(v, p));
    let residual = y_hat.zip_map(&reencoded, |yv, cv| yv - cv)?;
    let sq_norm = residual.energy();
    Ok(DcEval {
        residual,
        sq_norm,
        expanded_sum,
        out_of_range: oob_x + oob_h + oob_u,
    })
}

/// Data-consistency residual y_hat - C(C^-1(x) + gamma * C^-1(h)) and its
/// squared norm (sum over samples).
pub fn dc_residual(
    y_hat: &RFGrid,
    x: &RFGrid,
    h: &RFGrid,
    cfg: &DehazeConfig,
) -> Result<(RFGrid, f64)> {
    let ev = dc_eval(y_hat, x, h, cfg)?;
    Ok((ev.residual, ev.sq_norm))
}

/// Gradients of the measurement log-likelihood with respect to x and h, by
/// the chain rule through the companding maps:
///
///   grad_x = 2 r . C'(u) . (C^-1)'(x),   grad_h = gamma * 2 r . C'(u) . (C^-1)'(h)
///
/// with u = C^-1(x) + gamma C^-1(h) and r the residual. Signs are chosen so
/// the ascent step x <- x + lambda * grad_x decreases the residual norm.
pub fn dc_gradients(
    y_hat: &RFGrid,
    x: &RFGrid,
    h: &RFGrid,
    cfg: &DehazeConfig,
) -> Result<(RFGrid, RFGrid)> {
    let ev = dc_eval(y_hat, x, h, cfg)?;
    Ok(gradients_from_eval(&ev, x, h, cfg))
}

fn gradients_from_eval(ev: &DcEval, x: &RFGrid, h: &RFGrid, cfg: &DehazeConfig) -> (RFGrid, RFGrid) {
    let p = &cfg.compand;
    let gamma = cfg.gamma;
    let mut grad_x = ev.residual.clone();
    let mut grad_h = ev.residual.clone();
    for i in 0..grad_x.len() {
        let enc_du = encode_deriv_scalar(ev.expanded_sum.values()[i], p);
        let r2 = 2.0 * ev.residual.values()[i] * enc_du;
        grad_x.values_mut()[i] = r2 * decode_deriv_scalar(x.values()[i], p);
        grad_h.values_mut()[i] = gamma * r2 * decode_deriv_scalar(h.values()[i], p);
    }
    (grad_x, grad_h)
}

/// One joint step: data consistency for both chains (gradients evaluated at
/// the incoming state), then a reverse diffusion step per chain with
/// independent noise draws. Returns the new state plus step measurements.
pub fn joint_step(
    state: &JointState,
    y_hat: &RFGrid,
    tissue: &dyn ScoreModel,
    haze: &dyn ScoreModel,
    cfg: &DehazeConfig,
    noise: &mut impl NoiseSource,
) -> Result<(JointState, f64, usize)> {
    if state.t <= 0.0 {
        return Err(CoreError::InvalidParam(format!(
            "joint_step requires t > 0, got {}",
            state.t
        )));
    }
    let ev = dc_eval(y_hat, &state.x, &state.h, cfg)?;
    let (grad_x, grad_h) = gradients_from_eval(&ev, &state.x, &state.h, cfg);
    let lambda = cfg.lambda_x;
    let kappa = cfg.kappa_h;
    let x_dc = state.x.zip_map(&grad_x, |v, g| v + lambda * g)?;
    let h_dc = state.h.zip_map(&grad_h, |v, g| v + kappa * g)?;

    let score_x = tissue.evaluate(&x_dc, state.t)?;
    let next_x = reverse_step(
        &DiffusionState { x: x_dc, t: state.t },
        &score_x,
        &cfg.schedule,
        noise,
    )
    .map_err(|e| step_context(e, state.t, "signal"))?;
    let score_h = haze.evaluate(&h_dc, state.t)?;
    let next_h = reverse_step(
        &DiffusionState { x: h_dc, t: state.t },
        &score_h,
        &cfg.schedule,
        noise,
    )
    .map_err(|e| step_context(e, state.t, "haze"))?;

    Ok((
        JointState {
            x: next_x.x,
            h: next_h.x,
            t: next_x.t,
        },
        ev.sq_norm,
        ev.out_of_range,
    ))
}

fn step_context(e: CoreError, t: f64, chain: &str) -> CoreError {
    match e {
        CoreError::Numeric(msg) => {
            CoreError::Numeric(format!("{chain} chain at t={t:.4}: {msg}"))
        }
        other => other,
    }
}

/// Per-patch trajectory bookkeeping.
struct PatchRun {
    rng: SeededRng,
    y_patch: RFGrid,
    frozen_z: Option<RFGrid>,
    state: JointState,
    last_sq_norm: f64,
    last_oob: usize,
    error: Option<CoreError>,
}

impl PatchRun {
    fn step(&mut self, cfg: &DehazeConfig, tissue: &dyn ScoreModel, haze: &dyn ScoreModel) {
        let t = self.state.t;
        let std = match cfg.schedule.kernel_std(t) {
            Ok(v) => v,
            Err(e) => {
                self.error = Some(e);
                return;
            }
        };
        let y_hat = match &self.frozen_z {
            Some(z) => self.y_patch.zip_map(z, |yv, zv| yv + std * zv),
            None => {
                let z = self.rng.gaussian(self.y_patch.rows(), self.y_patch.cols());
                self.y_patch.zip_map(&z, |yv, zv| yv + std * zv)
            }
        };
        let y_hat = match y_hat {
            Ok(v) => v,
            Err(e) => {
                self.error = Some(e);
                return;
            }
        };
        match joint_step(&self.state, &y_hat, tissue, haze, cfg, &mut self.rng) {
            Ok((next, sq, oob)) => {
                self.state = next;
                self.last_sq_norm = sq;
                self.last_oob = oob;
            }
            Err(e) => self.error = Some(e),
        }
    }
}

fn check_model_shape(model: &dyn ScoreModel, patch: &PatchLayout, which: &str) -> Result<()> {
    if let Some((r, c)) = model.patch_shape() {
        if (r, c) != (patch.patch_rows(), patch.patch_cols()) {
            return Err(CoreError::InvalidParam(format!(
                "{which} model patch shape {r}x{c} does not match configured patch {}x{}",
                patch.patch_rows(),
                patch.patch_cols()
            )));
        }
    }
    Ok(())
}

/// Run the sampler on an already-companded measurement. Returns the
/// companded-domain solutions (x0, h0) and per-step diagnostics. This is the
/// core loop: factorize into patches, CCDF-init each, run tau*T joint steps
/// with an interleave barrier after every step, stitch.
pub fn dehaze_companded(
    y_companded: &RFGrid,
    tissue: &dyn ScoreModel,
    haze: &dyn ScoreModel,
    cfg: &DehazeConfig,
) -> Result<(RFGrid, RFGrid, Vec<StepDiagnostics>)> {
    cfg.validate()?;
    check_model_shape(tissue, &cfg.patch, "signal")?;
    check_model_shape(haze, &cfg.patch, "haze")?;
    let patch_plan = plan(y_companded.rows(), y_companded.cols(), &cfg.patch)?;
    let y_patches = extract_all(y_companded, &patch_plan)?;

    let mut runs: Vec<PatchRun> = Vec::with_capacity(y_patches.len());
    for (idx, y_patch) in y_patches.into_iter().enumerate() {
        let mut rng = SeededRng::new(child_seed(cfg.seed, idx as u64));
        let state = ccdf_init(&y_patch, cfg, &mut rng)?;
        let frozen_z = cfg
            .frozen_y_path
            .then(|| rng.gaussian(y_patch.rows(), y_patch.cols()));
        runs.push(PatchRun {
            rng,
            y_patch,
            frozen_z,
            state,
            last_sq_norm: 0.0,
            last_oob: 0,
            error: None,
        });
    }

    let total_steps = (cfg.schedule.tau() * cfg.schedule.steps_t() as f64)
        .round()
        .max(1.0) as usize;
    let workers = cfg.threads.max(1).min(runs.len().max(1));
    let mut diagnostics = Vec::with_capacity(total_steps);
    let mut x_patches: Vec<RFGrid>;
    let mut h_patches: Vec<RFGrid>;
    for step in 0..total_steps {
        let t = runs[0].state.t;
        if workers == 1 {
            for run in runs.iter_mut() {
                run.step(cfg, tissue, haze);
            }
        } else {
            let chunk = runs.len().div_ceil(workers);
            std::thread::scope(|scope| {
                for slice in runs.chunks_mut(chunk) {
                    scope.spawn(|| {
                        for run in slice.iter_mut() {
                            run.step(cfg, tissue, haze);
                        }
                    });
                }
            });
        }
        for run in runs.iter_mut() {
            if let Some(e) = run.error.take() {
                return Err(step_context(e, t, "patch"));
            }
        }
        // Interleave barrier: both chains, fixed patch order.
        x_patches = runs.iter().map(|r| r.state.x.clone()).collect();
        h_patches = runs.iter().map(|r| r.state.h.clone()).collect();
        interleave(&mut x_patches, &patch_plan)?;
        interleave(&mut h_patches, &patch_plan)?;
        for (run, (x, h)) in runs
            .iter_mut()
            .zip(x_patches.into_iter().zip(h_patches.into_iter()))
        {
            run.state.x = x;
            run.state.h = h;
        }
        diagnostics.push(StepDiagnostics {
            step,
            t,
            residual_sq_norm: runs.iter().map(|r| r.last_sq_norm).sum(),
            compand_out_of_range: runs.iter().map(|r| r.last_oob).sum(),
        });
    }

    let x_patches: Vec<RFGrid> = runs.iter().map(|r| r.state.x.clone()).collect();
    let h_patches: Vec<RFGrid> = runs.iter().map(|r| r.state.h.clone()).collect();
    let x0 = stitch(&x_patches, &patch_plan)?
        .with_spacing(y_companded.axial_spacing(), y_companded.lateral_spacing())?;
    let h0 = stitch(&h_patches, &patch_plan)?
        .with_spacing(y_companded.axial_spacing(), y_companded.lateral_spacing())?;
    Ok((x0, h0, diagnostics))
}

/// Full pipeline on an RF measurement: normalize to unit magnitude, compand,
/// run the joint sampler, expand, and undo the normalization. The haze
/// output is the prior-domain estimate; its contribution to the measurement
/// is gamma * h_rf.
pub fn dehaze(
    y_rf: &RFGrid,
    tissue: &dyn ScoreModel,
    haze: &dyn ScoreModel,
    cfg: &DehazeConfig,
) -> Result<DehazeResult> {
    if !y_rf.is_finite() {
        return Err(CoreError::InvalidGrid("dehaze: non-finite measurement".into()));
    }
    let (y_norm, scale) = normalize_to_unit(y_rf)?;
    let (y_companded, _) = encode(&y_norm, &cfg.compand)?;
    let (x0, h0, diagnostics) = dehaze_companded(&y_companded, tissue, haze, cfg)?;
    let (x_dec, _) = decode(&x0, &cfg.compand)?;
    let (h_dec, _) = decode(&h0, &cfg.compand)?;
    Ok(DehazeResult {
        x_rf: x_dec.scaled(scale),
        h_rf: h_dec.scaled(scale),
        diagnostics,
    })
}
