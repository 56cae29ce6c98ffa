//! Small trainable score approximator with in-repo reverse-mode gradients.
//!
//! The network is noise-conditioned in the NCSNv2 style: an unconditional
//! raw map is scaled by 1 / std(t) at the output, i.e.
//! s(x, t) = raw(x) / sqrt(beta(t)). Two architectures share one flat
//! parameter vector:
//!
//! - `Conv`: a stack of same-padded 2-D convolutions (1 -> C -> ... -> C -> 1,
//!   odd kernels, tanh between layers) for patch-shaped inputs.
//! - `Dense`: a fully-connected stack over the flattened patch, used for 1-D
//!   verification against analytic scores.
//!
//! Both end with a learnable residual path from the input, raw = f(x) + r*x,
//! so the linear part of a score is representable even when the nonlinear
//! stack saturates. Parameters are initialized uniformly scaled by fan-in
//! from a fixed seed.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::RFGrid;
use crate::rng::SeededRng;
use crate::sde::SdeSchedule;

use super::ScoreModel;

/// Architecture descriptor. Widths are in parameters, not pixels: `Dense`
/// hidden sizes, `Conv` channel count / layer count / kernel size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "snake_case")]
pub enum ArchSpec {
    Dense { hidden: Vec<usize> },
    Conv { channels: usize, layers: usize, kernel: usize },
}

impl ArchSpec {
    fn validate(&self, patch_rows: usize, patch_cols: usize) -> Result<()> {
        match self {
            ArchSpec::Dense { hidden } => {
                if hidden.iter().any(|&h| h == 0) {
                    return Err(CoreError::InvalidParam("dense hidden width 0".into()));
                }
                let n = patch_rows * patch_cols;
                if n == 0 {
                    return Err(CoreError::InvalidParam("empty patch".into()));
                }
                Ok(())
            }
            ArchSpec::Conv { channels, layers, kernel } => {
                if *channels == 0 || *layers == 0 {
                    return Err(CoreError::InvalidParam("conv needs channels, layers >= 1".into()));
                }
                if *kernel == 0 || kernel % 2 == 0 {
                    return Err(CoreError::InvalidParam(format!(
                        "conv kernel must be odd, got {kernel}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// (in, out) channel or width plan per layer.
    fn layer_plan(&self, patch_elems: usize) -> Vec<(usize, usize)> {
        match self {
            ArchSpec::Dense { hidden } => {
                let mut dims = Vec::with_capacity(hidden.len() + 2);
                dims.push(patch_elems);
                dims.extend_from_slice(hidden);
                dims.push(patch_elems);
                dims.windows(2).map(|w| (w[0], w[1])).collect()
            }
            ArchSpec::Conv { channels, layers, .. } => {
                if *layers == 1 {
                    vec![(1, 1)]
                } else {
                    let mut plan = vec![(1, *channels)];
                    for _ in 0..layers - 2 {
                        plan.push((*channels, *channels));
                    }
                    plan.push((*channels, 1));
                    plan
                }
            }
        }
    }

    fn weights_per_unit(&self) -> usize {
        match self {
            ArchSpec::Dense { .. } => 1,
            ArchSpec::Conv { kernel, .. } => kernel * kernel,
        }
    }

    pub fn param_count(&self, patch_rows: usize, patch_cols: usize) -> usize {
        let per_unit = self.weights_per_unit();
        let plan = self.layer_plan(patch_rows * patch_cols);
        // Weights + biases per layer, plus the residual scalar.
        plan.iter()
            .map(|(i, o)| i * o * per_unit + o)
            .sum::<usize>()
            + 1
    }
}

/// Forward-pass bookkeeping needed by the backward pass.
pub(crate) struct Trace {
    /// Input and each layer's post-activation, all as flat channel-major
    /// buffers of `channels * rows * cols` (dense: `width`).
    activations: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre_activations: Vec<Vec<f64>>,
}

/// Trainable score network bound to a patch shape and a VE schedule.
#[derive(Debug, Clone)]
pub struct TrainableScoreNet {
    arch: ArchSpec,
    patch_rows: usize,
    patch_cols: usize,
    schedule: SdeSchedule,
    t_min: f64,
    params: Vec<f64>,
}

impl TrainableScoreNet {
    /// Fan-in-scaled uniform initialization from the given rng.
    pub fn init(
        arch: ArchSpec,
        patch_rows: usize,
        patch_cols: usize,
        schedule: SdeSchedule,
        t_min: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let mut net = Self::zeros(arch, patch_rows, patch_cols, schedule, t_min)?;
        let per_unit = net.arch.weights_per_unit();
        let plan = net.arch.layer_plan(patch_rows * patch_cols);
        let mut offset = 0;
        for (fan_in, fan_out) in plan {
            let scale = 1.0 / ((fan_in * per_unit) as f64).sqrt();
            let n_weights = fan_in * fan_out * per_unit;
            for p in &mut net.params[offset..offset + n_weights] {
                *p = rng.uniform_in(-scale, scale);
            }
            offset += n_weights + fan_out; // biases stay 0
        }
        // Residual scalar starts at 0 so a fresh net outputs the conv path only.
        Ok(net)
    }

    /// All-zero parameters (output is identically zero).
    pub fn zeros(
        arch: ArchSpec,
        patch_rows: usize,
        patch_cols: usize,
        schedule: SdeSchedule,
        t_min: f64,
    ) -> Result<Self> {
        arch.validate(patch_rows, patch_cols)?;
        if !(t_min > 0.0 && t_min < 1.0) {
            return Err(CoreError::InvalidParam(format!(
                "t_min must be in (0,1), got {t_min}"
            )));
        }
        let count = arch.param_count(patch_rows, patch_cols);
        Ok(TrainableScoreNet {
            arch,
            patch_rows,
            patch_cols,
            schedule,
            t_min,
            params: vec![0.0; count],
        })
    }

    pub fn from_params(
        arch: ArchSpec,
        patch_rows: usize,
        patch_cols: usize,
        schedule: SdeSchedule,
        t_min: f64,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut net = Self::zeros(arch, patch_rows, patch_cols, schedule, t_min)?;
        if params.len() != net.params.len() {
            return Err(CoreError::InvalidParam(format!(
                "parameter count {} does not match architecture ({} expected)",
                params.len(),
                net.params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(CoreError::InvalidParam("non-finite parameter".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn schedule(&self) -> &SdeSchedule {
        &self.schedule
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn check_shape(&self, x: &RFGrid) -> Result<()> {
        if x.shape() != (self.patch_rows, self.patch_cols) {
            return Err(CoreError::shape(
                "score net input",
                (self.patch_rows, self.patch_cols),
                x.shape(),
            ));
        }
        Ok(())
    }

    /// Unconditional raw map (before the 1/std(t) output scaling).
    pub fn raw(&self, x: &RFGrid) -> Result<RFGrid> {
        Ok(self.forward_traced(x)?.0)
    }

    pub(crate) fn forward_traced(&self, x: &RFGrid) -> Result<(RFGrid, Trace)> {
        self.check_shape(x)?;
        let (rows, cols) = (self.patch_rows, self.patch_cols);
        let plan = self.arch.layer_plan(rows * cols);
        let mut trace = Trace {
            activations: Vec::with_capacity(plan.len() + 1),
            pre_activations: Vec::with_capacity(plan.len()),
        };
        trace.activations.push(x.values().to_vec());
        let mut offset = 0;
        for (layer, &(c_in, c_out)) in plan.iter().enumerate() {
            let input = trace.activations.last().unwrap();
            let (pre, used) = match &self.arch {
                ArchSpec::Dense { .. } => {
                    dense_forward(&self.params[offset..], input, c_in, c_out)
                }
                ArchSpec::Conv { kernel, .. } => conv_forward(
                    &self.params[offset..],
                    input,
                    c_in,
                    c_out,
                    *kernel,
                    rows,
                    cols,
                ),
            };
            offset += used;
            let last = layer + 1 == plan.len();
            let act = if last {
                pre.clone()
            } else {
                pre.iter().map(|v| v.tanh()).collect()
            };
            trace.pre_activations.push(pre);
            trace.activations.push(act);
        }
        let residual = self.params[offset];
        let out_flat = trace.activations.last().unwrap();
        let mut out = x.scaled(residual);
        for (o, &f) in out.values_mut().iter_mut().zip(out_flat.iter()) {
            *o += f;
        }
        Ok((out, trace))
    }

    /// Gradient of `sum_i d_raw_i * raw_i` with respect to the parameters,
    /// accumulated into `grad` (same layout as `params`).
    pub(crate) fn backward(&self, x: &RFGrid, trace: &Trace, d_raw: &RFGrid, grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let (rows, cols) = (self.patch_rows, self.patch_cols);
        let plan = self.arch.layer_plan(rows * cols);
        // Residual path.
        let last_idx = self.params.len() - 1;
        grad[last_idx] += d_raw
            .values()
            .iter()
            .zip(x.values())
            .map(|(d, xv)| d * xv)
            .sum::<f64>();
        // Layer offsets in the flat parameter vector.
        let per_unit = self.arch.weights_per_unit();
        let mut offsets = Vec::with_capacity(plan.len());
        let mut offset = 0;
        for &(c_in, c_out) in &plan {
            offsets.push(offset);
            offset += c_in * c_out * per_unit + c_out;
        }
        let mut d_out: Vec<f64> = d_raw.values().to_vec();
        for layer in (0..plan.len()).rev() {
            let (c_in, c_out) = plan[layer];
            let last = layer + 1 == plan.len();
            // Through the activation.
            let mut d_pre = d_out;
            if !last {
                for (d, a) in d_pre.iter_mut().zip(&trace.activations[layer + 1]) {
                    *d *= 1.0 - a * a; // d tanh = 1 - tanh^2
                }
            }
            let input = &trace.activations[layer];
            let off = offsets[layer];
            d_out = match &self.arch {
                ArchSpec::Dense { .. } => dense_backward(
                    &self.params[off..],
                    &mut grad[off..],
                    input,
                    &d_pre,
                    c_in,
                    c_out,
                ),
                ArchSpec::Conv { kernel, .. } => conv_backward(
                    &self.params[off..],
                    &mut grad[off..],
                    input,
                    &d_pre,
                    c_in,
                    c_out,
                    *kernel,
                    rows,
                    cols,
                ),
            };
        }
    }
}

impl ScoreModel for TrainableScoreNet {
    /// raw(x) / std(t); requires t > 0 so the scaling is finite.
    fn evaluate(&self, x: &RFGrid, t: f64) -> Result<RFGrid> {
        if t <= 0.0 || t > 1.0 {
            return Err(CoreError::InvalidParam(format!(
                "score net requires t in (0,1], got {t}"
            )));
        }
        let std = self.schedule.kernel_std(t)?;
        Ok(self.raw(x)?.scaled(1.0 / std))
    }

    fn patch_shape(&self) -> Option<(usize, usize)> {
        Some((self.patch_rows, self.patch_cols))
    }
}

/// Dense layer: pre = W input + b. Parameter block: W row-major
/// (c_out x c_in), then b. Returns (pre, params consumed).
fn dense_forward(params: &[f64], input: &[f64], c_in: usize, c_out: usize) -> (Vec<f64>, usize) {
    let weights = &params[..c_in * c_out];
    let biases = &params[c_in * c_out..c_in * c_out + c_out];
    let mut pre = vec![0.0; c_out];
    for (o, pre_o) in pre.iter_mut().enumerate() {
        let row = &weights[o * c_in..(o + 1) * c_in];
        let mut acc = biases[o];
        for (w, v) in row.iter().zip(input) {
            acc += w * v;
        }
        *pre_o = acc;
    }
    (pre, c_in * c_out + c_out)
}

fn dense_backward(
    params: &[f64],
    grad: &mut [f64],
    input: &[f64],
    d_pre: &[f64],
    c_in: usize,
    c_out: usize,
) -> Vec<f64> {
    let weights = &params[..c_in * c_out];
    let (g_weights, rest) = grad.split_at_mut(c_in * c_out);
    let g_biases = &mut rest[..c_out];
    let mut d_input = vec![0.0; c_in];
    for o in 0..c_out {
        let d = d_pre[o];
        g_biases[o] += d;
        let row = &weights[o * c_in..(o + 1) * c_in];
        let g_row = &mut g_weights[o * c_in..(o + 1) * c_in];
        for i in 0..c_in {
            g_row[i] += d * input[i];
            d_input[i] += d * row[i];
        }
    }
    d_input
}

/// Same-padded 2-D convolution. Parameter block: weights indexed
/// [out][in][ky][kx], then biases [out]. Buffers are channel-major:
/// channel c occupies `[c*rows*cols, (c+1)*rows*cols)`.
#[allow(clippy::too_many_arguments)]
fn conv_forward(
    params: &[f64],
    input: &[f64],
    c_in: usize,
    c_out: usize,
    kernel: usize,
    rows: usize,
    cols: usize,
) -> (Vec<f64>, usize) {
    let k2 = kernel * kernel;
    let pad = (kernel / 2) as isize;
    let plane = rows * cols;
    let weights = &params[..c_in * c_out * k2];
    let biases = &params[c_in * c_out * k2..c_in * c_out * k2 + c_out];
    let mut pre = vec![0.0; c_out * plane];
    for o in 0..c_out {
        let out_plane = &mut pre[o * plane..(o + 1) * plane];
        out_plane.fill(biases[o]);
        for i in 0..c_in {
            let in_plane = &input[i * plane..(i + 1) * plane];
            let w = &weights[(o * c_in + i) * k2..(o * c_in + i + 1) * k2];
            for ky in 0..kernel {
                let dy = ky as isize - pad;
                for kx in 0..kernel {
                    let dx = kx as isize - pad;
                    let wv = w[ky * kernel + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    // out[y][x] += w * in[y+dy][x+dx] over valid source cells
                    let y_lo = (-dy).max(0) as usize;
                    let y_hi = (rows as isize - dy).min(rows as isize) as usize;
                    let x_lo = (-dx).max(0) as usize;
                    let x_hi = (cols as isize - dx).min(cols as isize) as usize;
                    for y in y_lo..y_hi {
                        let src_row = (y as isize + dy) as usize * cols;
                        let dst_row = y * cols;
                        for x in x_lo..x_hi {
                            out_plane[dst_row + x] +=
                                wv * in_plane[src_row + (x as isize + dx) as usize];
                        }
                    }
                }
            }
        }
    }
    (pre, c_in * c_out * k2 + c_out)
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    params: &[f64],
    grad: &mut [f64],
    input: &[f64],
    d_pre: &[f64],
    c_in: usize,
    c_out: usize,
    kernel: usize,
    rows: usize,
    cols: usize,
) -> Vec<f64> {
    let k2 = kernel * kernel;
    let pad = (kernel / 2) as isize;
    let plane = rows * cols;
    let weights = &params[..c_in * c_out * k2];
    let (g_weights, rest) = grad.split_at_mut(c_in * c_out * k2);
    let g_biases = &mut rest[..c_out];
    let mut d_input = vec![0.0; c_in * plane];
    for o in 0..c_out {
        let d_plane = &d_pre[o * plane..(o + 1) * plane];
        g_biases[o] += d_plane.iter().sum::<f64>();
        for i in 0..c_in {
            let in_plane = &input[i * plane..(i + 1) * plane];
            let di_plane = &mut d_input[i * plane..(i + 1) * plane];
            let w = &weights[(o * c_in + i) * k2..(o * c_in + i + 1) * k2];
            let g_w = &mut g_weights[(o * c_in + i) * k2..(o * c_in + i + 1) * k2];
            for ky in 0..kernel {
                let dy = ky as isize - pad;
                for kx in 0..kernel {
                    let dx = kx as isize - pad;
                    let y_lo = (-dy).max(0) as usize;
                    let y_hi = (rows as isize - dy).min(rows as isize) as usize;
                    let x_lo = (-dx).max(0) as usize;
                    let x_hi = (cols as isize - dx).min(cols as isize) as usize;
                    let mut g_acc = 0.0;
                    let wv = w[ky * kernel + kx];
                    for y in y_lo..y_hi {
                        let src_row = (y as isize + dy) as usize * cols;
                        let dst_row = y * cols;
                        for x in x_lo..x_hi {
                            let src = src_row + (x as isize + dx) as usize;
                            let d = d_plane[dst_row + x];
                            g_acc += d * in_plane[src];
                            di_plane[src] += d * wv;
                        }
                    }
                    g_w[ky * kernel + kx] += g_acc;
                }
            }
        }
    }
    d_input
}
