//! μ-law dynamic-range compression and expansion with analytic derivatives.
//!
//! Encoding: C(x) = sign(x) * ln(1 + mu*|x|) / ln(1 + mu)
//! Expansion: C^-1(c) = sign(c) * ((1 + mu)^|c| - 1) / mu
//!
//! Both maps are defined on [-1, 1]. Diffusion iterates legitimately leave
//! that interval mid-trajectory, so outside it both maps continue linearly
//! with the slope they have at +-1. The extension keeps the pair an exact
//! global bijection with bounded derivatives; the count of out-of-range
//! samples is reported so pipelines can log it. Implementations use
//! `ln_1p`/`exp_m1` so small mu values stay precise.

use crate::error::{CoreError, Result};
use crate::grid::RFGrid;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CompandParams {
    mu: f64,
}

impl CompandParams {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(CoreError::InvalidParam(format!("mu must be > 0, got {mu}")));
        }
        Ok(CompandParams { mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    fn ln1p_mu(&self) -> f64 {
        self.mu.ln_1p()
    }

    /// C'(1), the slope used for the linear extension of the encoder.
    fn encode_edge_slope(&self) -> f64 {
        self.mu / ((1.0 + self.mu) * self.ln1p_mu())
    }

    /// (C^-1)'(1) = 1 / C'(1).
    fn decode_edge_slope(&self) -> f64 {
        (1.0 + self.mu) * self.ln1p_mu() / self.mu
    }
}

impl Default for CompandParams {
    fn default() -> Self {
        CompandParams { mu: 255.0 }
    }
}

/// Scalar μ-law compression (see [`encode`]).
#[inline]
pub fn encode_scalar(v: f64, p: &CompandParams) -> f64 {
    let a = v.abs();
    let mag = if a <= 1.0 {
        (p.mu * a).ln_1p() / p.ln1p_mu()
    } else {
        1.0 + p.encode_edge_slope() * (a - 1.0)
    };
    mag.copysign(v)
}

/// Scalar μ-law expansion, exact inverse of [`encode_scalar`].
#[inline]
pub fn decode_scalar(v: f64, p: &CompandParams) -> f64 {
    let a = v.abs();
    let mag = if a <= 1.0 {
        (a * p.ln1p_mu()).exp_m1() / p.mu
    } else {
        1.0 + p.decode_edge_slope() * (a - 1.0)
    };
    mag.copysign(v)
}

#[inline]
pub(crate) fn encode_deriv_scalar(v: f64, p: &CompandParams) -> f64 {
    let a = v.abs();
    if a <= 1.0 {
        p.mu / ((1.0 + p.mu * a) * p.ln1p_mu())
    } else {
        p.encode_edge_slope()
    }
}

#[inline]
pub(crate) fn decode_deriv_scalar(v: f64, p: &CompandParams) -> f64 {
    let a = v.abs();
    if a <= 1.0 {
        (a * p.ln1p_mu()).exp() * p.ln1p_mu() / p.mu
    } else {
        p.decode_edge_slope()
    }
}

fn count_out_of_range(x: &RFGrid) -> usize {
    x.values().iter().filter(|v| v.abs() > 1.0).count()
}

/// μ-law compression. Returns the encoded grid and the number of samples that
/// fell outside [-1, 1] (mapped by the linear extension).
pub fn encode(x: &RFGrid, p: &CompandParams) -> Result<(RFGrid, usize)> {
    if !x.is_finite() {
        return Err(CoreError::InvalidGrid("encode: non-finite input".into()));
    }
    Ok((x.map(|v| encode_scalar(v, p)), count_out_of_range(x)))
}

/// μ-law expansion, the exact inverse of [`encode`].
pub fn decode(c: &RFGrid, p: &CompandParams) -> Result<(RFGrid, usize)> {
    if !c.is_finite() {
        return Err(CoreError::InvalidGrid("decode: non-finite input".into()));
    }
    Ok((c.map(|v| decode_scalar(v, p)), count_out_of_range(c)))
}

/// Elementwise C'(x) = mu / ((1 + mu*|x|) * ln(1 + mu)); even and positive.
pub fn encode_deriv(x: &RFGrid, p: &CompandParams) -> RFGrid {
    x.map(|v| encode_deriv_scalar(v, p))
}

/// Elementwise (C^-1)'(c) = (1 + mu)^|c| * ln(1 + mu) / mu.
pub fn decode_deriv(c: &RFGrid, p: &CompandParams) -> RFGrid {
    c.map(|v| decode_deriv_scalar(v, p))
}

/// Divide by max |x| so the result has unit maximum magnitude; returns the
/// scale so the pipeline can undo the normalization. One shared scale per
/// frame keeps the additive measurement model valid in a common unit.
pub fn normalize_to_unit(x: &RFGrid) -> Result<(RFGrid, f64)> {
    let scale = x.max_abs();
    if scale == 0.0 {
        return Err(CoreError::InvalidGrid("normalize_to_unit: all-zero grid".into()));
    }
    Ok((x.scaled(1.0 / scale), scale))
}
