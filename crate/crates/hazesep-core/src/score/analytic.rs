//! Exact scores for Gaussian and Gaussian-mixture priors.
//!
//! Both priors are closed under the VE perturbation kernel: perturbing
//! N(m, v) by beta(t) gives N(m, v + beta(t)), so the noise-perturbed score
//! is available in closed form. These serve as verification oracles for the
//! sampler and the trained networks.

use crate::error::{CoreError, Result};
use crate::grid::RFGrid;
use crate::sde::SdeSchedule;

use super::ScoreModel;

/// Mean of a Gaussian prior: one scalar shared by all pixels, or a full grid.
#[derive(Debug, Clone)]
pub enum GaussianMean {
    Scalar(f64),
    Grid(RFGrid),
}

/// Score of the beta(t)-convolved Gaussian prior N(mean, variance):
/// s(x, t) = -(x - mean) / (variance + beta(t)).
#[derive(Debug, Clone)]
pub struct AnalyticGaussianScore {
    mean: GaussianMean,
    variance: f64,
    schedule: SdeSchedule,
}

impl AnalyticGaussianScore {
    pub fn new(mean: GaussianMean, variance: f64, schedule: SdeSchedule) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(CoreError::InvalidParam(format!(
                "gaussian score variance must be > 0, got {variance}"
            )));
        }
        Ok(AnalyticGaussianScore {
            mean,
            variance,
            schedule,
        })
    }

    pub fn scalar(mean: f64, variance: f64, schedule: SdeSchedule) -> Result<Self> {
        Self::new(GaussianMean::Scalar(mean), variance, schedule)
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

impl ScoreModel for AnalyticGaussianScore {
    fn evaluate(&self, x: &RFGrid, t: f64) -> Result<RFGrid> {
        let denom = self.variance + self.schedule.beta(t);
        match &self.mean {
            GaussianMean::Scalar(m) => {
                let m = *m;
                Ok(x.map(|v| -(v - m) / denom))
            }
            GaussianMean::Grid(mean) => {
                x.check_same_shape(mean, "analytic gaussian score mean")?;
                x.zip_map(mean, |v, m| -(v - m) / denom)
            }
        }
    }
}

/// One mixture component: weight, scalar mean, variance.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Exact elementwise score of log sum_i w_i N(x; m_i, v_i + beta(t)).
#[derive(Debug, Clone)]
pub struct AnalyticGmmScore {
    components: Vec<GmmComponent>,
    schedule: SdeSchedule,
}

impl AnalyticGmmScore {
    pub fn new(components: Vec<GmmComponent>, schedule: SdeSchedule) -> Result<Self> {
        if components.is_empty() {
            return Err(CoreError::InvalidParam("gmm score needs >= 1 component".into()));
        }
        let mut weight_sum = 0.0;
        for c in &components {
            if !(c.weight.is_finite() && c.weight > 0.0) {
                return Err(CoreError::InvalidParam(format!(
                    "gmm weight must be > 0, got {}",
                    c.weight
                )));
            }
            if !(c.variance.is_finite() && c.variance > 0.0) {
                return Err(CoreError::InvalidParam(format!(
                    "gmm variance must be > 0, got {}",
                    c.variance
                )));
            }
            if !c.mean.is_finite() {
                return Err(CoreError::InvalidParam("gmm mean must be finite".into()));
            }
            weight_sum += c.weight;
        }
        if (weight_sum - 1.0).abs() > 1e-6 {
            return Err(CoreError::InvalidParam(format!(
                "gmm weights must sum to 1, got {weight_sum}"
            )));
        }
        Ok(AnalyticGmmScore {
            components,
            schedule,
        })
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }

    /// Score at a single value; responsibilities are computed with
    /// log-sum-exp so far tails stay stable.
    pub fn score_scalar(&self, x: f64, t: f64) -> f64 {
        let beta = self.schedule.beta(t);
        let mut log_terms = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let var = c.variance + beta;
            let d = x - c.mean;
            log_terms.push(c.weight.ln() - 0.5 * d * d / var - 0.5 * var.ln());
        }
        let max = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        let mut num = 0.0;
        for (c, lt) in self.components.iter().zip(&log_terms) {
            let resp = (lt - max).exp();
            let var = c.variance + beta;
            denom += resp;
            num += resp * (-(x - c.mean) / var);
        }
        num / denom
    }
}

impl ScoreModel for AnalyticGmmScore {
    fn evaluate(&self, x: &RFGrid, t: f64) -> Result<RFGrid> {
        Ok(x.map(|v| self.score_scalar(v, t)))
    }
}
