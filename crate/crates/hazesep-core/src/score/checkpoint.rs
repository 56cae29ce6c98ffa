//! `.hsnet` checkpoint files.
//!
//! Layout: a little-endian u32 byte length, a JSON header of that length,
//! then `param_count` little-endian f32 parameters. The header carries the
//! model descriptor (trainable architectures and the analytic oracle models
//! share the format), the schedule sigma the model was built for, the patch
//! shape, and training metadata. Checkpoint contents are treated as
//! untrusted input: lengths, counts, and values are validated before use.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::sde::SdeSchedule;

use super::analytic::{AnalyticGaussianScore, AnalyticGmmScore, GaussianMean, GmmComponent};
use super::net::{ArchSpec, TrainableScoreNet};
use super::ScoreModel;

const MAX_HEADER_BYTES: u32 = 1 << 20;
const MAX_PARAMS: u64 = 1 << 24;

/// Model descriptor stored in the header.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    AnalyticGaussian { mean: f64, variance: f64 },
    AnalyticGmm { components: Vec<GmmComponent> },
    Trainable { spec: ArchSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub hsnet_version: u32,
    pub model: ModelSpec,
    pub sigma: f64,
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub t_min: f64,
    pub param_count: u64,
    #[serde(default)]
    pub trained_epochs: usize,
    #[serde(default)]
    pub final_loss: Option<f64>,
}

/// A loaded checkpoint: the header plus a ready-to-evaluate model.
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: Box<dyn ScoreModel>,
}

/// What to persist: either a trained net or an analytic oracle model.
pub enum SaveModel<'a> {
    Net(&'a TrainableScoreNet),
    AnalyticGaussian {
        mean: f64,
        variance: f64,
        schedule: SdeSchedule,
        patch_rows: usize,
        patch_cols: usize,
    },
    AnalyticGmm {
        components: Vec<GmmComponent>,
        schedule: SdeSchedule,
        patch_rows: usize,
        patch_cols: usize,
    },
}

pub fn save_checkpoint<W: Write>(
    mut w: W,
    model: &SaveModel<'_>,
    trained_epochs: usize,
    final_loss: Option<f64>,
) -> Result<()> {
    let (header, params): (CheckpointHeader, Vec<f64>) = match model {
        SaveModel::Net(net) => {
            let shape = net.patch_shape().expect("net is patch-bound");
            (
                CheckpointHeader {
                    hsnet_version: 1,
                    model: ModelSpec::Trainable {
                        spec: net.arch().clone(),
                    },
                    sigma: net.schedule().sigma(),
                    patch_rows: shape.0,
                    patch_cols: shape.1,
                    t_min: net.t_min(),
                    param_count: net.param_count() as u64,
                    trained_epochs,
                    final_loss,
                },
                net.params().to_vec(),
            )
        }
        SaveModel::AnalyticGaussian {
            mean,
            variance,
            schedule,
            patch_rows,
            patch_cols,
        } => (
            CheckpointHeader {
                hsnet_version: 1,
                model: ModelSpec::AnalyticGaussian {
                    mean: *mean,
                    variance: *variance,
                },
                sigma: schedule.sigma(),
                patch_rows: *patch_rows,
                patch_cols: *patch_cols,
                t_min: 0.01,
                param_count: 0,
                trained_epochs,
                final_loss,
            },
            Vec::new(),
        ),
        SaveModel::AnalyticGmm {
            components,
            schedule,
            patch_rows,
            patch_cols,
        } => (
            CheckpointHeader {
                hsnet_version: 1,
                model: ModelSpec::AnalyticGmm {
                    components: components.clone(),
                },
                sigma: schedule.sigma(),
                patch_rows: *patch_rows,
                patch_cols: *patch_cols,
                t_min: 0.01,
                param_count: 0,
                trained_epochs,
                final_loss,
            },
            Vec::new(),
        ),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    let mut buf = Vec::with_capacity(params.len() * 4);
    for &p in &params {
        buf.extend_from_slice(&(p as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn save_checkpoint_file(
    path: impl AsRef<Path>,
    model: &SaveModel<'_>,
    trained_epochs: usize,
    final_loss: Option<f64>,
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    save_checkpoint(std::io::BufWriter::new(file), model, trained_epochs, final_loss)
}

pub fn load_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)?;
    let header_len = u32::from_le_bytes(len_bytes);
    if header_len == 0 || header_len > MAX_HEADER_BYTES {
        return Err(CoreError::Format(format!(
            "checkpoint header length {header_len} out of bounds"
        )));
    }
    let mut header_bytes = vec![0u8; header_len as usize];
    r.read_exact(&mut header_bytes)?;
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)?;
    if header.hsnet_version != 1 {
        return Err(CoreError::Format(format!(
            "unsupported checkpoint version {}",
            header.hsnet_version
        )));
    }
    if header.param_count > MAX_PARAMS {
        return Err(CoreError::Format(format!(
            "checkpoint parameter count {} out of bounds",
            header.param_count
        )));
    }
    if header.patch_rows == 0 || header.patch_cols == 0 {
        return Err(CoreError::Format("checkpoint patch shape must be >= 1x1".into()));
    }
    if !(header.sigma.is_finite() && header.sigma > 1.0) {
        return Err(CoreError::Format(format!(
            "checkpoint sigma {} invalid",
            header.sigma
        )));
    }
    let mut params = Vec::new();
    let mut chunk = [0u8; 4];
    for _ in 0..header.param_count {
        r.read_exact(&mut chunk)?;
        let v = f32::from_le_bytes(chunk) as f64;
        if !v.is_finite() {
            return Err(CoreError::Format("checkpoint contains non-finite parameter".into()));
        }
        params.push(v);
    }
    // The schedule carried by a checkpoint matters only through sigma (the
    // noise scaling); steps/tau are runtime choices.
    let schedule = SdeSchedule::new(header.sigma, 200, 0.8)?;
    let model: Box<dyn ScoreModel> = match &header.model {
        ModelSpec::AnalyticGaussian { mean, variance } => {
            if header.param_count != 0 {
                return Err(CoreError::Format(
                    "analytic checkpoint must carry no parameters".into(),
                ));
            }
            Box::new(AnalyticGaussianScore::new(
                GaussianMean::Scalar(*mean),
                *variance,
                schedule,
            )?)
        }
        ModelSpec::AnalyticGmm { components } => {
            if header.param_count != 0 {
                return Err(CoreError::Format(
                    "analytic checkpoint must carry no parameters".into(),
                ));
            }
            Box::new(AnalyticGmmScore::new(components.clone(), schedule)?)
        }
        ModelSpec::Trainable { spec } => {
            let expected = spec.param_count(header.patch_rows, header.patch_cols);
            if expected as u64 != header.param_count {
                return Err(CoreError::Format(format!(
                    "checkpoint parameter count {} does not match architecture ({expected} expected)",
                    header.param_count
                )));
            }
            let t_min = header.t_min;
            if !(t_min > 0.0 && t_min < 1.0) {
                return Err(CoreError::Format(format!("checkpoint t_min {t_min} invalid")));
            }
            Box::new(TrainableScoreNet::from_params(
                spec.clone(),
                header.patch_rows,
                header.patch_cols,
                schedule,
                t_min,
                params,
            )?)
        }
    };
    Ok(Checkpoint { header, model })
}

/// Parse a checkpoint from an in-memory buffer (fuzzing entry point).
pub fn load_checkpoint_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    load_checkpoint(bytes)
}

pub fn load_checkpoint_file(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let file = std::fs::File::open(path)?;
    load_checkpoint(std::io::BufReader::new(file))
}
