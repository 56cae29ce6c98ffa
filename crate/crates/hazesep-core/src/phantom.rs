//! Synthetic tissue RF, structured haze, and paired measurements.
//!
//! The generators stand in for phantom acquisitions at desk scale. Tissue is
//! a white scatterer field shaped by a regional gain map (an anechoic
//! ellipse as the "ventricle", a hyperechoic band as the "wall") and blurred
//! by a separable point-spread function: a Gaussian-windowed sinusoid along
//! the axial direction and a Gaussian along the lateral one. Haze is a
//! complex smooth field with prescribed correlation lengths, modulated into
//! the pulse band and weighted toward the near field, so it overlaps tissue
//! in spectrum and differs only in spatial structure.
//!
//! Correlation-length convention: a field "with correlation length L" has a
//! Gaussian autocorrelation of standard deviation L (the generating filter
//! has std L / sqrt(2)).
//!
//! Units are sample-indexed; spacings are recorded as 1.0.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compand::{encode, CompandParams};
use crate::error::{CoreError, Result};
use crate::fft::{fft_2d, next_pow2, Complex};
use crate::grid::RFGrid;
use crate::patch::{extract, plan, PatchLayout};
use crate::rng::SeededRng;

/// Geometry and texture of the synthetic tissue frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub rows: usize,
    pub cols: usize,
    /// Pulse center frequency in cycles per axial sample.
    pub pulse_freq: f64,
    /// Gaussian envelope std of the axial pulse, in samples.
    pub pulse_bandwidth: f64,
    /// Lateral PSF Gaussian std, in samples.
    pub lateral_psf_std: f64,
    /// Anechoic ellipse center (row, col) as fractions of the frame.
    pub ellipse_center: (f64, f64),
    /// Ellipse semi-axes (rows, cols) as fractions of the frame.
    pub ellipse_semi: (f64, f64),
    /// Hyperechoic band rows as fractions of the frame (start, end).
    pub wall_rows: (f64, f64),
    pub wall_gain: f64,
    /// Probability of a scatterer per sample cell.
    pub scatterer_density: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            rows: 256,
            cols: 128,
            pulse_freq: 0.25,
            pulse_bandwidth: 3.0,
            lateral_psf_std: 1.5,
            ellipse_center: (0.38, 0.5),
            ellipse_semi: (0.18, 0.22),
            wall_rows: (0.68, 0.82),
            wall_gain: 3.0,
            scatterer_density: 0.5,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(CoreError::InvalidParam("phantom dimensions must be >= 1".into()));
        }
        if !(self.scatterer_density >= 0.0 && self.scatterer_density <= 1.0) {
            return Err(CoreError::InvalidParam(
                "scatterer_density must be in [0, 1]".into(),
            ));
        }
        if self.wall_gain <= 1.0 {
            return Err(CoreError::InvalidParam("wall_gain must be > 1".into()));
        }
        if self.pulse_bandwidth <= 0.0 || self.lateral_psf_std <= 0.0 {
            return Err(CoreError::InvalidParam("PSF widths must be > 0".into()));
        }
        Ok(())
    }

    fn gain(&self, r: usize, c: usize) -> f64 {
        let (er, ec) = (
            self.ellipse_center.0 * self.rows as f64,
            self.ellipse_center.1 * self.cols as f64,
        );
        let (sr, sc) = (
            self.ellipse_semi.0 * self.rows as f64,
            self.ellipse_semi.1 * self.cols as f64,
        );
        let dr = (r as f64 - er) / sr;
        let dc = (c as f64 - ec) / sc;
        if dr * dr + dc * dc <= 1.0 {
            return 0.0;
        }
        let w0 = self.wall_rows.0 * self.rows as f64;
        let w1 = self.wall_rows.1 * self.rows as f64;
        if (r as f64) >= w0 && (r as f64) < w1 {
            return self.wall_gain;
        }
        1.0
    }
}

/// Structure of the synthetic haze field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HazeSpec {
    /// Lateral autocorrelation std, in samples.
    pub lateral_corr: f64,
    /// Axial envelope autocorrelation std, in samples.
    pub axial_corr: f64,
    /// Depth-decay constant in rows; energy falls off as exp(-row / decay).
    pub depth_decay_rows: f64,
    /// Carrier frequency, cycles per axial sample (matches the pulse band).
    pub carrier_freq: f64,
    pub level: f64,
}

impl Default for HazeSpec {
    fn default() -> Self {
        HazeSpec {
            lateral_corr: 6.0,
            axial_corr: 10.0,
            depth_decay_rows: 0.0, // 0 = frame rows / 3, resolved at generation
            carrier_freq: 0.25,
            level: 1.0,
        }
    }
}

impl HazeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lateral_corr <= 0.0 || self.axial_corr <= 0.0 {
            return Err(CoreError::InvalidParam("correlation lengths must be > 0".into()));
        }
        if self.depth_decay_rows < 0.0 {
            return Err(CoreError::InvalidParam("depth_decay_rows must be >= 0".into()));
        }
        Ok(())
    }
}

/// Scatterer field through the separable PSF, shaped by the regional gain
/// map and normalized to unit maximum (unless identically zero).
pub fn gen_tissue(spec: &PhantomSpec, rng: &mut SeededRng) -> Result<RFGrid> {
    spec.validate()?;
    let (rows, cols) = (spec.rows, spec.cols);
    let mut scatterers = RFGrid::zeros(rows, cols)?;
    for r in 0..rows {
        for c in 0..cols {
            // Draw both values unconditionally to keep the stream layout fixed.
            let present = rng.next_uniform() < spec.scatterer_density;
            let amp = rng.next_gaussian();
            if present {
                scatterers.set(r, c, amp * spec.gain(r, c));
            }
        }
    }
    // Axial convolution with the Gaussian-windowed sinusoid.
    let half_ax = (3.0 * spec.pulse_bandwidth).ceil() as isize;
    let pulse: Vec<f64> = (-half_ax..=half_ax)
        .map(|j| {
            let jf = j as f64;
            (-0.5 * jf * jf / (spec.pulse_bandwidth * spec.pulse_bandwidth)).exp()
                * (std::f64::consts::TAU * spec.pulse_freq * jf).cos()
        })
        .collect();
    let axial = convolve_axial(&scatterers, &pulse, half_ax);
    // Lateral convolution with the Gaussian PSF.
    let half_lat = (3.0 * spec.lateral_psf_std).ceil() as isize;
    let psf: Vec<f64> = (-half_lat..=half_lat)
        .map(|j| {
            let jf = j as f64;
            (-0.5 * jf * jf / (spec.lateral_psf_std * spec.lateral_psf_std)).exp()
        })
        .collect();
    let blurred = convolve_lateral(&axial, &psf, half_lat);
    let max = blurred.max_abs();
    if max == 0.0 {
        return Ok(blurred);
    }
    Ok(blurred.scaled(1.0 / max))
}

fn convolve_axial(g: &RFGrid, kernel: &[f64], half: isize) -> RFGrid {
    let (rows, cols) = g.shape();
    let mut out = RFGrid::zeros(rows, cols).expect("same dims");
    for c in 0..cols {
        for r in 0..rows {
            let mut acc = 0.0;
            for (ki, &kv) in kernel.iter().enumerate() {
                let src = r as isize + (ki as isize - half);
                if src >= 0 && (src as usize) < rows {
                    acc += kv * g.at(src as usize, c);
                }
            }
            out.set(r, c, acc);
        }
    }
    out
}

fn convolve_lateral(g: &RFGrid, kernel: &[f64], half: isize) -> RFGrid {
    let (rows, cols) = g.shape();
    let mut out = RFGrid::zeros(rows, cols).expect("same dims");
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for (ki, &kv) in kernel.iter().enumerate() {
                let src = c as isize + (ki as isize - half);
                if src >= 0 && (src as usize) < cols {
                    acc += kv * g.at(r, src as usize);
                }
            }
            out.set(r, c, acc);
        }
    }
    out
}

/// Smooth complex field with the prescribed correlation lengths, modulated
/// onto the pulse carrier, weighted toward the near field, and normalized to
/// unit maximum.
pub fn gen_haze(spec: &HazeSpec, rng: &mut SeededRng, rows: usize, cols: usize) -> Result<RFGrid> {
    spec.validate()?;
    if rows == 0 || cols == 0 {
        return Err(CoreError::InvalidParam("haze dimensions must be >= 1".into()));
    }
    let pr = next_pow2(rows.max(2));
    let pc = next_pow2(cols.max(2));
    // Complex white noise -> spectral Gaussian (the envelope filter has real
    // -space std L/sqrt(2) per axis, giving autocorrelation std L).
    let mut buf: Vec<Complex> = (0..pr * pc)
        .map(|_| Complex::new(rng.next_gaussian(), rng.next_gaussian()))
        .collect();
    fft_2d(&mut buf, pr, pc, false)?;
    let s_ax = spec.axial_corr / std::f64::consts::SQRT_2;
    let s_lat = spec.lateral_corr / std::f64::consts::SQRT_2;
    for fr in 0..pr {
        // Frequency in cycles per sample, wrapped to [-1/2, 1/2).
        let fy = wrapped_freq(fr, pr);
        let gy = (-2.0 * std::f64::consts::PI.powi(2) * s_ax * s_ax * fy * fy).exp();
        for fc in 0..pc {
            let fx = wrapped_freq(fc, pc);
            let gx = (-2.0 * std::f64::consts::PI.powi(2) * s_lat * s_lat * fx * fx).exp();
            buf[fr * pc + fc] = buf[fr * pc + fc].scale(gy * gx);
        }
    }
    fft_2d(&mut buf, pr, pc, true)?;
    let decay = if spec.depth_decay_rows > 0.0 {
        spec.depth_decay_rows
    } else {
        rows as f64 / 3.0
    };
    let mut out = RFGrid::zeros(rows, cols)?;
    for r in 0..rows {
        let weight = (-(r as f64) / decay).exp();
        let phase = std::f64::consts::TAU * spec.carrier_freq * r as f64;
        let (sin, cos) = phase.sin_cos();
        for c in 0..cols {
            let v = buf[r * pc + c];
            // Re{ E * e^{i 2 pi f0 r} }: envelope correlation is preserved
            // while the spectrum moves into the pulse band.
            out.set(r, c, weight * (v.re * cos - v.im * sin));
        }
    }
    let max = out.max_abs();
    if max == 0.0 {
        return Ok(out);
    }
    Ok(out.scaled(1.0 / max))
}

fn wrapped_freq(k: usize, n: usize) -> f64 {
    let k = k as f64;
    let n = n as f64;
    if k <= n / 2.0 {
        k / n
    } else {
        (k - n) / n
    }
}

/// Measurement at a controlled haze level: y = x + level * h.
pub fn mix(x: &RFGrid, h: &RFGrid, level: f64) -> Result<RFGrid> {
    if !(level.is_finite() && level >= 0.0) {
        return Err(CoreError::InvalidParam(format!("level must be >= 0, got {level}")));
    }
    x.check_same_shape(h, "mix")?;
    x.zip_map(h, |xv, hv| xv + level * hv)
}

/// One synthetic frame pair.
#[derive(Debug, Clone)]
pub struct PairedFrame {
    pub clean: RFGrid,
    pub haze: RFGrid,
}

/// Output of [`make_dataset`]: companded training patches for the two score
/// models, plus paired full frames for evaluation.
#[derive(Debug)]
pub struct DatasetBundle {
    pub tissue_patches: Vec<RFGrid>,
    pub haze_patches: Vec<RFGrid>,
    pub frames: Vec<PairedFrame>,
}

/// Generate paired frames and companded, normalized patch sets. Tissue
/// patches cover every planned window; haze patches are drawn from the
/// planned windows with probability proportional to their energy (with
/// replacement), favoring rows that actually contain haze.
pub fn make_dataset(
    phantom: &PhantomSpec,
    haze_spec: &HazeSpec,
    n_frames: usize,
    layout: &PatchLayout,
    compand: &CompandParams,
    rng: &mut SeededRng,
) -> Result<DatasetBundle> {
    if n_frames == 0 {
        return Err(CoreError::InvalidParam("n_frames must be >= 1".into()));
    }
    let patch_plan = plan(phantom.rows, phantom.cols, layout)?;
    let mut bundle = DatasetBundle {
        tissue_patches: Vec::new(),
        haze_patches: Vec::new(),
        frames: Vec::new(),
    };
    for _ in 0..n_frames {
        let clean = gen_tissue(phantom, rng)?;
        let haze = gen_haze(haze_spec, rng, phantom.rows, phantom.cols)?;
        let (clean_c, _) = encode(&clean, compand)?;
        let (haze_c, _) = encode(&haze, compand)?;
        // Tissue: all planned windows.
        let mut origins = Vec::new();
        for &r0 in &patch_plan.row_origins {
            for &c0 in &patch_plan.col_origins {
                origins.push((r0, c0));
            }
        }
        for &o in &origins {
            bundle
                .tissue_patches
                .push(extract(&clean_c, o, layout.patch_rows(), layout.patch_cols())?);
        }
        // Haze: energy-weighted draw over the same windows.
        let windows: Vec<RFGrid> = origins
            .iter()
            .map(|&o| extract(&haze_c, o, layout.patch_rows(), layout.patch_cols()))
            .collect::<Result<_>>()?;
        let energies: Vec<f64> = windows.iter().map(|w| w.energy()).collect();
        let total: f64 = energies.iter().sum();
        for _ in 0..windows.len() {
            let idx = if total > 0.0 {
                let mut pick = rng.next_uniform() * total;
                let mut chosen = windows.len() - 1;
                for (i, &e) in energies.iter().enumerate() {
                    if pick < e {
                        chosen = i;
                        break;
                    }
                    pick -= e;
                }
                chosen
            } else {
                rng.next_index(windows.len())
            };
            bundle.haze_patches.push(windows[idx].clone());
        }
        bundle.frames.push(PairedFrame { clean, haze });
    }
    Ok(bundle)
}

/// Files and provenance of a dataset directory, stored as `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub seed: u64,
    pub phantom: PhantomSpec,
    pub haze: HazeSpec,
    pub n_frames: usize,
    pub levels: Vec<f64>,
    pub clean_frames: Vec<PathBuf>,
    pub haze_frames: Vec<PathBuf>,
    pub mixed_frames: Vec<MixedEntry>,
    pub tissue_patch_files: Vec<PathBuf>,
    pub haze_patch_files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedEntry {
    pub level: f64,
    pub frame_index: usize,
    pub path: PathBuf,
}

/// Parse a dataset manifest (fuzzing entry point).
pub fn parse_dataset_manifest(json: &str) -> Result<DatasetManifest> {
    let manifest: DatasetManifest = serde_json::from_str(json)?;
    if manifest.n_frames == 0 {
        return Err(CoreError::Format("manifest n_frames must be >= 1".into()));
    }
    if manifest
        .levels
        .iter()
        .any(|l| !(l.is_finite() && *l >= 0.0))
    {
        return Err(CoreError::Format("manifest levels must be finite and >= 0".into()));
    }
    Ok(manifest)
}

pub fn load_dataset_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset_manifest(&text)
}
