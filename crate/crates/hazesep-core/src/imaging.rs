//! RF to B-mode conversion and image export.
//!
//! Envelope detection uses the analytic signal per axial line (FFT, zero the
//! negative frequencies, double the positive ones, inverse FFT, magnitude).
//! Log compression maps the envelope to dB relative to its maximum, clipped
//! at -dynamic_range. Brightness matching adds the constant dB offset that
//! equalizes the mean of the top-decile pixel values against a reference.

use std::io::Write;
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::fft::{fft_1d, next_pow2, to_complex_padded, Complex};
use crate::grid::RFGrid;

/// Log-compressed image: values in [-dynamic_range, 0] dB with the maximum
/// at 0 dB by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BModeImage {
    db: RFGrid,
    dynamic_range: f64,
}

impl BModeImage {
    /// Wrap an existing dB grid; values must lie in [-dynamic_range, 0].
    pub fn from_db(db: RFGrid, dynamic_range: f64) -> Result<Self> {
        if !(dynamic_range.is_finite() && dynamic_range > 0.0) {
            return Err(CoreError::InvalidParam(format!(
                "dynamic range must be > 0, got {dynamic_range}"
            )));
        }
        if db
            .values()
            .iter()
            .any(|&v| v < -dynamic_range || v > 0.0)
        {
            return Err(CoreError::InvalidParam(
                "dB values must lie in [-dynamic_range, 0]".into(),
            ));
        }
        Ok(BModeImage { db, dynamic_range })
    }

    pub fn db(&self) -> &RFGrid {
        &self.db
    }

    pub fn dynamic_range(&self) -> f64 {
        self.dynamic_range
    }

    pub fn rows(&self) -> usize {
        self.db.rows()
    }

    pub fn cols(&self) -> usize {
        self.db.cols()
    }
}

/// Envelope per axial line via the analytic signal; output is nonnegative
/// with the shape of the input. Requires at least 8 axial samples.
pub fn envelope(rf: &RFGrid) -> Result<RFGrid> {
    let rows = rf.rows();
    if rows < 8 {
        return Err(CoreError::InvalidParam(format!(
            "envelope needs >= 8 axial samples, got {rows}"
        )));
    }
    let padded = next_pow2(rows);
    let mut out = RFGrid::zeros(rows, rf.cols())?;
    for c in 0..rf.cols() {
        let line = rf.column(c);
        let spectrum = fft_1d(&to_complex_padded(&line, padded), false)?;
        let analytic = analytic_spectrum(spectrum);
        let signal = fft_1d(&analytic, true)?;
        for (r, v) in signal.iter().take(rows).enumerate() {
            out.set(r, c, v.magnitude());
        }
    }
    out.with_spacing(rf.axial_spacing(), rf.lateral_spacing())
}

/// Zero negative frequencies, double positive ones, keep DC and Nyquist.
fn analytic_spectrum(mut spectrum: Vec<Complex>) -> Vec<Complex> {
    let n = spectrum.len();
    let half = n / 2;
    for v in spectrum.iter_mut().take(half).skip(1) {
        *v = v.scale(2.0);
    }
    for v in spectrum.iter_mut().skip(half + 1) {
        *v = Complex::default();
    }
    spectrum
}

/// 20 log10(env / max(env)), clipped to [-dynamic_range, 0].
pub fn log_compress(env: &RFGrid, dynamic_range: f64) -> Result<BModeImage> {
    if !(dynamic_range.is_finite() && dynamic_range > 0.0) {
        return Err(CoreError::InvalidParam(format!(
            "dynamic range must be > 0, got {dynamic_range}"
        )));
    }
    if env.values().iter().any(|&v| v < 0.0) {
        return Err(CoreError::InvalidParam("envelope must be nonnegative".into()));
    }
    let max = env.values().iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return Err(CoreError::InvalidParam("all-zero envelope".into()));
    }
    let db = env.map(|v| {
        if v <= 0.0 {
            -dynamic_range
        } else {
            (20.0 * (v / max).log10()).clamp(-dynamic_range, 0.0)
        }
    });
    Ok(BModeImage { db, dynamic_range })
}

/// Mean of the top-decile values (nearest-rank percentile on dB values).
fn top_decile_mean(img: &BModeImage) -> f64 {
    let mut values: Vec<f64> = img.db.values().to_vec();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    // Nearest-rank 90th percentile index; the top decile is everything at or
    // above it.
    let rank = ((0.9 * n as f64).ceil() as usize).clamp(1, n) - 1;
    let top = &values[rank..];
    top.iter().sum::<f64>() / top.len() as f64
}

/// Add the constant dB offset that matches the top-decile mean of `img` to
/// the reference's, then re-clip to [-DR, 0]. Returns the matched image and
/// the offset.
pub fn brightness_match(img: &BModeImage, reference: &BModeImage) -> (BModeImage, f64) {
    let offset = top_decile_mean(reference) - top_decile_mean(img);
    let dr = img.dynamic_range;
    let db = img.db.map(|v| (v + offset).clamp(-dr, 0.0));
    (
        BModeImage {
            db,
            dynamic_range: dr,
        },
        offset,
    )
}

/// Byte value of one pixel in the 8-bit export: linear map of
/// [-DR, 0] dB onto [0, 255], floor rule.
fn pixel_byte(db: f64, dynamic_range: f64) -> u8 {
    let unit = (db + dynamic_range) / dynamic_range;
    (unit * 255.0).floor().clamp(0.0, 255.0) as u8
}

/// Write the image as an 8-bit grayscale PNG; bytes are deterministic for
/// identical input.
pub fn write_png<W: Write>(img: &BModeImage, w: W) -> Result<()> {
    let mut encoder = png::Encoder::new(w, img.cols() as u32, img.rows() as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| CoreError::Format(format!("png: {e}")))?;
    let bytes: Vec<u8> = img
        .db
        .values()
        .iter()
        .map(|&v| pixel_byte(v, img.dynamic_range))
        .collect();
    writer
        .write_image_data(&bytes)
        .map_err(|e| CoreError::Format(format!("png: {e}")))?;
    Ok(())
}

pub fn export_png(img: &BModeImage, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_png(img, std::io::BufWriter::new(file))
}

/// CSV export of the dB grid (one row per axial line).
pub fn write_db_csv<W: Write>(img: &BModeImage, mut w: W) -> Result<()> {
    for r in 0..img.rows() {
        let row: Vec<String> = img.db.row(r).iter().map(|v| format!("{v:.6}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
