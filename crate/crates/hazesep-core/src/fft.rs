//! Power-of-two FFT utilities.
//!
//! Iterative radix-2 Cooley-Tukey with the unitary-pair convention: the
//! forward transform is unscaled and the inverse is scaled by 1/N, so
//! `inverse(forward(s)) == s` up to rounding. Lengths must be powers of two;
//! callers zero-pad (see [`next_pow2`]).

use crate::error::{CoreError, Result};

/// Minimal complex value; the crate stores only real grids, complex numbers
/// appear inside FFT-based utilities only.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    pub fn magnitude(self) -> f64 {
        self.re.hypot(self.im)
    }

    fn mul(self, other: Complex) -> Complex {
        Complex {
            re: self.re * other.re - self.im * other.im,
            im: self.re * other.im + self.im * other.re,
        }
    }

    fn add(self, other: Complex) -> Complex {
        Complex {
            re: self.re + other.re,
            im: self.im + other.im,
        }
    }

    fn sub(self, other: Complex) -> Complex {
        Complex {
            re: self.re - other.re,
            im: self.im - other.im,
        }
    }

    pub fn scale(self, s: f64) -> Complex {
        Complex {
            re: self.re * s,
            im: self.im * s,
        }
    }
}

/// Smallest power of two >= n (n >= 1).
pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// FFT of a power-of-two-length signal. `inverse` selects the inverse
/// transform (conjugated twiddles, scaled by 1/N).
pub fn fft_1d(signal: &[Complex], inverse: bool) -> Result<Vec<Complex>> {
    let n = signal.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(CoreError::FftLength(n));
    }
    let mut buf = signal.to_vec();
    fft_in_place(&mut buf, inverse);
    Ok(buf)
}

fn fft_in_place(buf: &mut [Complex], inverse: bool) {
    let n = buf.len();
    if n == 1 {
        return;
    }
    // Bit-reversal permutation.
    let shift = (n.trailing_zeros()) as u32;
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - shift);
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let angle = sign * std::f64::consts::TAU / len as f64;
        let w_len = Complex::new(angle.cos(), angle.sin());
        for chunk in buf.chunks_mut(len) {
            let mut w = Complex::new(1.0, 0.0);
            let half = len / 2;
            for k in 0..half {
                let even = chunk[k];
                let odd = chunk[k + half].mul(w);
                chunk[k] = even.add(odd);
                chunk[k + half] = even.sub(odd);
                w = w.mul(w_len);
            }
        }
        len <<= 1;
    }
    if inverse {
        let scale = 1.0 / n as f64;
        for v in buf.iter_mut() {
            *v = v.scale(scale);
        }
    }
}

/// Real signal -> complex buffer zero-padded to `len`.
pub fn to_complex_padded(signal: &[f64], len: usize) -> Vec<Complex> {
    let mut buf = vec![Complex::default(); len];
    for (slot, &v) in buf.iter_mut().zip(signal.iter()) {
        slot.re = v;
    }
    buf
}

/// In-place 2-D FFT over a row-major `rows x cols` buffer; both dimensions
/// must be powers of two.
pub(crate) fn fft_2d(buf: &mut Vec<Complex>, rows: usize, cols: usize, inverse: bool) -> Result<()> {
    if !rows.is_power_of_two() {
        return Err(CoreError::FftLength(rows));
    }
    if !cols.is_power_of_two() {
        return Err(CoreError::FftLength(cols));
    }
    for r in 0..rows {
        fft_in_place(&mut buf[r * cols..(r + 1) * cols], inverse);
    }
    let mut col = vec![Complex::default(); rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = buf[r * cols + c];
        }
        fft_in_place(&mut col, inverse);
        for r in 0..rows {
            buf[r * cols + c] = col[r];
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct O(N^2) DFT, the independent oracle for fft_1d.
    fn dft_oracle(signal: &[Complex], inverse: bool) -> Vec<Complex> {
        let n = signal.len();
        let sign = if inverse { 1.0 } else { -1.0 };
        let mut out = vec![Complex::default(); n];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut acc = Complex::default();
            for (j, &v) in signal.iter().enumerate() {
                let angle = sign * std::f64::consts::TAU * (k * j) as f64 / n as f64;
                acc = acc.add(v.mul(Complex::new(angle.cos(), angle.sin())));
            }
            *slot = if inverse { acc.scale(1.0 / n as f64) } else { acc };
        }
        out
    }

    #[test]
    fn impulse_transforms_to_flat_spectrum() {
        let signal = to_complex_padded(&[1.0, 0.0, 0.0, 0.0], 4);
        let spec = fft_1d(&signal, false).unwrap();
        for v in spec {
            assert!((v.re - 1.0).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn dc_transforms_to_impulse() {
        let signal = to_complex_padded(&[1.0, 1.0, 1.0, 1.0], 4);
        let spec = fft_1d(&signal, false).unwrap();
        assert!((spec[0].re - 4.0).abs() < 1e-12);
        for v in &spec[1..] {
            assert!(v.magnitude() < 1e-12);
        }
    }

    #[test]
    fn round_trip_recovers_signal() {
        let mut rng = crate::rng::SeededRng::new(11);
        let signal: Vec<Complex> = (0..64)
            .map(|_| Complex::new(rng.next_gaussian(), rng.next_gaussian()))
            .collect();
        let back = fft_1d(&fft_1d(&signal, false).unwrap(), true).unwrap();
        let max_err = signal
            .iter()
            .zip(&back)
            .map(|(a, b)| a.sub(*b).magnitude())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-10, "round trip error {max_err}");
    }

    #[test]
    fn matches_direct_dft_oracle() {
        let mut rng = crate::rng::SeededRng::new(5);
        for &n in &[2usize, 8, 64, 256] {
            let signal: Vec<Complex> = (0..n)
                .map(|_| Complex::new(rng.next_gaussian(), rng.next_gaussian()))
                .collect();
            let ours = fft_1d(&signal, false).unwrap();
            let oracle = dft_oracle(&signal, false);
            let norm: f64 = oracle.iter().map(|v| v.magnitude()).fold(0.0, f64::max);
            for (a, b) in ours.iter().zip(&oracle) {
                assert!(a.sub(*b).magnitude() / norm < 1e-9, "n={n}");
            }
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        let signal = vec![Complex::default(); 12];
        assert!(matches!(fft_1d(&signal, false), Err(CoreError::FftLength(12))));
    }
}
