use num_complex::Complex64;

use crate::error::{invalid, Result};

/// DFT coefficients of a length-n sequence, n a power of two.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn from_coefficients(coeffs: Vec<Complex64>) -> Result<Self> {
        check_len(coeffs.len())?;
        Ok(Spectrum { coeffs })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Largest |X_k − conj(X_{n−k})|; zero for the spectrum of a real signal.
    pub fn hermitian_error(&self) -> f64 {
        let n = self.coeffs.len();
        (0..n)
            .map(|k| (self.coeffs[k] - self.coeffs[(n - k) % n].conj()).norm())
            .fold(0.0, f64::max)
    }
}

fn check_len(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(invalid(format!("FFT length must be a power of two, got {n}")));
    }
    Ok(())
}

/// In-place iterative radix-2 transform. `inverse` uses the positive exponent
/// and divides by n.
fn transform(a: &mut [Complex64], inverse: bool) {
    let n = a.len();
    let bits = n.trailing_zeros();
    if n > 1 {
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if i < j {
                a.swap(i, j);
            }
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut size = 2;
    while size <= n {
        let half = size / 2;
        let twiddles: Vec<Complex64> = (0..half)
            .map(|k| Complex64::from_polar(1.0, sign * 2.0 * std::f64::consts::PI * k as f64 / size as f64))
            .collect();
        for start in (0..n).step_by(size) {
            for k in 0..half {
                let u = a[start + k];
                let v = a[start + k + half] * twiddles[k];
                a[start + k] = u + v;
                a[start + k + half] = u - v;
            }
        }
        size *= 2;
    }
    if inverse {
        let scale = 1.0 / n as f64;
        for v in a.iter_mut() {
            *v *= scale;
        }
    }
}

/// DFT of `signal` zero-padded to `n`.
pub fn fft(signal: &[f64], n: usize) -> Result<Spectrum> {
    check_len(n)?;
    if signal.len() > n {
        return Err(invalid(format!(
            "signal of length {} does not fit FFT length {n}",
            signal.len()
        )));
    }
    let mut a: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    a.resize(n, Complex64::new(0.0, 0.0));
    transform(&mut a, false);
    Ok(Spectrum { coeffs: a })
}

pub fn ifft_complex(spectrum: &Spectrum) -> Vec<Complex64> {
    let mut a = spectrum.coeffs.clone();
    transform(&mut a, true);
    a
}

/// Inverse DFT keeping the real part.
pub fn ifft(spectrum: &Spectrum) -> Vec<f64> {
    ifft_complex(spectrum).into_iter().map(|c| c.re).collect()
}
