//! In-place radix-2 complex FFT.

use num_complex::Complex;

use crate::scalar::Scalar;
use crate::signal::SignalError;

/// Precomputed twiddles and bit-reversal permutation for one transform size.
#[derive(Debug, Clone)]
pub struct FftPlan<T> {
    len: usize,
    twiddles: Vec<Complex<T>>,
    reversed: Vec<usize>,
}

impl<T: Scalar> FftPlan<T> {
    pub fn new(len: usize) -> Result<Self, SignalError> {
        if len == 0 || !len.is_power_of_two() {
            return Err(SignalError::NotPowerOfTwo(len));
        }
        let bits = len.trailing_zeros();
        let reversed = (0..len)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..len / 2)
            .map(|k| {
                let angle = -2.0 * std::f64::consts::PI * k as f64 / len as f64;
                Complex::new(T::of(angle.cos()), T::of(angle.sin()))
            })
            .collect();
        Ok(Self { len, twiddles, reversed })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Forward transform `X_k = sum_n x_n exp(-2 pi i k n / N)`, unnormalized.
    pub fn forward(&self, buf: &mut [Complex<T>]) {
        assert_eq!(buf.len(), self.len, "buffer length must match the plan");
        for i in 0..self.len {
            let j = self.reversed[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= self.len {
            let half = size / 2;
            let step = self.len / size;
            for start in (0..self.len).step_by(size) {
                for k in 0..half {
                    let w = self.twiddles[k * step];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
    }

    /// Transforms a real frame and returns the one-sided spectrum (`len / 2 + 1` bins).
    pub fn forward_real(&self, frame: &[T], scratch: &mut Vec<Complex<T>>) -> Vec<Complex<T>> {
        scratch.clear();
        scratch.extend(frame.iter().map(|&v| Complex::new(v, T::zero())));
        self.forward(scratch);
        scratch[..self.len / 2 + 1].to_vec()
    }
}

/// One-shot forward transform of a complex buffer.
pub fn fft<T: Scalar>(buf: &mut [Complex<T>]) -> Result<(), SignalError> {
    FftPlan::new(buf.len())?.forward(buf);
    Ok(())
}
