//! In-place radix-2 Cooley-Tukey transform for power-of-two lengths.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

#[derive(Debug)]
pub(crate) struct FftPlan {
    n: usize,
    // exp(-2 pi i k / n) for k < n/2
    twiddles: Vec<Complex64>,
    bit_reverse: Vec<u32>,
}

impl FftPlan {
    pub(crate) fn new(n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 2, "fft length must be a power of two");
        let bits = n.trailing_zeros();
        let twiddles = (0..n / 2)
            .map(|k| {
                let angle = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(libm::cos(angle), libm::sin(angle))
            })
            .collect();
        let bit_reverse = (0..n as u32)
            .map(|i| i.reverse_bits() >> (32 - bits))
            .collect();
        FftPlan { n, twiddles, bit_reverse }
    }

    /// `X_k = sum_m x_m exp(-2 pi i k m / n)`.
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.process(data, false);
    }

    /// Inverse including the `1/n` factor.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.process(data, true);
        let scale = 1.0 / self.n as f64;
        for x in data.iter_mut() {
            *x *= scale;
        }
    }

    fn process(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(data.len(), n);
        for i in 0..n {
            let j = self.bit_reverse[i] as usize;
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let w = if inverse { w.conj() } else { w };
                    let u = data[start + k];
                    let v = data[start + k + half] * w;
                    data[start + k] = u + v;
                    data[start + k + half] = u - v;
                }
            }
            len <<= 1;
        }
    }
}
