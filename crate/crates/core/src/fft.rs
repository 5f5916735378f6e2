//! Two-dimensional discrete Fourier transforms over square grids.

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{FftNum, FftPlanner};

/// In-place 2-D DFT of an `n × n` buffer stored row by row. The forward
/// transform is unnormalized; the inverse divides by `n²`.
pub fn fft2<S: FftNum>(buf: &mut [Complex<S>], n: usize, inverse: bool) {
    assert_eq!(buf.len(), n * n, "buffer must be n × n");
    let mut planner = FftPlanner::<S>::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    buf.par_chunks_mut(n).for_each(|row| fft.process(row));
    transpose(buf, n);
    buf.par_chunks_mut(n).for_each(|row| fft.process(row));
    transpose(buf, n);
    if inverse {
        let scale = S::from_f64(1.0 / (n * n) as f64).expect("scale fits");
        buf.par_iter_mut().for_each(|v| *v = *v * scale);
    }
}

fn transpose<S: Copy>(buf: &mut [S], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Signed frequency of DFT index `k` on a grid of size `n`: `[-n/2, n/2)`.
pub fn signed_freq(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}
