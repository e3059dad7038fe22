//! Padded temporal convolution of a kernel with a spike raster.
//!
//! The kernel spans all `N` neurons (no padding along that axis) and `M` bins;
//! the time axis is zero padded with `M / 2` bins on the left and
//! `M - 1 - M / 2` on the right so that the response has exactly `T` bins:
//!
//! ```text
//! x[t] = sum_n sum_m kernel[n, m] * X[n, t + m - M/2]
//! ```
//!
//! The kernel is not flipped. Work is done per spike, `O(nnz * M)`.

use crate::error::{Error, Result};
use crate::filters::Kernel;
use crate::spikes::SpikeMatrix;

/// Left padding for a kernel of width `m`.
pub fn left_pad(width: usize) -> usize {
    width / 2
}

/// Response of one kernel to `x`.
pub fn convolve(kernel: &Kernel, x: &SpikeMatrix) -> Result<Vec<f64>> {
    let mut out = vec![0.0; x.n_bins()];
    convolve_into(kernel, x, &mut out)?;
    Ok(out)
}

pub fn convolve_into(kernel: &Kernel, x: &SpikeMatrix, out: &mut [f64]) -> Result<()> {
    check(kernel, x)?;
    debug_assert_eq!(out.len(), x.n_bins());
    out.iter_mut().for_each(|v| *v = 0.0);
    let width = kernel.width();
    let t_len = x.n_bins() as isize;
    let pad = left_pad(width) as isize;
    let mut reversed = vec![0.0; width];
    for n in 0..x.n_neurons() {
        let spikes = x.row(n);
        if spikes.is_empty() {
            continue;
        }
        // rev[i] = kernel[n, M-1-i]; a spike at s lands on
        // t = s + pad - (M-1) + i for i in 0..M.
        for (r, &k) in reversed.iter_mut().zip(kernel.row(n).iter().rev()) {
            *r = k;
        }
        for &s in spikes {
            let start = s as isize + pad - (width as isize - 1);
            let lo = (-start).max(0) as usize;
            let hi = (t_len - start).min(width as isize) as usize;
            if lo >= hi {
                continue;
            }
            let t0 = (start + lo as isize) as usize;
            for (o, &k) in out[t0..t0 + (hi - lo)].iter_mut().zip(&reversed[lo..hi]) {
                *o += k;
            }
        }
    }
    Ok(())
}

/// Adjoint of [`convolve`]: given `dL/dx` for every bin, return `dL/dkernel`,
/// `G[n, m] = sum over spikes s of neuron n of grad[s + M/2 - m]`.
pub fn convolve_transpose(grad: &[f64], x: &SpikeMatrix, width: usize) -> Result<Kernel> {
    if grad.len() != x.n_bins() {
        return Err(Error::dims(format!(
            "trace gradient of length {} for T={}",
            grad.len(),
            x.n_bins()
        )));
    }
    let mut g = Kernel::zeros(x.n_neurons(), width);
    let t_len = x.n_bins() as isize;
    let pad = left_pad(width) as isize;
    let mut acc = vec![0.0; width];
    for n in 0..x.n_neurons() {
        let spikes = x.row(n);
        if spikes.is_empty() {
            continue;
        }
        acc.iter_mut().for_each(|v| *v = 0.0);
        for &s in spikes {
            let start = s as isize + pad - (width as isize - 1);
            let lo = (-start).max(0) as usize;
            let hi = (t_len - start).min(width as isize) as usize;
            if lo >= hi {
                continue;
            }
            let t0 = (start + lo as isize) as usize;
            for (a, &v) in acc[lo..hi].iter_mut().zip(&grad[t0..t0 + (hi - lo)]) {
                *a += v;
            }
        }
        for (dst, &a) in g.row_mut(n).iter_mut().zip(acc.iter().rev()) {
            *dst = a;
        }
    }
    Ok(g)
}

fn check(kernel: &Kernel, x: &SpikeMatrix) -> Result<()> {
    if kernel.n_rows() != x.n_neurons() {
        return Err(Error::dims(format!(
            "kernel has {} rows but data has {} neurons",
            kernel.n_rows(),
            x.n_neurons()
        )));
    }
    Ok(())
}
