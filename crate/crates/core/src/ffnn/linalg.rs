//! Dense kernels for the network. Each output element is computed by one
//! thread in a fixed summation order, so results do not depend on the thread
//! count.

use rayon::prelude::*;

/// Work below this many multiply-adds stays on the calling thread.
const PAR_THRESHOLD: usize = 1 << 18;

/// `x (n x fan_in) * w (fan_in x fan_out) + b`, row-major.
pub(super) fn affine(x: &[f64], n: usize, fan_in: usize, w: &[f64], b: &[f64], fan_out: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * fan_out];
    let row = |(xr, or): (&[f64], &mut [f64])| {
        or.copy_from_slice(b);
        for (i, &a) in xr.iter().enumerate() {
            if a != 0.0 {
                let wr = &w[i * fan_out..(i + 1) * fan_out];
                for (o, wv) in or.iter_mut().zip(wr) {
                    *o += a * wv;
                }
            }
        }
    };
    if n * fan_in * fan_out >= PAR_THRESHOLD && n > 1 {
        x.par_chunks_exact(fan_in)
            .zip(out.par_chunks_exact_mut(fan_out))
            .for_each(row);
    } else {
        x.chunks_exact(fan_in)
            .zip(out.chunks_exact_mut(fan_out))
            .for_each(row);
    }
    out
}

/// `g += aᵀ (fan_in x n) * delta (n x fan_out)`.
pub(super) fn outer_accumulate(a: &[f64], delta: &[f64], n: usize, fan_in: usize, fan_out: usize, g: &mut [f64]) {
    let row = |(i, gr): (usize, &mut [f64])| {
        for s in 0..n {
            let av = a[s * fan_in + i];
            if av != 0.0 {
                let dr = &delta[s * fan_out..(s + 1) * fan_out];
                for (gv, d) in gr.iter_mut().zip(dr) {
                    *gv += av * d;
                }
            }
        }
    };
    if n * fan_in * fan_out >= PAR_THRESHOLD {
        g.par_chunks_exact_mut(fan_out).enumerate().for_each(row);
    } else {
        g.chunks_exact_mut(fan_out).enumerate().for_each(row);
    }
}

/// `delta (n x fan_out) * wᵀ (fan_out x fan_in)`.
pub(super) fn times_transpose(delta: &[f64], n: usize, fan_out: usize, w: &[f64], fan_in: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * fan_in];
    let row = |(dr, or): (&[f64], &mut [f64])| {
        for (i, o) in or.iter_mut().enumerate() {
            let wr = &w[i * fan_out..(i + 1) * fan_out];
            *o = dr.iter().zip(wr).map(|(d, wv)| d * wv).sum();
        }
    };
    if n * fan_in * fan_out >= PAR_THRESHOLD && n > 1 {
        delta
            .par_chunks_exact(fan_out)
            .zip(out.par_chunks_exact_mut(fan_in))
            .for_each(row);
    } else {
        delta
            .chunks_exact(fan_out)
            .zip(out.chunks_exact_mut(fan_in))
            .for_each(row);
    }
    out
}
