//! Forward and backward kernels on flat `[c x h x w]` buffers.

use super::Real;

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub out_c: usize,
    pub k: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        self.h + 2 * self.pad - self.k + 1
    }

    pub fn out_w(&self) -> usize {
        self.w + 2 * self.pad - self.k + 1
    }

    /// Output index range along one axis for kernel offset `kk` so that the
    /// input index `o + kk - pad` stays inside `[0, n)`.
    fn valid(&self, kk: usize, n: usize, n_out: usize) -> (usize, usize) {
        let lo = self.pad.saturating_sub(kk);
        let hi = n_out.min((n + self.pad).saturating_sub(kk));
        (lo, hi.max(lo))
    }
}

pub(crate) fn conv_forward<T: Real>(
    g: ConvGeom,
    input: &[T],
    weight: &[T],
    bias: &[T],
    out: &mut [T],
) {
    let (oh, ow) = (g.out_h(), g.out_w());
    for o in 0..g.out_c {
        let out_o = &mut out[o * oh * ow..(o + 1) * oh * ow];
        out_o.fill(bias[o]);
        for ci in 0..g.c {
            let in_c = &input[ci * g.h * g.w..(ci + 1) * g.h * g.w];
            for ky in 0..g.k {
                let (y_lo, y_hi) = g.valid(ky, g.h, oh);
                for kx in 0..g.k {
                    let wv = weight[((o * g.c + ci) * g.k + ky) * g.k + kx];
                    let (x_lo, x_hi) = g.valid(kx, g.w, ow);
                    for y in y_lo..y_hi {
                        let iy = y + ky - g.pad;
                        let ix0 = x_lo + kx - g.pad;
                        let orow = &mut out_o[y * ow + x_lo..y * ow + x_hi];
                        let irow = &in_c[iy * g.w + ix0..iy * g.w + ix0 + (x_hi - x_lo)];
                        for (dst, &src) in orow.iter_mut().zip(irow) {
                            *dst += wv * src;
                        }
                    }
                }
            }
        }
    }
}

/// Stride-1 zero-padded convolution of a `[c x h x w]` input with
/// `[out_c x c x k x k]` weights; the optimized kernel used by the network.
pub fn conv2d(
    input: &[f64],
    [c, h, w]: [usize; 3],
    weight: &[f64],
    bias: &[f64],
    kernel: usize,
    padding: usize,
) -> crate::Result<Vec<f64>> {
    let out_c = bias.len();
    if kernel == 0
        || input.len() != c * h * w
        || weight.len() != out_c * c * kernel * kernel
        || h + 2 * padding < kernel
        || w + 2 * padding < kernel
    {
        return Err(crate::Error::InvalidArgument(
            "convolution buffers do not match the given shape".into(),
        ));
    }
    let g = ConvGeom {
        c,
        h,
        w,
        out_c,
        k: kernel,
        pad: padding,
    };
    let mut out = vec![0.0; out_c * g.out_h() * g.out_w()];
    conv_forward(g, input, weight, bias, &mut out);
    Ok(out)
}

/// Accumulates weight and bias gradients; writes the input gradient when
/// `d_input` is given.
pub(crate) fn conv_backward<T: Real>(
    g: ConvGeom,
    input: &[T],
    weight: &[T],
    d_out: &[T],
    d_weight: &mut [T],
    d_bias: &mut [T],
    mut d_input: Option<&mut [T]>,
) {
    let (oh, ow) = (g.out_h(), g.out_w());
    if let Some(di) = d_input.as_deref_mut() {
        di.fill(T::zero());
    }
    for o in 0..g.out_c {
        let d_o = &d_out[o * oh * ow..(o + 1) * oh * ow];
        d_bias[o] += d_o.iter().copied().sum::<T>();
        for ci in 0..g.c {
            let in_c = &input[ci * g.h * g.w..(ci + 1) * g.h * g.w];
            for ky in 0..g.k {
                let (y_lo, y_hi) = g.valid(ky, g.h, oh);
                for kx in 0..g.k {
                    let widx = ((o * g.c + ci) * g.k + ky) * g.k + kx;
                    let wv = weight[widx];
                    let (x_lo, x_hi) = g.valid(kx, g.w, ow);
                    let n = x_hi - x_lo;
                    let mut acc = T::zero();
                    for y in y_lo..y_hi {
                        let iy = y + ky - g.pad;
                        let ix0 = x_lo + kx - g.pad;
                        let drow = &d_o[y * ow + x_lo..y * ow + x_hi];
                        let irow = &in_c[iy * g.w + ix0..iy * g.w + ix0 + n];
                        acc += dot(drow, irow);
                        if let Some(di) = d_input.as_deref_mut() {
                            let base = ci * g.h * g.w + iy * g.w + ix0;
                            for (dst, &d) in di[base..base + n].iter_mut().zip(drow) {
                                *dst += wv * d;
                            }
                        }
                    }
                    d_weight[widx] += acc;
                }
            }
        }
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    // Four partial sums keep the loop vectorizable and the order fixed.
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for j in 0..4 {
            acc[j] += a[4 * i + j] * b[4 * i + j];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn relu_forward<T: Real>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

/// Zeroes gradients where the activation output was not positive.
pub(crate) fn relu_backward<T: Real>(output: &[T], grad: &mut [T]) {
    for (g, &o) in grad.iter_mut().zip(output) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Max pooling; `argmax[i]` records the input index chosen for output `i`.
/// Ties go to the first maximum in row-major window order.
pub(crate) fn maxpool_forward<T: Real>(
    c: usize,
    h: usize,
    w: usize,
    size: usize,
    input: &[T],
    out: &mut [T],
    argmax: &mut [usize],
) {
    let (oh, ow) = (h / size, w / size);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_idx = ch * h * w + oy * size * w + ox * size;
                let mut best = input[best_idx];
                for dy in 0..size {
                    for dx in 0..size {
                        let idx = ch * h * w + (oy * size + dy) * w + ox * size + dx;
                        if input[idx] > best {
                            best = input[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = (ch * oh + oy) * ow + ox;
                out[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
}

pub(crate) fn maxpool_backward<T: Real>(argmax: &[usize], d_out: &[T], d_input: &mut [T]) {
    d_input.fill(T::zero());
    for (&idx, &d) in argmax.iter().zip(d_out) {
        d_input[idx] += d;
    }
}

pub(crate) fn dense_forward<T: Real>(input: &[T], weight: &[T], bias: &[T], out: &mut [T]) {
    let n_in = input.len();
    for (j, o) in out.iter_mut().enumerate() {
        *o = bias[j] + dot(&weight[j * n_in..(j + 1) * n_in], input);
    }
}

pub(crate) fn dense_backward<T: Real>(
    input: &[T],
    weight: &[T],
    d_out: &[T],
    d_weight: &mut [T],
    d_bias: &mut [T],
    d_input: Option<&mut [T]>,
) {
    let n_in = input.len();
    for (j, &d) in d_out.iter().enumerate() {
        d_bias[j] += d;
        if d == T::zero() {
            continue;
        }
        for (gw, &x) in d_weight[j * n_in..(j + 1) * n_in].iter_mut().zip(input) {
            *gw += d * x;
        }
    }
    if let Some(di) = d_input {
        di.fill(T::zero());
        for (j, &d) in d_out.iter().enumerate() {
            if d == T::zero() {
                continue;
            }
            for (dst, &wv) in di.iter_mut().zip(&weight[j * n_in..(j + 1) * n_in]) {
                *dst += wv * d;
            }
        }
    }
}

/// Numerically stable softmax.
pub(crate) fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln softmax(logits)[label]` computed via log-sum-exp.
pub(crate) fn cross_entropy<T: Real>(logits: &[T], label: usize) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
    lse - logits[label]
}
