//! Slow, loop-by-loop versions of the network computations, kept for
//! verifying the optimized kernels.

use super::{LayerSpec, ModelSpec, Tensor};

/// Direct 6-loop 2-D convolution over a `[c x h x w]` input, stride 1,
/// zero padding. Weights are `[out_c x c x k x k]`.
pub fn conv2d_direct(
    input: &[f64],
    [c, h, w]: [usize; 3],
    weight: &[f64],
    bias: &[f64],
    kernel: usize,
    padding: usize,
) -> Vec<f64> {
    let out_c = bias.len();
    let (oh, ow) = (h + 2 * padding + 1 - kernel, w + 2 * padding + 1 - kernel);
    let mut out = vec![0.0; out_c * oh * ow];
    for o in 0..out_c {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = bias[o];
                for ci in 0..c {
                    for ky in 0..kernel {
                        for kx in 0..kernel {
                            let iy = y as i64 + ky as i64 - padding as i64;
                            let ix = x as i64 + kx as i64 - padding as i64;
                            if iy < 0 || ix < 0 || iy >= h as i64 || ix >= w as i64 {
                                continue;
                            }
                            acc += weight[((o * c + ci) * kernel + ky) * kernel + kx]
                                * input[(ci * h + iy as usize) * w + ix as usize];
                        }
                    }
                }
                out[(o * oh + y) * ow + x] = acc;
            }
        }
    }
    out
}

/// ReLU signs and pooling winners; a finite-difference step that changes
/// this pattern straddles a kink.
#[derive(PartialEq, Eq, Debug, Default, Clone)]
pub struct Pattern(pub Vec<u32>);

/// Mean cross-entropy of `spec` with `params` over a batch, computed
/// with plain nested loops in `f64`, plus the activation pattern.
pub fn naive_loss(
    spec: &ModelSpec,
    params: &[Tensor<f64>],
    inputs: &[Vec<f64>],
    labels: &[usize],
) -> (f64, Pattern) {
    let mut total = 0.0;
    let mut pattern = Pattern::default();
    for (x, &label) in inputs.iter().zip(labels) {
        let [mut c, mut h, mut w] = spec.input_shape;
        let mut a = x.clone();
        let mut p = 0;
        for layer in &spec.layers {
            match *layer {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    padding,
                } => {
                    let (wt, b) = (&params[p].values, &params[p + 1].values);
                    p += 2;
                    let mut out = vec![0.0; out_channels * h * w];
                    for o in 0..out_channels {
                        for y in 0..h {
                            for xx in 0..w {
                                let mut s = b[o];
                                for ci in 0..c {
                                    for ky in 0..kernel {
                                        for kx in 0..kernel {
                                            let iy = y as isize + ky as isize - padding as isize;
                                            let ix = xx as isize + kx as isize - padding as isize;
                                            if iy >= 0
                                                && ix >= 0
                                                && (iy as usize) < h
                                                && (ix as usize) < w
                                            {
                                                s += wt[((o * c + ci) * kernel + ky) * kernel + kx]
                                                    * a[(ci * h + iy as usize) * w + ix as usize];
                                            }
                                        }
                                    }
                                }
                                out[(o * h + y) * w + xx] = s;
                            }
                        }
                    }
                    a = out;
                    c = out_channels;
                }
                LayerSpec::Relu => {
                    for v in &mut a {
                        pattern.0.push(u32::from(*v > 0.0));
                        *v = v.max(0.0);
                    }
                }
                LayerSpec::MaxPool { size } => {
                    let (oh, ow) = (h / size, w / size);
                    let mut out = vec![0.0; c * oh * ow];
                    for ch in 0..c {
                        for y in 0..oh {
                            for xx in 0..ow {
                                let mut best = (f64::NEG_INFINITY, 0u32);
                                for dy in 0..size {
                                    for dx in 0..size {
                                        let v = a[(ch * h + y * size + dy) * w + xx * size + dx];
                                        if v > best.0 {
                                            best = (v, (dy * size + dx) as u32);
                                        }
                                    }
                                }
                                pattern.0.push(best.1);
                                out[(ch * oh + y) * ow + xx] = best.0;
                            }
                        }
                    }
                    a = out;
                    h = oh;
                    w = ow;
                }
                LayerSpec::Flatten => {}
                LayerSpec::Dense { units } => {
                    let (wt, b) = (&params[p].values, &params[p + 1].values);
                    p += 2;
                    let n_in = a.len();
                    a = (0..units)
                        .map(|j| b[j] + (0..n_in).map(|i| wt[j * n_in + i] * a[i]).sum::<f64>())
                        .collect();
                }
                LayerSpec::Softmax => {
                    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = a.iter().map(|v| (v - m).exp()).sum();
                    total += -(a[label] - m - z.ln());
                }
            }
        }
    }
    (total / inputs.len() as f64, pattern)
}
