//! Raw numeric loops behind the graph ops.
//!
//! These are written so the inner loops stream over contiguous slices with
//! a scalar coefficient, which the compiler turns into FMA vector code.
//! Reductions use striped accumulators to keep a fixed, deterministic
//! summation order.

/// out[j] += s * src[j]
#[inline]
fn axpy(out: &mut [f64], src: &[f64], s: f64) {
    for (o, x) in out.iter_mut().zip(src) {
        *o += s * *x;
    }
}

/// Dot product with four striped accumulators (fixed order).
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// C[m×n] = A[m×k] · B[k×n], accumulating row by row over k.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    out.fill(0.0);
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        for (kk, &av) in a_row.iter().enumerate() {
            axpy(out_row, &b[kk * n..(kk + 1) * n], av);
        }
    }
}

/// dA[m×k] += G[m×n] · Bᵀ, dB[k×n] += Aᵀ · G[m×n]
pub fn matmul_backward(
    a: &[f64],
    b: &[f64],
    gout: &[f64],
    m: usize,
    k: usize,
    n: usize,
    da: &mut [f64],
    db: &mut [f64],
) {
    for i in 0..m {
        let g_row = &gout[i * n..(i + 1) * n];
        let da_row = &mut da[i * k..(i + 1) * k];
        for kk in 0..k {
            da_row[kk] += dot(g_row, &b[kk * n..(kk + 1) * n]);
        }
        let a_row = &a[i * k..(i + 1) * k];
        for (kk, &av) in a_row.iter().enumerate() {
            axpy(&mut db[kk * n..(kk + 1) * n], g_row, av);
        }
    }
}

/// Output spatial size for a square-kernel convolution.
#[inline]
pub fn conv_out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (input + 2 * pad - kernel) / stride + 1
}

/// Cross-correlation (no kernel flip) of x[C,H,W] with w[O,C,k,k].
///
/// With pad = 1 this preserves spatial dims for k=3/stride 1 and halves
/// them (ceil) for stride 2.
#[allow(clippy::too_many_arguments)]
pub fn conv2d(
    x: &[f64],
    c_in: usize,
    h: usize,
    w: usize,
    wgt: &[f64],
    c_out: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    out: &mut [f64],
) {
    let ho = conv_out_dim(h, kernel, stride, pad);
    let wo = conv_out_dim(w, kernel, stride, pad);
    out.fill(0.0);
    if kernel == 3 && stride == 1 && pad == 1 {
        conv3x1_forward(x, c_in, h, w, wgt, c_out, out);
        return;
    }
    for o in 0..c_out {
        let out_plane = &mut out[o * ho * wo..(o + 1) * ho * wo];
        for c in 0..c_in {
            let x_plane = &x[c * h * w..(c + 1) * h * w];
            let w_base = ((o * c_in) + c) * kernel * kernel;
            for ky in 0..kernel {
                for kx in 0..kernel {
                    let wv = wgt[w_base + ky * kernel + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    conv_accum_rows(x_plane, h, w, out_plane, ho, wo, ky, kx, stride, pad, wv);
                }
            }
        }
    }
}

/// Fused three-tap row pass: out[1..w-1] += w0·src[0..] + w1·src[1..] + w2·src[2..],
/// with the two border columns handled separately.
#[inline]
fn row_3tap(out_row: &mut [f64], src: &[f64], w0: f64, w1: f64, w2: f64) {
    let w = out_row.len();
    out_row[0] += w1 * src[0] + w2 * src[1];
    let interior = &mut out_row[1..w - 1];
    let (s0, s1, s2) = (&src[0..w - 2], &src[1..w - 1], &src[2..w]);
    for (((o, a), b), c) in interior.iter_mut().zip(s0).zip(s1).zip(s2) {
        *o += w0 * *a + w1 * *b + w2 * *c;
    }
    out_row[w - 1] += w0 * src[w - 2] + w1 * src[w - 1];
}

/// Specialized 3×3 stride-1 pad-1 forward: one fused pass per (o,c,ky,row).
fn conv3x1_forward(x: &[f64], c_in: usize, h: usize, w: usize, wgt: &[f64], c_out: usize, out: &mut [f64]) {
    for o in 0..c_out {
        let out_plane = &mut out[o * h * w..(o + 1) * h * w];
        for c in 0..c_in {
            let x_plane = &x[c * h * w..(c + 1) * h * w];
            let wk = &wgt[((o * c_in) + c) * 9..((o * c_in) + c) * 9 + 9];
            for ky in 0..3usize {
                let (w0, w1, w2) = (wk[ky * 3], wk[ky * 3 + 1], wk[ky * 3 + 2]);
                let y_lo = if ky == 0 { 1 } else { 0 };
                let y_hi = if ky == 2 { h - 1 } else { h };
                for y in y_lo..y_hi {
                    let yi = y + ky - 1;
                    let src = &x_plane[yi * w..(yi + 1) * w];
                    row_3tap(&mut out_plane[y * w..(y + 1) * w], src, w0, w1, w2);
                }
            }
        }
    }
}

/// Row walker for the forward pass:
/// out[yo,xo] += wv * x[yo*s+ky-p, xo*s+kx-p] over the valid range.
#[allow(clippy::too_many_arguments)]
fn conv_accum_rows(
    x: &[f64],
    h: usize,
    w: usize,
    out: &mut [f64],
    ho: usize,
    wo: usize,
    ky: usize,
    kx: usize,
    stride: usize,
    pad: usize,
    wv: f64,
) {
    let oy = ky as isize - pad as isize;
    let ox = kx as isize - pad as isize;
    for yo in 0..ho {
        let yi = yo as isize * stride as isize + oy;
        if yi < 0 || yi >= h as isize {
            continue;
        }
        // valid xo range: 0 <= xo*stride + ox < w
        let xo_lo = if ox < 0 {
            (-ox as usize).div_ceil(stride)
        } else {
            0
        };
        let xo_hi_excl = {
            let limit = w as isize - ox; // xo*stride < limit
            if limit <= 0 {
                0
            } else {
                (((limit - 1) as usize) / stride + 1).min(wo)
            }
        };
        if xo_lo >= xo_hi_excl {
            continue;
        }
        let x_row_base = yi as usize * w;
        let out_row_base = yo * wo;
        if stride == 1 {
            let len = xo_hi_excl - xo_lo;
            let xs = (x_row_base as isize + xo_lo as isize + ox) as usize;
            let src = &x[xs..xs + len];
            let dst = &mut out[out_row_base + xo_lo..out_row_base + xo_lo + len];
            axpy(dst, src, wv);
        } else {
            for xo in xo_lo..xo_hi_excl {
                let xi = (xo * stride) as isize + ox;
                out[out_row_base + xo] += wv * x[x_row_base + xi as usize];
            }
        }
    }
}

/// dX += correlation of the output gradient with the kernel.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward_input(
    gout: &[f64],
    wgt: &[f64],
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    dx: &mut [f64],
) {
    if kernel == 3 && stride == 1 && pad == 1 {
        // dx row yi gathers from gout rows with reversed taps.
        for o in 0..c_out {
            let g_plane = &gout[o * h * w..(o + 1) * h * w];
            for c in 0..c_in {
                let dx_plane = &mut dx[c * h * w..(c + 1) * h * w];
                let wk = &wgt[((o * c_in) + c) * 9..((o * c_in) + c) * 9 + 9];
                for ky in 0..3usize {
                    let (w0, w1, w2) = (wk[ky * 3], wk[ky * 3 + 1], wk[ky * 3 + 2]);
                    for yo in 0..h {
                        let yi = yo as isize + ky as isize - 1;
                        if yi < 0 || yi >= h as isize {
                            continue;
                        }
                        let yi = yi as usize;
                        let g_row = &g_plane[yo * w..(yo + 1) * w];
                        row_3tap(&mut dx_plane[yi * w..(yi + 1) * w], g_row, w2, w1, w0);
                    }
                }
            }
        }
        return;
    }
    let ho = conv_out_dim(h, kernel, stride, pad);
    let wo = conv_out_dim(w, kernel, stride, pad);
    for o in 0..c_out {
        let g_plane = &gout[o * ho * wo..(o + 1) * ho * wo];
        for c in 0..c_in {
            let dx_plane = &mut dx[c * h * w..(c + 1) * h * w];
            let w_base = ((o * c_in) + c) * kernel * kernel;
            for ky in 0..kernel {
                for kx in 0..kernel {
                    let wv = wgt[w_base + ky * kernel + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let oy = ky as isize - pad as isize;
                    let ox = kx as isize - pad as isize;
                    for yo in 0..ho {
                        let yi = yo as isize * stride as isize + oy;
                        if yi < 0 || yi >= h as isize {
                            continue;
                        }
                        let xo_lo = if ox < 0 {
                            (-ox as usize).div_ceil(stride)
                        } else {
                            0
                        };
                        let xo_hi_excl = {
                            let limit = w as isize - ox;
                            if limit <= 0 {
                                0
                            } else {
                                (((limit - 1) as usize) / stride + 1).min(wo)
                            }
                        };
                        if xo_lo >= xo_hi_excl {
                            continue;
                        }
                        let dx_row = yi as usize * w;
                        let g_row = yo * wo;
                        if stride == 1 {
                            let len = xo_hi_excl - xo_lo;
                            let xs = (dx_row as isize + xo_lo as isize + ox) as usize;
                            let src = &g_plane[g_row + xo_lo..g_row + xo_lo + len];
                            let dst = &mut dx_plane[xs..xs + len];
                            axpy(dst, src, wv);
                        } else {
                            for xo in xo_lo..xo_hi_excl {
                                let xi = ((xo * stride) as isize + ox) as usize;
                                dx_plane[dx_row + xi] += wv * g_plane[g_row + xo];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// dW[o,c,ky,kx] += Σ gout[o,·] * x[c, shifted ·]
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward_weight(
    gout: &[f64],
    x: &[f64],
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    dw: &mut [f64],
) {
    if kernel == 3 && stride == 1 && pad == 1 {
        for o in 0..c_out {
            let g_plane = &gout[o * h * w..(o + 1) * h * w];
            for c in 0..c_in {
                let x_plane = &x[c * h * w..(c + 1) * h * w];
                let w_base = ((o * c_in) + c) * 9;
                for ky in 0..3usize {
                    let (mut a0, mut a1, mut a2) = (0.0, 0.0, 0.0);
                    let y_lo = if ky == 0 { 1 } else { 0 };
                    let y_hi = if ky == 2 { h - 1 } else { h };
                    for yo in y_lo..y_hi {
                        let yi = yo + ky - 1;
                        let g_row = &g_plane[yo * w..(yo + 1) * w];
                        let src = &x_plane[yi * w..(yi + 1) * w];
                        a0 += dot(&g_row[1..], &src[..w - 1]);
                        a1 += dot(g_row, src);
                        a2 += dot(&g_row[..w - 1], &src[1..]);
                    }
                    dw[w_base + ky * 3] += a0;
                    dw[w_base + ky * 3 + 1] += a1;
                    dw[w_base + ky * 3 + 2] += a2;
                }
            }
        }
        return;
    }
    let ho = conv_out_dim(h, kernel, stride, pad);
    let wo = conv_out_dim(w, kernel, stride, pad);
    for o in 0..c_out {
        let g_plane = &gout[o * ho * wo..(o + 1) * ho * wo];
        for c in 0..c_in {
            let x_plane = &x[c * h * w..(c + 1) * h * w];
            let w_base = ((o * c_in) + c) * kernel * kernel;
            for ky in 0..kernel {
                for kx in 0..kernel {
                    let oy = ky as isize - pad as isize;
                    let ox = kx as isize - pad as isize;
                    let mut acc = 0.0;
                    for yo in 0..ho {
                        let yi = yo as isize * stride as isize + oy;
                        if yi < 0 || yi >= h as isize {
                            continue;
                        }
                        let xo_lo = if ox < 0 {
                            (-ox as usize).div_ceil(stride)
                        } else {
                            0
                        };
                        let xo_hi_excl = {
                            let limit = w as isize - ox;
                            if limit <= 0 {
                                0
                            } else {
                                (((limit - 1) as usize) / stride + 1).min(wo)
                            }
                        };
                        if xo_lo >= xo_hi_excl {
                            continue;
                        }
                        let x_row = yi as usize * w;
                        let g_row = yo * wo;
                        if stride == 1 {
                            let len = xo_hi_excl - xo_lo;
                            let xs = (x_row as isize + xo_lo as isize + ox) as usize;
                            acc += dot(
                                &g_plane[g_row + xo_lo..g_row + xo_lo + len],
                                &x_plane[xs..xs + len],
                            );
                        } else {
                            for xo in xo_lo..xo_hi_excl {
                                let xi = ((xo * stride) as isize + ox) as usize;
                                acc += g_plane[g_row + xo] * x_plane[x_row + xi];
                            }
                        }
                    }
                    dw[w_base + ky * kernel + kx] += acc;
                }
            }
        }
    }
}

/// Per-pixel stable softmax over the channel axis of x[K, H*W].
pub fn softmax_channels(x: &[f64], k: usize, hw: usize, out: &mut [f64]) {
    for p in 0..hw {
        let mut max = f64::NEG_INFINITY;
        for c in 0..k {
            max = max.max(x[c * hw + p]);
        }
        let mut denom = 0.0;
        for c in 0..k {
            let e = (x[c * hw + p] - max).exp();
            out[c * hw + p] = e;
            denom += e;
        }
        let inv = 1.0 / denom;
        for c in 0..k {
            out[c * hw + p] *= inv;
        }
    }
}

/// dX for the channelwise softmax: dx_k = p_k (g_k − Σ_j g_j p_j).
pub fn softmax_channels_backward(p: &[f64], gout: &[f64], k: usize, hw: usize, dx: &mut [f64]) {
    for pix in 0..hw {
        let mut s = 0.0;
        for c in 0..k {
            s += gout[c * hw + pix] * p[c * hw + pix];
        }
        for c in 0..k {
            dx[c * hw + pix] += p[c * hw + pix] * (gout[c * hw + pix] - s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_hand_case() {
        // [[1,2],[3,4]]·[[1],[1]] = [[3],[7]]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.0, 1.0];
        let mut out = [0.0; 2];
        matmul(&a, &b, 2, 2, 1, &mut out);
        assert_eq!(out, [3.0, 7.0]);
    }

    #[test]
    fn conv_shapes() {
        assert_eq!(conv_out_dim(32, 3, 1, 1), 32);
        assert_eq!(conv_out_dim(4, 3, 2, 1), 2);
        assert_eq!(conv_out_dim(32, 4, 2, 1), 16);
        assert_eq!(conv_out_dim(8, 1, 1, 0), 8);
    }

    #[test]
    fn conv_matches_naive_reference() {
        // Compare the tiled loops against a direct five-loop reference.
        let mut rng = crate::numkit::rng::Rng::new(9);
        for &(c_in, h, w, c_out, k, s, p) in &[
            (2usize, 5usize, 6usize, 3usize, 3usize, 1usize, 1usize),
            (3, 6, 6, 2, 3, 2, 1),
            (2, 8, 8, 2, 4, 2, 1),
            (4, 5, 5, 3, 1, 1, 0),
        ] {
            let x: Vec<f64> = (0..c_in * h * w).map(|_| rng.normal()).collect();
            let wgt: Vec<f64> = (0..c_out * c_in * k * k).map(|_| rng.normal()).collect();
            let ho = conv_out_dim(h, k, s, p);
            let wo = conv_out_dim(w, k, s, p);
            let mut out = vec![0.0; c_out * ho * wo];
            conv2d(&x, c_in, h, w, &wgt, c_out, k, s, p, &mut out);

            let mut expect = vec![0.0; c_out * ho * wo];
            for o in 0..c_out {
                for yo in 0..ho {
                    for xo in 0..wo {
                        let mut acc = 0.0;
                        for c in 0..c_in {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let yi = (yo * s + ky) as isize - p as isize;
                                    let xi = (xo * s + kx) as isize - p as isize;
                                    if yi >= 0 && yi < h as isize && xi >= 0 && xi < w as isize {
                                        acc += wgt[((o * c_in + c) * k + ky) * k + kx]
                                            * x[(c * h + yi as usize) * w + xi as usize];
                                    }
                                }
                            }
                        }
                        expect[(o * ho + yo) * wo + xo] = acc;
                    }
                }
            }
            for (got, want) in out.iter().zip(&expect) {
                assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn softmax_sums_to_one() {
        let x = [1.0, -2.0, 0.5, 3.0, 0.0, -1.0];
        let mut out = [0.0; 6];
        softmax_channels(&x, 3, 2, &mut out);
        for p in 0..2 {
            let s: f64 = (0..3).map(|c| out[c * 2 + p]).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
