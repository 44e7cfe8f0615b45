//! Raw forward and backward loops. Tensors are `[batch, channels, height, width]`.

use alloc::vec;
use alloc::vec::Vec;

use super::tape::LossNorm;
use super::tensor::Tensor;

#[inline]
pub(crate) fn conv_out(size: usize, k: usize, stride: usize, padding: usize) -> usize {
    (size + 2 * padding - k) / stride + 1
}

/// Output columns `[lo, hi)` whose input column `o * stride + k - padding` lies inside `[0, size)`.
#[inline]
fn valid_range(k: usize, padding: usize, stride: usize, size: usize, out: usize) -> (usize, usize) {
    let lo = if padding > k { (padding - k).div_ceil(stride) } else { 0 };
    let hi = if size + padding > k {
        ((size - 1 + padding - k) / stride + 1).min(out)
    } else {
        0
    };
    (lo, hi.max(lo))
}

pub(crate) fn conv2d_forward(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, padding: usize) -> Tensor {
    let [n, c, h, wd] = x.dims4("conv2d").expect("validated");
    let [o, _, k, _] = w.dims4("conv2d").expect("validated");
    let (oh, ow) = (conv_out(h, k, stride, padding), conv_out(wd, k, stride, padding));
    let mut out = Tensor::zeros(&[n, o, oh, ow]);
    let (xd, wdat, bd) = (x.data(), w.data(), b.data());
    let od = out.data_mut();
    for bi in 0..n {
        for oc in 0..o {
            let oplane = &mut od[(bi * o + oc) * oh * ow..][..oh * ow];
            oplane.fill(bd[oc]);
            for ic in 0..c {
                let iplane = &xd[(bi * c + ic) * h * wd..][..h * wd];
                for ky in 0..k {
                    let (y0, y1) = valid_range(ky, padding, stride, h, oh);
                    for kx in 0..k {
                        let wv = wdat[((oc * c + ic) * k + ky) * k + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let (x0, x1) = valid_range(kx, padding, stride, wd, ow);
                        for oy in y0..y1 {
                            let iy = oy * stride + ky - padding;
                            let irow = &iplane[iy * wd..(iy + 1) * wd];
                            let orow = &mut oplane[oy * ow + x0..oy * ow + x1];
                            if stride == 1 {
                                let ix0 = x0 + kx - padding;
                                for (ov, iv) in orow.iter_mut().zip(&irow[ix0..ix0 + (x1 - x0)]) {
                                    *ov += wv * iv;
                                }
                            } else {
                                for (j, ov) in orow.iter_mut().enumerate() {
                                    *ov += wv * irow[(x0 + j) * stride + kx - padding];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    g: &[f64],
    stride: usize,
    padding: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let [n, c, h, wd] = x.dims4("conv2d").expect("validated");
    let [o, _, k, _] = w.dims4("conv2d").expect("validated");
    let (oh, ow) = (conv_out(h, k, stride, padding), conv_out(wd, k, stride, padding));
    let (xd, wdat) = (x.data(), w.data());
    let mut gx = vec![0.0; x.len()];
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; o];
    for bi in 0..n {
        for oc in 0..o {
            let gplane = &g[(bi * o + oc) * oh * ow..][..oh * ow];
            gb[oc] += gplane.iter().sum::<f64>();
            for ic in 0..c {
                let base = (bi * c + ic) * h * wd;
                let iplane = &xd[base..base + h * wd];
                let gxplane = &mut gx[base..base + h * wd];
                for ky in 0..k {
                    let (y0, y1) = valid_range(ky, padding, stride, h, oh);
                    for kx in 0..k {
                        let widx = ((oc * c + ic) * k + ky) * k + kx;
                        let wv = wdat[widx];
                        let (x0, x1) = valid_range(kx, padding, stride, wd, ow);
                        let mut acc = 0.0;
                        for oy in y0..y1 {
                            let iy = oy * stride + ky - padding;
                            let grow = &gplane[oy * ow + x0..oy * ow + x1];
                            if stride == 1 {
                                let ix0 = iy * wd + x0 + kx - padding;
                                let irow = &iplane[ix0..ix0 + (x1 - x0)];
                                let gxrow = &mut gxplane[ix0..ix0 + (x1 - x0)];
                                for ((gv, iv), gxv) in grow.iter().zip(irow).zip(gxrow) {
                                    acc += gv * iv;
                                    *gxv += wv * gv;
                                }
                            } else {
                                for (j, gv) in grow.iter().enumerate() {
                                    let ix = iy * wd + (x0 + j) * stride + kx - padding;
                                    acc += gv * iplane[ix];
                                    gxplane[ix] += wv * gv;
                                }
                            }
                        }
                        gw[widx] += acc;
                    }
                }
            }
        }
    }
    (gx, gw, gb)
}

/// Source taps for 2x bilinear upsampling with half-pixel centers.
fn up_taps(size: usize) -> Vec<(usize, usize, f64)> {
    (0..2 * size)
        .map(|i| {
            let src = ((i as f64 + 0.5) * 0.5 - 0.5).max(0.0);
            let i0 = (src as usize).min(size - 1);
            let i1 = (i0 + 1).min(size - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

pub(crate) fn upsample2x_forward(x: &Tensor) -> Tensor {
    let [n, c, h, w] = x.dims4("upsample2x").expect("validated");
    let (ty, tx) = (up_taps(h), up_taps(w));
    let mut out = Tensor::zeros(&[n, c, 2 * h, 2 * w]);
    let od = out.data_mut();
    for p in 0..n * c {
        let ip = &x.data()[p * h * w..][..h * w];
        let op = &mut od[p * 4 * h * w..][..4 * h * w];
        for (oy, &(y0, y1, ly)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, lx)) in tx.iter().enumerate() {
                let top = ip[y0 * w + x0] + lx * (ip[y0 * w + x1] - ip[y0 * w + x0]);
                let bot = ip[y1 * w + x0] + lx * (ip[y1 * w + x1] - ip[y1 * w + x0]);
                op[oy * 2 * w + ox] = top + ly * (bot - top);
            }
        }
    }
    out
}

pub(crate) fn upsample2x_backward(shape: &[usize], g: &[f64]) -> Vec<f64> {
    let (n, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
    let (ty, tx) = (up_taps(h), up_taps(w));
    let mut gx = vec![0.0; n * c * h * w];
    for p in 0..n * c {
        let gp = &g[p * 4 * h * w..][..4 * h * w];
        let xp = &mut gx[p * h * w..][..h * w];
        for (oy, &(y0, y1, ly)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, lx)) in tx.iter().enumerate() {
                let gv = gp[oy * 2 * w + ox];
                xp[y0 * w + x0] += gv * (1.0 - ly) * (1.0 - lx);
                xp[y0 * w + x1] += gv * (1.0 - ly) * lx;
                xp[y1 * w + x0] += gv * ly * (1.0 - lx);
                xp[y1 * w + x1] += gv * ly * lx;
            }
        }
    }
    gx
}

pub(crate) fn avgpool2x_forward(x: &Tensor) -> Tensor {
    let [n, c, h, w] = x.dims4("avgpool2x").expect("validated");
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[n, c, oh, ow]);
    let od = out.data_mut();
    for p in 0..n * c {
        let ip = &x.data()[p * h * w..][..h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let i = 2 * oy * w + 2 * ox;
                od[(p * oh + oy) * ow + ox] = 0.25 * (ip[i] + ip[i + 1] + ip[i + w] + ip[i + w + 1]);
            }
        }
    }
    out
}

pub(crate) fn avgpool2x_backward(shape: &[usize], g: &[f64]) -> Vec<f64> {
    let (n, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
    let (oh, ow) = (h / 2, w / 2);
    let mut gx = vec![0.0; n * c * h * w];
    for p in 0..n * c {
        let xp = &mut gx[p * h * w..][..h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let gv = 0.25 * g[(p * oh + oy) * ow + ox];
                let i = 2 * oy * w + 2 * ox;
                xp[i] += gv;
                xp[i + 1] += gv;
                xp[i + w] += gv;
                xp[i + w + 1] += gv;
            }
        }
    }
    gx
}

pub(crate) fn crop_forward(x: &Tensor, top: usize, left: usize, oh: usize, ow: usize) -> Tensor {
    let [n, c, h, w] = x.dims4("crop").expect("validated");
    let mut data = Vec::with_capacity(n * c * oh * ow);
    for p in 0..n * c {
        for y in top..top + oh {
            let row = (p * h + y) * w + left;
            data.extend_from_slice(&x.data()[row..row + ow]);
        }
    }
    Tensor::from_vec(&[n, c, oh, ow], data).expect("sized above")
}

pub(crate) fn crop_backward(in_shape: &[usize], out_shape: &[usize], top: usize, left: usize, g: &[f64]) -> Vec<f64> {
    let (n, c, h, w) = (in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
    let (oh, ow) = (out_shape[2], out_shape[3]);
    let mut gx = vec![0.0; n * c * h * w];
    for p in 0..n * c {
        for y in 0..oh {
            let dst = (p * h + top + y) * w + left;
            gx[dst..dst + ow].copy_from_slice(&g[(p * oh + y) * ow..][..ow]);
        }
    }
    gx
}

/// Per-pixel difference norm for a `[n, 2, h, w]` prediction.
#[inline]
fn diff(norm: LossNorm, du: f64, dv: f64) -> f64 {
    match norm {
        LossNorm::L1 => du.abs() + dv.abs(),
        LossNorm::L2 => libm::hypot(du, dv),
    }
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn robust_penalty_forward(
    pred: &Tensor,
    target: &[f64],
    valid: &[bool],
    epsilon: f64,
    q: f64,
    norm: LossNorm,
) -> f64 {
    let [n, _, h, w] = pred.dims4("robust_penalty").expect("validated");
    let plane = h * w;
    let p = pred.data();
    let mut sum = 0.0;
    for b in 0..n {
        for i in 0..plane {
            if !valid[b * plane + i] {
                continue;
            }
            let (iu, iv) = (2 * b * plane + i, (2 * b + 1) * plane + i);
            let d = diff(norm, p[iu] - target[iu], p[iv] - target[iv]);
            sum += libm::pow(d + epsilon, q);
        }
    }
    sum
}

pub(crate) fn robust_penalty_backward(
    pred: &Tensor,
    target: &[f64],
    valid: &[bool],
    epsilon: f64,
    q: f64,
    norm: LossNorm,
    g: f64,
) -> Vec<f64> {
    let [n, _, h, w] = pred.dims4("robust_penalty").expect("validated");
    let plane = h * w;
    let p = pred.data();
    let mut gx = vec![0.0; p.len()];
    for b in 0..n {
        for i in 0..plane {
            if !valid[b * plane + i] {
                continue;
            }
            let (iu, iv) = (2 * b * plane + i, (2 * b + 1) * plane + i);
            let (du, dv) = (p[iu] - target[iu], p[iv] - target[iv]);
            let d = diff(norm, du, dv);
            let outer = g * q * libm::pow(d + epsilon, q - 1.0);
            let (su, sv) = match norm {
                LossNorm::L1 => (sign(du), sign(dv)),
                LossNorm::L2 if d > 0.0 => (du / d, dv / d),
                LossNorm::L2 => (0.0, 0.0),
            };
            gx[iu] = outer * su;
            gx[iv] = outer * sv;
        }
    }
    gx
}
