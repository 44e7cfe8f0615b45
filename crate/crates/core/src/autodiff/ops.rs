//! Differentiable operations. Each records its result on the tape.

use alloc::format;
use alloc::vec::Vec;

use super::kernels;
use super::tape::{LossNorm, Op, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

fn shape_err(op: &'static str, detail: alloc::string::String) -> Error {
    Error::Shape { op, detail }
}

/// 2-D cross-correlation. `w` is `[out, in, k, k]`, `b` is `[out]`.
pub fn conv2d(tape: &mut Tape, x: Var, w: Var, b: Var, stride: usize, padding: usize) -> Result<Var> {
    let [_, c, h, wd] = tape.value(x).dims4("conv2d")?;
    let [o, wc, k, k2] = tape.value(w).dims4("conv2d")?;
    if wc != c || k != k2 || k == 0 || stride == 0 {
        return Err(shape_err(
            "conv2d",
            format!(
                "input has {c} channels, weight shape {:?}, stride {stride}",
                tape.value(w).shape()
            ),
        ));
    }
    if tape.value(b).shape() != [o] {
        return Err(shape_err(
            "conv2d",
            format!("bias shape {:?}, expected [{o}]", tape.value(b).shape()),
        ));
    }
    if h + 2 * padding < k || wd + 2 * padding < k {
        return Err(shape_err("conv2d", format!("{wd}x{h} input too small for kernel {k}")));
    }
    let out = kernels::conv2d_forward(tape.value(x), tape.value(w), tape.value(b), stride, padding);
    Ok(tape.push(
        out,
        Op::Conv2d {
            x,
            w,
            b,
            stride,
            padding,
        },
    ))
}

pub fn leaky_relu(tape: &mut Tape, x: Var, slope: f64) -> Var {
    let src = tape.value(x);
    let data = src
        .data()
        .iter()
        .map(|&v| if v > 0.0 { v } else { slope * v })
        .collect();
    let out = Tensor::from_vec(src.shape(), data).expect("same length");
    tape.push(out, Op::LeakyRelu { x, slope })
}

/// Bilinear 2x upsampling with half-pixel centers.
pub fn upsample2x(tape: &mut Tape, x: Var) -> Result<Var> {
    let [_, _, h, w] = tape.value(x).dims4("upsample2x")?;
    if h == 0 || w == 0 {
        return Err(shape_err("upsample2x", "empty input".into()));
    }
    let out = kernels::upsample2x_forward(tape.value(x));
    Ok(tape.push(out, Op::Upsample2x { x }))
}

/// 2x2 mean pooling; odd trailing rows and columns are dropped.
pub fn avgpool2x(tape: &mut Tape, x: Var) -> Result<Var> {
    let [_, _, h, w] = tape.value(x).dims4("avgpool2x")?;
    if h < 2 || w < 2 {
        return Err(shape_err("avgpool2x", format!("{w}x{h} input is too small")));
    }
    let out = kernels::avgpool2x_forward(tape.value(x));
    Ok(tape.push(out, Op::AvgPool2x { x }))
}

/// Concatenates along the channel axis.
pub fn concat_channels(tape: &mut Tape, xs: &[Var]) -> Result<Var> {
    let first = *xs.first().ok_or_else(|| shape_err("concat", "no inputs".into()))?;
    let [n, _, h, w] = tape.value(first).dims4("concat")?;
    let mut total = 0;
    for &x in xs {
        let [xn, c, xh, xw] = tape.value(x).dims4("concat")?;
        if (xn, xh, xw) != (n, h, w) {
            return Err(shape_err(
                "concat",
                format!(
                    "shape {:?} does not match {:?}",
                    tape.value(x).shape(),
                    tape.value(first).shape()
                ),
            ));
        }
        total += c;
    }
    let plane = h * w;
    let mut data = Vec::with_capacity(n * total * plane);
    for b in 0..n {
        for &x in xs {
            let t = tape.value(x);
            let c = t.shape()[1];
            data.extend_from_slice(&t.data()[b * c * plane..(b + 1) * c * plane]);
        }
    }
    let out = Tensor::from_vec(&[n, total, h, w], data)?;
    Ok(tape.push(out, Op::Concat { xs: xs.to_vec() }))
}

/// Spatial window `[top, top + height) x [left, left + width)`.
pub fn crop(tape: &mut Tape, x: Var, top: usize, left: usize, height: usize, width: usize) -> Result<Var> {
    let [_, _, h, w] = tape.value(x).dims4("crop")?;
    if top + height > h || left + width > w {
        return Err(shape_err(
            "crop",
            format!("window {width}x{height}+{left}+{top} exceeds {w}x{h}"),
        ));
    }
    let out = kernels::crop_forward(tape.value(x), top, left, height, width);
    Ok(tape.push(out, Op::Crop { x, top, left }))
}

pub fn scale(tape: &mut Tape, x: Var, factor: f64) -> Var {
    let src = tape.value(x);
    let data = src.data().iter().map(|v| v * factor).collect();
    let out = Tensor::from_vec(src.shape(), data).expect("same length");
    tape.push(out, Op::Scale { x, factor })
}

pub fn add(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let (ta, tb) = (tape.value(a), tape.value(b));
    if ta.shape() != tb.shape() {
        return Err(shape_err("add", format!("{:?} vs {:?}", ta.shape(), tb.shape())));
    }
    let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
    let out = Tensor::from_vec(ta.shape(), data)?;
    Ok(tape.push(out, Op::Add { a, b }))
}

/// Scalar sum of squared entries over all inputs.
pub fn sum_squares(tape: &mut Tape, xs: &[Var]) -> Var {
    let s: f64 = xs
        .iter()
        .map(|&x| tape.value(x).data().iter().map(|v| v * v).sum::<f64>())
        .sum();
    tape.push(Tensor::scalar(s), Op::SumSquares { xs: xs.to_vec() })
}

/// Scalar `sum_i weights[i] * x[i]`.
pub fn weighted_sum(tape: &mut Tape, x: Var, weights: &[f64]) -> Result<Var> {
    let t = tape.value(x);
    if t.len() != weights.len() {
        return Err(Error::BufferLength {
            expected: t.len(),
            found: weights.len(),
        });
    }
    let s = t.data().iter().zip(weights).map(|(a, b)| a * b).sum();
    Ok(tape.push(
        Tensor::scalar(s),
        Op::WeightedSum {
            x,
            weights: weights.to_vec(),
        },
    ))
}

/// Scalar `sum over valid pixels of (|pred - target| + epsilon)^q` for a
/// `[n, 2, h, w]` flow prediction. `valid` is `[n, h, w]`.
pub fn robust_penalty(
    tape: &mut Tape,
    pred: Var,
    target: &Tensor,
    valid: &[bool],
    epsilon: f64,
    q: f64,
    norm: LossNorm,
) -> Result<Var> {
    let p = tape.value(pred);
    let [n, c, h, w] = p.dims4("robust_penalty")?;
    if c != 2 || target.shape() != p.shape() {
        return Err(shape_err(
            "robust_penalty",
            format!("prediction {:?}, target {:?}", p.shape(), target.shape()),
        ));
    }
    if valid.len() != n * h * w {
        return Err(Error::BufferLength {
            expected: n * h * w,
            found: valid.len(),
        });
    }
    let s = kernels::robust_penalty_forward(p, target.data(), valid, epsilon, q, norm);
    Ok(tape.push(
        Tensor::scalar(s),
        Op::RobustPenalty {
            pred,
            target: target.data().to_vec(),
            valid: valid.to_vec(),
            epsilon,
            q,
            norm,
        },
    ))
}
