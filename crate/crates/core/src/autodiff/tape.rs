//! The recorded computation graph.
//!
//! Values are appended to a tape in evaluation order; [`Tape::backward`]
//! sweeps it in reverse. A tape is single-threaded and is normally rebuilt for
//! every forward pass.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::kernels;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Penalty applied per pixel to the flow difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LossNorm {
    /// `|du| + |dv|`
    L1,
    /// `sqrt(du^2 + dv^2)`
    L2,
}

/// A user-defined operation with a hand-written backward pass.
pub trait CustomOp {
    /// Adds `d(loss)/d(input_k)` into `grads[k]` given `d(loss)/d(output)`.
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad_out: &[f64], grads: &mut [Vec<f64>]);
}

pub(crate) enum Op {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        padding: usize,
    },
    LeakyRelu {
        x: Var,
        slope: f64,
    },
    Upsample2x {
        x: Var,
    },
    AvgPool2x {
        x: Var,
    },
    Concat {
        xs: Vec<Var>,
    },
    Crop {
        x: Var,
        top: usize,
        left: usize,
    },
    Scale {
        x: Var,
        factor: f64,
    },
    Add {
        a: Var,
        b: Var,
    },
    SumSquares {
        xs: Vec<Var>,
    },
    WeightedSum {
        x: Var,
        weights: Vec<f64>,
    },
    RobustPenalty {
        pred: Var,
        target: Vec<f64>,
        valid: Vec<bool>,
        epsilon: f64,
        q: f64,
        norm: LossNorm,
    },
    Custom {
        inputs: Vec<Var>,
        op: Box<dyn CustomOp>,
    },
}

struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub(crate) fn push(&mut self, value: Tensor, op: Op) -> Var {
        debug_assert!(value.is_finite(), "non-finite value recorded on the tape");
        self.nodes.push(Node { value, grad: None, op });
        Var(self.nodes.len() - 1)
    }

    #[inline]
    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient; zeros if nothing has flowed into `v` yet.
    pub fn grad(&self, v: Var) -> Vec<f64> {
        let node = &self.nodes[v.0];
        node.grad.clone().unwrap_or_else(|| vec![0.0; node.value.len()])
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    /// Records a custom operation whose forward value was computed by the caller.
    pub fn custom(&mut self, inputs: &[Var], value: Tensor, op: Box<dyn CustomOp>) -> Var {
        self.push(
            value,
            Op::Custom {
                inputs: inputs.to_vec(),
                op,
            },
        )
    }

    /// Back-propagates from `root`, seeding its adjoint with ones, and adds the
    /// resulting gradients into every node's accumulator.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if root.0 >= self.nodes.len() {
            return Err(Error::InvalidParameter("unknown variable".into()));
        }
        let mut adj: Vec<Option<Vec<f64>>> = (0..=root.0).map(|_| None).collect();
        adj[root.0] = Some(vec![1.0; self.nodes[root.0].value.len()]);
        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            self.propagate(i, &g, &mut adj);
            let node = &mut self.nodes[i];
            match &mut node.grad {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                None => node.grad = Some(g),
            }
        }
        debug_assert!(
            self.nodes
                .iter()
                .all(|n| n.grad.as_ref().map_or(true, |g| g.iter().all(|x| x.is_finite()))),
            "non-finite gradient after backward"
        );
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                x,
                w,
                b,
                stride,
                padding,
            } => {
                let (gx, gw, gb) = kernels::conv2d_backward(val(*x), val(*w), g, *stride, *padding);
                accumulate(adj, *x, &gx);
                accumulate(adj, *w, &gw);
                accumulate(adj, *b, &gb);
            }
            Op::LeakyRelu { x, slope } => {
                let gx: Vec<f64> = val(*x)
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(v, g)| if *v > 0.0 { *g } else { slope * g })
                    .collect();
                accumulate(adj, *x, &gx);
            }
            Op::Upsample2x { x } => {
                let gx = kernels::upsample2x_backward(val(*x).shape(), g);
                accumulate(adj, *x, &gx);
            }
            Op::AvgPool2x { x } => {
                let gx = kernels::avgpool2x_backward(val(*x).shape(), g);
                accumulate(adj, *x, &gx);
            }
            Op::Concat { xs } => {
                let [n, c_out, h, w] = node.value.dims4("concat").expect("checked at build");
                let plane = h * w;
                let mut offset = 0;
                for &x in xs {
                    let c = val(x).shape()[1];
                    let mut gx = Vec::with_capacity(n * c * plane);
                    for b in 0..n {
                        let start = (b * c_out + offset) * plane;
                        gx.extend_from_slice(&g[start..start + c * plane]);
                    }
                    accumulate(adj, x, &gx);
                    offset += c;
                }
            }
            Op::Crop { x, top, left } => {
                let gx = kernels::crop_backward(val(*x).shape(), node.value.shape(), *top, *left, g);
                accumulate(adj, *x, &gx);
            }
            Op::Scale { x, factor } => {
                let gx: Vec<f64> = g.iter().map(|g| g * factor).collect();
                accumulate(adj, *x, &gx);
            }
            Op::Add { a, b } => {
                accumulate(adj, *a, g);
                accumulate(adj, *b, g);
            }
            Op::SumSquares { xs } => {
                for &x in xs {
                    let gx: Vec<f64> = val(x).data().iter().map(|v| 2.0 * v * g[0]).collect();
                    accumulate(adj, x, &gx);
                }
            }
            Op::WeightedSum { x, weights } => {
                let gx: Vec<f64> = weights.iter().map(|w| w * g[0]).collect();
                accumulate(adj, *x, &gx);
            }
            Op::RobustPenalty {
                pred,
                target,
                valid,
                epsilon,
                q,
                norm,
            } => {
                let gx = kernels::robust_penalty_backward(val(*pred), target, valid, *epsilon, *q, *norm, g[0]);
                accumulate(adj, *pred, &gx);
            }
            Op::Custom { inputs, op } => {
                let ins: Vec<&Tensor> = inputs.iter().map(|&v| val(v)).collect();
                let mut grads: Vec<Vec<f64>> = ins.iter().map(|t| vec![0.0; t.len()]).collect();
                op.backward(&ins, &node.value, g, &mut grads);
                for (&v, gx) in inputs.iter().zip(&grads) {
                    accumulate(adj, v, gx);
                }
            }
        }
    }
}

fn accumulate(adj: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
    match &mut adj[v.0] {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g.to_vec()),
    }
}
