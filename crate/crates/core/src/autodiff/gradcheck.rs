//! Finite-difference verification of backward passes.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Check at most this many coordinates per input (all when `None`).
    pub max_coords: Option<usize>,
    /// Seed for coordinate sampling.
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-6,
            max_coords: None,
            seed: 0,
        }
    }
}

/// The worst coordinate seen by [`gradient_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradMismatch {
    pub input: usize,
    pub coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<GradMismatch>,
    pub coords_checked: usize,
}

/// Relative error `|a - n| / max(|a|, |n|, 1e-12)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

fn evaluate<F>(inputs: &[Tensor], graph: &F) -> Result<(Tape, Vec<Var>, Var)>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = graph(&mut tape, &vars)?;
    if tape.value(out).len() != 1 {
        return Err(Error::Shape {
            op: "gradient_check",
            detail: alloc::format!(
                "graph output has shape {:?}, expected a scalar",
                tape.value(out).shape()
            ),
        });
    }
    Ok((tape, vars, out))
}

/// Compares the tape's gradient of the scalar `graph(inputs)` with central
/// differences, coordinate by coordinate.
pub fn gradient_check<F>(inputs: &[Tensor], graph: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let (mut tape, vars, out) = evaluate(inputs, &graph)?;
    tape.backward(out)?;
    let analytic: Vec<Vec<f64>> = vars.iter().map(|&v| tape.grad(v)).collect();
    drop(tape);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut work: Vec<Tensor> = inputs.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coords_checked: 0,
    };
    let scalar = |work: &[Tensor]| -> Result<f64> {
        let (tape, _, out) = evaluate(work, &graph)?;
        Ok(tape.value(out).item())
    };
    for k in 0..inputs.len() {
        let mut coords: Vec<usize> = (0..inputs[k].len()).collect();
        if let Some(m) = opts.max_coords {
            if m < coords.len() {
                coords.partial_shuffle(&mut rng, m);
                coords.truncate(m);
            }
        }
        for &c in &coords {
            let orig = inputs[k].data()[c];
            work[k].data_mut()[c] = orig + opts.step;
            let fp = scalar(&work)?;
            work[k].data_mut()[c] = orig - opts.step;
            let fm = scalar(&work)?;
            work[k].data_mut()[c] = orig;
            let numeric = (fp - fm) / (2.0 * opts.step);
            let a = analytic[k][c];
            let rel = relative_error(a, numeric);
            report.coords_checked += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some(GradMismatch {
                    input: k,
                    coord: c,
                    analytic: a,
                    numeric,
                    rel_error: rel,
                });
            }
        }
    }
    Ok(report)
}
