//! Exhaustive grid search over three-point designs.
//!
//! Used to cross-check the root-based optimal designs. All three sizes vary
//! freely on the size grid (including the smallest one), and weights range
//! over the simplex lattice with the given step. For a three-point design
//! `|M| = |M_f|^2 prod(w_i lambda_i)` and `(M^-)_{11} = |M_f|^{-2} sum Q_i / w_i`,
//! so each candidate costs only a few flops.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    evaluate_model, q_values, ApproximateDesign, Criterion, ParamVector, SizeBounds,
};
use crate::solver::size_grid;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    value: f64,
    sizes: [usize; 3],
    weights: [usize; 3],
}

fn better(a: Candidate, b: Candidate) -> Candidate {
    // Ties keep the candidate with the lexicographically smaller grid index.
    if b.value > a.value || (b.value == a.value && (b.sizes, b.weights) < (a.sizes, a.weights)) {
        b
    } else {
        a
    }
}

/// Weight lattice `{(i, j, m - i - j) / m}` with all parts positive.
fn weight_lattice(m: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for i in 1..m {
        for j in 1..(m - i) {
            out.push([i, j, m - i - j]);
        }
    }
    out
}

/// Best three-point design on the grid for the criterion, with its value.
pub fn oracle_search_with_value(
    theta: &ParamVector,
    bounds: &SizeBounds,
    criterion: Criterion,
    size_step: f64,
    weight_step: f64,
) -> Result<(ApproximateDesign, f64)> {
    if !(size_step > 0.0 && weight_step > 0.0 && weight_step < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "steps must be positive, got size {size_step}, weight {weight_step}"
        )));
    }
    let m = ((1.0 / weight_step).round() as usize).max(3);
    let lattice = weight_lattice(m);
    let sizes = size_grid(bounds, size_step);
    let evals = sizes
        .iter()
        .map(|&x| evaluate_model(x, theta))
        .collect::<Result<Vec<_>>>()?;
    let log_lambda: Vec<f64> = evals.iter().map(|e| e.lambda.ln()).collect();

    // D: the weight term separates from the size term.
    let best_log_weights = lattice
        .iter()
        .map(|w| {
            let v: f64 = w.iter().map(|&k| (k as f64 / m as f64).ln()).sum();
            (v, *w)
        })
        .fold((f64::NEG_INFINITY, [0; 3]), |acc, c| {
            if c.0 > acc.0 {
                c
            } else {
                acc
            }
        });
    let inv_weights: Vec<[f64; 3]> = lattice
        .iter()
        .map(|w| w.map(|k| m as f64 / k as f64))
        .collect();

    let npts = sizes.len();
    let best = (0..npts)
        .into_par_iter()
        .map(|i| -> Result<Option<Candidate>> {
            let mut best: Option<Candidate> = None;
            for j in (i + 1)..npts {
                for l in (j + 1)..npts {
                    let mf = nalgebra::Matrix3::from_columns(&[
                        evals[i].grad,
                        evals[j].grad,
                        evals[l].grad,
                    ]);
                    let det = mf.determinant();
                    let log_det2 = (det * det).ln();
                    if !log_det2.is_finite() {
                        continue;
                    }
                    let cand = match criterion {
                        Criterion::D => Candidate {
                            value: log_det2
                                + log_lambda[i]
                                + log_lambda[j]
                                + log_lambda[l]
                                + best_log_weights.0,
                            sizes: [i, j, l],
                            weights: best_log_weights.1,
                        },
                        Criterion::Ds => {
                            let q = q_values([sizes[i], sizes[j], sizes[l]], theta)?;
                            let mut best_sum = f64::INFINITY;
                            let mut best_w = 0;
                            for (wi, iw) in inv_weights.iter().enumerate() {
                                let s = q[0] * iw[0] + q[1] * iw[1] + q[2] * iw[2];
                                if s < best_sum {
                                    best_sum = s;
                                    best_w = wi;
                                }
                            }
                            Candidate {
                                value: log_det2 - best_sum.ln(),
                                sizes: [i, j, l],
                                weights: lattice[best_w],
                            }
                        }
                    };
                    if cand.value.is_finite() {
                        best = Some(match best {
                            Some(b) => better(b, cand),
                            None => cand,
                        });
                    }
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .reduce(better)
        .ok_or_else(|| Error::InvalidParameter("size grid has fewer than three points".into()))?;

    let design = ApproximateDesign::from_parts(
        &best.sizes.map(|i| sizes[i]),
        &best.weights.map(|k| k as f64 / m as f64),
    )?;
    Ok((design, best.value))
}

/// Best three-point design on the grid.
pub fn oracle_search(
    theta: &ParamVector,
    bounds: &SizeBounds,
    criterion: Criterion,
    size_step: f64,
    weight_step: f64,
) -> Result<ApproximateDesign> {
    oracle_search_with_value(theta, bounds, criterion, size_step, weight_step).map(|r| r.0)
}
