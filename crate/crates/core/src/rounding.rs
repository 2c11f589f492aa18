//! Turning approximate designs into executable integer designs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ApproximateDesign, Criterion, ExactDesign, ExactPoint, ParamVector};
use crate::solver::ds_weights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApportionmentResult {
    pub counts: Vec<u64>,
    pub input_weights: Vec<f64>,
    pub n: u64,
}

/// Efficient rounding of `n * w_i` to integers summing to `n`.
///
/// Starts from `ceil((n - k/2) w_i)` and then moves one trial at a time:
/// while short, increment the index minimising `n_i / w_i`; while over,
/// decrement the index maximising `(n_i - 1) / w_i`. Ties go to the
/// smallest index.
pub fn efficient_round(weights: &[f64], n: u64) -> Result<ApportionmentResult> {
    let k = weights.len();
    if k == 0 || (n as usize) < k {
        return Err(Error::Infeasible { n, k });
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidDesign(format!(
            "apportionment weight {w} must be positive"
        )));
    }
    let scale = n as f64 - k as f64 / 2.0;
    let mut counts: Vec<u64> = weights
        .iter()
        .map(|w| ((scale * w).ceil() as u64).max(1))
        .collect();
    let mut total: u64 = counts.iter().sum();
    while total < n {
        let i = argmin_by(&counts, weights, |c| c as f64);
        counts[i] += 1;
        total += 1;
    }
    while total > n {
        let i = argmax_by(&counts, weights, |c| c as f64 - 1.0);
        counts[i] -= 1;
        total -= 1;
    }
    Ok(ApportionmentResult {
        counts,
        input_weights: weights.to_vec(),
        n,
    })
}

fn argmin_by(counts: &[u64], weights: &[f64], f: impl Fn(u64) -> f64) -> usize {
    let mut best = 0;
    for i in 1..counts.len() {
        if f(counts[i]) / weights[i] < f(counts[best]) / weights[best] {
            best = i;
        }
    }
    best
}

fn argmax_by(counts: &[u64], weights: &[f64], f: impl Fn(u64) -> f64) -> usize {
    let mut best = 0;
    for i in 1..counts.len() {
        if f(counts[i]) / weights[i] > f(counts[best]) / weights[best] {
            best = i;
        }
    }
    best
}

/// Nearest integer, halves rounded up.
pub fn round_size(x: f64) -> u64 {
    (x + 0.5).floor() as u64
}

/// Rounds sizes to integers and apportions `n` trials.
///
/// For `Ds` the weights are recomputed as the Ds-optimal weights on the
/// rounded sizes (three-point designs only); for `D` the design's own
/// weights are kept.
pub fn round_design(
    design: &ApproximateDesign,
    theta: &ParamVector,
    n: u64,
    criterion: Criterion,
) -> Result<ExactDesign> {
    let sizes: Vec<u64> = design.points().iter().map(|p| round_size(p.size)).collect();
    if let Some(w) = sizes.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::SizeCollision { size: w[0] });
    }
    let weights = match criterion {
        Criterion::D => design.weights(),
        Criterion::Ds => {
            if sizes.len() != 3 {
                return Err(Error::InvalidSupport(format!(
                    "Ds rounding recomputes three-point weights; design has {} points",
                    sizes.len()
                )));
            }
            let s = [sizes[0] as f64, sizes[1] as f64, sizes[2] as f64];
            ds_weights(s, theta)?.weights.to_vec()
        }
    };
    let counts = efficient_round(&weights, n)?.counts;
    ExactDesign::new(
        sizes
            .into_iter()
            .zip(counts)
            .map(|(size, count)| ExactPoint { size, count })
            .collect(),
    )
}
