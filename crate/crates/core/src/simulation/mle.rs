//! Maximum likelihood fitting of `(p0, p1, p2)` from grouped binomial counts.
//!
//! With exactly three group sizes the model is saturated: each observed
//! proportion can be matched exactly, and when that solution lies in the
//! parameter box it is the global maximiser. Otherwise the fit falls back to
//! multi-start Fisher scoring on a logistic reparameterisation of the box.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ExactDesign, ParamVector};

use super::SampleData;

/// Lower and upper limits of `(p0, p1, p2)` in the fit.
pub const PARAM_LOWER: [f64; 3] = [1e-8, 0.5 + 1e-8, 0.5 + 1e-8];
pub const PARAM_UPPER: [f64; 3] = [1.0 - 1e-8, 1.0, 1.0];

/// Distance to the box below which an estimate is flagged as boundary.
pub const BOUNDARY_TOL: f64 = 1e-6;

const STALL_GAIN: f64 = 1e-6;
const STALL_ITERS: usize = 5;

/// Convergence threshold on the score in the unconstrained coordinates.
pub const SCORE_TOL: f64 = 1e-9;

const MAX_SCORING_ITERS: usize = 500;
const START_P0: [f64; 2] = [0.02, 0.08];
const START_P: [f64; 2] = [0.7, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Saturated,
    Scoring,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub theta: ParamVector,
    /// Some component lies within [`BOUNDARY_TOL`] of the box.
    pub boundary: bool,
    pub method: FitMethod,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MleOptions {
    /// Skip the saturated inversion and always run Fisher scoring.
    pub force_scoring: bool,
}

/// Group size, number of trials and (possibly fractional) positives.
#[derive(Debug, Clone, Copy)]
struct Cell {
    size: f64,
    trials: f64,
    positives: f64,
}

pub fn mle_fit(design: &ExactDesign, data: &SampleData) -> Result<MleFit> {
    mle_fit_with(design, data, MleOptions::default())
}

pub fn mle_fit_with(
    design: &ExactDesign,
    data: &SampleData,
    options: MleOptions,
) -> Result<MleFit> {
    if design.len() != data.points.len()
        || design
            .points()
            .iter()
            .zip(&data.points)
            .any(|(p, d)| p.size != d.size || p.count != d.trials)
    {
        return Err(Error::InvalidDesign(
            "sample data does not match the design".into(),
        ));
    }
    if let Some(d) = data.points.iter().find(|d| d.positives > d.trials) {
        return Err(Error::InvalidDesign(format!(
            "{} positives out of {} trials",
            d.positives, d.trials
        )));
    }
    let cells: Vec<Cell> = data
        .points
        .iter()
        .map(|d| Cell {
            size: d.size as f64,
            trials: d.trials as f64,
            positives: d.positives as f64,
        })
        .collect();
    fit_cells(&cells, options)
}

/// Fits the noiseless data `y_i = n_i pi(x_i | theta)`.
pub fn mle_fit_expected(
    design: &ExactDesign,
    theta: &ParamVector,
    options: MleOptions,
) -> Result<MleFit> {
    let cells: Vec<Cell> = design
        .points()
        .iter()
        .map(|p| {
            let size = p.size as f64;
            let trials = p.count as f64;
            Cell {
                size,
                trials,
                positives: trials * theta.response_probability(size),
            }
        })
        .collect();
    fit_cells(&cells, options)
}

fn fit_cells(cells: &[Cell], options: MleOptions) -> Result<MleFit> {
    if cells.len() < 3 {
        return Err(Error::CriterionUndefined(format!(
            "MLE needs at least three group sizes, got {}",
            cells.len()
        )));
    }
    if cells.len() == 3 && !options.force_scoring {
        if let Some(est) = saturated_solution(cells) {
            if in_box(&est) {
                return finish(est, cells, FitMethod::Saturated);
            }
        }
    }
    let est = fisher_scoring(cells);
    finish(est, cells, FitMethod::Scoring)
}

fn finish(est: [f64; 3], cells: &[Cell], method: FitMethod) -> Result<MleFit> {
    let theta = ParamVector::new(est[0], est[1], est[2])?;
    Ok(MleFit {
        theta,
        boundary: near_boundary(&est),
        method,
        log_likelihood: log_likelihood(&est, cells),
    })
}

fn in_box(p: &[f64; 3]) -> bool {
    (0..3).all(|j| p[j] >= PARAM_LOWER[j] && p[j] <= PARAM_UPPER[j])
}

fn near_boundary(p: &[f64; 3]) -> bool {
    (0..3).any(|j| p[j] - PARAM_LOWER[j] < BOUNDARY_TOL || PARAM_UPPER[j] - p[j] < BOUNDARY_TOL)
}

fn response(p: &[f64; 3], x: f64) -> f64 {
    p[1] - (p[1] + p[2] - 1.0) * (x * (-p[0]).ln_1p()).exp()
}

fn log_likelihood(p: &[f64; 3], cells: &[Cell]) -> f64 {
    cells
        .iter()
        .map(|c| {
            let pi = response(p, c.size);
            let neg = c.trials - c.positives;
            let mut ll = 0.0;
            if c.positives > 0.0 {
                ll += c.positives * pi.ln();
            }
            if neg > 0.0 {
                ll += neg * (1.0 - pi).ln();
            }
            if ll.is_nan() {
                f64::NEG_INFINITY
            } else {
                ll
            }
        })
        .sum()
}

/// Exact inversion of the three observed proportions.
///
/// Differences of `pi(x_i) = p1 - s b^{x_i}` eliminate `p1` and `s`, leaving
/// `(t2 - t1) / (t3 - t1) = expm1(alpha L) / expm1(beta L)` in `L = log b`,
/// with `alpha = x2 - x1`, `beta = x3 - x1`.
fn saturated_solution(cells: &[Cell]) -> Option<[f64; 3]> {
    let t: Vec<f64> = cells.iter().map(|c| c.positives / c.trials).collect();
    let x: Vec<f64> = cells.iter().map(|c| c.size).collect();
    let spread = t[2] - t[0];
    if !(spread > 0.0) {
        return None;
    }
    let ratio = (t[1] - t[0]) / spread;
    let alpha = x[1] - x[0];
    let beta = x[2] - x[0];
    let g = |u: f64| {
        let l = -u.exp();
        (alpha * l).exp_m1() / (beta * l).exp_m1() - ratio
    };

    // L = -exp(u) spans log b over b in [1e-8, 1 - 1e-8].
    let u_lo = (-(-PARAM_LOWER[0]).ln_1p()).ln();
    let u_hi = (-(1.0 - PARAM_UPPER[0]).ln()).ln();
    const SCAN: usize = 256;
    let step = (u_hi - u_lo) / SCAN as f64;
    let mut prev_u = u_lo;
    let mut prev_g = g(u_lo);
    let mut bracket = None;
    if prev_g == 0.0 {
        bracket = Some((u_lo, u_lo));
    }
    for i in 1..=SCAN {
        if bracket.is_some() {
            break;
        }
        let u = if i == SCAN {
            u_hi
        } else {
            u_lo + step * i as f64
        };
        let gu = g(u);
        if gu == 0.0 {
            bracket = Some((u, u));
        } else if (gu > 0.0) != (prev_g > 0.0) {
            bracket = Some((prev_u, u));
        }
        prev_u = u;
        prev_g = gu;
    }
    let (mut lo, mut hi) = bracket?;
    let lo_positive = g(lo) > 0.0;
    loop {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (gm > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let l = -(0.5 * (lo + hi)).exp();
    let p0 = -l.exp_m1();
    let b_x1 = (x[0] * l).exp();
    // b^{x1} - b^{x3} = -b^{x1} expm1(beta L)
    let s = spread / (-b_x1 * (beta * l).exp_m1());
    let p1 = t[0] + s * b_x1;
    let p2 = 1.0 + s - p1;
    Some([p0, p1, p2])
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn to_params(u: &Vector3<f64>) -> [f64; 3] {
    let mut p = [0.0; 3];
    for j in 0..3 {
        p[j] = PARAM_LOWER[j] + (PARAM_UPPER[j] - PARAM_LOWER[j]) * sigmoid(u[j]);
    }
    p
}

fn to_unconstrained(p: [f64; 3]) -> Vector3<f64> {
    Vector3::from_fn(|j, _| {
        let z = (p[j] - PARAM_LOWER[j]) / (PARAM_UPPER[j] - PARAM_LOWER[j]);
        (z / (1.0 - z)).ln()
    })
}

/// Score and expected information in the unconstrained coordinates.
fn score_and_information(u: &Vector3<f64>, cells: &[Cell]) -> (Vector3<f64>, Matrix3<f64>) {
    let p = to_params(u);
    let log_neg = (-p[0]).ln_1p();
    let s = p[1] + p[2] - 1.0;
    let mut score = Vector3::zeros();
    let mut info = Matrix3::zeros();
    for c in cells {
        let bx = (c.size * log_neg).exp();
        let pi = (p[1] - s * bx).clamp(1e-12, 1.0 - 1e-12);
        let grad = Vector3::new(c.size * s * ((c.size - 1.0) * log_neg).exp(), 1.0 - bx, -bx);
        let var = pi * (1.0 - pi);
        score += grad * ((c.positives - c.trials * pi) / var);
        info += grad * grad.transpose() * (c.trials / var);
    }
    let jac = Vector3::from_fn(|j, _| {
        let sg = sigmoid(u[j]);
        (PARAM_UPPER[j] - PARAM_LOWER[j]) * sg * (1.0 - sg)
    });
    let score_u = score.component_mul(&jac);
    let info_u = Matrix3::from_fn(|a, b| info[(a, b)] * jac[a] * jac[b]);
    (score_u, info_u)
}

fn scoring_step(score: &Vector3<f64>, info: &Matrix3<f64>) -> Vector3<f64> {
    let mut h = *info;
    let ridge = 1e-12 * info.trace().max(f64::MIN_POSITIVE);
    for attempt in 0..8 {
        if let Some(ch) = h.cholesky() {
            let step = ch.solve(score);
            if step.iter().all(|v| v.is_finite()) {
                return step;
            }
        }
        let bump = ridge * 100f64.powi(attempt);
        for j in 0..3 {
            h[(j, j)] += bump;
        }
    }
    *score
}

fn ascend_from(start: [f64; 3], cells: &[Cell]) -> (Vector3<f64>, f64) {
    let mut u = to_unconstrained(start);
    let mut ll = log_likelihood(&to_params(&u), cells);
    let mut stalled = 0;
    for _ in 0..MAX_SCORING_ITERS {
        let (score, info) = score_and_information(&u, cells);
        if score.norm() < SCORE_TOL {
            break;
        }
        let mut step = scoring_step(&score, &info);
        let largest = step.amax();
        if largest > 10.0 {
            step *= 10.0 / largest;
        }
        let mut t = 1.0;
        let mut gain = None;
        while t > 1e-10 {
            let cand = u + step * t;
            let cand_ll = log_likelihood(&to_params(&cand), cells);
            if cand_ll >= ll && cand != u {
                gain = Some(cand_ll - ll);
                u = cand;
                ll = cand_ll;
                break;
            }
            t *= 0.5;
        }
        let Some(gain) = gain else { break };
        // Damped steps with negligible gain: crawling along a flat ridge.
        if t < 1.0 && gain < STALL_GAIN {
            stalled += 1;
            if stalled >= STALL_ITERS {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    (u, ll)
}

fn fisher_scoring(cells: &[Cell]) -> [f64; 3] {
    let mut best: Option<(Vector3<f64>, f64)> = None;
    for &p0 in &START_P0 {
        for &p1 in &START_P {
            for &p2 in &START_P {
                let (u, ll) = ascend_from([p0, p1, p2], cells);
                if best.as_ref().is_none_or(|b| ll > b.1) {
                    best = Some((u, ll));
                }
            }
        }
    }
    let (u, _) = best.expect("at least one start");
    to_params(&u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::SamplePoint;

    fn design() -> ExactDesign {
        ExactDesign::from_parts(&[1, 17, 61], &[1000, 1000, 1000]).unwrap()
    }

    fn data(y: [u64; 3]) -> SampleData {
        SampleData {
            points: design()
                .points()
                .iter()
                .zip(y)
                .map(|(p, positives)| SamplePoint {
                    size: p.size,
                    trials: p.count,
                    positives,
                })
                .collect(),
        }
    }

    #[test]
    fn noiseless_data_inverts_exactly() {
        let theta = ParamVector::new(0.07, 0.93, 0.96).unwrap();
        let fit = mle_fit_expected(&design(), &theta, MleOptions::default()).unwrap();
        assert_eq!(fit.method, FitMethod::Saturated);
        assert!(!fit.boundary);
        for (a, b) in fit.theta.as_array().iter().zip(theta.as_array()) {
            assert!((a - b).abs() < 1e-8, "{} vs {theta}", fit.theta);
        }
    }

    #[test]
    fn scoring_matches_saturated_on_noiseless_data() {
        let theta = ParamVector::new(0.07, 0.93, 0.96).unwrap();
        let opts = MleOptions {
            force_scoring: true,
        };
        let fit = mle_fit_expected(&design(), &theta, opts).unwrap();
        assert_eq!(fit.method, FitMethod::Scoring);
        for (a, b) in fit.theta.as_array().iter().zip(theta.as_array()) {
            assert!((a - b).abs() < 1e-6, "{} vs {theta}", fit.theta);
        }
    }

    #[test]
    fn all_negative_sample_is_boundary() {
        let fit = mle_fit(&design(), &data([0, 0, 0])).unwrap();
        assert!(fit.boundary);
        assert_eq!(fit.method, FitMethod::Scoring);
        assert!(fit.log_likelihood.is_finite());
    }

    #[test]
    fn all_positive_sample_is_boundary() {
        let fit = mle_fit(&design(), &data([1000, 1000, 1000])).unwrap();
        assert!(fit.boundary);
    }

    #[test]
    fn saturated_fit_has_highest_likelihood() {
        let d = data([110, 620, 905]);
        let sat = mle_fit(&design(), &d).unwrap();
        assert_eq!(sat.method, FitMethod::Saturated);
        let alt = mle_fit_with(
            &design(),
            &d,
            MleOptions {
                force_scoring: true,
            },
        )
        .unwrap();
        assert!(sat.log_likelihood >= alt.log_likelihood - 1e-9);
        for (a, b) in sat.theta.as_array().iter().zip(alt.theta.as_array()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn mismatched_data_is_rejected() {
        let mut d = data([1, 2, 3]);
        d.points[1].trials = 999;
        assert!(mle_fit(&design(), &d).is_err());
        let two = ExactDesign::from_parts(&[1, 10], &[10, 10]).unwrap();
        let theta = ParamVector::new(0.1, 0.9, 0.9).unwrap();
        assert!(mle_fit_expected(&two, &theta, MleOptions::default()).is_err());
    }
}
