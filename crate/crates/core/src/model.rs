//! Group testing response model with imperfect tests.
//!
//! A group of `x` pooled samples tests positive with probability
//! `pi(x) = p1 - (p1 + p2 - 1) (1 - p0)^x`, where `p0` is the prevalence,
//! `p1` the sensitivity and `p2` the specificity. This module holds the
//! parameter and design types, the per-size model quantities, the Fisher
//! information matrix of an approximate design, and the D and Ds criteria.

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    equilibrate, ginv_sym3_scaled, pinv_sym3, range_residual, rank_sym3, PINV_RELATIVE_CUTOFF,
};

/// Tolerance on the weight sum of an approximate design.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Projection residual below which `e1` counts as lying in the range of `M`.
pub const ESTIMABILITY_TOLERANCE: f64 = 1e-10;

/// Prevalence, sensitivity and specificity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ParamVector {
    p0: f64,
    p1: f64,
    p2: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    p0: f64,
    p1: f64,
    p2: f64,
}

impl TryFrom<RawParams> for ParamVector {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        ParamVector::new(raw.p0, raw.p1, raw.p2)
    }
}

impl From<ParamVector> for RawParams {
    fn from(t: ParamVector) -> Self {
        RawParams {
            p0: t.p0,
            p1: t.p1,
            p2: t.p2,
        }
    }
}

impl ParamVector {
    /// Requires `0 < p0 < 1` and `0.5 < p1, p2 <= 1`.
    pub fn new(p0: f64, p1: f64, p2: f64) -> Result<Self> {
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "prevalence p0 = {p0} must lie in (0, 1)"
            )));
        }
        if !(p1 > 0.5 && p1 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sensitivity p1 = {p1} must lie in (0.5, 1]"
            )));
        }
        if !(p2 > 0.5 && p2 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "specificity p2 = {p2} must lie in (0.5, 1]"
            )));
        }
        Ok(Self { p0, p1, p2 })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p0, self.p1, self.p2]
    }

    /// `p1 + p2 - 1`, strictly positive.
    pub fn discrimination(&self) -> f64 {
        self.p1 + self.p2 - 1.0
    }

    /// `(1 - p0)^x` for real `x`.
    pub fn negative_prob(&self, x: f64) -> f64 {
        (x * (-self.p0).ln_1p()).exp()
    }

    /// Probability that a group of size `x` tests positive.
    pub fn response_probability(&self, x: f64) -> f64 {
        self.p1 - self.discrimination() * self.negative_prob(x)
    }
}

impl fmt::Display for ParamVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.p0, self.p1, self.p2)
    }
}

/// Allowed range `[x_lower, x_upper]` of group sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBounds", into = "RawBounds")]
pub struct SizeBounds {
    x_lower: f64,
    x_upper: f64,
}

#[derive(Serialize, Deserialize)]
struct RawBounds {
    x_lower: f64,
    x_upper: f64,
}

impl TryFrom<RawBounds> for SizeBounds {
    type Error = Error;
    fn try_from(raw: RawBounds) -> Result<Self> {
        SizeBounds::new(raw.x_lower, raw.x_upper)
    }
}

impl From<SizeBounds> for RawBounds {
    fn from(b: SizeBounds) -> Self {
        RawBounds {
            x_lower: b.x_lower,
            x_upper: b.x_upper,
        }
    }
}

impl SizeBounds {
    pub fn new(x_lower: f64, x_upper: f64) -> Result<Self> {
        if !(x_lower >= 1.0 && x_upper.is_finite() && x_lower < x_upper) {
            return Err(Error::InvalidBounds(format!(
                "need 1 <= x_lower < x_upper < inf, got [{x_lower}, {x_upper}]"
            )));
        }
        Ok(Self { x_lower, x_upper })
    }

    pub fn lower(&self) -> f64 {
        self.x_lower
    }

    pub fn upper(&self) -> f64 {
        self.x_upper
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_lower && x <= self.x_upper
    }
}

/// Optimality criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Log-determinant of the information matrix; all three parameters.
    D,
    /// Prevalence alone, with the error rates as nuisance parameters.
    Ds,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::D => f.write_str("d"),
            Criterion::Ds => f.write_str("ds"),
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d" => Ok(Criterion::D),
            "ds" => Ok(Criterion::Ds),
            other => Err(Error::InvalidParameter(format!(
                "unknown criterion '{other}', expected 'd' or 'ds'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub size: f64,
    pub weight: f64,
}

/// Probability measure over group sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximateDesign {
    points: Vec<DesignPoint>,
}

impl ApproximateDesign {
    /// Sizes must be finite, at least 1 and strictly increasing; weights
    /// positive and summing to one within [`WEIGHT_SUM_TOLERANCE`].
    pub fn new(points: Vec<DesignPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidDesign("design has no support points".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.size.is_finite() && p.size >= 1.0) {
                return Err(Error::InvalidDesign(format!(
                    "support point {i} has invalid size {}",
                    p.size
                )));
            }
            if !(p.weight > 0.0 && p.weight.is_finite()) {
                return Err(Error::InvalidDesign(format!(
                    "support point {i} has non-positive weight {}",
                    p.weight
                )));
            }
        }
        if points.windows(2).any(|w| w[1].size <= w[0].size) {
            return Err(Error::InvalidDesign(
                "support sizes must be strictly increasing".into(),
            ));
        }
        let total: f64 = points.iter().map(|p| p.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidDesign(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { points })
    }

    pub fn from_parts(sizes: &[f64], weights: &[f64]) -> Result<Self> {
        if sizes.len() != weights.len() {
            return Err(Error::InvalidDesign(format!(
                "{} sizes but {} weights",
                sizes.len(),
                weights.len()
            )));
        }
        Self::new(
            sizes
                .iter()
                .zip(weights)
                .map(|(&size, &weight)| DesignPoint { size, weight })
                .collect(),
        )
    }

    /// Equal weights on the given sizes.
    pub fn uniform(sizes: &[f64]) -> Result<Self> {
        let w = 1.0 / sizes.len() as f64;
        Self::from_parts(sizes, &vec![w; sizes.len()])
    }

    pub fn points(&self) -> &[DesignPoint] {
        &self.points
    }

    pub fn sizes(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.size).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.weight).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn within(&self, bounds: &SizeBounds) -> bool {
        self.points.iter().all(|p| bounds.contains(p.size))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactPoint {
    pub size: u64,
    pub count: u64,
}

/// Integer group sizes with integer trial counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactDesign {
    points: Vec<ExactPoint>,
    total_trials: u64,
}

impl ExactDesign {
    pub fn new(points: Vec<ExactPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidDesign("design has no support points".into()));
        }
        if points.iter().any(|p| p.size == 0 || p.count == 0) {
            return Err(Error::InvalidDesign(
                "exact sizes and counts must be positive".into(),
            ));
        }
        if points.windows(2).any(|w| w[1].size <= w[0].size) {
            return Err(Error::InvalidDesign(
                "support sizes must be strictly increasing".into(),
            ));
        }
        let total_trials = points.iter().map(|p| p.count).sum();
        Ok(Self {
            points,
            total_trials,
        })
    }

    pub fn from_parts(sizes: &[u64], counts: &[u64]) -> Result<Self> {
        if sizes.len() != counts.len() {
            return Err(Error::InvalidDesign(format!(
                "{} sizes but {} counts",
                sizes.len(),
                counts.len()
            )));
        }
        Self::new(
            sizes
                .iter()
                .zip(counts)
                .map(|(&size, &count)| ExactPoint { size, count })
                .collect(),
        )
    }

    pub fn points(&self) -> &[ExactPoint] {
        &self.points
    }

    pub fn sizes(&self) -> Vec<u64> {
        self.points.iter().map(|p| p.size).collect()
    }

    pub fn counts(&self) -> Vec<u64> {
        self.points.iter().map(|p| p.count).collect()
    }

    pub fn total_trials(&self) -> u64 {
        self.total_trials
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Proportions `n_i / n` as an approximate design.
    pub fn to_approximate(&self) -> ApproximateDesign {
        let n = self.total_trials as f64;
        let points: Vec<DesignPoint> = self
            .points
            .iter()
            .map(|p| DesignPoint {
                size: p.size as f64,
                weight: p.count as f64 / n,
            })
            .collect();
        // Proportions of an integer partition always pass validation up to rounding.
        ApproximateDesign::new(points.clone()).unwrap_or(ApproximateDesign { points })
    }
}

/// Response probability, information weight and gradient at one group size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelEvaluation {
    pub pi: f64,
    pub lambda: f64,
    /// Partial derivatives of `pi` with respect to `(p0, p1, p2)`.
    pub grad: Vector3<f64>,
}

pub fn evaluate_model(x: f64, theta: &ParamVector) -> Result<ModelEvaluation> {
    if !(x >= 1.0 && x.is_finite()) {
        return Err(Error::InvalidDesign(format!("group size {x} must be >= 1")));
    }
    let log_neg = (-theta.p0).ln_1p();
    let bx = (x * log_neg).exp();
    let s = theta.discrimination();
    let pi = theta.p1 - s * bx;
    let var = pi * (1.0 - pi);
    if !(var > 0.0) {
        return Err(Error::DegenerateModel { size: x, pi });
    }
    let grad = Vector3::new(x * s * ((x - 1.0) * log_neg).exp(), 1.0 - bx, -bx);
    Ok(ModelEvaluation {
        pi,
        lambda: 1.0 / var,
        grad,
    })
}

/// Fisher information matrix of a design, per unit trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoMatrix(Matrix3<f64>);

impl InfoMatrix {
    pub fn new(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Numerical rank, decided on the diagonally equilibrated matrix.
    pub fn rank(&self) -> usize {
        rank_sym3(&equilibrate(&self.0).0, PINV_RELATIVE_CUTOFF)
    }

    pub fn pseudo_inverse(&self) -> Matrix3<f64> {
        pinv_sym3(&self.0, PINV_RELATIVE_CUTOFF)
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

/// `M = sum_i w_i lambda(x_i) f(x_i) f(x_i)^T`.
pub fn information_matrix(design: &ApproximateDesign, theta: &ParamVector) -> Result<InfoMatrix> {
    let mut m = Matrix3::zeros();
    for p in design.points() {
        let ev = evaluate_model(p.size, theta)?;
        m += (p.weight * ev.lambda) * ev.grad * ev.grad.transpose();
    }
    Ok(InfoMatrix(m))
}

/// `log |M|`; requires `M` positive definite.
pub fn d_criterion(m: &InfoMatrix) -> Result<f64> {
    let chol = m.0.cholesky().ok_or_else(|| {
        Error::CriterionUndefined("information matrix is singular; theta is not estimable".into())
    })?;
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    if !log_det.is_finite() {
        return Err(Error::CriterionUndefined(
            "information matrix is singular; theta is not estimable".into(),
        ));
    }
    Ok(log_det)
}

/// Which targets are estimable under a design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Estimability {
    /// All of `(p0, p1, p2)`: `M` is nonsingular.
    pub theta: bool,
    /// `p0` alone: `e1` lies in the range of `M`.
    pub prevalence: bool,
}

pub fn estimability_check(design: &ApproximateDesign, theta: &ParamVector) -> Result<Estimability> {
    let m = information_matrix(design, theta)?;
    let full = m.rank() == 3;
    let e1 = Vector3::new(1.0, 0.0, 0.0);
    let prevalence = full
        || range_residual(&equilibrate(&m.0).0, &e1, PINV_RELATIVE_CUTOFF) < ESTIMABILITY_TOLERANCE;
    Ok(Estimability {
        theta: full,
        prevalence,
    })
}

/// `Q_i` of the three-point Ds weight formula: `pi_i (1 - pi_i)` times the
/// squared difference of `(1 - p0)^x` at the two other sizes.
pub fn q_values(sizes: [f64; 3], theta: &ParamVector) -> Result<[f64; 3]> {
    let mut q = [0.0; 3];
    for i in 0..3 {
        let ev = evaluate_model(sizes[i], theta)?;
        let others: Vec<f64> = (0..3).filter(|&j| j != i).map(|j| sizes[j]).collect();
        let diff = theta.negative_prob(others[0]) - theta.negative_prob(others[1]);
        q[i] = diff * diff / ev.lambda;
    }
    Ok(q)
}

/// Determinant of `M_f = (f(x_1), f(x_2), f(x_3))`.
pub fn gradient_determinant(sizes: [f64; 3], theta: &ParamVector) -> Result<f64> {
    let mut mf = Matrix3::zeros();
    for (j, &x) in sizes.iter().enumerate() {
        mf.set_column(j, &evaluate_model(x, theta)?.grad);
    }
    Ok(mf.determinant())
}

/// `(M^-)_{11}` for a three-point design through `|M_f|^{-2} sum_i Q_i / w_i`.
///
/// Returns `None` when the design is not three-point or `M_f` is singular.
pub fn prevalence_variance_closed_form(
    design: &ApproximateDesign,
    theta: &ParamVector,
) -> Result<Option<f64>> {
    if design.len() != 3 {
        return Ok(None);
    }
    let sizes = [
        design.points[0].size,
        design.points[1].size,
        design.points[2].size,
    ];
    let det = gradient_determinant(sizes, theta)?;
    if !(det.abs() > 0.0 && det.is_finite()) {
        return Ok(None);
    }
    let q = q_values(sizes, theta)?;
    let sum: f64 = q
        .iter()
        .zip(design.points())
        .map(|(qi, p)| qi / p.weight)
        .sum();
    Ok(Some(sum / (det * det)))
}

/// `(M^-)_{11}` through a diagonally scaled spectral generalized inverse.
/// Any generalized inverse gives the same value when `p0` is estimable.
pub fn prevalence_variance_pinv(design: &ApproximateDesign, theta: &ParamVector) -> Result<f64> {
    let m = information_matrix(design, theta)?;
    Ok(ginv_sym3_scaled(m.matrix(), PINV_RELATIVE_CUTOFF)[(0, 0)])
}

/// `-log (M^-)_{11}`; requires `p0` estimable.
pub fn ds_criterion(design: &ApproximateDesign, theta: &ParamVector) -> Result<f64> {
    if !estimability_check(design, theta)?.prevalence {
        return Err(Error::CriterionUndefined(
            "prevalence is not estimable under this design".into(),
        ));
    }
    let var = match prevalence_variance_closed_form(design, theta)? {
        Some(v) => v,
        None => prevalence_variance_pinv(design, theta)?,
    };
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::CriterionUndefined(format!(
            "prevalence variance {var} is not positive"
        )));
    }
    Ok(-var.ln())
}

/// Criterion value of a design; `D` evaluates `log |M|`, `Ds` evaluates `-log (M^-)_{11}`.
pub fn criterion_value(
    design: &ApproximateDesign,
    theta: &ParamVector,
    criterion: Criterion,
) -> Result<f64> {
    match criterion {
        Criterion::D => d_criterion(&information_matrix(design, theta)?),
        Criterion::Ds => ds_criterion(design, theta),
    }
}
