//! Locally D- and Ds-optimal designs.
//!
//! Both optimal designs are supported on `{x_L, x_mid, x_U}`. The interior
//! size is `x_L + log(a) / log(1 - p0)`, where `a` is the unique root in
//! `(r, 1)` of a transcendental equation in the reduced constants
//! `c`, `delta`, `r` and `delta0`. The D design puts equal weight on the
//! three sizes; the Ds design weights them proportionally to `sqrt(Q_i)`.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ginv_sym3_scaled, pinv_sym2, PINV_RELATIVE_CUTOFF};
use crate::model::{
    estimability_check, evaluate_model, gradient_determinant, information_matrix, q_values,
    ApproximateDesign, Criterion, DesignPoint, ParamVector, SizeBounds,
};

/// Number of evenly spaced points in the sign-change scan over `(r, 1)`.
pub const SCAN_POINTS: usize = 10_000;

/// Offset of the scan interval from the open endpoints `r` and `1`.
pub const SCAN_EDGE: f64 = 1e-12;

/// Default group-size step of the equivalence-theorem grid.
pub const DEFAULT_GRID_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// `p1 / ((p1 + p2 - 1) (1 - p0)^x_L)`, greater than one.
    pub c: f64,
    /// `(1 - p1) / p1`.
    pub delta: f64,
    /// `(1 - p0)^(x_U - x_L)`.
    pub r: f64,
    /// `r log(r) / (1 - r)`.
    pub delta0: f64,
}

impl DerivedConstants {
    /// Builds constants directly, for exploring the equations away from a
    /// concrete parameter vector.
    pub fn from_raw(c: f64, delta: f64, r: f64) -> Result<Self> {
        if !(c > 1.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("c = {c} must exceed 1")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidParameter(format!(
                "delta = {delta} must lie in [0, 1)"
            )));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "r = {r} must lie in (0, 1)"
            )));
        }
        Ok(Self {
            c,
            delta,
            r,
            delta0: r * r.ln() / (1.0 - r),
        })
    }
}

pub fn derived_constants(theta: &ParamVector, bounds: &SizeBounds) -> Result<DerivedConstants> {
    let c = theta.p1() / (theta.discrimination() * theta.negative_prob(bounds.lower()));
    let delta = (1.0 - theta.p1()) / theta.p1();
    let r = theta.negative_prob(bounds.upper() - bounds.lower());
    if !(r > 0.0) {
        return Err(Error::InvalidBounds(format!(
            "(1 - p0)^(x_U - x_L) underflows for p0 = {} on [{}, {}]",
            theta.p0(),
            bounds.lower(),
            bounds.upper()
        )));
    }
    DerivedConstants::from_raw(c, delta, r)
}

/// Shared factor `1 + (1 + delta0 / a) / (log a - delta0 (1/a - 1))`.
fn log_ratio_factor(a: f64, k: &DerivedConstants) -> f64 {
    1.0 + (1.0 + k.delta0 / a) / (a.ln() - k.delta0 * (1.0 / a - 1.0))
}

/// Left-hand side minus right-hand side of the D root equation.
pub fn d_equation(a: f64, k: &DerivedConstants) -> f64 {
    let lhs = 2.0 / a * log_ratio_factor(a, k);
    let rhs = 1.0 / (k.delta * k.c + a) - 1.0 / (k.c - a);
    lhs - rhs
}

fn endpoint_roots(k: &DerivedConstants) -> (f64, f64) {
    let dc = k.delta * k.c;
    (
        ((k.c - 1.0) * (dc + 1.0)).sqrt(),
        ((k.c - k.r) * (dc + k.r)).sqrt(),
    )
}

/// Correction `Delta_1(a)` of the Ds equation.
pub fn ds_delta1(a: f64, k: &DerivedConstants) -> f64 {
    let (at_one, at_r) = endpoint_roots(k);
    let denom = (1.0 - k.r) * ((k.c - a) * (k.delta * k.c + a)).sqrt();
    ((a - k.r) * at_one + (1.0 - a) * at_r) / denom
}

/// Correction `Delta_2(a)` of the Ds equation.
pub fn ds_delta2(a: f64, k: &DerivedConstants) -> f64 {
    let (at_one, at_r) = endpoint_roots(k);
    let denom = (1.0 - k.r) * ((k.c - a) * (k.delta * k.c + a)).sqrt();
    (at_one - at_r) / denom
}

/// Left-hand side minus right-hand side of the Ds root equation.
pub fn ds_equation(a: f64, k: &DerivedConstants) -> f64 {
    let lhs = 2.0 * (1.0 + ds_delta1(a, k)) / a * log_ratio_factor(a, k);
    let rhs = 1.0 / (k.delta * k.c + a) - 1.0 / (k.c - a) + 2.0 * ds_delta2(a, k);
    lhs - rhs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootSolution {
    /// Root in `(r, 1)`.
    pub a: f64,
    /// Equation value at `a`.
    pub residual: f64,
    /// Sign changes seen on the scan; always 1 for a returned solution.
    pub bracket_count: usize,
}

fn solve_scanned(
    equation: &'static str,
    f: impl Fn(f64) -> f64,
    k: &DerivedConstants,
) -> Result<RootSolution> {
    let lo = k.r + SCAN_EDGE;
    let hi = 1.0 - SCAN_EDGE;
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let grid = |i: usize| {
        if i + 1 == SCAN_POINTS {
            hi
        } else {
            lo + step * i as f64
        }
    };

    let mut brackets: Vec<(f64, f64)> = Vec::new();
    let mut prev = (grid(0), f(grid(0)));
    if prev.1 == 0.0 {
        brackets.push((prev.0, prev.0));
    }
    for i in 1..SCAN_POINTS {
        let x = grid(i);
        let v = f(x);
        if !v.is_finite() || !prev.1.is_finite() {
            return Err(Error::RootBracketing {
                equation,
                lower: lo,
                upper: hi,
            });
        }
        if v == 0.0 {
            brackets.push((x, x));
        } else if prev.1 != 0.0 && (v > 0.0) != (prev.1 > 0.0) {
            brackets.push((prev.0, x));
        }
        prev = (x, v);
    }

    match brackets.len() {
        0 => Err(Error::RootBracketing {
            equation,
            lower: lo,
            upper: hi,
        }),
        1 => {
            let (mut a, mut b) = brackets[0];
            let mut fa = f(a);
            // Bisect down to floating-point resolution.
            loop {
                let mid = 0.5 * (a + b);
                if !(mid > a && mid < b) {
                    break;
                }
                let fm = f(mid);
                if fm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if (fm > 0.0) == (fa > 0.0) {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            let (fa, fb) = (f(a), f(b));
            let (root, residual) = if fa.abs() <= fb.abs() {
                (a, fa)
            } else {
                (b, fb)
            };
            Ok(RootSolution {
                a: root,
                residual,
                bracket_count: 1,
            })
        }
        count => Err(Error::RootAmbiguity { equation, count }),
    }
}

/// Unique root of the D equation in `(r, 1)`.
pub fn solve_d_equation(k: &DerivedConstants) -> Result<RootSolution> {
    solve_scanned("D", |a| d_equation(a, k), k)
}

/// Unique root of the Ds equation in `(r, 1)`.
pub fn solve_ds_equation(k: &DerivedConstants) -> Result<RootSolution> {
    solve_scanned("Ds", |a| ds_equation(a, k), k)
}

/// Maps a root `a` to the group size `x_L + log(a) / log(1 - p0)`.
pub fn root_to_size(a: f64, theta: &ParamVector, bounds: &SizeBounds) -> f64 {
    bounds.lower() + a.ln() / (-theta.p0()).ln_1p()
}

/// Ds-optimal weights on three fixed group sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSolution {
    pub q_values: [f64; 3],
    pub weights: [f64; 3],
    /// Maximum Ds criterion over weights on these sizes:
    /// `log |M_f|^2 - 2 log(sum_i sqrt(Q_i))`.
    pub criterion: f64,
}

pub fn ds_weights(sizes: [f64; 3], theta: &ParamVector) -> Result<WeightSolution> {
    if !(sizes[0] < sizes[1] && sizes[1] < sizes[2]) {
        return Err(Error::InvalidSupport(format!(
            "need three strictly increasing sizes, got {sizes:?}"
        )));
    }
    let q = q_values(sizes, theta)?;
    let roots = q.map(f64::sqrt);
    let total: f64 = roots.iter().sum();
    if !(total > 0.0 && q.iter().all(|&qi| qi > 0.0)) {
        return Err(Error::InvalidSupport(format!(
            "Q values {q:?} are not all positive at sizes {sizes:?}"
        )));
    }
    let det = gradient_determinant(sizes, theta)?;
    Ok(WeightSolution {
        q_values: q,
        weights: roots.map(|r| r / total),
        criterion: (det * det).ln() - 2.0 * total.ln(),
    })
}

/// Optimal design together with the quantities it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalDesign {
    pub criterion: Criterion,
    pub design: ApproximateDesign,
    pub constants: DerivedConstants,
    pub root: RootSolution,
}

impl OptimalDesign {
    pub fn intermediate_size(&self) -> f64 {
        self.design.points()[1].size
    }
}

pub fn optimal_design(
    theta: &ParamVector,
    bounds: &SizeBounds,
    criterion: Criterion,
) -> Result<OptimalDesign> {
    let constants = derived_constants(theta, bounds)?;
    let root = match criterion {
        Criterion::D => solve_d_equation(&constants)?,
        Criterion::Ds => solve_ds_equation(&constants)?,
    };
    let mid = root_to_size(root.a, theta, bounds);
    let sizes = [bounds.lower(), mid, bounds.upper()];
    let weights = match criterion {
        Criterion::D => [1.0 / 3.0; 3],
        Criterion::Ds => ds_weights(sizes, theta)?.weights,
    };
    let design = ApproximateDesign::from_parts(&sizes, &weights)?;
    Ok(OptimalDesign {
        criterion,
        design,
        constants,
        root,
    })
}

/// Equal weights on `x_L`, the root-derived interior size, and `x_U`.
pub fn d_optimal_design(theta: &ParamVector, bounds: &SizeBounds) -> Result<ApproximateDesign> {
    Ok(optimal_design(theta, bounds, Criterion::D)?.design)
}

/// Ds-optimal support with weights from [`ds_weights`].
pub fn ds_optimal_design(theta: &ParamVector, bounds: &SizeBounds) -> Result<ApproximateDesign> {
    Ok(optimal_design(theta, bounds, Criterion::Ds)?.design)
}

/// Equivalence-theorem check of a design over a grid of group sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub criterion: Criterion,
    /// Largest violation over the grid: `max(d(x) - 3)` for D,
    /// `max(-phi_s(x))` for Ds. Nonpositive for an optimal design.
    pub max_violation: f64,
    /// Group size where `max_violation` is attained.
    pub argmax_size: f64,
    pub grid_step: f64,
    /// `d(x_i) - 3` (D) or `phi_s(x_i)` (Ds) at each support point; zero at an optimum.
    pub support_gaps: Vec<f64>,
}

impl OptimalityReport {
    pub fn is_certified(&self, violation_tol: f64, support_tol: f64) -> bool {
        self.max_violation < violation_tol
            && self.support_gaps.iter().all(|g| g.abs() <= support_tol)
    }
}

/// Evenly spaced sizes from `x_L` to `x_U` (inclusive).
pub fn size_grid(bounds: &SizeBounds, step: f64) -> Vec<f64> {
    let span = bounds.upper() - bounds.lower();
    let steps = (span / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=steps)
        .map(|i| bounds.lower() + step * i as f64)
        .filter(|&x| x <= bounds.upper())
        .collect();
    if grid
        .last()
        .is_some_and(|&x| bounds.upper() - x > 1e-9 * span)
    {
        grid.push(bounds.upper());
    }
    grid
}

/// Directional-derivative function for the chosen criterion; returns the
/// signed violation at `x` (positive means the design can be improved).
fn violation_fn(
    design: &ApproximateDesign,
    theta: &ParamVector,
    criterion: Criterion,
) -> Result<impl Fn(f64) -> Result<f64>> {
    let info = information_matrix(design, theta)?;
    let est = estimability_check(design, theta)?;
    let (m_inv, ms_inv) = match criterion {
        Criterion::D => {
            let inv = info
                .matrix()
                .try_inverse()
                .filter(|_| est.theta)
                .ok_or_else(|| {
                    Error::CriterionUndefined("information matrix is singular".into())
                })?;
            (inv, Matrix2::zeros())
        }
        Criterion::Ds => {
            if !est.prevalence {
                return Err(Error::CriterionUndefined(
                    "prevalence is not estimable under this design".into(),
                ));
            }
            let m = info.matrix();
            let ms = Matrix2::new(m[(1, 1)], m[(1, 2)], m[(2, 1)], m[(2, 2)]);
            let g = if est.theta {
                ginv_sym3_scaled(m, PINV_RELATIVE_CUTOFF)
            } else {
                info.pseudo_inverse()
            };
            (g, pinv_sym2(&ms, PINV_RELATIVE_CUTOFF))
        }
    };
    let theta = *theta;
    Ok(move |x: f64| {
        let ev = evaluate_model(x, &theta)?;
        let full = ev.lambda * (ev.grad.transpose() * m_inv * ev.grad)[(0, 0)];
        Ok(match criterion {
            Criterion::D => full - 3.0,
            Criterion::Ds => {
                let fs = Vector2::new(ev.grad[1], ev.grad[2]);
                let nuisance = ev.lambda * (fs.transpose() * ms_inv * fs)[(0, 0)];
                // violation = -phi_s = -(1 - full + nuisance)
                full - nuisance - 1.0
            }
        })
    })
}

pub fn verify_optimality(
    design: &ApproximateDesign,
    theta: &ParamVector,
    bounds: &SizeBounds,
    criterion: Criterion,
    grid_step: f64,
) -> Result<OptimalityReport> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "grid step {grid_step} must be positive"
        )));
    }
    if !design.within(bounds) {
        return Err(Error::InvalidDesign(format!(
            "support {:?} leaves [{}, {}]",
            design.sizes(),
            bounds.lower(),
            bounds.upper()
        )));
    }
    let violation = violation_fn(design, theta, criterion)?;
    let mut max_violation = f64::NEG_INFINITY;
    let mut argmax_size = bounds.lower();
    for x in size_grid(bounds, grid_step) {
        let v = violation(x)?;
        if v > max_violation {
            max_violation = v;
            argmax_size = x;
        }
    }
    let support_gaps = design
        .points()
        .iter()
        .map(|p| {
            let v = violation(p.size)?;
            Ok(match criterion {
                Criterion::D => v,
                Criterion::Ds => -v,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OptimalityReport {
        criterion,
        max_violation,
        argmax_size,
        grid_step,
        support_gaps,
    })
}

/// Convenience: moves the interior support point of a three-point design.
pub fn shift_interior(design: &ApproximateDesign, by: f64) -> Result<ApproximateDesign> {
    let mut pts: Vec<DesignPoint> = design.points().to_vec();
    if pts.len() != 3 {
        return Err(Error::InvalidSupport(
            "expected a three-point design".into(),
        ));
    }
    pts[1].size += by;
    ApproximateDesign::new(pts)
}
