//! Monte Carlo evaluation of exact designs.
//!
//! Each replication draws binomial counts under the true parameters, fits the
//! MLE, and contributes `(theta_hat - theta)(theta_hat - theta)^T` to the
//! `n`-scaled MSE matrix. Replications run in parallel; their results are
//! summed in replication order, so output is identical for any thread count.

pub mod mle;
pub mod rng;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{equilibrate, rank_sym3, PINV_RELATIVE_CUTOFF};
use crate::model::{
    ds_criterion, information_matrix, ApproximateDesign, Criterion, ExactDesign, ParamVector,
    SizeBounds,
};
use crate::solver::optimal_design;

pub use mle::{mle_fit, mle_fit_expected, mle_fit_with, FitMethod, MleFit, MleOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub size: u64,
    pub trials: u64,
    pub positives: u64,
}

/// Observed positives at each support point of an exact design.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleData {
    pub points: Vec<SamplePoint>,
}

pub fn sample_outcomes(
    design: &ExactDesign,
    theta: &ParamVector,
    seed: u64,
    replication_index: u64,
) -> Result<SampleData> {
    let points = design
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let pi = theta.response_probability(p.size as f64);
            let mut stream = rng::point_stream(seed, replication_index, i);
            SamplePoint {
                size: p.size,
                trials: p.count,
                positives: rng::binomial(&mut stream, p.count, pi),
            }
        })
        .collect();
    Ok(SampleData { points })
}

/// Simulation estimate of `n E[(theta_hat - theta)(theta_hat - theta)^T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseMatrix {
    pub m: [[f64; 3]; 3],
    pub replications: u64,
    /// Replications whose estimate sits on the boundary of the parameter box.
    pub failures: u64,
}

impl MseMatrix {
    /// Aggregates estimates in the given order.
    pub fn from_estimates(
        estimates: &[ParamVector],
        theta: &ParamVector,
        n: u64,
        failures: u64,
    ) -> Self {
        let truth = Vector3::from(theta.as_array());
        let mut sum = Matrix3::zeros();
        for est in estimates {
            let e = Vector3::from(est.as_array()) - truth;
            sum += e * e.transpose();
        }
        let scaled = sum * (n as f64 / estimates.len().max(1) as f64);
        Self {
            m: scaled.into(),
            replications: estimates.len() as u64,
            failures,
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from(self.m)
    }
}

/// Runs `replications` simulated experiments and aggregates the scaled MSE.
pub fn simulate_mse(
    design: &ExactDesign,
    theta: &ParamVector,
    replications: u64,
    seed: u64,
) -> Result<MseMatrix> {
    if replications == 0 {
        return Err(Error::InvalidParameter(
            "need at least one replication".into(),
        ));
    }
    let fits = (0..replications)
        .into_par_iter()
        .map(|t| {
            let data = sample_outcomes(design, theta, seed, t)?;
            mle_fit(design, &data)
        })
        .collect::<Result<Vec<MleFit>>>()?;
    let failures = fits.iter().filter(|f| f.boundary).count() as u64;
    let estimates: Vec<ParamVector> = fits.iter().map(|f| f.theta).collect();
    Ok(MseMatrix::from_estimates(
        &estimates,
        theta,
        design.total_trials(),
        failures,
    ))
}

/// Asymptotic references for the efficiencies: `|M(xi_D)^{-1}|` and `(M(xi_s)^-)_{11}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReference {
    pub d_design: ApproximateDesign,
    pub ds_design: ApproximateDesign,
    pub inverse_det_d: f64,
    pub prevalence_variance_s: f64,
}

impl EfficiencyReference {
    pub fn new(theta: &ParamVector, bounds: &SizeBounds) -> Result<Self> {
        let d_design = optimal_design(theta, bounds, Criterion::D)?.design;
        let ds_design = optimal_design(theta, bounds, Criterion::Ds)?.design;
        let m_d = information_matrix(&d_design, theta)?;
        let inverse_det_d = 1.0 / m_d.determinant();
        let prevalence_variance_s = (-ds_criterion(&ds_design, theta)?).exp();
        Ok(Self {
            d_design,
            ds_design,
            inverse_det_d,
            prevalence_variance_s,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub eff_d: f64,
    pub eff_s: f64,
    pub mse: MseMatrix,
    pub reference_d: ApproximateDesign,
    pub reference_s: ApproximateDesign,
}

/// `eff_D = (|M(xi_D)^{-1}| / |MSE|)^{1/3}`; undefined when the MSE is singular.
pub fn d_efficiency(mse: &MseMatrix, reference: &EfficiencyReference) -> Result<f64> {
    let m = mse.matrix();
    let det = m.determinant();
    let rank = rank_sym3(&equilibrate(&m).0, PINV_RELATIVE_CUTOFF);
    if rank < 3 || !(det > 0.0 && det.is_finite()) {
        return Err(Error::EfficiencyUndefined(format!(
            "MSE matrix is singular (rank {rank}, determinant {det})"
        )));
    }
    Ok((reference.inverse_det_d / det).cbrt())
}

/// `eff_s = (M(xi_s)^-)_{11} / MSE_{11}`; undefined when `MSE_{11} = 0`.
pub fn ds_efficiency(mse: &MseMatrix, reference: &EfficiencyReference) -> Result<f64> {
    let m11 = mse.m[0][0];
    if !(m11 > 0.0 && m11.is_finite()) {
        return Err(Error::EfficiencyUndefined(format!(
            "MSE prevalence entry {m11} is not positive"
        )));
    }
    Ok(reference.prevalence_variance_s / m11)
}

pub fn efficiencies_from_mse(
    mse: &MseMatrix,
    reference: &EfficiencyReference,
) -> Result<(f64, f64)> {
    Ok((
        d_efficiency(mse, reference)?,
        ds_efficiency(mse, reference)?,
    ))
}

pub fn efficiencies_against(
    design: &ExactDesign,
    theta: &ParamVector,
    replications: u64,
    seed: u64,
    reference: &EfficiencyReference,
) -> Result<EfficiencyReport> {
    let mse = simulate_mse(design, theta, replications, seed)?;
    let (eff_d, eff_s) = efficiencies_from_mse(&mse, reference)?;
    Ok(EfficiencyReport {
        eff_d,
        eff_s,
        mse,
        reference_d: reference.d_design.clone(),
        reference_s: reference.ds_design.clone(),
    })
}

/// Simulation-based D- and Ds-efficiencies relative to the optimal
/// approximate designs under `theta` and `bounds`.
pub fn efficiencies(
    design: &ExactDesign,
    theta: &ParamVector,
    replications: u64,
    seed: u64,
    bounds: &SizeBounds,
) -> Result<EfficiencyReport> {
    let reference = EfficiencyReference::new(theta, bounds)?;
    efficiencies_against(design, theta, replications, seed, &reference)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chlamydia() -> ParamVector {
        ParamVector::new(0.07, 0.93, 0.96).unwrap()
    }

    #[test]
    fn near_zero_prevalence_gives_no_positives() {
        let theta = ParamVector::new(1e-12, 1.0, 1.0).unwrap();
        let design = ExactDesign::from_parts(&[1, 5, 10], &[10, 10, 10]).unwrap();
        let total: u64 = (0..1000)
            .map(|t| {
                sample_outcomes(&design, &theta, 3, t)
                    .unwrap()
                    .points
                    .iter()
                    .map(|p| p.positives)
                    .sum::<u64>()
            })
            .sum();
        assert!(total <= 1);
    }

    #[test]
    fn sampling_is_deterministic() {
        let design = ExactDesign::from_parts(&[1, 17, 61], &[1000, 1000, 1000]).unwrap();
        let a = sample_outcomes(&design, &chlamydia(), 42, 17).unwrap();
        let b = sample_outcomes(&design, &chlamydia(), 42, 17).unwrap();
        assert_eq!(a, b);
        let c = sample_outcomes(&design, &chlamydia(), 42, 18).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_noiseless_replication_has_zero_mse() {
        let theta = chlamydia();
        let design = ExactDesign::from_parts(&[1, 17, 61], &[1000, 1000, 1000]).unwrap();
        let fit = mle_fit_expected(&design, &theta, MleOptions::default()).unwrap();
        let mse = MseMatrix::from_estimates(&[fit.theta], &theta, 3000, 0);
        assert_eq!(mse.replications, 1);
        assert!(mse.matrix().amax() < 1e-9);
    }

    #[test]
    fn zero_replications_rejected() {
        let design = ExactDesign::from_parts(&[1, 17, 61], &[1000, 1000, 1000]).unwrap();
        assert!(simulate_mse(&design, &chlamydia(), 0, 1).is_err());
    }

    #[test]
    fn single_replication_leaves_only_ds_efficiency() {
        let theta = chlamydia();
        let bounds = SizeBounds::new(1.0, 61.0).unwrap();
        let reference = EfficiencyReference::new(&theta, &bounds).unwrap();
        let design = ExactDesign::from_parts(&[1, 17, 61], &[1000, 1000, 1000]).unwrap();
        let mse = simulate_mse(&design, &theta, 1, 5).unwrap();
        assert!(d_efficiency(&mse, &reference).is_err());
        assert!(ds_efficiency(&mse, &reference).unwrap() > 0.0);
    }

    #[test]
    fn efficiency_requires_nonsingular_mse() {
        let theta = chlamydia();
        let bounds = SizeBounds::new(1.0, 61.0).unwrap();
        let reference = EfficiencyReference::new(&theta, &bounds).unwrap();
        let zero = MseMatrix::from_estimates(&[theta], &theta, 3000, 0);
        assert!(matches!(
            efficiencies_from_mse(&zero, &reference),
            Err(Error::EfficiencyUndefined(_))
        ));
    }
}
