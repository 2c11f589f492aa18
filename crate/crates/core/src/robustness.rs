//! Misspecification sweeps: designs built under a guessed parameter vector,
//! evaluated by simulation under the true one.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Criterion, ExactDesign, ParamVector, SizeBounds};
use crate::rounding::round_design;
use crate::simulation::rng::mix_seed;
use crate::simulation::{efficiencies_against, EfficiencyReference};
use crate::solver::optimal_design;

/// Lattice of guessed parameter vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisspecGrid {
    pub p0_values: Vec<f64>,
    pub p1_values: Vec<f64>,
    pub p2_values: Vec<f64>,
}

fn hundredths(from: u32, to: u32, step: u32) -> Vec<f64> {
    (from..=to)
        .step_by(step as usize)
        .map(|k| k as f64 / 100.0)
        .collect()
}

impl MisspecGrid {
    pub fn new(p0_values: Vec<f64>, p1_values: Vec<f64>, p2_values: Vec<f64>) -> Result<Self> {
        let grid = Self {
            p0_values,
            p1_values,
            p2_values,
        };
        if grid.p0_values.is_empty() || grid.p1_values.is_empty() || grid.p2_values.is_empty() {
            return Err(Error::InvalidParameter(
                "grid axes must be non-empty".into(),
            ));
        }
        grid.points()?;
        Ok(grid)
    }

    /// `p0 in {0.01, 0.04, 0.07, 0.10}`, `p1, p2 in {0.90, 0.91, ..., 1.00}`.
    pub fn fine() -> Self {
        Self {
            p0_values: hundredths(1, 10, 3),
            p1_values: hundredths(90, 100, 1),
            p2_values: hundredths(90, 100, 1),
        }
    }

    /// `p0 in {0.01, 0.04, 0.07, 0.10}`, `p1, p2 in {0.90, 0.93, 0.96, 0.99, 1.00}`.
    pub fn coarse() -> Self {
        let mut p = hundredths(90, 99, 3);
        p.push(1.0);
        Self {
            p0_values: hundredths(1, 10, 3),
            p1_values: p.clone(),
            p2_values: p,
        }
    }

    pub fn single(theta: &ParamVector) -> Self {
        Self {
            p0_values: vec![theta.p0()],
            p1_values: vec![theta.p1()],
            p2_values: vec![theta.p2()],
        }
    }

    /// Lattice points with `p0` outermost and `p2` innermost.
    pub fn points(&self) -> Result<Vec<ParamVector>> {
        let mut out = Vec::with_capacity(self.len());
        for &p0 in &self.p0_values {
            for &p1 in &self.p1_values {
                for &p2 in &self.p2_values {
                    out.push(ParamVector::new(p0, p1, p2)?);
                }
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.p0_values.len() * self.p1_values.len() * self.p2_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Rounded optimal design under one guessed parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDesign {
    pub theta_tilde: ParamVector,
    pub design: ExactDesign,
    pub intermediate_size: u64,
    pub weights: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta_tilde: ParamVector,
    pub intermediate_size: u64,
    /// Trial proportions at `x_L`, the intermediate size and `x_U`.
    pub weights: [f64; 3],
    /// Simulated efficiency under the true parameters (D or Ds, per sweep).
    pub efficiency: f64,
    pub failures: u64,
}

pub fn rounded_optimal_design(
    theta_tilde: &ParamVector,
    bounds: &SizeBounds,
    n: u64,
    criterion: Criterion,
) -> Result<SweepDesign> {
    let opt = optimal_design(theta_tilde, bounds, criterion)?;
    let design = round_design(&opt.design, theta_tilde, n, criterion)?;
    let n_f = design.total_trials() as f64;
    let counts = design.counts();
    Ok(SweepDesign {
        theta_tilde: *theta_tilde,
        intermediate_size: design.sizes()[1],
        weights: [
            counts[0] as f64 / n_f,
            counts[1] as f64 / n_f,
            counts[2] as f64 / n_f,
        ],
        design,
    })
}

/// Rounded optimal designs for every lattice point, without simulation.
pub fn sweep_designs(
    grid: &MisspecGrid,
    bounds: &SizeBounds,
    n: u64,
    criterion: Criterion,
) -> Result<Vec<SweepDesign>> {
    grid.points()?
        .iter()
        .map(|t| rounded_optimal_design(t, bounds, n, criterion))
        .collect()
}

/// For each lattice point: rounded optimal design under `theta_tilde`, then its
/// simulated efficiency under `true_theta`. Row `i` simulates with seed
/// `mix_seed(seed, i)`.
pub fn sweep(
    grid: &MisspecGrid,
    true_theta: &ParamVector,
    bounds: &SizeBounds,
    n: u64,
    replications: u64,
    seed: u64,
    criterion: Criterion,
) -> Result<Vec<SweepRow>> {
    let reference = EfficiencyReference::new(true_theta, bounds)?;
    let designs = sweep_designs(grid, bounds, n, criterion)?;
    designs
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let report = efficiencies_against(
                &d.design,
                true_theta,
                replications,
                mix_seed(seed, i as u64),
                &reference,
            )?;
            Ok(SweepRow {
                theta_tilde: d.theta_tilde,
                intermediate_size: d.intermediate_size,
                weights: d.weights,
                efficiency: match criterion {
                    Criterion::D => report.eff_d,
                    Criterion::Ds => report.eff_s,
                },
                failures: report.mse.failures,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    P0,
    P1,
    P2,
}

/// A lattice line along which the intermediate size moves the wrong way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityViolation {
    pub axis: Axis,
    pub from: ParamVector,
    pub to: ParamVector,
    pub from_size: u64,
    pub to_size: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub lines_checked: usize,
    pub violations: Vec<MonotonicityViolation>,
}

impl MonotonicityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that the intermediate size is nonincreasing in `p0` and `p2` and
/// nondecreasing in `p1` along every lattice line.
pub fn monotonicity_report(rows: &[SweepRow]) -> MonotonicityReport {
    let mut lines_checked = 0;
    let mut violations = Vec::new();
    for axis in [Axis::P0, Axis::P1, Axis::P2] {
        let idx = match axis {
            Axis::P0 => 0,
            Axis::P1 => 1,
            Axis::P2 => 2,
        };
        let mut lines: BTreeMap<(u64, u64), Vec<&SweepRow>> = BTreeMap::new();
        for row in rows {
            let p = row.theta_tilde.as_array();
            let rest: Vec<u64> = (0..3)
                .filter(|&j| j != idx)
                .map(|j| p[j].to_bits())
                .collect();
            lines.entry((rest[0], rest[1])).or_default().push(row);
        }
        for line in lines.values_mut() {
            lines_checked += 1;
            line.sort_by(|a, b| {
                a.theta_tilde.as_array()[idx].total_cmp(&b.theta_tilde.as_array()[idx])
            });
            for pair in line.windows(2) {
                let (lo, hi) = (pair[0], pair[1]);
                let wrong = match axis {
                    Axis::P1 => hi.intermediate_size < lo.intermediate_size,
                    Axis::P0 | Axis::P2 => hi.intermediate_size > lo.intermediate_size,
                };
                if wrong {
                    violations.push(MonotonicityViolation {
                        axis,
                        from: lo.theta_tilde,
                        to: hi.theta_tilde,
                        from_size: lo.intermediate_size,
                        to_size: hi.intermediate_size,
                    });
                }
            }
        }
    }
    MonotonicityReport {
        lines_checked,
        violations,
    }
}

impl From<&SweepDesign> for SweepRow {
    /// Design-only row; efficiency is NaN until simulated.
    fn from(d: &SweepDesign) -> Self {
        SweepRow {
            theta_tilde: d.theta_tilde,
            intermediate_size: d.intermediate_size,
            weights: d.weights,
            efficiency: f64::NAN,
            failures: 0,
        }
    }
}
