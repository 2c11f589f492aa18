//! JSON documents written and read by the CLI.

use std::path::Path;

use gtdesign::{
    ApproximateDesign, Criterion, DerivedConstants, ExactDesign, ParamVector, RootSolution,
    SizeBounds,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximateSection {
    pub sizes: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSection {
    pub sizes: Vec<u64>,
    pub counts: Vec<u64>,
}

/// `log |M|` and `-log (M^-)_{11}`; `null` where undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionValues {
    pub d: Option<f64>,
    pub ds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignValues {
    pub approximate: CriterionValues,
    pub exact: CriterionValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSection {
    pub constants: DerivedConstants,
    pub root: RootSolution,
}

/// Design file. Only the first six fields are required when reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    pub schema_version: u32,
    pub theta: ParamVector,
    pub bounds: SizeBounds,
    pub criterion: Criterion,
    pub approximate: ApproximateSection,
    pub exact: ExactSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<DesignValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
}

impl DesignFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read design {}: {e}", path.display())))?;
        let doc: DesignFile = serde_json::from_str(&text)
            .map_err(|e| CliError::io(format!("design {}: {e}", path.display())))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(CliError::io(format!(
                "design {}: unsupported schema_version {}",
                path.display(),
                doc.schema_version
            )));
        }
        Ok(doc)
    }

    pub fn approximate(&self) -> Result<ApproximateDesign, CliError> {
        Ok(ApproximateDesign::from_parts(
            &self.approximate.sizes,
            &self.approximate.weights,
        )?)
    }

    pub fn exact(&self) -> Result<ExactDesign, CliError> {
        Ok(ExactDesign::from_parts(
            &self.exact.sizes,
            &self.exact.counts,
        )?)
    }
}

pub fn approximate_section(d: &ApproximateDesign) -> ApproximateSection {
    ApproximateSection {
        sizes: d.sizes(),
        weights: d.weights(),
    }
}

pub fn exact_section(d: &ExactDesign) -> ExactSection {
    ExactSection {
        sizes: d.sizes(),
        counts: d.counts(),
    }
}

pub fn criterion_values(d: &ApproximateDesign, theta: &ParamVector) -> CriterionValues {
    CriterionValues {
        d: gtdesign::criterion_value(d, theta, Criterion::D).ok(),
        ds: gtdesign::criterion_value(d, theta, Criterion::Ds).ok(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyDocument {
    pub schema_version: u32,
    pub criterion: Criterion,
    pub max_violation: f64,
    pub argmax_size: f64,
    pub grid_step: f64,
    pub support_gaps: Vec<f64>,
    pub certified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateDocument {
    pub schema_version: u32,
    pub theta: ParamVector,
    pub bounds: SizeBounds,
    pub exact: ExactSection,
    pub reps: u64,
    pub seed: u64,
    /// `null` when the simulated MSE is singular.
    pub eff_d: Option<f64>,
    pub eff_s: Option<f64>,
    pub failures: u64,
    /// `n`-scaled mean squared error matrix of `(p0, p1, p2)`.
    pub mse: [[f64; 3]; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub x_mid: u64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    /// Absent when the sweep ran without simulation.
    pub efficiency: Option<f64>,
    pub failures: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicitySummary {
    pub lines_checked: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepDocument {
    pub schema_version: u32,
    pub criterion: Criterion,
    pub theta: ParamVector,
    pub bounds: SizeBounds,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub monotonicity: MonotonicitySummary,
    pub rows: Vec<SweepRecord>,
}
