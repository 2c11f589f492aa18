use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use gtdesign::robustness::{sweep_designs, SweepRow};
use gtdesign::simulation::{d_efficiency, ds_efficiency, EfficiencyReference};
use gtdesign::{
    monotonicity_report, optimal_design, round_design, simulate_mse, sweep, verify_optimality,
    Criterion, ExactDesign, MisspecGrid,
};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::document::*;
use crate::error::{CliError, EXIT_NOT_OPTIMAL};

/// Largest equivalence-theorem violation accepted by `verify`.
pub const VERIFY_TOLERANCE: f64 = 1e-6;

const DEFAULT_N: u64 = 3000;
const DEFAULT_REPS: u64 = 10_000;
const DEFAULT_SWEEP_REPS: u64 = 2000;

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

pub fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn design_path(explicit: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    explicit
        .or_else(|| cfg.file.get_string("design").map(PathBuf::from))
        .ok_or_else(|| CliError::usage("missing --design"))
}

fn design_csv(doc: &DesignFile) -> String {
    let mut s = String::from("approx_size,weight,exact_size,count\n");
    let a = &doc.approximate;
    let e = &doc.exact;
    for i in 0..a.sizes.len().max(e.sizes.len()) {
        let cell = |v: Option<String>| v.unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{}",
            cell(a.sizes.get(i).map(f64::to_string)),
            cell(a.weights.get(i).map(f64::to_string)),
            cell(e.sizes.get(i).map(u64::to_string)),
            cell(e.counts.get(i).map(u64::to_string)),
        );
    }
    s
}

fn render_design(doc: &DesignFile, format: Format) -> String {
    match format {
        Format::Json => to_json(doc),
        Format::Csv => design_csv(doc),
    }
}

pub fn cmd_design(cfg: &RunConfig) -> Result<String, CliError> {
    let theta = cfg.theta(None)?;
    let bounds = cfg.bounds(None)?;
    let criterion = cfg.criterion_or(Criterion::D);
    let n = cfg.n_or(DEFAULT_N);
    let opt = optimal_design(&theta, &bounds, criterion)?;
    let exact = round_design(&opt.design, &theta, n, criterion)?;
    let doc = DesignFile {
        schema_version: SCHEMA_VERSION,
        theta,
        bounds,
        criterion,
        approximate: approximate_section(&opt.design),
        exact: exact_section(&exact),
        values: Some(DesignValues {
            approximate: criterion_values(&opt.design, &theta),
            exact: criterion_values(&exact.to_approximate(), &theta),
        }),
        solver: Some(SolverSection {
            constants: opt.constants,
            root: opt.root,
        }),
    };
    Ok(render_design(&doc, cfg.format_or(Format::Json)))
}

pub fn cmd_round(cfg: &RunConfig, design: Option<PathBuf>) -> Result<String, CliError> {
    let file = DesignFile::read(&design_path(design, cfg)?)?;
    let theta = cfg.theta(Some(&file.theta))?;
    let bounds = cfg.bounds(Some(&file.bounds))?;
    let criterion = cfg.criterion_or(file.criterion);
    let n = cfg.n_or(file.exact.counts.iter().sum::<u64>().max(1));
    let approx = file.approximate()?;
    let exact = round_design(&approx, &theta, n, criterion)?;
    let doc = DesignFile {
        schema_version: SCHEMA_VERSION,
        theta,
        bounds,
        criterion,
        approximate: approximate_section(&approx),
        exact: exact_section(&exact),
        values: Some(DesignValues {
            approximate: criterion_values(&approx, &theta),
            exact: criterion_values(&exact.to_approximate(), &theta),
        }),
        solver: None,
    };
    Ok(render_design(&doc, cfg.format_or(Format::Json)))
}

/// Returns the rendered report and whether the design is certified.
pub fn cmd_verify(cfg: &RunConfig, design: Option<PathBuf>) -> Result<(String, bool), CliError> {
    let file = DesignFile::read(&design_path(design, cfg)?)?;
    let theta = cfg.theta(Some(&file.theta))?;
    let bounds = cfg.bounds(Some(&file.bounds))?;
    let criterion = cfg.criterion_or(file.criterion);
    let report = verify_optimality(
        &file.approximate()?,
        &theta,
        &bounds,
        criterion,
        cfg.grid_step,
    )?;
    let certified = report.max_violation < VERIFY_TOLERANCE;
    let doc = VerifyDocument {
        schema_version: SCHEMA_VERSION,
        criterion,
        max_violation: report.max_violation,
        argmax_size: report.argmax_size,
        grid_step: report.grid_step,
        support_gaps: report.support_gaps,
        certified,
    };
    let text = match cfg.format_or(Format::Json) {
        Format::Json => to_json(&doc),
        Format::Csv => format!(
            "criterion,max_violation,argmax_size,grid_step,certified\n{},{},{},{},{}\n",
            doc.criterion, doc.max_violation, doc.argmax_size, doc.grid_step, doc.certified
        ),
    };
    Ok((text, certified))
}

pub struct SimulateInput {
    pub design: Option<PathBuf>,
    pub sizes: Option<Vec<u64>>,
    pub counts: Option<Vec<u64>>,
}

pub fn cmd_simulate(cfg: &RunConfig, input: SimulateInput) -> Result<String, CliError> {
    let (exact, file) = match (input.sizes, input.counts) {
        (Some(sizes), Some(counts)) => (ExactDesign::from_parts(&sizes, &counts)?, None),
        (None, None) => {
            let file = DesignFile::read(&design_path(input.design, cfg)?)?;
            (file.exact()?, Some(file))
        }
        _ => return Err(CliError::usage("--sizes and --counts go together")),
    };
    let theta = cfg.theta(file.as_ref().map(|f| &f.theta))?;
    let bounds = cfg.bounds(file.as_ref().map(|f| &f.bounds))?;
    let reps = cfg.reps.unwrap_or(DEFAULT_REPS);
    let reference = EfficiencyReference::new(&theta, &bounds)?;
    let mse = simulate_mse(&exact, &theta, reps, cfg.seed)?;
    // A singular MSE (e.g. a single replication) leaves eff_d undefined; report null.
    let doc = SimulateDocument {
        schema_version: SCHEMA_VERSION,
        theta,
        bounds,
        exact: exact_section(&exact),
        reps,
        seed: cfg.seed,
        eff_d: d_efficiency(&mse, &reference).ok(),
        eff_s: ds_efficiency(&mse, &reference).ok(),
        failures: mse.failures,
        mse: mse.m,
    };
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    Ok(match cfg.format_or(Format::Json) {
        Format::Json => to_json(&doc),
        Format::Csv => format!(
            "eff_d,eff_s,failures,reps,seed\n{},{},{},{},{}\n",
            cell(doc.eff_d),
            cell(doc.eff_s),
            doc.failures,
            doc.reps,
            doc.seed
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Lattice {
    /// p0 in {0.01, 0.04, 0.07, 0.10}; p1, p2 in {0.90, 0.91, ..., 1.00}
    Fine,
    /// p0 in {0.01, 0.04, 0.07, 0.10}; p1, p2 in {0.90, 0.93, 0.96, 0.99, 1.00}
    Coarse,
    /// The single point given by --p0 --p1 --p2
    Truth,
}

pub struct SweepInput {
    pub lattice: Option<Lattice>,
    pub tilde_p0: Option<Vec<f64>>,
    pub tilde_p1: Option<Vec<f64>>,
    pub tilde_p2: Option<Vec<f64>>,
}

pub fn cmd_sweep(cfg: &RunConfig, input: SweepInput) -> Result<String, CliError> {
    let theta = cfg.theta(None)?;
    let bounds = cfg.bounds(None)?;
    let criterion = cfg.criterion_or(Criterion::D);
    let n = cfg.n_or(DEFAULT_N);
    let reps = cfg.reps.unwrap_or(DEFAULT_SWEEP_REPS);
    let lattice = input.lattice.unwrap_or(match criterion {
        Criterion::D => Lattice::Fine,
        Criterion::Ds => Lattice::Coarse,
    });
    let base = match lattice {
        Lattice::Fine => MisspecGrid::fine(),
        Lattice::Coarse => MisspecGrid::coarse(),
        Lattice::Truth => MisspecGrid::single(&theta),
    };
    let grid = MisspecGrid::new(
        input.tilde_p0.unwrap_or(base.p0_values),
        input.tilde_p1.unwrap_or(base.p1_values),
        input.tilde_p2.unwrap_or(base.p2_values),
    )?;
    let rows: Vec<SweepRow> = if reps == 0 {
        sweep_designs(&grid, &bounds, n, criterion)?
            .iter()
            .map(SweepRow::from)
            .collect()
    } else {
        sweep(&grid, &theta, &bounds, n, reps, cfg.seed, criterion)?
    };
    let report = monotonicity_report(&rows);
    let records: Vec<SweepRecord> = rows
        .iter()
        .map(|r| {
            let t = r.theta_tilde.as_array();
            SweepRecord {
                p0: t[0],
                p1: t[1],
                p2: t[2],
                x_mid: r.intermediate_size,
                w1: r.weights[0],
                w2: r.weights[1],
                w3: r.weights[2],
                efficiency: (reps > 0).then_some(r.efficiency),
                failures: r.failures,
            }
        })
        .collect();
    Ok(match cfg.format_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("p0,p1,p2,x_mid,w1,w2,w3,efficiency\n");
            for r in &records {
                let eff = r.efficiency.map(|e| e.to_string()).unwrap_or_default();
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    r.p0, r.p1, r.p2, r.x_mid, r.w1, r.w2, r.w3, eff
                );
            }
            s
        }
        Format::Json => to_json(&SweepDocument {
            schema_version: SCHEMA_VERSION,
            criterion,
            theta,
            bounds,
            n,
            reps,
            seed: cfg.seed,
            monotonicity: MonotonicitySummary {
                lines_checked: report.lines_checked,
                violations: report.violations.len(),
            },
            rows: records,
        }),
    })
}

pub fn not_optimal() -> CliError {
    CliError {
        code: EXIT_NOT_OPTIMAL,
        message: format!("design is not optimal: violation exceeds {VERIFY_TOLERANCE:e}"),
    }
}
