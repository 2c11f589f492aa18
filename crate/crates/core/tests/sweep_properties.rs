mod common;

use common::chlamydia;
use gtdesign::robustness::{sweep_designs, SweepRow};
use gtdesign::{monotonicity_report, sweep, Criterion, MisspecGrid};

const N: u64 = 3000;
const REPS: u64 = 2000;

fn design_rows(grid: &MisspecGrid, criterion: Criterion) -> Vec<SweepRow> {
    let (_, bounds) = chlamydia();
    sweep_designs(grid, &bounds, N, criterion)
        .unwrap()
        .iter()
        .map(SweepRow::from)
        .collect()
}

fn is_truth(row: &SweepRow) -> bool {
    row.theta_tilde.as_array() == [0.07, 0.93, 0.96]
}

#[test]
fn d_sweep_interior_size_range_and_trend() {
    let rows = design_rows(&MisspecGrid::fine(), Criterion::D);
    let sizes: Vec<u64> = rows.iter().map(|r| r.intermediate_size).collect();
    assert_eq!(*sizes.iter().min().unwrap(), 12);
    assert_eq!(*sizes.iter().max().unwrap(), 25);
    assert_eq!(
        rows.iter().find(|r| is_truth(r)).unwrap().intermediate_size,
        17
    );
    assert!(monotonicity_report(&rows).is_clean());
    for r in &rows {
        assert_eq!(r.weights, [1.0 / 3.0; 3]);
    }
}

/// The bands are quoted to two decimals, so weights are compared at that precision.
fn two_decimals(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[test]
fn ds_sweep_weights_stay_in_band() {
    let rows = design_rows(&MisspecGrid::fine(), Criterion::Ds);
    for r in &rows {
        let w = r.weights.map(two_decimals);
        assert!(
            (w[0] - 0.14).abs() <= 0.05 + 1e-12,
            "{:?}: {w:?}",
            r.theta_tilde
        );
        assert!(
            (w[1] - 0.67).abs() <= 0.14 + 1e-12,
            "{:?}: {w:?}",
            r.theta_tilde
        );
        assert!(
            (w[2] - 0.19).abs() <= 0.12 + 1e-12,
            "{:?}: {w:?}",
            r.theta_tilde
        );
        assert!((11..=25).contains(&r.intermediate_size));
    }
}

#[test]
fn d_sweep_efficiency_floor() {
    let (theta, bounds) = chlamydia();
    let rows = sweep(
        &MisspecGrid::fine(),
        &theta,
        &bounds,
        N,
        REPS,
        31,
        Criterion::D,
    )
    .unwrap();
    let worst = rows
        .iter()
        .map(|r| r.efficiency)
        .fold(f64::INFINITY, f64::min);
    assert!(worst >= 0.88, "lowest D-efficiency {worst}");
    let truth = rows.iter().find(|r| is_truth(r)).unwrap();
    assert!(
        (truth.efficiency - 1.0).abs() < 0.05,
        "{}",
        truth.efficiency
    );
}

#[test]
fn ds_sweep_efficiency_floor_on_restricted_region() {
    let (theta, bounds) = chlamydia();
    let rows = sweep(
        &MisspecGrid::coarse(),
        &theta,
        &bounds,
        N,
        REPS,
        32,
        Criterion::Ds,
    )
    .unwrap();
    let restricted = |r: &SweepRow| {
        let p = r.theta_tilde.as_array();
        p[0] >= 0.04 && p[1] <= 0.99
    };
    let inside = rows
        .iter()
        .filter(|r| restricted(r))
        .map(|r| r.efficiency)
        .fold(f64::INFINITY, f64::min);
    assert!(inside >= 0.78, "lowest restricted Ds-efficiency {inside}");
    let outside = rows
        .iter()
        .filter(|r| !restricted(r))
        .map(|r| r.efficiency)
        .fold(f64::INFINITY, f64::min);
    assert!(
        outside < 0.75,
        "lowest unrestricted Ds-efficiency {outside}"
    );
    let truth = rows.iter().find(|r| is_truth(r)).unwrap();
    assert!(
        (truth.efficiency - 1.0).abs() < 0.08,
        "{}",
        truth.efficiency
    );
}
