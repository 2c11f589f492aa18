mod common;

use common::{chlamydia, info, inv3, rng};
use gtdesign::simulation::{mle_fit_expected, MleOptions};
use gtdesign::{sample_outcomes, simulate_mse, ExactDesign, MseMatrix, ParamVector};
use rand::Rng;

fn d_design(n_per_point: u64) -> ExactDesign {
    ExactDesign::from_parts(&[1, 17, 61], &[n_per_point; 3]).unwrap()
}

fn in_pool(threads: usize, f: impl FnOnce() -> MseMatrix + Send) -> MseMatrix {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

/// Frobenius distance between the simulated MSE and the design's own `M^{-1}`.
fn distance_to_asymptote(mse: &MseMatrix, design: &ExactDesign, theta: &ParamVector) -> f64 {
    let approx = design.to_approximate();
    let target = inv3(&info(theta.as_array(), &approx.sizes(), &approx.weights()));
    let mut s = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            s += (mse.m[a][b] - target[a][b]).powi(2);
        }
    }
    s.sqrt()
}

#[test]
fn simulation_is_identical_across_thread_counts() {
    let (theta, _) = chlamydia();
    let designs = [
        d_design(1000),
        ExactDesign::from_parts(&[1, 21, 41, 61], &[750; 4]).unwrap(),
    ];
    for design in &designs {
        let one = in_pool(1, || simulate_mse(design, &theta, 400, 9).unwrap());
        let four = in_pool(4, || simulate_mse(design, &theta, 400, 9).unwrap());
        assert_eq!(one, four);
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(one.m[a][b].to_bits(), four.m[a][b].to_bits());
            }
        }
    }
}

#[test]
fn sampled_counts_have_binomial_moments() {
    let (theta, _) = chlamydia();
    let design = ExactDesign::from_parts(&[1, 17, 61], &[40, 1000, 300]).unwrap();
    let reps = 20_000u64;
    let mut sums = [0.0f64; 3];
    for t in 0..reps {
        let data = sample_outcomes(&design, &theta, 5, t).unwrap();
        for (s, p) in sums.iter_mut().zip(&data.points) {
            *s += p.positives as f64;
        }
    }
    for (i, p) in design.points().iter().enumerate() {
        let pi = theta.response_probability(p.size as f64);
        let mean = sums[i] / reps as f64;
        let se = (p.count as f64 * pi * (1.0 - pi) / reps as f64).sqrt();
        assert!(
            (mean - p.count as f64 * pi).abs() < 4.0 * se,
            "point {i}: {mean}"
        );
    }
}

#[test]
fn noiseless_data_is_inverted_exactly() {
    let mut r = rng(808);
    for _ in 0..200 {
        let theta = ParamVector::new(
            r.random_range(0.01..0.15),
            r.random_range(0.85..0.999),
            r.random_range(0.85..0.999),
        )
        .unwrap();
        let mid = r.random_range(5..40);
        let design =
            ExactDesign::from_parts(&[1, mid, 61], &[r.random_range(200..2000); 3]).unwrap();
        let fit = mle_fit_expected(&design, &theta, MleOptions::default()).unwrap();
        for (a, b) in fit.theta.as_array().iter().zip(theta.as_array()) {
            assert!((a - b).abs() < 1e-8, "{:?} vs {:?}", fit.theta, theta);
        }
        assert!(!fit.boundary);
    }
}

#[test]
fn mse_approaches_inverse_information_with_more_replications() {
    let (theta, _) = chlamydia();
    let design = d_design(1000);
    let small = simulate_mse(&design, &theta, 2_500, 21).unwrap();
    let large = simulate_mse(&design, &theta, 40_000, 21).unwrap();
    let (ds, dl) = (
        distance_to_asymptote(&small, &design, &theta),
        distance_to_asymptote(&large, &design, &theta),
    );
    assert!(dl < ds, "N=40000: {dl}, N=2500: {ds}");
}

#[test]
fn mse_approaches_inverse_information_with_more_trials() {
    let (theta, _) = chlamydia();
    let small_design = d_design(1000);
    let large_design = d_design(10_000);
    let small = simulate_mse(&small_design, &theta, 5_000, 22).unwrap();
    let large = simulate_mse(&large_design, &theta, 5_000, 22).unwrap();
    let (ds, dl) = (
        distance_to_asymptote(&small, &small_design, &theta),
        distance_to_asymptote(&large, &large_design, &theta),
    );
    assert!(dl < ds, "n=30000: {dl}, n=3000: {ds}");
}

#[test]
fn boundary_estimates_are_rare_under_d_design() {
    let (theta, _) = chlamydia();
    let reps = 10_000;
    let mse = simulate_mse(&d_design(1000), &theta, reps, 23).unwrap();
    assert!(
        (mse.failures as f64) < 0.01 * reps as f64,
        "{} failures",
        mse.failures
    );
}
