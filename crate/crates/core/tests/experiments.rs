use std::path::Path;

use hfhr::experiments::{
    generate_linreg_data, load_dataset_csv, load_regression_csv, reference_multiwell, run_experiment,
    ExperimentConfig, WellMarginal, DEFAULT_BETA,
};
use hfhr::linalg::solve;
use hfhr::metrics::mse;
use hfhr::potentials::well;

fn data_file() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/breast_cancer.csv")
}

/// Plain trapezoid on a wider box: a second quadrature route.
fn trapezoid_moments() -> (f64, f64) {
    let (lo, hi, n) = (-12.0, 12.0, 400_000);
    let h = (hi - lo) / n as f64;
    let (mut z, mut m2) = (0.0, 0.0);
    for i in 0..=n {
        let s = lo + h * i as f64;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let e = (-well(s)).exp();
        z += w * e;
        m2 += w * s * s * e;
    }
    (z * h, m2 / z)
}

#[test]
fn well_marginal_matches_independent_quadrature() {
    let m = WellMarginal::new().unwrap();
    let (z, m2) = trapezoid_moments();
    assert!((m.normalizer - z).abs() < 1e-9 * z, "{} vs {z}", m.normalizer);
    assert!((m.second_moment - m2).abs() < 1e-9 * m2);
    assert!(m.quantile(0.0) < m.quantile(0.3) && m.quantile(0.3) < m.quantile(1.0));
}

#[test]
fn reference_draws_have_the_right_moments() {
    let m2 = trapezoid_moments().1;
    let cloud = reference_multiwell(4, 20_000, 9).unwrap();
    let v = cloud.points().as_slice();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let second = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    let fourth = v.iter().map(|x| x.powi(4)).sum::<f64>() / v.len() as f64;
    let se = ((fourth - second * second) / v.len() as f64).sqrt();
    assert!((second - m2).abs() < 5.0 * se, "{second} vs {m2} ± {se}");
    assert!(mean.abs() < 5.0 * (m2 / v.len() as f64).sqrt());
}

#[test]
fn least_squares_residual_is_the_noise_level() {
    let sigma = 0.4;
    let (x, y) = generate_linreg_data(1000, &DEFAULT_BETA, sigma, 2024).unwrap();
    let beta = solve(&x.transpose().matmul(&x), &x.tr_matvec(&y)).unwrap();
    let resid = mse(&x, &y, &beta).unwrap();
    // E[RSS/n] = σ²(n − d)/n, spread ≈ σ²√(2/n)
    assert!((resid - sigma * sigma).abs() < 0.02, "{resid}");
    assert!(beta.iter().zip(DEFAULT_BETA).all(|(b, t)| (b - t).abs() < 0.1));
    let (x2, _) = generate_linreg_data(1000, &DEFAULT_BETA, sigma, 2024).unwrap();
    assert_eq!(x, x2);
}

#[test]
fn breast_cancer_split_and_standardisation() {
    let (train, test) = load_dataset_csv(&data_file(), 0.7, 7).unwrap();
    assert_eq!((train.len(), test.len()), (398, 171));
    assert_eq!(train.features.cols(), 30);
    for j in 0..30 {
        let col: Vec<f64> = (0..train.len()).map(|i| train.features[(i, j)]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 1e-10 && (var - 1.0).abs() < 1e-10);
    }
    let (again, _) = load_dataset_csv(&data_file(), 0.7, 7).unwrap();
    assert_eq!(train, again);
}

#[test]
fn malformed_csv_files_are_dataset_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("ragged.csv", "a,b,label\n1,2,0\n3,1\n"),
        ("text.csv", "a,b,label\n1,x,0\n3,1,1\n"),
        ("label.csv", "a,b,label\n1,2,3\n3,1,1\n"),
        ("single.csv", "a,b,label\n1,2,1\n3,1,1\n"),
    ];
    for (name, body) in cases {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        assert!(
            matches!(load_dataset_csv(&p, 0.7, 0), Err(hfhr::Error::Dataset(_))),
            "{name}"
        );
    }
    let p = dir.path().join("reg.csv");
    std::fs::write(&p, "x1,x2,y\n1,0,2\n0,1,3\n").unwrap();
    let (x, y) = load_regression_csv(&p).unwrap();
    assert_eq!((x.rows(), x.cols(), y), (2, 2, vec![2.0, 3.0]));
}

const SMOKE: &str = r#"
case = "multiwell"
eta = 1e-2
steps = 40
chains = 20
seed = 5
snapshots = 4

[multiwell]
dim = 2
reference_size = 500
projections = 8

[[samplers]]
kind = "klmc"
gamma = 2.0

[[samplers]]
kind = "hfhr"
alpha = 0.1
gamma = 2.0
"#;

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(SMOKE).unwrap();
    let a = run_experiment(&cfg, &dir.path().join("a")).unwrap();
    let b = run_experiment(&cfg, &dir.path().join("b")).unwrap();
    assert_eq!(a.results.len(), 2);
    for (ra, rb) in a.results.iter().zip(&b.results) {
        assert_eq!(ra.metric, rb.metric);
        assert_eq!(ra.steps.first(), Some(&0));
        assert_eq!(ra.steps.last(), Some(&40));
    }
    assert!(dir.path().join("a/run.json").exists());
}

#[test]
fn config_errors_are_reported() {
    let bad = [
        SMOKE.replace("steps = 40", "steps = 40\nbogus = 1"),
        SMOKE.replace("[multiwell]\ndim = 2", "[multiwell]\ndim = 0"),
        SMOKE.replace("kind = \"klmc\"\ngamma = 2.0", "kind = \"klmc\"\nalpha = 0.3\ngamma = 2.0"),
        SMOKE.replace("eta = 1e-2", "eta = -1.0"),
        SMOKE.replace("snapshots = 4", "schedule = [10, 50]"),
        "case = \"linreg\"\neta = 1e-3\nsteps = 5\nchains = 1\nseed = 0\n[[samplers]]\nkind = \"ula\"\ngamma = 1.0\n"
            .to_string(),
    ];
    for text in &bad {
        assert!(
            matches!(ExperimentConfig::from_toml(text), Err(hfhr::Error::Config(_))),
            "{text}"
        );
    }
}
