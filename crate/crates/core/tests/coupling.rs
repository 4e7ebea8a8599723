use hfhr::constants::{contraction_rate, LyapunovFunction};
use hfhr::coupling::{
    baseline_quadratic_norm, build_profile, coupled_step, gradient_constant, phase_distance, run_coupling,
    CoupledPair, CoupledStart, CouplingParams, Observer, DEFAULT_GRID,
};
use hfhr::integrators::{hfhr_step, PhasePoint, SamplerParams};
use hfhr::potentials::{Gaussian, MultiWell};
use hfhr::PotentialModel;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn params(alpha: f64, gamma: f64) -> SamplerParams {
    SamplerParams {
        alpha,
        gamma,
        eta: 1e-2,
        steps: 200,
        chains: 64,
        seed: 11,
    }
}

fn gaussian_setup(alpha: f64) -> (PotentialModel, CouplingParams, hfhr::constants::RateReport) {
    let model: PotentialModel = Gaussian::new(2, 2.0).unwrap().into();
    let c = model.constants();
    let rate = contraction_rate(c.drift_rate, alpha, 2.0, c.lipschitz, 2, c.drift_offset, 0.5).unwrap();
    let coupling = CouplingParams::new(&rate, None).unwrap();
    (model, coupling, rate)
}

fn point(v: &[f64]) -> PhasePoint {
    let d = v.len() / 2;
    PhasePoint::new(v[..d].to_vec(), v[d..].to_vec()).unwrap()
}

#[test]
fn profile_is_concave_increasing_and_grid_stable() {
    for alpha in [0.0, 0.02] {
        let (_, _, rate) = gaussian_setup(alpha);
        let cbar = gradient_constant(rate.theta, 2.0, baseline_quadratic_norm(2.0));
        let prof = build_profile(&rate, cbar, DEFAULT_GRID).unwrap();
        assert!(prof.g_star >= 0.5);
        assert!(prof.f.windows(2).all(|w| w[1] > w[0]));
        assert!(prof.f.windows(3).all(|w| (w[2] - w[1]) <= (w[1] - w[0]) + 1e-15));
        assert!(prof.richardson_delta < 1e-8);
        // f′ = φg ≥ c_r g* ≥ c_r/2
        for &r in &[0.1 * prof.r1, 0.5 * prof.r1, prof.r1] {
            assert!(prof.eval(r) >= 0.5 * r * prof.c_r - 1e-12);
        }
    }
}

#[test]
fn first_copy_is_a_plain_hfhr_step() {
    let (model, coupling, _) = gaussian_setup(0.02);
    let p = params(0.02, 2.0);
    let x = point(&[1.0, -0.5, 0.2, 0.3]);
    let y = point(&[-0.4, 0.1, 0.0, 1.0]);
    let pair = CoupledPair::new(x.clone(), y, 2.0, coupling.xi).unwrap();
    let (xi_q, xi_p) = ([0.3, -1.1], [0.7, 0.2]);
    let next = coupled_step(&pair, &model, &p, &coupling, &xi_q, &xi_p).unwrap();
    assert_eq!(next.x, hfhr_step(&x, &model, &p, &xi_q, &xi_p).unwrap());
    let mirrored = pair.mirrored(&xi_p);
    assert_eq!(next.y, hfhr_step(&pair.y, &model, &p, &xi_q, &mirrored).unwrap());
}

#[test]
fn coalesced_pairs_stay_together() {
    let (model, coupling, _) = gaussian_setup(0.0);
    let p = params(0.0, 2.0);
    let z = point(&[0.4, 0.4, -0.2, 0.1]);
    let mut pair = CoupledPair::new(z.clone(), z, 2.0, coupling.xi).unwrap();
    for k in 0..50 {
        let n = [0.1 * k as f64, -0.3];
        pair = coupled_step(&pair, &model, &p, &coupling, &n, &n).unwrap();
        assert_eq!(pair.x, pair.y);
    }
}

/// Both copies must be HFHR chains: second moments of the second copy match
/// those of an uncoupled run from the same start.
#[test]
fn second_copy_has_the_right_marginal() {
    let model: PotentialModel = MultiWell::new(1, 2.0).unwrap().into();
    let c = model.constants();
    let rate = contraction_rate(c.drift_rate, 0.05, 2.0, c.lipschitz, 1, c.drift_offset, 0.5).unwrap();
    let coupling = CouplingParams::new(&rate, None).unwrap();
    let p = SamplerParams {
        alpha: 0.05,
        gamma: 2.0,
        eta: 1e-2,
        steps: 300,
        chains: 1,
        seed: 0,
    };
    let start_x = point(&[2.0, 0.0]);
    let start_y = point(&[-1.0, 0.5]);
    let n = 4000;
    let (mut coupled, mut plain) = (0.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };
    for _ in 0..n {
        let mut pair = CoupledPair::new(start_x.clone(), start_y.clone(), 2.0, coupling.xi).unwrap();
        let mut z = start_y.clone();
        for _ in 0..p.steps {
            let (a, b) = ([normal()], [normal()]);
            pair = coupled_step(&pair, &model, &p, &coupling, &a, &b).unwrap();
            let (a, b) = ([normal()], [normal()]);
            z = hfhr_step(&z, &model, &p, &a, &b).unwrap();
        }
        coupled += pair.y.q[0] * pair.y.q[0];
        plain += z.q[0] * z.q[0];
    }
    let (coupled, plain) = (coupled / n as f64, plain / n as f64);
    // second moment ≈ 1.2 with per-sample variance ≲ 4: 5σ band ≈ 0.16
    assert!((coupled - plain).abs() < 0.16, "{coupled} vs {plain}");
}

#[test]
fn semimetric_decays_for_gaussian_pairs() {
    let (model, coupling, rate) = gaussian_setup(0.0);
    let cbar = gradient_constant(rate.theta, 2.0, baseline_quadratic_norm(2.0));
    let prof = build_profile(&rate, cbar, 512).unwrap();
    let lyap = LyapunovFunction::baseline(2.0, model.constants().drift_rate);
    let obs = Observer {
        profile: &prof,
        lyapunov: &lyap,
        epsilon: rate.epsilon,
    };
    let curve = run_coupling(
        &model,
        &params(0.0, 2.0),
        &coupling,
        &CoupledStart::Independent { std: 1.0 },
        &[0, 50, 100, 200],
        &obs,
    )
    .unwrap();
    assert!(curve.mean_rho.windows(2).all(|w| w[1] < w[0]));
    assert!(curve.fitted_rate() > rate.rate);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn metric_equivalence(v in prop::collection::vec(-10.0f64..10.0, 8), theta in 0.05f64..5.0, gamma in 0.5f64..5.0) {
        let (z, w) = (point(&v[..4]), point(&v[4..]));
        let e: f64 = v[..4].iter().zip(&v[4..]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let r = phase_distance(&z, &w, theta, gamma);
        let (k1, k2) = hfhr::constants::equivalence_constants(theta, gamma);
        prop_assert!(k1 * e <= r * (1.0 + 1e-12) + 1e-12);
        prop_assert!(r <= k2 * e * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn reflection_preserves_noise_norm(v in prop::collection::vec(-5.0f64..5.0, 8), xi in prop::collection::vec(-3.0f64..3.0, 2)) {
        let pair = CoupledPair::new(point(&v[..4]), point(&v[4..]), 1.5, 1e-6).unwrap();
        let m = pair.mirrored(&xi);
        let n0: f64 = xi.iter().map(|x| x * x).sum();
        let n1: f64 = m.iter().map(|x| x * x).sum();
        prop_assert!((n0 - n1).abs() < 1e-12 * (1.0 + n0));
        // the reflection is an involution
        let back = pair.mirrored(&m);
        prop_assert!(back.iter().zip(&xi).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
