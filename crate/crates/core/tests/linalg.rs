use hfhr::constants::{build_corrector, corrector_source, drift_matrix, m_matrix_eigs, m_matrix_eigs_numeric};
use hfhr::linalg::{expm, lyapunov_residual, solve_lyapunov, symmetric_eigen};
use hfhr::potentials::Gaussian;
use hfhr::{Mat, PotentialModel};
use proptest::prelude::*;

fn symmetric(n: usize, entries: &[f64]) -> Mat {
    let mut m = Mat::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            m[(i, j)] = entries[k];
            m[(j, i)] = entries[k];
            k += 1;
        }
    }
    m
}

fn spd(n: usize, entries: &[f64]) -> Mat {
    let g = symmetric(n, entries);
    g.matmul(&g).add(&Mat::identity(n).scale(0.5))
}

#[test]
fn corrector_matches_hand_derived_oracle() {
    let model: PotentialModel = Gaussian::new(1, 2.0).unwrap().into();
    let spec = build_corrector(&model, 2.0, 0.25).unwrap();
    let want = [[-2.875, -1.25], [-1.25, -0.375]];
    for (i, row) in want.iter().enumerate() {
        for (j, w) in row.iter().enumerate() {
            assert!((spec.k[(i, j)] - w).abs() < 1e-12, "K[{i}{j}] = {}", spec.k[(i, j)]);
        }
    }
}

/// `K = −∫₀^∞ e^{Bᵀt} C e^{Bt} dt` for Hurwitz `B`, by composite Simpson
/// on a horizon where the integrand has decayed below machine precision.
fn integral_solution(b: &Mat, c: &Mat, horizon: f64, intervals: usize) -> Mat {
    let h = horizon / intervals as f64;
    let step = expm(&b.scale(h));
    let n = b.rows();
    let mut e = Mat::identity(n);
    let mut acc = Mat::zeros(n, n);
    for k in 0..=intervals {
        let w = if k == 0 || k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc = acc.add(&e.transpose().matmul(c).matmul(&e).scale(w));
        e = e.matmul(&step);
    }
    acc.scale(-h / 3.0)
}

#[test]
fn lyapunov_solution_agrees_with_integral_form() {
    let q = spd(3, &[1.0, 0.2, -0.1, 0.8, 0.3, 1.2]);
    let b = drift_matrix(&q, 2.0);
    let c = corrector_source(&q, 2.0, 0.2);
    let direct = solve_lyapunov(&b, &c).unwrap().k;
    let integral = integral_solution(&b, &c, 60.0, 12_000);
    let scale = direct.max_abs();
    assert!(direct.sub(&integral).max_abs() < 1e-8 * scale, "{:?}\n{:?}", direct, integral);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn m_eigenvalues_closed_form_vs_solver(gamma in 0.5f64..5.0, lambda in 1e-6f64..=0.25) {
        let (lo, hi) = m_matrix_eigs(gamma, lambda);
        let (nlo, nhi) = m_matrix_eigs_numeric(gamma, lambda);
        prop_assert!((lo - nlo).abs() <= 1e-12 * hi.max(1.0));
        prop_assert!((hi - nhi).abs() <= 1e-12 * hi.max(1.0));
        let g2 = gamma * gamma;
        let m = Mat::from_rows(&[
            vec![0.25 * g2 * (1.0 - lambda), 0.25 * gamma],
            vec![0.25 * gamma, 0.5],
        ]).unwrap();
        let jac = symmetric_eigen(&m).unwrap();
        prop_assert!((jac.min() - lo).abs() <= 1e-12 * hi.max(1.0));
        prop_assert!(lo > 0.0);
    }

    #[test]
    fn jacobi_reconstructs(entries in prop::collection::vec(-3.0f64..3.0, 21)) {
        let a = symmetric(6, &entries);
        let e = symmetric_eigen(&a).unwrap();
        let rebuilt = e.vectors.matmul(&Mat::diag(&e.values)).matmul(&e.vectors.transpose());
        prop_assert!(rebuilt.sub(&a).max_abs() < 1e-10 * a.max_abs().max(1.0));
        let ortho = e.vectors.transpose().matmul(&e.vectors).sub(&Mat::identity(6));
        prop_assert!(ortho.max_abs() < 1e-10);
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn lyapunov_residual_is_small(entries in prop::collection::vec(-1.0f64..1.0, 6), gamma in 0.5f64..4.0, lambda in 0.01f64..0.25) {
        let q = spd(3, &entries);
        let b = drift_matrix(&q, gamma);
        let c = corrector_source(&q, gamma, lambda);
        let sol = solve_lyapunov(&b, &c).unwrap();
        prop_assert!(sol.k.asymmetry() < 1e-12 * sol.k.max_abs().max(1.0));
        prop_assert!(lyapunov_residual(&b, &sol.k, &c) <= 1e-10 * c.frobenius().max(1.0));
    }
}
