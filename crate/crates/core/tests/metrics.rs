use hfhr::metrics::{accuracy, log_loss, mse, w2_assignment, w2_exact_1d, w2_sliced, SampleCloud};
use hfhr::Mat;
use proptest::prelude::*;

fn cloud(n: usize, d: usize, v: &[f64]) -> SampleCloud {
    SampleCloud::new(Mat::from_vec(n, d, v[..n * d].to_vec()).unwrap()).unwrap()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Minimum over all n! matchings.
fn brute_force_w2(a: &SampleCloud, b: &SampleCloud) -> f64 {
    fn search(a: &SampleCloud, b: &SampleCloud, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == a.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                search(a, b, row + 1, used, acc + sq_dist(a.point(row), b.point(j)), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    search(a, b, 0, &mut vec![false; b.len()], 0.0, &mut best);
    (best / a.len() as f64).sqrt()
}

#[test]
fn assignment_of_a_shift_is_the_shift() {
    let v = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 3.0, -2.0];
    let shifted: Vec<f64> = v.chunks(2).flat_map(|p| [p[0] + 0.3, p[1] - 0.4]).collect();
    let w = w2_assignment(&cloud(4, 2, &v), &cloud(4, 2, &shifted)).unwrap();
    assert!((w - 0.5).abs() < 1e-12);
}

#[test]
fn metrics_on_hand_examples() {
    let x = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert!((mse(&x, &[1.0, 3.0], &[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-15);
    assert_eq!(accuracy(&[true, false, true, true], &[true, true, true, false]).unwrap(), 0.5);
    let ll = log_loss(&[0.5, 0.5], &[true, false]).unwrap();
    assert!((ll - std::f64::consts::LN_2).abs() < 1e-15);
    assert!(log_loss(&[1.0], &[true]).is_err());
}

#[test]
fn size_mismatches_are_errors() {
    let a = cloud(3, 2, &[0.0; 6]);
    let b = cloud(2, 2, &[0.0; 4]);
    assert!(w2_assignment(&a, &b).is_err());
    assert!(w2_sliced(&a, &cloud(3, 1, &[0.0; 3]), 4, 0).is_err());
    assert!(w2_exact_1d(&a, &b).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn assignment_matches_brute_force(n in 3usize..=6, v in prop::collection::vec(-4.0f64..4.0, 24)) {
        let a = cloud(n, 2, &v[..12]);
        let b = cloud(n, 2, &v[12..]);
        let want = brute_force_w2(&a, &b);
        prop_assert!((w2_assignment(&a, &b).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn one_dimensional_sort_is_optimal(v in prop::collection::vec(-10.0f64..10.0, 2..40)) {
        let n = v.len() / 2;
        prop_assume!(n >= 1);
        let a = SampleCloud::from_values(&v[..n]).unwrap();
        let b = SampleCloud::from_values(&v[n..2 * n]).unwrap();
        let exact = w2_exact_1d(&a, &b).unwrap();
        prop_assert!((exact - w2_assignment(&a, &b).unwrap()).abs() < 1e-12 * (1.0 + exact));
    }

    #[test]
    fn assignment_is_a_metric(v in prop::collection::vec(-5.0f64..5.0, 30)) {
        let (a, b, c) = (cloud(5, 2, &v[..10]), cloud(5, 2, &v[10..20]), cloud(5, 2, &v[20..]));
        let ab = w2_assignment(&a, &b).unwrap();
        prop_assert!((ab - w2_assignment(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(w2_assignment(&a, &a).unwrap() < 1e-12);
        let (ac, cb) = (w2_assignment(&a, &c).unwrap(), w2_assignment(&c, &b).unwrap());
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    // projections are 1-Lipschitz, so each sliced term is dominated by the coupling cost
    #[test]
    fn sliced_never_exceeds_assignment(v in prop::collection::vec(-5.0f64..5.0, 48), seed in 0u64..1000) {
        let a = cloud(8, 3, &v[..24]);
        let b = cloud(8, 3, &v[24..]);
        prop_assert!(w2_sliced(&a, &b, 32, seed).unwrap() <= w2_assignment(&a, &b).unwrap() + 1e-12);
    }
}
