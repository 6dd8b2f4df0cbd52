use approx::assert_abs_diff_eq;
use emergelex_core::metrics::{ari, kappa, mse, nmi, welch_t_one_sided, JointTable};
use proptest::prelude::*;

fn labels(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..k, n)
}

fn relabel(x: &[usize], perm: &[usize]) -> Vec<usize> {
    x.iter().map(|v| perm[*v]).collect()
}

proptest! {
    #[test]
    fn ari_is_label_permutation_invariant(
        (x, y) in (4usize..30).prop_flat_map(|n| (labels(n, 4), labels(n, 4))),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        prop_assume!(x.iter().any(|v| *v != x[0]) || y.iter().any(|v| *v != y[0]));
        let a = ari(&x, &y);
        let b = ari(&relabel(&x, &perm), &y);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn nmi_is_symmetric_and_bounded(counts in prop::collection::vec(prop::collection::vec(0.0f64..5.0, 4), 3)) {
        let t = match JointTable::from_counts(counts) {
            Ok(t) => t,
            Err(_) => return Ok(()),
        };
        if let Ok(v) = nmi(&t) {
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!((v - nmi(&t.transpose()).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn kappa_survives_consistent_relabeling(
        (x, y) in (5usize..40).prop_flat_map(|n| (labels(n, 5), labels(n, 5))),
        perm in Just(vec![0usize, 1, 2, 3, 4]).prop_shuffle(),
    ) {
        if let Ok(k) = kappa(&x, &y) {
            let k2 = kappa(&relabel(&x, &perm), &relabel(&y, &perm)).unwrap();
            prop_assert!((k.value - k2.value).abs() < 1e-12);
        }
    }

    #[test]
    fn mse_is_symmetric_and_quadratic(
        pairs in prop::collection::vec((prop::collection::vec(-3.0f64..3.0, 3), prop::collection::vec(-3.0f64..3.0, 3)), 1..10),
    ) {
        let (p, t): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let e = mse(&p, &t).unwrap();
        prop_assert!((e - mse(&t, &p).unwrap()).abs() < 1e-12);
        let p2: Vec<Vec<f64>> = p.iter().zip(&t).map(|(a, b)| a.iter().zip(b).map(|(x, y)| y + 2.0 * (x - y)).collect()).collect();
        prop_assert!((mse(&p2, &t).unwrap() - 4.0 * e).abs() < 1e-9 * (1.0 + e));
    }

    #[test]
    fn welch_flips_sign_when_samples_swap(
        a in prop::collection::vec(-5.0f64..5.0, 2..12),
        b in prop::collection::vec(-5.0f64..5.0, 2..12),
    ) {
        if let (Ok(x), Ok(y)) = (welch_t_one_sided(&a, &b), welch_t_one_sided(&b, &a)) {
            prop_assert!((x.t + y.t).abs() < 1e-12);
            prop_assert!((x.p + y.p - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn hand_values() {
    assert_abs_diff_eq!(ari(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap(), 4.0 / 7.0, epsilon = 1e-12);
    let t = JointTable::from_counts(vec![vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
    let i = 0.8 * (0.4f64 / 0.25).ln() + 0.2 * (0.1f64 / 0.25).ln();
    assert_abs_diff_eq!(nmi(&t).unwrap(), i / 2f64.ln(), epsilon = 1e-12);
    let w = welch_t_one_sided(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
    assert_abs_diff_eq!(w.t, 0.0);
    assert_abs_diff_eq!(w.p, 0.5, epsilon = 1e-12);
}
