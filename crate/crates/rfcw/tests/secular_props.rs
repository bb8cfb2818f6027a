use proptest::prelude::*;
use rfcw::meso::{dense_eigenvalues, hessian, hessian_det, secular_solution};

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn secular_roots_and_eigenpair(
        pairs in prop::collection::vec((0.2f64..8.0, 0.02f64..1.0), 1..9)
    ) {
        let (lambda, r): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let n = lambda.len();
        let sec = secular_solution(&lambda, &r);
        let dense = dense_eigenvalues(&lambda, &r);
        prop_assert_eq!(sec.gamma.len(), n);
        for (a, b) in sec.gamma.iter().zip(&dense) {
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
        prop_assert!(sec.gamma.windows(2).all(|w| w[0] <= w[1]));

        // A v_check = gamma_1 v with (v_check, v) = 1
        let a = hessian(&lambda);
        let pairing: f64 = sec.v.iter().zip(&sec.v_check).map(|(x, y)| x * y).sum();
        prop_assert!((pairing - 1.0).abs() < 1e-10);
        for i in 0..n {
            let av: f64 = (0..n).map(|j| a[(i, j)] * sec.v_check[j]).sum();
            prop_assert!((av - sec.gamma[0] * sec.v[i]).abs() < 1e-8 * (1.0 + sec.v[i].abs()));
        }

        let det = a.determinant();
        prop_assert!((hessian_det(&lambda) - det).abs() <= 1e-10 * det.abs().max(1e-300));
        let negative = sec.gamma.iter().filter(|&&g| g < 0.0).count();
        let condition = lambda.iter().map(|l| 1.0 / l).sum::<f64>() > 1.0;
        prop_assert_eq!(negative, condition as usize);
    }
}
