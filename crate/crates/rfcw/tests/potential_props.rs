mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfcw::potential::{
    bk_lower_bound, dirichlet_form, dirichlet_upper_bound, green_identity_check, harmonic_flow, mean_hitting_time,
    solve_potential, thomson_lower_bound, validate_flow_tol, BkMode,
};

use common::{first_step_mean, random_chain, random_sets, rel};

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn capacity_is_symmetric(n in 3usize..60, extra in 0usize..80, seed in any::<u64>()) {
        let ch = random_chain(n, extra, seed);
        let (a, b) = random_sets(n, 3, 3, seed);
        let ab = solve_potential(&ch, &a, &b).unwrap();
        let ba = solve_potential(&ch, &b, &a).unwrap();
        prop_assert!((ab.log_cap - ba.log_cap).abs() < 1e-9);
        // h_{A,B} + h_{B,A} = 1
        for x in 0..n {
            prop_assert!((ab.h(x) + ba.h(x) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn variational_sandwich(n in 3usize..50, extra in 0usize..60, seed in any::<u64>()) {
        let ch = random_chain(n, extra, seed);
        let (a, b) = random_sets(n, 2, 2, seed);
        let sol = solve_potential(&ch, &a, &b).unwrap();
        let flow = harmonic_flow(&ch, &sol);
        // conductances span many orders of magnitude; Kirchhoff holds to rounding of the solve
        prop_assert!(validate_flow_tol(&ch, &flow, &a, &b, 1e-9).is_ok());
        prop_assert!(thomson_lower_bound(&ch, &flow) <= sol.log_cap + 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..5 {
            // perturbed potential, clamped to the boundary values
            let u: Vec<f64> = (0..n)
                .map(|x| if sol.in_a[x] { 1.0 } else if sol.in_b[x] { 0.0 } else { (sol.h(x) + rng.random_range(-0.2..0.2)).clamp(0.0, 1.0) })
                .collect();
            prop_assert!(dirichlet_upper_bound(&ch, &u, &a, &b).unwrap() >= sol.log_cap - 1e-9);
        }
    }

    #[test]
    fn rayleigh_monotonicity(n in 3usize..40, extra in 0usize..40, seed in any::<u64>(), edge in any::<prop::sample::Index>(), bump in 0.01f64..2.0) {
        let ch = random_chain(n, extra, seed);
        let (a, b) = random_sets(n, 2, 2, seed);
        let before = solve_potential(&ch, &a, &b).unwrap().log_cap;
        let mut log_c = ch.log_conductances().to_vec();
        let e = edge.index(log_c.len());
        log_c[e] -= bump;
        let weaker = ch.with_conductances(log_c).unwrap();
        let after = solve_potential(&weaker, &a, &b).unwrap().log_cap;
        prop_assert!(after <= before + 1e-10);
    }
}

#[test]
fn harmonic_flow_bk_is_sharp() {
    for seed in 0..40 {
        let ch = random_chain(30, 25, seed);
        let (a, b) = random_sets(30, 2, 2, seed);
        let sol = solve_potential(&ch, &a, &b).unwrap();
        let flow = harmonic_flow(&ch, &sol);
        let bk = bk_lower_bound(&ch, &flow, &a, &b, BkMode::ExactEnumeration).unwrap();
        assert!((bk.log_value - sol.log_cap).abs() < 1e-9, "seed {seed}: {} vs {}", bk.log_value, sol.log_cap);
        let h: Vec<f64> = (0..30).map(|x| sol.h(x)).collect();
        assert!((dirichlet_form(&ch, &h) - sol.log_cap).abs() < 1e-10);
    }
}

#[test]
fn mean_time_matches_first_step_analysis() {
    for seed in 0..30 {
        let n = 20 + (seed as usize % 60);
        let ch = random_chain(n, n / 2, seed);
        let (a, b) = random_sets(n, 3, 3, seed);
        let sol = solve_potential(&ch, &a, &b).unwrap();
        let t = mean_hitting_time(&ch, &sol).mean;
        assert!(rel(t, first_step_mean(&ch, &sol, &b)) < 1e-8, "seed {seed}");
    }
}

#[test]
fn green_identities_on_a_hundred_states() {
    let ch = random_chain(100, 120, 42);
    for (a, b) in [(0, vec![99]), (5, vec![1, 2, 3]), (50, vec![0, 99])] {
        assert!(green_identity_check(&ch, a, &b).unwrap() < 1e-8);
    }
}
