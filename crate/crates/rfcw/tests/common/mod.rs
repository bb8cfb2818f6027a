#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfcw::potential::{PotentialSolution, ReversibleChain};

/// Random connected reversible chain with `n` states: a random tree plus extra
/// edges, measure spread over several orders of magnitude, rows substochastic.
pub fn random_chain(n: usize, extra: usize, seed: u64) -> ReversibleChain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_mu: Vec<f64> = (0..n).map(|_| rng.random_range(-6.0..6.0)).collect();
    let mut edges = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for x in 1..n {
        let y = rng.random_range(0..x);
        edges.push((y, x));
        seen.insert((y, x));
    }
    for _ in 0..extra {
        let x = rng.random_range(0..n);
        let y = rng.random_range(0..n);
        let (a, b) = (x.min(y), x.max(y));
        if a != b && seen.insert((a, b)) {
            edges.push((a, b));
        }
    }
    let mut deg = vec![0usize; n];
    for &(x, y) in &edges {
        deg[x] += 1;
        deg[y] += 1;
    }
    let log_c = edges
        .iter()
        .map(|&(x, y)| {
            let d = deg[x].max(deg[y]) as f64 + 1.0;
            log_mu[x].min(log_mu[y]) - d.ln() - rng.random_range(0.0..3.0)
        })
        .collect();
    ReversibleChain::new(log_mu, edges, log_c).unwrap()
}

/// Disjoint random sets `A` and `B` of sizes at most `ka` and `kb`.
pub fn random_sets(n: usize, ka: usize, kb: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut states: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let j = rng.random_range(i..n);
        states.swap(i, j);
    }
    let ka = rng.random_range(1..=ka.min(n / 2).max(1));
    let kb = rng.random_range(1..=kb.min(n - ka).max(1));
    (states[..ka].to_vec(), states[ka..ka + kb].to_vec())
}

/// Dense transition matrix including holding.
pub fn transition_matrix(chain: &ReversibleChain) -> DMatrix<f64> {
    let n = chain.n_states();
    let mut p = DMatrix::zeros(n, n);
    for x in 0..n {
        for &(y, e) in chain.neighbors(x) {
            p[(x, y)] += chain.transition(x, e);
        }
        p[(x, x)] += chain.holding(x);
    }
    p
}

/// `E_x tau_B` for all `x` by first-step analysis: `w = 1 + P w` off `B`.
pub fn first_step_times(chain: &ReversibleChain, b: &[usize]) -> Vec<f64> {
    let n = chain.n_states();
    let mut in_b = vec![false; n];
    b.iter().for_each(|&x| in_b[x] = true);
    let idx: Vec<usize> = (0..n).filter(|&x| !in_b[x]).collect();
    let mut pos = vec![usize::MAX; n];
    for (i, &x) in idx.iter().enumerate() {
        pos[x] = i;
    }
    let p = transition_matrix(chain);
    let m = idx.len();
    let mut a = DMatrix::<f64>::identity(m, m);
    for (i, &x) in idx.iter().enumerate() {
        for (j, &y) in idx.iter().enumerate() {
            a[(i, j)] -= p[(x, y)];
        }
    }
    let w = a.lu().solve(&DVector::from_element(m, 1.0)).expect("singular first-step system");
    (0..n).map(|x| if in_b[x] { 0.0 } else { w[pos[x]] }).collect()
}

/// `E_nu tau_B` with the last-exit law of the solution.
pub fn first_step_mean(chain: &ReversibleChain, sol: &PotentialSolution, b: &[usize]) -> f64 {
    let w = first_step_times(chain, b);
    let nu: Vec<(usize, f64)> =
        sol.log_equilibrium_measure(chain).into_iter().map(|(x, le)| (x, (le - sol.log_cap).exp())).collect();
    nu.iter().map(|&(x, p)| p * w[x]).sum()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}
