//! Potential theory on a small reversible chain: equilibrium potential, capacity
//! from both sides of the variational principles, and mean hitting times.
//!
//! `cargo run --example potential_theory`

use rfcw::potential::{
    bk_lower_bound, dirichlet_form, dirichlet_upper_bound, green_identity_check, harmonic_flow, mean_hitting_time,
    solve_potential, thomson_lower_bound, BkMode, ReversibleChain,
};

fn main() -> rfcw::Result<()> {
    // double well on a 4x4 grid: deep corner 0, shallow corner 15
    let side = 4;
    let idx = |i: usize, j: usize| i * side + j;
    let log_mu: Vec<f64> = (0..side * side)
        .map(|x| {
            let (i, j) = ((x / side) as f64, (x % side) as f64);
            let r0 = i + j;
            let r1 = 6.0 - i - j;
            (-0.8 * r0).max(-0.8 * r1 - 1.0)
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..side {
        for j in 0..side {
            if i + 1 < side {
                edges.push((idx(i, j), idx(i + 1, j)));
            }
            if j + 1 < side {
                edges.push((idx(i, j), idx(i, j + 1)));
            }
        }
    }
    // Metropolis conductances with proposal 1/4
    let log_c = edges.iter().map(|&(x, y)| log_mu[x].min(log_mu[y]) - 4f64.ln()).collect();
    let chain = ReversibleChain::new(log_mu, edges, log_c)?;

    let (a, b) = (vec![idx(3, 3)], vec![idx(0, 0)]);
    let sol = solve_potential(&chain, &a, &b)?;
    let h: Vec<f64> = (0..chain.n_states()).map(|x| sol.h(x)).collect();
    println!("equilibrium potential:");
    for row in h.chunks(side) {
        println!("  {}", row.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" "));
    }
    println!("ln cap: equilibrium measure {:.12}, Dirichlet form {:.12}", sol.log_cap_equilibrium, dirichlet_form(&chain, &h));

    let flow = harmonic_flow(&chain, &sol);
    let bk = bk_lower_bound(&chain, &flow, &a, &b, BkMode::ExactEnumeration)?;
    println!("harmonic flow: BK bound {:.12} over {} paths, Thomson bound {:.12}", bk.log_value, bk.paths, thomson_lower_bound(&chain, &flow));

    // a linear test function gives an upper bound
    let u: Vec<f64> = (0..chain.n_states()).map(|x| (x / side + x % side) as f64 / 6.0).collect();
    println!("linear test function: ln Phi(u) = {:.6} >= ln cap", dirichlet_upper_bound(&chain, &u, &a, &b)?);

    let t = mean_hitting_time(&chain, &sol);
    println!("E_nu tau_B = {:.6} from {:?}", t.mean, t.nu);
    println!("Green function identities: max rel. deviation {:.2e}", green_identity_check(&chain, a[0], &b)?);
    Ok(())
}
