//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported, not hidden: the process exits non-zero only when
//! a criterion cannot be evaluated at all, or when `RFCW_ACCEPTANCE_STRICT=1` is set
//! and any criterion fails.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfcw::glauber::{self, MicroSystem, SimSpec, Source, Start};
use rfcw::interface::{aitken, exact_solution, naive_chain_time, sweep_row, Problem, RunConfig, Sampling, SweepRow};
use rfcw::kramers::gamma_bar;
use rfcw::landscape::Landscape1D;
use rfcw::meso::{
    build_partition, dense_eigenvalues, hessian, hessian_det, lumped_chain, meso_saddle, secular_solution, LevelSets,
};
use rfcw::model::{microscopic_chain, stratified_field, FieldDistribution, SystemParams};
use rfcw::potential::{
    bk_lower_bound, dirichlet_upper_bound, harmonic_flow, mean_hitting_time, solve_potential, solve_potential_with,
    validate_flow, BkMode, FlowEdge, SolveOptions, UnitFlow,
};
use rfcw::saddleflow::{build_saddle_flow, harmonic_residual, upper_bound_via_g, FlowOptions};

use common::{first_step_mean, random_chain, random_sets, rel};

struct Line {
    id: usize,
    pass: bool,
}

fn report(id: usize, pass: bool, text: String, t: Instant) -> Line {
    let text = format!("{text} [{:.1}s]", t.elapsed().as_secs_f64());
    println!("criterion {id}: {} {text}", if pass { "PASS" } else { "FAIL" });
    Line { id, pass }
}

fn two_valued() -> FieldDistribution {
    FieldDistribution::TwoValued { eps: 0.2, p: 0.45 }
}

/// Flow mixing the harmonic flow with a single path along which `h` decreases.
fn distorted_flow(
    chain: &rfcw::potential::ReversibleChain,
    sol: &rfcw::potential::PotentialSolution,
    harmonic: &UnitFlow,
) -> Option<UnitFlow> {
    let a = (0..chain.n_states()).find(|&x| sol.in_a[x] && chain.neighbors(x).iter().any(|&(y, _)| !sol.in_a[y]))?;
    let mut path = Vec::new();
    let mut x = a;
    while !sol.in_b[x] {
        let &(y, e) = chain
            .neighbors(x)
            .iter()
            .filter(|&&(y, _)| sol.grad_sign(x, y) > 0.0 && !sol.in_a[y])
            .min_by(|p, q| sol.log_h[p.0].total_cmp(&sol.log_h[q.0]).then(sol.log_g[q.0].total_cmp(&sol.log_g[p.0])))?;
        path.push(FlowEdge { from: x, to: y, edge: e, value: 0.5 });
        x = y;
    }
    let mut edges: Vec<FlowEdge> = harmonic.scaled(0.5).edges;
    for pe in path {
        match edges.iter_mut().find(|fe| fe.edge == pe.edge) {
            Some(fe) => fe.value += pe.value,
            None => edges.push(pe),
        }
    }
    Some(UnitFlow { edges })
}

fn criterion1() -> Line {
    let t = Instant::now();
    let (mut worst_a, mut worst_b, mut worst_c) = (0.0f64, 0.0f64, 0.0f64);
    let mut sandwich_ok = true;
    let mut pairs = 0usize;
    for i in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
        let n = rng.random_range(3..=200usize);
        let chain = random_chain(n, n / 2, 1000 + i);
        let (a, b) = random_sets(n, 3, 3, 1000 + i);
        let sol = solve_potential(&chain, &a, &b).unwrap();
        worst_a = worst_a.max(rel(sol.log_cap_equilibrium.exp(), sol.log_cap_dirichlet.exp()));
        let hf = harmonic_flow(&chain, &sol);
        let bk = bk_lower_bound(&chain, &hf, &a, &b, BkMode::ExactEnumeration).unwrap();
        worst_b = worst_b.max(rel(bk.log_value.exp(), sol.cap()));
        worst_c = worst_c.max(rel(mean_hitting_time(&chain, &sol).mean, first_step_mean(&chain, &sol, &b)));
        // further pairs: a distorted flow and powers of h as test functions
        if let Some(f) = distorted_flow(&chain, &sol, &hf) {
            if validate_flow(&chain, &f, &a, &b).is_ok() {
                let lo = bk_lower_bound(&chain, &f, &a, &b, BkMode::MonteCarlo { paths: 2000, seed: i }).unwrap();
                let slack = 3.0 * lo.rel_stderr.unwrap_or(0.0);
                for p in [0.5, 2.0] {
                    let u: Vec<f64> = (0..n).map(|x| sol.h(x).powf(p)).collect();
                    let up = dirichlet_upper_bound(&chain, &u, &a, &b).unwrap();
                    sandwich_ok &= lo.log_value <= sol.log_cap + slack + 1e-12 && sol.log_cap <= up + 1e-12;
                    pairs += 1;
                }
            }
        }
    }
    let pass = worst_a <= 1e-10 && worst_b <= 1e-9 && worst_c <= 1e-8 && sandwich_ok && pairs > 0;
    report(
        1,
        pass,
        format!(
            "potential identities on 200 random chains: cap vs Dirichlet {worst_a:.2e} (tol 1e-10), harmonic BK {worst_b:.2e} (tol 1e-9), \
             mean time vs first-step {worst_c:.2e} (tol 1e-8), sandwich on {pairs} flow/test-function pairs {}",
            if sandwich_ok { "holds" } else { "violated" }
        ),
        t,
    )
}

fn criterion2() -> Line {
    let t = Instant::now();
    let n = 12;
    let field = stratified_field(&FieldDistribution::TwoValued { eps: 0.2, p: 0.5 }, n).unwrap();
    let params = SystemParams::new(n, 1.5).unwrap();
    let land = Landscape1D::new(&field, params);
    let barrier = land.well_to_well().unwrap();
    let part = build_partition(&field, 2).unwrap();
    let lc = lumped_chain(&part, &params).unwrap();
    let sets = LevelSets::from_barrier(&barrier, n).unwrap();
    let (a, b, _) = sets.split(&lc.levels());
    let lsol = solve_potential(&lc.chain, &a, &b).unwrap();
    let ltime = mean_hitting_time(&lc.chain, &lsol).mean;
    let micro = microscopic_chain(&field, &params).unwrap();
    let levels: Vec<usize> = (0..micro.n_states()).map(|c: usize| c.count_ones() as usize).collect();
    let (ma, mb, side) = sets.split(&levels);
    let opts = SolveOptions { tol: 1e-14, dense_limit: 5000, ..SolveOptions::with_side(side) };
    let msol = solve_potential_with(&micro, &ma, &mb, &opts).unwrap();
    let mtime = mean_hitting_time(&micro, &msol).mean;
    let (dc, dt) = (rel(lsol.cap(), msol.cap()), rel(ltime, mtime));
    report(
        2,
        dc <= 1e-10 && dt <= 1e-10 && part.is_exact(),
        format!("lumping at N=12, n=2: capacity rel. diff {dc:.2e}, mean time rel. diff {dt:.2e} (tol 1e-10)"),
        t,
    )
}

fn criterion3() -> Line {
    let t = Instant::now();
    // lumped n = 1, h = 0, beta = 1.25, N = 100, exact nu start
    let cfg = RunConfig {
        n: 100,
        beta: 1.25,
        field: FieldDistribution::Constant { c: 0.0 },
        sampling: Sampling::Stratified,
        blocks: 1,
        ..RunConfig::default()
    };
    let p = Problem::new(&cfg).unwrap();
    let ex = exact_solution(&cfg, &p).unwrap();
    let mut target = vec![false; ex.lumped.n_states()];
    ex.b.iter().for_each(|&x| target[x] = true);
    let spec = SimSpec {
        source: Source::Lumped(ex.lumped.chain.clone()),
        start: Start::Law(ex.time.nu.clone()),
        target,
        replicas: 10_000,
        seed: 20,
        max_steps: glauber::DEFAULT_MAX_STEPS,
    };
    let est = glauber::estimate_mean_time(&spec).unwrap();
    let z1 = (est.mean - ex.time.mean) / est.stderr;
    // microscopic N = 12, block-constant field
    let cfg = RunConfig {
        n: 12,
        beta: 1.5,
        field: FieldDistribution::TwoValued { eps: 0.2, p: 0.5 },
        sampling: Sampling::Stratified,
        blocks: 2,
        ..RunConfig::default()
    };
    let p = Problem::new(&cfg).unwrap();
    let ex2 = exact_solution(&cfg, &p).unwrap();
    let mut target = vec![false; ex2.lumped.n_states()];
    ex2.b.iter().for_each(|&x| target[x] = true);
    let spec = SimSpec {
        source: Source::Microscopic(MicroSystem::new(p.field.clone(), p.params, &p.partition).unwrap()),
        start: Start::Law(ex2.time.nu.clone()),
        target,
        replicas: 10_000,
        seed: 21,
        max_steps: glauber::DEFAULT_MAX_STEPS,
    };
    let est2 = glauber::estimate_mean_time(&spec).unwrap();
    let z2 = (est2.mean - ex2.time.mean) / est2.stderr;
    report(
        3,
        z1.abs() <= 3.0 && z2.abs() <= 3.0 && est.usable && est2.usable,
        format!(
            "Monte Carlo R=10^4: lumped N=100 {:.1} +- {:.1} vs exact {:.1} ({z1:+.2} stderr); microscopic N=12 {:.3} +- {:.3} vs exact {:.3} ({z2:+.2} stderr)",
            est.mean, est.stderr, ex.time.mean, est2.mean, est2.stderr, ex2.time.mean
        ),
        t,
    )
}

fn sweep(field: FieldDistribution, blocks: usize, beta: f64, sizes: &[usize]) -> Vec<SweepRow> {
    sizes
        .iter()
        .map(|&n| {
            let cfg = RunConfig { n, beta, field: field.clone(), sampling: Sampling::Stratified, blocks, ..RunConfig::default() };
            sweep_row(&cfg).unwrap()
        })
        .collect()
}

/// Convergence checks on a doubling sequence: decreasing increments and a Cauchy
/// step below 5% at the largest size. Returns (ok, limit).
fn converges(x: &[f64]) -> (bool, f64) {
    let d: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let decreasing = d.windows(2).all(|w| w[1] < w[0]);
    let cauchy = d.last().unwrap() / x.last().unwrap().abs() < 0.05;
    (decreasing && cauchy, aitken(x).unwrap_or(*x.last().unwrap()))
}

fn criterion4() -> Line {
    let t = Instant::now();
    let sizes = [100, 200, 400, 800, 1600];
    let mut ok = true;
    let mut limits = Vec::new();
    let mut limits_t = Vec::new();
    let mut detail = Vec::new();
    for (name, field, blocks) in [("n=1 h=0", FieldDistribution::Constant { c: 0.0 }, 1), ("n=2 two_valued", two_valued(), 2)] {
        for beta in [1.5, 2.0] {
            let rows = sweep(field.clone(), blocks, beta, &sizes);
            let k: Vec<f64> = rows.iter().map(|r| r.kappa).collect();
            let kt: Vec<f64> = rows.iter().map(|r| r.kappa_time).collect();
            // increments are checked on the sizes of the isolation sweep, N >= 200
            let (c1, l1) = converges(&k[1..]);
            let (c2, l2) = converges(&kt[1..]);
            ok &= c1 && c2;
            limits.push(l1);
            limits_t.push(l2);
            let ks: Vec<String> = k.iter().map(|x| format!("{x:.4}")).collect();
            let kts: Vec<String> = kt.iter().map(|x| format!("{x:.4}")).collect();
            println!("    {name} beta={beta}: kappa {} -> {l1:.4} ({}); kappa_T {} -> {l2:.4} ({})",
                ks.join(" "), if c1 { "converging" } else { "not converging" }, kts.join(" "), if c2 { "converging" } else { "not converging" });
            detail.push(format!("{name} b={beta}: {l1:.3}/{l2:.4}"));
        }
    }
    let spread = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) / v.iter().cloned().fold(f64::MAX, f64::min) - 1.0;
    let (s1, s2) = (spread(&limits), spread(&limits_t));
    let fitted = limits.iter().sum::<f64>() / limits.len() as f64;
    let fitted_t = limits_t.iter().sum::<f64>() / limits_t.len() as f64;
    report(
        4,
        ok && s1 < 0.05 && s2 < 0.05,
        format!(
            "prefactor convergence (N=100..1600, increments from N=200): fitted capacity constant {fitted:.4} (spread {:.2}%), mean-time constant {fitted_t:.4} (spread {:.2}%); limits {}",
            100.0 * s1,
            100.0 * s2,
            detail.join(", ")
        ),
        t,
    )
}

fn criterion5() -> Line {
    let t = Instant::now();
    let mut ratios = Vec::new();
    let mut target = 0.0;
    let mut corrected = Vec::new();
    for n in [200, 400, 800, 1600] {
        let cfg = RunConfig { n, beta: 1.5, field: two_valued(), sampling: Sampling::Stratified, blocks: 2, ..RunConfig::default() };
        let p = Problem::new(&cfg).unwrap();
        let ex = exact_solution(&cfg, &p).unwrap();
        let naive = naive_chain_time(&cfg, &ex).unwrap();
        let z = p.barrier.saddle;
        let g = gamma_bar(&p.land, z.m_star).unwrap().gamma_bar1;
        target = z.curvature_a.abs() / g.abs();
        let saddle = meso_saddle(z.m_star, &p.partition, 1.5).unwrap();
        let rate: f64 = saddle.r.iter().sum();
        let ratio = (ex.time.log_mean - naive.log_mean).exp();
        corrected.push(ratio / (rate * target));
        ratios.push(ratio);
    }
    let (conv, _) = converges(&ratios);
    let last = *ratios.last().unwrap();
    let dev = (last / target - 1.0).abs();
    let rs: Vec<String> = ratios.iter().map(|x| format!("{x:.4}")).collect();
    let cs: Vec<String> = corrected.iter().map(|x| format!("{x:.4}")).collect();
    report(
        5,
        conv && dev < 0.05,
        format!(
            "2D/naive mean-time ratio {} vs |a|/|gamma_bar1| = {target:.4} (deviation {:.1}%, tol 5%); \
             ratio over (sum_l r_l)|a|/|gamma_bar1|: {}",
            rs.join(" "),
            100.0 * dev,
            cs.join(" ")
        ),
        t,
    )
}

fn criterion6() -> Line {
    let t = Instant::now();
    let mut ratios = Vec::new();
    let mut sandwich = true;
    for n in [100, 200, 400] {
        let field = stratified_field(&two_valued(), n).unwrap();
        let params = SystemParams::new(n, 1.5).unwrap();
        let land = Landscape1D::new(&field, params);
        let b = land.well_to_well().unwrap();
        let part = build_partition(&field, 2).unwrap();
        let lc = lumped_chain(&part, &params).unwrap();
        let sets = LevelSets::from_barrier(&b, n).unwrap();
        let (a, bb, side) = sets.split(&lc.levels());
        let sol = solve_potential_with(&lc.chain, &a, &bb, &SolveOptions::with_side(side)).unwrap();
        let s = meso_saddle(b.saddle.m_star, &part, 1.5).unwrap();
        let flow = build_saddle_flow(&s, &lc, &sets, &FlowOptions::default()).unwrap();
        sandwich &= validate_flow(&lc.chain, &flow.flow, &a, &bb).is_ok();
        let lo = bk_lower_bound(&lc.chain, &flow.flow, &a, &bb, BkMode::MonteCarlo { paths: 20_000, seed: 6 }).unwrap();
        let up = upper_bound_via_g(&s, &lc, &sets, &land, None).unwrap();
        sandwich &= lo.log_value <= sol.log_cap && sol.log_cap <= up.log_phi;
        ratios.push((up.log_phi - lo.log_value).exp());
    }
    let monotone = ratios.windows(2).all(|w| w[1] < w[0]);
    let rs: Vec<String> = ratios.iter().map(|x| format!("{x:.4}")).collect();
    report(
        6,
        sandwich && monotone && ratios[2] <= 1.5,
        format!(
            "saddle sandwich BK <= cap <= Phi(g~) {} for N=100,200,400; upper/lower {} (tol 1.5 at N=400, decreasing)",
            if sandwich { "holds" } else { "violated" },
            rs.join(" ")
        ),
        t,
    )
}

fn criterion7() -> Line {
    let t = Instant::now();
    let n = 400;
    let mut factors = Vec::new();
    for (field, blocks, beta) in [(FieldDistribution::Constant { c: 0.0 }, 1, 2.0), (two_valued(), 2, 1.5)] {
        let f = stratified_field(&field, n).unwrap();
        let land = Landscape1D::new(&f, SystemParams::new(n, beta).unwrap());
        let b = land.well_to_well().unwrap();
        let part = build_partition(&f, blocks).unwrap();
        let s = meso_saddle(b.saddle.m_star, &part, beta).unwrap();
        let sizes = part.sizes();
        let r1 = harmonic_residual(&s, beta, &sizes, 0.2).unwrap().max_ratio;
        let r2 = harmonic_residual(&s, beta, &sizes, 0.1).unwrap().max_ratio;
        factors.push(r1 / r2);
    }
    let ok = factors.iter().all(|f| (3.2..=4.8).contains(f));
    report(
        7,
        ok,
        format!(
            "residual reduction when halving rho 0.2 -> 0.1 at N=400: n=1 {:.3}, n=2 {:.3} (band [3.2, 4.8])",
            factors[0], factors[1]
        ),
        t,
    )
}

fn criterion8() -> Line {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let (mut worst_root, mut worst_det) = (0.0f64, 0.0f64);
    let mut sign_ok = true;
    let mut with_saddle = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..=8usize);
        let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..6.0)).collect();
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let sec = secular_solution(&lambda, &r);
        let dense = dense_eigenvalues(&lambda, &r);
        for (a, b) in sec.gamma.iter().zip(&dense) {
            worst_root = worst_root.max((a - b).abs() / b.abs().max(1.0));
        }
        let det = hessian(&lambda).determinant();
        worst_det = worst_det.max(rel(hessian_det(&lambda), det));
        let negative = sec.gamma.iter().filter(|&&g| g < 0.0).count();
        let condition = lambda.iter().map(|l| 1.0 / l).sum::<f64>() > 1.0;
        sign_ok &= (negative == 1) == condition && negative <= 1;
        with_saddle += condition as usize;
    }
    report(
        8,
        worst_root <= 1e-10 && worst_det <= 1e-10 && sign_ok,
        format!(
            "secular algebra on 100 instances ({with_saddle} with a saddle): roots vs dense {worst_root:.2e}, determinant {worst_det:.2e} (tol 1e-10), \
             one negative root iff condition: {}",
            if sign_ok { "yes" } else { "no" }
        ),
        t,
    )
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; they do not apply here.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let all: [(usize, fn() -> Line); 8] = [
        (1, criterion1),
        (2, criterion2),
        (3, criterion3),
        (4, criterion4),
        (5, criterion5),
        (6, criterion6),
        (7, criterion7),
        (8, criterion8),
    ];
    let mut lines = Vec::new();
    let mut broken = Vec::new();
    for (id, f) in all {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        match std::panic::catch_unwind(f) {
            Ok(l) => lines.push(l),
            Err(_) => {
                println!("criterion {id}: FAIL (could not be evaluated)");
                broken.push(id);
            }
        }
    }
    let passed = lines.iter().filter(|l| l.pass).count();
    let failed: Vec<String> = lines.iter().filter(|l| !l.pass).map(|l| l.id.to_string()).collect();
    println!("acceptance: {passed}/{} criteria passed{}", lines.len() + broken.len(), if failed.is_empty() {
        String::new()
    } else {
        format!("; failing: {}", failed.join(", "))
    });
    let strict = std::env::var("RFCW_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if !broken.is_empty() || (strict && !failed.is_empty()) {
        std::process::exit(1);
    }
}
