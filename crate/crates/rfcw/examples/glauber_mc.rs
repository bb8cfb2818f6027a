//! Monte Carlo hitting times of the lumped chain and of the spin dynamics,
//! against the exact mean.
//!
//! `cargo run --release --example glauber_mc`

use rfcw::glauber::{estimate_mean_time, MicroSystem, SimSpec, Source, Start, DEFAULT_MAX_STEPS};
use rfcw::interface::{exact_solution, Problem, RunConfig};
use rfcw::model::FieldDistribution;

fn main() -> rfcw::Result<()> {
    let cfg = RunConfig { n: 40, beta: 1.5, field: FieldDistribution::TwoValued { eps: 0.2, p: 0.5 }, blocks: 2, ..RunConfig::default() };
    let p = Problem::new(&cfg)?;
    let ex = exact_solution(&cfg, &p)?;
    let mut target = vec![false; ex.lumped.n_states()];
    ex.b.iter().for_each(|&x| target[x] = true);
    println!("N={} n=2: exact E_nu tau_B = {:.2}", cfg.n, ex.time.mean);

    let sources = [
        ("lumped", Source::Lumped(ex.lumped.chain.clone())),
        ("spins", Source::Microscopic(MicroSystem::new(p.field.clone(), p.params, &p.partition)?)),
    ];
    for (name, source) in sources {
        for (start_name, start) in [("nu", Start::Law(ex.time.nu.clone())), ("gibbs", Start::GibbsRestricted(ex.a.clone()))] {
            let spec = SimSpec {
                source: source.clone(),
                start,
                target: target.clone(),
                replicas: 2000,
                seed: cfg.seed,
                max_steps: DEFAULT_MAX_STEPS,
            };
            let est = estimate_mean_time(&spec)?;
            println!(
                "{name:6} start {start_name:5}: {:10.2} +- {:7.2} ({:+.2} stderr from exact), {} truncated",
                est.mean,
                est.stderr,
                (est.mean - ex.time.mean) / est.stderr,
                est.truncated
            );
        }
    }
    Ok(())
}
