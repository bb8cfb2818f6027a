//! Exact capacity and mean transition time on the lumped block-magnetization
//! chain, checked against the full spin system at small N.
//!
//! `cargo run --release --example lumped_exact`

use rfcw::landscape::Landscape1D;
use rfcw::meso::{build_partition, lumped_chain, LevelSets};
use rfcw::model::{microscopic_chain, stratified_field, FieldDistribution, SystemParams};
use rfcw::potential::{mean_hitting_time, solve_potential_with, SolveOptions};

fn main() -> rfcw::Result<()> {
    let dist = FieldDistribution::TwoValued { eps: 0.2, p: 0.5 };

    let n = 12;
    let field = stratified_field(&dist, n)?;
    let params = SystemParams::new(n, 1.5)?;
    let barrier = Landscape1D::new(&field, params).well_to_well()?;
    let sets = LevelSets::from_barrier(&barrier, n)?;
    let part = build_partition(&field, 2)?;
    let lc = lumped_chain(&part, &params)?;
    let (a, b, side) = sets.split(&lc.levels());
    let lsol = solve_potential_with(&lc.chain, &a, &b, &SolveOptions::with_side(side))?;
    let ltime = mean_hitting_time(&lc.chain, &lsol);

    let micro = microscopic_chain(&field, &params)?;
    let levels: Vec<usize> = (0..micro.n_states()).map(|c: usize| c.count_ones() as usize).collect();
    let (ma, mb, mside) = sets.split(&levels);
    let msol = solve_potential_with(&micro, &ma, &mb, &SolveOptions { dense_limit: 5000, ..SolveOptions::with_side(mside) })?;
    let mtime = mean_hitting_time(&micro, &msol);
    println!("N={n}: {} lumped states vs {} spin configurations", lc.n_states(), micro.n_states());
    println!("  ln cap   lumped {:.14}  micro {:.14}", lsol.log_cap, msol.log_cap);
    println!("  E tau    lumped {:.10e}  micro {:.10e}", ltime.mean, mtime.mean);

    // larger systems, lumped only
    let dist = FieldDistribution::TwoValued { eps: 0.2, p: 0.45 };
    for n in [200, 400, 800] {
        let field = stratified_field(&dist, n)?;
        let params = SystemParams::new(n, 1.5)?;
        let barrier = Landscape1D::new(&field, params).well_to_well()?;
        let sets = LevelSets::from_barrier(&barrier, n)?;
        let lc = lumped_chain(&build_partition(&field, 2)?, &params)?;
        let (a, b, side) = sets.split(&lc.levels());
        let sol = solve_potential_with(&lc.chain, &a, &b, &SolveOptions::with_side(side))?;
        let t = mean_hitting_time(&lc.chain, &sol);
        println!(
            "N={n:4}: {:7} states, {:?} in {} iterations, ln Z cap {:.6}, ln E tau {:.6}",
            lc.n_states(),
            sol.method,
            sol.iterations,
            sol.log_cap,
            t.log_mean
        );
    }
    Ok(())
}
