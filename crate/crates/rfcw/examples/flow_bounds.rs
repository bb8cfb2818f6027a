//! Two-sided capacity bounds at the saddle: a Berman-Konsowa lower bound from the
//! constructed unit flow and a Dirichlet upper bound from the Gaussian test function.
//!
//! `cargo run --release --example flow_bounds`

use rfcw::landscape::Landscape1D;
use rfcw::meso::{build_partition, lumped_chain, meso_saddle, LevelSets};
use rfcw::model::{stratified_field, FieldDistribution, SystemParams};
use rfcw::potential::{bk_lower_bound, solve_potential_with, thomson_lower_bound, validate_flow, BkMode, SolveOptions};
use rfcw::saddleflow::{build_saddle_flow, upper_bound_via_g, FlowOptions};

fn main() -> rfcw::Result<()> {
    let beta = 1.5;
    for n in [100, 200, 400] {
        let field = stratified_field(&FieldDistribution::TwoValued { eps: 0.2, p: 0.45 }, n)?;
        let params = SystemParams::new(n, beta)?;
        let land = Landscape1D::new(&field, params);
        let barrier = land.well_to_well()?;
        let part = build_partition(&field, 2)?;
        let lc = lumped_chain(&part, &params)?;
        let sets = LevelSets::from_barrier(&barrier, n)?;
        let (a, b, side) = sets.split(&lc.levels());
        let exact = solve_potential_with(&lc.chain, &a, &b, &SolveOptions::with_side(side))?;

        let saddle = meso_saddle(barrier.saddle.m_star, &part, beta)?;
        let flow = build_saddle_flow(&saddle, &lc, &sets, &FlowOptions::default())?;
        let valid = validate_flow(&lc.chain, &flow.flow, &a, &b).is_ok();
        let bk = bk_lower_bound(&lc.chain, &flow.flow, &a, &b, BkMode::MonteCarlo { paths: 20_000, seed: 7 })?;
        let up = upper_bound_via_g(&saddle, &lc, &sets, &land, None)?;
        println!(
            "N={n}: ln cap {:.5} in [{:.5}, {:.5}], upper/lower {:.4}; Thomson {:.5}; flow valid {valid}, clipped {:.1e}, closed form {:.5}",
            exact.log_cap,
            bk.log_value,
            up.log_phi,
            (up.log_phi - bk.log_value).exp(),
            thomson_lower_bound(&lc.chain, &flow.flow),
            flow.clipped_mass,
            up.log_closed_form
        );
    }
    Ok(())
}
