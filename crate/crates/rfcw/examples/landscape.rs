//! Free-energy landscape of one field realization: critical points, curvatures
//! and the barrier between the wells.
//!
//! `cargo run --example landscape -- 400 1.5`

use rfcw::landscape::{grid_value, Landscape1D};
use rfcw::model::{stratified_field, FieldDistribution, SystemParams};

fn main() -> rfcw::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let beta: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1.5);

    let field = stratified_field(&FieldDistribution::TwoValued { eps: 0.2, p: 0.45 }, n)?;
    let land = Landscape1D::new(&field, SystemParams::new(n, beta)?);

    println!("N = {n}, beta = {beta}, mean field {:.4}", field.mean());
    for cp in land.critical_points()? {
        println!(
            "{:?} at m* = {:+.6}: F = {:+.6}, a = {:+.4}, chi = {:.4}",
            cp.kind, cp.m_star, cp.f_value, cp.curvature_a, cp.susceptibility
        );
    }
    let b = land.well_to_well()?;
    println!(
        "barrier {:+.4} -> {:+.4} over saddle {:+.4}: delta F = {:.6}, beta N delta F = {:.2}",
        b.start.m_star,
        b.deeper_set[0].m_star,
        b.saddle.m_star,
        b.delta_f,
        beta * n as f64 * b.delta_f
    );

    // coarse table, every 20th grid point
    let grid: Vec<f64> = (1..n).step_by(20).map(|k| grid_value(k, n)).collect();
    land.write_csv(&grid, std::io::stdout().lock())?;
    Ok(())
}
