//! Closed-form sharp asymptotics: the prefactor gamma_bar_1, the capacity, the
//! mean transition time and the naive one-dimensional approximation.
//!
//! `cargo run --example predict`

use rfcw::kramers::{gamma_bar, gamma_bar_variant, predict, ExpectationMode};
use rfcw::landscape::Landscape1D;
use rfcw::model::{stratified_field, FieldDistribution, SystemParams};

fn main() -> rfcw::Result<()> {
    let dist = FieldDistribution::TwoValued { eps: 0.2, p: 0.45 };
    for n in [200, 800, 3200] {
        let params = SystemParams::new(n, 1.5)?;
        let land = Landscape1D::new(&stratified_field(&dist, n)?, params);
        let barrier = land.well_to_well()?;
        let g = gamma_bar(&land, barrier.saddle.m_star)?;
        let p = predict(&land, &barrier, ExpectationMode::Empirical)?;
        println!(
            "N={n:5}  gamma_bar1 {:+.6} (condition {:.4})  ln Z cap {:9.4}  ln E tau {:8.4}  naive {:8.4}  ratio {:.4}",
            g.gamma_bar1,
            g.condition,
            p.log_zcap,
            p.log_mean_time,
            p.log_naive_mean_time,
            (p.log_mean_time - p.log_naive_mean_time).exp()
        );
    }

    // the law of the field instead of a realization
    let params = SystemParams::new(1000, 1.5)?;
    let land = Landscape1D::analytic(&dist, params);
    let barrier = land.well_to_well()?;
    let p = predict(&land, &barrier, ExpectationMode::Analytic)?;
    println!(
        "analytic: z* = {:+.6}, a(z*) = {:+.4}, gamma_bar1 = {:+.6}, variant = {:+.6}",
        p.zstar,
        p.a_zstar,
        p.gamma_bar1,
        gamma_bar_variant(&land, p.zstar)?
    );
    println!("{}", serde_json::to_string_pretty(&p)?);
    Ok(())
}
