//! Saddle Hessian and the rank-one secular equation for the eigenvalues of the
//! rate-weighted matrix, compared with a dense eigendecomposition.
//!
//! `cargo run --example secular`

use rfcw::kramers::gamma_bar;
use rfcw::landscape::Landscape1D;
use rfcw::meso::{build_partition, dense_eigenvalues, meso_saddle, secular_roots};
use rfcw::model::{stratified_field, FieldDistribution, SystemParams};

fn main() -> rfcw::Result<()> {
    let (n, beta) = (600, 1.5);
    let field = stratified_field(&FieldDistribution::Uniform { lo: -0.3, hi: 0.3 }, n)?;
    let land = Landscape1D::new(&field, SystemParams::new(n, beta)?);
    let z = land.well_to_well()?.saddle.m_star;
    println!("saddle of the 1D landscape at z* = {z:+.6}");
    println!("gamma_bar1 = {:+.8}", gamma_bar(&land, z)?.gamma_bar1);

    for blocks in [1, 2, 4, 8] {
        let part = build_partition(&field, blocks)?;
        let s = meso_saddle(z, &part, beta)?;
        let dense = dense_eigenvalues(&s.lambda_hat, &s.r);
        let poles: Vec<f64> = s.r.iter().zip(&s.lambda_hat).map(|(r, l)| r * l).collect();
        let roots = secular_roots(&poles, &s.r);
        let err = roots.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!(
            "n={blocks}: gamma_hat1 {:+.8}, det A {:+.4e}, condition {:.4}, max |secular - dense| {err:.1e}",
            s.gamma1(),
            s.det_a,
            s.condition
        );
    }
    Ok(())
}
