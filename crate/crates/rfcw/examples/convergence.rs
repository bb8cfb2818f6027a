//! Exact-over-formula ratios for capacity and mean time along a doubling sequence
//! of system sizes, with an Aitken estimate of the limit.
//!
//! `cargo run --release --example convergence`

use rfcw::interface::{aitken, sweep_row, RunConfig};
use rfcw::model::FieldDistribution;

fn main() -> rfcw::Result<()> {
    let cases = [("n=1, h=0", FieldDistribution::Constant { c: 0.0 }, 1), ("n=2, two-valued", FieldDistribution::TwoValued { eps: 0.2, p: 0.45 }, 2)];
    for (name, field, blocks) in cases {
        let mut k = Vec::new();
        let mut kt = Vec::new();
        println!("{name}, beta = 1.5");
        for n in [100, 200, 400, 800] {
            let row = sweep_row(&RunConfig { n, beta: 1.5, field: field.clone(), blocks, ..RunConfig::default() })?;
            println!("  N={n:4}  cap exact/formula {:.5}  time exact/formula {:.5}", row.kappa, row.kappa_time);
            k.push(row.kappa);
            kt.push(row.kappa_time);
        }
        println!("  limits: {:.4} and {:.4}", aitken(&k).unwrap_or(f64::NAN), aitken(&kt).unwrap_or(f64::NAN));
    }
    Ok(())
}
