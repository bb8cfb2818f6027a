//! Driving the command layer from a configuration text, as the `rfcw` binary does.
//!
//! `cargo run --release --example config_run`

use rfcw::interface::{execute, write_outcome, Command, RunConfig};

const CONFIG: &str = "
[model]
N = 60
beta = 1.5
field = two_valued(0.2, 0.45)
seed = 3

[partition]
blocks = 2

[simulate]
replicas = 400
";

fn main() -> rfcw::Result<()> {
    let mut cfg = RunConfig::parse(CONFIG)?;
    cfg.out = std::env::temp_dir().join("rfcw-config-run");
    for cmd in [Command::Landscape, Command::Predict, Command::Exact, Command::Bounds, Command::Validate] {
        let t = std::time::Instant::now();
        let outcome = execute(cmd, &cfg)?;
        write_outcome(&cfg.out, &outcome, t.elapsed().as_secs_f64())?;
        let files: Vec<&str> = outcome.files.iter().map(|f| f.0.as_str()).collect();
        println!("{}: {:.2}s, extra files {files:?}", cmd.name(), t.elapsed().as_secs_f64());
    }
    let validate = std::fs::read_to_string(cfg.out.join("validate.json"))?;
    println!("{validate}");
    println!("normalized configuration:\n{}", cfg.to_text());
    Ok(())
}
