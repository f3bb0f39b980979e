//! Per-UE CVAEs trained on Type II estimates, including the training-size
//! table.

use robust_bf::harness::{run_online_scheme, ExperimentConfig};

fn main() -> robust_bf::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.cvae.online_width = Some(64);
    cfg.evaluation.n_trials = 10;
    let report = run_online_scheme(&cfg)?;
    for (k, v) in &report.scalars {
        println!("{k:40} {v:.4}");
    }
    Ok(())
}
