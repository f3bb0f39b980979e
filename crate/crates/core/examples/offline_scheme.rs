//! The offline pipeline end to end with a narrow network. Writes CSVs to
//! `ROBUST_BF_OUT` (or ./out).

use robust_bf::harness::{run_offline_scheme, ExperimentConfig};

fn main() -> robust_bf::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.cvae.offline_width = Some(64);
    cfg.evaluation.n_trials = 10;
    let report = run_offline_scheme(&cfg)?;
    for (k, v) in &report.scalars {
        println!("{k:40} {v:.4}");
    }
    Ok(())
}
