//! Stochastic WMMSE on a stream of noisy channel samples against WMMSE on
//! their average.

use robust_bf::harness::{motivation_curves, ExperimentConfig};

fn main() -> robust_bf::Result<()> {
    let curves = motivation_curves(&ExperimentConfig::default())?;
    for (k, s) in curves.stochastic.iter().enumerate().filter(|(k, _)| k % 10 == 9) {
        println!("n={:3}: stochastic {s:.3}  sample-mean WMMSE {:.3}", k + 1, curves.wmmse);
    }
    match curves.crossing() {
        Some(n) => println!("stochastic WMMSE stays ahead from n={n}"),
        None => println!("no crossing"),
    }
    Ok(())
}
