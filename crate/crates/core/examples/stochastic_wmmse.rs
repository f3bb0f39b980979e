//! Stochastic WMMSE driven by noisy channel samples, scored on the truth.

use robust_bf::beamforming::{stochastic_wmmse, sum_rate, wmmse, SolverOptions};
use robust_bf::channel::{generate_channel_set, ChannelConfig};
use robust_bf::linalg::{complex_gaussian, CVector};
use robust_bf::rng::rng_from_seed;

fn main() -> robust_bf::Result<()> {
    let data = generate_channel_set(&ChannelConfig {
        n_snapshots: 1,
        ..ChannelConfig::desk()
    })?;
    let truth = data.at_time(0);
    let opts = SolverOptions::with_noise(truth.len(), 1.0);
    let mut rng = rng_from_seed(3);
    let samples: Vec<Vec<CVector>> = (0..200)
        .map(|_| truth.iter().map(|h| h + complex_gaussian(&mut rng, h.len(), 0.5)).collect())
        .collect();
    let res = stochastic_wmmse(samples, 1.0, &opts, None, Some(&truth))?;
    for row in res.trace.iter().step_by(40) {
        println!("sample {:3}: sum-rate {:.3}", row.iteration, row.sum_rate);
    }
    let perfect = wmmse(&truth, 1.0, &opts)?;
    println!("perfect-CSI WMMSE {:.3}", sum_rate(&truth, &perfect.v, &opts.sigma)?);
    Ok(())
}
