//! Simulates a small channel set and prints per-UE power and the lag-1
//! correlation of the first antenna.

use robust_bf::channel::{generate_channel_set, ChannelConfig};

fn main() -> robust_bf::Result<()> {
    let cfg = ChannelConfig {
        n_snapshots: 500,
        rng_seed: 1,
        ..ChannelConfig::desk()
    };
    let data = generate_channel_set(&cfg)?;
    for ue in 0..data.n_ues() {
        let series = data.ue_series(ue);
        let power = series.iter().map(|s| s.h.norm_squared()).sum::<f64>() / (series.len() * data.n_antennas()) as f64;
        let lag1 = series
            .windows(2)
            .map(|w| (w[1].h[0] * w[0].h[0].conj()).re)
            .sum::<f64>()
            / (series.len() - 1) as f64;
        println!("ue {ue}: power/antenna {power:.3}, lag-1 corr {lag1:.3}");
    }
    Ok(())
}
