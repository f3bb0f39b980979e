//! WMMSE against zero forcing with perfect CSI across transmit powers.

use robust_bf::beamforming::{ezf, sum_rate, wmmse, SolverOptions};
use robust_bf::channel::{generate_channel_set, ChannelConfig};

fn main() -> robust_bf::Result<()> {
    let data = generate_channel_set(&ChannelConfig {
        n_snapshots: 1,
        ..ChannelConfig::desk()
    })?;
    let h = data.at_time(0);
    let opts = SolverOptions::with_noise(h.len(), 1.0);
    println!("power  wmmse   ezf   (nats)");
    for p in [0.1, 1.0, 10.0, 100.0] {
        let w = wmmse(&h, p, &opts)?;
        let z = sum_rate(&h, &ezf(&h, p)?, &opts.sigma)?;
        println!("{p:6.1} {:6.3} {z:6.3}  ({} iterations)", w.sum_rate(), w.trace.len() - 1);
    }
    Ok(())
}
