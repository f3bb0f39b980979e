//! One UE's Type I feedback, the coarse estimate it implies and the Type II
//! surrogate, with their principal angles to the true channel.

use robust_bf::channel::{generate_channel_set, ChannelConfig};
use robust_bf::feedback::{
    build_type1_codebook, build_type2_basis, build_virtual_antenna_matrix, coarse_estimate, compute_feedback,
    type2_estimate, Type2Params,
};
use robust_bf::metrics::principal_angle;

fn main() -> robust_bf::Result<()> {
    let data = generate_channel_set(&ChannelConfig {
        n_snapshots: 20,
        ..ChannelConfig::desk()
    })?;
    let q = build_virtual_antenna_matrix(data.n_antennas(), 8)?;
    let cb = build_type1_codebook(8, 4)?;
    let basis = build_type2_basis(8)?;
    for t in 0..5 {
        let h = &data.get(0, t).h;
        let fb = compute_feedback(h, &q, &cb, 0, t)?;
        let coarse = coarse_estimate(&fb, &q, &cb)?;
        let fine = type2_estimate(h, &q, &basis, &Type2Params::default())?;
        println!(
            "t={t} pmi={:2} cqi={:7.3} angle type I {:5.1} deg, type II {:5.1} deg",
            fb.pmi,
            fb.cqi,
            principal_angle(h, &coarse)?,
            principal_angle(h, &fine)?
        );
    }
    Ok(())
}
