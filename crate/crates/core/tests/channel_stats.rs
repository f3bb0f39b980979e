//! Statistical properties of the simulated channels.

use robust_bf::channel::{generate_channel_set, ChannelConfig, JakesProcess};
use robust_bf::rng::rng_from_seed;

/// Power series of the Bessel function of the first kind, order zero.
fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..80 {
        term *= q / (k * k) as f64;
        sum += term;
    }
    sum
}

#[test]
fn bessel_oracle_sanity() {
    assert!((bessel_j0(0.0) - 1.0).abs() < 1e-15);
    assert!((bessel_j0(2.404_825_557_695_773)).abs() < 1e-12);
    assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-12);
}

#[test]
fn path_gain_autocorrelation_follows_j0() {
    let fd = 0.278;
    let n_proc = 400;
    let len = 2000;
    let mut rng = rng_from_seed(17);
    let procs: Vec<JakesProcess> = (0..n_proc).map(|_| JakesProcess::new(&mut rng, fd)).collect();
    for tau in 0..=5 {
        let mut acc = 0.0;
        let mut power = 0.0;
        for p in &procs {
            for t in 0..len {
                let a = p.sample(t as f64);
                acc += (p.sample((t + tau) as f64) * a.conj()).re;
                power += a.norm_sqr();
            }
        }
        let r = acc / power;
        let expected = bessel_j0(2.0 * std::f64::consts::PI * fd * tau as f64);
        assert!((r - expected).abs() <= 0.1, "tau {tau}: {r} vs J0 {expected}");
    }
}

#[test]
fn antenna_entries_have_j0_autocorrelation() {
    let cfg = ChannelConfig {
        n_snapshots: 2000,
        rng_seed: 5,
        ..ChannelConfig::desk()
    };
    let fd = cfg.normalized_doppler;
    let data = generate_channel_set(&cfg).unwrap();
    for tau in 0..=5 {
        let mut acc = 0.0;
        let mut power = 0.0;
        for ue in 0..data.n_ues() {
            let s = data.ue_series(ue);
            for t in 0..s.len() - tau {
                acc += s[t + tau].h.dotc(&s[t].h).re;
                power += s[t].h.norm_squared();
            }
        }
        let r = acc / power;
        let expected = bessel_j0(2.0 * std::f64::consts::PI * fd * tau as f64);
        assert!((r - expected).abs() <= 0.1, "tau {tau}: {r} vs J0 {expected}");
    }
}

#[test]
fn mean_power_per_antenna_is_unity() {
    for seed in 0..3 {
        let data = generate_channel_set(&ChannelConfig {
            rng_seed: seed,
            ..ChannelConfig::desk()
        })
        .unwrap();
        let p = data.snapshots.iter().map(|s| s.h.norm_squared()).sum::<f64>()
            / (data.snapshots.len() * data.n_antennas()) as f64;
        assert!((0.9..=1.1).contains(&p), "seed {seed}: {p}");
    }
}
