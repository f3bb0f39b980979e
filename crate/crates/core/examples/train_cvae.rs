//! Trains a small offline CVAE on simulated feedback and compares refined
//! and coarse principal angles on held-out snapshots.

use robust_bf::cvae::{train_cvae, Architecture, TrainHyper, Variant};
use robust_bf::harness::{ExperimentConfig, Scenario};
use robust_bf::metrics::{median, principal_angle};

fn main() -> robust_bf::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.channel.n_snapshots = 1500;
    let scenario = Scenario::new(&cfg)?;
    let records = scenario.offline_records(0.0, 5)?;
    let hyper = TrainHyper {
        epochs: 5,
        lr_decay_epochs: vec![3],
        ..TrainHyper::default()
    };
    let (model, history) = train_cvae(&records, &Architecture::new(Variant::Offline, 64), &hyper)?;
    for (e, t) in history.epochs.iter().enumerate() {
        println!("epoch {e}: loss {:.4} (kl {:.4}, recon {:.4})", t.loss, t.kl, t.recon);
    }
    let test = scenario.test_observations()?;
    let mut coarse = Vec::new();
    let mut refined = Vec::new();
    for (i, o) in test.iter().enumerate() {
        coarse.push(principal_angle(&o.h, &o.h_hat)?);
        let x = model.generate_refined_samples(&o.h_hat, o.feedback.cqi, 1, i as u64)?;
        refined.push(principal_angle(&o.h, &x[0])?);
    }
    println!("median angle coarse {:.1} deg, refined {:.1} deg", median(&coarse)?, median(&refined)?);
    Ok(())
}
