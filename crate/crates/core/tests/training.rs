use gnss_setnet::featurize::{AugmentConfig, FeatureOptions};
use gnss_setnet::geodesy::ned_rotation_at;
use gnss_setnet::nn::{
    infer_position, init_params, load_checkpoint, network_forward, sample_loss, save_checkpoint, train,
    Checkpoint, NetConfig, NetworkParams, TrainConfig, Trainer,
};
use gnss_setnet::featurize::featurize_epoch;
use gnss_setnet::sim::{nominal_constellation, simulate_dataset, DatasetConfig, SimNoiseConfig};
use gnss_setnet::{EcefPosition, MeasurementEpoch, Parallelism};

fn tiny_net() -> NetConfig {
    NetConfig {
        latent_dim: 16,
        n_heads: 2,
        n_encoder_layers: 1,
        n_decoder_layers: 1,
        ffn_hidden: 16,
        n_pool_seeds: 1,
    }
}

fn data(n_traces: usize) -> Vec<MeasurementEpoch> {
    let mut cfg = DatasetConfig::default();
    cfg.n_traces = n_traces;
    cfg.trajectory.duration = 29.0;
    simulate_dataset(&cfg, &SimNoiseConfig::default(), &nominal_constellation(6, 4), 12, Parallelism::Parallel).unwrap()
}

fn cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 16,
        seed: 5,
        adam: gnss_setnet::nn::AdamConfig {
            alpha: 3e-3,
            ..Default::default()
        },
        ..TrainConfig::default()
    }
}

#[test]
fn history_and_determinism() {
    let d = data(4);
    let (tr, va) = d.split_at(90);
    let a = train(tr, va, &tiny_net(), &cfg(3), Parallelism::Parallel).unwrap();
    let b = train(tr, va, &tiny_net(), &cfg(3), Parallelism::Sequential).unwrap();
    assert_eq!(a.history.len(), 3);
    assert!(a.history.iter().enumerate().all(|(i, r)| r.epoch == i && r.val_loss.is_some()));
    assert_eq!(a.params, b.params);
    assert_eq!(a.history, b.history);
    assert_eq!(a.adam.t, 3 * 90usize.div_ceil(16) as u64);

    let other = train(tr, va, &tiny_net(), &TrainConfig { seed: 6, ..cfg(3) }, Parallelism::Parallel).unwrap();
    assert_ne!(other.params, a.params);

    let no_val = train(tr, &[], &tiny_net(), &cfg(1), Parallelism::Parallel).unwrap();
    assert_eq!(no_val.history[0].val_loss, None);
}

#[test]
fn loss_trends_down() {
    let d = data(6);
    let (tr, va) = d.split_at(150);
    let out = train(tr, va, &tiny_net(), &cfg(30), Parallelism::Parallel).unwrap();
    let h: Vec<f64> = out.history.iter().map(|r| r.train_loss).collect();
    let first = h[..5].iter().sum::<f64>() / 5.0;
    let last = h[h.len() - 5..].iter().sum::<f64>() / 5.0;
    assert!(last < 0.8 * first, "first {first} last {last}");
    // box of half-width 15 m rotated into NED: per-axis variance 75 m^2
    assert!(first > 40.0 && last < 75.0, "first {first} last {last}");
}

#[test]
fn fixed_initialization_repeats_batches() {
    let d = data(2);
    let c = TrainConfig {
        shuffle: false,
        augment: AugmentConfig {
            regenerate_each_epoch: false,
            ..AugmentConfig::default()
        },
        ..cfg(2)
    };
    let mut t = Trainer::new(&d, &[], &tiny_net(), &c, Parallelism::Parallel).unwrap();
    let first = t.batch_plan(0).unwrap();
    t.run_round().unwrap();
    for round in 1..4 {
        assert_eq!(t.batch_plan(round).unwrap(), first);
    }

    let regen = TrainConfig { shuffle: false, ..cfg(2) };
    let mut t = Trainer::new(&d, &[], &tiny_net(), &regen, Parallelism::Parallel).unwrap();
    assert_ne!(t.batch_plan(0).unwrap(), t.batch_plan(1).unwrap());
}

#[test]
fn shuffle_permutes_but_keeps_samples() {
    let d = data(2);
    let fixed = AugmentConfig { regenerate_each_epoch: false, ..AugmentConfig::default() };
    let mut plain = Trainer::new(&d, &[], &tiny_net(), &TrainConfig { shuffle: false, augment: fixed, ..cfg(1) }, Parallelism::Parallel).unwrap();
    let mut mixed = Trainer::new(&d, &[], &tiny_net(), &TrainConfig { shuffle: true, augment: fixed, ..cfg(1) }, Parallelism::Parallel).unwrap();
    let a: Vec<_> = plain.batch_plan(0).unwrap().concat();
    let b: Vec<_> = mixed.batch_plan(0).unwrap().concat();
    assert_ne!(a, b);
    let key = |s: &(gnss_setnet::featurize::FeatureSet, _)| s.0.epoch_id;
    let mut ka: Vec<u64> = a.iter().map(key).collect();
    let mut kb: Vec<u64> = b.iter().map(key).collect();
    ka.sort_unstable();
    kb.sort_unstable();
    assert_eq!(ka, kb);
}

#[test]
fn inference_applies_rotated_correction() {
    let d = data(1);
    let params = init_params(&tiny_net(), 3).unwrap();
    for e in d.iter().take(10) {
        let p = e.truth_position.unwrap() + EcefPosition::new(4.0, -9.0, 2.5);
        let est = infer_position(&params, e, p, FeatureOptions::default()).unwrap();
        let ned = network_forward(&params, &featurize_epoch(e, p).unwrap()).unwrap();
        let rot = ned_rotation_at(p).unwrap();
        let back = rot.ecef_to_ned(est - p);
        assert!((back - ned).norm() < 1e-9);
        assert!(((est - p).norm() - ned.norm()).abs() < 1e-9);
    }
}

#[test]
fn zero_model_leaves_guess_unchanged() {
    let d = data(1);
    let zero = NetworkParams::zeros(tiny_net()).unwrap();
    for e in d.iter().take(10) {
        let p = e.truth_position.unwrap() + EcefPosition::new(1.0, 2.0, 3.0);
        assert_eq!(infer_position(&zero, e, p, FeatureOptions::default()).unwrap(), p);
    }
}

#[test]
fn resumed_checkpoint_scores_identically() {
    let d = data(3);
    let (tr, va) = d.split_at(60);
    let out = train(tr, va, &tiny_net(), &cfg(2), Parallelism::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(
        &path,
        &Checkpoint {
            params: out.params.clone(),
            features: FeatureOptions::default(),
            adam: Some(out.adam.clone()),
            history: out.history.clone(),
        },
    )
    .unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.params, out.params);
    let val = gnss_setnet::nn::validation_samples(va, &cfg(2), Parallelism::Sequential).unwrap();
    let loss = sample_loss(&back.params, &val, Parallelism::Sequential).unwrap();
    assert_eq!(loss, out.history[1].val_loss.unwrap());
}

#[test]
fn rejects_bad_configuration() {
    let d = data(1);
    for bad in [
        TrainConfig { batch_size: 0, ..cfg(1) },
        TrainConfig { epochs: 0, ..cfg(1) },
        TrainConfig { augment: AugmentConfig { eta: 0.0, ..AugmentConfig::default() }, ..cfg(1) },
    ] {
        let err = train(&d, &[], &tiny_net(), &bad, Parallelism::Parallel).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
    let bad_net = NetConfig { n_heads: 3, ..tiny_net() };
    assert_eq!(train(&d, &[], &bad_net, &cfg(1), Parallelism::Parallel).unwrap_err().exit_code(), 2);
}
