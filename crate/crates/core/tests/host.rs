use std::collections::BTreeSet;

use hgcode::host::{
    evaluate, make_synthetic_clone_set, read_jsonl, train_adapters, write_jsonl, CloneLabel, DemoConfig, DemoSetup,
    FrozenEncoderConfig, HostError, TrainConfig,
};
use hgcode::parsing::{node_kind_sequence, parse};
use hgcode::{HyperedgeType, Language};

/// A host small enough to train in well under a second per epoch.
fn small(seed: u64, enabled: BTreeSet<HyperedgeType>) -> DemoConfig {
    DemoConfig {
        seed,
        encoder: FrozenEncoderConfig {
            layers: 2,
            hidden: 16,
            heads: 2,
            ffn: 32,
            vocab_size: 512,
            max_len: 96,
            seed: 0,
        },
        bottleneck: 4,
        train_size: 16,
        val_size: 8,
        enabled,
        train: TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        },
    }
}

fn all_types() -> BTreeSet<HyperedgeType> {
    HyperedgeType::ALL.into_iter().collect()
}

fn train(cfg: &DemoConfig) -> Result<(DemoSetup, hgcode::host::TrainReport, String), HostError> {
    let mut setup = cfg.setup()?;
    let (report, ckpt) = train_adapters(&mut setup.pipeline, &setup.train, &setup.val, &cfg.train)?;
    Ok((setup, report, ckpt.to_json()))
}

#[test]
fn zero_epochs_change_nothing() {
    let mut cfg = small(1, all_types());
    cfg.train.epochs = 0;
    let before = cfg.setup().unwrap();
    let (after, report, _) = train(&cfg).unwrap();
    assert!(report.epoch_losses.is_empty());
    assert_eq!(report.steps, 0);
    assert_eq!(report.best_epoch, None);
    assert_eq!(report.trainable_digest_before, report.trainable_digest_after);
    assert_eq!(report.initial_train_loss, report.final_train_loss);
    assert_eq!(after.pipeline.adapters, before.pipeline.adapters);
}

#[test]
fn training_leaves_the_encoder_untouched_and_is_reproducible() {
    let cfg = small(2, all_types());
    let untouched = cfg.setup().unwrap().pipeline.encoder;
    let (first, report, ckpt) = train(&cfg).unwrap();
    assert!(report.frozen_unchanged());
    assert_eq!(first.pipeline.encoder.digest(), untouched.digest());
    assert_eq!(report.epoch_losses.len(), 2);
    assert_eq!(report.steps, 4);

    let (_, again, ckpt_again) = train(&cfg).unwrap();
    assert_eq!(again, report);
    assert_eq!(ckpt_again, ckpt);
}

#[test]
fn fresh_adapters_match_the_bare_encoder() {
    let setup = small(3, all_types()).setup().unwrap();
    let mut bare = setup.pipeline.clone();
    bare.adapters = None;
    for pair in setup.val.iter().chain(&setup.train) {
        let with = setup.pipeline.represent(&pair.a).unwrap();
        let without = bare.represent(&pair.a).unwrap();
        assert_eq!(
            with.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            without.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
    assert_eq!(
        evaluate(&setup.pipeline, &setup.val, 0.5).unwrap(),
        evaluate(&bare, &setup.val, 0.5).unwrap()
    );
}

#[test]
fn every_hyperedge_subset_trains_from_the_same_start() {
    let mut starts = BTreeSet::new();
    for mask in 0..8u8 {
        let enabled: BTreeSet<_> = HyperedgeType::ALL
            .into_iter()
            .filter(|t| mask & (1 << t.index()) != 0)
            .collect();
        let mut cfg = small(4, enabled.clone());
        cfg.train.epochs = 1;
        let (setup, report, _) = train(&cfg).unwrap();
        assert!(report.frozen_unchanged());
        assert!(report.epoch_losses.iter().all(|l| l.is_finite()));
        starts.insert(report.trainable_digest_before.clone());
        for pair in &setup.train {
            for s in [&pair.a, &pair.b] {
                assert!(s.graph.hyperedge_types.iter().all(|t| enabled.contains(t)));
            }
        }
    }
    assert_eq!(starts.len(), 1);
}

#[test]
fn a_small_run_reduces_the_training_loss() {
    let mut cfg = small(5, all_types());
    cfg.train.epochs = 30;
    cfg.train.lr = 1e-3;
    let (_, report, _) = train(&cfg).unwrap();
    assert!(
        report.final_train_loss < report.initial_train_loss,
        "{} -> {}",
        report.initial_train_loss,
        report.final_train_loss
    );
    assert!(report.frozen_unchanged());
}

#[test]
fn adapter_parameters_reach_the_output() {
    let mut setup = small(6, all_types()).setup().unwrap();
    let pair = setup.val[0].clone();
    let before = setup.pipeline.represent(&pair.a).unwrap();
    setup.pipeline.adapters.as_mut().unwrap().layers[0].w_up[(0, 0)] += 0.5;
    let after = setup.pipeline.represent(&pair.a).unwrap();
    assert_ne!(before, after);
}

#[test]
fn non_finite_losses_stop_training() {
    let cfg = small(7, all_types());
    let mut setup = cfg.setup().unwrap();
    setup.pipeline.head.w_1.as_mut_slice()[0] = f64::NAN;
    let err = train_adapters(&mut setup.pipeline, &setup.train, &setup.val, &cfg.train).unwrap_err();
    assert!(
        matches!(err, HostError::NonFiniteLoss { epoch: 1, batch: 0, .. }),
        "{err}"
    );
}

#[test]
fn evaluation_thresholds_and_empty_sets() {
    let setup = small(8, all_types()).setup().unwrap();
    let none = evaluate(&setup.pipeline, &setup.val, 1.0).unwrap();
    assert_eq!((none.tp, none.fp, none.precision, none.f1), (0, 0, 0.0, 0.0));
    let all = evaluate(&setup.pipeline, &setup.val, -1.0).unwrap();
    assert_eq!((all.fn_, all.tn, all.recall), (0, 0, 1.0));
    assert_eq!(all.tp + all.fp, setup.val.len());
    assert!(matches!(
        evaluate(&setup.pipeline, &[], 0.5),
        Err(HostError::EmptyDataset)
    ));
    let cfg = small(8, all_types());
    let mut p = cfg.setup().unwrap().pipeline;
    assert!(matches!(
        train_adapters(&mut p, &[], &setup.val, &cfg.train),
        Err(HostError::EmptyDataset)
    ));
}

#[test]
fn clone_pairs_share_their_tree_shape() {
    let set = make_synthetic_clone_set(9, 200).unwrap();
    let clones = set.iter().filter(|x| x.label == CloneLabel::Clone).count();
    assert_eq!(clones, 100);
    for ex in &set {
        let shape = |src: &str| node_kind_sequence(&parse(src, Language::Java).unwrap());
        let same = shape(&ex.code_a) == shape(&ex.code_b);
        assert_eq!(same, ex.label == CloneLabel::Clone, "{}\n{}", ex.code_a, ex.code_b);
        if ex.label == CloneLabel::Clone {
            assert_ne!(ex.code_a, ex.code_b);
        }
    }
    assert_eq!(set, make_synthetic_clone_set(9, 200).unwrap());
}

#[test]
fn datasets_round_trip_through_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.jsonl");
    let set = make_synthetic_clone_set(10, 12).unwrap();
    write_jsonl(&path, &set).unwrap();
    assert_eq!(read_jsonl(&path).unwrap(), set);
    std::fs::write(&path, "{\"code_a\": \"x\"}\n").unwrap();
    assert!(matches!(read_jsonl(&path), Err(HostError::Json { line: 1, .. })));
}
