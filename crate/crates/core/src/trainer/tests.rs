use super::*;
use crate::data::{generate_synthetic, SyntheticSpec};

fn tiny_config() -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        steps: 10,
        learning_rate: 1e-2,
        vocab_size: 64,
        d_model: 8,
        n_layers: 1,
        n_heads: 2,
        ff_dim: 16,
        max_seq_len: 24,
        ..TrainConfig::default()
    }
}

fn tiny_corpus() -> Vec<Item> {
    let spec = SyntheticSpec {
        n_clusters: 2,
        items_per_cluster: 6,
        words_per_cluster: 8,
        shared_words: 8,
        ..SyntheticSpec::default()
    };
    generate_synthetic(&spec).unwrap().items
}

fn tokenized(cfg: &TrainConfig) -> Vec<TokenizedItem> {
    let items = tiny_corpus();
    let vocab = Vocabulary::build(
        items.iter().flat_map(|i| [i.title.as_str(), i.description.as_str()]),
        cfg.vocab_size,
    );
    tokenize_items(&items, &vocab, cfg.max_seq_len).unwrap().0
}

#[test]
fn triplet_batch_layout() {
    let cfg = tiny_config();
    let items = tokenized(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let batch = build_triplets(&items[..3], &MaskingConfig::disabled(), cfg.vocab_size, &mut rng).unwrap();
    assert_eq!(batch.len(), 3);
    assert_eq!(batch.sequences.len(), 6);
    for i in 0..3 {
        assert_eq!(batch.item_ids[i], items[i].item_id);
        assert_eq!(batch.anchor(i).token_ids, items[i].title);
        assert_eq!(batch.positive(i).token_ids, items[i].description);
        assert!(batch.anchor(i).mask_positions.is_empty());
    }
    assert!(build_triplets(&items[..1], &MaskingConfig::disabled(), cfg.vocab_size, &mut rng).is_err());
}

#[test]
fn batch_construction_is_deterministic() {
    let cfg = tiny_config();
    let items = tokenized(&cfg);
    let build = || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        build_triplets(&items[..4], &MaskingConfig::with_rate(0.5), cfg.vocab_size, &mut rng).unwrap()
    };
    assert_eq!(build(), build());
}

#[test]
fn truncation_is_counted() {
    let items = vec![Item {
        item_id: "x".into(),
        title: "a b c d e f".into(),
        description: "a b".into(),
    }];
    let vocab = Vocabulary::build(["a b c d e f"], 20);
    let (out, truncated) = tokenize_items(&items, &vocab, 4).unwrap();
    assert_eq!(truncated, 1);
    assert_eq!(out[0].title.len(), 4);
}

#[test]
fn empty_text_is_rejected() {
    let items = vec![Item {
        item_id: "x".into(),
        title: "!!".into(),
        description: "a b".into(),
    }];
    let vocab = Vocabulary::build(["a b"], 20);
    assert!(matches!(tokenize_items(&items, &vocab, 4), Err(Error::Ingestion { .. })));
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let cfg = TrainConfig {
        learning_rate: 0.0,
        steps: 3,
        ..tiny_config()
    };
    let report = train(&tiny_corpus(), &cfg).unwrap();
    let fresh = Encoder::new(cfg.encoder_config()).unwrap();
    assert_eq!(report.checkpoint.encoder.params, fresh.params);
    assert_eq!(report.losses.len(), 3);
}

#[test]
fn no_signal_means_zero_loss_and_no_update() {
    let cfg = TrainConfig {
        lambda: 0.0,
        mask_rate: 0.0,
        steps: 2,
        ..tiny_config()
    };
    let report = train(&tiny_corpus(), &cfg).unwrap();
    for b in &report.losses {
        assert_eq!(b.total, 0.0);
        assert_eq!(b.mlm, 0.0);
    }
    // zero gradients leave only weight decay acting on matrices
    let fresh = Encoder::new(cfg.encoder_config()).unwrap();
    assert_eq!(report.checkpoint.encoder.params.mlm_bias, fresh.params.mlm_bias);
    assert_eq!(report.checkpoint.encoder.params.final_norm, fresh.params.final_norm);
}

#[test]
fn overfits_a_fixed_batch() {
    let cfg = TrainConfig {
        learning_rate: 5e-3,
        ..tiny_config()
    };
    let items = tokenized(&cfg);
    let fixed = [items[0].clone(), items[7].clone()];
    let mut encoder = Encoder::new(cfg.encoder_config()).unwrap();
    let mut opt = AdamW::new(cfg.learning_rate, encoder.params.num_values());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let batch = build_triplets(&fixed, &cfg.masking(), cfg.vocab_size, &mut rng).unwrap();
    let mut totals = Vec::new();
    for step in 0..50 {
        totals.push(train_step(&mut encoder, &mut opt, &batch, &cfg, step, &mut rng).unwrap().breakdown.total);
    }
    let first: f64 = totals[..5].iter().sum::<f64>() / 5.0;
    let last: f64 = totals[45..].iter().sum::<f64>() / 5.0;
    assert!(last < first, "first {first}, last {last}");
}

fn emb(v: &[f64]) -> Embedding {
    Embedding::new(v.to_vec())
}

#[test]
fn satisfied_hinge_has_zero_metric_gradient() {
    // anchors sit on their positives, the other item is orthogonal
    let batch = BatchEmbeddings::new(
        vec![emb(&[1.0, 0.0]), emb(&[0.0, 1.0])],
        vec![emb(&[1.0, 0.01]), emb(&[0.01, 1.0])],
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let obj = metric_objective(&batch, LossVariant::TripletHard, 0.1, &mut rng).unwrap();
    assert_eq!(obj.loss, 0.0);
    assert!(obj.pooled_grads.iter().flatten().all(|g| *g == 0.0));
    // each anchor's closest foreign element is the other item's positive
    assert_eq!(obj.negatives, vec![3, 1]);
}

#[test]
fn metric_objective_is_the_mean_of_item_terms() {
    let batch = BatchEmbeddings::new(
        vec![emb(&[1.0, 0.0, 0.2]), emb(&[0.3, 1.0, 0.0]), emb(&[0.0, 0.1, 1.0])],
        vec![emb(&[0.0, 1.0, 0.0]), emb(&[1.0, 0.1, 0.0]), emb(&[1.0, 0.0, 1.0])],
        vec!["a".into(), "b".into(), "c".into()],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let obj = metric_objective(&batch, LossVariant::TripletHard, 0.1, &mut rng).unwrap();
    let cfg = TripletLossConfig::new(0.1).unwrap();
    let negs = mine_hard_negatives_with(&batch, DistanceKind::Angular).unwrap();
    let expected: f64 = (0..3)
        .map(|i| {
            triplet_term(&batch.anchors[i], &batch.positives[i], batch.element(negs[i]), cfg, DistanceKind::Angular)
                .unwrap()
                .loss
        })
        .sum::<f64>()
        / 3.0;
    assert!((obj.loss - expected).abs() < 1e-15);
    assert!(obj.loss > 0.0);
}

#[test]
fn lambda_scales_the_metric_term_only() {
    let items = tokenized(&tiny_config());
    let run = |lambda: f64| {
        let cfg = TrainConfig {
            lambda,
            ..tiny_config()
        };
        let mut encoder = Encoder::new(cfg.encoder_config()).unwrap();
        let mut opt = AdamW::new(cfg.learning_rate, encoder.params.num_values());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let batch = build_triplets(&items[..4], &cfg.masking(), cfg.vocab_size, &mut rng).unwrap();
        train_step(&mut encoder, &mut opt, &batch, &cfg, 0, &mut rng).unwrap().breakdown
    };
    let (one, two) = (run(1.0), run(2.0));
    assert_eq!(one.mlm, two.mlm);
    assert_eq!(one.metric, two.metric);
    assert!((two.total - (one.mlm + 2.0 * one.metric)).abs() < 1e-12);
}

#[test]
fn zero_steps_gives_an_empty_series() {
    let cfg = TrainConfig {
        steps: 0,
        ..tiny_config()
    };
    let report = train(&tiny_corpus(), &cfg).unwrap();
    assert!(report.losses.is_empty());
    assert_eq!(report.metrics_csv(), "step,mlm,metric,total\n");
}

#[test]
fn same_seed_same_checkpoint() {
    let cfg = TrainConfig {
        steps: 4,
        ..tiny_config()
    };
    let a = train(&tiny_corpus(), &cfg).unwrap();
    let b = train(&tiny_corpus(), &cfg).unwrap();
    assert_eq!(a.checkpoint.to_bytes(), b.checkpoint.to_bytes());
    assert_eq!(a.metrics_csv(), b.metrics_csv());
    let other = train(&tiny_corpus(), &TrainConfig { seed: 99, ..cfg }).unwrap();
    assert_ne!(a.checkpoint.to_bytes(), other.checkpoint.to_bytes());
}

#[test]
fn every_variant_trains() {
    for variant in LossVariant::ALL {
        let cfg = TrainConfig {
            steps: 3,
            loss_variant: variant,
            ..tiny_config()
        };
        let report = train(&tiny_corpus(), &cfg).unwrap();
        assert_eq!(report.losses.len(), 3, "{variant}");
        if !variant.uses_mlm() {
            assert!(report.losses.iter().all(|b| b.mlm == 0.0));
        }
    }
}

#[test]
fn dataset_smaller_than_a_batch_is_rejected() {
    let cfg = TrainConfig {
        batch_size: 64,
        ..tiny_config()
    };
    assert!(train(&tiny_corpus(), &cfg).is_err());
    assert!(train(&[], &tiny_config()).is_err());
}

#[test]
fn config_toml_round_trip_and_unknown_keys() {
    let cfg = TrainConfig {
        loss_variant: LossVariant::CosinePair,
        init: InitScheme::PositiveOrthant,
        ..tiny_config()
    };
    assert_eq!(TrainConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    assert!(matches!(TrainConfig::from_toml("batch_sise = 4"), Err(Error::Config(_))));
    assert!(matches!(TrainConfig::from_toml("batch_size = 1"), Err(Error::Config(_))));
    let partial = TrainConfig::from_toml("steps = 7\nloss_variant = \"triplet_no_mlm\"").unwrap();
    assert_eq!(partial.steps, 7);
    assert_eq!(partial.loss_variant, LossVariant::TripletNoMlm);
    assert_eq!(partial.batch_size, TrainConfig::default().batch_size);
}

#[test]
fn anchor_and_positive_share_one_encoder() {
    let cfg = tiny_config();
    let items = tokenized(&cfg);
    let encoder = Encoder::new(cfg.encoder_config()).unwrap();
    let same = TokenizedItem {
        item_id: "s".into(),
        title: items[0].title.clone(),
        description: items[0].title.clone(),
    };
    let (t, d) = embed_pair(&encoder, &same).unwrap();
    assert_eq!(t, d);
}
