use caasr::eval::{compare_reports, evaluate, format_report, parse_report, EvalOptions, Significance};
use caasr::graph::{basis_from_adjacency, build_adjacency, count_cooccurrence};
use caasr::ingest::split_train_test;
use caasr::model::{self, graph_embed, CaasrConfig, CaasrObjective, CaasrParams, GruRecommender};
use caasr::synth::{generate, SynthConfig};
use caasr::tensor::checkpoint::{read_checkpoint, write_checkpoint};
use caasr::ParamStore64;

fn small_synth() -> SynthConfig {
    SynthConfig {
        n_items: 60,
        n_sequences: 200,
        n_bundles: 6,
        seed: 2,
        ..Default::default()
    }
}

#[test]
fn synth_to_report_round_trip() {
    let ds = generate(&small_synth()).unwrap();
    let (train, test) = split_train_test(&ds, 0.8, 2).unwrap();
    let adj = build_adjacency::<f64>(&count_cooccurrence(&train).unwrap(), 3).unwrap();
    let basis = basis_from_adjacency(&adj.matrix, 2).unwrap();
    let cfg = CaasrConfig {
        latent_dim: 12,
        cheb_order: 2,
        learning_rate: 0.01,
        max_epochs: 4,
        seed: 2,
        ..Default::default()
    };
    let out = model::train(&cfg, &train, &basis).unwrap();
    assert_eq!(out.epoch_losses.len(), 4);
    assert!(out.epoch_losses[3] < out.epoch_losses[0]);

    let direct = model::recommender(&CaasrObjective { basis: &basis }, &out.store).unwrap();
    let opts = EvalOptions::default();
    let report = evaluate(&direct, &test, &opts).unwrap();
    assert_eq!(report.n_events, test.n_transitions());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    write_checkpoint(&path, &out.store.named_values()).unwrap();
    let store = ParamStore64::from_named_values(read_checkpoint(&path).unwrap());
    let params = CaasrParams::from_store(&store).unwrap();
    assert_eq!(params.order(), 2);
    let reloaded = GruRecommender::new(graph_embed(&params.theta, &basis).unwrap(), params.gru);
    let again = evaluate(&reloaded, &test, &opts).unwrap();
    assert_eq!(format_report(&report), format_report(&again));

    let parsed = parse_report(&format_report(&report), &path).unwrap();
    let cmp = compare_reports(&parsed, &again).unwrap();
    assert_eq!(cmp.significance, Significance::None);
    assert!(cmp.deltas.iter().all(|d| d.delta() == 0.0));
}

#[test]
fn trained_model_beats_chance() {
    let ds = generate(&small_synth()).unwrap();
    let (train, test) = split_train_test(&ds, 0.8, 2).unwrap();
    let cfg = CaasrConfig {
        latent_dim: 12,
        cheb_order: 0,
        learning_rate: 0.01,
        max_epochs: 8,
        ..Default::default()
    };
    let out = model::train_gru4rec::<f64>(&cfg, &train).unwrap();
    let m = model::recommender(&model::Gru4RecObjective, &out.store).unwrap();
    let report = evaluate(&m, &test, &EvalOptions::default()).unwrap();
    let chance = 20.0 / train.n_items() as f64;
    assert!(report.recall[&20] > 1.5 * chance, "{} vs chance {chance}", report.recall[&20]);
}
