use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ref_nsm::datagen::{
    generate_dataset, generate_scene, read_dataset, synthesize_pointing, write_dataset, GeneratorConfig, Template,
};
use ref_nsm::gesture::{detect_pointing_segments, DetectionParams, GroundPoint};
use ref_nsm::reasoner::{grad, init_params, mean_loss, train, Example, Gradient};
use ref_nsm::symbolic::{satisfiers, Query};
use ref_nsm::{EmbeddingTable, Engine, Error, Lexicon, TrainConfig};

fn small_config(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        seed,
        train: 40,
        val: 12,
        generalization: 12,
        ..GeneratorConfig::default()
    }
}

fn engine() -> Engine {
    let lex = Lexicon::default();
    let emb = EmbeddingTable::one_hot(&lex, 50, 0).unwrap();
    Engine::new(lex, emb)
}

fn dir_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn dataset_roundtrips_through_disk() {
    let lex = Lexicon::default();
    let ds = generate_dataset(&small_config(3), &lex).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path(), &ds).unwrap();
    let back = read_dataset(tmp.path()).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn same_seed_writes_identical_bytes() {
    let lex = Lexicon::default();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_dataset(a.path(), &generate_dataset(&small_config(9), &lex).unwrap()).unwrap();
    write_dataset(b.path(), &generate_dataset(&small_config(9), &lex).unwrap()).unwrap();
    assert_eq!(dir_bytes(a.path()), dir_bytes(b.path()));
    let c = generate_dataset(&small_config(10), &lex).unwrap();
    assert_ne!(c, read_dataset(a.path()).unwrap());
}

#[test]
fn malformed_episode_names_its_path() {
    let lex = Lexicon::default();
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path(), &generate_dataset(&small_config(1), &lex).unwrap()).unwrap();
    let bad = tmp.path().join("episodes/0003.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let err = read_dataset(tmp.path()).unwrap_err();
    assert!(matches!(err, Error::Json { .. }));
    assert!(err.to_string().contains("0003.json"), "{err}");
}

#[test]
fn generalization_split_uses_disjoint_names() {
    let lex = Lexicon::default();
    let ds = generate_dataset(&small_config(4), &lex).unwrap();
    let names = |split: &str| -> BTreeSet<String> {
        ds.split(split)
            .unwrap()
            .iter()
            .flat_map(|e| e.scene.objects.iter().map(|o| o.name.clone()))
            .collect()
    };
    let (train, general) = (names("train"), names("generalization"));
    assert!(!general.is_empty());
    assert!(
        train.is_disjoint(&general),
        "{:?}",
        train.intersection(&general).collect::<Vec<_>>()
    );
    assert_eq!(ds.split("val").unwrap().len(), 12);
}

#[test]
fn every_episode_has_a_unique_multimodal_referent() {
    let lex = Lexicon::default();
    let cfg = small_config(5);
    let ds = generate_dataset(&cfg, &lex).unwrap();
    let engine = engine();
    for ep in &ds.episodes {
        let program = engine.compile(&ep.instruction, None).unwrap();
        let query = Query::from_program(&program).unwrap();
        let pointed = ep.pointed_id.as_deref().map(|id| ep.scene.index_of(id).unwrap());
        let gold = ep.scene.index_of(&ep.gold_id).unwrap();
        assert_eq!(satisfiers(&ep.scene, &query, pointed, &cfg.graph), [gold], "{}", ep.id);
        assert_eq!(ep.has_demonstrative(), ep.trajectory.is_some(), "{}", ep.id);
    }
}

#[test]
fn relational_episodes_need_the_gesture() {
    let lex = Lexicon::default();
    let cfg = GeneratorConfig {
        templates: vec![Template::T4],
        train: 100,
        val: 0,
        seed: 8,
        ..GeneratorConfig::default()
    };
    let ds = generate_dataset(&cfg, &lex).unwrap();
    let engine = engine();
    let ambiguous = ds
        .episodes
        .iter()
        .filter(|ep| {
            let query = Query::from_program(&engine.compile(&ep.instruction, None).unwrap()).unwrap();
            satisfiers(&ep.scene, &query, None, &cfg.graph).len() >= 2
        })
        .count();
    assert!(ambiguous >= 50, "{ambiguous}/100 ambiguous without the gesture");
}

#[test]
fn no_dwell_rarely_yields_a_segment() {
    let cfg = GeneratorConfig {
        dwell_fraction: 0.0,
        ..GeneratorConfig::default()
    };
    let user = cfg.user;
    let mut stable = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let anchor = GroundPoint::new(rng.random_range(0.5..4.0), rng.random_range(-2.0..2.0));
        let traj = synthesize_pointing(anchor, &cfg, &mut rng, &user).unwrap();
        stable += !detect_pointing_segments(&traj, &DetectionParams::default()).is_empty() as usize;
    }
    assert!(stable <= 10, "{stable}/100 seeds produced a segment");
}

fn single_name_examples(engine: &Engine, count: usize) -> Vec<Example> {
    let cfg = GeneratorConfig::default();
    let mut out = Vec::new();
    let mut seed = 0;
    while out.len() < count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        seed += 1;
        let scene = generate_scene(&mut rng, &cfg, &engine.lexicon).unwrap();
        let unique =
            (0..scene.len()).find(|&i| scene.objects.iter().filter(|o| o.name == scene.objects[i].name).count() == 1);
        let Some(gold) = unique else { continue };
        let program = engine
            .compile(&format!("pick up the {}", scene.objects[gold].name), None)
            .unwrap();
        let graph = engine.graph(&scene, None).unwrap();
        out.push(Example { program, graph, gold });
    }
    out
}

#[test]
fn training_lowers_the_loss_and_is_deterministic() {
    let engine = engine();
    let examples = single_name_examples(&engine, 200);
    let cfg = TrainConfig {
        seed: 5,
        ..TrainConfig::default()
    };
    let a = train(&examples, &cfg).unwrap();
    assert_eq!(a.epoch_losses.len(), 30);
    let last = *a.epoch_losses.last().unwrap();
    assert!(last < a.initial_loss, "{} -> {last}", a.initial_loss);
    assert!(mean_loss(&examples, &a.params).unwrap() < a.initial_loss);
    let b = train(&examples, &cfg).unwrap();
    assert_eq!(a.epoch_losses, b.epoch_losses);
    assert_eq!(a.params, b.params);
}

#[test]
fn zero_epochs_returns_the_initialization() {
    let engine = engine();
    let examples = single_name_examples(&engine, 5);
    let cfg = TrainConfig {
        epochs: 0,
        seed: 13,
        ..TrainConfig::default()
    };
    let report = train(&examples, &cfg).unwrap();
    assert_eq!(report.params, init_params(50, 13, cfg.init_noise).unwrap());
    assert!(report.epoch_losses.is_empty());
    assert!(train(&[], &cfg).is_err());
}

#[test]
fn one_batch_step_uses_the_mean_gradient() {
    let engine = engine();
    let examples = single_name_examples(&engine, 2);
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 2,
        seed: 21,
        ..TrainConfig::default()
    };
    let init = init_params(50, 21, cfg.init_noise).unwrap();
    let mut sum = Gradient::zeros(50);
    for ex in &examples {
        sum.add_assign(&grad(&ex.program, &ex.graph, ex.gold, &init).unwrap().1);
    }
    let report = train(&examples, &cfg).unwrap();
    for m in 0..6 {
        for (k, (&after, &before)) in report.params.w[m]
            .as_slice()
            .iter()
            .zip(init.w[m].as_slice())
            .enumerate()
        {
            let expected = before - cfg.learning_rate * sum.w[m].as_slice()[k] / 2.0;
            assert!((after - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn engine_reports_per_template_accuracy() {
    let lex = Lexicon::default();
    let ds = generate_dataset(&small_config(12), &lex).unwrap();
    let engine = engine();
    let train_eps = ds.split("train").unwrap();
    let report = engine.train(&train_eps, &TrainConfig::default()).unwrap();
    let eval = engine.evaluate(&train_eps, &report.params, false).unwrap();
    assert_eq!(eval.n, train_eps.len());
    assert_eq!(eval.predictions.len(), eval.n);
    assert_eq!(eval.by_template.values().map(|a| a.n).sum::<usize>(), eval.n);
    let correct = eval.predictions.iter().filter(|p| p.correct).count();
    assert_eq!(eval.accuracy, correct as f64 / eval.n as f64);
}
