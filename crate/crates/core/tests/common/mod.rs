#![allow(dead_code)]

use proptest::prelude::*;

use ref_nsm::instruction::{ReasoningProgram, ReasoningStep};
use ref_nsm::{Attribute, EmbeddingTable, Lexicon, ObjectInstance, Scene, UserPose, Vec3};

pub const GRID: usize = 8;
pub const SPACING: f64 = 0.45;

pub fn vocab(attribute: Attribute) -> Vec<String> {
    Lexicon::default().vocab(attribute).to_vec()
}

pub fn object_strategy() -> impl Strategy<Value = (String, String, String, String)> {
    (
        proptest::sample::select(vocab(Attribute::Name)),
        proptest::sample::select(vocab(Attribute::Color)),
        proptest::sample::select(vocab(Attribute::Shape)),
        proptest::sample::select(vocab(Attribute::Size)),
    )
}

/// Scenes of 1..=max objects on distinct jittered grid cells in front of the
/// default user.
pub fn scene_strategy(max: usize) -> impl Strategy<Value = Scene> {
    let cells: Vec<usize> = (0..GRID * GRID).collect();
    (1..=max)
        .prop_flat_map(move |n| {
            (
                proptest::sample::subsequence(cells.clone(), n).prop_shuffle(),
                proptest::collection::vec(object_strategy(), n),
                proptest::collection::vec((-0.1..0.1f64, -0.1..0.1f64), n),
            )
        })
        .prop_map(|(cells, attrs, jitter)| {
            let objects = cells
                .iter()
                .zip(attrs)
                .zip(jitter)
                .enumerate()
                .map(|(k, ((&cell, (name, color, shape, size)), (jx, jy)))| ObjectInstance {
                    id: format!("o{k}"),
                    name,
                    color,
                    shape,
                    size,
                    position: Vec3::ground(
                        0.3 + SPACING * (cell / GRID) as f64 + jx,
                        -1.6 + SPACING * (cell % GRID) as f64 + jy,
                    ),
                })
                .collect();
            Scene::new(UserPose::default(), objects).unwrap()
        })
}

pub fn type_probs_strategy() -> impl Strategy<Value = [f64; 6]> {
    proptest::array::uniform6(0.01..1.0f64).prop_map(|w| {
        let z: f64 = w.iter().sum();
        w.map(|x| x / z)
    })
}

pub fn token_strategy() -> impl Strategy<Value = String> {
    proptest::sample::select(Lexicon::default().all_tokens())
}

pub fn step(text: &str, type_probs: [f64; 6], emb: &EmbeddingTable) -> ReasoningStep {
    ReasoningStep {
        text: text.into(),
        embedding: emb.lookup(text).into_owned(),
        type_probs,
    }
}

pub fn program_strategy(emb: EmbeddingTable, max_steps: usize) -> impl Strategy<Value = ReasoningProgram> {
    proptest::collection::vec((token_strategy(), type_probs_strategy()), 1..=max_steps).prop_map(move |steps| {
        ReasoningProgram {
            instruction: String::new(),
            steps: steps.iter().map(|(t, r)| step(t, *r, &emb)).collect(),
        }
    })
}

pub fn assert_distribution(p: &[f64], what: &str) {
    let sum: f64 = p.iter().sum();
    assert!((sum - 1.0).abs() <= 1e-9, "{what} sums to {sum}");
    assert!(p.iter().all(|x| *x >= 0.0), "{what} has a negative entry: {p:?}");
}
