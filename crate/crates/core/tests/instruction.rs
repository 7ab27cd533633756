use std::path::PathBuf;

use proptest::prelude::*;
use serde::Deserialize;

use ref_nsm::instruction::{
    classify_step, compile_instruction, extract_program, parse_conllu, template_parse, StepSpan, Token, ALLOWED_UPOS,
};
use ref_nsm::{EmbeddingTable, Error, Lexicon, StepType, StopWords};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn read(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

#[derive(Deserialize)]
struct Golden {
    instruction: String,
    steps: Vec<(StepType, String)>,
}

fn setup() -> (Lexicon, StopWords, EmbeddingTable) {
    let lex = Lexicon::default();
    let emb = EmbeddingTable::one_hot(&lex, 50, 0).unwrap();
    (lex, StopWords::default(), emb)
}

#[test]
fn golden_corpus_matches_exactly() {
    let (lex, stop, emb) = setup();
    let corpus: Vec<Golden> = serde_json::from_str(&read("parser_golden.json")).unwrap();
    assert_eq!(corpus.len(), 20);
    for case in &corpus {
        let program = compile_instruction(&case.instruction, &lex, &stop, &emb).unwrap();
        let got: Vec<(StepType, String)> = program.steps.iter().map(|s| (s.step_type(), s.text.clone())).collect();
        assert_eq!(got, case.steps, "{}", case.instruction);
        for step in &program.steps {
            let sum: f64 = step.type_probs.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9, "{}: {sum}", case.instruction);
            assert_eq!(step.type_probs, step.step_type().one_hot());
        }
    }
}

#[test]
fn figure_conllu_tree() {
    let tree = parse_conllu(&read("figure_nmod.conllu")).unwrap();
    assert_eq!(tree.len(), 8);
    assert_eq!(tree.root().lemma, "pick");
}

#[test]
fn conllu_and_template_agree_on_the_figure_sentence() {
    let (lex, stop, emb) = setup();
    let sentence = "Pick up the black clipper beside this tool";
    let from_template = compile_instruction(sentence, &lex, &stop, &emb).unwrap();
    for file in ["figure_nmod.conllu", "figure_obl.conllu"] {
        let tree = parse_conllu(&read(file)).unwrap();
        let program = extract_program(&tree, &lex, &stop, &emb).unwrap();
        assert_eq!(program.texts(), from_template.texts(), "{file}");
        assert_eq!(program.types(), from_template.types(), "{file}");
    }
}

#[test]
fn template_tree_matches_the_reference_topology() {
    let lex = Lexicon::default();
    let reference = parse_conllu(&read("figure_nmod.conllu")).unwrap();
    let ours = template_parse("Pick up the black clipper beside this tool", &lex).unwrap();
    let shape = |t: &ref_nsm::instruction::DependencyTree| -> Vec<(String, usize, String)> {
        t.tokens()
            .iter()
            .filter(|tok| tok.deprel != "compound:prt")
            .map(|tok| (tok.form.to_lowercase(), tok.head, tok.deprel.clone()))
            .collect()
    };
    assert_eq!(shape(&ours), shape(&reference));
}

#[test]
fn conllu_cycle_is_a_format_error() {
    let err = parse_conllu(&read("cycle.conllu")).unwrap_err();
    assert!(matches!(err, Error::Format(_)));
    assert!(err.to_string().contains("cycle"));
}

/// Softmax over cosines to category prototypes, computed straight from the
/// fixture file.
fn oracle_fallback(text: &str, lex: &Lexicon) -> [f64; 6] {
    let table: std::collections::HashMap<String, Vec<f64>> = read("embeddings_d6.txt")
        .lines()
        .map(|l| {
            let mut it = l.split_whitespace();
            let tok = it.next().unwrap().to_string();
            (tok, it.map(|x| x.parse().unwrap()).collect())
        })
        .collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mean = |toks: &[String]| {
        let mut m = vec![0.0; 6];
        for t in toks {
            for (a, b) in m.iter_mut().zip(&table[t]) {
                *a += b / toks.len() as f64;
            }
        }
        m
    };
    let vocabs: [Vec<String>; 6] = [
        lex.vocab(ref_nsm::Attribute::Name).to_vec(),
        lex.vocab(ref_nsm::Attribute::Color).to_vec(),
        lex.vocab(ref_nsm::Attribute::Shape).to_vec(),
        lex.vocab(ref_nsm::Attribute::Size).to_vec(),
        lex.demonstrative_words().to_vec(),
        lex.relations().to_vec(),
    ];
    let q = &table[text];
    let cos: Vec<f64> = vocabs
        .iter()
        .map(|v| {
            let p = mean(v);
            q.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() / (norm(q) * norm(&p))
        })
        .collect();
    let z: f64 = cos.iter().map(|c| c.exp()).sum();
    std::array::from_fn(|k| cos[k].exp() / z)
}

#[test]
fn oov_adjective_falls_back_to_cosine_similarity() {
    let lex = Lexicon::default();
    let emb = EmbeddingTable::load(fixture("embeddings_d6.txt"), 6).unwrap();
    let span = StepSpan {
        text: "crimson".into(),
        tokens: vec![Token::new(4, "crimson", "crimson", "ADJ", 5, "amod")],
        is_head: false,
    };
    let r = classify_step(&span, &lex, &emb).unwrap();
    let expected = oracle_fallback("crimson", &lex);
    for k in 0..6 {
        assert!((r[k] - expected[k]).abs() < 1e-12, "{r:?} vs {expected:?}");
    }
    let best = (0..6).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap();
    assert_eq!(best, StepType::Color.index());
    assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn crimson_in_a_parsed_tree_becomes_a_soft_color_step() {
    let lex = Lexicon::default();
    let emb = EmbeddingTable::load(fixture("embeddings_d6.txt"), 6).unwrap();
    let text = "1\tpick\tpick\tVERB\t_\t_\t0\troot\t_\t_\n\
                2\tthe\tthe\tDET\t_\t_\t4\tdet\t_\t_\n\
                3\tcrimson\tcrimson\tADJ\t_\t_\t4\tamod\t_\t_\n\
                4\tcube\tcube\tNOUN\t_\t_\t1\tobj\t_\t_\n";
    let program = extract_program(&parse_conllu(text).unwrap(), &lex, &StopWords::default(), &emb).unwrap();
    assert_eq!(program.texts(), ["crimson", "cube"]);
    assert_eq!(program.steps[0].step_type(), StepType::Color);
    assert!(program.steps[0].type_probs[StepType::Color.index()] < 1.0);
}

// Random instructions from the template grammar.
fn noun_phrase(depth: u32) -> BoxedStrategy<(String, usize)> {
    let lex = Lexicon::default();
    let names = lex.vocab(ref_nsm::Attribute::Name).to_vec();
    let mods: Vec<String> = [
        ref_nsm::Attribute::Color,
        ref_nsm::Attribute::Size,
        ref_nsm::Attribute::Shape,
    ]
    .iter()
    .flat_map(|a| lex.vocab(*a).to_vec())
    .collect();
    let rels: Vec<String> = lex.synonyms().keys().cloned().collect();
    let dets = vec!["the", "a", "this", "that", "those"];
    let base = (
        proptest::sample::select(dets),
        proptest::collection::vec(proptest::sample::select(mods), 0..3),
        proptest::sample::select(names),
    )
        .prop_map(|(d, m, n)| {
            let mut words = vec![d.to_string()];
            words.extend(m);
            words.push(n);
            (words.join(" "), 1usize)
        });
    if depth == 0 {
        return base.boxed();
    }
    (
        base,
        proptest::option::of((proptest::sample::select(rels), noun_phrase(depth - 1))),
    )
        .prop_map(|((np, k), rel)| match rel {
            None => (np, k),
            Some((r, (inner, k2))) => (format!("{np} {r} {inner}"), k + k2),
        })
        .boxed()
}

proptest! {
    #[test]
    fn template_programs_are_sound(
        verb in proptest::sample::select(vec!["pick up", "grab", "fetch", "take", "bring", "get"]),
        (np, phrases) in noun_phrase(2),
    ) {
        let (lex, stop, emb) = setup();
        let sentence = format!("{verb} {np}");
        let tree = template_parse(&sentence, &lex).unwrap();
        let program = compile_instruction(&sentence, &lex, &stop, &emb).unwrap();
        let again = compile_instruction(&sentence, &lex, &stop, &emb).unwrap();
        prop_assert_eq!(&program, &again);

        let names = program.types().iter().filter(|t| **t == StepType::Name).count();
        let relations = program.types().iter().filter(|t| **t == StepType::Relation).count();
        let nmods = tree.tokens().iter().filter(|t| t.deprel == "nmod").count();
        prop_assert_eq!(names, phrases);
        prop_assert_eq!(relations, nmods);
        prop_assert_eq!(relations, phrases - 1);

        for step in &program.steps {
            prop_assert!((step.type_probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(!stop.contains(&step.text));
            if step.step_type() != StepType::Relation {
                let tok = tree.tokens().iter().find(|t| t.lemma == step.text).unwrap();
                prop_assert!(ALLOWED_UPOS.contains(&tok.upos.as_str()));
            }
        }
    }
}
