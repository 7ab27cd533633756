//! Compiles an instruction into an ordered, typed reasoning program.
//!
//! The dependency tree is walked depth first from the main object noun.
//! Relational modifiers are expanded anchor first (the anchor's own steps,
//! then the relation), followed by the noun's attribute modifiers in a fixed
//! order (demonstrative, size, color, shape, anything else) and finally the
//! noun itself. Stop-listed tokens and tokens outside the content POS tags
//! never become steps.

pub mod conllu;
pub mod template;

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embeddings::{cosine, EmbeddingTable};
use crate::error::{Error, Result};
use crate::lexicon::{Attribute, Lexicon};

pub use conllu::{parse_conllu, DependencyTree, Token};
pub use template::template_parse;

pub const ALLOWED_UPOS: [&str; 5] = ["NOUN", "PROPN", "ADJ", "ADP", "DET"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepType {
    Name,
    Color,
    Shape,
    Size,
    Demonstrative,
    Relation,
}

impl StepType {
    pub const ALL: [StepType; 6] = [
        StepType::Name,
        StepType::Color,
        StepType::Shape,
        StepType::Size,
        StepType::Demonstrative,
        StepType::Relation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The node attribute this step type filters on; `None` for relations.
    pub fn attribute(self) -> Option<Attribute> {
        match self {
            StepType::Name => Some(Attribute::Name),
            StepType::Color => Some(Attribute::Color),
            StepType::Shape => Some(Attribute::Shape),
            StepType::Size => Some(Attribute::Size),
            StepType::Demonstrative => Some(Attribute::Demonstrative),
            StepType::Relation => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StepType::Relation => "relation",
            other => other.attribute().unwrap().as_str(),
        }
    }

    pub fn one_hot(self) -> [f64; 6] {
        let mut r = [0.0; 6];
        r[self.index()] = 1.0;
        r
    }
}

impl fmt::Display for StepType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReasoningStep {
    pub text: String,
    /// Mean embedding of the step's tokens (`r_i`).
    #[serde(skip)]
    pub embedding: Vec<f64>,
    /// Distribution over [`StepType::ALL`] (`R_i`).
    pub type_probs: [f64; 6],
}

impl ReasoningStep {
    /// Most likely type; ties go to the earlier type.
    pub fn step_type(&self) -> StepType {
        StepType::ALL[crate::graph::argmax(&self.type_probs)]
    }

    pub fn relation_weight(&self) -> f64 {
        self.type_probs[StepType::Relation.index()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReasoningProgram {
    #[serde(skip)]
    pub instruction: String,
    pub steps: Vec<ReasoningStep>,
}

impl ReasoningProgram {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.text.as_str()).collect()
    }

    pub fn types(&self) -> Vec<StepType> {
        self.steps.iter().map(ReasoningStep::step_type).collect()
    }

    pub fn has_demonstrative(&self) -> bool {
        self.types().contains(&StepType::Demonstrative)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StopWords(HashSet<String>);

impl Default for StopWords {
    fn default() -> Self {
        StopWords(
            [
                "the", "a", "an", "pick", "up", "please", "me", "it", "and", "then", "can", "you",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        )
    }
}

impl StopWords {
    /// One token per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        StopWords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }
}

/// A step candidate before embedding and typing.
#[derive(Clone, Debug, PartialEq)]
pub struct StepSpan {
    pub text: String,
    pub tokens: Vec<Token>,
    /// True when the span is the head noun of its noun phrase.
    pub is_head: bool,
}

/// Type distribution of a step: a one-hot vector when a hard POS/dependency
/// or lexicon pattern fires, otherwise a softmax over cosine similarities to
/// the six category prototypes.
pub fn classify_step(span: &StepSpan, lexicon: &Lexicon, embeddings: &EmbeddingTable) -> Result<[f64; 6]> {
    if let Some(kind) = hard_pattern(span, lexicon) {
        return Ok(kind.one_hot());
    }
    let words: Vec<&str> = span.text.split_whitespace().collect();
    let emb = embeddings.mean_of(&words);
    let mut sims = [0.0; 6];
    for kind in StepType::ALL {
        sims[kind.index()] = cosine(&emb, &embeddings.prototype(lexicon, kind)?);
    }
    Ok(softmax6(sims))
}

fn hard_pattern(span: &StepSpan, lexicon: &Lexicon) -> Option<StepType> {
    if span
        .tokens
        .iter()
        .any(|t| t.base_deprel() == "det" && lexicon.is_demonstrative_word(&t.lemma))
    {
        return Some(StepType::Demonstrative);
    }
    if span.tokens.iter().any(|t| t.upos == "ADP" || t.base_deprel() == "case") {
        return Some(StepType::Relation);
    }
    if let Some(attribute) = lexicon.category_of(&span.text) {
        return Some(match attribute {
            Attribute::Name => StepType::Name,
            Attribute::Color => StepType::Color,
            Attribute::Shape => StepType::Shape,
            Attribute::Size => StepType::Size,
            Attribute::Demonstrative => StepType::Demonstrative,
        });
    }
    if span.is_head && span.tokens.iter().any(Token::is_noun) {
        return Some(StepType::Name);
    }
    None
}

fn softmax6(x: [f64; 6]) -> [f64; 6] {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = x.map(|v| (v - m).exp());
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= z);
    out
}

/// Which modifier slot an attribute child fills.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    Demonstrative,
    Size,
    Color,
    Shape,
    Other,
}

struct Extractor<'a> {
    tree: &'a DependencyTree,
    lexicon: &'a Lexicon,
    stopwords: &'a StopWords,
    spans: Vec<StepSpan>,
}

impl<'a> Extractor<'a> {
    fn keep(&self, t: &Token) -> bool {
        !self.stopwords.contains(&t.lemma) && ALLOWED_UPOS.contains(&t.upos.as_str())
    }

    fn main_noun(&self) -> Option<&Token> {
        let root = self.tree.root();
        if root.is_noun() {
            return Some(root);
        }
        self.tree
            .children(root.index)
            .find(|t| t.is_noun() && matches!(t.base_deprel(), "obj" | "dobj" | "iobj"))
            .or_else(|| self.tree.tokens().iter().find(|t| t.is_noun()))
    }

    /// Case marker of a relational dependent, with any `fixed` continuation.
    fn relation_phrase(&self, dependent: &Token) -> Option<(String, Vec<Token>)> {
        let case = self
            .tree
            .children(dependent.index)
            .find(|t| t.base_deprel() == "case")?;
        let mut tokens = vec![case.clone()];
        tokens.extend(
            self.tree
                .children(case.index)
                .filter(|t| t.base_deprel() == "fixed")
                .cloned(),
        );
        tokens.sort_by_key(|t| t.index);
        let phrase = tokens.iter().map(|t| t.lemma.as_str()).collect::<Vec<_>>().join(" ");
        Some((phrase, tokens))
    }

    /// Relational dependents of `noun`: `nmod` children with a case marker,
    /// and for the main object also `obl` siblings under the verb, which many
    /// parsers prefer for locative phrases.
    fn relational_children(&self, noun: &Token, is_main: bool) -> Vec<&'a Token> {
        let tree: &'a DependencyTree = self.tree;
        let mut out: Vec<&'a Token> = tree
            .children(noun.index)
            .filter(|t| t.is_noun() && t.base_deprel() == "nmod")
            .collect();
        if is_main && noun.head != 0 {
            out.extend(
                tree.children(noun.head)
                    .filter(|t| t.is_noun() && t.base_deprel() == "obl"),
            );
        }
        out.retain(|t| self.relation_phrase(t).is_some());
        out.sort_by_key(|t| t.index);
        out
    }

    fn emit_noun_phrase(&mut self, noun: &Token, is_main: bool, depth: usize) {
        if depth > self.tree.len() {
            return;
        }
        for dep in self.relational_children(noun, is_main) {
            self.emit_noun_phrase(dep, false, depth + 1);
            let (phrase, tokens) = self.relation_phrase(dep).expect("filtered above");
            if tokens.iter().any(|t| !self.keep(t)) {
                continue;
            }
            let text = self
                .lexicon
                .normalize_relation(&phrase)
                .map(|r| r.as_str().to_string())
                .unwrap_or(phrase);
            self.spans.push(StepSpan {
                text,
                tokens,
                is_head: false,
            });
        }

        let tree: &'a DependencyTree = self.tree;
        let mut modifiers: Vec<(Slot, &Token)> = Vec::new();
        for child in tree.children(noun.index) {
            if !self.keep(child) {
                continue;
            }
            let slot = match child.base_deprel() {
                "det" if self.lexicon.is_demonstrative_word(&child.lemma) => Slot::Demonstrative,
                "amod" => match self.lexicon.category_of(&child.lemma) {
                    Some(Attribute::Size) => Slot::Size,
                    Some(Attribute::Color) => Slot::Color,
                    Some(Attribute::Shape) => Slot::Shape,
                    _ => Slot::Other,
                },
                _ => continue,
            };
            modifiers.push((slot, child));
        }
        // stable: ties keep sentence order
        modifiers.sort_by_key(|(slot, _)| *slot);
        for (_, child) in modifiers {
            self.spans.push(StepSpan {
                text: child.lemma.clone(),
                tokens: vec![child.clone()],
                is_head: false,
            });
        }

        if self.keep(noun) {
            self.spans.push(StepSpan {
                text: noun.lemma.clone(),
                tokens: vec![noun.clone()],
                is_head: true,
            });
        }
    }
}

/// Step spans in execution order, before embedding and typing.
pub fn extract_spans(tree: &DependencyTree, lexicon: &Lexicon, stopwords: &StopWords) -> Result<Vec<StepSpan>> {
    let mut ex = Extractor {
        tree,
        lexicon,
        stopwords,
        spans: Vec::new(),
    };
    let noun = ex.main_noun().ok_or(Error::NoReferent)?.clone();
    ex.emit_noun_phrase(&noun, true, 0);
    if ex.spans.is_empty() {
        return Err(Error::NoReferent);
    }
    Ok(ex.spans)
}

pub fn extract_program(
    tree: &DependencyTree,
    lexicon: &Lexicon,
    stopwords: &StopWords,
    embeddings: &EmbeddingTable,
) -> Result<ReasoningProgram> {
    let spans = extract_spans(tree, lexicon, stopwords)?;
    let mut steps = Vec::with_capacity(spans.len());
    for span in &spans {
        let words: Vec<&str> = span.text.split_whitespace().collect();
        steps.push(ReasoningStep {
            text: span.text.clone(),
            embedding: embeddings.mean_of(&words),
            type_probs: classify_step(span, lexicon, embeddings)?,
        });
    }
    let instruction = tree
        .tokens()
        .iter()
        .map(|t| t.form.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    Ok(ReasoningProgram { instruction, steps })
}

/// Template parse followed by extraction.
pub fn compile_instruction(
    instruction: &str,
    lexicon: &Lexicon,
    stopwords: &StopWords,
    embeddings: &EmbeddingTable,
) -> Result<ReasoningProgram> {
    let tree = template_parse(instruction, lexicon)?;
    let mut program = extract_program(&tree, lexicon, stopwords, embeddings)?;
    program.instruction = instruction.to_string();
    Ok(program)
}
