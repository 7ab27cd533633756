//! Token vocabularies for object attributes, spatial relations and the
//! pointing flag, plus the synonym map that folds relation phrases onto the
//! five relation labels.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attribute categories carried by every scene-graph node, in the order the
/// state machine indexes its attribute matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Name,
    Color,
    Shape,
    Size,
    Demonstrative,
}

impl Attribute {
    pub const ALL: [Attribute; 5] = [
        Attribute::Name,
        Attribute::Color,
        Attribute::Shape,
        Attribute::Size,
        Attribute::Demonstrative,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Name => "name",
            Attribute::Color => "color",
            Attribute::Shape => "shape",
            Attribute::Size => "size",
            Attribute::Demonstrative => "demonstrative",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The five ground-plane spatial relations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Left,
    Right,
    Front,
    Back,
    Near,
}

impl Relation {
    pub const ALL: [Relation; 5] = [
        Relation::Left,
        Relation::Right,
        Relation::Front,
        Relation::Back,
        Relation::Near,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Left => "left",
            Relation::Right => "right",
            Relation::Front => "front",
            Relation::Back => "back",
            Relation::Near => "near",
        }
    }

    pub fn parse(label: &str) -> Option<Relation> {
        Relation::ALL.into_iter().find(|r| r.as_str() == label)
    }

    /// The label of the same pair seen from the other endpoint.
    pub fn inverse(self) -> Relation {
        match self {
            Relation::Left => Relation::Right,
            Relation::Right => Relation::Left,
            Relation::Front => Relation::Back,
            Relation::Back => Relation::Front,
            Relation::Near => Relation::Near,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const POINTED: &str = "pointed";
pub const UNPOINTED: &str = "unpointed";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LexiconFile", into = "LexiconFile")]
pub struct Lexicon {
    name: Vec<String>,
    color: Vec<String>,
    shape: Vec<String>,
    size: Vec<String>,
    relation: Vec<String>,
    demonstrative: Vec<String>,
    demonstrative_words: Vec<String>,
    holdout_names: Vec<String>,
    synonyms: BTreeMap<String, Relation>,
}

/// On-disk layout: category → token array, plus the relation synonym map.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct LexiconFile {
    name: Vec<String>,
    color: Vec<String>,
    shape: Vec<String>,
    size: Vec<String>,
    #[serde(default = "default_relations")]
    relation: Vec<String>,
    #[serde(default = "default_flags")]
    demonstrative: Vec<String>,
    #[serde(default = "default_demonstrative_words")]
    demonstrative_words: Vec<String>,
    #[serde(default)]
    holdout_names: Vec<String>,
    #[serde(default)]
    synonyms: BTreeMap<String, String>,
}

fn default_relations() -> Vec<String> {
    Relation::ALL.iter().map(|r| r.as_str().to_string()).collect()
}

fn default_flags() -> Vec<String> {
    vec![POINTED.to_string(), UNPOINTED.to_string()]
}

fn default_demonstrative_words() -> Vec<String> {
    strings(&["this", "that", "these", "those"])
}

fn strings(tokens: &[&str]) -> Vec<String> {
    tokens.iter().map(|t| t.to_string()).collect()
}

impl TryFrom<LexiconFile> for Lexicon {
    type Error = Error;

    fn try_from(file: LexiconFile) -> Result<Self> {
        for (category, vocab) in [
            ("name", &file.name),
            ("color", &file.color),
            ("shape", &file.shape),
            ("size", &file.size),
            ("demonstrative_words", &file.demonstrative_words),
        ] {
            check_vocab(category, vocab)?;
        }
        if file.relation != default_relations() {
            return Err(Error::Format(format!(
                "relation vocabulary must be exactly {:?}",
                default_relations()
            )));
        }
        if file.demonstrative != default_flags() {
            return Err(Error::Format(format!(
                "demonstrative vocabulary must be exactly {:?}",
                default_flags()
            )));
        }
        let mut seen = HashSet::new();
        for token in file.name.iter().chain(&file.color).chain(&file.shape).chain(&file.size) {
            if !seen.insert(token.as_str()) {
                return Err(Error::Format(format!(
                    "token `{token}` appears in more than one attribute category"
                )));
            }
        }
        for held in &file.holdout_names {
            if !file.name.contains(held) {
                return Err(Error::UnknownToken {
                    category: "name".into(),
                    token: held.clone(),
                });
            }
        }
        if file.holdout_names.len() >= file.name.len() {
            return Err(Error::Format("holdout names leave no training names".into()));
        }
        let mut synonyms = BTreeMap::new();
        for (phrase, label) in file.synonyms {
            let relation = Relation::parse(&label).ok_or_else(|| Error::UnknownToken {
                category: "relation".into(),
                token: label.clone(),
            })?;
            synonyms.insert(normalize_phrase(&phrase), relation);
        }
        Ok(Lexicon {
            name: file.name,
            color: file.color,
            shape: file.shape,
            size: file.size,
            relation: file.relation,
            demonstrative: file.demonstrative,
            demonstrative_words: file.demonstrative_words,
            holdout_names: file.holdout_names,
            synonyms,
        })
    }
}

impl From<Lexicon> for LexiconFile {
    fn from(lex: Lexicon) -> Self {
        LexiconFile {
            name: lex.name,
            color: lex.color,
            shape: lex.shape,
            size: lex.size,
            relation: lex.relation,
            demonstrative: lex.demonstrative,
            demonstrative_words: lex.demonstrative_words,
            holdout_names: lex.holdout_names,
            synonyms: lex
                .synonyms
                .into_iter()
                .map(|(k, v)| (k, v.as_str().to_string()))
                .collect(),
        }
    }
}

fn check_vocab(category: &str, vocab: &[String]) -> Result<()> {
    if vocab.is_empty() {
        return Err(Error::Format(format!("{category} vocabulary is empty")));
    }
    let mut seen = HashSet::new();
    for token in vocab {
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(Error::Format(format!("{category}: invalid token `{token}`")));
        }
        if !seen.insert(token) {
            return Err(Error::Format(format!("{category}: duplicate token `{token}`")));
        }
    }
    Ok(())
}

fn normalize_phrase(phrase: &str) -> String {
    phrase
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl Default for Lexicon {
    /// Desk-scale workshop objects, with a toy set held out for the
    /// generalization split.
    fn default() -> Self {
        let file = LexiconFile {
            name: strings(&[
                "clipper",
                "tool",
                "hammer",
                "wrench",
                "screwdriver",
                "cup",
                "bottle",
                "ball",
                "cube",
                "box",
                "car",
                "doll",
                "robot",
                "duck",
                "train",
                "plane",
                "bear",
                "block",
            ]),
            color: strings(&["red", "green", "blue", "black", "white", "yellow"]),
            shape: strings(&["round", "square", "long", "flat"]),
            size: strings(&["small", "medium", "large"]),
            relation: default_relations(),
            demonstrative: default_flags(),
            demonstrative_words: default_demonstrative_words(),
            holdout_names: strings(&["car", "doll", "robot", "duck", "train", "plane", "bear", "block"]),
            synonyms: [
                ("beside", "near"),
                ("near", "near"),
                ("by", "near"),
                ("next to", "near"),
                ("behind", "back"),
                ("in front of", "front"),
                ("left of", "left"),
                ("right of", "right"),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        };
        Lexicon::try_from(file).expect("built-in lexicon is valid")
    }
}

impl Lexicon {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn vocab(&self, attribute: Attribute) -> &[String] {
        match attribute {
            Attribute::Name => &self.name,
            Attribute::Color => &self.color,
            Attribute::Shape => &self.shape,
            Attribute::Size => &self.size,
            Attribute::Demonstrative => &self.demonstrative,
        }
    }

    pub fn relations(&self) -> &[String] {
        &self.relation
    }

    pub fn demonstrative_words(&self) -> &[String] {
        &self.demonstrative_words
    }

    pub fn holdout_names(&self) -> &[String] {
        &self.holdout_names
    }

    /// Names available to the ordinary (non-holdout) splits.
    pub fn training_names(&self) -> Vec<String> {
        self.name
            .iter()
            .filter(|n| !self.holdout_names.contains(n))
            .cloned()
            .collect()
    }

    pub fn synonyms(&self) -> &BTreeMap<String, Relation> {
        &self.synonyms
    }

    pub fn index_of(&self, attribute: Attribute, token: &str) -> Option<usize> {
        self.vocab(attribute).iter().position(|t| t == token)
    }

    /// Which describable attribute (name, color, shape or size) owns `token`.
    pub fn category_of(&self, token: &str) -> Option<Attribute> {
        [Attribute::Size, Attribute::Color, Attribute::Shape, Attribute::Name]
            .into_iter()
            .find(|&a| self.index_of(a, token).is_some())
    }

    pub fn is_demonstrative_word(&self, token: &str) -> bool {
        self.demonstrative_words.iter().any(|w| w == token)
    }

    /// Maps a relation phrase ("beside", "in front of", "near") to its label.
    pub fn normalize_relation(&self, phrase: &str) -> Option<Relation> {
        let phrase = normalize_phrase(phrase);
        self.synonyms.get(&phrase).copied().or_else(|| Relation::parse(&phrase))
    }

    /// Synonym phrases that map onto `relation`, in map order.
    pub fn phrases_for(&self, relation: Relation) -> Vec<&str> {
        self.synonyms
            .iter()
            .filter(|(_, &r)| r == relation)
            .map(|(p, _)| p.as_str())
            .collect()
    }

    /// Every distinct token the lexicon knows, in a fixed order. Used to lay
    /// out one-hot embeddings.
    pub fn all_tokens(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.name
            .iter()
            .chain(&self.color)
            .chain(&self.shape)
            .chain(&self.size)
            .chain(&self.relation)
            .chain(&self.demonstrative)
            .chain(&self.demonstrative_words)
            .filter(|t| seen.insert(t.as_str()))
            .cloned()
            .collect()
    }

    /// Copy of this lexicon whose holdout list is replaced.
    pub fn with_holdout(&self, holdout: Vec<String>) -> Result<Self> {
        let mut file = LexiconFile::from(self.clone());
        file.holdout_names = holdout;
        Lexicon::try_from(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lexicon_has_fixed_relation_labels() {
        let lex = Lexicon::default();
        assert_eq!(lex.relations(), ["left", "right", "front", "back", "near"]);
        assert_eq!(lex.vocab(Attribute::Demonstrative), ["pointed", "unpointed"]);
    }

    #[test]
    fn synonyms_fold_onto_labels() {
        let lex = Lexicon::default();
        assert_eq!(lex.normalize_relation("beside"), Some(Relation::Near));
        assert_eq!(lex.normalize_relation("Behind"), Some(Relation::Back));
        assert_eq!(lex.normalize_relation("in  front of"), Some(Relation::Front));
        assert_eq!(lex.normalize_relation("left"), Some(Relation::Left));
        assert_eq!(lex.normalize_relation("under"), None);
    }

    #[test]
    fn json_roundtrip() {
        let lex = Lexicon::default();
        let text = serde_json::to_string(&lex).unwrap();
        let back: Lexicon = serde_json::from_str(&text).unwrap();
        assert_eq!(lex, back);
    }

    #[test]
    fn rejects_altered_relation_vocabulary() {
        let text = r#"{"name":["a"],"color":["b"],"shape":["c"],"size":["d"],
            "relation":["left","right","up","down","near"]}"#;
        assert!(serde_json::from_str::<Lexicon>(text).is_err());
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        let dup = r#"{"name":["a","a"],"color":["b"],"shape":["c"],"size":["d"]}"#;
        assert!(serde_json::from_str::<Lexicon>(dup).is_err());
        let empty = r#"{"name":[],"color":["b"],"shape":["c"],"size":["d"]}"#;
        assert!(serde_json::from_str::<Lexicon>(empty).is_err());
        let cross = r#"{"name":["red"],"color":["red"],"shape":["c"],"size":["d"]}"#;
        assert!(serde_json::from_str::<Lexicon>(cross).is_err());
    }

    #[test]
    fn holdout_names_are_disjoint_from_training_names() {
        let lex = Lexicon::default();
        let train = lex.training_names();
        assert!(lex.holdout_names().iter().all(|h| !train.contains(h)));
        assert_eq!(
            train.len() + lex.holdout_names().len(),
            lex.vocab(Attribute::Name).len()
        );
    }
}
