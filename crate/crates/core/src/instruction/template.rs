//! Built-in parser for the synthetic instruction grammar.
//!
//! ```text
//! S   := VERB NP
//! NP  := DET? ADJ* NOUN (REL NP)?
//! ```
//!
//! It emits the tree an off-the-shelf UD parser gives for these sentences:
//! verb root, object noun as `obj`, adjectives as `amod`, determiners as
//! `det`, and a relational phrase as `nmod` with its preposition as `case`
//! (extra words of a multiword preposition hang off it as `fixed`).

use crate::error::{Error, Result};
use crate::instruction::conllu::{DependencyTree, Token};
use crate::lexicon::{Attribute, Lexicon};

const VERBS: [&[&str]; 6] = [&["pick", "up"], &["grab"], &["fetch"], &["get"], &["take"], &["bring"]];
const ARTICLES: [&str; 3] = ["the", "a", "an"];

pub fn template_parse(instruction: &str, lexicon: &Lexicon) -> Result<DependencyTree> {
    let words = tokenize(instruction);
    let unparseable = || Error::Unparseable(instruction.trim().to_string());
    let mut b = Builder {
        words: &words,
        pos: 0,
        tokens: Vec::new(),
        lexicon,
    };

    let please = b.peek() == Some("please");
    if please {
        b.pos += 1;
    }
    let verb = VERBS
        .iter()
        .find(|v| words.len() >= b.pos + v.len() && v.iter().zip(&words[b.pos..]).all(|(a, w)| a == w))
        .ok_or_else(unparseable)?;
    let root = b.push(verb[0], "VERB", 0, "root");
    if please {
        b.push_ordered("please", "INTJ", root, "discourse", 0);
    }
    for (k, particle) in verb.iter().enumerate().skip(1) {
        b.push_ordered(particle, "PART", root, "compound:prt", b.pos + k);
    }
    b.pos += verb.len();

    b.noun_phrase(root, "obj").ok_or_else(unparseable)?;
    if b.pos != words.len() {
        return Err(unparseable());
    }
    b.finish()
}

fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| matches!(c, '.' | ',' | '!' | '?' | ';' | '"'))
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

struct Builder<'a> {
    words: &'a [String],
    pos: usize,
    /// Tokens with provisional heads; indices are assigned in `finish`.
    tokens: Vec<Pending>,
    lexicon: &'a Lexicon,
}

struct Pending {
    form: String,
    upos: String,
    /// Position in `tokens` of the head, or `usize::MAX` for the root.
    head: usize,
    deprel: String,
    /// Sentence position used for ordering.
    order: usize,
}

impl<'a> Builder<'a> {
    fn peek(&self) -> Option<&str> {
        self.words.get(self.pos).map(String::as_str)
    }

    fn push(&mut self, form: &str, upos: &str, head: usize, deprel: &str) -> usize {
        self.push_ordered(form, upos, head, deprel, self.pos)
    }

    fn push_ordered(&mut self, form: &str, upos: &str, head: usize, deprel: &str, order: usize) -> usize {
        let head = if deprel == "root" { usize::MAX } else { head };
        self.tokens.push(Pending {
            form: form.to_string(),
            upos: upos.to_string(),
            head,
            deprel: deprel.to_string(),
            order,
        });
        self.tokens.len() - 1
    }

    fn is_determiner(&self, w: &str) -> bool {
        ARTICLES.contains(&w) || self.lexicon.is_demonstrative_word(w)
    }

    fn is_modifier(&self, w: &str) -> bool {
        matches!(
            self.lexicon.category_of(w),
            Some(Attribute::Color | Attribute::Size | Attribute::Shape)
        )
    }

    /// Longest relation phrase starting at the cursor, in words.
    fn relation_phrase_len(&self) -> usize {
        (1..=3)
            .rev()
            .find(|&len| {
                self.words
                    .get(self.pos..self.pos + len)
                    .is_some_and(|ws| self.lexicon.normalize_relation(&ws.join(" ")).is_some())
            })
            .unwrap_or(0)
    }

    /// Parses an NP, attaches its noun to `head` with `deprel`, and returns the
    /// noun's slot.
    fn noun_phrase(&mut self, head: usize, deprel: &str) -> Option<usize> {
        let start = self.pos;
        let det = self.peek().filter(|w| self.is_determiner(w)).map(str::to_string);
        if det.is_some() {
            self.pos += 1;
        }
        let mut modifiers = Vec::new();
        while let Some(w) = self.peek().filter(|w| self.is_modifier(w)) {
            modifiers.push((w.to_string(), self.pos));
            self.pos += 1;
        }
        let noun_word = self.peek()?.to_string();
        if self.is_determiner(&noun_word) || self.relation_phrase_len() > 0 {
            return None;
        }
        let noun_pos = self.pos;
        let noun = self.push_ordered(&noun_word, "NOUN", head, deprel, noun_pos);
        self.pos += 1;
        if let Some(det) = det {
            self.push_ordered(&det, "DET", noun, "det", start);
        }
        for (w, order) in modifiers {
            self.push_ordered(&w, "ADJ", noun, "amod", order);
        }

        let rel_len = self.relation_phrase_len();
        if rel_len > 0 {
            let phrase_start = self.pos;
            self.pos += rel_len;
            let inner = self.noun_phrase(noun, "nmod")?;
            let first = self.words[phrase_start].clone();
            let case = self.push_ordered(&first, "ADP", inner, "case", phrase_start);
            for k in 1..rel_len {
                let w = self.words[phrase_start + k].clone();
                self.push_ordered(&w, "ADP", case, "fixed", phrase_start + k);
            }
        }
        Some(noun)
    }

    fn finish(self) -> Result<DependencyTree> {
        let mut order: Vec<usize> = (0..self.tokens.len()).collect();
        order.sort_by_key(|&i| self.tokens[i].order);
        let mut index_of = vec![0; self.tokens.len()];
        for (pos, &slot) in order.iter().enumerate() {
            index_of[slot] = pos + 1;
        }
        let tokens = order
            .iter()
            .enumerate()
            .map(|(pos, &slot)| {
                let p = &self.tokens[slot];
                let head = if p.head == usize::MAX { 0 } else { index_of[p.head] };
                Token::new(pos + 1, &p.form, &p.form, &p.upos, head, &p.deprel)
            })
            .collect();
        DependencyTree::new(tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn by_form<'a>(tree: &'a DependencyTree, form: &str) -> &'a Token {
        tree.tokens().iter().find(|t| t.form == form).unwrap()
    }

    #[test]
    fn simple_object() {
        let lex = Lexicon::default();
        let tree = template_parse("pick up the red cube", &lex).unwrap();
        assert_eq!(tree.len(), 5);
        assert_eq!(tree.root().form, "pick");
        let cube = by_form(&tree, "cube");
        assert_eq!((cube.head, cube.deprel.as_str()), (1, "obj"));
        let red = by_form(&tree, "red");
        assert_eq!(
            (red.head, red.deprel.as_str(), red.upos.as_str()),
            (cube.index, "amod", "ADJ")
        );
        let the = by_form(&tree, "the");
        assert_eq!((the.head, the.deprel.as_str()), (cube.index, "det"));
        let up = by_form(&tree, "up");
        assert_eq!((up.head, up.deprel.as_str()), (1, "compound:prt"));
    }

    #[test]
    fn demonstrative_determiner() {
        let lex = Lexicon::default();
        let tree = template_parse("pick up this ball", &lex).unwrap();
        let ball = by_form(&tree, "ball");
        let this = by_form(&tree, "this");
        assert_eq!((this.head, this.deprel.as_str()), (ball.index, "det"));
    }

    #[test]
    fn relational_phrase_is_nmod_with_case() {
        let lex = Lexicon::default();
        let tree = template_parse("Pick up the black clipper beside this tool.", &lex).unwrap();
        assert_eq!(tree.len(), 8);
        let forms: Vec<_> = tree.tokens().iter().map(|t| t.form.as_str()).collect();
        assert_eq!(
            forms,
            ["pick", "up", "the", "black", "clipper", "beside", "this", "tool"]
        );
        let clipper = by_form(&tree, "clipper");
        let tool = by_form(&tree, "tool");
        assert_eq!((tool.head, tool.deprel.as_str()), (clipper.index, "nmod"));
        let beside = by_form(&tree, "beside");
        assert_eq!((beside.head, beside.deprel.as_str()), (tool.index, "case"));
    }

    #[test]
    fn multiword_preposition_uses_fixed() {
        let lex = Lexicon::default();
        let tree = template_parse("pick up the cup in front of this box", &lex).unwrap();
        let inn = by_form(&tree, "in");
        let box_ = by_form(&tree, "box");
        assert_eq!((inn.head, inn.deprel.as_str()), (box_.index, "case"));
        for w in ["front", "of"] {
            let t = by_form(&tree, w);
            assert_eq!((t.head, t.deprel.as_str()), (inn.index, "fixed"));
        }
    }

    #[test]
    fn non_template_sentences_fail() {
        let lex = Lexicon::default();
        for text in [
            "hello world",
            "",
            "pick up",
            "pick up the",
            "pick up the red cube now please",
        ] {
            let err = template_parse(text, &lex).unwrap_err();
            assert!(matches!(err, Error::Unparseable(_)), "{text}: {err}");
        }
    }

    #[test]
    fn please_prefix() {
        let lex = Lexicon::default();
        let tree = template_parse("please grab the cup", &lex).unwrap();
        assert_eq!(tree.token(1).form, "please");
        assert_eq!(tree.token(1).head, 2);
        assert_eq!(tree.root().form, "grab");
    }
}
