//! Frozen token embeddings.
//!
//! Tokens missing from the table resolve to a pseudo-random unit vector
//! derived from the token text and the table's OOV seed, so every run is
//! reproducible without a pretrained file.

use std::borrow::Cow;
use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instruction::StepType;
use crate::lexicon::Lexicon;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedMode {
    /// Pretrained vectors from a text file; unknown tokens hash.
    File,
    /// Every token hashes to a pseudo-random unit vector.
    Hash,
    /// One reserved basis vector per lexicon token.
    OneHot,
}

#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
    oov_seed: u64,
}

impl EmbeddingTable {
    pub fn new(dim: usize, oov_seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            entries: HashMap::new(),
            oov_seed,
        })
    }

    /// Reads the whitespace-delimited `token v1 … vd` text format.
    pub fn load(path: impl AsRef<Path>, dim: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, dim)
    }

    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let mut table = Self::new(dim, 0)?;
        for (lineno, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else {
                continue;
            };
            let values = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Line {
                    line: lineno + 1,
                    message: e.to_string(),
                })?;
            if values.len() != dim {
                return Err(Error::Line {
                    line: lineno + 1,
                    message: format!("expected {dim} values, found {}", values.len()),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Line {
                    line: lineno + 1,
                    message: "non-finite value".into(),
                });
            }
            table.entries.insert(token.to_string(), values);
        }
        Ok(table)
    }

    /// Reserved basis vectors, one per lexicon token; needs `dim` at least the
    /// lexicon's token count.
    pub fn one_hot(lexicon: &Lexicon, dim: usize, oov_seed: u64) -> Result<Self> {
        let tokens = lexicon.all_tokens();
        if dim < tokens.len() {
            return Err(Error::Invalid(format!(
                "one-hot embeddings need dim >= {} (lexicon size), got {dim}",
                tokens.len()
            )));
        }
        let mut table = Self::new(dim, oov_seed)?;
        for (i, token) in tokens.into_iter().enumerate() {
            let mut v = vec![0.0; dim];
            v[i] = 1.0;
            table.entries.insert(token, v);
        }
        Ok(table)
    }

    pub fn from_mode(
        mode: EmbedMode,
        dim: usize,
        lexicon: &Lexicon,
        file: Option<&Path>,
        oov_seed: u64,
    ) -> Result<Self> {
        match mode {
            EmbedMode::File => {
                let path = file.ok_or_else(|| Error::Invalid("file embedding mode needs an embeddings path".into()))?;
                let mut table = Self::load(path, dim)?;
                table.oov_seed = oov_seed;
                Ok(table)
            }
            EmbedMode::Hash => Self::new(dim, oov_seed),
            EmbedMode::OneHot => Self::one_hot(lexicon, dim, oov_seed),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn oov_seed(&self) -> u64 {
        self.oov_seed
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        self.entries.insert(token.into(), vector);
        Ok(())
    }

    pub fn lookup(&self, token: &str) -> Cow<'_, [f64]> {
        match self.entries.get(token) {
            Some(v) => Cow::Borrowed(v),
            None => Cow::Owned(self.oov_vector(token)),
        }
    }

    fn oov_vector(&self, token: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(token.as_bytes()) ^ splitmix(self.oov_seed));
        loop {
            let v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }

    /// Unweighted mean of the token embeddings.
    pub fn mean_of<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        if tokens.is_empty() {
            return out;
        }
        for t in tokens {
            for (o, v) in out.iter_mut().zip(self.lookup(t.as_ref()).iter()) {
                *o += v;
            }
        }
        let n = tokens.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    /// Probability-weighted mean of the embeddings of `vocab`.
    pub fn expected<S: AsRef<str>>(&self, vocab: &[S], probs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (token, &p) in vocab.iter().zip(probs) {
            if p == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.lookup(token.as_ref()).iter()) {
                *o += p * v;
            }
        }
        out
    }

    /// L2-normalized mean embedding of a step category's vocabulary.
    pub fn prototype(&self, lexicon: &Lexicon, category: StepType) -> Result<Vec<f64>> {
        let vocab: &[String] = match category.attribute() {
            Some(crate::lexicon::Attribute::Demonstrative) => lexicon.demonstrative_words(),
            Some(attribute) => lexicon.vocab(attribute),
            None => lexicon.relations(),
        };
        if vocab.is_empty() {
            return Err(Error::Invalid(format!("{category} vocabulary is empty")));
        }
        let mean = self.mean_of(vocab);
        let norm = l2(&mean);
        if norm <= 1e-12 {
            return Err(Error::Invalid(format!("{category} prototype has zero norm")));
        }
        Ok(mean.into_iter().map(|x| x / norm).collect())
    }
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (l2(a), l2(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
