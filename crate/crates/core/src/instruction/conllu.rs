//! Dependency trees in the CoNLL-U column format.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    /// Parent index, 0 for the root.
    pub head: usize,
    pub deprel: String,
}

impl Token {
    pub fn new(index: usize, form: &str, lemma: &str, upos: &str, head: usize, deprel: &str) -> Self {
        Token {
            index,
            form: form.to_string(),
            lemma: lemma.to_string(),
            upos: upos.to_string(),
            head,
            deprel: deprel.to_string(),
        }
    }

    pub fn is_noun(&self) -> bool {
        matches!(self.upos.as_str(), "NOUN" | "PROPN")
    }

    /// Deprel without its subtype (`nmod:poss` → `nmod`).
    pub fn base_deprel(&self) -> &str {
        self.deprel.split(':').next().unwrap_or("")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyTree {
    tokens: Vec<Token>,
}

impl DependencyTree {
    /// Validates indices, the single root and acyclicity.
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Format("empty sentence".into()));
        }
        let n = tokens.len();
        for (i, t) in tokens.iter().enumerate() {
            if t.index != i + 1 {
                return Err(Error::Format(format!(
                    "token ids must run 1..{n}, found {} at position {}",
                    t.index,
                    i + 1
                )));
            }
            if t.head > n {
                return Err(Error::Format(format!(
                    "token {} has head {} outside the sentence",
                    t.index, t.head
                )));
            }
        }
        let roots = tokens.iter().filter(|t| t.head == 0).count();
        if roots != 1 {
            return Err(Error::Format(format!("expected exactly one root, found {roots}")));
        }
        for start in &tokens {
            let mut cur = start.index;
            for _ in 0..=n {
                cur = tokens[cur - 1].head;
                if cur == 0 {
                    break;
                }
                if cur == start.index {
                    return Err(Error::Format(format!("cycle through token {}", start.index)));
                }
            }
            if cur != 0 {
                return Err(Error::Format(format!("cycle above token {}", start.index)));
            }
        }
        Ok(DependencyTree { tokens })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, index: usize) -> &Token {
        &self.tokens[index - 1]
    }

    pub fn root(&self) -> &Token {
        self.tokens
            .iter()
            .find(|t| t.head == 0)
            .expect("validated tree has a root")
    }

    /// Dependents of `index` in sentence order.
    pub fn children(&self, index: usize) -> impl Iterator<Item = &Token> + '_ {
        self.tokens.iter().filter(move |t| t.head == index)
    }

    pub fn to_conllu(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_\n",
                t.index, t.form, t.lemma, t.upos, t.head, t.deprel
            ));
        }
        out
    }
}

/// Parses the first sentence of a CoNLL-U document. Comment lines,
/// multiword ranges (`1-2`) and empty nodes (`1.1`) are skipped.
pub fn parse_conllu(text: &str) -> Result<DependencyTree> {
    let mut tokens = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if tokens.is_empty() {
                continue;
            }
            break;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = if line.contains('\t') {
            line.split('\t').collect()
        } else {
            line.split_whitespace().collect()
        };
        let err = |message: String| Error::Line {
            line: lineno + 1,
            message,
        };
        if cols.len() < 8 {
            return Err(err(format!("expected 10 columns, found {}", cols.len())));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let index = cols[0]
            .parse::<usize>()
            .map_err(|_| err(format!("bad token id `{}`", cols[0])))?;
        let head = cols[6]
            .parse::<usize>()
            .map_err(|_| err(format!("bad head `{}`", cols[6])))?;
        let form = cols[1];
        let lemma = if cols[2] == "_" { form } else { cols[2] };
        tokens.push(Token {
            index,
            form: form.to_string(),
            lemma: lemma.to_lowercase(),
            upos: cols[3].to_string(),
            head,
            deprel: cols[7].to_string(),
        });
    }
    DependencyTree::new(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_token_root() {
        let tree = parse_conllu("1\tpick\tpick\tVERB\t_\t_\t0\troot\t_\t_\n").unwrap();
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.root().form, "pick");
    }

    #[test]
    fn self_head_is_a_cycle() {
        let text = "1\tpick\tpick\tVERB\t_\t_\t0\troot\t_\t_\n2\tit\tit\tPRON\t_\t_\t2\tobj\t_\t_\n";
        let err = parse_conllu(text).unwrap_err();
        assert!(err.to_string().contains("cycle"), "{err}");
    }

    #[test]
    fn detached_cycle_is_rejected() {
        let text = "1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n\
                    2\tb\tb\tX\t_\t_\t3\tdep\t_\t_\n\
                    3\tc\tc\tX\t_\t_\t2\tdep\t_\t_\n";
        let err = parse_conllu(text).unwrap_err();
        assert!(err.to_string().contains("cycle"), "{err}");
    }

    #[test]
    fn multiple_roots_rejected() {
        let text = "1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n2\tb\tb\tX\t_\t_\t0\troot\t_\t_\n";
        assert!(parse_conllu(text).unwrap_err().to_string().contains("root"));
    }

    #[test]
    fn skips_comments_ranges_and_empty_nodes() {
        let text = "# text = don't\n\
                    1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n\
                    1\tdo\tdo\tAUX\t_\t_\t0\troot\t_\t_\n\
                    1.1\tx\tx\tX\t_\t_\t_\t_\t_\t_\n\
                    2\tn't\tnot\tPART\t_\t_\t1\tadvmod\t_\t_\n\
                    \n\
                    1\tnext\tnext\tX\t_\t_\t0\troot\t_\t_\n";
        let tree = parse_conllu(text).unwrap();
        assert_eq!(tree.len(), 2);
        assert_eq!(tree.token(2).lemma, "not");
    }

    #[test]
    fn roundtrips_through_text() {
        let text = "1\tPick\tpick\tVERB\t_\t_\t0\troot\t_\t_\n2\tballs\tball\tNOUN\t_\t_\t1\tobj\t_\t_\n";
        let tree = parse_conllu(text).unwrap();
        assert_eq!(parse_conllu(&tree.to_conllu()).unwrap(), tree);
    }
}
