//! Vocabulary, tokenization, corpora, embeddings and checkpoints.

mod checkpoint;
mod corpus;
mod embeddings;
mod toy;

use std::collections::HashMap;

pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, Checkpoint, TrainingMeta,
    CHECKPOINT_VERSION,
};
pub use corpus::{load_corpus_pos_neg, load_corpus_tsv, Corpus, Example, Sentiment, Split};
pub use embeddings::{init_embeddings_random, load_embeddings_text};
pub use toy::{generate_toy_corpus, NEGATIVE_LEXICON, POSITIVE_LEXICON, TOPICS};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const SOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

const RESERVED: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

/// Token ↔ id bijection with ids 0–3 reserved for PAD, SOS, EOS and UNK.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from a token stream. Words are ordered by
    /// descending frequency, ties broken lexicographically.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            if !RESERVED.contains(&t) {
                *counts.entry(t).or_default() += 1;
            }
        }
        let mut words: Vec<(&str, usize)> = counts.into_iter().collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let list = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(words.into_iter().map(|(w, _)| w.to_string()))
            .collect();
        Self::from_list(list)
    }

    /// Reconstructs a vocabulary from its id-ordered token list.
    pub fn from_list(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len() + 1 {
            return Err(Error::Input(format!(
                "vocabulary needs at least {} entries, got {}",
                RESERVED.len() + 1,
                tokens.len()
            )));
        }
        if tokens[..RESERVED.len()] != RESERVED {
            return Err(Error::Format("reserved vocabulary entries out of place".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary entry {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Space-joined words for `ids`, reserved ids omitted.
    pub fn render(&self, ids: &[usize]) -> String {
        ids.iter()
            .filter(|&&i| i >= UNK)
            .filter_map(|&i| self.token(i))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Lowercases, splits on whitespace and detaches punctuation into separate
/// tokens. Apostrophes stay inside words ("it's", "n't").
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_whitespace() {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
        } else if ch != '\'' && !ch.is_alphanumeric() {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            out.push(ch.to_string());
        } else {
            word.push(ch);
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// Id forms of one sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaddedSentence {
    /// Exactly `max_len` ids: the sentence truncated to `max_len` and padded
    /// with PAD.
    pub encoder: Vec<usize>,
    /// At most `max_len − 1` ids followed by EOS.
    pub target: Vec<usize>,
}

pub fn pad_and_index(tokens: &[String], vocab: &Vocabulary, max_len: usize) -> PaddedSentence {
    let ids: Vec<usize> = tokens.iter().map(|t| vocab.id_or_unk(t)).collect();
    let mut encoder: Vec<usize> = ids.iter().copied().take(max_len).collect();
    encoder.resize(max_len, PAD);
    let mut target: Vec<usize> = ids.into_iter().take(max_len.saturating_sub(1)).collect();
    target.push(EOS);
    PaddedSentence { encoder, target }
}
