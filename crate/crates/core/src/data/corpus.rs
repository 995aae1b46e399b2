use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tokenize;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sentiment {
    Negative = 0,
    Positive = 1,
}

impl Sentiment {
    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Sentiment::Negative),
            1 => Some(Sentiment::Positive),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> Self {
        match self {
            Sentiment::Negative => Sentiment::Positive,
            Sentiment::Positive => Sentiment::Negative,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Sentiment::Negative => "neg",
            Sentiment::Positive => "pos",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "neg" | "negative" | "0" => Some(Sentiment::Negative),
            "pos" | "positive" | "1" => Some(Sentiment::Positive),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub text: String,
    pub tokens: Vec<String>,
    pub label: Sentiment,
}

impl Example {
    pub fn new(text: impl Into<String>, label: Sentiment) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Self { text, tokens, label }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.tokens.iter().any(|t| t == word)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    All,
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub examples: Vec<Example>,
    pub split: Split,
    /// Malformed input lines dropped by the loader.
    pub skipped_lines: usize,
}

impl Corpus {
    pub fn new(examples: Vec<Example>) -> Self {
        Self {
            examples,
            split: Split::All,
            skipped_lines: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn count(&self, label: Sentiment) -> usize {
        self.examples.iter().filter(|e| e.label == label).count()
    }

    /// Seeded random 90%/10% train/test partition. The training part holds
    /// `⌊0.9 N⌋` examples; the test part is never empty when `N ≥ 2`.
    pub fn split(&self, seed: u64) -> (Corpus, Corpus) {
        let n = self.examples.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut n_train = n * 9 / 10;
        if n >= 2 && n_train == n {
            n_train = n - 1;
        }
        let pick = |idx: &[usize], split| Corpus {
            examples: idx.iter().map(|&i| self.examples[i].clone()).collect(),
            split,
            skipped_lines: 0,
        };
        (
            pick(&order[..n_train], Split::Train),
            pick(&order[n_train..], Split::Test),
        )
    }

    /// `text<TAB>label` lines, LF-terminated.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.examples {
            out.push_str(&e.text);
            out.push('\t');
            out.push_str(&e.label.index().to_string());
            out.push('\n');
        }
        out
    }
}

fn read_lossy(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

/// Parses `sentence<TAB>{0|1}` lines. Lines without a tab or with a label
/// other than 0/1 are skipped and counted; blank lines are ignored.
pub fn load_corpus_tsv(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let content = read_lossy(path)?;
    let mut examples = Vec::new();
    let mut skipped = 0;
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parsed = line.rsplit_once('\t').and_then(|(text, label)| {
            let label = match label.trim() {
                "0" => Sentiment::Negative,
                "1" => Sentiment::Positive,
                _ => return None,
            };
            let text = text.trim();
            (!text.is_empty()).then(|| Example::new(text, label))
        });
        match parsed {
            Some(e) => examples.push(e),
            None => {
                log::warn!("{}:{}: malformed line skipped", path.display(), lineno + 1);
                skipped += 1;
            }
        }
    }
    if examples.is_empty() {
        return Err(Error::Format(format!(
            "{}: no labelled sentences found",
            path.display()
        )));
    }
    Ok(Corpus {
        examples,
        split: Split::All,
        skipped_lines: skipped,
    })
}

/// Loads a positive/negative pair of one-sentence-per-line files.
pub fn load_corpus_pos_neg(pos_path: impl AsRef<Path>, neg_path: impl AsRef<Path>) -> Result<Corpus> {
    let mut examples = Vec::new();
    for (path, label) in [
        (pos_path.as_ref(), Sentiment::Positive),
        (neg_path.as_ref(), Sentiment::Negative),
    ] {
        let content = read_lossy(path)?;
        examples.extend(
            content
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(|l| Example::new(l, label)),
        );
    }
    if examples.is_empty() {
        return Err(Error::Format("positive/negative files contain no sentences".into()));
    }
    Ok(Corpus::new(examples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn tsv_parses_labels() {
        let f = write_tmp("good .\t1\nbad .\t0\n");
        let c = load_corpus_tsv(f.path()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.examples[0].label, Sentiment::Positive);
        assert_eq!(c.examples[1].label, Sentiment::Negative);
        assert_eq!(c.examples[0].tokens, vec!["good", "."]);
        assert_eq!(c.skipped_lines, 0);
    }

    #[test]
    fn tsv_skips_malformed() {
        let f = write_tmp("good .\t1\nno tab here\nbad .\t0\n\n");
        let c = load_corpus_tsv(f.path()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.skipped_lines, 1);
    }

    #[test]
    fn tsv_errors() {
        let f = write_tmp("nothing useful\n");
        assert!(matches!(load_corpus_tsv(f.path()), Err(Error::Format(_))));
        assert!(matches!(
            load_corpus_tsv("/nonexistent/corpus.tsv"),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn pos_neg_pair() {
        let pos = write_tmp("a\nb\nc\nd\ne\n");
        let neg = write_tmp("f\ng\nh\ni\nj\n");
        let c = load_corpus_pos_neg(pos.path(), neg.path()).unwrap();
        assert_eq!(c.len(), 10);
        assert_eq!(c.count(Sentiment::Positive), 5);
        assert_eq!(c.count(Sentiment::Negative), 5);
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let c = Corpus::new(
            (0..50)
                .map(|i| Example::new(format!("sentence {i}"), Sentiment::from_index(i % 2).unwrap()))
                .collect(),
        );
        let (tr, te) = c.split(3);
        assert_eq!((tr.len(), te.len()), (45, 5));
        assert_eq!(tr.split, Split::Train);
        let (tr2, te2) = c.split(3);
        assert_eq!(tr, tr2);
        assert_eq!(te, te2);
        for e in &te.examples {
            assert!(!tr.examples.iter().any(|t| t.text == e.text));
        }
        let (tr3, _) = c.split(4);
        assert_ne!(tr, tr3);
    }

    #[test]
    fn tsv_round_trip() {
        let c = Corpus::new(vec![
            Example::new("this phone is great", Sentiment::Positive),
            Example::new("what a bad movie", Sentiment::Negative),
        ]);
        let f = write_tmp(&c.to_tsv());
        let back = load_corpus_tsv(f.path()).unwrap();
        assert_eq!(back.examples, c.examples);
    }
}
