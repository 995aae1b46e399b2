use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Vocabulary, PAD};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const INIT_SCALE: f64 = 0.1;

/// `N(0, 0.1²)` rows with the PAD row zeroed.
pub fn init_embeddings_random(vocab: &Vocabulary, dim: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_SCALE).expect("valid scale");
    let data = (0..vocab.len() * dim).map(|_| normal.sample(&mut rng)).collect();
    let mut m = Matrix::new(vocab.len(), dim, data).expect("sized");
    m.row_mut(PAD).fill(0.0);
    m
}

/// Reads the word2vec text format (`word v1 … vd` per line, optional
/// `count dim` header). Vocabulary words missing from the file get random
/// rows as in [`init_embeddings_random`]; the PAD row is always zero.
pub fn load_embeddings_text(path: impl AsRef<Path>, vocab: &Vocabulary, seed: u64) -> Result<Matrix> {
    let path = path.as_ref();
    let content = String::from_utf8_lossy(&fs::read(path)?).into_owned();
    let mut dim: Option<usize> = None;
    let mut found: Vec<Option<Vec<f64>>> = vec![None; vocab.len()];
    for (lineno, line) in content.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if lineno == 0 && rest.len() == 1 && word.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
            continue;
        }
        let values: Vec<f64> = rest
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        match dim {
            None if values.is_empty() => {
                return Err(Error::Format(format!("{}:{}: no vector values", path.display(), lineno + 1)))
            }
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::Format(format!(
                    "{}:{}: expected {d} values, found {}",
                    path.display(),
                    lineno + 1,
                    values.len()
                )))
            }
            Some(_) => {}
        }
        if let Some(id) = vocab.id(word) {
            found[id] = Some(values);
        }
    }
    let dim = dim.ok_or_else(|| Error::Format(format!("{}: no embeddings", path.display())))?;
    let mut m = init_embeddings_random(vocab, dim, seed);
    let mut hits = 0;
    for (id, row) in found.into_iter().enumerate() {
        if let Some(values) = row {
            m.row_mut(id).copy_from_slice(&values);
            hits += 1;
        }
    }
    log::info!("embeddings: {hits}/{} vocabulary rows loaded from file", vocab.len());
    m.row_mut(PAD).fill(0.0);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn vocab() -> Vocabulary {
        Vocabulary::build(["good", "bad"]).unwrap()
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn full_coverage_matches_file() {
        let v = vocab();
        let mut text = String::from("6 4\n");
        for (i, t) in v.tokens().iter().enumerate() {
            text.push_str(&format!("{t} {i} 0.5 -1 2.25\n"));
        }
        let f = write_tmp(&text);
        let m = load_embeddings_text(f.path(), &v, 1).unwrap();
        assert_eq!(m.shape(), (6, 4));
        for i in 1..6 {
            assert_eq!(m.row(i), &[i as f64, 0.5, -1.0, 2.25]);
        }
        assert_eq!(m.row(PAD), &[0.0; 4]);
    }

    #[test]
    fn missing_rows_are_random_and_pad_is_zero() {
        let v = vocab();
        let f = write_tmp("good 1 2 3\n<pad> 9 9 9\n");
        let m = load_embeddings_text(f.path(), &v, 1).unwrap();
        assert_eq!(m.row(v.id("good").unwrap()), &[1.0, 2.0, 3.0]);
        assert_eq!(m.row(PAD), &[0.0; 3]);
        assert!(m.row(v.id("bad").unwrap()).iter().any(|x| *x != 0.0));
    }

    #[test]
    fn inconsistent_dims_rejected() {
        let f = write_tmp("good 1 2 3\nbad 1 2\n");
        assert!(matches!(load_embeddings_text(f.path(), &vocab(), 0), Err(Error::Format(_))));
    }

    #[test]
    fn random_init_reproducible() {
        let v = vocab();
        let a = init_embeddings_random(&v, 5, 42);
        assert_eq!(a, init_embeddings_random(&v, 5, 42));
        assert_ne!(a, init_embeddings_random(&v, 5, 43));
        assert_eq!(a.row(PAD), &[0.0; 5]);
    }
}
