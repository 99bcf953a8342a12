use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use crate::error::{Result, SpinnError};
use crate::tensor::{Float, Matrix, RngState};
use crate::transitions::PAD_TOKEN;

/// Row of the padding token, always zero.
pub const PAD_INDEX: usize = 0;
/// Row shared by every out-of-vocabulary token.
pub const OOV_INDEX: usize = 1;

/// Frozen word vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    vocab: HashMap<String, usize>,
    matrix: Matrix,
}

impl EmbeddingTable {
    fn with_reserved(dim: usize, rng: &mut RngState) -> Result<(HashMap<String, usize>, Vec<Float>)> {
        if dim == 0 {
            return Err(SpinnError::Config("embedding width must be positive".into()));
        }
        let mut data = vec![0.0; dim];
        data.extend((0..dim).map(|_| rng.uniform(-0.05, 0.05) as Float));
        Ok((HashMap::new(), data))
    }

    /// Reads GloVe text (`token v1 … v_dim` per line), keeping tokens in `filter`
    /// when given. The OOV vector is drawn once from `U[-0.05, 0.05]`.
    pub fn from_glove_reader<R: BufRead>(
        reader: R,
        dim: usize,
        filter: Option<&HashSet<String>>,
        rng: &mut RngState,
    ) -> Result<Self> {
        let (mut vocab, mut data) = Self::with_reserved(dim, rng)?;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(' ').filter(|f| !f.is_empty());
            let token = fields.next().unwrap_or_default().to_string();
            let values: Vec<&str> = fields.collect();
            if values.len() != dim {
                return Err(SpinnError::Data {
                    line: i + 1,
                    message: format!("expected {} columns, found {}", dim + 1, values.len() + 1),
                });
            }
            if filter.is_some_and(|f| !f.contains(&token)) || vocab.contains_key(&token) || token == PAD_TOKEN {
                continue;
            }
            let start = data.len();
            for v in values {
                let x: Float = v.parse().map_err(|_| SpinnError::Data {
                    line: i + 1,
                    message: format!("bad number {v:?}"),
                })?;
                data.push(x);
            }
            if data[start..].iter().any(|x| !x.is_finite()) {
                return Err(SpinnError::Data { line: i + 1, message: "non-finite value".into() });
            }
            vocab.insert(token, start / dim);
        }
        let rows = data.len() / dim;
        Ok(EmbeddingTable { vocab, matrix: Matrix::new(rows, dim, data)? })
    }

    pub fn load_glove(path: &Path, dim: usize, filter: Option<&HashSet<String>>, rng: &mut RngState) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_glove_reader(std::io::BufReader::new(file), dim, filter, rng)
    }

    /// Deterministic stand-in for GloVe: every token gets its own vector from
    /// `U[-0.5, 0.5]`, seeded by a hash of the token and `seed`.
    pub fn synthetic<'a, I>(tokens: I, dim: usize, seed: u64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut rng = RngState::derived(seed, 0x00f0_0f00);
        let (mut vocab, mut data) = Self::with_reserved(dim, &mut rng)?;
        let mut sorted: Vec<&str> = tokens.into_iter().filter(|t| *t != PAD_TOKEN).collect();
        sorted.sort_unstable();
        sorted.dedup();
        for tok in sorted {
            let mut r = RngState::derived(seed, fnv1a(tok.as_bytes()));
            vocab.insert(tok.to_string(), data.len() / dim);
            data.extend((0..dim).map(|_| r.uniform(-0.5, 0.5) as Float));
        }
        let rows = data.len() / dim;
        Ok(EmbeddingTable { vocab, matrix: Matrix::new(rows, dim, data)? })
    }

    pub fn lookup(&self, token: &str) -> usize {
        if token == PAD_TOKEN {
            return PAD_INDEX;
        }
        self.vocab.get(token).copied().unwrap_or(OOV_INDEX)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vocab.contains_key(token)
    }

    pub fn vector(&self, token: &str) -> &[Float] {
        self.matrix.row(self.lookup(token))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    /// Number of rows, reserved ones included.
    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glove_rows_oov_and_padding() {
        let text = "the 0.1 0.2 0.3\ncat -1 0 1\n";
        let t = EmbeddingTable::from_glove_reader(text.as_bytes(), 3, None, &mut RngState::new(1)).unwrap();
        assert_eq!(t.vector("the"), &[0.1, 0.2, 0.3]);
        assert_eq!(t.vector(""), &[0.0; 3]);
        assert_eq!(t.lookup("dog"), OOV_INDEX);
        assert_eq!(t.vector("dog"), t.vector("zebra"));
        assert!(t.vector("dog").iter().all(|x| x.abs() <= 0.05));
        let bad = EmbeddingTable::from_glove_reader("a 1 2\n".as_bytes(), 3, None, &mut RngState::new(1));
        assert!(matches!(bad, Err(SpinnError::Data { line: 1, .. })));
    }

    #[test]
    fn filter_and_synthetic_determinism() {
        let keep: HashSet<String> = ["cat".to_string()].into();
        let t = EmbeddingTable::from_glove_reader("the 1\ncat 2\n".as_bytes(), 1, Some(&keep), &mut RngState::new(1))
            .unwrap();
        assert!(!t.contains("the") && t.contains("cat"));
        let a = EmbeddingTable::synthetic(["b", "a"], 4, 9).unwrap();
        let b = EmbeddingTable::synthetic(["a", "b", "a"], 4, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.vector("a"), a.vector("b"));
    }
}
