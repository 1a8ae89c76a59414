//! Geographic embeddings: a joint vocabulary of AD names and geographic
//! words, trained with skip-gram over extracted sequences.

mod kmeans;
mod skipgram;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub use kmeans::{kmeans_clusters, project_2d, purity, Clustering, KMeansConfig};
pub use skipgram::{
    build_vocab, objective, objective_gradient, softmax_prob, train, Gradient, SoftmaxMode, TrainConfig, TrainReport,
};

/// Token vectors. `input` (v) is the query-time representation; `output`
/// (v') is kept so training can resume.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    input: Vec<f64>,
    output: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, vocab: Vec<String>, input: Vec<f64>, output: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dim must be >= 1".into()));
        }
        if input.len() != vocab.len() * dim || output.len() != vocab.len() * dim {
            return Err(Error::Config(format!(
                "matrix size mismatch: {} tokens x {dim} vs {} / {} values",
                vocab.len(),
                input.len(),
                output.len()
            )));
        }
        if let Some(bad) = input.iter().chain(&output).find(|x| !x.is_finite()) {
            return Err(Error::Config(format!("non-finite embedding value {bad}")));
        }
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, t) in vocab.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!("invalid token {t:?}")));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate token {t:?}")));
            }
        }
        Ok(EmbeddingTable {
            dim,
            vocab,
            index,
            input,
            output,
        })
    }

    /// All-zero table over `vocab`.
    pub fn zeros(dim: usize, vocab: Vec<String>) -> Result<Self> {
        let n = vocab.len() * dim;
        Self::new(dim, vocab, vec![0.0; n], vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn input_row(&self, i: usize) -> &[f64] {
        &self.input[i * self.dim..(i + 1) * self.dim]
    }

    pub fn output_row(&self, i: usize) -> &[f64] {
        &self.output[i * self.dim..(i + 1) * self.dim]
    }

    pub fn input_row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.input[i * self.dim..(i + 1) * self.dim]
    }

    pub fn output_row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.output[i * self.dim..(i + 1) * self.dim]
    }

    /// Query-time vector of a token.
    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.index_of(token).map(|i| self.input_row(i))
    }

    pub fn input_matrix(&self) -> &[f64] {
        &self.input
    }

    pub fn output_matrix(&self) -> &[f64] {
        &self.output
    }

    pub(crate) fn matrices_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.input, &mut self.output)
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|x| x.is_finite())
    }

    fn render(&self, matrix: &[f64]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.vocab.len(), self.dim);
        for (i, t) in self.vocab.iter().enumerate() {
            s.push_str(t);
            for x in &matrix[i * self.dim..(i + 1) * self.dim] {
                let _ = write!(s, " {x}");
            }
            s.push('\n');
        }
        s
    }

    /// Input vectors in the text format read by [`EmbeddingTable::from_text`].
    pub fn to_text(&self) -> String {
        self.render(&self.input)
    }

    /// Writes `path` (input vectors) and `path.out` (output vectors).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.render(&self.input)).map_err(|e| Error::io(path, e))?;
        let out = output_path(path);
        fs::write(&out, self.render(&self.output)).map_err(|e| Error::io(&out, e))
    }

    /// Loads `path`, plus `path.out` when present (zeros otherwise).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (dim, vocab, input) = parse(&text)?;
        let out = output_path(path);
        let output = if out.exists() {
            let text = fs::read_to_string(&out).map_err(|e| Error::io(&out, e))?;
            let (odim, ovocab, output) = parse(&text)?;
            if odim != dim || ovocab != vocab {
                return Err(Error::Config(format!(
                    "{} does not match {}",
                    out.display(),
                    path.display()
                )));
            }
            output
        } else {
            vec![0.0; input.len()]
        };
        Self::new(dim, vocab, input, output)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (dim, vocab, input) = parse(text)?;
        let n = input.len();
        Self::new(dim, vocab, input, vec![0.0; n])
    }
}

fn output_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".out");
    PathBuf::from(s)
}

fn parse(text: &str) -> Result<(usize, Vec<String>, Vec<f64>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let parse_err = |line: usize, message: String| Error::Parse {
        line: line + 1,
        message,
    };
    let (hl, header) = lines.next().ok_or_else(|| parse_err(0, "missing header".into()))?;
    let mut head = header.split_whitespace().map(str::parse::<usize>);
    let (Some(Ok(n)), Some(Ok(dim)), None) = (head.next(), head.next(), head.next()) else {
        return Err(parse_err(hl, format!("bad header {header:?}")));
    };
    let mut vocab = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * dim);
    for (ln, line) in lines {
        let mut fields = line.split(' ');
        let token = fields.next().unwrap_or_default().to_owned();
        let before = values.len();
        for f in fields {
            values.push(
                f.parse::<f64>()
                    .map_err(|e| parse_err(ln, format!("bad float {f:?}: {e}")))?,
            );
        }
        if values.len() - before != dim {
            return Err(parse_err(ln, format!("expected {dim} values for {token:?}")));
        }
        vocab.push(token);
    }
    if vocab.len() != n {
        return Err(parse_err(hl, format!("header says {n} tokens, found {}", vocab.len())));
    }
    Ok((dim, vocab, values))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        0.0
    } else {
        (dot(a, b) / d).clamp(-1.0, 1.0)
    }
}
