use std::collections::HashMap;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dot, EmbeddingTable};
use crate::error::{Error, Result};
use crate::sequence::GeoSequence;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoftmaxMode {
    Full,
    NegativeSampling { negatives: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Context offsets `-window..=window` around each position.
    pub window: usize,
    pub dim: usize,
    pub epochs: usize,
    /// Initial rate; decays linearly towards `learning_rate * 1e-4`.
    pub learning_rate: f64,
    pub seed: u64,
    /// Written as `negatives = N`; 0 selects the full softmax.
    #[serde(rename = "negatives", with = "mode_as_negatives")]
    pub mode: SoftmaxMode,
    /// Evaluate the full objective after every epoch (costs one extra pass).
    pub track_objective: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            window: 5,
            dim: 100,
            epochs: 5,
            learning_rate: 0.025,
            seed: 42,
            mode: SoftmaxMode::Full,
            track_objective: true,
        }
    }
}

mod mode_as_negatives {
    use super::SoftmaxMode;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(mode: &SoftmaxMode, s: S) -> Result<S::Ok, S::Error> {
        match mode {
            SoftmaxMode::Full => s.serialize_u64(0),
            SoftmaxMode::NegativeSampling { negatives } => s.serialize_u64(*negatives as u64),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<SoftmaxMode, D::Error> {
        Ok(match usize::deserialize(d)? {
            0 => SoftmaxMode::Full,
            negatives => SoftmaxMode::NegativeSampling { negatives },
        })
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("window must be >= 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("dim must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if let SoftmaxMode::NegativeSampling { negatives: 0 } = self.mode {
            return Err(Error::Config("negative sampling needs at least one negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainReport {
    /// Objective before training followed by one value per epoch; empty
    /// when tracking is off.
    pub objective: Vec<f64>,
    pub pairs_per_epoch: usize,
}

/// Vocabulary ordered by descending frequency, ties by token.
pub fn build_vocab(sequences: &[GeoSequence]) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in sequences {
        for t in s.tokens() {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut v: Vec<(&str, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    v.into_iter().map(|(t, _)| t.to_owned()).collect()
}

fn encode(table: &EmbeddingTable, sequences: &[GeoSequence]) -> Result<Vec<Vec<usize>>> {
    sequences
        .iter()
        .map(|s| {
            s.tokens()
                .map(|t| table.index_of(t).ok_or_else(|| Error::OutOfVocabulary(t.to_owned())))
                .collect()
        })
        .collect()
}

/// Calls `f(center, context)` for every in-range offset pair.
fn for_each_pair(seqs: &[Vec<usize>], window: usize, mut f: impl FnMut(usize, usize)) {
    for s in seqs {
        for i in 0..s.len() {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(s.len() - 1);
            for j in lo..=hi {
                if j != i {
                    f(s[i], s[j]);
                }
            }
        }
    }
}

/// Softmax over `v_center . v'_w` for every w, max-subtracted.
fn softmax_row(table: &EmbeddingTable, center: usize, out: &mut Vec<f64>) {
    let vc = table.input_row(center);
    out.clear();
    out.extend((0..table.len()).map(|w| dot(vc, table.output_row(w))));
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for x in out.iter_mut() {
        *x = (*x - max).exp();
        z += *x;
    }
    for x in out.iter_mut() {
        *x /= z;
    }
}

/// `log P(context | center)` computed stably.
fn log_prob(table: &EmbeddingTable, center: usize, context: usize) -> f64 {
    let vc = table.input_row(center);
    let scores: Vec<f64> = (0..table.len()).map(|w| dot(vc, table.output_row(w))).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scores[context] - lse
}

/// `P(context | center)` under the full softmax.
pub fn softmax_prob(table: &EmbeddingTable, center: &str, context: &str) -> Result<f64> {
    let c = table
        .index_of(center)
        .ok_or_else(|| Error::OutOfVocabulary(center.to_owned()))?;
    let o = table
        .index_of(context)
        .ok_or_else(|| Error::OutOfVocabulary(context.to_owned()))?;
    let mut row = Vec::new();
    softmax_row(table, c, &mut row);
    Ok(row[o])
}

/// Sum of `log P(w_{i+j} | w_i)` over sequences, positions and in-range
/// offsets `0 < |j| <= window`.
pub fn objective(table: &EmbeddingTable, sequences: &[GeoSequence], window: usize) -> Result<f64> {
    let seqs = encode(table, sequences)?;
    Ok(objective_encoded(table, &seqs, window))
}

fn objective_encoded(table: &EmbeddingTable, seqs: &[Vec<usize>], window: usize) -> f64 {
    let mut total = 0.0;
    for_each_pair(seqs, window, |c, o| total += log_prob(table, c, o));
    total
}

/// Gradient of the objective with respect to both matrices, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

pub fn objective_gradient(table: &EmbeddingTable, sequences: &[GeoSequence], window: usize) -> Result<Gradient> {
    let seqs = encode(table, sequences)?;
    let d = table.dim();
    let mut g = Gradient {
        input: vec![0.0; table.input_matrix().len()],
        output: vec![0.0; table.output_matrix().len()],
    };
    let mut p = Vec::new();
    for_each_pair(&seqs, window, |c, o| {
        softmax_row(table, c, &mut p);
        let vc = table.input_row(c);
        for (w, &pw) in p.iter().enumerate() {
            let coeff = if w == o { 1.0 } else { 0.0 } - pw;
            let vo = table.output_row(w);
            for k in 0..d {
                g.input[c * d + k] += coeff * vo[k];
                g.output[w * d + k] += coeff * vc[k];
            }
        }
    });
    Ok(g)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Unigram^0.75 sampling table for negative sampling.
fn noise_table(seqs: &[Vec<usize>], vocab: usize) -> Vec<usize> {
    let mut counts = vec![0usize; vocab];
    for s in seqs {
        for &t in s {
            counts[t] += 1;
        }
    }
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let total: f64 = weights.iter().sum();
    let size = (vocab * 100).max(1_000);
    let mut table = Vec::with_capacity(size);
    for (w, &wt) in weights.iter().enumerate() {
        let n = ((wt / total) * size as f64).round() as usize;
        table.extend(std::iter::repeat_n(w, n.max(1)));
    }
    table
}

/// Trains skip-gram embeddings by stochastic gradient ascent. Sequences are
/// visited in the given order, so results are reproducible for a seed.
pub fn train(sequences: &[GeoSequence], config: &TrainConfig) -> Result<(EmbeddingTable, TrainReport)> {
    config.validate()?;
    let vocab = build_vocab(sequences);
    if vocab.is_empty() {
        return Err(Error::Empty("vocabulary"));
    }
    if vocab.len() < 2 {
        return Err(Error::VocabularyTooSmall(vocab.len()));
    }
    let d = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let input: Vec<f64> = (0..vocab.len() * d)
        .map(|_| (rng.random::<f64>() - 0.5) / d as f64)
        .collect();
    let output = vec![0.0; vocab.len() * d];
    let mut table = EmbeddingTable::new(d, vocab, input, output)?;
    let seqs = encode(&table, sequences)?;

    let mut pairs = 0usize;
    for_each_pair(&seqs, config.window, |_, _| pairs += 1);
    let total = (pairs * config.epochs).max(1) as f64;
    let noise = match config.mode {
        SoftmaxMode::NegativeSampling { .. } => noise_table(&seqs, table.len()),
        SoftmaxMode::Full => Vec::new(),
    };

    let mut report = TrainReport {
        objective: Vec::new(),
        pairs_per_epoch: pairs,
    };
    if config.track_objective {
        report.objective.push(objective_encoded(&table, &seqs, config.window));
    }

    let n = table.len();
    let mut p = Vec::with_capacity(n);
    let mut grad_c = vec![0.0; d];
    let mut vc = vec![0.0; d];
    let mut seen = 0usize;
    for epoch in 0..config.epochs {
        for s in &seqs {
            for i in 0..s.len() {
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window).min(s.len() - 1);
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    let lr = config.learning_rate * (1.0 - seen as f64 / total).max(1e-4);
                    seen += 1;
                    let (c, o) = (s[i], s[j]);
                    vc.copy_from_slice(table.input_row(c));
                    grad_c.iter_mut().for_each(|x| *x = 0.0);
                    match config.mode {
                        SoftmaxMode::Full => {
                            softmax_row(&table, c, &mut p);
                            let (_, out) = table.matrices_mut();
                            for (w, &pw) in p.iter().enumerate() {
                                let coeff = if w == o { 1.0 } else { 0.0 } - pw;
                                let row = &mut out[w * d..(w + 1) * d];
                                for k in 0..d {
                                    grad_c[k] += coeff * row[k];
                                    row[k] += lr * coeff * vc[k];
                                }
                            }
                        }
                        SoftmaxMode::NegativeSampling { negatives } => {
                            let (_, out) = table.matrices_mut();
                            for t in 0..=negatives {
                                let (target, label) = if t == 0 {
                                    (o, 1.0)
                                } else {
                                    let w = noise[rng.random_range(0..noise.len())];
                                    if w == o {
                                        continue;
                                    }
                                    (w, 0.0)
                                };
                                let row = &mut out[target * d..(target + 1) * d];
                                let g = label - sigmoid(dot(&vc, row));
                                for k in 0..d {
                                    grad_c[k] += g * row[k];
                                    row[k] += lr * g * vc[k];
                                }
                            }
                        }
                    }
                    let row = table.input_row_mut(c);
                    for k in 0..d {
                        row[k] += lr * grad_c[k];
                    }
                }
            }
        }
        if config.track_objective {
            let value = objective_encoded(&table, &seqs, config.window);
            debug!("epoch {epoch}: objective {value}");
            if !value.is_finite() {
                return Err(Error::Diverged { epoch, value });
            }
            report.objective.push(value);
        }
        if !table.is_finite() {
            return Err(Error::Diverged { epoch, value: f64::NAN });
        }
    }
    Ok((table, report))
}
