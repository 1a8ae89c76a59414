use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{norm, EmbeddingTable};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Independent k-means++ restarts; the lowest-inertia run is kept.
    pub restarts: usize,
    /// Cluster unit-length vectors (cosine geometry).
    pub normalize: bool,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: 100,
            seed: 42,
            max_iter: 300,
            restarts: 10,
            normalize: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Clustering {
    pub assignments: BTreeMap<String, usize>,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut chosen = vec![rng.random_range(0..points.len())];
    let mut dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total has a positive entry")
        } else {
            // every remaining point coincides with a centre
            (0..points.len()).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            dist[i] = dist[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> (Vec<usize>, f64, usize) {
    let dim = points[0].len();
    let k = centroids.len();
    let mut labels = vec![usize::MAX; points.len()];
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (c, _) = nearest(p, &centroids);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // re-seed an empty cluster at the worst-served point
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = sq_dist(&points[a], &centroids[labels[a]]);
                        let db = sq_dist(&points[b], &centroids[labels[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("non-empty");
                centroids[c] = points[far].clone();
                labels[far] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum();
    (labels, inertia, iterations)
}

/// Lloyd's k-means over the input vectors of `tokens` that are in the
/// vocabulary. Deterministic for a given seed.
pub fn kmeans_clusters<S: AsRef<str>>(
    table: &EmbeddingTable,
    tokens: &[S],
    config: &KMeansConfig,
) -> Result<Clustering> {
    if config.k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    let mut names: Vec<&str> = tokens.iter().map(AsRef::as_ref).filter(|t| table.contains(t)).collect();
    names.sort_unstable();
    names.dedup();
    if names.is_empty() {
        return Err(Error::Empty("no clustering tokens in the vocabulary"));
    }
    if config.k > names.len() {
        return Err(Error::Config(format!(
            "k = {} exceeds the {} tokens present",
            config.k,
            names.len()
        )));
    }
    let points: Vec<Vec<f64>> = names
        .iter()
        .map(|t| {
            let v = table.vector(t).expect("filtered");
            let n = norm(v);
            if config.normalize && n > 0.0 {
                v.iter().map(|x| x / n).collect()
            } else {
                v.to_vec()
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(Vec<usize>, f64, usize)> = None;
    for _ in 0..config.restarts.max(1) {
        let init = plus_plus(&points, config.k, &mut rng);
        let run = lloyd(&points, init, config.max_iter.max(1));
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    let (labels, inertia, iterations) = best.expect("at least one restart");
    Ok(Clustering {
        assignments: names.into_iter().map(str::to_owned).zip(labels).collect(),
        inertia,
        iterations,
    })
}

/// Fraction of tokens whose cluster's majority label equals their own label.
/// Tokens without a label are ignored.
pub fn purity(assignments: &BTreeMap<String, usize>, labels: &HashMap<String, String>) -> f64 {
    let mut per_cluster: BTreeMap<usize, HashMap<&str, usize>> = BTreeMap::new();
    let mut n = 0usize;
    for (token, &cluster) in assignments {
        if let Some(label) = labels.get(token) {
            *per_cluster.entry(cluster).or_default().entry(label).or_default() += 1;
            n += 1;
        }
    }
    if n == 0 {
        return 0.0;
    }
    let majority: usize = per_cluster
        .values()
        .map(|m| m.values().copied().max().unwrap_or(0))
        .sum();
    majority as f64 / n as f64
}

/// Projects vectors onto their first two principal components (power
/// iteration on the covariance), for scatter plots.
pub fn project_2d(vectors: &[&[f64]]) -> Vec<(f64, f64)> {
    let Some(first) = vectors.first() else {
        return Vec::new();
    };
    let d = first.len();
    let n = vectors.len() as f64;
    let mean: Vec<f64> = (0..d).map(|k| vectors.iter().map(|v| v[k]).sum::<f64>() / n).collect();
    let centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let cov_mul = |x: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; d];
        for row in &centered {
            let s: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            for k in 0..d {
                out[k] += s * row[k];
            }
        }
        out
    };
    let mut axes: Vec<Vec<f64>> = Vec::new();
    for a in 0..2.min(d) {
        let mut v: Vec<f64> = (0..d)
            .map(|k| if k == a { 1.0 } else { 0.5 / (k + 1) as f64 })
            .collect();
        for _ in 0..200 {
            let mut w = cov_mul(&v);
            for prev in &axes {
                let p: f64 = w.iter().zip(prev).map(|(x, y)| x * y).sum();
                for k in 0..d {
                    w[k] -= p * prev[k];
                }
            }
            let n = norm(&w);
            if n == 0.0 {
                break;
            }
            v = w.into_iter().map(|x| x / n).collect();
        }
        axes.push(v);
    }
    centered
        .iter()
        .map(|row| {
            let coord = |axis: Option<&Vec<f64>>| axis.map_or(0.0, |ax| row.iter().zip(ax).map(|(x, y)| x * y).sum());
            (coord(axes.first()), coord(axes.get(1)))
        })
        .collect()
}
