//! Contrastive-reference selection: cluster a document's nearest
//! neighbours and take the member closest to each cluster centroid.
//!
//! Clustering runs on l2-normalized embeddings with Euclidean distance, so
//! Euclidean ordering agrees with cosine ordering.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::Index;
use crate::vector::{cosine_similarity, l2_normalize, squared_distance, Embedding};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefSelConfig {
    pub neighborhood_size: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
    pub seed: u64,
}

impl Default for RefSelConfig {
    fn default() -> Self {
        Self {
            neighborhood_size: 100,
            k_min: 3,
            k_max: 10,
            kmeans_restarts: 8,
            kmeans_max_iters: 100,
            seed: 0,
        }
    }
}

impl RefSelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neighborhood_size == 0 {
            return Err(Error::InvalidConfig("neighborhood_size must be >= 1".into()));
        }
        if self.k_min == 0 || self.k_min > self.k_max {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= k_min <= k_max, got k_min={} k_max={}",
                self.k_min, self.k_max
            )));
        }
        if self.kmeans_restarts == 0 || self.kmeans_max_iters == 0 {
            return Err(Error::InvalidConfig("kmeans restarts and iterations must be >= 1".into()));
        }
        Ok(())
    }

    fn kmeans_params(&self) -> KMeansParams {
        KMeansParams {
            restarts: self.kmeans_restarts,
            max_iters: self.kmeans_max_iters,
        }
    }
}

/// The contrastive references chosen for one document. Serialized as one
/// line of the reference-set JSON Lines file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub doc_id: String,
    pub chosen_k: usize,
    /// Absent when fewer than two neighbours made clustering meaningless.
    pub silhouette: Option<f64>,
    pub reference_ids: Vec<String>,
}

/// Up to `n` other documents by descending cosine similarity, ties broken
/// by ascending doc id.
pub fn nearest_neighbors(doc_id: &str, index: &Index, n: usize) -> Result<Vec<String>> {
    let target = index
        .get(doc_id)
        .ok_or_else(|| Error::UnknownDocument(doc_id.to_string()))?;
    let mut scored: Vec<(f64, &str)> = index
        .records()
        .iter()
        .filter(|r| r.doc_id != doc_id)
        .map(|r| Ok((cosine_similarity(&target.embedding, &r.embedding)?, r.doc_id.as_str())))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(scored.into_iter().take(n).map(|(_, id)| id.to_string()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansParams {
    pub restarts: usize,
    pub max_iters: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squared Euclidean distances.
    pub inertia: f64,
}

/// Lloyd's algorithm with k-means++ seeding, best of `params.restarts`
/// runs by inertia. Every cluster in `0..k` is non-empty on return.
pub fn kmeans_with(points: &[Vec<f64>], k: usize, params: &KMeansParams, seed: u64) -> Result<KMeansResult> {
    if k == 0 || k > points.len() {
        return Err(Error::InvalidK { k, n: points.len() });
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: p.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..params.restarts.max(1) {
        let run = lloyd(points, k, params.max_iters.max(1), &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansResult> {
    kmeans_with(points, k, &KMeansParams::default(), seed)
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && r < w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            // Guard against rounding leaving `chosen` on a zero-weight point.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn nearest_centroid(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_distance(p, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn update_centroids(points: &[Vec<f64>], assignments: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        let c = c.max(1) as f64;
        s.iter_mut().for_each(|x| *x /= c);
    }
    sums
}

/// Moves the farthest point of a multi-member cluster into each empty cluster.
fn repair_empty(points: &[Vec<f64>], assignments: &mut [usize], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let a = assignments[i];
            if counts[a] <= 1 {
                continue;
            }
            let d = squared_distance(p, &centroids[a]);
            if far.is_none_or(|(_, fd)| d > fd) {
                far = Some((i, d));
            }
        }
        if let Some((i, _)) = far {
            counts[assignments[i]] -= 1;
            assignments[i] = c;
            counts[c] = 1;
            centroids[c] = points[i].clone();
        }
    }
}

fn lloyd(points: &[Vec<f64>], k: usize, max_iters: usize, rng: &mut ChaCha8Rng) -> KMeansResult {
    let mut centroids = plus_plus_init(points, k, rng);
    let mut assignments: Vec<usize> = vec![usize::MAX; points.len()];
    for _ in 0..max_iters {
        let mut next: Vec<usize> = points.iter().map(|p| nearest_centroid(p, &centroids)).collect();
        repair_empty(points, &mut next, &mut centroids);
        let converged = next == assignments;
        assignments = next;
        centroids = update_centroids(points, &assignments, k);
        if converged {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&assignments)
        .map(|(p, &a)| squared_distance(p, &centroids[a]))
        .sum();
    KMeansResult {
        assignments,
        centroids,
        inertia,
    }
}

/// Pairwise Euclidean distances.
fn distance_matrix(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = squared_distance(&points[i], &points[j]).sqrt();
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

fn silhouette_from_distances(dist: &[Vec<f64>], assignments: &[usize]) -> Result<f64> {
    let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::DegenerateClustering);
    }
    let n = assignments.len();
    let mut total = 0.0;
    for i in 0..n {
        let own = assignments[i];
        if sizes[own] <= 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[assignments[j]] += dist[i][j];
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

/// Mean silhouette coefficient under Euclidean distance. Points in
/// singleton clusters contribute 0, as do points with `a = b = 0`.
pub fn silhouette_score(points: &[Vec<f64>], assignments: &[usize]) -> Result<f64> {
    if points.len() != assignments.len() {
        return Err(Error::LengthMismatch(points.len(), assignments.len()));
    }
    silhouette_from_distances(&distance_matrix(points), assignments)
}

/// Picks the contrastive references of `doc_id`.
pub fn select_references(doc_id: &str, index: &Index, cfg: &RefSelConfig) -> Result<ReferenceSet> {
    cfg.validate()?;
    let neighbors = nearest_neighbors(doc_id, index, cfg.neighborhood_size)?;
    if neighbors.len() < 2 {
        return Ok(ReferenceSet {
            doc_id: doc_id.to_string(),
            chosen_k: neighbors.len(),
            silhouette: None,
            reference_ids: neighbors,
        });
    }
    let points: Vec<Vec<f64>> = neighbors
        .iter()
        .map(|id| {
            let e: &Embedding = &index.get(id).expect("neighbor is indexed").embedding;
            l2_normalize(e).map(Embedding::into_inner)
        })
        .collect::<Result<_>>()?;
    let n = points.len();
    let dist = distance_matrix(&points);
    let params = cfg.kmeans_params();

    let mut best: Option<(usize, Option<f64>, KMeansResult)> = None;
    for k in cfg.k_min.min(n)..=cfg.k_max.min(n) {
        let run = kmeans_with(&points, k, &params, cfg.seed)?;
        let score = if k >= 2 {
            Some(silhouette_from_distances(&dist, &run.assignments)?)
        } else {
            None
        };
        let better = match (&best, score) {
            (None, _) => true,
            (Some((_, None, _)), Some(_)) => true,
            (Some((_, Some(b), _)), Some(s)) => s > *b,
            _ => false,
        };
        if better {
            best = Some((k, score, run));
        }
    }
    let (k, silhouette, run) = best.expect("k range is non-empty");

    let mut reference_ids = Vec::with_capacity(k);
    for c in 0..k {
        let pick = (0..n)
            .filter(|&i| run.assignments[i] == c)
            .min_by(|&i, &j| {
                let di = squared_distance(&points[i], &run.centroids[c]);
                let dj = squared_distance(&points[j], &run.centroids[c]);
                di.partial_cmp(&dj)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| neighbors[i].cmp(&neighbors[j]))
            })
            .expect("clusters are non-empty");
        reference_ids.push(neighbors[pick].clone());
    }
    Ok(ReferenceSet {
        doc_id: doc_id.to_string(),
        chosen_k: k,
        silhouette,
        reference_ids,
    })
}

/// Runs [`select_references`] for every document in parallel; output is
/// ordered by doc id.
pub fn select_all_references(index: &Index, cfg: &RefSelConfig) -> Result<Vec<ReferenceSet>> {
    let mut out: Vec<ReferenceSet> = index
        .records()
        .par_iter()
        .map(|r| select_references(&r.doc_id, index, cfg))
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    Ok(out)
}
