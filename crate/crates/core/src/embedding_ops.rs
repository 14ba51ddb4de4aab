//! Cosine similarity, top-K pair search and Lloyd's K-Means over concept
//! embeddings.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::ConceptSet;
use crate::error::{Error, Result};

pub const DEFAULT_TOP_PAIRS: usize = 600;
pub const DEFAULT_KMEANS_MAX_ITER: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarPair {
    pub i: usize,
    pub j: usize,
    pub sim: f64,
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidArgument(format!(
            "vector lengths differ: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::InvalidArgument("zero-norm vector".into()));
    }
    Ok(clamp_unit(dot(u, v) / (nu * nv)))
}

fn row_norms(cs: &ConceptSet) -> Result<Vec<f64>> {
    let norms: Vec<f64> = cs.rows().map(norm).collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::InvalidArgument(format!(
            "concept {:?} has a zero-norm embedding",
            cs.name(i)
        )));
    }
    Ok(norms)
}

fn pair_sim(cs: &ConceptSet, norms: &[f64], i: usize, j: usize) -> f64 {
    clamp_unit(dot(cs.row(i), cs.row(j)) / (norms[i] * norms[j]))
}

/// Highest similarity first, then `(i, j)` ascending.
fn pair_order(a: &SimilarPair, b: &SimilarPair) -> Ordering {
    b.sim.total_cmp(&a.sim).then(a.i.cmp(&b.i)).then(a.j.cmp(&b.j))
}

/// The `k` most similar unordered pairs, most similar first.
pub fn top_pairs(cs: &ConceptSet, k: usize) -> Result<Vec<SimilarPair>> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be positive".into()));
    }
    let norms = row_norms(cs)?;
    let n = cs.len();
    let mut pairs: Vec<SimilarPair> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let norms = &norms;
            (i + 1..n).map(move |j| SimilarPair {
                i,
                j,
                sim: pair_sim(cs, norms, i, j),
            })
        })
        .collect();
    let k = k.min(pairs.len());
    if k < pairs.len() {
        pairs.select_nth_unstable_by(k, pair_order);
        pairs.truncate(k);
    }
    pairs.sort_unstable_by(pair_order);
    Ok(pairs)
}

/// For each concept, its highest cosine similarity to any other concept,
/// sorted descending with concept id as tie-break.
pub fn max_similarity_rank(cs: &ConceptSet) -> Result<Vec<(usize, f64)>> {
    let norms = row_norms(cs)?;
    let n = cs.len();
    let mut ranked: Vec<(usize, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let best = (0..n)
                .filter(|&j| j != i)
                .map(|j| pair_sim(cs, &norms, i, j))
                .fold(f64::NEG_INFINITY, f64::max);
            (i, best)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Output of [`kmeans`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub seed: u64,
    pub inertia: f64,
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Inertia after every assignment step, starting with the initial one.
    #[serde(skip)]
    pub inertia_history: Vec<f64>,
    #[serde(skip)]
    pub iterations: usize,
    #[serde(skip)]
    pub converged: bool,
}

impl ClusterAssignment {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }
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

fn sample_d2(d2: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in d2.iter().enumerate() {
        acc += w;
        if w > 0.0 && acc > target {
            return i;
        }
    }
    // rounding can leave `target` just above the final partial sum
    d2.iter().rposition(|&w| w > 0.0).unwrap()
}

/// Greedy k-means++: each new centre is the best of `2 + ln k` D²-sampled
/// candidates, judged by the potential it leaves behind.
fn plus_plus_init(cs: &ConceptSet, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = cs.len();
    let local_trials = 2 + (k as f64).ln().floor() as usize;
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![cs.row(first).to_vec()];
    let mut d2: Vec<f64> = cs.rows().map(|r| sq_dist(r, &centroids[0])).collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let candidates: Vec<usize> = (0..local_trials).map(|_| sample_d2(&d2, total, rng)).collect();
            let potentials: Vec<f64> = candidates
                .par_iter()
                .map(|&c| {
                    let centre = cs.row(c);
                    cs.rows().zip(&d2).map(|(row, &d)| d.min(sq_dist(row, centre))).sum()
                })
                .collect();
            let best = (0..candidates.len())
                .min_by(|&a, &b| potentials[a].total_cmp(&potentials[b]).then(a.cmp(&b)))
                .unwrap();
            candidates[best]
        } else {
            // every point coincides with a centroid: fall back to uniform over unchosen rows
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        let centroid = cs.row(pick).to_vec();
        for (i, row) in cs.rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(row, &centroid));
        }
        centroids.push(centroid);
    }
    centroids
}

/// Nearest-centroid assignment followed by empty-cluster repair. Returns the
/// inertia of the repaired assignment against the (possibly reseeded)
/// centroids.
fn assign_step(cs: &ConceptSet, centroids: &mut [Vec<f64>], assignment: &mut [usize]) -> f64 {
    let k = centroids.len();
    let near: Vec<(usize, f64)> = (0..cs.len())
        .into_par_iter()
        .map(|i| nearest(cs.row(i), centroids))
        .collect();
    let mut dist: Vec<f64> = Vec::with_capacity(near.len());
    let mut sizes = vec![0usize; k];
    for (i, (c, d)) in near.into_iter().enumerate() {
        assignment[i] = c;
        dist.push(d);
        sizes[c] += 1;
    }

    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        // farthest point from its own centroid, taken from a cluster that keeps a member
        let mut far: Option<usize> = None;
        for i in 0..dist.len() {
            if sizes[assignment[i]] > 1 && far.is_none_or(|f| dist[i] > dist[f]) {
                far = Some(i);
            }
        }
        let p = far.expect("k <= N leaves a cluster with two members");
        sizes[assignment[p]] -= 1;
        assignment[p] = empty;
        sizes[empty] = 1;
        dist[p] = 0.0;
        centroids[empty] = cs.row(p).to_vec();
    }
    dist.iter().sum()
}

fn update_centroids(cs: &ConceptSet, assignment: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; cs.dim()]; k];
    let mut counts = vec![0usize; k];
    for (row, &c) in cs.rows().zip(assignment) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        let count = count as f64;
        sum.iter_mut().for_each(|s| *s /= count);
    }
    sums
}

/// Lloyd's algorithm from k-means++ seeding, on squared Euclidean distance.
///
/// Stops when an assignment step leaves every label unchanged or after
/// `max_iter` centroid updates. Every cluster is non-empty on return.
pub fn kmeans(cs: &ConceptSet, k: usize, seed: u64, max_iter: usize) -> Result<ClusterAssignment> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k > cs.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the number of concepts ({})",
            cs.len()
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(cs, k, &mut rng);
    let mut assignment = vec![0usize; cs.len()];
    let mut history = vec![assign_step(cs, &mut centroids, &mut assignment)];

    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        centroids = update_centroids(cs, &assignment, k);
        let mut next = vec![0usize; cs.len()];
        history.push(assign_step(cs, &mut centroids, &mut next));
        if next == assignment {
            converged = true;
            break;
        }
        assignment = next;
    }

    Ok(ClusterAssignment {
        k,
        seed,
        inertia: *history.last().unwrap(),
        assignment,
        centroids,
        inertia_history: history,
        iterations,
        converged,
    })
}
