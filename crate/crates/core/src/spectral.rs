//! Spectral clustering on a symmetric nonnegative affinity: symmetric
//! normalized Laplacian embedding followed by seeded k-means with k-means++
//! initialization and restarts.

use ndarray::prelude::*;
use ndarray_linalg::{Eigh, UPLO};
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Errors raised by spectral clustering.
#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("affinity must be square, got {rows} × {cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("affinity is not exactly symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("affinity entry ({i}, {j}) = {value} is negative or non-finite")]
    BadEntry { i: usize, j: usize, value: f64 },
    #[error("cluster count {k} must be between 1 and the sample count {n}")]
    BadClusterCount { k: usize, n: usize },
    #[error("k-means needs at least one restart")]
    NoRestarts,
}

/// Clustering stage configuration.
#[derive(Debug, Clone)]
pub struct SpectralConfig {
    pub k: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
    pub seed: u64,
}

impl SpectralConfig {
    /// Config with the default restart and iteration budget (20 restarts
    /// seeded `seed + 0..19`, 100 Lloyd iterations each).
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            kmeans_restarts: 20,
            kmeans_max_iters: 100,
            seed,
        }
    }
}

/// Symmetric nonnegative affinity over `n` samples. Construction validates
/// bit-exact symmetry, nonnegativity, and finiteness.
#[derive(Debug, Clone)]
pub struct AffinityMatrix {
    w: Array2<f64>,
}

impl AffinityMatrix {
    pub fn new(w: Array2<f64>) -> Result<Self, SpectralError> {
        if !w.is_square() {
            return Err(SpectralError::NotSquare {
                rows: w.nrows(),
                cols: w.ncols(),
            });
        }
        for ((i, j), &x) in w.indexed_iter() {
            if !x.is_finite() || x < 0.0 {
                return Err(SpectralError::BadEntry { i, j, value: x });
            }
            if w[[j, i]] != x {
                return Err(SpectralError::NotSymmetric { i, j });
            }
        }
        Ok(Self { w })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.w
    }
}

/// Rows of the `n × k` spectral embedding: top-k eigenvectors of
/// `D^{-1/2}·W·D^{-1/2}` (ties broken by index), rows scaled to unit norm
/// with zero rows left untouched. Zero degrees are regularized to 1e-12.
pub fn normalized_embedding(w: &AffinityMatrix, k: usize) -> Result<Array2<f64>, SpectralError> {
    let n = w.n();
    if k < 1 || k > n {
        return Err(SpectralError::BadClusterCount { k, n });
    }
    let mut deg = w.matrix().sum_axis(Axis(1));
    for (i, d) in deg.iter_mut().enumerate() {
        if *d == 0.0 {
            log::warn!("sample {i} is isolated; regularizing its zero degree");
            *d = 1e-12;
        }
    }
    let inv_sqrt = deg.mapv(|d| 1.0 / d.sqrt());
    let s = Array2::from_shape_fn((n, n), |(i, j)| {
        w.matrix()[[i, j]] * inv_sqrt[i] * inv_sqrt[j]
    });
    let (_, vecs) = s
        .eigh(UPLO::Lower)
        .expect("symmetric eigendecomposition of a finite matrix cannot fail");
    // Eigenvalues come back ascending, so the top-k eigenvectors are the
    // trailing columns; trailing order is the deterministic tie-break.
    let mut emb = Array2::zeros((n, k));
    for c in 0..k {
        emb.column_mut(c).assign(&vecs.column(n - 1 - c));
    }
    for mut row in emb.rows_mut() {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|x| x / norm);
        }
    }
    Ok(emb)
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One seeded k-means++ initialization plus Lloyd iteration; returns the
/// final inertia and labels.
fn lloyd_once(points: &Array2<f64>, k: usize, max_iters: usize, seed: u64) -> (f64, Vec<usize>) {
    let (n, d) = points.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = Array2::zeros((k, d));
    centroids
        .row_mut(0)
        .assign(&points.row(rng.gen_range(0..n)));
    let mut dist2: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), centroids.row(0)))
        .collect();
    for c in 1..k {
        // k-means++: sample the next centroid proportional to squared
        // distance; if every point coincides with a centroid, any works.
        let idx = match WeightedIndex::new(&dist2) {
            Ok(w) => w.sample(&mut rng),
            Err(_) => rng.gen_range(0..n),
        };
        centroids.row_mut(c).assign(&points.row(idx));
        for (i, d2) in dist2.iter_mut().enumerate() {
            *d2 = d2.min(sq_dist(points.row(i), centroids.row(c)));
        }
    }

    let mut labels = vec![usize::MAX; n];
    let mut inertia = 0.0;
    for _ in 0..max_iters {
        // Assignment: nearest centroid, lowest index on ties.
        let mut changed = false;
        inertia = 0.0;
        for (label, point) in labels.iter_mut().zip(points.rows()) {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let dd = sq_dist(point, centroids.row(c));
                if dd < best_d {
                    best_d = dd;
                    best = c;
                }
            }
            if *label != best {
                *label = best;
                changed = true;
            }
            inertia += best_d;
        }
        // A stable assignment reproduces the same means, so this is a fixed
        // point.
        if !changed {
            break;
        }
        let mut counts = vec![0usize; k];
        let mut sums = Array2::<f64>::zeros((k, d));
        for i in 0..n {
            counts[labels[i]] += 1;
            let mut row = sums.row_mut(labels[i]);
            row += &points.row(i);
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                centroids.row_mut(c).assign(&(&sums.row(c) / count as f64));
            }
        }
        // Re-seed each empty cluster at the point farthest from its current
        // centroid (first such point on ties), stealing each point once.
        let mut taken = vec![false; n];
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                continue;
            }
            let mut far = 0;
            let mut far_d = -1.0;
            for i in 0..n {
                if taken[i] {
                    continue;
                }
                let dd = sq_dist(points.row(i), centroids.row(labels[i]));
                if dd > far_d {
                    far_d = dd;
                    far = i;
                }
            }
            taken[far] = true;
            centroids.row_mut(c).assign(&points.row(far));
        }
    }
    (inertia, labels)
}

/// Lloyd k-means over `cfg.kmeans_restarts` restarts seeded
/// `cfg.seed + 0..restarts`; the labeling with the smallest inertia wins,
/// earliest restart on ties, so the result is deterministic regardless of
/// parallelism.
pub fn kmeans(points: &Array2<f64>, cfg: &SpectralConfig) -> Result<Vec<usize>, SpectralError> {
    let n = points.nrows();
    if cfg.k < 1 || cfg.k > n {
        return Err(SpectralError::BadClusterCount { k: cfg.k, n });
    }
    if cfg.kmeans_restarts < 1 {
        return Err(SpectralError::NoRestarts);
    }
    let mut results: Vec<(f64, Vec<usize>)> = (0..cfg.kmeans_restarts)
        .into_par_iter()
        .map(|r| {
            lloyd_once(
                points,
                cfg.k,
                cfg.kmeans_max_iters,
                cfg.seed.wrapping_add(r as u64),
            )
        })
        .collect();
    let mut best = 0;
    for i in 1..results.len() {
        if results[i].0 < results[best].0 {
            best = i;
        }
    }
    Ok(std::mem::take(&mut results[best].1))
}

/// Embeds the affinity and k-means-clusters the rows. `k = 1` short-circuits
/// to a single cluster.
pub fn cluster(w: &AffinityMatrix, cfg: &SpectralConfig) -> Result<Vec<usize>, SpectralError> {
    if cfg.k == 1 {
        return Ok(vec![0; w.n()]);
    }
    let emb = normalized_embedding(w, cfg.k)?;
    kmeans(&emb, cfg)
}
