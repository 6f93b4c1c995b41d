//! Node clustering: spectral embeddings, k-means, diagonal Gaussian mixtures,
//! label alignment and agreement scores.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::model::{layer_rng, AveragedAdjacency, MembershipMatrix, NetworkSample};
use crate::numerics::{self, EigenOrder, SpectrumResult};

pub const DEFAULT_RESTARTS: usize = 10;
const KMEANS_MAX_ITERS: usize = 300;
const EM_MAX_ITERS: usize = 1000;
const EM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Gmm,
    Kmeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSource {
    /// Rows of the leading eigenvectors of the averaged adjacency.
    Spectral { embed_dim: usize, scaled: bool },
    /// Rows of the leading eigenvectors of the bias-adjusted squared adjacency.
    BiasAdjusted { embed_dim: usize, scaled: bool },
    /// Caller-supplied points.
    Points,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
    pub engine: Engine,
    pub source: FeatureSource,
    /// Fewer than `k` nonempty clusters.
    pub degenerate: bool,
}

impl ClusterAssignment {
    pub fn membership(&self) -> Result<MembershipMatrix> {
        MembershipMatrix::new(self.labels.clone(), self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterOptions {
    pub engine: Engine,
    pub restarts: usize,
    pub seed: u64,
    /// Multiply eigenvector columns by their eigenvalues.
    pub scaled: bool,
}

impl ClusterOptions {
    pub fn new(engine: Engine, seed: u64) -> Self {
        Self {
            engine,
            restarts: DEFAULT_RESTARTS,
            seed,
            scaled: true,
        }
    }
}

/// Row-major copy of the points, one row per observation.
struct Points {
    m: usize,
    p: usize,
    data: Vec<f64>,
}

impl Points {
    fn new(x: &DMatrix<f64>) -> Self {
        let (m, p) = x.shape();
        let mut data = Vec::with_capacity(m * p);
        for i in 0..m {
            for j in 0..p {
                data.push(x[(i, j)]);
            }
        }
        Self { m, p, data }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_points(x: &DMatrix<f64>, k: usize, restarts: usize) -> Result<()> {
    if k == 0 {
        return Err(NetError::InvalidParameter("number of clusters must be at least 1".into()));
    }
    if x.nrows() < k {
        return Err(NetError::InvalidParameter(format!(
            "{} points cannot form {k} clusters",
            x.nrows()
        )));
    }
    if restarts == 0 {
        return Err(NetError::InvalidParameter("restarts must be at least 1".into()));
    }
    numerics::check_finite(x, "cluster features")
}

#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub labels: Vec<usize>,
    /// `k x p` cluster means.
    pub centers: DMatrix<f64>,
    /// Within-cluster sum of squares.
    pub sse: f64,
    pub degenerate: bool,
}

fn kmeanspp(pts: &Points, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![pts.row(rng.random_range(0..pts.m)).to_vec()];
    let mut d2: Vec<f64> = (0..pts.m).map(|i| dist2(pts.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = pts.m - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            rng.random_range(0..pts.m)
        };
        let c = pts.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist2(pts.row(i), &c));
        }
        centers.push(c);
    }
    centers
}

fn assign(pts: &Points, centers: &[Vec<f64>], labels: &mut [usize], dists: &mut [f64]) -> bool {
    let mut changed = false;
    for i in 0..pts.m {
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (c, center) in centers.iter().enumerate() {
            let d = dist2(pts.row(i), center);
            if d < bd {
                bd = d;
                best = c;
            }
        }
        if labels[i] != best {
            labels[i] = best;
            changed = true;
        }
        dists[i] = bd;
    }
    changed
}

fn kmeans_once(pts: &Points, k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<Vec<f64>>, f64) {
    let mut centers = kmeanspp(pts, k, rng);
    let mut labels = vec![usize::MAX; pts.m];
    let mut dists = vec![0.0; pts.m];
    for _ in 0..KMEANS_MAX_ITERS {
        let changed = assign(pts, &centers, &mut labels, &mut dists);
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        // An empty cluster takes the point farthest from its center.
        for c in 0..k {
            if counts[c] == 0 {
                let (far, &fd) = dists
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .expect("m >= k >= 1");
                if fd > 0.0 && counts[labels[far]] > 1 {
                    counts[labels[far]] -= 1;
                    labels[far] = c;
                    counts[c] = 1;
                    dists[far] = 0.0;
                }
            }
        }
        let mut sums = vec![vec![0.0; pts.p]; k];
        for i in 0..pts.m {
            for (s, x) in sums[labels[i]].iter_mut().zip(pts.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let sse = (0..pts.m).map(|i| dist2(pts.row(i), &centers[labels[i]])).sum();
    (labels, centers, sse)
}

fn nonempty(labels: &[usize], k: usize) -> usize {
    let mut seen = vec![false; k];
    for &l in labels {
        seen[l] = true;
    }
    seen.iter().filter(|&&s| s).count()
}

fn warn_degenerate(what: &str, labels: &[usize], k: usize) -> bool {
    let used = nonempty(labels, k);
    if used < k {
        log::warn!("{what}: only {used} of {k} clusters are nonempty");
        true
    } else {
        false
    }
}

/// Lloyd's algorithm with k-means++ seeding; best of `restarts` by SSE.
pub fn kmeans(x: &DMatrix<f64>, k: usize, seed: u64, restarts: usize) -> Result<KmeansResult> {
    check_points(x, k, restarts)?;
    let pts = Points::new(x);
    let runs: Vec<(Vec<usize>, Vec<Vec<f64>>, f64)> = (0..restarts)
        .into_par_iter()
        .map(|r| kmeans_once(&pts, k, &mut layer_rng(seed, r as u64)))
        .collect();
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.2 < runs[best].2 {
            best = r;
        }
    }
    let (labels, centers, sse) = runs.into_iter().nth(best).expect("restarts >= 1");
    let centers = DMatrix::from_fn(k, pts.p, |c, j| centers[c][j]);
    let degenerate = warn_degenerate("k-means", &labels, k);
    Ok(KmeansResult {
        labels,
        centers,
        sse,
        degenerate,
    })
}

#[derive(Debug, Clone)]
pub struct GmmResult {
    pub labels: Vec<usize>,
    pub log_likelihood: f64,
    /// Log-likelihood after each E-step of the selected run.
    pub trace: Vec<f64>,
    pub degenerate: bool,
}

struct Mixture {
    log_weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    vars: Vec<Vec<f64>>,
}

impl Mixture {
    /// M-step from responsibilities `resp[i * k + c]`.
    fn update(&mut self, pts: &Points, resp: &[f64], k: usize, floor: &[f64]) {
        for c in 0..k {
            let nk: f64 = (0..pts.m).map(|i| resp[i * k + c]).sum();
            if nk <= 0.0 {
                self.log_weights[c] = f64::NEG_INFINITY;
                continue;
            }
            self.log_weights[c] = (nk / pts.m as f64).ln();
            let mut mean = vec![0.0; pts.p];
            for i in 0..pts.m {
                let r = resp[i * k + c];
                for (mu, x) in mean.iter_mut().zip(pts.row(i)) {
                    *mu += r * x;
                }
            }
            mean.iter_mut().for_each(|mu| *mu /= nk);
            let mut var = vec![0.0; pts.p];
            for i in 0..pts.m {
                let r = resp[i * k + c];
                for ((v, x), mu) in var.iter_mut().zip(pts.row(i)).zip(&mean) {
                    *v += r * (x - mu) * (x - mu);
                }
            }
            for (v, f) in var.iter_mut().zip(floor) {
                *v = (*v / nk).max(*f);
            }
            self.means[c] = mean;
            self.vars[c] = var;
        }
    }

    /// Fills `resp` with posteriors and returns the log-likelihood.
    fn expect(&self, pts: &Points, resp: &mut [f64], k: usize) -> f64 {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let norm: Vec<f64> = self
            .vars
            .iter()
            .map(|v| -0.5 * v.iter().map(|s| s.ln() + ln2pi).sum::<f64>())
            .collect();
        let mut ll = 0.0;
        for i in 0..pts.m {
            let x = pts.row(i);
            let row = &mut resp[i * k..(i + 1) * k];
            for c in 0..k {
                row[c] = if self.log_weights[c] == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    let q: f64 = x
                        .iter()
                        .zip(&self.means[c])
                        .zip(&self.vars[c])
                        .map(|((x, mu), v)| (x - mu) * (x - mu) / v)
                        .sum();
                    self.log_weights[c] + norm[c] - 0.5 * q
                };
            }
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = row.iter().map(|v| (v - mx).exp()).sum();
            let lse = mx + s.ln();
            for v in row.iter_mut() {
                *v = (*v - lse).exp();
            }
            ll += lse;
        }
        ll
    }
}

fn variance_floor(pts: &Points) -> Vec<f64> {
    (0..pts.p)
        .map(|j| {
            let mean = (0..pts.m).map(|i| pts.row(i)[j]).sum::<f64>() / pts.m as f64;
            let var = (0..pts.m).map(|i| (pts.row(i)[j] - mean).powi(2)).sum::<f64>() / pts.m as f64;
            if var > 0.0 {
                1e-8 * var
            } else {
                1e-12
            }
        })
        .collect()
}

fn gmm_once(pts: &Points, k: usize, floor: &[f64], rng: &mut ChaCha8Rng) -> Result<(Vec<usize>, f64, Vec<f64>)> {
    let (init, _, _) = kmeans_once(pts, k, rng);
    let mut resp = vec![0.0; pts.m * k];
    for (i, &l) in init.iter().enumerate() {
        resp[i * k + l] = 1.0;
    }
    let mut mix = Mixture {
        log_weights: vec![0.0; k],
        means: vec![vec![0.0; pts.p]; k],
        vars: vec![floor.to_vec(); k],
    };
    mix.update(pts, &resp, k, floor);
    let mut trace = Vec::new();
    for _ in 0..EM_MAX_ITERS {
        let ll = mix.expect(pts, &mut resp, k);
        if !ll.is_finite() {
            return Err(NetError::Numerical("Gaussian mixture likelihood is not finite".into()));
        }
        let done = trace.last().is_some_and(|&prev: &f64| ll - prev <= EM_TOL * (1.0 + ll.abs()));
        trace.push(ll);
        if done {
            break;
        }
        mix.update(pts, &resp, k, floor);
    }
    let labels = (0..pts.m)
        .map(|i| {
            let row = &resp[i * k..(i + 1) * k];
            let mut best = 0;
            for c in 1..k {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    Ok((labels, *trace.last().expect("at least one E-step"), trace))
}

/// EM for a `k`-component Gaussian mixture with diagonal covariances,
/// initialised from k-means; best of `restarts` by log-likelihood.
pub fn gmm_cluster(x: &DMatrix<f64>, k: usize, seed: u64, restarts: usize) -> Result<GmmResult> {
    check_points(x, k, restarts)?;
    let pts = Points::new(x);
    let floor = variance_floor(&pts);
    let runs: Vec<(Vec<usize>, f64, Vec<f64>)> = (0..restarts)
        .into_par_iter()
        .map(|r| gmm_once(&pts, k, &floor, &mut layer_rng(seed, r as u64)))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.1 > runs[best].1 {
            best = r;
        }
    }
    let (labels, log_likelihood, trace) = runs.into_iter().nth(best).expect("restarts >= 1");
    let degenerate = warn_degenerate("Gaussian mixture", &labels, k);
    Ok(GmmResult {
        labels,
        log_likelihood,
        trace,
        degenerate,
    })
}

/// Clusters the rows of `x` with the chosen engine.
pub fn cluster_points(x: &DMatrix<f64>, k: usize, engine: Engine, seed: u64, restarts: usize) -> Result<(Vec<usize>, bool)> {
    match engine {
        Engine::Kmeans => kmeans(x, k, seed, restarts).map(|r| (r.labels, r.degenerate)),
        Engine::Gmm => gmm_cluster(x, k, seed, restarts).map(|r| (r.labels, r.degenerate)),
    }
}

/// First `embed_dim` columns of the spectrum, optionally scaled by eigenvalues.
pub fn embedding(spec: &SpectrumResult, embed_dim: usize, scaled: bool) -> Result<DMatrix<f64>> {
    if embed_dim == 0 || embed_dim > spec.values.len() {
        return Err(NetError::InvalidParameter(format!(
            "embedding dimension {embed_dim} outside [1, {}]",
            spec.values.len()
        )));
    }
    let mut x = spec.vectors.columns(0, embed_dim).into_owned();
    if scaled {
        for j in 0..embed_dim {
            x.column_mut(j).scale_mut(spec.values[j]);
        }
    }
    Ok(x)
}

/// Spectral clustering given the magnitude-ordered spectrum of `A`, so that
/// several embedding dimensions can share one decomposition.
pub fn spectral_cluster_from_spectrum(
    spec: &SpectrumResult,
    k: usize,
    embed_dim: usize,
    opts: &ClusterOptions,
) -> Result<ClusterAssignment> {
    let n = spec.vectors.nrows();
    if k == 0 || k > n {
        return Err(NetError::InvalidParameter(format!("cannot form {k} clusters from {n} nodes")));
    }
    let x = embedding(spec, embed_dim, opts.scaled)?;
    let (labels, degenerate) = cluster_points(&x, k, opts.engine, opts.seed, opts.restarts)?;
    Ok(ClusterAssignment {
        labels,
        k,
        engine: opts.engine,
        source: FeatureSource::Spectral {
            embed_dim,
            scaled: opts.scaled,
        },
        degenerate,
    })
}

/// Clusters the rows of `U Lambda` built from the `embed_dim` leading
/// eigenpairs of `A` by magnitude.
pub fn spectral_cluster(
    y: &AveragedAdjacency,
    k: usize,
    embed_dim: usize,
    engine: Engine,
    seed: u64,
) -> Result<ClusterAssignment> {
    spectral_cluster_with(y, k, embed_dim, &ClusterOptions::new(engine, seed))
}

pub fn spectral_cluster_with(
    y: &AveragedAdjacency,
    k: usize,
    embed_dim: usize,
    opts: &ClusterOptions,
) -> Result<ClusterAssignment> {
    let n = y.n();
    if embed_dim == 0 || embed_dim > n {
        return Err(NetError::InvalidParameter(format!("embedding dimension {embed_dim} outside [1, {n}]")));
    }
    let spec = numerics::sym_eig_topk(y.matrix(), embed_dim, EigenOrder::ByMagnitude)?;
    spectral_cluster_from_spectrum(&spec, k, embed_dim, opts)
}

/// `S = sum_l (A_l^2 - diag(A_l 1))`.
pub fn bias_adjusted_matrix(sample: &NetworkSample) -> DMatrix<f64> {
    let n = sample.n();
    sample
        .layers()
        .par_iter()
        .fold(
            || DMatrix::<f64>::zeros(n, n),
            |mut s, layer| {
                for nb in layer.neighbors() {
                    for &i in &nb {
                        for &j in &nb {
                            s[(i, j)] += 1.0;
                        }
                    }
                }
                for (i, d) in layer.degrees().into_iter().enumerate() {
                    s[(i, i)] -= d as f64;
                }
                s
            },
        )
        .reduce(|| DMatrix::zeros(n, n), |a, b| a + b)
}

/// Clusters the rows of the `k` leading eigenvectors (by magnitude) of the
/// bias-adjusted matrix. Unscaled unless `opts.scaled`.
pub fn bias_adjusted_spectral(sample: &NetworkSample, k: usize, opts: &ClusterOptions) -> Result<ClusterAssignment> {
    let n = sample.n();
    if k == 0 || k > n {
        return Err(NetError::InvalidParameter(format!("cannot form {k} clusters from {n} nodes")));
    }
    let s = bias_adjusted_matrix(sample);
    let spec = numerics::sym_eig_topk(&s, k, EigenOrder::ByMagnitude)?;
    let x = embedding(&spec, k, opts.scaled)?;
    let (labels, degenerate) = cluster_points(&x, k, opts.engine, opts.seed, opts.restarts)?;
    Ok(ClusterAssignment {
        labels,
        k,
        engine: opts.engine,
        source: FeatureSource::BiasAdjusted {
            embed_dim: k,
            scaled: opts.scaled,
        },
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// `permutation[estimated label] = reference label`.
    pub permutation: Vec<usize>,
    pub misclustering_rate: f64,
    pub aligned: Vec<usize>,
}

fn confusion(g_hat: &[usize], g: &[usize], k: usize) -> Result<Vec<Vec<i64>>> {
    if g_hat.len() != g.len() {
        return Err(NetError::DimensionMismatch(format!(
            "label vectors of length {} and {}",
            g_hat.len(),
            g.len()
        )));
    }
    let mut c = vec![vec![0i64; k]; k];
    for (&a, &b) in g_hat.iter().zip(g) {
        if a >= k || b >= k {
            return Err(NetError::InvalidParameter(format!("label {} outside [0, {k})", a.max(b))));
        }
        c[a][b] += 1;
    }
    Ok(c)
}

fn best_permutation_exhaustive(c: &[Vec<i64>]) -> Vec<usize> {
    let k = c.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = perm.clone();
    let mut best_score = i64::MIN;
    // Heap's algorithm.
    let mut stack = vec![0usize; k];
    let score = |p: &[usize]| p.iter().enumerate().map(|(a, &b)| c[a][b]).sum::<i64>();
    best_score = best_score.max(score(&perm));
    let mut i = 0;
    while i < k {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            let s = score(&perm);
            if s > best_score {
                best_score = s;
                best = perm.clone();
            }
            stack[i] += 1;
            i = 0;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    best
}

fn best_permutation_assignment(c: &[Vec<i64>]) -> Vec<usize> {
    let weights = pathfinding::matrix::Matrix::from_rows(c.iter().cloned()).expect("square confusion matrix");
    pathfinding::kuhn_munkres::kuhn_munkres(&weights).1
}

/// Relabels `g_hat` by the permutation that minimises its Hamming distance to
/// `g`. Exhaustive for `k <= 8`, assignment-based above.
pub fn align_labels(g_hat: &[usize], g: &[usize], k: usize) -> Result<AlignmentResult> {
    align_labels_by(g_hat, g, k, k > 8)
}

/// As [`align_labels`] with the search strategy chosen by the caller.
pub fn align_labels_by(g_hat: &[usize], g: &[usize], k: usize, assignment: bool) -> Result<AlignmentResult> {
    if k == 0 {
        return Err(NetError::InvalidParameter("K must be at least 1".into()));
    }
    let c = confusion(g_hat, g, k)?;
    let permutation = if assignment {
        best_permutation_assignment(&c)
    } else {
        best_permutation_exhaustive(&c)
    };
    let aligned: Vec<usize> = g_hat.iter().map(|&l| permutation[l]).collect();
    let wrong = aligned.iter().zip(g).filter(|(a, b)| a != b).count();
    let misclustering_rate = if g.is_empty() { 0.0 } else { wrong as f64 / g.len() as f64 };
    Ok(AlignmentResult {
        permutation,
        misclustering_rate,
        aligned,
    })
}

fn pairs(x: u64) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index. Labels are arbitrary integers.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(NetError::DimensionMismatch(format!(
            "partitions of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(NetError::InvalidParameter("ARI needs at least two items".into()));
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&v| pairs(v)).sum();
    let sa: f64 = rows.values().map(|&v| pairs(v)).sum();
    let sb: f64 = cols.values().map(|&v| pairs(v)).sum();
    let expected = sa * sb / pairs(a.len() as u64);
    let max = 0.5 * (sa + sb);
    if max == expected {
        // Both partitions trivial in the same way.
        return Ok(if index == max { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}
