//! Blockmodel domain types and graph samplers.
//!
//! Node and community indices are 0-based throughout the crate. Layers are
//! stored as sorted upper-triangular edge lists `(i, j)` with `i <= j`; the
//! dense symmetric form is produced only on request.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::numerics;

/// Node-to-community assignment. Equivalent to a one-hot `n x K` matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipMatrix {
    labels: Vec<usize>,
    k: usize,
    sizes: Vec<usize>,
}

impl MembershipMatrix {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(NetError::InvalidParameter(
                "community count must be at least 1".into(),
            ));
        }
        let mut sizes = vec![0usize; k];
        for (i, &g) in labels.iter().enumerate() {
            if g >= k {
                return Err(NetError::InvalidData(format!(
                    "node {i} has label {g}, outside 0..{k}"
                )));
            }
            sizes[g] += 1;
        }
        Ok(Self { labels, k, sizes })
    }

    /// Contiguous blocks: the first `sizes[0]` nodes in community 0, and so on.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(k, &s)| std::iter::repeat_n(k, s))
            .collect();
        Self::new(labels, sizes.len())
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn first_empty_community(&self) -> Option<usize> {
        self.sizes.iter().position(|&s| s == 0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.n(), self.k);
        for (i, &g) in self.labels.iter().enumerate() {
            z[(i, g)] = 1.0;
        }
        z
    }

    /// `Z^T Y Z` without forming `Z`.
    pub fn block_sums(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.n();
        if y.nrows() != n || y.ncols() != n {
            return Err(NetError::DimensionMismatch(format!(
                "matrix is {}x{}, membership has {n} nodes",
                y.nrows(),
                y.ncols()
            )));
        }
        let mut out = DMatrix::zeros(self.k, self.k);
        let mut row = vec![0.0; self.k];
        for j in 0..n {
            row.iter_mut().for_each(|r| *r = 0.0);
            let col = y.column(j);
            for (i, &v) in col.iter().enumerate() {
                row[self.labels[i]] += v;
            }
            let gj = self.labels[j];
            for (k, &r) in row.iter().enumerate() {
                out[(k, gj)] += r;
            }
        }
        Ok(out)
    }

    /// `Z B Z^T`.
    pub fn expand(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.k || b.ncols() != self.k {
            return Err(NetError::DimensionMismatch(format!(
                "connectivity is {}x{}, membership has K={}",
                b.nrows(),
                b.ncols(),
                self.k
            )));
        }
        let n = self.n();
        Ok(DMatrix::from_fn(n, n, |i, j| {
            b[(self.labels[i], self.labels[j])]
        }))
    }
}

/// Symmetric `K x K` block connectivity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    entries: DMatrix<f64>,
    rank_hint: Option<usize>,
    probability: bool,
}

impl ConnectivityMatrix {
    /// A matrix of edge probabilities: exactly symmetric, entries in `[0, 1]`.
    pub fn probability(entries: DMatrix<f64>) -> Result<Self> {
        Self::check_square_symmetric(&entries)?;
        if let Some(v) = entries.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(NetError::InvalidParameter(format!(
                "connectivity entry {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            entries,
            rank_hint: None,
            probability: true,
        })
    }

    /// A symmetric matrix whose entries may leave `[0, 1]` (unclipped estimates).
    pub fn diagnostic(entries: DMatrix<f64>) -> Result<Self> {
        Self::check_square_symmetric(&entries)?;
        Ok(Self {
            entries,
            rank_hint: None,
            probability: false,
        })
    }

    fn check_square_symmetric(m: &DMatrix<f64>) -> Result<()> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(NetError::DimensionMismatch(format!(
                "connectivity must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(NetError::NonFinite("connectivity matrix".into()));
        }
        for i in 0..m.nrows() {
            for j in 0..i {
                if m[(i, j)] != m[(j, i)] {
                    return Err(NetError::NotSymmetric {
                        asymmetry: (m[(i, j)] - m[(j, i)]).abs(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Attach the intended rank; fails unless exactly `d` singular values
    /// exceed `1e-10 * sigma_1`.
    pub fn with_rank_hint(mut self, d: usize) -> Result<Self> {
        let r = numerics::numerical_rank(&self.entries, 1e-10)?;
        if r != d {
            return Err(NetError::InvalidParameter(format!(
                "rank hint {d} disagrees with numerical rank {r}"
            )));
        }
        self.rank_hint = Some(d);
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn rank_hint(&self) -> Option<usize> {
        self.rank_hint
    }

    pub fn is_probability(&self) -> bool {
        self.probability
    }
}

/// Replace `m` by `(m + m^T) / 2`, which is exactly symmetric in floating point.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Rank-one matrix `u u^T` with `u = (p, p^2, ..., p^K)`.
pub fn rank1_geometric(p: f64, k: usize) -> Result<ConnectivityMatrix> {
    if !(0.0 < p && p < 1.0) || k == 0 {
        return Err(NetError::InvalidParameter(format!(
            "geometric profile needs p in (0,1) and K >= 1, got p={p}, K={k}"
        )));
    }
    let u: Vec<f64> = (1..=k as i32).map(|e| p.powi(e)).collect();
    let b = DMatrix::from_fn(k, k, |i, j| u[i] * u[j]);
    ConnectivityMatrix::probability(b)?.with_rank_hint(1)
}

/// `(u_1 u_1^T + ... + u_r u_r^T) / r` with `u_i ~ Uniform(lo, hi)^K`.
pub fn uniform_rank<R: Rng>(
    k: usize,
    r: usize,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<ConnectivityMatrix> {
    if r == 0 || r > k || !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(NetError::InvalidParameter(format!(
            "uniform-rank needs 1 <= r <= K and 0 <= lo < hi <= 1 (r={r}, K={k})"
        )));
    }
    let mut b = DMatrix::zeros(k, k);
    for _ in 0..r {
        let u: Vec<f64> = (0..k).map(|_| rng.random_range(lo..hi)).collect();
        for i in 0..k {
            for j in 0..k {
                b[(i, j)] += u[i] * u[j];
            }
        }
    }
    b /= r as f64;
    let b = symmetrize(&b);
    ConnectivityMatrix::probability(b)?.with_rank_hint(r)
}

/// The four-group multilayer configuration: three matrices `U diag(.) U^T`
/// sharing an orthogonal basis plus one rank-one geometric profile.
/// Ranks are 3, 3, 2, 1.
pub fn multilayer_suite() -> Result<Vec<ConnectivityMatrix>> {
    let h = std::f64::consts::SQRT_2 / 2.0;
    let u = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, -h, 0.5, 0.5, h, h, -h, 0.0]);
    let spectra: [[f64; 3]; 3] = [[1.2, 0.6, -0.7], [1.2, 0.6, 0.7], [1.7, 0.0, -0.6]];
    let mut out = Vec::with_capacity(4);
    for (s, d) in spectra.iter().zip([3usize, 3, 2]) {
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(s));
        let mut b = symmetrize(&(&u * diag * u.transpose()));
        // Round-off can push exact zeros or ones a few ulps outside [0, 1].
        b.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        out.push(ConnectivityMatrix::probability(b)?.with_rank_hint(d)?);
    }
    out.push(rank1_geometric(0.8, 3)?);
    Ok(out)
}

/// One undirected, unweighted layer in upper-triangular coordinate form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    n: usize,
    edges: Vec<(u32, u32)>,
}

impl Layer {
    /// Builds a layer from `(i, j)` pairs in any orientation. Duplicate edges
    /// (including `(i, j)` together with `(j, i)`) are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n > u32::MAX as usize {
            return Err(NetError::InvalidParameter(format!("n={n} too large")));
        }
        let mut out: Vec<(u32, u32)> = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(NetError::InvalidData(format!(
                    "edge ({a}, {b}) out of range for n={n}"
                )));
            }
            let (i, j) = if a <= b { (a, b) } else { (b, a) };
            out.push((i as u32, j as u32));
        }
        out.sort_unstable();
        if let Some(w) = out.windows(2).find(|w| w[0] == w[1]) {
            return Err(NetError::InvalidData(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        Ok(Self { n, edges: out })
    }

    /// Binary symmetric dense matrix; fails on non-binary or asymmetric input.
    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(NetError::DimensionMismatch("adjacency must be square".into()));
        }
        let mut edges = Vec::new();
        for j in 0..n {
            for i in 0..=j {
                let v = a[(i, j)];
                if v != a[(j, i)] {
                    return Err(NetError::NotSymmetric {
                        asymmetry: (v - a[(j, i)]).abs(),
                    });
                }
                if v == 1.0 {
                    edges.push((i, j));
                } else if v != 0.0 {
                    return Err(NetError::InvalidData(format!(
                        "adjacency entry ({i}, {j}) = {v} is not binary"
                    )));
                }
            }
        }
        Self::from_edges(n, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        self.add_to(&mut a, 1.0);
        a
    }

    /// `target += weight * A`.
    pub fn add_to(&self, target: &mut DMatrix<f64>, weight: f64) {
        for &(i, j) in &self.edges {
            let (i, j) = (i as usize, j as usize);
            target[(i, j)] += weight;
            if i != j {
                target[(j, i)] += weight;
            }
        }
    }

    /// Row sums `A 1` (a self-loop counts once).
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(i, j) in &self.edges {
            deg[i as usize] += 1;
            if i != j {
                deg[j as usize] += 1;
            }
        }
        deg
    }

    /// Neighbour lists of the symmetric matrix, self-loops included.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i as usize].push(j as usize);
            if i != j {
                adj[j as usize].push(i as usize);
            }
        }
        adj
    }

    pub fn without_self_loops(&self) -> Self {
        Self {
            n: self.n,
            edges: self.edges.iter().copied().filter(|(i, j)| i != j).collect(),
        }
    }
}

/// `L` node-aligned layers with a known sparsity factor.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSample {
    n: usize,
    layers: Vec<Layer>,
    rho: f64,
    group_labels: Option<Vec<usize>>,
}

impl NetworkSample {
    pub fn new(
        n: usize,
        layers: Vec<Layer>,
        rho: f64,
        group_labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        check_rho(rho)?;
        if let Some(layer) = layers.iter().find(|l| l.n() != n) {
            return Err(NetError::DimensionMismatch(format!(
                "layer has n={}, sample has n={n}",
                layer.n()
            )));
        }
        if let Some(g) = &group_labels {
            if g.len() != layers.len() {
                return Err(NetError::DimensionMismatch(format!(
                    "{} group labels for {} layers",
                    g.len(),
                    layers.len()
                )));
            }
        }
        Ok(Self {
            n,
            layers,
            rho,
            group_labels,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn group_labels(&self) -> Option<&[usize]> {
        self.group_labels.as_deref()
    }

    /// The same sample restricted to `indices` (in that order).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut layers = Vec::with_capacity(indices.len());
        for &i in indices {
            layers.push(
                self.layers
                    .get(i)
                    .ok_or_else(|| {
                        NetError::InvalidParameter(format!("layer index {i} out of range"))
                    })?
                    .clone(),
            );
        }
        let groups = self
            .group_labels
            .as_ref()
            .map(|g| indices.iter().map(|&i| g[i]).collect());
        Self::new(self.n, layers, self.rho, groups)
    }

    pub fn without_self_loops(&self) -> Self {
        Self {
            n: self.n,
            layers: self.layers.iter().map(Layer::without_self_loops).collect(),
            rho: self.rho,
            group_labels: self.group_labels.clone(),
        }
    }
}

/// Entrywise mean of a set of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedAdjacency {
    matrix: DMatrix<f64>,
    layer_count: usize,
}

impl AveragedAdjacency {
    /// Wraps an arbitrary symmetric matrix, e.g. a noiseless `Z B Z^T`.
    pub fn from_matrix(matrix: DMatrix<f64>, layer_count: usize) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(NetError::DimensionMismatch("averaged adjacency must be square".into()));
        }
        numerics::check_symmetric(&matrix, 1e-10)?;
        Ok(Self {
            matrix,
            layer_count,
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn layer_count(&self) -> usize {
        self.layer_count
    }
}

/// Sampler switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerOptions {
    /// Sample diagonal entries `A_ii` like any other pair.
    pub self_loops: bool,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self { self_loops: true }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(NetError::InvalidParameter(format!(
            "sparsity factor {rho} outside (0, 1]"
        )));
    }
    Ok(())
}

/// Deterministic generator for one layer: ChaCha8 keyed by `seed`, with the
/// layer index selecting an independent stream.
pub(crate) fn layer_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_layer(
    b: &DMatrix<f64>,
    z: &MembershipMatrix,
    rho: f64,
    rng: &mut ChaCha8Rng,
    opts: SamplerOptions,
) -> Layer {
    let n = z.n();
    let labels = z.labels();
    let mut edges = Vec::new();
    for i in 0..n {
        let start = if opts.self_loops { i } else { i + 1 };
        let gi = labels[i];
        for j in start..n {
            let p = rho * b[(gi, labels[j])];
            if rng.random::<f64>() < p {
                edges.push((i as u32, j as u32));
            }
        }
    }
    Layer { n, edges }
}

fn check_b_z(b: &ConnectivityMatrix, z: &MembershipMatrix) -> Result<()> {
    if b.k() != z.k() {
        return Err(NetError::DimensionMismatch(format!(
            "connectivity is {0}x{0} but membership has K={1}",
            b.k(),
            z.k()
        )));
    }
    if !b.is_probability() {
        return Err(NetError::InvalidParameter(
            "sampling requires a probability matrix".into(),
        ));
    }
    Ok(())
}

/// Draws `L` independent layers with `A_ij ~ Bernoulli(rho * B[g_i, g_j])`
/// for `i <= j`.
pub fn sample_mono(
    b: &ConnectivityMatrix,
    z: &MembershipMatrix,
    rho: f64,
    num_layers: usize,
    seed: u64,
    opts: SamplerOptions,
) -> Result<NetworkSample> {
    check_b_z(b, z)?;
    check_rho(rho)?;
    if num_layers == 0 {
        return Err(NetError::InvalidParameter("need at least one layer".into()));
    }
    let layers = (0..num_layers)
        .into_par_iter()
        .map(|l| sample_layer(b.entries(), z, rho, &mut layer_rng(seed, l as u64), opts))
        .collect();
    NetworkSample::new(z.n(), layers, rho, None)
}

/// Multilayer sample: `layers_per_group[g]` layers drawn from `bs[g]`, laid out
/// group by group. Layer `l` always uses stream `l`, so a one-group call
/// reproduces [`sample_mono`] exactly.
pub fn sample_multi(
    bs: &[ConnectivityMatrix],
    z: &MembershipMatrix,
    rho: f64,
    layers_per_group: &[usize],
    seed: u64,
    opts: SamplerOptions,
) -> Result<NetworkSample> {
    if bs.is_empty() || bs.len() != layers_per_group.len() {
        return Err(NetError::DimensionMismatch(format!(
            "{} connectivity matrices but {} group sizes",
            bs.len(),
            layers_per_group.len()
        )));
    }
    for b in bs {
        check_b_z(b, z)?;
    }
    check_rho(rho)?;
    let groups: Vec<usize> = layers_per_group
        .iter()
        .enumerate()
        .flat_map(|(g, &c)| std::iter::repeat_n(g, c))
        .collect();
    if groups.is_empty() {
        return Err(NetError::InvalidParameter("need at least one layer".into()));
    }
    let layers = groups
        .par_iter()
        .enumerate()
        .map(|(l, &g)| sample_layer(bs[g].entries(), z, rho, &mut layer_rng(seed, l as u64), opts))
        .collect();
    NetworkSample::new(z.n(), layers, rho, Some(groups))
}

/// `rho * Z B Z^T`.
pub fn expected_adjacency(
    b: &ConnectivityMatrix,
    z: &MembershipMatrix,
    rho: f64,
) -> Result<DMatrix<f64>> {
    if b.k() != z.k() {
        return Err(NetError::DimensionMismatch(format!(
            "connectivity has K={}, membership has K={}",
            b.k(),
            z.k()
        )));
    }
    Ok(z.expand(b.entries())? * rho)
}

/// Entrywise mean over all layers, or over `subset` when given.
pub fn average_layers(sample: &NetworkSample, subset: Option<&[usize]>) -> Result<AveragedAdjacency> {
    let all: Vec<usize>;
    let idx = match subset {
        Some(s) => s,
        None => {
            all = (0..sample.num_layers()).collect();
            &all
        }
    };
    if idx.is_empty() {
        return Err(NetError::EmptySubset);
    }
    let n = sample.n();
    let mut sum = DMatrix::zeros(n, n);
    for &l in idx {
        let layer = sample.layers().get(l).ok_or_else(|| {
            NetError::InvalidParameter(format!("layer index {l} out of range"))
        })?;
        layer.add_to(&mut sum, 1.0);
    }
    sum /= idx.len() as f64;
    Ok(AveragedAdjacency {
        matrix: sum,
        layer_count: idx.len(),
    })
}
