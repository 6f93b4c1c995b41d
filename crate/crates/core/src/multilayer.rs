//! Multilayer pipelines: grouping layers by their estimated connectivity,
//! per-group estimation, the scree heuristic for the number of groups, and
//! membership re-estimation at the estimated rank.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{self, AdmmConfig, Problem, SolveResult};
use crate::baseline::{self, BaselineResult};
use crate::cluster::{self, ClusterAssignment, ClusterOptions, Engine};
use crate::error::{NetError, Result};
use crate::model::{average_layers, MembershipMatrix, NetworkSample};
use crate::numerics::{self, EigenOrder};
use crate::tuning::{CvReport, CvSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureLevel {
    /// Upper triangle (with diagonal) of each layer's averaging estimate.
    #[default]
    PerLayerB,
    /// Upper triangle (with diagonal) of each adjacency matrix.
    PerLayerA,
}

/// One row per layer.
pub fn layer_features(
    sample: &NetworkSample,
    z_hat: &MembershipMatrix,
    rho: f64,
    level: FeatureLevel,
) -> Result<DMatrix<f64>> {
    let n = sample.n();
    let l = sample.num_layers();
    match level {
        FeatureLevel::PerLayerA => {
            let width = n * (n + 1) / 2;
            let mut g = DMatrix::zeros(l, width);
            for (row, layer) in sample.layers().iter().enumerate() {
                for &(i, j) in layer.edges() {
                    let (i, j) = (i as usize, j as usize);
                    // Row-major upper-triangle index of (i, j), i <= j.
                    let idx = i * n - i * i.saturating_sub(1) / 2 + j - i;
                    g[(row, idx)] = 1.0;
                }
            }
            Ok(g)
        }
        FeatureLevel::PerLayerB => {
            if z_hat.n() != n {
                return Err(NetError::DimensionMismatch(format!(
                    "membership has {} nodes, sample has {n}",
                    z_hat.n()
                )));
            }
            if let Some(k) = z_hat.first_empty_community() {
                return Err(NetError::EmptyCommunity(k));
            }
            if !(rho > 0.0 && rho <= 1.0) {
                return Err(NetError::InvalidParameter(format!("sparsity factor {rho} outside (0, 1]")));
            }
            let k = z_hat.k();
            let sizes = z_hat.sizes();
            let labels = z_hat.labels();
            let mut g = DMatrix::zeros(l, k * (k + 1) / 2);
            for (row, layer) in sample.layers().iter().enumerate() {
                let mut sums = DMatrix::<f64>::zeros(k, k);
                for &(i, j) in layer.edges() {
                    let (a, b) = (labels[i as usize], labels[j as usize]);
                    sums[(a, b)] += 1.0;
                    if i != j {
                        sums[(b, a)] += 1.0;
                    }
                }
                let mut col = 0;
                for a in 0..k {
                    for b in a..k {
                        g[(row, col)] = sums[(a, b)] / (rho * (sizes[a] * sizes[b]) as f64);
                        col += 1;
                    }
                }
            }
            Ok(g)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerGrouping {
    pub l_tilde: usize,
    /// Group of each layer.
    pub labels: Vec<usize>,
    /// Layer indices of each group, ascending.
    pub groups: Vec<Vec<usize>>,
}

impl LayerGrouping {
    pub fn from_labels(labels: Vec<usize>, l_tilde: usize) -> Result<Self> {
        let mut groups = vec![Vec::new(); l_tilde];
        for (layer, &g) in labels.iter().enumerate() {
            if g >= l_tilde {
                return Err(NetError::InvalidParameter(format!("group {g} outside [0, {l_tilde})")));
            }
            groups[g].push(layer);
        }
        if let Some(g) = groups.iter().position(|v| v.is_empty()) {
            return Err(NetError::EmptyGroup(format!(
                "layer group {g} is empty; fewer than {l_tilde} groups are supported by the data"
            )));
        }
        Ok(Self {
            l_tilde,
            labels,
            groups,
        })
    }

    pub fn num_layers(&self) -> usize {
        self.labels.len()
    }
}

/// Groups the feature rows into `l_tilde` clusters.
pub fn cluster_layers(features: &DMatrix<f64>, l_tilde: usize, engine: Engine, seed: u64) -> Result<LayerGrouping> {
    let l = features.nrows();
    if l_tilde == 0 || l_tilde > l {
        return Err(NetError::InvalidParameter(format!("cannot form {l_tilde} groups from {l} layers")));
    }
    if l_tilde == 1 {
        return LayerGrouping::from_labels(vec![0; l], 1);
    }
    let (labels, _) = cluster::cluster_points(features, l_tilde, engine, seed, cluster::DEFAULT_RESTARTS)?;
    LayerGrouping::from_labels(labels, l_tilde)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scree {
    pub singular_values: Vec<f64>,
    /// `ratios[j] = sigma_{j+1} / sigma_{j+2}` (1-based sigma); infinite once
    /// the next singular value is numerically zero.
    pub ratios: Vec<f64>,
    pub l_tilde: usize,
}

/// Elbow at the largest ratio of consecutive singular values among the first
/// `max_candidates`; the first numerically vanishing value wins outright.
pub fn estimate_l_tilde(features: &DMatrix<f64>, max_candidates: usize) -> Result<Scree> {
    let r = features.nrows().min(features.ncols());
    if max_candidates == 0 || max_candidates > r {
        return Err(NetError::InvalidParameter(format!("max_candidates must lie in [1, {r}]")));
    }
    let sv = numerics::singular_values(features)?;
    if sv.first().is_none_or(|&s| s == 0.0) {
        return Err(NetError::InvalidData("layer features are all zero".into()));
    }
    let tol = 1e-10 * sv[0];
    let last = max_candidates.min(r.saturating_sub(1));
    let ratios: Vec<f64> = (0..last)
        .map(|j| if sv[j + 1] <= tol { f64::INFINITY } else { sv[j] / sv[j + 1] })
        .collect();
    let mut best = 0;
    for (j, &v) in ratios.iter().enumerate() {
        if v > ratios[best] {
            best = j;
        }
    }
    let l_tilde = if ratios.is_empty() { 1 } else { best + 1 };
    Ok(Scree {
        singular_values: sv,
        ratios,
        l_tilde,
    })
}

/// How lambda is chosen per group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaChoice {
    Fixed(f64),
    CrossValidated(CvSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiSettings {
    pub lambda: LambdaChoice,
    pub admm: AdmmConfig,
    /// Engine for the bias-adjusted node clustering.
    pub node_engine: Engine,
    /// Scale eigenvectors by eigenvalues in the node embedding.
    pub node_scaled: bool,
    pub layer_engine: Engine,
    pub features: FeatureLevel,
    /// Upper bound on the number of groups considered by the scree rule.
    pub max_groups: usize,
    pub seed: u64,
}

impl Default for MultiSettings {
    fn default() -> Self {
        Self {
            lambda: LambdaChoice::CrossValidated(CvSpec::default()),
            admm: AdmmConfig::new(1.0),
            node_engine: Engine::Kmeans,
            node_scaled: false,
            layer_engine: Engine::Gmm,
            features: FeatureLevel::PerLayerB,
            max_groups: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroupEstimate {
    pub layers: Vec<usize>,
    pub solve: SolveResult,
    pub lambda: f64,
    pub lambda_max: f64,
    pub cv: Option<CvReport>,
    /// Lambda borrowed from other groups because CV was impossible.
    pub no_cv: bool,
    pub averaging: BaselineResult,
}

#[derive(Debug, Clone)]
pub struct MultiResult {
    pub membership: ClusterAssignment,
    pub grouping: LayerGrouping,
    pub scree: Option<Scree>,
    pub groups: Vec<GroupEstimate>,
    /// Against the sample's group labels when present.
    pub between_layer_error: Option<f64>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Estimates a connectivity matrix per group of layers in `grouping`
/// with the membership `z_hat`.
pub fn estimate_groups(
    sample: &NetworkSample,
    z_hat: &MembershipMatrix,
    grouping: &LayerGrouping,
    settings: &MultiSettings,
) -> Result<Vec<GroupEstimate>> {
    let rho = sample.rho();
    struct Partial {
        layers: Vec<usize>,
        sub: NetworkSample,
        lambda_max: f64,
        fit: Option<(CvReport, SolveResult)>,
    }
    let partials: Vec<Partial> = grouping
        .groups
        .par_iter()
        .map(|layers| -> Result<Partial> {
            let sub = sample.select(layers)?;
            let avg = average_layers(&sub, None)?;
            let lambda_max = Problem::from_membership(&avg, z_hat, settings.admm.scaling)?.lambda_max();
            let fit = match settings.lambda {
                LambdaChoice::CrossValidated(spec) if layers.len() >= 2 => {
                    let run = spec.run(&sub, z_hat, &settings.admm)?;
                    Some((run.report, run.refit))
                }
                LambdaChoice::Fixed(lambda) => {
                    let r = admm::admm_solve(&avg, z_hat, rho, &settings.admm.with_lambda(lambda))?;
                    Some((
                        CvReport {
                            lambdas: vec![lambda],
                            losses: Vec::new(),
                            total_loss: Vec::new(),
                            selected_index: 0,
                            selected_lambda: lambda,
                            d_hat: r.d_hat,
                            path_ranks: Vec::new(),
                        },
                        r,
                    ))
                }
                _ => None,
            };
            Ok(Partial {
                layers: layers.clone(),
                sub,
                lambda_max,
                fit,
            })
        })
        .collect::<Result<_>>()?;

    let cross_validated = matches!(settings.lambda, LambdaChoice::CrossValidated(_));
    let mut ratios: Vec<f64> = partials
        .iter()
        .filter_map(|p| p.fit.as_ref().map(|(rep, _)| rep.selected_lambda / p.lambda_max))
        .collect();
    let borrowed_ratio = if ratios.is_empty() { None } else { Some(median(&mut ratios)) };

    partials
        .into_par_iter()
        .map(|p| -> Result<GroupEstimate> {
            let avg = average_layers(&p.sub, None)?;
            let averaging = baseline::averaging_estimator(&avg, z_hat, rho)?;
            match p.fit {
                Some((rep, solve)) => Ok(GroupEstimate {
                    layers: p.layers,
                    lambda: rep.selected_lambda,
                    solve,
                    lambda_max: p.lambda_max,
                    cv: if cross_validated { Some(rep) } else { None },
                    no_cv: false,
                    averaging,
                }),
                None => {
                    let ratio = borrowed_ratio.ok_or_else(|| {
                        NetError::InvalidParameter(
                            "no layer group has two layers to cross-validate; pass a fixed lambda".into(),
                        )
                    })?;
                    let lambda = ratio * p.lambda_max;
                    log::warn!(
                        "group with layers {:?} has a single layer; using lambda {lambda:e} borrowed from the other groups",
                        p.layers
                    );
                    let solve = admm::admm_solve(&avg, z_hat, rho, &settings.admm.with_lambda(lambda))?;
                    Ok(GroupEstimate {
                        layers: p.layers,
                        lambda,
                        solve,
                        lambda_max: p.lambda_max,
                        cv: None,
                        no_cv: true,
                        averaging,
                    })
                }
            }
        })
        .collect()
}

/// Bias-adjusted node clustering, layer grouping on per-layer estimates,
/// then one penalized estimate per group.
pub fn multisbm_estimate(
    sample: &NetworkSample,
    k: usize,
    l_tilde: Option<usize>,
    settings: &MultiSettings,
) -> Result<MultiResult> {
    let l = sample.num_layers();
    if l < 2 {
        return Err(NetError::InvalidParameter("the multilayer pipeline needs at least two layers".into()));
    }
    let opts = ClusterOptions {
        engine: settings.node_engine,
        restarts: cluster::DEFAULT_RESTARTS,
        seed: settings.seed,
        scaled: settings.node_scaled,
    };
    let membership = cluster::bias_adjusted_spectral(sample, k, &opts)?;
    let z_hat = membership.membership()?;
    if let Some(c) = z_hat.first_empty_community() {
        return Err(NetError::EmptyCommunity(c));
    }
    let features = layer_features(sample, &z_hat, sample.rho(), settings.features)?;
    let (l_tilde, scree) = match l_tilde {
        Some(t) => (t, None),
        None => {
            let cap = settings.max_groups.min(features.nrows().min(features.ncols()));
            let s = estimate_l_tilde(&features, cap)?;
            (s.l_tilde, Some(s))
        }
    };
    let grouping = cluster_layers(&features, l_tilde, settings.layer_engine, settings.seed)?;
    let groups = estimate_groups(sample, &z_hat, &grouping, settings)?;
    let between_layer_error = match sample.group_labels() {
        Some(truth) => {
            let t = truth.iter().max().map_or(1, |m| m + 1);
            if t == l_tilde {
                Some(between_layer_error(&grouping, truth)?)
            } else {
                None
            }
        }
        None => None,
    };
    Ok(MultiResult {
        membership,
        grouping,
        scree,
        groups,
        between_layer_error,
    })
}

/// Fraction of layers in the wrong group under the best relabelling.
pub fn between_layer_error(grouping: &LayerGrouping, truth: &[usize]) -> Result<f64> {
    if truth.len() != grouping.num_layers() {
        return Err(NetError::DimensionMismatch(format!(
            "{} true group labels for {} layers",
            truth.len(),
            grouping.num_layers()
        )));
    }
    let t = truth.iter().max().map_or(0, |m| m + 1);
    if t != grouping.l_tilde {
        return Err(NetError::InvalidParameter(format!(
            "truth has {t} groups, estimate has {}",
            grouping.l_tilde
        )));
    }
    Ok(cluster::align_labels(&grouping.labels, truth, t)?.misclustering_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReestimateSettings {
    pub cv: CvSpec,
    pub admm: AdmmConfig,
    pub engine: Engine,
    pub seed: u64,
}

impl Default for ReestimateSettings {
    fn default() -> Self {
        Self {
            cv: CvSpec::default(),
            admm: AdmmConfig::new(1.0),
            engine: Engine::Kmeans,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReestimateResult {
    /// Clustering at embedding dimension `K`.
    pub initial: ClusterAssignment,
    pub cv: CvReport,
    /// Penalized refit with the initial clustering.
    pub solve: SolveResult,
    pub d_hat: usize,
    /// Clustering at embedding dimension `d_hat` (equal to `initial` when
    /// `d_hat = K`).
    pub final_assignment: ClusterAssignment,
    pub reclustered: bool,
    /// Rank-`d_hat` truncated averaging estimate with the final clustering.
    pub estimate: BaselineResult,
}

/// Spectral k-means at dimension `K`, rank from the cross-validated penalized
/// fit, re-clustering at that rank, and a rank-`d_hat` averaging estimate.
pub fn reestimate_pipeline(sample: &NetworkSample, k: usize, settings: &ReestimateSettings) -> Result<ReestimateResult> {
    let rho = sample.rho();
    let avg = average_layers(sample, None)?;
    if k == 0 || k > avg.n() {
        return Err(NetError::InvalidParameter(format!("cannot form {k} clusters from {} nodes", avg.n())));
    }
    // One decomposition serves both embedding dimensions.
    let spec = numerics::sym_eig_topk(avg.matrix(), k, EigenOrder::ByMagnitude)?;
    let opts = ClusterOptions::new(settings.engine, settings.seed);
    let initial = cluster::spectral_cluster_from_spectrum(&spec, k, k, &opts)?;
    let z_k = initial.membership()?;
    let run = settings.cv.run(sample, &z_k, &settings.admm)?;
    let d_hat = run.refit.d_hat;
    let rank = if d_hat == 0 {
        log::warn!("cross-validated rank is 0; re-clustering and truncating at rank 1");
        1
    } else {
        d_hat
    };
    let (final_assignment, reclustered) = if rank != k {
        (cluster::spectral_cluster_from_spectrum(&spec, k, rank, &opts)?, true)
    } else {
        (initial.clone(), false)
    };
    let z_final = final_assignment.membership()?;
    let estimate = baseline::avg_lowrank(&avg, &z_final, rho, rank)?;
    Ok(ReestimateResult {
        initial,
        cv: run.report,
        solve: run.refit,
        d_hat,
        final_assignment,
        reclustered,
        estimate,
    })
}
