//! Monte-Carlo harness for the simulation scenarios: configuration, presets,
//! replicate loop, aggregation and the spectral truncation sweep.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::AdmmConfig;
use crate::baseline;
use crate::cluster::{self, ClusterOptions, Engine};
use crate::error::{NetError, Result};
use crate::io::FORMAT_VERSION;
use crate::model::{
    self, average_layers, ConnectivityMatrix, MembershipMatrix, NetworkSample, SamplerOptions,
};
use crate::multilayer::{self, LambdaChoice, MultiSettings, ReestimateSettings};
use crate::numerics::{self, EigenOrder};
use crate::theory::{self, TheoryContext};
use crate::tuning::CvSpec;

/// Stream reserved for drawing a random `B*`; layers use streams `0..L`.
const B_STREAM: u64 = u64::MAX;
/// Window constant used for the reported lambda comparison.
const WINDOW_C: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Known memberships.
    MonoTrueZ,
    /// Memberships from spectral clustering, aligned to the truth.
    MonoEstZ,
    /// Spectral k-means at dimension K, then at the estimated rank.
    Reestimate,
    /// Bias-adjusted node clustering, layer grouping, per-group estimation.
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum RhoSpec {
    Value(f64),
    LogNOverN,
    SqrtLogNOverN,
}

impl RhoSpec {
    pub fn resolve(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            RhoSpec::Value(v) => v,
            RhoSpec::LogNOverN => nf.ln() / nf,
            RhoSpec::SqrtLogNOverN => nf.ln().sqrt() / nf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BSpec {
    Explicit { matrix: Vec<Vec<f64>> },
    ExplicitGroups { matrices: Vec<Vec<Vec<f64>>> },
    /// `u u^T` with `u = (p, p^2, ..., p^K)`.
    Rank1Geometric { p: f64 },
    /// Average of `rank` outer products of Uniform(lo, hi) vectors, drawn
    /// afresh in every replicate.
    UniformRank { rank: usize, lo: f64, hi: f64 },
    /// Four groups with ranks 3, 3, 2, 1 (K = 3).
    MultilayerSuite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum SizeSpec {
    Equal,
    Fractions(Vec<f64>),
    Counts(Vec<usize>),
}

/// Community sizes `0.15n, 0.15n, 0.1n x 3, 0.08n x 5`.
pub fn ten_community_fractions() -> Vec<f64> {
    let mut f = vec![0.15, 0.15, 0.1, 0.1, 0.1];
    f.extend([0.08; 5]);
    f
}

impl SizeSpec {
    /// Largest-remainder rounding of fractions; ties go to the earlier
    /// community.
    pub fn counts(&self, n: usize, k: usize) -> Result<Vec<usize>> {
        let counts = match self {
            SizeSpec::Equal => (0..k).map(|i| n / k + usize::from(i < n % k)).collect(),
            SizeSpec::Counts(c) => c.clone(),
            SizeSpec::Fractions(f) => {
                let total: f64 = f.iter().sum();
                if (total - 1.0).abs() > 1e-9 || f.iter().any(|&x| !(x > 0.0)) {
                    return Err(NetError::InvalidParameter(format!(
                        "size fractions must be positive and sum to 1 (sum {total})"
                    )));
                }
                let raw: Vec<f64> = f.iter().map(|x| x * n as f64).collect();
                let mut c: Vec<usize> = raw.iter().map(|x| (x + 1e-9).floor() as usize).collect();
                let mut order: Vec<usize> = (0..f.len()).collect();
                order.sort_by(|&a, &b| (raw[b] - c[b] as f64).total_cmp(&(raw[a] - c[a] as f64)).then(a.cmp(&b)));
                let short = n.saturating_sub(c.iter().sum());
                for &i in order.iter().cycle().take(short) {
                    c[i] += 1;
                }
                c
            }
        };
        if counts.len() != k {
            return Err(NetError::InvalidParameter(format!("{} community sizes for K = {k}", counts.len())));
        }
        if counts.iter().sum::<usize>() != n || counts.contains(&0) {
            return Err(NetError::InvalidParameter(format!("community sizes {counts:?} must be positive and sum to n = {n}")));
        }
        Ok(counts)
    }
}

fn default_version() -> u32 {
    FORMAT_VERSION
}

fn default_admm() -> AdmmConfig {
    AdmmConfig::new(1.0)
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub scenario: Scenario,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    /// Rank of `B*` (of the last group for multilayer suites, informational).
    pub d: usize,
    /// Layers, or layers per group for the multilayer scenario.
    #[serde(rename = "L")]
    pub layers: usize,
    pub rho: RhoSpec,
    pub replicates: usize,
    pub seed: u64,
    pub b: BSpec,
    pub sizes: SizeSpec,
    #[serde(default)]
    pub cv: CvSpec,
    #[serde(default = "default_admm")]
    pub admm: AdmmConfig,
    /// Node clustering engine for the estimated-membership scenarios.
    #[serde(default = "default_engine")]
    pub engine: Engine,
    /// Number of layer groups; estimated by the scree rule when absent.
    #[serde(default)]
    pub l_tilde: Option<usize>,
    #[serde(default = "default_true")]
    pub self_loops: bool,
}

fn default_engine() -> Engine {
    Engine::Gmm
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NetError::InvalidParameter(m));
        if self.n == 0 || self.k == 0 || self.layers == 0 || self.replicates == 0 {
            return bad("n, K, L and replicates must be positive".into());
        }
        if self.d == 0 || self.d > self.k {
            return bad(format!("rank d = {} outside [1, K = {}]", self.d, self.k));
        }
        let rho = self.rho.resolve(self.n);
        if !(rho > 0.0 && rho <= 1.0) {
            return bad(format!("sparsity factor {rho} outside (0, 1]"));
        }
        if self.format_version > FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", self.format_version));
        }
        self.sizes.counts(self.n, self.k)?;
        if self.scenario == Scenario::Multi && self.l_tilde == Some(0) {
            return bad("l_tilde must be positive".into());
        }
        // Fixed matrices are checked here; random ones per replicate.
        self.true_matrices(&mut model::layer_rng(self.seed, B_STREAM))?;
        Ok(())
    }

    pub fn rho_value(&self) -> f64 {
        self.rho.resolve(self.n)
    }

    fn true_matrices(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Vec<ConnectivityMatrix>> {
        let from_rows = |rows: &Vec<Vec<f64>>| -> Result<ConnectivityMatrix> {
            let k = rows.len();
            if rows.iter().any(|r| r.len() != k) {
                return Err(NetError::DimensionMismatch("explicit B must be square".into()));
            }
            ConnectivityMatrix::probability(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
        };
        let bs = match &self.b {
            BSpec::Explicit { matrix } => vec![from_rows(matrix)?],
            BSpec::ExplicitGroups { matrices } => matrices.iter().map(from_rows).collect::<Result<_>>()?,
            BSpec::Rank1Geometric { p } => vec![model::rank1_geometric(*p, self.k)?],
            BSpec::UniformRank { rank, lo, hi } => vec![model::uniform_rank(self.k, *rank, *lo, *hi, rng)?],
            BSpec::MultilayerSuite => model::multilayer_suite()?,
        };
        if let Some(b) = bs.iter().find(|b| b.k() != self.k) {
            return Err(NetError::DimensionMismatch(format!("B is {0}x{0} but K = {1}", b.k(), self.k)));
        }
        if self.scenario != Scenario::Multi && bs.len() != 1 {
            return Err(NetError::InvalidParameter("single-layer-group scenarios need exactly one B".into()));
        }
        Ok(bs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(count)`; absent for one value.
    pub standard_error: Option<f64>,
    pub count: usize,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        let m = values.len();
        if m == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / m as f64;
        let standard_error = (m > 1).then(|| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            (var / m as f64).sqrt()
        });
        Some(Self { mean, standard_error, count: m })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub seed: u64,
    /// Set when the replicate failed; its metrics are then empty.
    pub error: Option<String>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub rows: Vec<ReplicateRow>,
    pub failed: usize,
    pub aggregates: BTreeMap<String, Aggregate>,
}

impl ExperimentReport {
    pub fn aggregate(&self, key: &str) -> Option<&Aggregate> {
        self.aggregates.get(key)
    }

    /// Values of `key` over successful replicates.
    pub fn column(&self, key: &str) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.metrics.get(key).copied()).collect()
    }
}

/// Aggregates over successful replicates, metric by metric.
pub fn aggregate_rows(rows: &[ReplicateRow]) -> BTreeMap<String, Aggregate> {
    let mut cols: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.error.is_none()) {
        for (k, v) in &row.metrics {
            cols.entry(k.clone()).or_default().push(*v);
        }
    }
    cols.into_iter().filter_map(|(k, v)| Aggregate::of(&v).map(|a| (k, a))).collect()
}

type Metrics = BTreeMap<String, f64>;

fn frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

/// Re-indexes an estimate from estimated labels to reference labels.
fn relabel(b: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let k = b.nrows();
    let mut out = DMatrix::zeros(k, k);
    for a in 0..k {
        for c in 0..k {
            out[(perm[a], perm[c])] = b[(a, c)];
        }
    }
    out
}

fn balance_constant(sizes: &[usize], n: usize) -> f64 {
    let (nf, kf) = (n as f64, sizes.len() as f64);
    sizes
        .iter()
        .map(|&s| {
            let r = s as f64 * kf / nf;
            r.max(1.0 / r)
        })
        .fold(1.0, f64::max)
}

#[allow(clippy::too_many_arguments)]
fn theory_metrics(
    m: &mut Metrics,
    b: &ConnectivityMatrix,
    z: &MembershipMatrix,
    z_hat: &MembershipMatrix,
    layers: usize,
    rho: f64,
    misclustered: usize,
    lambda_per_node: f64,
) -> Result<()> {
    let d = b.rank_hint().unwrap_or(numerics::numerical_rank(b.entries(), 1e-10)?);
    let ctx = TheoryContext {
        n: z.n(),
        k: z.k(),
        layers,
        rho,
        d: d.max(1),
        c1: balance_constant(z.sizes(), z.n()),
        c2: balance_constant(z_hat.sizes(), z.n()),
        misclustered,
        b_op: numerics::operator_norm(b.entries())?,
        b_max: b.entries().amax(),
        c_prime: None,
        c_double_prime: None,
    };
    let report = theory::theory_report(&ctx, WINDOW_C)?;
    m.insert("theory.lambda_val".into(), report.lambda_val);
    m.insert("theory.bound".into(), report.bound);
    let (lo, hi) = report.lambda_window;
    let inside = lambda_per_node >= lo / 10.0 && lambda_per_node <= 10.0 * hi;
    m.insert("theory.lambda_in_window".into(), f64::from(u8::from(inside)));
    Ok(())
}

fn per_node_lambda(cfg: &AdmmConfig, lambda: f64, n: usize) -> f64 {
    match cfg.scaling {
        crate::admm::Scaling::Raw => lambda / n as f64,
        crate::admm::Scaling::PerNode => lambda,
    }
}

/// Penalized, averaging, rank-CV truncated averaging and rank-K spectral
/// embedding estimates with memberships `z_hat` already on the reference
/// labels.
fn mono_methods(
    cfg: &ExperimentConfig,
    sample: &NetworkSample,
    b: &ConnectivityMatrix,
    z: &MembershipMatrix,
    z_hat: &MembershipMatrix,
    misclustered: usize,
    m: &mut Metrics,
) -> Result<()> {
    let rho = sample.rho();
    let truth = b.entries();
    let run = cfg.cv.run(sample, z_hat, &cfg.admm)?;
    m.insert("error.our".into(), frob(run.refit.b_hat.entries(), truth));
    m.insert("d_hat.our".into(), run.refit.d_hat as f64);
    m.insert("lambda.our".into(), run.refit.lambda_used);
    let lambda_pn = per_node_lambda(&cfg.admm, run.refit.lambda_used, sample.n());
    m.insert("lambda.per_node".into(), lambda_pn);

    let avg_adj = average_layers(sample, None)?;
    let avg = baseline::averaging_estimator(&avg_adj, z_hat, rho)?;
    m.insert("error.avg".into(), frob(avg.b_hat.entries(), truth));
    m.insert("d_hat.avg".into(), avg.d_hat as f64);

    let plan = cfg.cv.plan(sample.num_layers())?;
    let ranks: Vec<usize> = (1..=cfg.k).collect();
    let (rank, _) = crate::tuning::cross_validate_rank(sample, z_hat, &plan, &ranks)?;
    let lr = baseline::avg_lowrank(&avg_adj, z_hat, rho, rank)?;
    m.insert("error.avglr".into(), frob(lr.b_hat.entries(), truth));
    m.insert("d_hat.avglr".into(), lr.d_hat as f64);

    let se = baseline::spectral_embedding_estimator(&avg_adj, z_hat, rho, cfg.k)?;
    m.insert("error.se_k".into(), frob(se.b_hat.entries(), truth));

    theory_metrics(m, b, z, z_hat, sample.num_layers(), rho, misclustered, lambda_pn)
}

fn membership_for(cfg: &ExperimentConfig) -> Result<MembershipMatrix> {
    MembershipMatrix::from_sizes(&cfg.sizes.counts(cfg.n, cfg.k)?)
}

/// One draw of the configured model.
#[derive(Debug, Clone)]
pub struct SimulatedSample {
    pub sample: NetworkSample,
    pub membership: MembershipMatrix,
    /// One matrix per layer group.
    pub truth: Vec<ConnectivityMatrix>,
}

/// Draws the sample a replicate with this seed would see.
pub fn simulate(cfg: &ExperimentConfig, seed: u64) -> Result<SimulatedSample> {
    let truth = cfg.true_matrices(&mut model::layer_rng(seed, B_STREAM))?;
    let z = membership_for(cfg)?;
    let opts = SamplerOptions { self_loops: cfg.self_loops };
    let rho = cfg.rho_value();
    let sample = if cfg.scenario == Scenario::Multi {
        model::sample_multi(&truth, &z, rho, &vec![cfg.layers; truth.len()], seed, opts)?
    } else {
        model::sample_mono(&truth[0], &z, rho, cfg.layers, seed, opts)?
    };
    Ok(SimulatedSample { sample, membership: z, truth })
}

fn run_mono(cfg: &ExperimentConfig, seed: u64, sim: &SimulatedSample) -> Result<Metrics> {
    let (sample, z, b) = (&sim.sample, &sim.membership, &sim.truth[0]);
    let mut m = Metrics::new();
    match cfg.scenario {
        Scenario::MonoTrueZ => mono_methods(cfg, sample, b, z, z, 0, &mut m)?,
        Scenario::MonoEstZ => {
            let avg = average_layers(sample, None)?;
            let opts = ClusterOptions::new(cfg.engine, seed);
            let est = cluster::spectral_cluster_with(&avg, cfg.k, cfg.k, &opts)?;
            let aligned = cluster::align_labels(&est.labels, z.labels(), cfg.k)?;
            m.insert("misclustering".into(), aligned.misclustering_rate);
            m.insert("ari".into(), cluster::adjusted_rand_index(&est.labels, z.labels())?);
            let z_hat = MembershipMatrix::new(aligned.aligned.clone(), cfg.k)?;
            if let Some(c) = z_hat.first_empty_community() {
                return Err(NetError::EmptyCommunity(c));
            }
            let wrong = (aligned.misclustering_rate * cfg.n as f64).round() as usize;
            mono_methods(cfg, sample, b, z, &z_hat, wrong, &mut m)?;
        }
        _ => unreachable!("run_mono called for {:?}", cfg.scenario),
    }
    Ok(m)
}

fn run_reestimate(cfg: &ExperimentConfig, seed: u64, sim: &SimulatedSample) -> Result<Metrics> {
    let (sample, z, b) = (&sim.sample, &sim.membership, &sim.truth[0]);
    let settings = ReestimateSettings {
        cv: cfg.cv,
        admm: cfg.admm,
        engine: Engine::Kmeans,
        seed,
    };
    let r = multilayer::reestimate_pipeline(sample, cfg.k, &settings)?;
    let truth = b.entries();
    let initial = cluster::align_labels(&r.initial.labels, z.labels(), cfg.k)?;
    let fin = cluster::align_labels(&r.final_assignment.labels, z.labels(), cfg.k)?;
    let mut m = Metrics::new();
    m.insert("misclustering.initial".into(), initial.misclustering_rate);
    m.insert("misclustering.final".into(), fin.misclustering_rate);
    m.insert("ari.initial".into(), cluster::adjusted_rand_index(&r.initial.labels, z.labels())?);
    m.insert("ari.final".into(), cluster::adjusted_rand_index(&r.final_assignment.labels, z.labels())?);
    m.insert("d_hat.our".into(), r.d_hat as f64);
    m.insert("lambda.our".into(), r.solve.lambda_used);
    m.insert(
        "error.initial".into(),
        frob(&relabel(r.solve.b_hat.entries(), &initial.permutation), truth),
    );
    m.insert(
        "error.final".into(),
        frob(&relabel(r.estimate.b_hat.entries(), &fin.permutation), truth),
    );
    m.insert("reclustered".into(), f64::from(u8::from(r.reclustered)));
    Ok(m)
}

fn run_multi(cfg: &ExperimentConfig, seed: u64, sim: &SimulatedSample) -> Result<Metrics> {
    let (sample, z, bs) = (&sim.sample, &sim.membership, &sim.truth);
    let settings = MultiSettings {
        lambda: LambdaChoice::CrossValidated(cfg.cv),
        admm: cfg.admm,
        seed,
        ..MultiSettings::default()
    };
    let r = multilayer::multisbm_estimate(sample, cfg.k, cfg.l_tilde, &settings)?;
    let mut m = Metrics::new();
    let nodes = cluster::align_labels(&r.membership.labels, z.labels(), cfg.k)?;
    m.insert("misclustering".into(), nodes.misclustering_rate);
    m.insert("ari".into(), cluster::adjusted_rand_index(&r.membership.labels, z.labels())?);
    m.insert("l_tilde".into(), r.grouping.l_tilde as f64);
    if r.grouping.l_tilde != bs.len() {
        return Err(NetError::InvalidData(format!(
            "estimated {} layer groups, truth has {}",
            r.grouping.l_tilde,
            bs.len()
        )));
    }
    let truth_groups = sample.group_labels().expect("multilayer samples carry group labels");
    let groups = cluster::align_labels(&r.grouping.labels, truth_groups, bs.len())?;
    m.insert("between_layer_error".into(), groups.misclustering_rate);
    for (g, est) in r.groups.iter().enumerate() {
        let t = groups.permutation[g];
        let truth = bs[t].entries();
        let tag = t + 1;
        let ours = relabel(est.solve.b_hat.entries(), &nodes.permutation);
        let avg = relabel(est.averaging.b_hat.entries(), &nodes.permutation);
        m.insert(format!("group{tag}.error.our"), frob(&ours, truth));
        m.insert(format!("group{tag}.error.avg"), frob(&avg, truth));
        m.insert(format!("group{tag}.d_hat.our"), est.solve.d_hat as f64);
        m.insert(format!("group{tag}.d_hat.avg"), est.averaging.d_hat as f64);
        m.insert(format!("group{tag}.lambda"), est.lambda);
    }
    Ok(m)
}

fn run_replicate(cfg: &ExperimentConfig, seed: u64) -> Result<Metrics> {
    let sim = simulate(cfg, seed)?;
    match cfg.scenario {
        Scenario::MonoTrueZ | Scenario::MonoEstZ => run_mono(cfg, seed, &sim),
        Scenario::Reestimate => run_reestimate(cfg, seed, &sim),
        Scenario::Multi => run_multi(cfg, seed, &sim),
    }
}

/// Runs every replicate (seed `seed + r`) in parallel. Failed replicates are
/// recorded and excluded from the aggregates.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let rows: Vec<ReplicateRow> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed.wrapping_add(r as u64);
            match run_replicate(cfg, seed) {
                Ok(metrics) => ReplicateRow { replicate: r, seed, error: None, metrics },
                Err(e) => {
                    log::warn!("replicate {r} failed: {e}");
                    ReplicateRow { replicate: r, seed, error: Some(e.to_string()), metrics: Metrics::new() }
                }
            }
        })
        .collect();
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    Ok(ExperimentReport {
        format_version: FORMAT_VERSION,
        config: cfg.clone(),
        aggregates: aggregate_rows(&rows),
        failed,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationCurve {
    pub format_version: u32,
    pub r_values: Vec<usize>,
    /// Mean relative error per truncation rank.
    pub mean_relative_error: Vec<f64>,
    /// Rank minimising the mean curve.
    pub argmin_r: usize,
    /// `relative_errors[replicate][i]` for rank `r_values[i]`.
    pub relative_errors: Vec<Vec<f64>>,
    pub replicate_argmin: Vec<usize>,
    pub failed: usize,
}

fn argmin_rank(r_values: &[usize], errs: &[f64]) -> usize {
    let mut best = 0;
    for (i, e) in errs.iter().enumerate() {
        if *e < errs[best] {
            best = i;
        }
    }
    r_values[best]
}

/// Relative error of averaging applied to the rank-`r` spectral truncation
/// of a single layer, for each `r` in `r_values`.
pub fn sweep_truncation(cfg: &ExperimentConfig, r_values: &[usize]) -> Result<TruncationCurve> {
    cfg.validate()?;
    if cfg.layers != 1 || cfg.scenario != Scenario::MonoTrueZ {
        return Err(NetError::InvalidParameter("the truncation sweep needs a single-layer known-membership config".into()));
    }
    if r_values.is_empty() || r_values.iter().any(|&r| r == 0 || r > cfg.n) {
        return Err(NetError::InvalidParameter(format!("truncation ranks must lie in [1, {}]", cfg.n)));
    }
    let z = membership_for(cfg)?;
    let rho = cfg.rho_value();
    let per: Vec<Result<Vec<f64>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed.wrapping_add(r as u64);
            let sim = simulate(cfg, seed)?;
            let b = &sim.truth[0];
            let a = average_layers(&sim.sample, None)?;
            let spec = numerics::sym_eig(a.matrix(), EigenOrder::ByMagnitude)?;
            let scale = b.entries().norm();
            r_values
                .iter()
                .map(|&rank| {
                    let est = baseline::spectral_embedding_from_spectrum(&spec, &z, rho, rank)?;
                    Ok(frob(est.b_hat.entries(), b.entries()) / scale)
                })
                .collect()
        })
        .collect();
    let relative_errors: Vec<Vec<f64>> = per.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
    let failed = per.len() - relative_errors.len();
    if relative_errors.is_empty() {
        return Err(per.into_iter().find_map(|r| r.err()).expect("at least one failure"));
    }
    let m = relative_errors.len() as f64;
    let mean_relative_error: Vec<f64> = (0..r_values.len())
        .map(|i| relative_errors.iter().map(|row| row[i]).sum::<f64>() / m)
        .collect();
    Ok(TruncationCurve {
        format_version: FORMAT_VERSION,
        r_values: r_values.to_vec(),
        argmin_r: argmin_rank(r_values, &mean_relative_error),
        replicate_argmin: relative_errors.iter().map(|e| argmin_rank(r_values, e)).collect(),
        mean_relative_error,
        relative_errors,
        failed,
    })
}

/// Named configurations. Desk-scale unless `full_scale`.
pub mod presets {
    use super::*;

    pub const NAMES: [&str; 6] = ["rank1", "rank1-est-z", "reestimate", "multi", "trunc-dense", "trunc-sparse"];

    #[allow(clippy::too_many_arguments)]
    fn base(scenario: Scenario, n: usize, k: usize, d: usize, layers: usize, rho: RhoSpec, b: BSpec, sizes: SizeSpec) -> ExperimentConfig {
        ExperimentConfig {
            format_version: FORMAT_VERSION,
            scenario,
            n,
            k,
            d,
            layers,
            rho,
            replicates: 20,
            seed: 0,
            b,
            sizes,
            cv: CvSpec::default(),
            admm: AdmmConfig::new(1.0),
            engine: Engine::Gmm,
            l_tilde: None,
            self_loops: true,
        }
    }

    /// Known memberships, `K = 10`, rank-one geometric `B*` with ratio 0.9.
    pub fn rank1(full_scale: bool) -> ExperimentConfig {
        let mut c = base(
            Scenario::MonoTrueZ,
            1000,
            10,
            1,
            100,
            RhoSpec::Value(0.1),
            BSpec::Rank1Geometric { p: 0.9 },
            SizeSpec::Fractions(ten_community_fractions()),
        );
        if full_scale {
            c.replicates = 100;
        }
        c
    }

    /// As [`rank1`] with memberships from spectral GMM clustering.
    pub fn rank1_est_z(full_scale: bool) -> ExperimentConfig {
        let mut c = rank1(full_scale);
        c.scenario = Scenario::MonoEstZ;
        if full_scale {
            c.n = 10_000;
        }
        c
    }

    pub fn reestimate(full_scale: bool) -> ExperimentConfig {
        let mut c = base(
            Scenario::Reestimate,
            1000,
            10,
            2,
            50,
            RhoSpec::Value(0.15),
            BSpec::UniformRank { rank: 2, lo: 0.2, hi: 0.9 },
            SizeSpec::Fractions(ten_community_fractions()),
        );
        if full_scale {
            c.replicates = 100;
        }
        c
    }

    /// Four layer groups of ranks 3, 3, 2, 1 with `K = 3` and community
    /// fractions `(1/4, 1/4, 1/2)`.
    pub fn multi(full_scale: bool) -> ExperimentConfig {
        let mut c = base(
            Scenario::Multi,
            500,
            3,
            1,
            20,
            RhoSpec::LogNOverN,
            BSpec::MultilayerSuite,
            SizeSpec::Fractions(vec![0.25, 0.25, 0.5]),
        );
        c.l_tilde = Some(4);
        if full_scale {
            c.n = 1000;
            c.layers = 50;
            c.replicates = 100;
        }
        c
    }

    /// Single layer, `K = d = 2`, `rho = 1` or `log n / n`.
    pub fn truncation(dense: bool, full_scale: bool) -> ExperimentConfig {
        let mut c = base(
            Scenario::MonoTrueZ,
            if full_scale { 1000 } else { 500 },
            2,
            2,
            1,
            if dense { RhoSpec::Value(1.0) } else { RhoSpec::LogNOverN },
            BSpec::Explicit { matrix: vec![vec![0.7, 0.2], vec![0.2, 0.5]] },
            SizeSpec::Equal,
        );
        if full_scale {
            c.replicates = 100;
        }
        c
    }

    pub fn by_name(name: &str, full_scale: bool) -> Option<ExperimentConfig> {
        Some(match name {
            "rank1" => rank1(full_scale),
            "rank1-est-z" => rank1_est_z(full_scale),
            "reestimate" => reestimate(full_scale),
            "multi" => multi(full_scale),
            "trunc-dense" => truncation(true, full_scale),
            "trunc-sparse" => truncation(false, full_scale),
            _ => return None,
        })
    }
}
