//! Lambda grids and layer-wise cross-validation.

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{self, AdmmConfig, Problem, Scaling, SolveResult};
use crate::error::{NetError, Result};
use crate::model::{average_layers, AveragedAdjacency, MembershipMatrix, NetworkSample};

pub const DEFAULT_GRID_COUNT: usize = 50;
pub const DEFAULT_FLOOR_RATIO: f64 = 1e-4;
pub const DEFAULT_FOLDS: usize = 5;
pub const MAX_REPEATED_SPLITS: usize = 64;

/// Geometric grid from `floor_ratio * lambda_max` to `lambda_max`, ascending.
pub fn lambda_grid(lambda_max: f64, count: usize, floor_ratio: f64) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(NetError::InvalidParameter(format!("grid needs at least 2 points, got {count}")));
    }
    if !(floor_ratio > 0.0 && floor_ratio < 1.0) {
        return Err(NetError::InvalidParameter(format!("floor ratio {floor_ratio} outside (0, 1)")));
    }
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(NetError::InvalidData(format!(
            "lambda_max is {lambda_max}; the input carries no signal"
        )));
    }
    let lo = floor_ratio.ln();
    let mut grid: Vec<f64> = (0..count)
        .map(|i| lambda_max * (lo * (1.0 - i as f64 / (count - 1) as f64)).exp())
        .collect();
    grid[count - 1] = lambda_max;
    Ok(grid)
}

pub fn make_lambda_grid(
    y: &AveragedAdjacency,
    z_hat: &MembershipMatrix,
    count: usize,
    floor_ratio: f64,
    scaling: Scaling,
) -> Result<Vec<f64>> {
    let problem = Problem::from_membership(y, z_hat, scaling)?;
    lambda_grid(problem.lambda_max(), count, floor_ratio)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvMode {
    Mfold,
    Repeated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub mode: CvMode,
    /// Number of folds; 0 for repeated plans.
    pub folds: usize,
    pub splits: Vec<Split>,
    pub seed: u64,
}

impl CvPlan {
    pub fn num_layers(&self) -> usize {
        self.splits
            .first()
            .map(|s| s.train.len() + s.validation.len())
            .unwrap_or(0)
    }

    fn validate(&self, layers: usize) -> Result<()> {
        if self.splits.is_empty() {
            return Err(NetError::InvalidParameter("CV plan has no splits".into()));
        }
        for s in &self.splits {
            if s.train.is_empty() || s.validation.is_empty() {
                return Err(NetError::InvalidParameter("CV split with an empty side".into()));
            }
            let mut seen = vec![false; layers];
            for &i in s.train.iter().chain(&s.validation) {
                if i >= layers || seen[i] {
                    return Err(NetError::InvalidParameter(format!(
                        "CV split index {i} repeated or out of range for {layers} layers"
                    )));
                }
                seen[i] = true;
            }
        }
        Ok(())
    }
}

/// Random partition of `0..L` into `folds` sets whose sizes differ by at most
/// one; the first `L mod folds` folds get the extra layer.
pub fn mfold(layers: usize, folds: usize, seed: u64) -> Result<CvPlan> {
    if layers < 2 {
        return Err(NetError::InvalidParameter(
            "cross-validation needs at least two layers; pass an explicit lambda".into(),
        ));
    }
    if folds < 2 || folds > layers {
        return Err(NetError::InvalidParameter(format!(
            "cannot split {layers} layers into {folds} folds"
        )));
    }
    let mut order: Vec<usize> = (0..layers).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = layers / folds;
    let extra = layers % folds;
    let mut parts = Vec::with_capacity(folds);
    let mut start = 0;
    for m in 0..folds {
        let len = base + usize::from(m < extra);
        let mut part = order[start..start + len].to_vec();
        part.sort_unstable();
        parts.push(part);
        start += len;
    }
    let splits = (0..folds)
        .map(|m| Split {
            train: complement(layers, &parts[m]),
            validation: parts[m].clone(),
        })
        .collect();
    Ok(CvPlan {
        mode: CvMode::Mfold,
        folds,
        splits,
        seed,
    })
}

fn complement(layers: usize, part: &[usize]) -> Vec<usize> {
    let mut inside = vec![false; layers];
    for &i in part {
        inside[i] = true;
    }
    (0..layers).filter(|&i| !inside[i]).collect()
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// Every `train_size`-subset of `0..L` as training layers when there are at
/// most 64 of them (lexicographic order), otherwise 64 distinct random ones.
pub fn repeated_splits(layers: usize, train_size: usize, seed: u64) -> Result<CvPlan> {
    if train_size == 0 || train_size >= layers {
        return Err(NetError::InvalidParameter(format!(
            "train size {train_size} must lie in [1, {layers})"
        )));
    }
    let total = binomial(layers, train_size);
    let mut trains: Vec<Vec<usize>> = Vec::new();
    if total <= MAX_REPEATED_SPLITS as u128 {
        let mut comb: Vec<usize> = (0..train_size).collect();
        loop {
            trains.push(comb.clone());
            // Advance to the next combination in lexicographic order.
            let mut i = train_size;
            while i > 0 && comb[i - 1] == layers - train_size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            comb[i - 1] += 1;
            for j in i..train_size {
                comb[j] = comb[j - 1] + 1;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = std::collections::HashSet::new();
        let all: Vec<usize> = (0..layers).collect();
        while trains.len() < MAX_REPEATED_SPLITS {
            let mut pick: Vec<usize> = all.choose_multiple(&mut rng, train_size).copied().collect();
            pick.sort_unstable();
            if seen.insert(pick.clone()) {
                trains.push(pick);
            }
        }
    }
    let splits = trains
        .into_iter()
        .map(|train| Split {
            validation: complement(layers, &train),
            train,
        })
        .collect();
    Ok(CvPlan {
        mode: CvMode::Repeated,
        folds: 0,
        splits,
        seed,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub lambdas: Vec<f64>,
    /// `losses[split][lambda]`.
    pub losses: Vec<Vec<f64>>,
    pub total_loss: Vec<f64>,
    pub selected_index: usize,
    pub selected_lambda: f64,
    /// Rank of the refit on all layers at the selected lambda.
    pub d_hat: usize,
    /// Rank at each grid point from the training fits, per split.
    pub path_ranks: Vec<Vec<usize>>,
}

/// Index of the smallest total loss; ties go to the larger lambda.
pub fn select_index(total: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in total.iter().enumerate() {
        if v <= total[best] {
            best = i;
        }
    }
    best
}

/// `Z^T A Z` and `||A||_F^2` for the average over `subset`.
pub(crate) fn subset_stats(
    sample: &NetworkSample,
    z: &MembershipMatrix,
    subset: &[usize],
) -> Result<(DMatrix<f64>, f64)> {
    let avg = average_layers(sample, Some(subset))?;
    Ok((z.block_sums(avg.matrix())?, avg.matrix().norm_squared()))
}

/// Validation loss `||A_val - Z W Z^T||_F^2` without forming `n x n` matrices.
pub(crate) fn validation_loss(
    cross_val: &DMatrix<f64>,
    norm2_val: f64,
    sizes: &[usize],
    w: &DMatrix<f64>,
) -> f64 {
    let k = sizes.len();
    let mut quad = 0.0;
    for a in 0..k {
        for b in 0..k {
            quad += (sizes[a] * sizes[b]) as f64 * w[(a, b)] * w[(a, b)];
        }
    }
    norm2_val - 2.0 * cross_val.dot(w) + quad
}

fn check_sample(sample: &NetworkSample, z_hat: &MembershipMatrix) -> Result<()> {
    if sample.num_layers() < 2 {
        return Err(NetError::InvalidParameter(
            "cross-validation needs at least two layers; pass an explicit lambda".into(),
        ));
    }
    if z_hat.n() != sample.n() {
        return Err(NetError::DimensionMismatch(format!(
            "membership has {} nodes, sample has {}",
            z_hat.n(),
            sample.n()
        )));
    }
    Ok(())
}

/// Fits each split's training average along `lambdas`, scores the validation
/// average, picks the minimizer of the summed loss and refits on all layers.
pub fn cross_validate(
    sample: &NetworkSample,
    z_hat: &MembershipMatrix,
    plan: &CvPlan,
    lambdas: &[f64],
    cfg: &AdmmConfig,
) -> Result<(CvReport, SolveResult)> {
    check_sample(sample, z_hat)?;
    plan.validate(sample.num_layers())?;
    admm::check_grid(lambdas)?;
    cfg.with_lambda(lambdas[0]).validate()?;
    let rho = sample.rho();

    let per_split: Vec<(Vec<f64>, Vec<usize>)> = plan
        .splits
        .par_iter()
        .map(|split| -> Result<(Vec<f64>, Vec<usize>)> {
            let (cross_tr, norm_tr) = subset_stats(sample, z_hat, &split.train)?;
            let (cross_val, norm_val) = subset_stats(sample, z_hat, &split.validation)?;
            let problem = Problem::from_block_sums(cross_tr, z_hat, norm_tr, cfg.scaling)?;
            let path = admm::solve_path_problem(&problem, rho, lambdas, cfg)?;
            let losses = path
                .iter()
                .map(|r| validation_loss(&cross_val, norm_val, z_hat.sizes(), &r.w_rho))
                .collect();
            let ranks = path.iter().map(|r| r.d_hat).collect();
            Ok((losses, ranks))
        })
        .collect::<Result<_>>()?;

    let mut total = vec![0.0; lambdas.len()];
    for (losses, _) in &per_split {
        for (t, l) in total.iter_mut().zip(losses) {
            *t += l;
        }
    }
    let idx = select_index(&total);
    let full = average_layers(sample, None)?;
    let refit = admm::admm_solve(&full, z_hat, rho, &cfg.with_lambda(lambdas[idx]))?;
    let (losses, path_ranks) = per_split.into_iter().unzip();
    let report = CvReport {
        lambdas: lambdas.to_vec(),
        losses,
        total_loss: total,
        selected_index: idx,
        selected_lambda: lambdas[idx],
        d_hat: refit.d_hat,
        path_ranks,
    };
    Ok((report, refit))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CvKind {
    /// Uses `min(folds, L)` folds.
    Mfold { folds: usize },
    Repeated { train_size: usize },
}

/// Everything needed to cross-validate one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvSpec {
    pub kind: CvKind,
    pub grid_count: usize,
    pub floor_ratio: f64,
    pub seed: u64,
}

impl Default for CvSpec {
    fn default() -> Self {
        Self {
            kind: CvKind::Mfold { folds: DEFAULT_FOLDS },
            grid_count: DEFAULT_GRID_COUNT,
            floor_ratio: DEFAULT_FLOOR_RATIO,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CvRun {
    pub report: CvReport,
    pub refit: SolveResult,
    /// `lambda_max` of the full average; the grid's upper end.
    pub lambda_max: f64,
}

impl CvSpec {
    pub fn plan(&self, layers: usize) -> Result<CvPlan> {
        match self.kind {
            CvKind::Mfold { folds } => mfold(layers, folds.min(layers), self.seed),
            CvKind::Repeated { train_size } => repeated_splits(layers, train_size, self.seed),
        }
    }

    /// Builds the grid from the full average and cross-validates over it.
    pub fn run(&self, sample: &NetworkSample, z_hat: &MembershipMatrix, cfg: &AdmmConfig) -> Result<CvRun> {
        check_sample(sample, z_hat)?;
        let full = average_layers(sample, None)?;
        let lambda_max = Problem::from_membership(&full, z_hat, cfg.scaling)?.lambda_max();
        let grid = lambda_grid(lambda_max, self.grid_count, self.floor_ratio)?;
        let plan = self.plan(sample.num_layers())?;
        let (report, refit) = cross_validate(sample, z_hat, &plan, &grid, cfg)?;
        Ok(CvRun {
            report,
            refit,
            lambda_max,
        })
    }
}

/// Rank selection for the truncated averaging estimator with the same split
/// structure. Returns `(selected rank, total loss per candidate rank)`.
pub fn cross_validate_rank(
    sample: &NetworkSample,
    z_hat: &MembershipMatrix,
    plan: &CvPlan,
    ranks: &[usize],
) -> Result<(usize, Vec<f64>)> {
    check_sample(sample, z_hat)?;
    plan.validate(sample.num_layers())?;
    if ranks.is_empty() {
        return Err(NetError::InvalidParameter("empty rank grid".into()));
    }
    let rho = sample.rho();
    let per_split: Vec<Vec<f64>> = plan
        .splits
        .par_iter()
        .map(|split| -> Result<Vec<f64>> {
            let train = average_layers(sample, Some(&split.train))?;
            let (cross_val, norm_val) = subset_stats(sample, z_hat, &split.validation)?;
            ranks
                .iter()
                .map(|&d| {
                    let est = crate::baseline::avg_lowrank(&train, z_hat, rho, d)?;
                    let w = est.b_hat.entries() * rho;
                    Ok(validation_loss(&cross_val, norm_val, z_hat.sizes(), &w))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut total = vec![0.0; ranks.len()];
    for losses in &per_split {
        for (t, l) in total.iter_mut().zip(losses) {
            *t += l;
        }
    }
    // Smallest loss; ties go to the lower rank.
    let mut best = 0;
    for (i, &v) in total.iter().enumerate() {
        if v < total[best] {
            best = i;
        }
    }
    Ok((ranks[best], total))
}
