//! Comparison estimators: blockwise averaging, its low-rank truncation, and
//! averaging after spectral truncation of the adjacency.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::model::{symmetrize, AveragedAdjacency, ConnectivityMatrix, MembershipMatrix};
use crate::numerics::{self, EigenOrder, SpectrumResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    Averaging,
    AvgLowRank,
    SpectralEmbedding,
}

/// How diagonal cells of `A` enter the diagonal blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagonalCells {
    /// Sum over all `n_k^2` cells, self-loops included.
    #[default]
    Include,
    /// Skip `A_ii` and divide by `n_k (n_k - 1)`; for loop-free data.
    Exclude,
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub b_hat: ConnectivityMatrix,
    pub d_hat: usize,
    pub method: BaselineMethod,
}

fn wrap(m: DMatrix<f64>, method: BaselineMethod) -> Result<BaselineResult> {
    let m = symmetrize(&m);
    let d_hat = numerics::numerical_rank(&m, 1e-8)?;
    let b_hat = if m.iter().all(|v| (0.0..=1.0).contains(v)) {
        ConnectivityMatrix::probability(m)?
    } else {
        ConnectivityMatrix::diagnostic(m)?
    };
    Ok(BaselineResult { b_hat, d_hat, method })
}

fn check_inputs(y: &AveragedAdjacency, z: &MembershipMatrix, rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(NetError::InvalidParameter(format!("sparsity factor {rho} outside (0, 1]")));
    }
    if let Some(k) = z.first_empty_community() {
        return Err(NetError::EmptyCommunity(k));
    }
    if y.n() != z.n() {
        return Err(NetError::DimensionMismatch(format!(
            "adjacency has {} nodes, membership has {}",
            y.n(),
            z.n()
        )));
    }
    Ok(())
}

/// `B_kl = (Z_k^T A Z_l) / (rho n_k n_l)`.
pub fn averaging_estimator(
    y: &AveragedAdjacency,
    z_hat: &MembershipMatrix,
    rho: f64,
) -> Result<BaselineResult> {
    averaging_estimator_with(y, z_hat, rho, DiagonalCells::Include)
}

pub fn averaging_estimator_with(
    y: &AveragedAdjacency,
    z_hat: &MembershipMatrix,
    rho: f64,
    diagonal: DiagonalCells,
) -> Result<BaselineResult> {
    check_inputs(y, z_hat, rho)?;
    let mut sums = z_hat.block_sums(y.matrix())?;
    let sizes = z_hat.sizes();
    let k = z_hat.k();
    if diagonal == DiagonalCells::Exclude {
        for (i, &g) in z_hat.labels().iter().enumerate() {
            sums[(g, g)] -= y.matrix()[(i, i)];
        }
    }
    let mut b = DMatrix::zeros(k, k);
    for a in 0..k {
        for c in 0..k {
            let cells = if a == c && diagonal == DiagonalCells::Exclude {
                (sizes[a] * (sizes[a] - 1)) as f64
            } else {
                (sizes[a] * sizes[c]) as f64
            };
            b[(a, c)] = if cells > 0.0 { sums[(a, c)] / (rho * cells) } else { 0.0 };
        }
    }
    wrap(b, BaselineMethod::Averaging)
}

/// Keeps the `d` largest-magnitude eigenpairs of a symmetric matrix.
pub fn truncate_by_magnitude(m: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    let spec = numerics::sym_eig_topk(m, d, EigenOrder::ByMagnitude)?;
    Ok(numerics::reconstruct(&spec.values, &spec.vectors))
}

/// Rank-`d` truncation of the averaging estimate.
pub fn avg_lowrank(
    y: &AveragedAdjacency,
    z_hat: &MembershipMatrix,
    rho: f64,
    d: usize,
) -> Result<BaselineResult> {
    let k = z_hat.k();
    if d == 0 || d > k {
        return Err(NetError::InvalidParameter(format!("rank {d} outside [1, {k}]")));
    }
    let avg = averaging_estimator(y, z_hat, rho)?;
    let m = truncate_by_magnitude(avg.b_hat.entries(), d)?;
    let mut out = wrap(m, BaselineMethod::AvgLowRank)?;
    out.d_hat = out.d_hat.min(d);
    Ok(out)
}

/// Averaging applied to `A` truncated to its `r` leading eigenpairs by
/// magnitude.
pub fn spectral_embedding_estimator(
    y: &AveragedAdjacency,
    z_hat: &MembershipMatrix,
    rho: f64,
    r: usize,
) -> Result<BaselineResult> {
    check_inputs(y, z_hat, rho)?;
    let n = y.n();
    if r == 0 || r > n {
        return Err(NetError::InvalidParameter(format!("truncation rank {r} outside [1, {n}]")));
    }
    let spec = numerics::sym_eig_topk(y.matrix(), r, EigenOrder::ByMagnitude)?;
    spectral_embedding_from_spectrum(&spec, z_hat, rho, r)
}

/// Same as [`spectral_embedding_estimator`] given a precomputed spectrum of
/// `A` ordered by magnitude with at least `r` pairs. Lets a sweep over `r`
/// share one decomposition.
pub fn spectral_embedding_from_spectrum(
    spec: &SpectrumResult,
    z_hat: &MembershipMatrix,
    rho: f64,
    r: usize,
) -> Result<BaselineResult> {
    if r == 0 || r > spec.values.len() {
        return Err(NetError::InvalidParameter(format!(
            "truncation rank {r} outside [1, {}]",
            spec.values.len()
        )));
    }
    if spec.vectors.nrows() != z_hat.n() {
        return Err(NetError::DimensionMismatch("spectrum and membership disagree on n".into()));
    }
    if let Some(k) = z_hat.first_empty_community() {
        return Err(NetError::EmptyCommunity(k));
    }
    let k = z_hat.k();
    // Z^T U_r, then (Z^T U_r) diag(lambda) (Z^T U_r)^T.
    let mut zu = DMatrix::<f64>::zeros(k, r);
    for (i, &g) in z_hat.labels().iter().enumerate() {
        for j in 0..r {
            zu[(g, j)] += spec.vectors[(i, j)];
        }
    }
    let mut scaled = zu.clone();
    for j in 0..r {
        scaled.column_mut(j).scale_mut(spec.values[j]);
    }
    let mut b = scaled * zu.transpose();
    let sizes = z_hat.sizes();
    for a in 0..k {
        for c in 0..k {
            b[(a, c)] /= rho * (sizes[a] * sizes[c]) as f64;
        }
    }
    wrap(b, BaselineMethod::SpectralEmbedding)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adj(m: DMatrix<f64>) -> AveragedAdjacency {
        AveragedAdjacency::from_matrix(m, 1).unwrap()
    }

    #[test]
    fn blockwise_sums() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[0., 1., 1., 0., 1., 0., 0., 1., 1., 0., 0., 1., 0., 1., 1., 0.],
        );
        let z = MembershipMatrix::new(vec![0, 0, 1, 1], 2).unwrap();
        let r = averaging_estimator(&adj(a), &z, 1.0).unwrap();
        assert_eq!(r.b_hat.entries(), &DMatrix::from_element(2, 2, 0.5));
        assert_eq!(r.method, BaselineMethod::Averaging);
    }

    #[test]
    fn diagonal_cells_in_denominator() {
        let a = DMatrix::from_row_slice(2, 2, &[0., 1., 1., 0.]);
        let z = MembershipMatrix::new(vec![0, 0], 1).unwrap();
        let inc = averaging_estimator(&adj(a.clone()), &z, 1.0).unwrap();
        assert_eq!(inc.b_hat.entries()[(0, 0)], 0.5);
        let exc = averaging_estimator_with(&adj(a), &z, 1.0, DiagonalCells::Exclude).unwrap();
        assert_eq!(exc.b_hat.entries()[(0, 0)], 1.0);
    }

    #[test]
    fn noiseless_identity_and_agreement() {
        let b = DMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.1, 0.2, 0.4, 0.3, 0.1, 0.3, 0.6]);
        let z = MembershipMatrix::from_sizes(&[3, 4, 5]).unwrap();
        let y = adj(z.expand(&b).unwrap());
        let avg = averaging_estimator(&y, &z, 1.0).unwrap();
        assert!((avg.b_hat.entries() - &b).amax() < 1e-14);
        assert_eq!(avg.d_hat, 3);
        let lr = avg_lowrank(&y, &z, 1.0, 3).unwrap();
        assert!((lr.b_hat.entries() - &b).amax() < 1e-12);
        let se = spectral_embedding_estimator(&y, &z, 1.0, 12).unwrap();
        assert!((se.b_hat.entries() - &b).amax() < 1e-12);
    }

    #[test]
    fn rho_rescales() {
        let b = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.2, 0.7]);
        let z = MembershipMatrix::from_sizes(&[2, 3]).unwrap();
        let y = adj(z.expand(&b).unwrap() * 0.1);
        let avg = averaging_estimator(&y, &z, 0.1).unwrap();
        assert!((avg.b_hat.entries() - &b).amax() < 1e-14);
    }

    #[test]
    fn rank_one_is_kept() {
        let u = nalgebra::DVector::from_vec(vec![0.8, 0.64, 0.512]);
        let b = &u * u.transpose();
        let z = MembershipMatrix::from_sizes(&[2, 2, 2]).unwrap();
        let y = adj(z.expand(&b).unwrap());
        let lr = avg_lowrank(&y, &z, 1.0, 1).unwrap();
        assert!((lr.b_hat.entries() - &b).amax() < 1e-12);
        assert_eq!(lr.d_hat, 1);
    }

    #[test]
    fn exact_low_rank_truncation() {
        let b = crate::model::multilayer_suite().unwrap()[0].entries().clone();
        let z = MembershipMatrix::from_sizes(&[4, 5, 6]).unwrap();
        let y = adj(z.expand(&b).unwrap());
        let se = spectral_embedding_estimator(&y, &z, 1.0, 3).unwrap();
        assert!((se.b_hat.entries() - &b).amax() < 1e-8);
    }

    #[test]
    fn argument_errors() {
        let z = MembershipMatrix::from_sizes(&[2, 2]).unwrap();
        let y = adj(DMatrix::zeros(4, 4));
        assert!(avg_lowrank(&y, &z, 1.0, 0).is_err());
        assert!(avg_lowrank(&y, &z, 1.0, 3).is_err());
        assert!(spectral_embedding_estimator(&y, &z, 1.0, 5).is_err());
        assert!(averaging_estimator(&y, &z, 0.0).is_err());
        let empty = MembershipMatrix::new(vec![0, 0, 0, 0], 2).unwrap();
        assert!(matches!(averaging_estimator(&y, &empty, 1.0), Err(NetError::EmptyCommunity(1))));
    }
}
