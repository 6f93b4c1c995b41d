//! Dense matrix primitives: symmetric eigendecomposition, SVD, singular value
//! thresholding, operator norm and numerical rank.
//!
//! Reconstruction tolerances are `1e-8` relative unless stated otherwise.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::error::{NetError, Result};

/// Eigen- or singular values with an orthonormal basis stored column-wise.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Ordering of eigenpairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenOrder {
    /// Decreasing `|lambda|`.
    ByMagnitude,
    /// Decreasing `lambda`.
    ByValue,
}

/// Thin SVD `M = U diag(sigma) V^T` with `sigma` in decreasing order.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

pub(crate) fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NetError::NonFinite(what.to_string()))
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// Largest `|M_ij - M_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Symmetric within `rel_tol` of the largest absolute entry.
pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    m.is_square() && asymmetry(m) <= rel_tol * max_abs(m)
}

pub fn check_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(NetError::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !is_symmetric(m, rel_tol) {
        return Err(NetError::NotSymmetric {
            asymmetry: asymmetry(m),
        });
    }
    Ok(())
}

fn dominant_index(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

/// Full symmetric eigendecomposition in the requested order.
///
/// Each eigenvector is signed so that its largest-magnitude coordinate is
/// positive. Exactly equal sort keys are ordered by the index of that
/// dominant coordinate.
pub fn sym_eig(m: &DMatrix<f64>, order: EigenOrder) -> Result<SpectrumResult> {
    check_finite(m, "eigendecomposition input")?;
    check_symmetric(m, 1e-10)?;
    let n = m.nrows();
    if n == 0 {
        return Err(NetError::InvalidParameter("empty matrix".into()));
    }
    let eig = m.clone().symmetric_eigen();
    let mut pairs: Vec<(f64, Vec<f64>, usize)> = (0..n)
        .map(|c| {
            let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            let dom = dominant_index(&v);
            if v[dom] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (eig.eigenvalues[c], v, dom)
        })
        .collect();
    let key = |x: f64| match order {
        EigenOrder::ByMagnitude => x.abs(),
        EigenOrder::ByValue => x,
    };
    pairs.sort_by(|a, b| {
        key(b.0)
            .partial_cmp(&key(a.0))
            .unwrap_or(Ordering::Equal)
            .then(a.2.cmp(&b.2))
    });
    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| pairs[j].1[i]);
    Ok(SpectrumResult { values, vectors })
}

/// The `k` leading eigenpairs of a symmetric matrix.
pub fn sym_eig_topk(m: &DMatrix<f64>, k: usize, order: EigenOrder) -> Result<SpectrumResult> {
    if k == 0 || k > m.nrows() {
        return Err(NetError::InvalidParameter(format!(
            "k={k} out of range for a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let full = sym_eig(m, order)?;
    Ok(SpectrumResult {
        values: full.values[..k].to_vec(),
        vectors: full.vectors.columns(0, k).into_owned(),
    })
}

/// Thin SVD with singular values sorted in decreasing order.
pub fn svd_full(m: &DMatrix<f64>) -> Result<SvdResult> {
    check_finite(m, "SVD input")?;
    let p = m.nrows().min(m.ncols());
    if p == 0 {
        return Ok(SvdResult {
            u: DMatrix::zeros(m.nrows(), 0),
            singular_values: Vec::new(),
            v_t: DMatrix::zeros(0, m.ncols()),
        });
    }
    let svd = m.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(NetError::Numerical("SVD did not return vectors".into())),
    };
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ok(SvdResult {
        u: DMatrix::from_fn(m.nrows(), p, |i, j| u[(i, idx[j])]),
        singular_values: idx.iter().map(|&j| svd.singular_values[j]).collect(),
        v_t: DMatrix::from_fn(p, m.ncols(), |i, j| v_t[(idx[i], j)]),
    })
}

/// Singular values only, decreasing.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_finite(m, "SVD input")?;
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    Ok(s)
}

/// Output of [`svt_with_rank`].
#[derive(Debug, Clone)]
pub struct Thresholded {
    pub matrix: DMatrix<f64>,
    /// Number of singular values that survived thresholding (exactly nonzero).
    pub rank: usize,
    /// Soft-thresholded singular values, decreasing.
    pub singular_values: Vec<f64>,
}

/// Singular value soft-thresholding: `sum_j max(sigma_j - tau, 0) a_j b_j^T`.
///
/// When the input is symmetric within `1e-10` the result is replaced by
/// `(S + S^T) / 2`.
pub fn svt_with_rank(m: &DMatrix<f64>, tau: f64) -> Result<Thresholded> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(NetError::InvalidParameter(format!(
            "threshold must be finite and >= 0, got {tau}"
        )));
    }
    let svd = svd_full(m)?;
    let shrunk: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|s| (s - tau).max(0.0))
        .collect();
    let rank = shrunk.iter().take_while(|&&s| s > 0.0).count();
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (j, &s) in shrunk.iter().enumerate().take(rank) {
        let a = svd.u.column(j);
        let b = svd.v_t.row(j);
        out += (a * b) * s;
    }
    if m.is_square() && is_symmetric(m, 1e-10) {
        let t = out.transpose();
        out = (&out + t) * 0.5;
    }
    Ok(Thresholded {
        matrix: out,
        rank,
        singular_values: shrunk,
    })
}

pub fn svt(m: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    Ok(svt_with_rank(m, tau)?.matrix)
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

/// Count of singular values above `rel_tol * sigma_1`; 0 for the zero matrix.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    if !(rel_tol > 0.0) {
        return Err(NetError::InvalidParameter(format!(
            "rank tolerance must be positive, got {rel_tol}"
        )));
    }
    let s = singular_values(m)?;
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > rel_tol * top).count())
}

/// Matrix from the `k` listed eigenpairs: `sum_j values_j v_j v_j^T`.
pub fn reconstruct(values: &[f64], vectors: &DMatrix<f64>) -> DMatrix<f64> {
    let n = vectors.nrows();
    let mut scaled = vectors.columns(0, values.len()).into_owned();
    for (j, &v) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    let out = scaled * vectors.columns(0, values.len()).transpose();
    debug_assert_eq!(out.nrows(), n);
    out
}

/// Upper-triangular entries (diagonal included), row-major.
pub fn upper_triangle(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push(m[(i, j)]);
        }
    }
    DVector::from_vec(out)
}
