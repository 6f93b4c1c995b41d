//! ADMM for nuclear-norm penalized least squares
//!
//! ```text
//! minimize_W  s * ||Y - X W X^T||_F^2 + lambda * ||W||_*     subject to W = W^T
//! ```
//!
//! with `s = 1` (raw) or `s = 1/n` (per-node scaling). The splitting `W = V`
//! gives three updates per iteration: a quadratic solve for `W`, singular
//! value thresholding for `V`, and a scaled dual step for `Theta`.
//!
//! The quadratic step never forms the `K^2 x K^2` Kronecker system. With
//! `X^T X = Q D Q^T` the normal equations are diagonal in the rotated basis:
//! `W'_kl = R'_kl / (2 s d_k d_l + rho1)`. For a membership matrix `Q = I` and
//! `D = diag(n_k)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::model::{AveragedAdjacency, ConnectivityMatrix, MembershipMatrix};
use crate::numerics::{self, check_finite};

/// Loss normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    /// `||Y - X W X^T||_F^2 + lambda ||W||_*`.
    #[default]
    Raw,
    /// The loss divided by `n`. Equivalent to `Raw` with `lambda * n`.
    PerNode,
}

/// Augmented-Lagrangian parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rho1 {
    /// Used as given.
    Fixed(f64),
    /// Multiple of the mean curvature of the quadratic term,
    /// `2 s mean_kl(d_k d_l)` where `d` are the eigenvalues of `X^T X`.
    Relative(f64),
}

impl Default for Rho1 {
    fn default() -> Self {
        Rho1::Relative(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub lambda: f64,
    pub rho1: Rho1,
    /// Stop once `||W_t - W_{t-1}||_F^2 / K^2 <= epsilon`.
    pub epsilon: f64,
    pub max_iters: usize,
    pub scaling: Scaling,
    /// Clamp the final estimate to `[0, 1]`.
    pub clip: bool,
}

impl AdmmConfig {
    pub const DEFAULT_EPSILON: f64 = 1e-18;
    pub const DEFAULT_MAX_ITERS: usize = 10_000;

    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            rho1: Rho1::default(),
            epsilon: Self::DEFAULT_EPSILON,
            max_iters: Self::DEFAULT_MAX_ITERS,
            scaling: Scaling::Raw,
            clip: true,
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(NetError::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        let (Rho1::Fixed(r) | Rho1::Relative(r)) = self.rho1;
        if !(r > 0.0 && r.is_finite()) {
            return Err(NetError::InvalidParameter(format!("rho1 must be positive, got {r}")));
        }
        if !(self.epsilon > 0.0) {
            return Err(NetError::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iters == 0 {
            return Err(NetError::InvalidParameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Iterates of one solve. All matrices are `K x K`.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub w: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub theta: DMatrix<f64>,
    pub iter: usize,
    pub w_change: f64,
    pub primal_residual: f64,
    /// Number of singular values kept by the last thresholding step.
    pub v_rank: usize,
}

impl AdmmState {
    pub fn zeros(k: usize) -> Self {
        Self {
            w: DMatrix::zeros(k, k),
            v: DMatrix::zeros(k, k),
            theta: DMatrix::zeros(k, k),
            iter: 0,
            w_change: f64::INFINITY,
            primal_residual: 0.0,
            v_rank: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Estimate of `B*`, i.e. the converged `V` divided by `rho`, clipped to
    /// `[0, 1]` when the config asks for it.
    pub b_hat: ConnectivityMatrix,
    /// The same estimate before clipping.
    pub b_unclipped: DMatrix<f64>,
    /// Converged `V` on the `rho * B` scale.
    pub w_rho: DMatrix<f64>,
    pub d_hat: usize,
    pub lambda_used: f64,
    pub iterations: usize,
    /// Penalized objective at `w_rho` under the configured scaling.
    pub objective_value: f64,
    pub converged: bool,
    pub clipped_entries: usize,
    pub primal_residual: f64,
}

/// Sufficient statistics of `(Y, X)` for the solver.
#[derive(Debug, Clone)]
pub struct Problem {
    k: usize,
    n: usize,
    /// Eigenvectors of `X^T X`; `None` when `X^T X` is diagonal.
    basis: Option<DMatrix<f64>>,
    /// Eigenvalues of `X^T X` (community sizes for a membership matrix).
    weights: Vec<f64>,
    /// `X^T Y X`.
    cross: DMatrix<f64>,
    /// `X^T Y X` in the eigenbasis of `X^T X`.
    cross_rot: DMatrix<f64>,
    y_norm2: f64,
    scaling: Scaling,
}

impl Problem {
    pub fn from_membership(
        y: &AveragedAdjacency,
        z: &MembershipMatrix,
        scaling: Scaling,
    ) -> Result<Self> {
        let cross = z.block_sums(y.matrix())?;
        Self::from_block_sums(cross, z, y.matrix().norm_squared(), scaling)
    }

    /// Build from precomputed `Z^T Y Z` and `||Y||_F^2`.
    pub fn from_block_sums(
        cross: DMatrix<f64>,
        z: &MembershipMatrix,
        y_norm2: f64,
        scaling: Scaling,
    ) -> Result<Self> {
        if let Some(k) = z.first_empty_community() {
            return Err(NetError::EmptyCommunity(k));
        }
        if cross.nrows() != z.k() || cross.ncols() != z.k() {
            return Err(NetError::DimensionMismatch("block sums must be K x K".into()));
        }
        check_finite(&cross, "Y")?;
        Ok(Self {
            k: z.k(),
            n: z.n(),
            basis: None,
            weights: z.sizes().iter().map(|&s| s as f64).collect(),
            cross_rot: cross.clone(),
            cross,
            y_norm2,
            scaling,
        })
    }

    /// General feature matrix `X` (`n x K`).
    pub fn from_features(y: &DMatrix<f64>, x: &DMatrix<f64>, scaling: Scaling) -> Result<Self> {
        let n = x.nrows();
        if y.nrows() != n || y.ncols() != n {
            return Err(NetError::DimensionMismatch(format!(
                "Y is {}x{}, X has {n} rows",
                y.nrows(),
                y.ncols()
            )));
        }
        check_finite(y, "Y")?;
        check_finite(x, "X")?;
        let k = x.ncols();
        let gram = x.transpose() * x;
        let gram = (&gram + gram.transpose()) * 0.5;
        let eig = gram.symmetric_eigen();
        let q = eig.eigenvectors;
        let cross = x.transpose() * y * x;
        let cross_rot = q.transpose() * &cross * &q;
        Ok(Self {
            k,
            n,
            weights: eig.eigenvalues.iter().copied().collect(),
            basis: Some(q),
            cross,
            cross_rot,
            y_norm2: y.norm_squared(),
            scaling,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn scale(&self) -> f64 {
        match self.scaling {
            Scaling::Raw => 1.0,
            Scaling::PerNode => 1.0 / self.n as f64,
        }
    }

    /// Mean of `2 s d_k d_l` over all `(k, l)`.
    pub fn mean_curvature(&self) -> f64 {
        let mean_w: f64 = self.weights.iter().sum::<f64>() / self.k as f64;
        2.0 * self.scale() * mean_w * mean_w
    }

    pub fn effective_rho1(&self, rho1: Rho1) -> f64 {
        match rho1 {
            Rho1::Fixed(r) => r,
            Rho1::Relative(c) => {
                let m = self.mean_curvature();
                if m > 0.0 {
                    c * m
                } else {
                    c
                }
            }
        }
    }

    /// Smallest `lambda` whose solution is the zero matrix: `2 s ||X^T Y X||_op`.
    pub fn lambda_max(&self) -> f64 {
        let op = numerics::operator_norm(&self.cross).unwrap_or(0.0);
        2.0 * self.scale() * op
    }

    fn rotate_in(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.basis {
            None => m.clone(),
            Some(q) => q.transpose() * m * q,
        }
    }

    fn rotate_out(&self, m: DMatrix<f64>) -> DMatrix<f64> {
        match &self.basis {
            None => m,
            Some(q) => {
                let w = q * m * q.transpose();
                (&w + w.transpose()) * 0.5
            }
        }
    }

    /// Minimizer of `s ||Y - X W X^T||^2 + (rho1/2) ||V - W + Theta||^2`.
    pub fn w_update(&self, v: &DMatrix<f64>, theta: &DMatrix<f64>, rho1: f64) -> Result<DMatrix<f64>> {
        if !(rho1 > 0.0) {
            return Err(NetError::InvalidParameter(format!("rho1 must be positive, got {rho1}")));
        }
        let k = self.k;
        if v.shape() != (k, k) || theta.shape() != (k, k) {
            return Err(NetError::DimensionMismatch("V and Theta must be K x K".into()));
        }
        let s2 = 2.0 * self.scale();
        let anchor = self.rotate_in(&(v + theta));
        let w = DMatrix::from_fn(k, k, |a, b| {
            (s2 * self.cross_rot[(a, b)] + rho1 * anchor[(a, b)])
                / (s2 * self.weights[a] * self.weights[b] + rho1)
        });
        Ok(self.rotate_out(w))
    }

    /// `s ||Y - X W X^T||_F^2`, expanded so only `K x K` quantities are touched.
    pub fn loss(&self, w: &DMatrix<f64>) -> f64 {
        let wr = self.rotate_in(w);
        let mut quad = 0.0;
        for a in 0..self.k {
            for b in 0..self.k {
                quad += self.weights[a] * self.weights[b] * wr[(a, b)] * wr[(a, b)];
            }
        }
        let inner = self.cross.dot(w);
        self.scale() * (self.y_norm2 - 2.0 * inner + quad)
    }

    pub fn objective(&self, w: &DMatrix<f64>, lambda: f64) -> Result<f64> {
        Ok(self.loss(w) + lambda * numerics::nuclear_norm(w)?)
    }
}

/// `W` step for a general feature matrix under raw scaling.
pub fn w_update(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    v: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    rho1: f64,
) -> Result<DMatrix<f64>> {
    Problem::from_features(y, x, Scaling::Raw)?.w_update(v, theta, rho1)
}

/// `V = svt(W - Theta, lambda / rho1)`.
pub fn v_update(w: &DMatrix<f64>, theta: &DMatrix<f64>, lambda: f64, rho1: f64) -> Result<DMatrix<f64>> {
    Ok(v_update_with_rank(w, theta, lambda, rho1)?.matrix)
}

fn v_update_with_rank(
    w: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    lambda: f64,
    rho1: f64,
) -> Result<numerics::Thresholded> {
    if !(lambda > 0.0 && rho1 > 0.0) {
        return Err(NetError::InvalidParameter(format!(
            "lambda and rho1 must be positive (lambda={lambda}, rho1={rho1})"
        )));
    }
    numerics::svt_with_rank(&(w - theta), lambda / rho1)
}

/// `Theta + V - W`.
pub fn theta_update(theta: &DMatrix<f64>, v: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if theta.shape() != v.shape() || v.shape() != w.shape() {
        return Err(NetError::DimensionMismatch("Theta, V and W must share a shape".into()));
    }
    Ok(theta + v - w)
}

/// `lambda_max` for a general `X`.
pub fn lambda_max(y: &DMatrix<f64>, x: &DMatrix<f64>, scaling: Scaling) -> Result<f64> {
    Ok(Problem::from_features(y, x, scaling)?.lambda_max())
}

/// Runs ADMM from `state` until the stopping rule or `max_iters`.
pub fn run_admm(problem: &Problem, state: &mut AdmmState, cfg: &AdmmConfig) -> Result<bool> {
    cfg.validate()?;
    let k = problem.k();
    let k2 = (k * k) as f64;
    let rho1 = problem.effective_rho1(cfg.rho1);
    for step in 0..cfg.max_iters {
        let w = problem.w_update(&state.v, &state.theta, rho1)?;
        let thr = v_update_with_rank(&w, &state.theta, cfg.lambda, rho1)?;
        let theta = &state.theta + &thr.matrix - &w;
        let change = (&w - &state.w).norm_squared() / k2;
        state.primal_residual = (&thr.matrix - &w).norm();
        state.w = w;
        state.v = thr.matrix;
        state.v_rank = thr.rank;
        state.theta = theta;
        state.w_change = change;
        state.iter += 1;
        if !change.is_finite() || state.theta.iter().any(|x| !x.is_finite()) {
            return Err(NetError::NonFinite(format!(
                "ADMM iterate at iteration {} (lambda={}, rho1={rho1})",
                state.iter, cfg.lambda
            )));
        }
        // After a warm start the first W step reproduces the previous W, so
        // the change test is only meaningful from the second step on.
        if change <= cfg.epsilon && (step > 0 || cfg.max_iters == 1) {
            return Ok(true);
        }
    }
    Ok(false)
}

fn finish(
    problem: &Problem,
    state: &AdmmState,
    rho: f64,
    cfg: &AdmmConfig,
    iterations: usize,
    converged: bool,
) -> Result<SolveResult> {
    let k = problem.k() as f64;
    let tol = 10.0 * (k * k * cfg.epsilon).sqrt();
    let d_hat = if state.primal_residual <= tol {
        state.v_rank
    } else {
        numerics::numerical_rank(&state.w, 1e-6)?
    };
    let b_unclipped = &state.v / rho;
    let mut clipped_entries = 0;
    let b_hat = if cfg.clip {
        let clipped = b_unclipped.map(|x| {
            let c = x.clamp(0.0, 1.0);
            if c != x {
                clipped_entries += 1;
            }
            c
        });
        ConnectivityMatrix::probability(clipped)?
    } else {
        ConnectivityMatrix::diagnostic(b_unclipped.clone())?
    };
    Ok(SolveResult {
        b_hat,
        b_unclipped,
        w_rho: state.v.clone(),
        d_hat,
        lambda_used: cfg.lambda,
        iterations,
        objective_value: problem.objective(&state.v, cfg.lambda)?,
        converged,
        clipped_entries,
        primal_residual: state.primal_residual,
    })
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(NetError::InvalidParameter(format!("sparsity factor {rho} outside (0, 1]")));
    }
    Ok(())
}

/// Solve from the zero initialization and return `B_hat = V / rho`.
pub fn solve_problem(problem: &Problem, rho: f64, cfg: &AdmmConfig) -> Result<SolveResult> {
    check_rho(rho)?;
    let mut state = AdmmState::zeros(problem.k());
    let converged = run_admm(problem, &mut state, cfg)?;
    finish(problem, &state, rho, cfg, state.iter, converged)
}

pub fn admm_solve(
    y: &AveragedAdjacency,
    z_hat: &MembershipMatrix,
    rho: f64,
    cfg: &AdmmConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    let problem = Problem::from_membership(y, z_hat, cfg.scaling)?;
    solve_problem(&problem, rho, cfg)
}

pub(crate) fn check_grid(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(NetError::InvalidParameter("empty lambda grid".into()));
    }
    if lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(NetError::InvalidParameter("lambda grid must be positive".into()));
    }
    if lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(NetError::InvalidParameter("lambda grid must be strictly ascending".into()));
    }
    Ok(())
}

/// Warm-started path: solves the smallest lambda first and seeds each later
/// solve with the previous `W`, `V`, `Theta`.
pub fn solve_path_problem(
    problem: &Problem,
    rho: f64,
    lambdas: &[f64],
    cfg: &AdmmConfig,
) -> Result<Vec<SolveResult>> {
    check_grid(lambdas)?;
    check_rho(rho)?;
    let mut state = AdmmState::zeros(problem.k());
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let c = cfg.with_lambda(lambda);
        state.iter = 0;
        let converged = run_admm(problem, &mut state, &c)?;
        out.push(finish(problem, &state, rho, &c, state.iter, converged)?);
    }
    Ok(out)
}

pub fn solve_path(
    y: &AveragedAdjacency,
    z_hat: &MembershipMatrix,
    rho: f64,
    lambdas: &[f64],
    cfg: &AdmmConfig,
) -> Result<Vec<SolveResult>> {
    let problem = Problem::from_membership(y, z_hat, cfg.scaling)?;
    solve_path_problem(&problem, rho, lambdas, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    /// Dense `(2 C^T C + rho1 I)^{-1} [2 C^T y + rho1 (theta + v)]` with `C = X (x) X`.
    fn kronecker_oracle(
        y: &DMatrix<f64>,
        x: &DMatrix<f64>,
        v: &DMatrix<f64>,
        theta: &DMatrix<f64>,
        rho1: f64,
    ) -> DMatrix<f64> {
        let k = x.ncols();
        let c = x.kronecker(x);
        let yv = DVector::from_column_slice(y.as_slice());
        let rhs = 2.0 * c.transpose() * yv
            + rho1 * (DVector::from_column_slice(theta.as_slice())
                + DVector::from_column_slice(v.as_slice()));
        let lhs = 2.0 * c.transpose() * &c + rho1 * DMatrix::identity(k * k, k * k);
        let w = lhs.lu().solve(&rhs).unwrap();
        DMatrix::from_column_slice(k, k, w.as_slice())
    }

    #[test]
    fn w_update_identity_design() {
        let y = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 4.0]));
        let x = DMatrix::identity(2, 2);
        let z = DMatrix::zeros(2, 2);
        let w = w_update(&y, &x, &z, &z, 2.0).unwrap();
        let oracle = kronecker_oracle(&y, &x, &z, &z, 2.0);
        assert!((&w - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0]))).norm() < 1e-12);
        assert!((w - oracle).norm() < 1e-12);
    }

    #[test]
    fn w_update_matches_kronecker_system_for_general_x() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.3, -0.2, 1.0, 0.5, 0.5, 2.0, -1.0]);
        let y0 = DMatrix::from_fn(4, 4, |i, j| ((i + 1) * (j + 2)) as f64 * 0.1);
        let y = (&y0 + y0.transpose()) * 0.5;
        let v = DMatrix::from_row_slice(2, 2, &[0.2, -0.1, -0.1, 0.4]);
        let th = DMatrix::from_row_slice(2, 2, &[0.05, 0.3, 0.3, -0.2]);
        let w = w_update(&y, &x, &v, &th, 0.7).unwrap();
        assert!((w - kronecker_oracle(&y, &x, &v, &th, 0.7)).norm() < 1e-10);
    }

    #[test]
    fn w_update_small_rho1_is_blockwise_average() {
        let z = MembershipMatrix::new(vec![0, 0, 1, 1, 1], 2).unwrap();
        let y0 = DMatrix::from_fn(5, 5, |i, j| ((i * 3 + j * 5) % 4) as f64 / 4.0);
        let y = AveragedAdjacency::from_matrix((&y0 + y0.transpose()) * 0.5, 1).unwrap();
        let p = Problem::from_membership(&y, &z, Scaling::Raw).unwrap();
        let zero = DMatrix::zeros(2, 2);
        let w = p.w_update(&zero, &zero, 1e-12).unwrap();
        let sums = z.block_sums(y.matrix()).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let avg = sums[(a, b)] / (z.sizes()[a] * z.sizes()[b]) as f64;
                assert!((w[(a, b)] - avg).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn w_update_fixed_point() {
        let z = MembershipMatrix::new(vec![0, 1, 2, 1, 0, 2, 2], 3).unwrap();
        let w0 = DMatrix::from_row_slice(3, 3, &[0.3, 0.1, 0.5, 0.1, 0.9, 0.2, 0.5, 0.2, 0.4]);
        let y = AveragedAdjacency::from_matrix(z.expand(&w0).unwrap(), 1).unwrap();
        let p = Problem::from_membership(&y, &z, Scaling::Raw).unwrap();
        let w = p.w_update(&w0, &DMatrix::zeros(3, 3), 3.0).unwrap();
        assert!((w - &w0).norm() < 1e-12);
    }

    #[test]
    fn w_update_rejects_bad_rho1() {
        let x = DMatrix::identity(2, 2);
        let z = DMatrix::zeros(2, 2);
        assert!(w_update(&z, &x, &z, &z, 0.0).is_err());
    }

    #[test]
    fn v_update_examples() {
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let z = DMatrix::zeros(2, 2);
        let v = v_update(&w, &z, 2.0, 1.0).unwrap();
        assert!((v - DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]))).norm() < 1e-12);
        assert_eq!(v_update(&w, &z, 3.0, 1.0).unwrap(), DMatrix::zeros(2, 2));
        let v = v_update(&w, &z, 1e-14, 1.0).unwrap();
        assert!((v - &w).norm() < 1e-12);
        assert!(v_update(&w, &z, 0.0, 1.0).is_err());
    }

    #[test]
    fn theta_update_examples() {
        let th = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let w = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert_eq!(theta_update(&th, &w, &w).unwrap(), th);
        let i = DMatrix::identity(2, 2);
        let z = DMatrix::zeros(2, 2);
        assert_eq!(theta_update(&z, &i, &z).unwrap(), i);
        let v = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 2.0]);
        let expect = DMatrix::from_row_slice(2, 2, &[1.5, 0.5, 2.5, 5.5]);
        assert_eq!(theta_update(&th, &v, &w).unwrap(), expect);
        assert!(theta_update(&th, &DMatrix::zeros(3, 3), &w).is_err());
    }

    #[test]
    fn lambda_max_examples() {
        let x = DMatrix::identity(1, 1);
        assert_eq!(lambda_max(&DMatrix::from_element(1, 1, 1.0), &x, Scaling::Raw).unwrap(), 2.0);
        assert_eq!(lambda_max(&DMatrix::zeros(1, 1), &x, Scaling::Raw).unwrap(), 0.0);
        assert!(lambda_max(&DMatrix::zeros(2, 2), &x, Scaling::Raw).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AdmmConfig::new(0.0).validate().is_err());
        assert!(AdmmConfig { rho1: Rho1::Fixed(-1.0), ..AdmmConfig::new(1.0) }.validate().is_err());
        assert!(AdmmConfig { rho1: Rho1::Relative(0.0), ..AdmmConfig::new(1.0) }.validate().is_err());
        assert!(AdmmConfig { epsilon: 0.0, ..AdmmConfig::new(1.0) }.validate().is_err());
        assert!(AdmmConfig { max_iters: 0, ..AdmmConfig::new(1.0) }.validate().is_err());
        assert!(AdmmConfig::new(1.0).validate().is_ok());
    }

    #[test]
    fn empty_community_is_an_error() {
        let z = MembershipMatrix::new(vec![0, 0, 0], 2).unwrap();
        let y = AveragedAdjacency::from_matrix(DMatrix::zeros(3, 3), 1).unwrap();
        assert!(matches!(
            admm_solve(&y, &z, 1.0, &AdmmConfig::new(1.0)),
            Err(NetError::EmptyCommunity(1))
        ));
    }

    #[test]
    fn path_grid_validation() {
        let z = MembershipMatrix::new(vec![0, 1], 2).unwrap();
        let y = AveragedAdjacency::from_matrix(DMatrix::identity(2, 2), 1).unwrap();
        let cfg = AdmmConfig::new(1.0);
        assert!(solve_path(&y, &z, 1.0, &[], &cfg).is_err());
        assert!(solve_path(&y, &z, 1.0, &[0.2, 0.1], &cfg).is_err());
        assert!(solve_path(&y, &z, 1.0, &[0.0, 0.1], &cfg).is_err());
    }

    #[test]
    fn single_point_path_equals_cold_solve() {
        let z = MembershipMatrix::new(vec![0, 1, 1, 0, 2, 2], 3).unwrap();
        let y0 = DMatrix::from_fn(6, 6, |i, j| ((i * 5 + j * 7) % 3) as f64 / 3.0);
        let y = AveragedAdjacency::from_matrix((&y0 + y0.transpose()) * 0.5, 1).unwrap();
        let cfg = AdmmConfig::new(0.5);
        let cold = admm_solve(&y, &z, 1.0, &cfg).unwrap();
        let path = solve_path(&y, &z, 1.0, &[0.5], &cfg).unwrap();
        assert_eq!(cold.b_unclipped, path[0].b_unclipped);
        assert_eq!(cold.iterations, path[0].iterations);
    }
}
