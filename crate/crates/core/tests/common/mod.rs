//! Test-only oracles. Nothing here calls the solver code it is used to check.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netblock::model::{AveragedAdjacency, MembershipMatrix};

/// Nuclear norm of a symmetric matrix as the sum of absolute eigenvalues.
pub fn sym_nuclear(w: &DMatrix<f64>) -> f64 {
    w.clone().symmetric_eigen().eigenvalues.iter().map(|x| x.abs()).sum()
}

/// Dense objective `s ||Y - X W X^T||^2 + lambda ||W||_*`.
pub fn dense_objective(y: &DMatrix<f64>, x: &DMatrix<f64>, w: &DMatrix<f64>, lambda: f64, s: f64) -> f64 {
    let r = y - x * w * x.transpose();
    s * r.norm_squared() + lambda * sym_nuclear(w)
}

/// Eigenvalue soft-thresholding of a symmetric matrix.
fn sym_shrink(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let l = eig.eigenvalues[j];
        let shrunk = l.signum() * (l.abs() - tau).max(0.0);
        if shrunk != 0.0 {
            let v = eig.eigenvectors.column(j);
            out += (v * v.transpose()) * shrunk;
        }
    }
    out
}

/// Accelerated proximal gradient (FISTA with gradient restart) on the
/// symmetric nuclear-norm problem. Returns the minimizer estimate.
pub fn proximal_gradient_oracle(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    lambda: f64,
    s: f64,
    max_iters: usize,
) -> DMatrix<f64> {
    let k = x.ncols();
    let gram = x.transpose() * x;
    let xtyx = x.transpose() * y * x;
    let g_norm = gram.clone().symmetric_eigen().eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let lip = 2.0 * s * g_norm * g_norm;
    let step = 1.0 / lip;
    let grad = |w: &DMatrix<f64>| -> DMatrix<f64> { (&gram * w * &gram - &xtyx) * (2.0 * s) };
    let mut w = DMatrix::<f64>::zeros(k, k);
    let mut z = w.clone();
    let mut t = 1.0_f64;
    for _ in 0..max_iters {
        let next = sym_shrink(&(&z - grad(&z) * step), lambda * step);
        let diff = &next - &w;
        // Restart momentum when it points uphill.
        let restart = (&z - &next).dot(&diff) > 0.0;
        let t_next = if restart { 1.0 } else { (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0 };
        z = if restart { next.clone() } else { &next + diff.clone() * ((t - 1.0) / t_next) };
        t = t_next;
        let done = diff.norm() <= 1e-15 * (1.0 + next.norm());
        w = next;
        if done {
            break;
        }
    }
    w
}

/// Random labels with every community nonempty.
pub fn random_membership(n: usize, k: usize, rng: &mut ChaCha8Rng) -> MembershipMatrix {
    let mut labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    MembershipMatrix::new(labels, k).unwrap()
}

/// Random symmetric probability matrix.
pub fn random_probability(k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = rng.random_range(0.0..1.0);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    b
}

/// Random symmetric rank-`d` matrix with entries in [0, 1].
pub fn random_low_rank(k: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(k, k);
    for _ in 0..d {
        let u: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        for i in 0..k {
            for j in 0..k {
                b[(i, j)] += u[i] * u[j] / d as f64;
            }
        }
    }
    (&b + b.transpose()) * 0.5
}

/// Noisy averaged adjacency: mean of `layers` Bernoulli draws of `Z B Z^T`.
pub fn noisy_average(z: &MembershipMatrix, b: &DMatrix<f64>, layers: usize, rng: &mut ChaCha8Rng) -> AveragedAdjacency {
    let n = z.n();
    let mut y = DMatrix::zeros(n, n);
    for _ in 0..layers {
        for i in 0..n {
            for j in i..n {
                if rng.random::<f64>() < b[(z.labels()[i], z.labels()[j])] {
                    y[(i, j)] += 1.0;
                    if i != j {
                        y[(j, i)] += 1.0;
                    }
                }
            }
        }
    }
    y /= layers as f64;
    AveragedAdjacency::from_matrix(y, layers).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
