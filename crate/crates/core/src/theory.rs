//! Computable forms of the theoretical quantities: the Frobenius lower bound
//! under balanced communities, the benchmark tuning value, and the error bound
//! right-hand side (evaluated with its hidden constant set to 1).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::model::MembershipMatrix;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Label attached to every bound evaluated with suppressed constants.
pub const UP_TO_CONSTANTS: &str = "up to constants";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryContext {
    pub n: usize,
    pub k: usize,
    pub layers: usize,
    pub rho: f64,
    pub d: usize,
    pub c1: f64,
    pub c2: f64,
    /// Number of misclustered nodes.
    pub misclustered: usize,
    pub b_op: f64,
    pub b_max: f64,
    /// Sample-size constants; conditions using them are reported as
    /// unchecked when absent.
    #[serde(default)]
    pub c_prime: Option<f64>,
    #[serde(default)]
    pub c_double_prime: Option<f64>,
}

impl TheoryContext {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NetError::InvalidParameter(m));
        if self.n < 2 {
            return bad(format!("n = {} leaves log n degenerate", self.n));
        }
        if self.k == 0 || self.layers == 0 {
            return bad("K and L must be positive".into());
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad(format!("sparsity factor {} outside (0, 1]", self.rho));
        }
        if !(self.c1 >= 1.0 && self.c2 >= 1.0) {
            return bad(format!("balance constants must be >= 1 (c1 = {}, c2 = {})", self.c1, self.c2));
        }
        if self.misclustered > self.n {
            return bad(format!("{} misclustered nodes exceed n = {}", self.misclustered, self.n));
        }
        if !(self.b_op.is_finite() && self.b_op >= 0.0 && self.b_max.is_finite() && self.b_max >= 0.0) {
            return bad("norms of B must be finite and nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `(1/n)||Z B Z^T||_F^2 >= n/(c2 K)^2 ||B||_F^2` after verifying that
/// every community size lies in `[n/(c2 K), c2 n/K]`.
pub fn lower_bound_check(z_hat: &MembershipMatrix, b: &DMatrix<f64>, c2: f64) -> Result<LowerBoundCheck> {
    let (n, k) = (z_hat.n(), z_hat.k());
    if b.nrows() != k || b.ncols() != k {
        return Err(NetError::DimensionMismatch(format!(
            "B is {}x{}, membership has K = {k}",
            b.nrows(),
            b.ncols()
        )));
    }
    if !(c2 >= 1.0) {
        return Err(NetError::InvalidParameter(format!("c2 = {c2} must be >= 1")));
    }
    let (nf, kf) = (n as f64, k as f64);
    let (lo, hi) = (nf / (c2 * kf), c2 * nf / kf);
    for (g, &s) in z_hat.sizes().iter().enumerate() {
        let s = s as f64;
        // Relative slack so that exact boundary cases are not rejected by rounding.
        if s < lo * (1.0 - 1e-12) || s > hi * (1.0 + 1e-12) {
            return Err(NetError::InvalidData(format!(
                "community {g} has {s} nodes, outside [{lo}, {hi}] for c2 = {c2}"
            )));
        }
    }
    let sizes = z_hat.sizes();
    let mut lhs = 0.0;
    for a in 0..k {
        for c in 0..k {
            lhs += (sizes[a] * sizes[c]) as f64 * b[(a, c)] * b[(a, c)];
        }
    }
    lhs /= nf;
    let rhs = nf / (c2 * kf).powi(2) * b.norm_squared();
    Ok(LowerBoundCheck { lhs, rhs, holds: lhs >= rhs - 1e-12 })
}

struct Parts {
    root_c1k: f64,
    frac: f64,
    root_frac: f64,
    ln_n: f64,
}

fn parts(ctx: &TheoryContext) -> Result<Parts> {
    ctx.validate()?;
    let n = ctx.n as f64;
    let m = ctx.misclustered as f64;
    Ok(Parts {
        root_c1k: (ctx.c1 / ctx.k as f64).sqrt(),
        frac: m / n,
        root_frac: (m / n).sqrt(),
        ln_n: n.ln(),
    })
}

/// Benchmark tuning value. With `l1_variant` the concentration factor
/// `12 sqrt(2) sqrt(n rho log n / L)` becomes `sqrt(n rho)` (constant 1).
pub fn lambda_val(ctx: &TheoryContext, l1_variant: bool) -> Result<f64> {
    let p = parts(ctx)?;
    let (n, k, l, rho) = (ctx.n as f64, ctx.k as f64, ctx.layers as f64, ctx.rho);
    let m = ctx.misclustered as f64;
    let first = 16.0 * SQRT2 * ctx.c1 / k * (rho / l).sqrt() * (k.sqrt() + p.ln_n.sqrt());
    let mix = (p.root_c1k + SQRT2 * p.root_frac).powi(2);
    let second = mix
        * (2.0 * SQRT2 * rho * (ctx.c1 * n / k).sqrt() * m.sqrt() * ctx.b_op
            + rho * m * ctx.b_max);
    let conc = if l1_variant {
        (n * rho).sqrt()
    } else {
        12.0 * SQRT2 * (n * rho * p.ln_n / l).sqrt()
    };
    let third = (2.0 * p.frac + 2.0 * SQRT2 * p.root_c1k * p.root_frac) * conc;
    Ok(first + second + third)
}

/// Right-hand side of the nuclear-norm error bound with its hidden constant
/// set to 1.
pub fn error_bound(ctx: &TheoryContext, l1_variant: bool) -> Result<f64> {
    let p = parts(ctx)?;
    if ctx.d == 0 {
        return Err(NetError::InvalidParameter("rank d must be >= 1".into()));
    }
    let (n, k, l, rho) = (ctx.n as f64, ctx.k as f64, ctx.layers as f64, ctx.rho);
    let first =
        16.0 * SQRT2 * ctx.c1 / k * (1.0 / (l * n * n * rho)).sqrt() * (k.sqrt() + p.ln_n.sqrt());
    let mix = (p.root_c1k + SQRT2 * p.root_frac).powi(2);
    let second =
        mix * (2.0 * SQRT2 * p.root_c1k * ctx.b_op * p.root_frac + ctx.b_max * p.frac);
    let conc = if l1_variant {
        1.0 / (n * rho).sqrt()
    } else {
        12.0 * SQRT2 * (p.ln_n / (l * n * rho)).sqrt()
    };
    let third = (2.0 * SQRT2 * p.root_c1k * p.root_frac + 2.0 * p.frac) * conc;
    Ok(k * k * ctx.d as f64 * (first + second + third))
}

/// `(3 Lambda_val, 3 C Lambda_val)`.
pub fn lambda_window(ctx: &TheoryContext, c: f64, l1_variant: bool) -> Result<(f64, f64)> {
    if !(c >= 1.0) {
        return Err(NetError::InvalidParameter(format!("window constant {c} must be >= 1")));
    }
    let v = lambda_val(ctx, l1_variant)?;
    Ok((3.0 * v, 3.0 * c * v))
}

/// Outcome of a sample-size condition whose constant may be unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionStatus {
    Holds,
    Fails,
    Unchecked,
}

impl ConditionStatus {
    fn from(constant: Option<f64>, test: impl FnOnce(f64) -> bool) -> Self {
        match constant {
            None => ConditionStatus::Unchecked,
            Some(c) if test(c) => ConditionStatus::Holds,
            Some(_) => ConditionStatus::Fails,
        }
    }
}

/// Summary suitable for embedding in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub context: TheoryContext,
    pub lambda_val: f64,
    pub lambda_window: (f64, f64),
    pub window_constant: f64,
    pub bound: f64,
    pub bound_label: String,
    pub l1_variant: bool,
    /// `n sqrt(L rho) >= C' K (sqrt K + sqrt log n)`.
    pub signal_condition: ConditionStatus,
    /// `L n rho >= C'' log n`.
    pub density_condition: ConditionStatus,
}

pub fn theory_report(ctx: &TheoryContext, window_constant: f64) -> Result<TheoryReport> {
    let l1_variant = ctx.layers == 1;
    let (n, k, l) = (ctx.n as f64, ctx.k as f64, ctx.layers as f64);
    let ln_n = n.ln();
    let signal = n * (l * ctx.rho).sqrt();
    let signal_condition = ConditionStatus::from(ctx.c_prime, |c| {
        signal >= c * k * (k.sqrt() + ln_n.sqrt())
    });
    let density_condition =
        ConditionStatus::from(ctx.c_double_prime, |c| l * n * ctx.rho >= c * ln_n);
    Ok(TheoryReport {
        context: ctx.clone(),
        lambda_val: lambda_val(ctx, l1_variant)?,
        lambda_window: lambda_window(ctx, window_constant, l1_variant)?,
        window_constant,
        bound: if ctx.d == 0 { f64::NAN } else { error_bound(ctx, l1_variant)? },
        bound_label: UP_TO_CONSTANTS.to_string(),
        l1_variant,
        signal_condition,
        density_condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> TheoryContext {
        TheoryContext {
            n: 100,
            k: 2,
            layers: 10,
            rho: 0.5,
            d: 1,
            c1: 1.0,
            c2: 1.0,
            misclustered: 5,
            b_op: 1.0,
            b_max: 1.0,
            c_prime: None,
            c_double_prime: None,
        }
    }

    #[test]
    fn spot_value_against_second_transcription() {
        // n=100, K=2, L=10, rho=0.5, c1=1, m=5, norms 1.
        let s2 = 2f64.sqrt();
        let ln = 100f64.ln();
        let a = 16.0 * s2 * 0.5 * (0.05f64).sqrt() * (s2 + ln.sqrt());
        let q = (0.5f64.sqrt() + s2 * 0.05f64.sqrt()).powi(2);
        let b = q * (2.0 * s2 * 0.5 * 50f64.sqrt() * 5f64.sqrt() + 2.5);
        let c = (0.1 + 2.0 * s2 * 0.5f64.sqrt() * 0.05f64.sqrt())
            * 12.0
            * s2
            * (50.0 * ln / 10.0).sqrt();
        let v = lambda_val(&ctx(), false).unwrap();
        assert!(((v - (a + b + c)) / v).abs() < 1e-12);
    }

    #[test]
    fn zero_misclustering_reduces_to_first_term() {
        let mut c = ctx();
        c.misclustered = 0;
        let expect = 16.0 * SQRT2 * 0.5 * (0.05f64).sqrt() * (SQRT2 + 100f64.ln().sqrt());
        assert!((lambda_val(&c, false).unwrap() - expect).abs() < 1e-12 * expect);
        c.rho = 1e-12;
        assert!(lambda_val(&c, false).unwrap() < 1e-4);
    }

    #[test]
    fn window_and_errors() {
        let (lo, hi) = lambda_window(&ctx(), 1.0, false).unwrap();
        assert_eq!(lo, hi);
        let (lo2, hi2) = lambda_window(&ctx(), 4.0, false).unwrap();
        assert_eq!(lo2, lo);
        assert!((hi2 - 4.0 * hi).abs() < 1e-12 * hi2);
        assert!(lambda_window(&ctx(), 0.5, false).is_err());
        let mut c = ctx();
        c.n = 1;
        assert!(lambda_val(&c, false).is_err());
        let mut c = ctx();
        c.d = 0;
        assert!(error_bound(&c, false).is_err());
        let mut c = ctx();
        c.c1 = 0.9;
        assert!(lambda_val(&c, false).is_err());
    }

    #[test]
    fn lower_bound_identity_equality_and_zero() {
        let z = MembershipMatrix::from_sizes(&[1, 1, 1]).unwrap();
        let b = DMatrix::from_fn(3, 3, |i, j| 0.1 * (i + j + 1) as f64);
        let r = lower_bound_check(&z, &b, 1.0).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-14 && r.holds);
        let r0 = lower_bound_check(&z, &DMatrix::zeros(3, 3), 1.0).unwrap();
        assert_eq!((r0.lhs, r0.rhs), (0.0, 0.0));
    }

    #[test]
    fn lower_bound_rejects_unbalanced() {
        let z = MembershipMatrix::from_sizes(&[1, 9]).unwrap();
        assert!(lower_bound_check(&z, &DMatrix::identity(2, 2), 1.5).is_err());
        assert!(lower_bound_check(&z, &DMatrix::identity(2, 2), 5.0).is_ok());
    }

    #[test]
    fn report_marks_missing_constants() {
        let mut c = ctx();
        let r = theory_report(&c, 2.0).unwrap();
        assert_eq!(r.signal_condition, ConditionStatus::Unchecked);
        assert_eq!(r.bound_label, UP_TO_CONSTANTS);
        c.c_double_prime = Some(1.0);
        c.c_prime = Some(1e9);
        let r = theory_report(&c, 2.0).unwrap();
        assert_eq!(r.density_condition, ConditionStatus::Holds);
        assert_eq!(r.signal_condition, ConditionStatus::Fails);
    }
}
