//! ADMM for the weighted-ℓ1 self-expression problem
//!
//! ```text
//! min  Σ_ij W_ij |C_ij| + λ‖E‖    s.t.  X = XA + E,  A = C − diag(C)
//! ```
//!
//! where `W = w1·Ψ + α·Θ`. With `Θ = 0`, `Ψ = 1` and `w1 = 1` this is plain
//! sparse subspace clustering.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{shrink, CoefficientMatrix, DataMatrix, SideInfoMatrix, StructureMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Sparse corruptions: `λ‖E‖₁`.
    L1,
    /// Dense noise: `λ·½‖E‖_F²`.
    Frobenius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmParams {
    pub lambda: f64,
    pub alpha_eff: f64,
    pub w1: f64,
    pub rho: f64,
    pub mu0: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub noise_model: NoiseModel,
}

impl AdmmParams {
    /// Defaults: `w1 = 1`, `α = 0`, `ρ = 1.1`, `ε = 1e−6`, 200 iterations, ℓ1 noise.
    pub fn new(lambda: f64, mu0: f64) -> Self {
        Self {
            lambda,
            alpha_eff: 0.0,
            w1: 1.0,
            rho: 1.1,
            mu0,
            tol: 1e-6,
            max_iters: 200,
            noise_model: NoiseModel::L1,
        }
    }

    /// `λ = λ0 / scale` and `μ0 = 1 / scale` from [`compute_scale`].
    pub fn from_scale(lambda0: f64, scale: f64) -> Self {
        Self::new(lambda0 / scale, 1.0 / scale)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("ADMM parameter {what}")));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("λ must be positive");
        }
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return bad("ρ must exceed 1");
        }
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return bad("μ0 must be positive");
        }
        if !(self.tol > 0.0) {
            return bad("ε must be positive");
        }
        if !(self.w1 > 0.0 && self.w1.is_finite()) {
            return bad("w1 must be positive");
        }
        if !(self.alpha_eff >= 0.0 && self.alpha_eff.is_finite()) {
            return bad("α must be nonnegative");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        Ok(())
    }

    /// μ at iteration `t`: `μ0·ρ^t`.
    pub fn mu_at(&self, t: usize) -> f64 {
        self.mu0 * self.rho.powi(t as i32)
    }
}

/// Full iterate of the method; the primal part seeds warm starts.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub c: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub mu: f64,
    pub iter: usize,
}

impl AdmmState {
    fn cold(d: usize, n: usize, mu0: f64) -> Self {
        Self {
            c: DMatrix::zeros(n, n),
            a: DMatrix::zeros(n, n),
            e: DMatrix::zeros(d, n),
            y: DMatrix::zeros(d, n),
            z: DMatrix::zeros(n, n),
            mu: mu0,
            iter: 0,
        }
    }

    /// Keeps the primal iterates; multipliers start from zero and μ from μ0.
    fn warm(prev: &AdmmState, mu0: f64) -> Self {
        Self {
            c: prev.c.clone(),
            a: prev.a.clone(),
            e: prev.e.clone(),
            y: DMatrix::zeros(prev.y.nrows(), prev.y.ncols()),
            z: DMatrix::zeros(prev.z.nrows(), prev.z.ncols()),
            mu: mu0,
            iter: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdmmResult {
    pub c: CoefficientMatrix,
    pub e: DMatrix<f64>,
    pub iterations_used: usize,
    /// `max(‖X − XA − E‖∞, ‖A − C‖∞)` after the last iteration.
    pub final_residual: f64,
    pub converged: bool,
    pub state: AdmmState,
}

/// `min_j max_{i≠j} x_iᵀx_j`, the denominator of both λ and μ0.
pub fn compute_scale(x: &DataMatrix) -> Result<f64> {
    let v = x.values();
    let n = x.num_points();
    if n < 2 {
        return Err(Error::InvalidInput("scale needs at least two points".into()));
    }
    let gram = v.transpose() * v;
    let scale = (0..n)
        .map(|j| {
            (0..n)
                .filter(|&i| i != j)
                .map(|i| gram[(i, j)])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    if !(scale > 0.0) {
        return Err(Error::DegenerateScale(scale));
    }
    Ok(scale)
}

/// Cached inverse of `XᵀX + I`, computed once through a Cholesky factorization.
#[derive(Debug, Clone)]
pub struct GramFactor {
    inverse: DMatrix<f64>,
    inverse_xt: DMatrix<f64>,
    identity_minus_inverse: DMatrix<f64>,
}

impl GramFactor {
    pub fn new(x: &DataMatrix) -> Result<Self> {
        let v = x.values();
        let n = x.num_points();
        let gram = v.transpose() * v + DMatrix::identity(n, n);
        let chol = gram.cholesky().ok_or_else(|| {
            Error::InvalidInput("XᵀX + I is not positive definite (non-finite data?)".into())
        })?;
        let inverse = chol.inverse();
        let inverse_xt = &inverse * v.transpose();
        let identity_minus_inverse = DMatrix::identity(n, n) - &inverse;
        Ok(Self {
            inverse,
            inverse_xt,
            identity_minus_inverse,
        })
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }
}

/// Entrywise ℓ1 weights `w1·Ψ_ij + α·Θ_ij`.
pub fn threshold_weights(
    theta: &StructureMatrix,
    psi: &SideInfoMatrix,
    w1: f64,
    alpha_eff: f64,
) -> Result<DMatrix<f64>> {
    if theta.values().shape() != psi.values().shape() {
        return Err(Error::shape(
            format!("{:?}", psi.values().shape()),
            format!("{:?}", theta.values().shape()),
        ));
    }
    Ok(psi.values().zip_map(theta.values(), |p, t| w1 * p + alpha_eff * t))
}

/// C-step: entrywise shrinkage with threshold `W_ij / μ`, then the diagonal is zeroed.
pub fn update_c_weighted(u: &DMatrix<f64>, weights: &DMatrix<f64>, mu: f64) -> DMatrix<f64> {
    let inv_mu = 1.0 / mu;
    let mut c = u.zip_map(weights, |u, w| shrink(u, w * inv_mu));
    c.fill_diagonal(0.0);
    c
}

pub fn update_c(
    u: &DMatrix<f64>,
    theta: &StructureMatrix,
    psi: &SideInfoMatrix,
    mu: f64,
    w1: f64,
    alpha_eff: f64,
) -> Result<CoefficientMatrix> {
    if u.shape() != theta.values().shape() {
        return Err(Error::shape(
            format!("{:?}", theta.values().shape()),
            format!("{:?}", u.shape()),
        ));
    }
    let w = threshold_weights(theta, psi, w1, alpha_eff)?;
    CoefficientMatrix::new(update_c_weighted(u, &w, mu))
}

/// A-step: `A = (XᵀX + I)⁻¹[Xᵀ(X − E + Y/μ) + C − Z/μ]`, the stationary
/// point of the augmented Lagrangian in A for the ascent `Y += μ(X − XA − E)`.
///
/// Uses `(XᵀX + I)⁻¹XᵀX = I − (XᵀX + I)⁻¹`, so only two products are needed.
pub fn update_a(
    e: &DMatrix<f64>,
    c: &DMatrix<f64>,
    y: &DMatrix<f64>,
    z: &DMatrix<f64>,
    mu: f64,
    gram: &GramFactor,
) -> DMatrix<f64> {
    let inv_mu = 1.0 / mu;
    let coeff_part = c - z * inv_mu;
    let noise_part = e - y * inv_mu;
    let mut a = gram.identity_minus_inverse.clone();
    a.gemm(1.0, &gram.inverse, &coeff_part, 1.0);
    a.gemm(-1.0, &gram.inverse_xt, &noise_part, 1.0);
    a
}

/// E-step: prox of `(λ/μ)‖·‖` at V.
pub fn update_e(v: &DMatrix<f64>, lambda: f64, mu: f64, noise: NoiseModel) -> DMatrix<f64> {
    match noise {
        NoiseModel::L1 => {
            let tau = lambda / mu;
            v.map(|x| shrink(x, tau))
        }
        NoiseModel::Frobenius => v * (mu / (mu + lambda)),
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| {
        if v.is_nan() {
            f64::NAN
        } else {
            acc.max(v.abs())
        }
    })
}

/// Solver bound to one data matrix; the Gram factorization is shared by every solve.
#[derive(Debug, Clone)]
pub struct AdmmSolver<'a> {
    x: &'a DataMatrix,
    gram: GramFactor,
}

impl<'a> AdmmSolver<'a> {
    pub fn new(x: &'a DataMatrix) -> Result<Self> {
        Ok(Self {
            x,
            gram: GramFactor::new(x)?,
        })
    }

    pub fn gram(&self) -> &GramFactor {
        &self.gram
    }

    pub fn solve(
        &self,
        theta: &StructureMatrix,
        psi: &SideInfoMatrix,
        params: &AdmmParams,
        warm: Option<&AdmmState>,
    ) -> Result<AdmmResult> {
        let n = self.x.num_points();
        if theta.len() != n || psi.len() != n {
            return Err(Error::shape(
                format!("{n}×{n} Θ and Ψ"),
                format!("Θ {0}×{0}, Ψ {1}×{1}", theta.len(), psi.len()),
            ));
        }
        let weights = threshold_weights(theta, psi, params.w1, params.alpha_eff)?;
        self.solve_weighted(&weights, params, warm)
    }

    /// Runs ADMM with an explicit ℓ1 weight matrix (see [`threshold_weights`]).
    pub fn solve_weighted(
        &self,
        weights: &DMatrix<f64>,
        params: &AdmmParams,
        warm: Option<&AdmmState>,
    ) -> Result<AdmmResult> {
        params.validate()?;
        let x = self.x.values();
        let (d, n) = x.shape();
        if weights.shape() != (n, n) {
            return Err(Error::shape(format!("({n}, {n})"), format!("{:?}", weights.shape())));
        }
        let mut s = match warm {
            Some(prev) => {
                if prev.c.shape() != (n, n) || prev.e.shape() != (d, n) {
                    return Err(Error::shape(
                        format!("warm state for {d}×{n} data"),
                        format!("C {:?}, E {:?}", prev.c.shape(), prev.e.shape()),
                    ));
                }
                AdmmState::warm(prev, params.mu0)
            }
            None => AdmmState::cold(d, n, params.mu0),
        };

        let mut residual = f64::INFINITY;
        let mut converged = false;
        while s.iter < params.max_iters {
            let mu = params.mu_at(s.iter);
            s.mu = mu;
            let inv_mu = 1.0 / mu;

            let u = &s.a + &s.z * inv_mu;
            s.c = update_c_weighted(&u, weights, mu);
            s.a = update_a(&s.e, &s.c, &s.y, &s.z, mu, &self.gram);

            let xa = x * &s.a;
            let fit = x - &xa;
            let v = &fit + &s.y * inv_mu;
            s.e = update_e(&v, params.lambda, mu, params.noise_model);

            let r_data = fit - &s.e;
            let r_split = &s.a - &s.c;
            s.y += &r_data * mu;
            s.z += &r_split * mu;
            s.iter += 1;
            s.mu = params.mu_at(s.iter);

            residual = max_abs(&r_data).max(max_abs(&r_split));
            if !residual.is_finite() {
                return Err(Error::Divergence { iteration: s.iter });
            }
            if residual < params.tol {
                converged = true;
                break;
            }
        }

        Ok(AdmmResult {
            c: CoefficientMatrix::new(s.c.clone())?,
            e: s.e.clone(),
            iterations_used: s.iter,
            final_residual: residual,
            converged,
            state: s,
        })
    }
}

/// One-shot solve; builds the Gram factorization for this call only.
pub fn solve(
    x: &DataMatrix,
    theta: &StructureMatrix,
    psi: &SideInfoMatrix,
    params: &AdmmParams,
    warm: Option<&AdmmState>,
) -> Result<AdmmResult> {
    AdmmSolver::new(x)?.solve(theta, psi, params, warm)
}
