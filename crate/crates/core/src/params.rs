//! Model parameters, derived constants and admissibility checks.
//!
//! The regularized system is parameterized by the viscosity `nu`, the
//! dispersive coefficient `kappa`, the adiabatic exponent `gamma` and the
//! regularization strength `eps`. Everything downstream (coefficients,
//! effective-velocity transform, entropy ledgers) is keyed off the constant
//! `mu = nu - sqrt(nu^2 - kappa^2)`, the smaller root of `c^2 - 2 nu c + kappa^2`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Physical and regularization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub nu: f64,
    pub kappa: f64,
    pub gamma: f64,
    /// Regularization strength; `0` selects the unregularized formal system.
    pub eps: f64,
    pub dim: usize,
}

impl ModelParams {
    pub fn new(nu: f64, kappa: f64, gamma: f64, eps: f64, dim: usize) -> Self {
        Self {
            nu,
            kappa,
            gamma,
            eps,
            dim,
        }
    }

    pub fn with_eps(self, eps: f64) -> Self {
        Self { eps, ..self }
    }

    pub fn with_dim(self, dim: usize) -> Self {
        Self { dim, ..self }
    }

    pub fn mu(&self) -> Result<f64> {
        derived_mu(self.nu, self.kappa)
    }

    pub fn derived(&self) -> Result<DerivedConstants> {
        DerivedConstants::new(self)
    }
}

/// `nu - sqrt(nu^2 - kappa^2)`, evaluated as `kappa^2 / (nu + sqrt(nu^2 - kappa^2))`
/// to avoid cancellation when `kappa << nu`.
pub fn derived_mu(nu: f64, kappa: f64) -> Result<f64> {
    if !(nu.is_finite() && kappa.is_finite()) || kappa <= 0.0 || nu <= 0.0 {
        return domain(format!("need nu > 0 and kappa > 0, got nu={nu}, kappa={kappa}"));
    }
    if kappa >= nu {
        return domain(format!("need kappa < nu, got nu={nu}, kappa={kappa}"));
    }
    let root = (nu * nu - kappa * kappa).sqrt();
    Ok(kappa * kappa / (nu + root))
}

/// Damping amplitude `exp(-1/eps^4)`; zero at `eps = 0`.
pub fn lambda_eps(eps: f64) -> f64 {
    if eps == 0.0 {
        0.0
    } else {
        log_lambda_eps(eps).exp()
    }
}

/// `ln(lambda(eps)) = -1/eps^4`. Kept separate so power terms can be formed in log space.
pub fn log_lambda_eps(eps: f64) -> f64 {
    -1.0 / eps.powi(4)
}

/// Largest `eps` such that every term of the entropy density `f_eps` keeps a
/// positive amplitude (its second derivative is then automatically positive,
/// since `f'' = p'/rho > 0`).
///
/// Each term `B rho^s` of `f_eps` comes from a cold-pressure term `A rho^s`
/// through `B = A/(s-1)`; the sign constraints reduce to
/// `8 - 9 eps^2 > 0`, `1 - eps^2 > 0`, `1 - eps^2 (gamma-1) > 0` and, for
/// `gamma < 2`, `1 + eps^2 (gamma-2) > 0`.
pub fn epsilon_f(gamma: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 1.0) {
        return domain(format!("epsilon_f needs gamma > 1, got {gamma}"));
    }
    let mut bound = (8.0_f64 / 9.0).sqrt().min(1.0);
    bound = bound.min(1.0 / (gamma - 1.0).sqrt());
    if gamma < 2.0 {
        bound = bound.min(1.0 / (2.0 - gamma).sqrt());
    }
    Ok(bound)
}

/// Scalars derived from a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub nu: f64,
    pub kappa: f64,
    pub mu: f64,
    /// The larger root `nu + sqrt(nu^2 - kappa^2)`.
    pub mu_plus: f64,
    pub lambda_eps: f64,
    pub eps_f: f64,
}

impl DerivedConstants {
    pub fn new(p: &ModelParams) -> Result<Self> {
        let mu = derived_mu(p.nu, p.kappa)?;
        let mu_plus = p.nu + (p.nu * p.nu - p.kappa * p.kappa).sqrt();
        Ok(Self {
            nu: p.nu,
            kappa: p.kappa,
            mu,
            mu_plus,
            lambda_eps: lambda_eps(p.eps),
            eps_f: epsilon_f(p.gamma)?,
        })
    }

    /// Residual capillarity `kappa^2 - 2 nu c + c^2`, in factored form so that
    /// it vanishes exactly at `c = mu`.
    pub fn tilde_kappa_sq(&self, c: f64) -> f64 {
        (c - self.mu) * (c - self.mu_plus)
    }

    /// Residual cold-pressure fraction `(mu - c)/mu`.
    pub fn tilde_lambda(&self, c: f64) -> f64 {
        (self.mu - c) / self.mu
    }
}

/// One hypothesis and whether it holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub params: ModelParams,
    pub checks: Vec<HypothesisCheck>,
    pub derived: Option<DerivedConstants>,
    pub pass: bool,
}

impl AdmissibilityReport {
    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }
}

/// Evaluate every parameter hypothesis for the requested dimension.
/// Failures are reported, never raised.
pub fn check_admissible(p: &ModelParams) -> AdmissibilityReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, holds: bool, detail: String| {
        checks.push(HypothesisCheck {
            name: name.to_string(),
            holds,
            detail,
        })
    };

    push(
        "dim ∈ {1,2,3}",
        (1..=3).contains(&p.dim),
        format!("dim = {}", p.dim),
    );
    push(
        "0<κ<ν",
        p.kappa > 0.0 && p.kappa < p.nu,
        format!("kappa = {}, nu = {}", p.kappa, p.nu),
    );
    push("γ>1", p.gamma > 1.0, format!("gamma = {}", p.gamma));
    push("ε≥0", p.eps >= 0.0, format!("eps = {}", p.eps));
    match epsilon_f(p.gamma) {
        Ok(ef) => push(
            &format!("ε<ε_f(γ)={ef:.6}"),
            p.eps == 0.0 || p.eps < ef,
            format!("eps = {}, eps_f = {ef}", p.eps),
        ),
        Err(_) => push("ε<ε_f(γ)", false, "eps_f undefined for gamma <= 1".into()),
    }
    if p.dim == 3 {
        let (k2, n2) = (p.kappa * p.kappa, p.nu * p.nu);
        push(
            "κ²<ν²<(9/8)κ²",
            k2 < n2 && n2 < 9.0 / 8.0 * k2,
            format!("kappa^2 = {k2}, nu^2 = {n2}, 9/8 kappa^2 = {}", 9.0 / 8.0 * k2),
        );
        push("γ<3", p.gamma < 3.0, format!("gamma = {}", p.gamma));
    }

    let derived = DerivedConstants::new(p).ok();
    let pass = checks.iter().all(|c| c.holds);
    AdmissibilityReport {
        params: *p,
        checks,
        derived,
        pass,
    }
}
