//! Scalar constitutive functions of the density.
//!
//! The viscosity law is `h(rho) = rho + eps rho^{7/8} + eps rho^gamma`, with
//! second viscosity `g = rho h' - h` and potential `phi` satisfying
//! `rho phi' = h'`. The cold pressure `p` and the entropy density `f` are sums
//! of six power terms `A rho^s`, regenerated from `p' = mu ptilde h'/rho` and
//! `p = rho f' - f` with no constant or `C rho` homogeneous part. Every term
//! carrying the factor `lambda(eps) = exp(-1/eps^4)` is evaluated in log space
//! so that `rho^{1/eps^2}` never overflows before the damping factor is applied.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::params::{derived_mu, epsilon_f, log_lambda_eps, ModelParams};

/// One term `coef * lambda * rho^exponent` with `lambda` kept in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerTerm {
    /// Amplitude without the `lambda(eps)` factor.
    pub coef: f64,
    pub exponent: f64,
}

impl PowerTerm {
    #[inline]
    fn eval(&self, log_lambda: f64, ln_rho: f64) -> f64 {
        if self.coef == 0.0 {
            return 0.0;
        }
        self.coef * (log_lambda + self.exponent * ln_rho).exp()
    }

    #[inline]
    fn eval_deriv(&self, log_lambda: f64, ln_rho: f64) -> f64 {
        if self.coef == 0.0 {
            return 0.0;
        }
        self.coef * self.exponent * (log_lambda + (self.exponent - 1.0) * ln_rho).exp()
    }

    #[inline]
    fn eval_second(&self, log_lambda: f64, ln_rho: f64) -> f64 {
        if self.coef == 0.0 {
            return 0.0;
        }
        let s = self.exponent;
        self.coef * s * (s - 1.0) * (log_lambda + (s - 2.0) * ln_rho).exp()
    }
}

/// Canonical cold-pressure terms for `(eps, gamma, mu)`, amplitudes without `lambda`.
pub fn canonical_p_terms(eps: f64, gamma: f64, mu: f64) -> [PowerTerm; 6] {
    let e2 = eps * eps;
    let e3 = e2 * eps;
    let a = 1.0 / e2;
    let t = |coef: f64, exponent: f64| PowerTerm { coef, exponent };
    [
        t(mu * e2, a),
        t(7.0 * mu * e3 / (8.0 - e2), a - 0.125),
        t(mu * e3 * gamma / (1.0 + e2 * (gamma - 1.0)), a + gamma - 1.0),
        t(-mu * e2, -a),
        t(-7.0 * mu * e3 / (8.0 + e2), -a - 0.125),
        t(-mu * e3 * gamma / (1.0 - e2 * (gamma - 1.0)), -a + gamma - 1.0),
    ]
}

/// Canonical entropy-density terms: each `p` term `A rho^s` maps to `A/(s-1) rho^s`.
pub fn canonical_f_terms(eps: f64, gamma: f64, mu: f64) -> [PowerTerm; 6] {
    canonical_p_terms(eps, gamma, mu).map(|t| PowerTerm {
        coef: t.coef / (t.exponent - 1.0),
        exponent: t.exponent,
    })
}

/// Pointwise values returned by [`CoefficientSet::local`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalCoeffs {
    pub h: f64,
    pub h_prime: f64,
    pub g: f64,
    pub ptilde: f64,
    pub p: f64,
}

/// All constitutive functions for one parameter set.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientSet {
    pub eps: f64,
    pub gamma: f64,
    pub mu: f64,
    pub log_lambda: f64,
    pub p_terms: [PowerTerm; 6],
    pub f_terms: [PowerTerm; 6],
}

impl CoefficientSet {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let (eps, gamma) = (params.eps, params.gamma);
        if !(gamma.is_finite() && gamma > 1.0) {
            return domain(format!("need gamma > 1, got {gamma}"));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return domain(format!("need eps >= 0, got {eps}"));
        }
        let mu = derived_mu(params.nu, params.kappa)?;
        let zero = [PowerTerm {
            coef: 0.0,
            exponent: 0.0,
        }; 6];
        let (p_terms, f_terms, log_lambda) = if eps == 0.0 {
            (zero, zero, f64::NEG_INFINITY)
        } else {
            (
                canonical_p_terms(eps, gamma, mu),
                canonical_f_terms(eps, gamma, mu),
                log_lambda_eps(eps),
            )
        };
        Ok(Self {
            eps,
            gamma,
            mu,
            log_lambda,
            p_terms,
            f_terms,
        })
    }

    /// True when the `lambda`-weighted terms are switched off (`eps = 0`).
    pub fn unregularized(&self) -> bool {
        self.eps == 0.0
    }

    /// `(rho^{7/8}, rho^gamma)`, shared by every viscosity-law evaluation.
    #[inline]
    fn powers(&self, rho: f64) -> (f64, f64) {
        (rho.powf(0.875), rho.powf(self.gamma))
    }

    #[inline]
    pub fn h(&self, rho: f64) -> f64 {
        if self.eps == 0.0 {
            return rho;
        }
        let (r78, rg) = self.powers(rho);
        rho + self.eps * r78 + self.eps * rg
    }

    #[inline]
    fn h_prime_from(&self, rho: f64, r78: f64, rg: f64) -> f64 {
        if rho == 0.0 {
            return f64::INFINITY;
        }
        1.0 + 0.875 * self.eps * r78 / rho + self.eps * self.gamma * rg / rho
    }

    #[inline]
    fn g_from(&self, r78: f64, rg: f64) -> f64 {
        -0.125 * self.eps * r78 + self.eps * (self.gamma - 1.0) * rg
    }

    #[inline]
    pub fn h_prime(&self, rho: f64) -> f64 {
        if self.eps == 0.0 {
            return 1.0;
        }
        let (r78, rg) = self.powers(rho);
        self.h_prime_from(rho, r78, rg)
    }

    /// `h''`; at `rho = 0` the `rho^{-9/8}` term dominates and the value is `-inf`.
    #[inline]
    pub fn h_second(&self, rho: f64) -> f64 {
        if self.eps == 0.0 {
            return 0.0;
        }
        if rho == 0.0 {
            return f64::NEG_INFINITY;
        }
        let (r78, rg) = self.powers(rho);
        let g = self.gamma;
        let r2 = rho * rho;
        -0.109375 * self.eps * r78 / r2 + self.eps * g * (g - 1.0) * rg / r2
    }

    /// `g = rho h' - h`, in the cancellation-free form `-(eps/8) rho^{7/8} + eps (gamma-1) rho^gamma`.
    #[inline]
    pub fn g(&self, rho: f64) -> f64 {
        if self.eps == 0.0 {
            return 0.0;
        }
        let (r78, rg) = self.powers(rho);
        self.g_from(r78, rg)
    }

    /// All pointwise coefficients used by the right-hand sides, sharing one
    /// logarithm and one evaluation of each power; bit-identical to the
    /// separate calls.
    #[inline]
    pub fn local(&self, rho: f64) -> LocalCoeffs {
        if self.eps == 0.0 {
            return LocalCoeffs {
                h: rho,
                h_prime: 1.0,
                g: 0.0,
                ptilde: 0.0,
                p: 0.0,
            };
        }
        let (r78, rg) = self.powers(rho);
        let (ep, em) = self.damping_pair(rho.ln());
        LocalCoeffs {
            h: rho + self.eps * r78 + self.eps * rg,
            h_prime: self.h_prime_from(rho, r78, rg),
            g: self.g_from(r78, rg),
            ptilde: ep + em,
            p: self.p_from(rho, ep, em, r78, rg),
        }
    }

    #[inline]
    pub fn phi(&self, rho: f64) -> f64 {
        if self.eps == 0.0 {
            return rho.ln();
        }
        let (r78, rg) = self.powers(rho);
        let g = self.gamma;
        rho.ln() - 7.0 * self.eps * r78 / rho + self.eps * g / (g - 1.0) * rg / rho
    }

    #[inline]
    pub fn phi_prime(&self, rho: f64) -> f64 {
        self.h_prime(rho) / rho
    }

    /// `(lambda rho^{1/eps^2}, lambda rho^{-1/eps^2})` from `ln rho`.
    #[inline]
    fn damping_pair(&self, ln_rho: f64) -> (f64, f64) {
        let a = 1.0 / (self.eps * self.eps);
        (
            (self.log_lambda + a * ln_rho).exp(),
            (self.log_lambda - a * ln_rho).exp(),
        )
    }

    /// Damping coefficient `lambda (rho^{1/eps^2} + rho^{-1/eps^2})`.
    #[inline]
    pub fn ptilde(&self, rho: f64) -> f64 {
        if self.eps == 0.0 {
            return 0.0;
        }
        let (ep, em) = self.damping_pair(rho.ln());
        ep + em
    }

    /// The six cold-pressure terms grouped by their damping factor:
    /// `rho^{+-1/eps^2} (A + B rho^{-1/8} + C rho^{gamma-1})`.
    #[inline]
    fn p_from(&self, rho: f64, ep: f64, em: f64, r78: f64, rg: f64) -> f64 {
        let t = &self.p_terms;
        let (s, q) = (r78 / rho, rg / rho);
        ep * (t[0].coef + t[1].coef * s + t[2].coef * q)
            + em * (t[3].coef + t[4].coef * s + t[5].coef * q)
    }

    #[inline]
    pub fn p(&self, rho: f64) -> f64 {
        if self.eps == 0.0 {
            return 0.0;
        }
        let (r78, rg) = self.powers(rho);
        let (ep, em) = self.damping_pair(rho.ln());
        self.p_from(rho, ep, em, r78, rg)
    }

    #[inline]
    pub fn p_prime(&self, rho: f64) -> f64 {
        if self.eps == 0.0 {
            return 0.0;
        }
        let lr = rho.ln();
        self.p_terms
            .iter()
            .map(|t| t.eval_deriv(self.log_lambda, lr))
            .sum()
    }

    #[inline]
    pub fn f(&self, rho: f64) -> f64 {
        if self.eps == 0.0 {
            return 0.0;
        }
        let lr = rho.ln();
        self.f_terms.iter().map(|t| t.eval(self.log_lambda, lr)).sum()
    }

    #[inline]
    pub fn f_prime(&self, rho: f64) -> f64 {
        if self.eps == 0.0 {
            return 0.0;
        }
        let lr = rho.ln();
        self.f_terms
            .iter()
            .map(|t| t.eval_deriv(self.log_lambda, lr))
            .sum()
    }

    #[inline]
    pub fn f_second(&self, rho: f64) -> f64 {
        if self.eps == 0.0 {
            return 0.0;
        }
        let lr = rho.ln();
        self.f_terms
            .iter()
            .map(|t| t.eval_second(self.log_lambda, lr))
            .sum()
    }

    /// Per-term values of `f`, used by the positivity checks.
    pub fn f_term_values(&self, rho: f64) -> [f64; 6] {
        let lr = rho.ln();
        self.f_terms.map(|t| t.eval(self.log_lambda, lr))
    }

    /// Per-term values of `f''`.
    pub fn f_second_term_values(&self, rho: f64) -> [f64; 6] {
        let lr = rho.ln();
        self.f_terms.map(|t| t.eval_second(self.log_lambda, lr))
    }

    fn check_nonneg(rho: f64) -> Result<()> {
        if rho.is_finite() && rho >= 0.0 {
            Ok(())
        } else {
            domain(format!("density must be >= 0, got {rho}"))
        }
    }

    fn check_positive(rho: f64) -> Result<()> {
        if rho.is_finite() && rho > 0.0 {
            Ok(())
        } else {
            domain(format!("density must be > 0, got {rho}"))
        }
    }

    fn check_regularized(&self) -> Result<()> {
        let ef = epsilon_f(self.gamma)?;
        if self.eps > 0.0 && self.eps < ef {
            Ok(())
        } else {
            domain(format!("need 0 < eps < eps_f = {ef}, got eps = {}", self.eps))
        }
    }

    pub fn eval_h(&self, rho: f64) -> Result<f64> {
        Self::check_nonneg(rho)?;
        Ok(self.h(rho))
    }

    pub fn eval_h_prime(&self, rho: f64) -> Result<f64> {
        Self::check_nonneg(rho)?;
        Ok(self.h_prime(rho))
    }

    pub fn eval_h_second(&self, rho: f64) -> Result<f64> {
        Self::check_nonneg(rho)?;
        Ok(self.h_second(rho))
    }

    pub fn eval_g(&self, rho: f64) -> Result<f64> {
        Self::check_nonneg(rho)?;
        Ok(self.g(rho))
    }

    pub fn eval_phi(&self, rho: f64) -> Result<f64> {
        Self::check_positive(rho)?;
        Ok(self.phi(rho))
    }

    pub fn eval_ptilde(&self, rho: f64) -> Result<f64> {
        Self::check_positive(rho)?;
        Ok(self.ptilde(rho))
    }

    pub fn eval_p(&self, rho: f64) -> Result<f64> {
        Self::check_positive(rho)?;
        self.check_regularized()?;
        Ok(self.p(rho))
    }

    pub fn eval_f(&self, rho: f64) -> Result<f64> {
        Self::check_positive(rho)?;
        self.check_regularized()?;
        Ok(self.f(rho))
    }

    pub fn eval_f_prime(&self, rho: f64) -> Result<f64> {
        Self::check_positive(rho)?;
        self.check_regularized()?;
        Ok(self.f_prime(rho))
    }

    pub fn eval_f_second(&self, rho: f64) -> Result<f64> {
        Self::check_positive(rho)?;
        self.check_regularized()?;
        Ok(self.f_second(rho))
    }
}
