//! Shared fixtures for the integration tests: the smooth 1D configuration and
//! an exact manufactured-solution source built from truncated Taylor series.

#![allow(dead_code)]

use std::f64::consts::TAU;

use qns_cli::{parse_config, RunConfig};
use qns_core::coeffs::canonical_p_terms;
use qns_core::dynamics::Forcing;
use qns_core::fields::{PeriodicGrid, ScalarField, VectorField};
use qns_core::params::log_lambda_eps;
use qns_core::ModelParams;

pub const NU: f64 = 1.25;
pub const KAPPA: f64 = 0.75;
pub const GAMMA: f64 = 2.0;

/// 1D run with `rho = 2 + 0.5 cos 2 pi x`, `u = 0.1 sin 2 pi x`.
pub fn smooth_config(eps: f64, n: usize, t_end: f64, dt: f64, diag_cadence: usize) -> RunConfig {
    let text = format!(
        r#"
[params]
nu = {NU}
kappa = {KAPPA}
gamma = {GAMMA}
eps = {eps}

[grid]
dim = 1
n = {n}

[initial]
rho_mean = 2.0
rho_modes = [{{ k = [1], amp = 0.5 }}]
u_modes = [{{ k = [1], amp = 0.1, shape = "sin" }}]

[control]
t_end = {t_end:e}
dt_fixed = {dt:e}
diag_cadence = {diag_cadence}
"#
    );
    parse_config(&text).expect("fixture config is valid")
}

const N: usize = 6;

/// Taylor coefficients `f^(k)(x0) / k!` for `k < N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet(pub [f64; N]);

impl Jet {
    pub fn constant(c: f64) -> Self {
        let mut a = [0.0; N];
        a[0] = c;
        Jet(a)
    }

    /// `amp * cos(w x + phase)` expanded at `x`.
    pub fn cosine(amp: f64, w: f64, phase: f64, x: f64) -> Self {
        let mut a = [0.0; N];
        let mut fact = 1.0;
        for (k, c) in a.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            let shift = k as f64 * std::f64::consts::FRAC_PI_2;
            *c = amp * w.powi(k as i32) * (w * x + phase + shift).cos() / fact;
        }
        Jet(a)
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    pub fn deriv(&self) -> Self {
        let mut d = [0.0; N];
        for k in 0..N - 1 {
            d[k] = (k + 1) as f64 * self.0[k + 1];
        }
        Jet(d)
    }

    pub fn add(&self, o: &Jet) -> Self {
        Jet(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }

    pub fn sub(&self, o: &Jet) -> Self {
        Jet(std::array::from_fn(|k| self.0[k] - o.0[k]))
    }

    pub fn scale(&self, s: f64) -> Self {
        Jet(self.0.map(|v| v * s))
    }

    pub fn mul(&self, o: &Jet) -> Self {
        Jet(std::array::from_fn(|k| (0..=k).map(|i| self.0[i] * o.0[k - i]).sum()))
    }

    pub fn div(&self, o: &Jet) -> Self {
        let mut q = [0.0; N];
        for k in 0..N {
            let s: f64 = (1..=k).map(|i| o.0[i] * q[k - i]).sum();
            q[k] = (self.0[k] - s) / o.0[0];
        }
        Jet(q)
    }

    pub fn exp(&self) -> Self {
        let mut e = [0.0; N];
        e[0] = self.0[0].exp();
        for k in 1..N {
            let s: f64 = (1..=k).map(|j| j as f64 * self.0[j] * e[k - j]).sum();
            e[k] = s / k as f64;
        }
        Jet(e)
    }

    pub fn ln(&self) -> Self {
        let mut l = [0.0; N];
        l[0] = self.0[0].ln();
        for k in 1..N {
            let s: f64 = (1..k).map(|j| j as f64 * l[j] * self.0[k - j]).sum();
            l[k] = (self.0[k] - s / k as f64) / self.0[0];
        }
        Jet(l)
    }

    pub fn powf(&self, s: f64) -> Self {
        self.ln().scale(s).exp()
    }
}

/// Time modulation of the manufactured profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Modulation {
    /// `e^{-t}`
    Decay,
    /// `cos(omega t)`
    Oscillation(f64),
}

impl Modulation {
    fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            Modulation::Decay => ((-t).exp(), -(-t).exp()),
            Modulation::Oscillation(w) => ((w * t).cos(), -w * (w * t).sin()),
        }
    }
}

/// Exact 1D source terms for `rho* = 2 + 0.5 cos(2 pi x) theta(t)`,
/// `u* = 0.1 sin(2 pi x) theta(t)` on the unit torus.
pub struct Manufactured {
    pub params: ModelParams,
    pub mu: f64,
    pub modulation: Modulation,
}

impl Manufactured {
    pub fn new(params: ModelParams, modulation: Modulation) -> Self {
        let mu = params.mu().expect("admissible");
        Self {
            params,
            mu,
            modulation,
        }
    }

    fn fields(&self, x: f64, t: f64) -> (Jet, Jet) {
        let (th, _) = self.modulation.eval(t);
        let rho = Jet::constant(2.0).add(&Jet::cosine(0.5 * th, TAU, 0.0, x));
        let u = Jet::cosine(0.1 * th, TAU, -std::f64::consts::FRAC_PI_2, x);
        (rho, u)
    }

    pub fn rho(&self, x: f64, t: f64) -> f64 {
        self.fields(x, t).0.value()
    }

    pub fn u(&self, x: f64, t: f64) -> f64 {
        self.fields(x, t).1.value()
    }

    /// `(F_rho, F_m)` at `(x, t)`.
    pub fn source(&self, x: f64, t: f64) -> (f64, f64) {
        let ModelParams { nu, kappa, gamma, eps, .. } = self.params;
        let (rho, u) = self.fields(x, t);
        let (_, dth) = self.modulation.eval(t);
        let rho_t = 0.5 * (TAU * x).cos() * dth;
        let u_t = 0.1 * (TAU * x).sin() * dth;
        let m_t = rho_t * u.value() + rho.value() * u_t;

        let r78 = rho.powf(0.875);
        let rg = rho.powf(gamma);
        let h = rho.add(&r78.scale(eps)).add(&rg.scale(eps));
        let g = r78.scale(-eps / 8.0).add(&rg.scale(eps * (gamma - 1.0)));
        let hp = Jet::constant(1.0)
            .add(&r78.div(&rho).scale(0.875 * eps))
            .add(&rg.div(&rho).scale(eps * gamma));
        let (mut p, mut ptilde) = (Jet::constant(0.0), Jet::constant(0.0));
        if eps > 0.0 {
            let ll = log_lambda_eps(eps);
            let lr = rho.ln();
            for term in canonical_p_terms(eps, gamma, self.mu) {
                let v = lr.scale(term.exponent).add(&Jet::constant(ll)).exp();
                p = p.add(&v.scale(term.coef));
            }
            let a = 1.0 / (eps * eps);
            let up = lr.scale(a).add(&Jet::constant(ll)).exp();
            let down = lr.scale(-a).add(&Jet::constant(ll)).exp();
            ptilde = up.add(&down);
        }

        let m = rho.mul(&u);
        let ux = u.deriv();
        let cap_a = hp.mul(&rho.powf(0.5).deriv());
        let flux = m
            .mul(&u)
            .sub(&h.add(&g).mul(&ux).scale(2.0 * nu))
            .add(&rg)
            .add(&p)
            .sub(&hp.mul(&h.deriv().deriv()).sub(&cap_a.mul(&cap_a).scale(4.0)).scale(kappa * kappa));
        let f_rho = rho_t + m.deriv().value();
        let f_m = m_t + flux.deriv().value() + ptilde.value() * u.value();
        (f_rho, f_m)
    }

    /// Exact primitive state sampled on `grid` at time `t`.
    pub fn sample(&self, grid: &PeriodicGrid, t: f64) -> (ScalarField, VectorField) {
        let rho = ScalarField::from_fn(grid, |x| self.rho(x[0], t));
        let mom = ScalarField::from_fn(grid, |x| self.rho(x[0], t) * self.u(x[0], t));
        (rho, VectorField::new(vec![mom]).expect("1D"))
    }
}

impl Forcing for Manufactured {
    fn eval(&self, grid: &PeriodicGrid, t: f64) -> (ScalarField, VectorField) {
        let xs = grid.coords(0);
        let (fr, fm): (Vec<f64>, Vec<f64>) = xs.iter().map(|&x| self.source(x, t)).unzip();
        (
            ScalarField::new(grid, fr).expect("grid-sized"),
            VectorField::new(vec![ScalarField::new(grid, fm).expect("grid-sized")]).expect("1D"),
        )
    }
}
