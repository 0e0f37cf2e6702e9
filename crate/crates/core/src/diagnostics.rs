//! Energy, entropy and moment functionals with their dissipation ledgers.
//!
//! Instantaneous functionals and dissipation integrals are pure functions of a
//! state. Balance residuals such as `dE/dt + D` are formed afterwards from a
//! sequence of records by differentiating the functional in time with a
//! five-point finite-difference stencil (fourth order, one-sided at the ends).

use std::io::Write;

use serde::Serialize;

use crate::coeffs::CoefficientSet;
use crate::dynamics::{rho_grad_phi, Formulation, Model, State};
use crate::error::{QnsError, Result};
use crate::fields::{
    grad_unchecked, grad_vec_unchecked, hessian_unchecked, integrate, ScalarField,
    VectorField,
};
use crate::tensors::{capillary_flux, require_positive};

/// Energy functional and its three dissipation integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub energy: f64,
    pub kinetic: f64,
    pub internal: f64,
    pub cold: f64,
    pub capillary: f64,
    /// `2 nu ∫ h |Du|^2`
    pub visc_h: f64,
    /// `2 nu ∫ g (div u)^2`
    pub visc_g: f64,
    /// `∫ ptilde |u|^2`
    pub damping: f64,
}

impl EnergyReport {
    pub fn dissipation(&self) -> f64 {
        self.visc_h + self.visc_g + self.damping
    }
}

fn capillary_density(rho: &ScalarField, co: &CoefficientSet) -> ScalarField {
    capillary_flux(rho, co).norm_sq()
}

/// Velocity `u + c grad phi` from a state in either formulation.
pub fn velocity_with(model: &Model, state: &State, c: f64) -> Result<VectorField> {
    require_positive(&state.rho, 0.0, state.time)?;
    let c0 = state.formulation.c();
    let mut mom = state.mom.clone();
    if c != c0 {
        mom.axpy(c - c0, &rho_grad_phi(&state.rho, &model.coeffs));
    }
    let inv = state.rho.map(|r| 1.0 / r);
    Ok(mom.mul_scalar(&inv))
}

pub fn energy(model: &Model, state: &State) -> Result<EnergyReport> {
    if state.formulation != Formulation::Primitive {
        return Err(QnsError::Domain("energy needs a primitive state".into()));
    }
    require_positive(&state.rho, 0.0, state.time)?;
    let co = &model.coeffs;
    let p = &model.params;
    let rho = &state.rho;
    let u = state.velocity();
    let u2 = u.norm_sq();

    let kinetic = 0.5 * integrate(&rho.mul(&u2));
    let internal = integrate(&rho.map(|r| r.powf(p.gamma) / (p.gamma - 1.0)));
    let cold = integrate(&rho.map(|r| co.f(r)));
    let capillary = 2.0 * p.kappa * p.kappa * integrate(&capillary_density(rho, co));

    let gu = grad_vec_unchecked(&u);
    let du = gu.add(&gu.transpose()).scale(0.5);
    let divu = du.trace();
    let h = rho.map(|r| co.h(r));
    let g = rho.map(|r| co.g(r));
    Ok(EnergyReport {
        energy: kinetic + internal + cold + capillary,
        kinetic,
        internal,
        cold,
        capillary,
        visc_h: 2.0 * p.nu * integrate(&h.mul(&du.norm_sq())),
        visc_g: 2.0 * p.nu * integrate(&g.mul(&divu.mul(&divu))),
        damping: integrate(&rho.map(|r| co.ptilde(r)).mul(&u2)),
    })
}

/// Entropy functional for transform constant `c` and its seven dissipation terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BdReport {
    pub c: f64,
    pub functional: f64,
    /// In order: `c∫h|Av|^2`, `(2nu-c)∫(h|Dv|^2 + g (div v)^2)`, `∫ptilde|v|^2`,
    /// `c gamma ∫h'|grad rho|^2 rho^(gamma-2)`, `c lam ∫h'|grad rho|^2 f''`,
    /// `c kap ∫h|hess phi|^2`, `c kap ∫g (lap phi)^2`.
    pub terms: [f64; 7],
}

impl BdReport {
    pub fn dissipation(&self) -> f64 {
        self.terms.iter().sum()
    }
}

pub fn bd_entropy(model: &Model, state: &State, c: f64) -> Result<BdReport> {
    model.check_c(c)?;
    let v = velocity_with(model, state, c)?;
    let co = &model.coeffs;
    let p = &model.params;
    let rho = &state.rho;
    let lam = model.derived.tilde_lambda(c);
    let kap = model.derived.tilde_kappa_sq(c);

    let mut functional = 0.5 * integrate(&rho.mul(&v.norm_sq()))
        + integrate(&rho.map(|r| r.powf(p.gamma) / (p.gamma - 1.0)));
    if lam != 0.0 {
        functional += lam * integrate(&rho.map(|r| co.f(r)));
    }
    if kap != 0.0 {
        functional += 2.0 * kap * integrate(&capillary_density(rho, co));
    }

    let h = rho.map(|r| co.h(r));
    let g = rho.map(|r| co.g(r));
    let hp = rho.map(|r| co.h_prime(r));
    let gv = grad_vec_unchecked(&v);
    let dv = gv.add(&gv.transpose()).scale(0.5);
    let av = gv.sub(&gv.transpose()).scale(0.5);
    let divv = dv.trace();
    let grad_rho2 = grad_unchecked(rho).norm_sq();

    let mut terms = [0.0; 7];
    terms[0] = c * integrate(&h.mul(&av.norm_sq()));
    terms[1] = (2.0 * p.nu - c)
        * (integrate(&h.mul(&dv.norm_sq())) + integrate(&g.mul(&divv.mul(&divv))));
    terms[2] = integrate(&rho.map(|r| co.ptilde(r)).mul(&v.norm_sq()));
    terms[3] = c
        * p.gamma
        * integrate(&hp.mul(&grad_rho2).zip_map(rho, |a, r| a * r.powf(p.gamma - 2.0)));
    if lam != 0.0 {
        terms[4] = c * lam * integrate(&hp.mul(&grad_rho2).mul(&rho.map(|r| co.f_second(r))));
    }
    if kap != 0.0 {
        let hess = hessian_unchecked(&rho.map(|r| co.phi(r)));
        let lap = hess.trace();
        terms[5] = c * kap * integrate(&h.mul(&hess.norm_sq()));
        terms[6] = c * kap * integrate(&g.mul(&lap.mul(&lap)));
    }
    Ok(BdReport {
        c,
        functional,
        terms,
    })
}

/// `∫ rho (1 + |w|^2/2) log(1 + |w|^2/2)` with `w = u + mu grad phi`.
pub fn mv_functional(model: &Model, state: &State) -> Result<f64> {
    let w = velocity_with(model, state, model.mu())?;
    Ok(integrate(&state.rho.zip_map(&w.norm_sq(), |r, w2| {
        let t = 0.5 * w2;
        r * (1.0 + t) * t.ln_1p()
    })))
}

/// Pressure-type terms that bound the growth of the log-moment functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MvBounds {
    /// `∫ rho^(2 gamma - 1) (1 + log(1 + |w|^2/2))`
    pub direct: f64,
    /// Hölder split of `direct` with exponent `delta`:
    /// `(∫ rho^((2 gamma - delta/2 - 1) 2/(2-delta)))^((2-delta)/2) * ∫ rho (1 + log(1+|w|^2/2))^(2/delta)`
    pub holder: f64,
    /// `∫ h |grad w|^2`
    pub gradient: f64,
}

pub fn mv_bounds(model: &Model, state: &State, delta: f64) -> Result<MvBounds> {
    if !(delta > 0.0 && delta < 2.0) {
        return Err(QnsError::Domain(format!("Hölder exponent must lie in (0, 2), got {delta}")));
    }
    let w = velocity_with(model, state, model.mu())?;
    let gamma = model.params.gamma;
    let rho = &state.rho;
    let logw = w.norm_sq().map(|w2| 1.0 + (0.5 * w2).ln_1p());
    let direct = integrate(&rho.zip_map(&logw, |r, l| r.powf(2.0 * gamma - 1.0) * l));
    let q = (2.0 * gamma - 0.5 * delta - 1.0) * 2.0 / (2.0 - delta);
    let first = integrate(&rho.map(|r| r.powf(q))).powf((2.0 - delta) / 2.0);
    let second = integrate(&rho.zip_map(&logw, |r, l| r * l.powf(2.0 / delta)));
    let h = rho.map(|r| model.coeffs.h(r));
    let gradient = integrate(&h.mul(&grad_vec_unchecked(&w).norm_sq()));
    Ok(MvBounds {
        direct,
        holder: first * second,
        gradient,
    })
}

/// Largest admissible moment exponent in two dimensions,
/// `min(mu / (2 (nu - mu)), 1/(gamma - 1), 1)`.
pub fn moment_delta_bound_2d(model: &Model) -> f64 {
    let mu = model.mu();
    let nu = model.params.nu;
    (mu / (2.0 * (nu - mu)))
        .min(1.0 / (model.params.gamma - 1.0))
        .min(1.0)
}

/// `∫ rho |w|^(2 + 2 delta)` for `delta` in `(0, 1)`.
pub fn moment(model: &Model, state: &State, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(QnsError::Domain(format!("moment exponent must lie in (0, 1), got {delta}")));
    }
    let w = velocity_with(model, state, model.mu())?;
    Ok(integrate(&state.rho.zip_map(&w.norm_sq(), |r, w2| {
        r * w2.powf(1.0 + delta)
    })))
}

/// Weight function for the renormalized balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Renormalization {
    /// `(1 + t) log(1 + t)`
    LogMoment,
    /// `t^(1 + delta)`; `delta = 0` gives the plain kinetic energy.
    Power(f64),
}

impl Renormalization {
    pub fn beta(&self, t: f64) -> f64 {
        match *self {
            Self::LogMoment => (1.0 + t) * t.ln_1p(),
            Self::Power(d) => t.powf(1.0 + d),
        }
    }

    pub fn beta_prime(&self, t: f64) -> f64 {
        match *self {
            Self::LogMoment => 1.0 + t.ln_1p(),
            Self::Power(d) => (1.0 + d) * t.powf(d),
        }
    }

    /// `beta''`, set to 0 at `t = 0` where every term it multiplies vanishes.
    pub fn beta_second(&self, t: f64) -> f64 {
        match *self {
            Self::LogMoment => 1.0 / (1.0 + t),
            Self::Power(d) => {
                if d == 0.0 || t == 0.0 {
                    0.0
                } else {
                    (1.0 + d) * d * t.powf(d - 1.0)
                }
            }
        }
    }
}

/// Named integrals of the renormalized kinetic balance
/// `d/dt ∫ rho beta(|w|^2/2) + sum(lhs) = sum(rhs)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenormalizedLedger {
    pub functional: f64,
    /// `mu ∫h |Aw.w|^2 b''`, `mu ∫h |Aw|^2 b'`, `(2nu-mu) ∫h |Dw|^2 b'`,
    /// `(2nu-mu) ∫g (div w)^2 b'`, `∫ptilde |w|^2 b'`, `(2nu-mu) ∫h |Dw.w|^2 b''`.
    pub lhs: [f64; 6],
    /// `-∫ grad(rho^gamma).w b'`, `-2nu ∫h (Dw.w).(Aw.w) b''`,
    /// `-(2nu-mu) ∫g div(w) w.(Dw.w) b''`.
    pub rhs: [f64; 3],
}

impl RenormalizedLedger {
    /// `sum(rhs) - sum(lhs)`, the predicted time derivative of the functional.
    pub fn rate(&self) -> f64 {
        self.rhs.iter().sum::<f64>() - self.lhs.iter().sum::<f64>()
    }
}

pub fn renormalized_ledger(
    model: &Model,
    state: &State,
    beta: Renormalization,
) -> Result<RenormalizedLedger> {
    let mu = model.mu();
    let w = velocity_with(model, state, mu)?;
    let co = &model.coeffs;
    let p = &model.params;
    let rho = &state.rho;
    let d = state.grid().dim();
    let n = rho.values().len();

    let gw = grad_vec_unchecked(&w);
    let dw = gw.add(&gw.transpose()).scale(0.5);
    let aw = gw.sub(&gw.transpose()).scale(0.5);
    let divw = dw.trace();
    let dvec = dw.apply(&w);
    // grad(|w|^2/2) = (grad w)^T w = Dw.w + Aw.w
    let avec = gw.transpose().apply(&w).sub(&dvec);

    let w2 = w.norm_sq();
    let t = w2.map(|x| 0.5 * x);
    let b1 = t.map(|x| beta.beta_prime(x));
    let b2 = t.map(|x| beta.beta_second(x));
    let h = rho.map(|r| co.h(r));
    let g = rho.map(|r| co.g(r));
    let ptilde = rho.map(|r| co.ptilde(r));
    let grad_pg = grad_unchecked(&rho.map(|r| r.powf(p.gamma)));

    let weighted = |a: &ScalarField, b: &ScalarField, c: &ScalarField| {
        let mut s = 0.0;
        for i in 0..n {
            s += a.values()[i] * b.values()[i] * c.values()[i];
        }
        s / n as f64 * state.grid().volume()
    };
    let k2 = 2.0 * p.nu - mu;

    let lhs = [
        mu * weighted(&h, &avec.norm_sq(), &b2),
        mu * weighted(&h, &aw.norm_sq(), &b1),
        k2 * weighted(&h, &dw.norm_sq(), &b1),
        k2 * weighted(&g, &divw.mul(&divw), &b1),
        weighted(&ptilde, &w2, &b1),
        k2 * weighted(&h, &dvec.norm_sq(), &b2),
    ];
    let mut wdv = w.comp(0).mul(dvec.comp(0));
    for i in 1..d {
        wdv.axpy(1.0, &w.comp(i).mul(dvec.comp(i)));
    }
    let rhs = [
        -integrate(&grad_pg.dot(&w).mul(&b1)),
        -2.0 * p.nu * weighted(&h, &dvec.dot(&avec), &b2),
        -k2 * weighted(&g, &divw.mul(&wdv), &b2),
    ];
    let functional = integrate(&rho.zip_map(&t, |r, x| r * beta.beta(x)));
    Ok(RenormalizedLedger {
        functional,
        lhs,
        rhs,
    })
}

/// Names of the density-only and kinetic monitors, in output order.
pub const UF_NAMES: [&str; 8] = [
    "rho_u2",
    "hprime_grad_sqrt_rho",
    "rho_plus_rho_gamma",
    "f_eps",
    "grad_sqrt_rho",
    "grad_rho_gamma_half",
    "hess_sqrt_rho",
    "grad_rho_quarter_4",
];

/// Monitored integrals whose size should not depend on the regularization.
pub fn uniform_bound_suite(model: &Model, state: &State) -> Result<[f64; 8]> {
    let u = velocity_with(model, state, 0.0)?;
    let co = &model.coeffs;
    let gamma = model.params.gamma;
    let rho = &state.rho;
    let sq = rho.map(f64::sqrt);
    let gsq = grad_unchecked(&sq);
    let q4 = grad_unchecked(&rho.map(|r| r.powf(0.25))).norm_sq();
    Ok([
        integrate(&rho.mul(&u.norm_sq())),
        integrate(&capillary_density(rho, co)),
        integrate(&rho.map(|r| r + r.powf(gamma))),
        integrate(&rho.map(|r| co.f(r))),
        integrate(&gsq.norm_sq()),
        integrate(&grad_unchecked(&rho.map(|r| r.powf(0.5 * gamma))).norm_sq()),
        integrate(&hessian_unchecked(&sq).norm_sq()),
        integrate(&q4.mul(&q4)),
    ])
}

/// Everything recorded at one diagnostic time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub energy: EnergyReport,
    pub energy_residual: f64,
    pub bd: BdReport,
    pub bd_residual: f64,
    pub mv: f64,
    /// Predicted `d/dt` of `mv` from the renormalized ledger.
    pub mv_rate: f64,
    pub mv_residual: f64,
    pub mv_bounds: MvBounds,
    pub moment: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub uf: [f64; 8],
}

/// Settings for building records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsConfig {
    /// Transform constant for the entropy functional.
    pub bd_c: f64,
    pub moment_delta: f64,
    /// Hölder exponent of the log-moment bound.
    pub holder_delta: f64,
}

impl DiagnosticsConfig {
    pub fn for_model(model: &Model) -> Self {
        Self {
            bd_c: model.mu(),
            moment_delta: 0.25,
            holder_delta: 1.0,
        }
    }
}

impl DiagnosticsRecord {
    /// Instantaneous quantities; residuals stay 0 until [`close_ledgers`] runs.
    pub fn from_state(model: &Model, state: &State, cfg: &DiagnosticsConfig) -> Result<Self> {
        let prim;
        let s = match state.formulation {
            Formulation::Primitive => state,
            Formulation::Effective(_) => {
                prim = crate::dynamics::to_primitive(model, state)?;
                &prim
            }
        };
        let e = energy(model, s)?;
        let bd = bd_entropy(model, s, cfg.bd_c)?;
        let ledger = renormalized_ledger(model, s, Renormalization::LogMoment)?;
        Ok(Self {
            time: s.time,
            mass: s.mass(),
            momentum: s.total_momentum(),
            energy: e,
            energy_residual: 0.0,
            bd,
            bd_residual: 0.0,
            mv: ledger.functional,
            mv_rate: ledger.rate(),
            mv_residual: 0.0,
            mv_bounds: mv_bounds(model, s, cfg.holder_delta)?,
            moment: moment(model, s, cfg.moment_delta)?,
            rho_min: s.rho.min(),
            rho_max: s.rho.max(),
            uf: uniform_bound_suite(model, s)?,
        })
    }
}

/// Finite-difference weights for the first derivative at `x0` from nodes `xs`.
pub fn fd_weights(x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    // c[i][k]: weight of node i for derivative order k (k = 0, 1)
    let mut c = vec![[0.0f64; 2]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Time derivative of `values` sampled at `times`, fourth order on five nodes.
pub fn time_derivative(times: &[f64], values: &[f64]) -> Vec<f64> {
    let n = times.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let width = n.min(5);
    (0..n)
        .map(|k| {
            let start = k.saturating_sub(width / 2).min(n - width);
            let xs = &times[start..start + width];
            fd_weights(times[k], xs)
                .iter()
                .zip(&values[start..start + width])
                .map(|(w, v)| w * v)
                .sum()
        })
        .collect()
}

/// Fill the signed residuals `dF/dt - rate` of every ledger.
pub fn close_ledgers(records: &mut [DiagnosticsRecord]) {
    let times: Vec<f64> = records.iter().map(|r| r.time).collect();
    let de = time_derivative(&times, &records.iter().map(|r| r.energy.energy).collect::<Vec<_>>());
    let db = time_derivative(&times, &records.iter().map(|r| r.bd.functional).collect::<Vec<_>>());
    let dm = time_derivative(&times, &records.iter().map(|r| r.mv).collect::<Vec<_>>());
    let single = records.len() < 2;
    for (k, r) in records.iter_mut().enumerate() {
        if single {
            r.energy_residual = 0.0;
            r.bd_residual = 0.0;
            r.mv_residual = 0.0;
            continue;
        }
        r.energy_residual = de[k] + r.energy.dissipation();
        r.bd_residual = db[k] + r.bd.dissipation();
        r.mv_residual = dm[k] - r.mv_rate;
    }
}

/// Smallest constant `C` with `mv(t) - mv(0) <= C ∫_0^t (gradient + direct)`
/// along the records (trapezoid in time).
pub fn fit_mv_constant(records: &[DiagnosticsRecord]) -> f64 {
    let Some(first) = records.first() else {
        return 0.0;
    };
    let mut acc = 0.0;
    let mut c: f64 = 0.0;
    for pair in records.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let fa = a.mv_bounds.gradient + a.mv_bounds.direct;
        let fb = b.mv_bounds.gradient + b.mv_bounds.direct;
        acc += 0.5 * (fa + fb) * (b.time - a.time);
        if acc > 0.0 {
            c = c.max((b.mv - first.mv) / acc);
        }
    }
    c
}

/// CSV header for a run in `dim` dimensions.
pub fn csv_header(dim: usize) -> Vec<String> {
    let mut cols: Vec<String> = vec!["t".into(), "mass".into()];
    for axis in ["x", "y", "z"].iter().take(dim) {
        cols.push(format!("mom_{axis}"));
    }
    for c in ["E", "D_visc_h", "D_visc_g", "D_damp", "E_residual", "B_c"] {
        cols.push(c.into());
    }
    for k in 1..=7 {
        cols.push(format!("bd_term_{k}"));
    }
    for c in ["B_residual", "MV", "moment", "rho_min", "rho_max"] {
        cols.push(c.into());
    }
    for n in UF_NAMES {
        cols.push(format!("uf_{n}"));
    }
    cols
}

impl DiagnosticsRecord {
    pub fn csv_values(&self) -> Vec<f64> {
        let mut v = vec![self.time, self.mass];
        v.extend_from_slice(&self.momentum);
        let e = &self.energy;
        v.extend_from_slice(&[
            e.energy,
            e.visc_h,
            e.visc_g,
            e.damping,
            self.energy_residual,
            self.bd.functional,
        ]);
        v.extend_from_slice(&self.bd.terms);
        v.extend_from_slice(&[self.bd_residual, self.mv, self.moment, self.rho_min, self.rho_max]);
        v.extend_from_slice(&self.uf);
        v
    }
}

/// Write `# ` provenance lines, the header row and one row per record with 17 significant digits.
pub fn write_csv<W: Write>(
    w: &mut W,
    provenance: &str,
    dim: usize,
    records: &[DiagnosticsRecord],
) -> Result<()> {
    for line in provenance.lines() {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{}", csv_header(dim).join(","))?;
    for r in records {
        let row: Vec<String> = r.csv_values().iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::PeriodicGrid;
    use crate::params::ModelParams;

    fn model(eps: f64) -> Model {
        Model::new(ModelParams::new(1.25, 0.75, 2.0, eps, 1)).unwrap()
    }

    fn uniform(grid: &PeriodicGrid, rho0: f64, u0: f64) -> State {
        State::primitive(
            ScalarField::constant(grid, rho0),
            VectorField::constant(grid, &[rho0 * u0]),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn constant_state_energy() {
        let g = PeriodicGrid::new(1, 16, 1.0).unwrap();
        let m = model(0.5);
        let f1 = m.coeffs.f(1.0);
        let e = energy(&m, &uniform(&g, 1.0, 0.0)).unwrap();
        assert!((e.energy - (1.0 + f1)).abs() < 1e-14);
        assert_eq!(e.capillary, 0.0);
        let e = energy(&m, &uniform(&g, 1.0, 0.3)).unwrap();
        assert!((e.energy - (1.0 + f1 + 0.045)).abs() < 1e-14);
        let want = 2.0 * (-16.0f64).exp() * 0.09;
        assert!((e.dissipation() - want).abs() < 1e-12 * want);
    }

    #[test]
    fn bd_at_mu_drops_regularization_terms() {
        let g = PeriodicGrid::new(1, 32, 1.0).unwrap();
        let m = model(0.4);
        let rho = ScalarField::from_fn(&g, |x| 2.0 + 0.5 * (std::f64::consts::TAU * x[0]).cos());
        let s = State::primitive(rho, VectorField::zeros(&g), 0.0).unwrap();
        let r = bd_entropy(&m, &s, m.mu()).unwrap();
        assert_eq!(r.terms[4], 0.0);
        assert_eq!(r.terms[5], 0.0);
        assert_eq!(r.terms[6], 0.0);
        let r2 = bd_entropy(&m, &s, 0.5 * m.mu()).unwrap();
        assert!(r2.terms[4] > 0.0 && r2.terms[5] > 0.0);
        assert!(bd_entropy(&m, &s, 2.0 * m.mu()).is_err());
    }

    #[test]
    fn constant_state_bd() {
        let g = PeriodicGrid::new(1, 16, 1.0).unwrap();
        let m = model(0.5);
        let s = uniform(&g, 1.5, 0.0);
        let c = 0.5 * m.mu();
        let r = bd_entropy(&m, &s, c).unwrap();
        let want = 2.25 + 0.5 * m.coeffs.f(1.5);
        assert!((r.functional - want).abs() < 1e-13);
        assert!(r.terms.iter().all(|t| t.abs() < 1e-12));
    }

    #[test]
    fn mv_and_moment_examples() {
        let g = PeriodicGrid::new(1, 16, 1.0).unwrap();
        let m = model(0.4);
        assert_eq!(mv_functional(&m, &uniform(&g, 1.0, 0.0)).unwrap(), 0.0);
        let mv = mv_functional(&m, &uniform(&g, 1.0, 2f64.sqrt())).unwrap();
        assert!((mv - 2.0 * 2f64.ln()).abs() < 1e-14);
        assert_eq!(moment(&m, &uniform(&g, 1.0, 0.0), 0.3).unwrap(), 0.0);
        for d in [0.1, 0.5, 0.9] {
            assert!((moment(&m, &uniform(&g, 1.0, 1.0), d).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!(moment(&m, &uniform(&g, 1.0, 1.0), 1.0).is_err());
        assert!(moment(&m, &uniform(&g, 1.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn moment_delta_bound() {
        let m = Model::new(ModelParams::new(1.25, 0.75, 2.0, 0.4, 2)).unwrap();
        assert!((moment_delta_bound_2d(&m) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn fd_weights_are_exact_on_quartics() {
        let xs = [0.0, 0.1, 0.25, 0.3, 0.5];
        for &x0 in &[0.0, 0.25, 0.5] {
            let w = fd_weights(x0, &xs);
            let d: f64 = w.iter().zip(&xs).map(|(w, x)| w * x.powi(4)).sum();
            assert!((d - 4.0 * x0.powi(3)).abs() < 1e-11);
            let s: f64 = w.iter().sum();
            assert!(s.abs() < 1e-11);
        }
    }

    #[test]
    fn csv_header_layout() {
        let h = csv_header(2);
        assert_eq!(&h[..4], &["t", "mass", "mom_x", "mom_y"]);
        assert_eq!(h.len(), 4 + 6 + 7 + 5 + 8);
        assert_eq!(h[10], "bd_term_1");
        assert_eq!(h.last().unwrap(), "uf_grad_rho_quarter_4");
    }

    #[test]
    fn constant_state_monitors() {
        let g = PeriodicGrid::new(1, 16, 1.0).unwrap();
        let m = model(0.4);
        let uf = uniform_bound_suite(&m, &uniform(&g, 1.0, 0.0)).unwrap();
        assert_eq!(uf[0], 0.0);
        assert_eq!(uf[2], 2.0);
        assert!((uf[3] - m.coeffs.f(1.0)).abs() < 1e-16);
        for k in [1, 4, 5, 6, 7] {
            assert!(uf[k].abs() < 1e-24);
        }
    }
}
