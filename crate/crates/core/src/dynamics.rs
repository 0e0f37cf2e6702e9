//! Right-hand sides, the effective-velocity transform and explicit time stepping.
//!
//! The primitive unknowns are `(rho, m = rho u)`. The effective unknowns for a
//! transform constant `c` are `(rho, rho v)` with `v = u + c grad phi(rho)`;
//! since `rho grad phi = grad h`, the momentum shift is computed pointwise as
//! `c 2 sqrt(rho) h'(rho) grad sqrt(rho)`.
//!
//! Both momentum equations are assembled as the divergence of a single flux
//! tensor plus the damping term, so total momentum changes only through damping.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientSet;
use crate::error::{QnsError, Result};
use crate::fields::{
    div_unchecked, grad_unchecked, grad_vec_unchecked, laplacian_unchecked, PeriodicGrid,
    ScalarField, VectorField,
};
use crate::params::{DerivedConstants, ModelParams};
use crate::tensors::{capillary_flux, capillary_flux_with, require_positive};

/// Parameters plus everything precomputed from them.
#[derive(Debug)]
pub struct Model {
    pub params: ModelParams,
    pub coeffs: CoefficientSet,
    pub derived: DerivedConstants,
    cold_pressure_evals: AtomicU64,
    capillarity_evals: AtomicU64,
}

impl Clone for Model {
    fn clone(&self) -> Self {
        Self {
            params: self.params,
            coeffs: self.coeffs.clone(),
            derived: self.derived,
            cold_pressure_evals: AtomicU64::new(0),
            capillarity_evals: AtomicU64::new(0),
        }
    }
}

impl Model {
    pub fn new(params: ModelParams) -> Result<Self> {
        Ok(Self {
            params,
            coeffs: CoefficientSet::new(&params)?,
            derived: params.derived()?,
            cold_pressure_evals: AtomicU64::new(0),
            capillarity_evals: AtomicU64::new(0),
        })
    }

    pub fn mu(&self) -> f64 {
        self.derived.mu
    }

    /// Number of cold-pressure field evaluations made by the right-hand sides.
    pub fn cold_pressure_evals(&self) -> u64 {
        self.cold_pressure_evals.load(Ordering::Relaxed)
    }

    /// Number of capillarity-tensor assemblies made by the right-hand sides.
    pub fn capillarity_evals(&self) -> u64 {
        self.capillarity_evals.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.cold_pressure_evals.store(0, Ordering::Relaxed);
        self.capillarity_evals.store(0, Ordering::Relaxed);
    }

    /// Reject transform constants outside `(0, mu]`.
    pub fn check_c(&self, c: f64) -> Result<()> {
        if c > 0.0 && c <= self.mu() {
            Ok(())
        } else {
            Err(QnsError::Domain(format!(
                "transform constant must lie in (0, mu = {}], got {c}",
                self.mu()
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Formulation {
    Primitive,
    /// Effective velocity with transform constant `c`.
    Effective(f64),
}

impl Formulation {
    pub fn name(&self) -> &'static str {
        match self {
            Formulation::Primitive => "primitive",
            Formulation::Effective(_) => "effective",
        }
    }

    pub fn c(&self) -> f64 {
        match self {
            Formulation::Primitive => 0.0,
            Formulation::Effective(c) => *c,
        }
    }
}

/// Density, momentum (`rho u` or `rho v`) and time.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub rho: ScalarField,
    pub mom: VectorField,
    pub formulation: Formulation,
    pub time: f64,
    /// Mass at construction, kept for drift checks.
    pub mass0: f64,
}

impl State {
    pub fn new(rho: ScalarField, mom: VectorField, formulation: Formulation, time: f64) -> Result<Self> {
        if rho.grid() != mom.grid() {
            return Err(QnsError::GridMismatch("density and momentum grids differ".into()));
        }
        mom.check_finite()?;
        require_positive(&rho, 0.0, time)?;
        let mass0 = crate::fields::integrate(&rho);
        Ok(Self {
            rho,
            mom,
            formulation,
            time,
            mass0,
        })
    }

    pub fn primitive(rho: ScalarField, mom: VectorField, time: f64) -> Result<Self> {
        Self::new(rho, mom, Formulation::Primitive, time)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.rho.grid()
    }

    /// `mom / rho`: the velocity of the current formulation.
    pub fn velocity(&self) -> VectorField {
        let inv = self.rho.map(|r| 1.0 / r);
        self.mom.mul_scalar(&inv)
    }

    pub fn mass(&self) -> f64 {
        crate::fields::integrate(&self.rho)
    }

    pub fn total_momentum(&self) -> Vec<f64> {
        self.mom.comps().iter().map(crate::fields::integrate).collect()
    }
}

/// `2 sqrt(rho) h'(rho) grad sqrt(rho) = rho grad phi(rho)`.
pub fn rho_grad_phi(rho: &ScalarField, coeffs: &CoefficientSet) -> VectorField {
    let sq2 = rho.map(|r| 2.0 * r.sqrt());
    capillary_flux(rho, coeffs).mul_scalar(&sq2)
}

/// Primitive state to effective(`c`) state.
pub fn to_effective(model: &Model, state: &State, c: f64) -> Result<State> {
    if state.formulation != Formulation::Primitive {
        return Err(QnsError::Domain("to_effective needs a primitive state".into()));
    }
    model.check_c(c)?;
    require_positive(&state.rho, 0.0, state.time)?;
    let mut mom = state.mom.clone();
    mom.axpy(c, &rho_grad_phi(&state.rho, &model.coeffs));
    Ok(State {
        mom,
        formulation: Formulation::Effective(c),
        ..state.clone()
    })
}

/// Effective state back to the primitive formulation.
pub fn to_primitive(model: &Model, state: &State) -> Result<State> {
    let Formulation::Effective(c) = state.formulation else {
        return Err(QnsError::Domain("to_primitive needs an effective state".into()));
    };
    require_positive(&state.rho, 0.0, state.time)?;
    let mut mom = state.mom.clone();
    mom.axpy(-c, &rho_grad_phi(&state.rho, &model.coeffs));
    Ok(State {
        mom,
        formulation: Formulation::Primitive,
        ..state.clone()
    })
}

/// Accumulates `sum_j d_j F_ij` in spectral space.
struct FluxAccumulator<'g> {
    grid: &'g PeriodicGrid,
    acc: Vec<Vec<Complex64>>,
}

impl<'g> FluxAccumulator<'g> {
    fn new(grid: &'g PeriodicGrid) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            grid,
            acc: vec![vec![zero; grid.spec_len()]; grid.dim()],
        }
    }

    /// Add `d_j` of a flux component with spectrum `spec` to row `i`.
    fn add_deriv(&mut self, i: usize, j: usize, spec: &[Complex64], scale: f64) {
        let k = self.grid.wavenumbers(j);
        for ((a, s), &k) in self.acc[i].iter_mut().zip(spec).zip(k) {
            *a += Complex64::new(-k * s.im, k * s.re) * scale;
        }
    }

    fn add_laplacian(&mut self, i: usize, spec: &[Complex64], scale: f64) {
        let l = self.grid.laplacian_symbol();
        for ((a, s), &l) in self.acc[i].iter_mut().zip(spec).zip(l) {
            *a += s * (l * scale);
        }
    }

    /// Add the divergence of a pointwise symmetric tensor given by its upper triangle.
    fn add_symmetric(&mut self, upper: &[Vec<f64>]) {
        let d = self.grid.dim();
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                let spec = self.grid.forward(&upper[k]);
                self.add_deriv(i, j, &spec, 1.0);
                if i != j {
                    self.add_deriv(j, i, &spec, 1.0);
                }
                k += 1;
            }
        }
    }

    /// Add `-div(mom ⊗ vel)` with exact 2/3-band products.
    fn add_convection(&mut self, mom: &VectorField, vel: &VectorField) {
        let g = self.grid;
        let d = g.dim();
        let pm: Vec<Vec<f64>> = mom.comps().iter().map(|c| g.to_padded(c.values())).collect();
        let pv: Vec<Vec<f64>> = vel.comps().iter().map(|c| g.to_padded(c.values())).collect();
        for i in 0..d {
            for j in 0..d {
                let prod: Vec<f64> = pm[i].iter().zip(&pv[j]).map(|(a, b)| a * b).collect();
                let spec = g.from_padded_spec(&prod);
                self.add_deriv(i, j, &spec, -1.0);
            }
        }
    }

    fn finish(self) -> Vec<Vec<f64>> {
        let g = self.grid;
        self.acc.into_iter().map(|a| g.inverse(a)).collect()
    }
}

fn upper_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * d - i * (i + 1) / 2 + j
}

/// Pointwise pieces shared by both momentum equations.
struct Pointwise {
    h: ScalarField,
    hp: ScalarField,
    g: ScalarField,
    ptilde: ScalarField,
    p: ScalarField,
}

fn pointwise(model: &Model, rho: &ScalarField) -> Pointwise {
    let c = &model.coeffs;
    let n = rho.values().len();
    let mut cols: [Vec<f64>; 5] = std::array::from_fn(|_| Vec::with_capacity(n));
    for &r in rho.values() {
        let l = c.local(r);
        for (col, v) in cols.iter_mut().zip([l.h, l.h_prime, l.g, l.ptilde, l.p]) {
            col.push(v);
        }
    }
    let grid = rho.grid();
    let [h, hp, g, ptilde, p] = cols.map(|v| ScalarField::raw(grid, v));
    Pointwise {
        h,
        hp,
        g,
        ptilde,
        p,
    }
}

/// Upper triangle of `a_ij = s * iso * delta_ij + visc * (h D_ij) - cap * 4 a_i a_j`.
#[allow(clippy::too_many_arguments)]
fn symmetric_flux(
    d: usize,
    iso: &ScalarField,
    h: &ScalarField,
    dv: &crate::fields::TensorField,
    visc: f64,
    cap: Option<(&VectorField, f64)>,
) -> Vec<Vec<f64>> {
    let mut upper = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in i..d {
            let dij = dv.get(i, j).values();
            let hv = h.values();
            let mut t: Vec<f64> = dij.iter().zip(hv).map(|(a, b)| visc * a * b).collect();
            if i == j {
                for (x, y) in t.iter_mut().zip(iso.values()) {
                    *x += y;
                }
            }
            if let Some((a, kap)) = cap {
                let (ai, aj) = (a.comp(i).values(), a.comp(j).values());
                for ((x, p), q) in t.iter_mut().zip(ai).zip(aj) {
                    *x -= 4.0 * kap * p * q;
                }
            }
            upper.push(t);
        }
    }
    debug_assert_eq!(upper.len(), upper_index(d, d - 1, d - 1) + 1);
    upper
}

/// `(d rho/dt, d m/dt)` of the primitive system.
pub fn rhs_primitive(model: &Model, state: &State) -> Result<(ScalarField, VectorField)> {
    if state.formulation != Formulation::Primitive {
        return Err(QnsError::Domain("rhs_primitive needs a primitive state".into()));
    }
    primitive_rhs(model, &state.rho, &state.mom, state.time)
}

fn primitive_rhs(
    model: &Model,
    rho: &ScalarField,
    mom: &VectorField,
    time: f64,
) -> Result<(ScalarField, VectorField)> {
    require_positive(rho, 0.0, time)?;
    mom.check_finite()?;
    let grid = rho.grid();
    let d = grid.dim();
    let nu = model.params.nu;
    let kappa2 = model.params.kappa * model.params.kappa;
    let co = &model.coeffs;

    let drho = div_unchecked(mom).scale(-1.0);
    let inv = rho.map(|r| 1.0 / r);
    let u = mom.mul_scalar(&inv);
    let pw = pointwise(model, rho);

    let gu = grad_vec_unchecked(&u);
    let du = gu.add(&gu.transpose()).scale(0.5);
    let divu = du.trace();

    // isotropic part: -(rho^gamma + p) + 2 nu g div u + kappa^2 h' lap h
    let gamma = model.params.gamma;
    let mut iso = rho.map(|r| -r.powf(gamma));
    if !co.unregularized() {
        model.cold_pressure_evals.fetch_add(1, Ordering::Relaxed);
        iso.axpy(-1.0, &pw.p);
    }
    iso.axpy(2.0 * nu, &pw.g.mul(&divu));
    model.capillarity_evals.fetch_add(1, Ordering::Relaxed);
    iso.axpy(kappa2, &pw.hp.mul(&laplacian_unchecked(&pw.h)));
    let a = capillary_flux_with(rho, &pw.hp);

    let mut acc = FluxAccumulator::new(grid);
    acc.add_convection(mom, &u);
    acc.add_symmetric(&symmetric_flux(d, &iso, &pw.h, &du, 2.0 * nu, Some((&a, kappa2))));
    let rows = acc.finish();

    let dm = rows
        .into_iter()
        .zip(u.comps())
        .map(|(r, ui)| {
            let mut f = ScalarField::new(grid, r).expect("grid-sized");
            f.axpy(-1.0, &pw.ptilde.mul(ui));
            f
        })
        .collect();
    Ok((drho, VectorField::new(dm)?))
}

/// `(d rho/dt, d(rho v)/dt)` of the effective system with constant `c`.
/// Cold-pressure and capillarity terms are skipped when their coefficients
/// vanish, which happens exactly at `c = mu`.
pub fn rhs_effective(model: &Model, state: &State, c: f64) -> Result<(ScalarField, VectorField)> {
    if state.formulation != Formulation::Effective(c) {
        return Err(QnsError::Domain(format!(
            "rhs_effective({c}) called on a {:?} state",
            state.formulation
        )));
    }
    effective_rhs(model, &state.rho, &state.mom, c, state.time)
}

fn effective_rhs(
    model: &Model,
    rho: &ScalarField,
    mom: &VectorField,
    c: f64,
    time: f64,
) -> Result<(ScalarField, VectorField)> {
    model.check_c(c)?;
    require_positive(rho, 0.0, time)?;
    mom.check_finite()?;
    let grid = rho.grid();
    let d = grid.dim();
    let nu = model.params.nu;
    let co = &model.coeffs;
    let lam = model.derived.tilde_lambda(c);
    let kap = model.derived.tilde_kappa_sq(c);

    let pw = pointwise(model, rho);
    let mut drho = div_unchecked(mom).scale(-1.0);
    drho.axpy(c, &laplacian_unchecked(&pw.h));

    let inv = rho.map(|r| 1.0 / r);
    let v = mom.mul_scalar(&inv);
    let gv = grad_vec_unchecked(&v);
    let dv = gv.add(&gv.transpose()).scale(0.5);
    let divv = dv.trace();

    // isotropic part: -rho^gamma - lam p + (2 nu - c) g div v + kap h' lap h
    let gamma = model.params.gamma;
    let mut iso = rho.map(|r| -r.powf(gamma));
    if lam != 0.0 && !co.unregularized() {
        model.cold_pressure_evals.fetch_add(1, Ordering::Relaxed);
        iso.axpy(-lam, &pw.p);
    }
    iso.axpy(2.0 * nu - c, &pw.g.mul(&divv));
    let cap_flux;
    let cap = if kap != 0.0 {
        model.capillarity_evals.fetch_add(1, Ordering::Relaxed);
        iso.axpy(kap, &pw.hp.mul(&laplacian_unchecked(&pw.h)));
        cap_flux = capillary_flux_with(rho, &pw.hp);
        Some((&cap_flux, kap))
    } else {
        None
    };

    let mut acc = FluxAccumulator::new(grid);
    acc.add_convection(mom, &v);
    acc.add_symmetric(&symmetric_flux(d, &iso, &pw.h, &dv, 2.0 * (nu - c), cap));
    for i in 0..d {
        let spec = grid.forward(pw.h.mul(v.comp(i)).values());
        acc.add_laplacian(i, &spec, c);
    }
    let rows = acc.finish();

    let dm = rows
        .into_iter()
        .zip(v.comps())
        .map(|(r, vi)| {
            let mut f = ScalarField::new(grid, r).expect("grid-sized");
            f.axpy(-1.0, &pw.ptilde.mul(vi));
            f
        })
        .collect();
    Ok((drho, VectorField::new(dm)?))
}

/// Breakdown of the transform-consistency check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformResidual {
    /// `L^2` difference of the continuity right-hand sides.
    pub continuity: f64,
    /// `L^2` difference of the momentum right-hand sides.
    pub momentum: f64,
    /// `L^2` norm of the effective momentum right-hand side, for scale.
    pub scale: f64,
}

impl TransformResidual {
    pub fn total(&self) -> f64 {
        self.continuity.hypot(self.momentum)
    }
}

/// Compare `d(rho v)/dt` from the effective right-hand side against the
/// primitive right-hand side pushed through the transform, where
/// `d(rho grad phi)/dt = -grad div(h u) - grad(g div u)`.
pub fn transform_residual_parts(model: &Model, state: &State, c: f64) -> Result<TransformResidual> {
    let eff = to_effective(model, state, c)?;
    let (drho_a, dm_a) = rhs_effective(model, &eff, c)?;
    let (drho_b, mut dm_b) = rhs_primitive(model, state)?;

    let u = state.velocity();
    let co = &model.coeffs;
    let h = state.rho.map(|r| co.h(r));
    let g = state.rho.map(|r| co.g(r));
    let divu = div_unchecked(&u);
    let mut q = div_unchecked(&u.mul_scalar(&h));
    q.axpy(1.0, &g.mul(&divu));
    dm_b.axpy(-c, &grad_unchecked(&q));

    Ok(TransformResidual {
        continuity: drho_a.sub(&drho_b).l2_norm(),
        momentum: dm_a.sub(&dm_b).l2_norm(),
        scale: dm_a.l2_norm(),
    })
}

/// Discrete `L^2` norm of the transform-consistency difference.
pub fn transform_residual(model: &Model, state: &State, c: f64) -> Result<f64> {
    Ok(transform_residual_parts(model, state, c)?.total())
}

/// Time-dependent source terms added to both equations (used for manufactured solutions).
pub trait Forcing {
    fn eval(&self, grid: &PeriodicGrid, t: f64) -> (ScalarField, VectorField);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub cfl_safety: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub positivity_floor: f64,
    /// Use this uniform step (rounded so it divides `t_end`) instead of the stability bound.
    pub dt_fixed: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            cfl_safety: 0.3,
            dt_max: f64::INFINITY,
            t_end: 0.05,
            positivity_floor: 1e-10,
            dt_fixed: None,
        }
    }
}

impl StepControl {
    pub fn with_t_end(t_end: f64) -> Self {
        Self {
            t_end,
            ..Self::default()
        }
    }

    /// Largest uniform step not exceeding `dt` that divides `t_end`.
    pub fn uniform_dt(&self, dt: f64) -> f64 {
        if self.t_end <= 0.0 {
            return dt;
        }
        self.t_end / (self.t_end / dt).ceil()
    }
}

/// Spectral-radius step bound for classical RK4.
///
/// With `k = pi/dx` the explicit rates are advection `(|u| + c_s) k`, viscous
/// diffusion `(2 nu + c) max h' k^2`, dispersion `kappa max h' k^2` and damping
/// `max ptilde/rho`; RK4 is stable for `dt * rate` up to about 2.8.
pub fn stable_dt(model: &Model, state: &State, safety: f64) -> f64 {
    let grid = state.grid();
    let k = grid.k_max();
    let co = &model.coeffs;
    let gamma = model.params.gamma;
    let u = state.velocity();
    let umax = u.norm_sq().max().sqrt();
    let mut cs2: f64 = 0.0;
    let mut hp_max: f64 = 0.0;
    let mut damp: f64 = 0.0;
    for &r in state.rho.values() {
        let hp = co.h_prime(r);
        hp_max = hp_max.max(hp);
        cs2 = cs2.max(gamma * r.powf(gamma - 1.0) + co.p_prime(r));
        damp = damp.max(co.ptilde(r) / r);
    }
    let c = state.formulation.c();
    let rate = (umax + cs2.max(0.0).sqrt()) * k
        + (2.0 * model.params.nu + c) * hp_max * k * k
        + model.params.kappa * hp_max * k * k
        + damp;
    safety * 2.8 / rate
}

#[derive(Clone)]
struct Stage {
    rho: ScalarField,
    mom: VectorField,
}

fn eval_rhs(
    model: &Model,
    formulation: Formulation,
    s: &Stage,
    t: f64,
    forcing: Option<&dyn Forcing>,
) -> Result<Stage> {
    let (mut drho, mut dm) = match formulation {
        Formulation::Primitive => primitive_rhs(model, &s.rho, &s.mom, t)?,
        Formulation::Effective(c) => effective_rhs(model, &s.rho, &s.mom, c, t)?,
    };
    if let Some(f) = forcing {
        let (fr, fm) = f.eval(s.rho.grid(), t);
        drho.axpy(1.0, &fr);
        dm.axpy(1.0, &fm);
    }
    Ok(Stage { rho: drho, mom: dm })
}

fn stage_plus(base: &Stage, dt: f64, k: &Stage) -> Stage {
    let mut out = base.clone();
    out.rho.axpy(dt, &k.rho);
    out.mom.axpy(dt, &k.mom);
    out
}

fn check_floor(rho: &ScalarField, floor: f64, t: f64) -> Result<()> {
    require_positive(rho, floor, t)
}

/// One classical RK4 step of size `dt`.
pub fn step_with_dt(
    model: &Model,
    state: &State,
    dt: f64,
    floor: f64,
    forcing: Option<&dyn Forcing>,
) -> Result<State> {
    let f = state.formulation;
    let t = state.time;
    let y = Stage {
        rho: state.rho.clone(),
        mom: state.mom.clone(),
    };
    let k1 = eval_rhs(model, f, &y, t, forcing)?;
    let y2 = stage_plus(&y, 0.5 * dt, &k1);
    check_floor(&y2.rho, floor, t + 0.5 * dt)?;
    let k2 = eval_rhs(model, f, &y2, t + 0.5 * dt, forcing)?;
    let y3 = stage_plus(&y, 0.5 * dt, &k2);
    check_floor(&y3.rho, floor, t + 0.5 * dt)?;
    let k3 = eval_rhs(model, f, &y3, t + 0.5 * dt, forcing)?;
    let y4 = stage_plus(&y, dt, &k3);
    check_floor(&y4.rho, floor, t + dt)?;
    let k4 = eval_rhs(model, f, &y4, t + dt, forcing)?;

    let mut rho = y.rho;
    let mut mom = y.mom;
    for (w, k) in [(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)] {
        rho.axpy(dt * w / 6.0, &k.rho);
        mom.axpy(dt * w / 6.0, &k.mom);
    }
    check_floor(&rho, floor, t + dt)?;
    mom.check_finite()?;
    Ok(State {
        rho,
        mom,
        formulation: f,
        time: t + dt,
        mass0: state.mass0,
    })
}

/// Step size the controller would take from `state`.
pub fn next_dt(model: &Model, state: &State, control: &StepControl) -> f64 {
    let remaining = control.t_end - state.time;
    let dt = match control.dt_fixed {
        Some(dt) => control.uniform_dt(dt),
        None => stable_dt(model, state, control.cfl_safety).min(control.dt_max),
    };
    if remaining <= dt * (1.0 + 1e-9) {
        remaining
    } else {
        dt
    }
}

/// Advance one step chosen by `control`.
pub fn step(model: &Model, state: &State, control: &StepControl) -> Result<State> {
    let dt = next_dt(model, state, control);
    let min = 1e-12 * control.t_end;
    if !(dt >= min) {
        return Err(QnsError::StepTooSmall { dt, min });
    }
    step_with_dt(model, state, dt, control.positivity_floor, None)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_state: State,
    pub steps: usize,
    pub dt_min: f64,
    pub dt_max: f64,
}

/// Integrate to `control.t_end`, calling `hook(state, step_index)` on the
/// initial state, every `cadence` steps and on the final state.
pub fn run(
    model: &Model,
    initial: State,
    control: &StepControl,
    cadence: usize,
    forcing: Option<&dyn Forcing>,
    hook: &mut dyn FnMut(&State, usize) -> Result<()>,
) -> Result<RunSummary> {
    let cadence = cadence.max(1);
    let mut state = initial;
    hook(&state, 0)?;
    let mut steps = 0;
    let (mut dt_min, mut dt_max) = (f64::INFINITY, 0.0f64);
    let min = 1e-12 * control.t_end;
    while state.time < control.t_end {
        let dt = next_dt(model, &state, control);
        if dt <= 0.0 {
            break;
        }
        if !(dt >= min) {
            return Err(QnsError::StepTooSmall { dt, min });
        }
        state = step_with_dt(model, &state, dt, control.positivity_floor, forcing)?;
        steps += 1;
        dt_min = dt_min.min(dt);
        dt_max = dt_max.max(dt);
        let done = state.time >= control.t_end - 1e-12 * control.t_end.abs();
        if done {
            state.time = control.t_end;
        }
        if steps % cadence == 0 || done {
            hook(&state, steps)?;
        }
    }
    Ok(RunSummary {
        final_state: state,
        steps,
        dt_min: if steps == 0 { 0.0 } else { dt_min },
        dt_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    #[default]
    Cos,
    Sin,
}

/// One Fourier mode `amp * shape(2 pi k.x / L + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub k: Vec<i32>,
    pub amp: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub shape: Shape,
    /// Velocity component the mode feeds (ignored for density modes).
    #[serde(default)]
    pub component: usize,
}

impl Mode {
    fn eval(&self, x: &[f64], length: f64) -> f64 {
        let arg: f64 = self
            .k
            .iter()
            .zip(x)
            .map(|(&k, &x)| 2.0 * std::f64::consts::PI * k as f64 * x / length)
            .sum::<f64>()
            + self.phase;
        self.amp
            * match self.shape {
                Shape::Cos => arg.cos(),
                Shape::Sin => arg.sin(),
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomKind {
    /// Independent random modes per component.
    #[default]
    Band,
    /// Gradient of a random band-limited potential.
    Gradient,
}

/// Seeded random band-limited velocity, rescaled to a given maximum speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomVelocity {
    pub seed: u64,
    pub amplitude: f64,
    pub kmax: u32,
    #[serde(default)]
    pub kind: RandomKind,
}

/// Initial density `a + sum b_k cos(...)` and velocity built from modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub rho_mean: f64,
    #[serde(default)]
    pub rho_modes: Vec<Mode>,
    #[serde(default)]
    pub u_modes: Vec<Mode>,
    #[serde(default)]
    pub random_u: Option<RandomVelocity>,
    /// Required lower bound on the density.
    #[serde(default = "default_rho_min")]
    pub rho_min: f64,
}

fn default_rho_min() -> f64 {
    0.1
}

impl InitialData {
    /// Validate `a - sum |b_k| >= rho_min > 0` and mode shapes.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.rho_min > 0.0) {
            return Err(QnsError::Domain(format!("rho_min must be > 0, got {}", self.rho_min)));
        }
        let lower = self.rho_mean - self.rho_modes.iter().map(|m| m.amp.abs()).sum::<f64>();
        if lower < self.rho_min {
            return Err(QnsError::Domain(format!(
                "initial density lower bound {lower} is below rho_min = {}",
                self.rho_min
            )));
        }
        for m in self.rho_modes.iter().chain(&self.u_modes) {
            if m.k.len() != dim {
                return Err(QnsError::Domain(format!(
                    "mode wavevector {:?} does not have {dim} entries",
                    m.k
                )));
            }
        }
        if let Some(m) = self.u_modes.iter().find(|m| m.component >= dim) {
            return Err(QnsError::Domain(format!(
                "velocity mode component {} out of range for dim {dim}",
                m.component
            )));
        }
        Ok(())
    }

    /// Density at the point `x` of a torus of side `length`.
    pub fn density_at(&self, x: &[f64], length: f64) -> f64 {
        self.rho_mean + self.rho_modes.iter().map(|m| m.eval(x, length)).sum::<f64>()
    }

    /// Mode part of velocity component `comp` at `x`; excludes `random_u`.
    pub fn mode_velocity_at(&self, x: &[f64], comp: usize, length: f64) -> f64 {
        self.u_modes
            .iter()
            .filter(|m| m.component == comp)
            .map(|m| m.eval(x, length))
            .sum()
    }

    pub fn density(&self, grid: &PeriodicGrid) -> ScalarField {
        let l = grid.length();
        ScalarField::from_fn(grid, |x| self.density_at(x, l))
    }

    pub fn velocity(&self, grid: &PeriodicGrid) -> VectorField {
        let l = grid.length();
        let d = grid.dim();
        let mut comps: Vec<ScalarField> = (0..d)
            .map(|i| {
                ScalarField::from_fn(grid, |x| {
                    self.u_modes
                        .iter()
                        .filter(|m| m.component == i)
                        .map(|m| m.eval(x, l))
                        .sum()
                })
            })
            .collect();
        if let Some(r) = &self.random_u {
            let extra = random_velocity(grid, r);
            for (c, e) in comps.iter_mut().zip(extra.comps()) {
                c.axpy(1.0, e);
            }
        }
        VectorField::new(comps).expect("dim components")
    }

    /// Primitive state at time 0.
    pub fn primitive_state(&self, grid: &PeriodicGrid) -> Result<State> {
        self.validate(grid.dim())?;
        let rho = self.density(grid);
        let mom = self.velocity(grid).mul_scalar(&rho);
        State::primitive(rho, mom, 0.0)
    }
}

fn random_modes(rng: &mut ChaCha8Rng, d: usize, kmax: i32) -> Vec<Mode> {
    let mut modes = Vec::new();
    let mut k = vec![-kmax; d];
    loop {
        let nonzero = k.iter().any(|&v| v != 0);
        let norm2: i32 = k.iter().map(|v| v * v).sum();
        if nonzero && norm2 <= kmax * kmax {
            let decay = 1.0 / (1.0 + norm2 as f64);
            modes.push(Mode {
                k: k.clone(),
                amp: rng.gen_range(-1.0..1.0) * decay,
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
                shape: Shape::Cos,
                component: 0,
            });
        }
        let mut a = d;
        loop {
            if a == 0 {
                return modes;
            }
            a -= 1;
            k[a] += 1;
            if k[a] <= kmax {
                break;
            }
            k[a] = -kmax;
        }
    }
}

fn random_velocity(grid: &PeriodicGrid, spec: &RandomVelocity) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = grid.dim();
    let l = grid.length();
    let kmax = spec.kmax.max(1) as i32;
    let raw = match spec.kind {
        RandomKind::Band => VectorField::new(
            (0..d)
                .map(|_| {
                    let modes = random_modes(&mut rng, d, kmax);
                    ScalarField::from_fn(grid, |x| modes.iter().map(|m| m.eval(x, l)).sum())
                })
                .collect(),
        )
        .expect("dim components"),
        RandomKind::Gradient => {
            let modes = random_modes(&mut rng, d, kmax);
            let psi = ScalarField::from_fn(grid, |x| modes.iter().map(|m| m.eval(x, l)).sum());
            grad_unchecked(&psi)
        }
    };
    let peak = raw.norm_sq().max().sqrt();
    if peak > 0.0 {
        raw.scale(spec.amplitude / peak)
    } else {
        raw
    }
}
