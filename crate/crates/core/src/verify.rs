//! Identity and consistency checkers producing [`IdentityReport`]s.
//!
//! Grid-based checks evaluate both sides of a continuum identity spectrally
//! at several resolutions. Discrepancies are normalized as
//! `|a - b| / max(1, |a|, |b|)` so that they read as relative errors for large
//! fields and absolute errors for small ones.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coeffs::{canonical_f_terms, canonical_p_terms, CoefficientSet, PowerTerm};
use crate::dynamics::{transform_residual_parts, Formulation, Model, State};
use crate::error::{QnsError, Result};
use crate::fields::{
    div_tensor, grad, grad_vec, hessian, integrate, laplacian, vector_laplacian, PeriodicGrid,
    ScalarField, TensorField, VectorField,
};
use crate::params::{epsilon_f, ModelParams};
use crate::tensors::{
    bohm_div_k, capillary_flux, div_k_form_a, div_k_form_b, div_k_form_c, BohmForm,
};

/// Scalar profile on the unit-length torus.
pub type Profile<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);
/// Vector profile: `(x, component) -> value`.
pub type VectorProfile<'a> = &'a (dyn Fn(&[f64], usize) -> f64 + Sync);

/// Discrepancy at one resolution (or one sample set for pointwise checks).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Level {
    pub n: usize,
    pub l2: f64,
    pub linf: f64,
}

/// Canonical-over-printed amplitude ratio of one closed-form term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeFlag {
    pub term: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub name: String,
    pub params: ModelParams,
    pub tolerance: f64,
    pub levels: Vec<Level>,
    /// Coarse-over-fine `l2` ratio per grid doubling; only with three or more levels.
    pub reductions: Option<Vec<f64>>,
    /// Statistic compared against `tolerance` when the check is not a discrepancy.
    pub observed: Option<f64>,
    pub flags: Vec<AmplitudeFlag>,
    pub detail: String,
    pub pass: bool,
}

impl IdentityReport {
    fn from_levels(name: &str, params: &ModelParams, tolerance: f64, levels: Vec<Level>) -> Self {
        let reductions = (levels.len() >= 3).then(|| {
            levels
                .windows(2)
                .map(|w| w[0].l2 / w[1].l2.max(f64::MIN_POSITIVE))
                .collect()
        });
        let pass = levels
            .last()
            .is_some_and(|l| l.l2 <= tolerance && l.linf.is_finite());
        Self {
            name: name.to_string(),
            params: *params,
            tolerance,
            levels,
            reductions,
            observed: None,
            flags: Vec::new(),
            detail: String::new(),
            pass,
        }
    }

    /// `l2` at the finest level.
    pub fn finest(&self) -> f64 {
        self.levels.last().map_or(f64::NAN, |l| l.l2)
    }
}

fn rel(diff: f64, a: f64, b: f64) -> f64 {
    diff / 1f64.max(a).max(b)
}

fn compare_vectors(n: usize, a: &VectorField, b: &VectorField) -> Level {
    let d = a.sub(b);
    Level {
        n,
        l2: rel(d.l2_norm(), a.l2_norm(), b.l2_norm()),
        linf: rel(d.max_abs(), a.max_abs(), b.max_abs()),
    }
}

fn grid_for(params: &ModelParams, n: usize) -> Result<PeriodicGrid> {
    PeriodicGrid::new(params.dim, n, 1.0)
}

fn vector_from(grid: &PeriodicGrid, u: VectorProfile) -> Result<VectorField> {
    VectorField::new(
        (0..grid.dim())
            .map(|i| ScalarField::from_fn(grid, |x| u(x, i)))
            .collect(),
    )
}

/// Pairwise agreement of the three capillarity divergence forms.
pub fn check_form_k(
    rho: Profile,
    params: &ModelParams,
    resolutions: &[usize],
    tolerance: f64,
) -> Result<Vec<IdentityReport>> {
    let co = CoefficientSet::new(params)?;
    let mut pairs: [Vec<Level>; 3] = Default::default();
    for &n in resolutions {
        let grid = grid_for(params, n)?;
        let r = ScalarField::from_fn(&grid, rho);
        let a = div_k_form_a(&r, &co)?;
        let b = div_k_form_b(&r, &co)?;
        let c = div_k_form_c(&r, &co)?;
        pairs[0].push(compare_vectors(n, &a, &b));
        pairs[1].push(compare_vectors(n, &b, &c));
        pairs[2].push(compare_vectors(n, &a, &c));
    }
    let [ab, bc, ac] = pairs;
    Ok(vec![
        IdentityReport::from_levels("formK A-B", params, tolerance, ab),
        IdentityReport::from_levels("formK B-C", params, tolerance, bc),
        IdentityReport::from_levels("formK A-C", params, tolerance, ac),
    ])
}

/// The three unregularized quantum-term forms, and the regularized form C
/// evaluated at `eps = 0` against the conservative quantum form.
pub fn check_bohm(
    rho: Profile,
    params: &ModelParams,
    resolutions: &[usize],
    tolerance: f64,
) -> Result<Vec<IdentityReport>> {
    let p0 = params.with_eps(0.0);
    let co = CoefficientSet::new(&p0)?;
    let mut pairs: [Vec<Level>; 3] = Default::default();
    for &n in resolutions {
        let grid = grid_for(params, n)?;
        let r = ScalarField::from_fn(&grid, rho);
        let pot = bohm_div_k(&r, BohmForm::Potential)?;
        let log = bohm_div_k(&r, BohmForm::LogHessian)?;
        let cons = bohm_div_k(&r, BohmForm::Conservative)?;
        let reg = div_k_form_c(&r, &co)?;
        pairs[0].push(compare_vectors(n, &pot, &log));
        pairs[1].push(compare_vectors(n, &log, &cons));
        pairs[2].push(compare_vectors(n, &reg, &cons));
    }
    let [a, b, c] = pairs;
    Ok(vec![
        IdentityReport::from_levels("quantum potential-loghessian", &p0, tolerance, a),
        IdentityReport::from_levels("quantum loghessian-conservative", &p0, tolerance, b),
        IdentityReport::from_levels("quantum reduction eps=0", &p0, tolerance, c),
    ])
}

/// Both sides of the two product-rule identities behind the effective-velocity
/// transform, plus the full right-hand-side consistency of the two formulations.
///
/// * `c div(rho u ⊗ grad phi + rho grad phi ⊗ u) = c lap(h u) - 2c div(h Du) + c grad div(h u)`
/// * `c^2 div(rho grad phi ⊗ grad phi) = c^2 lap(h grad phi) - c^2 div(h hess phi)`
pub fn check_transform_identities(
    rho: Profile,
    u: VectorProfile,
    params: &ModelParams,
    c: f64,
    resolutions: &[usize],
    tolerance: f64,
) -> Result<Vec<IdentityReport>> {
    let model = Model::new(*params)?;
    model.check_c(c)?;
    let co = &model.coeffs;
    let mut id2 = Vec::new();
    let mut id3 = Vec::new();
    let mut rhs = Vec::new();
    for &n in resolutions {
        let grid = grid_for(params, n)?;
        let r = ScalarField::from_fn(&grid, rho);
        let uf = vector_from(&grid, u)?;
        let h = r.map(|x| co.h(x));
        let phi = r.map(|x| co.phi(x));
        let gphi = grad(&phi)?;
        let rg = gphi.mul_scalar(&r);

        let lhs2 = div_tensor(&TensorField::outer(&uf, &rg).add(&TensorField::outer(&rg, &uf)))?
            .scale(c);
        let hu = uf.mul_scalar(&h);
        let gu = grad_vec(&uf)?;
        let du = gu.add(&gu.transpose()).scale(0.5);
        let mut rhs2 = vector_laplacian(&hu)?;
        rhs2.axpy(-2.0, &div_tensor(&du.mul_scalar(&h))?);
        rhs2.axpy(1.0, &grad(&crate::fields::div(&hu)?)?);
        id2.push(compare_vectors(n, &lhs2, &rhs2.scale(c)));

        let c2 = c * c;
        let lhs3 = div_tensor(&TensorField::outer(&rg, &gphi))?.scale(c2);
        let mut rhs3 = vector_laplacian(&gphi.mul_scalar(&h))?;
        rhs3.axpy(-1.0, &div_tensor(&hessian(&phi)?.mul_scalar(&h))?);
        id3.push(compare_vectors(n, &lhs3, &rhs3.scale(c2)));

        let state = State::primitive(r.clone(), uf.mul_scalar(&r), 0.0)?;
        let t = transform_residual_parts(&model, &state, c)?;
        let l2 = rel(t.total(), t.scale, t.scale);
        rhs.push(Level { n, l2, linf: l2 });
    }
    Ok(vec![
        IdentityReport::from_levels("transform id2", params, tolerance, id2),
        IdentityReport::from_levels("transform id3", params, tolerance, id3),
        IdentityReport::from_levels("transform rhs", params, tolerance, rhs),
    ])
}

/// Closed forms as printed in the source derivation, kept only to measure
/// their disagreement with the regenerated canonical forms.
mod printed {
    use crate::coeffs::PowerTerm;

    pub fn p_terms(eps: f64, gamma: f64, mu: f64) -> [PowerTerm; 6] {
        let e2 = eps * eps;
        let e3 = e2 * eps;
        let a = 1.0 / e2;
        let t = |coef: f64, exponent: f64| PowerTerm { coef, exponent };
        [
            t(mu * e2, a),
            t(e3 * mu * 7.0 / (8.0 - e2), a - 0.125),
            t(e3 * mu * gamma / (1.0 + e2 * (gamma - 1.0)), a + gamma - 1.0),
            t(-mu * e2, -a),
            t(-e3 * mu * 7.0 / (e2 + 8.0), -a - 0.125),
            t(-e3 * gamma / (1.0 - e2 * (gamma - 1.0)), -a + gamma - 1.0),
        ]
    }

    pub fn f_terms(eps: f64, gamma: f64, mu: f64) -> [PowerTerm; 6] {
        let e2 = eps * eps;
        let e4 = e2 * e2;
        let e5 = e4 * eps;
        let a = 1.0 / e2;
        let t = |coef: f64, exponent: f64| PowerTerm { coef, exponent };
        [
            t(mu * e4 / (1.0 - e2), a),
            t(e5 * mu * 7.0 / ((8.0 - e2) * (8.0 - 9.0 * e2)), a - 0.125),
            t(
                e5 * mu * gamma / ((1.0 + e2 * (gamma - 1.0)) * (1.0 + e2 * (gamma - 2.0))),
                a + gamma - 1.0,
            ),
            t(e2 * mu / (e2 + 1.0), -a),
            t(e5 * mu * 7.0 * 8.0 / ((8.0 + e2) * (9.0 + 8.0 * e2)), -a - 0.125),
            t(
                e5 * mu * gamma / ((1.0 - e2 * (gamma - 1.0)) * (1.0 - e2 * (gamma - 2.0))),
                -a + gamma - 1.0,
            ),
        ]
    }
}

/// Terms whose printed amplitude disagrees with the canonical one, with the
/// expected canonical/printed ratio.
pub fn documented_amplitude_ratios(eps: f64, mu: f64) -> Vec<(&'static str, f64)> {
    let e2 = eps * eps;
    vec![
        ("p6", mu),
        ("f2", 8.0),
        ("f4", e2),
        ("f5", (9.0 + 8.0 * e2) / (8.0 + 9.0 * e2)),
    ]
}

fn integrate_1d(f: impl Fn(f64) -> f64, a: f64, b: f64, scale: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    quadrature::double_exponential::integrate(f, a, b, 1e-15 * scale.max(f64::MIN_POSITIVE))
        .integral
}

fn sample_points(range: (f64, f64), samples: usize) -> Vec<f64> {
    let (lo, hi) = range;
    let n = samples.max(2);
    (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            (lo.ln() + s * (hi.ln() - lo.ln())).exp()
        })
        .collect()
}

/// (a) canonical `p` against `p(1) + ∫_1^rho mu ptilde h'/s ds`;
/// (b) canonical `f` against `rho (f(1) + ∫_1^rho p/s^2 ds)`;
/// (c) term-by-term canonical/printed amplitude ratios.
///
/// Parts (a) and (b) report `max |a - b| / max |a|` over log-spaced samples.
pub fn check_pf_closed_forms(
    params: &ModelParams,
    rho_range: (f64, f64),
    samples: usize,
    tolerance: f64,
) -> Result<Vec<IdentityReport>> {
    let ef = epsilon_f(params.gamma)?;
    if !(params.eps > 0.0 && params.eps < ef) {
        return Err(QnsError::Domain(format!(
            "closed forms need 0 < eps < {ef:.6}, got {}",
            params.eps
        )));
    }
    if !(rho_range.0 > 0.0 && rho_range.1 >= rho_range.0) {
        return Err(QnsError::Domain(format!("bad density range {rho_range:?}")));
    }
    let co = CoefficientSet::new(params)?;
    let mu = co.mu;
    let pts = sample_points(rho_range, samples);

    let dp = |s: f64| mu * co.ptilde(s) * co.h_prime(s) / s;
    let p_scale = pts.iter().fold(0.0f64, |m, &r| m.max(co.p(r).abs()));
    let f_scale = pts.iter().fold(0.0f64, |m, &r| m.max(co.f(r).abs()));
    let (mut pa_max, mut fb_max) = (0.0f64, 0.0f64);
    for &r in &pts {
        let p_quad = co.p(1.0) + integrate_1d(dp, 1.0, r, p_scale);
        pa_max = pa_max.max((co.p(r) - p_quad).abs());
        let f_voc = r * (co.f(1.0) + integrate_1d(|s| co.p(s) / (s * s), 1.0, r, f_scale));
        fb_max = fb_max.max((co.f(r) - f_voc).abs());
    }
    let part = |name: &str, err: f64, scale: f64| {
        let v = err / scale.max(f64::MIN_POSITIVE);
        let mut rep = IdentityReport::from_levels(
            name,
            params,
            tolerance,
            vec![Level {
                n: pts.len(),
                l2: v,
                linf: v,
            }],
        );
        rep.detail = format!("rho in [{}, {}], scale {scale:.3e}", rho_range.0, rho_range.1);
        rep
    };
    let a = part("pf (a) p quadrature", pa_max, p_scale);
    let b = part("pf (b) f variation of constants", fb_max, f_scale);

    let mut flags = Vec::new();
    let compare = |label: char, can: &[PowerTerm; 6], pr: &[PowerTerm; 6], flags: &mut Vec<_>| {
        for (i, (x, y)) in can.iter().zip(pr).enumerate() {
            debug_assert_eq!(x.exponent, y.exponent);
            let ratio = x.coef / y.coef;
            if (ratio - 1.0).abs() > 1e-12 {
                flags.push(AmplitudeFlag {
                    term: format!("{label}{}", i + 1),
                    ratio,
                });
            }
        }
    };
    let (eps, gamma) = (params.eps, params.gamma);
    compare(
        'p',
        &canonical_p_terms(eps, gamma, mu),
        &printed::p_terms(eps, gamma, mu),
        &mut flags,
    );
    compare(
        'f',
        &canonical_f_terms(eps, gamma, mu),
        &printed::f_terms(eps, gamma, mu),
        &mut flags,
    );
    let expected = documented_amplitude_ratios(eps, mu);
    let matches = flags.len() == expected.len()
        && flags
            .iter()
            .zip(&expected)
            .all(|(f, (t, r))| f.term == *t && (f.ratio - r).abs() <= 1e-12 * r.abs());
    let mut detail = String::new();
    for f in &flags {
        let _ = write!(detail, "{}: canonical/printed = {:.12}; ", f.term, f.ratio);
    }
    let c = IdentityReport {
        name: "pf (c) printed forms".into(),
        params: *params,
        tolerance: 1e-12,
        levels: Vec::new(),
        reductions: None,
        observed: Some(flags.len() as f64),
        flags,
        detail: detail.trim_end().to_string(),
        pass: matches,
    };
    Ok(vec![a, b, c])
}

/// `chi(t) Phi(x)` with `chi(t) = cos^2(pi t / (2T))` and
/// `Phi(x) = cos(2 pi k.x / L + phase)`, applied to momentum component `component`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFunction {
    pub k: Vec<i32>,
    pub phase: f64,
    pub component: usize,
}

impl TestFunction {
    fn spatial(&self, grid: &PeriodicGrid) -> ScalarField {
        let l = grid.length();
        ScalarField::from_fn(grid, |x| {
            let arg: f64 = x.iter().zip(&self.k).map(|(x, &k)| k as f64 * x).sum::<f64>();
            (std::f64::consts::TAU * arg / l + self.phase).cos()
        })
    }

    fn chi(t: f64, t_final: f64) -> (f64, f64) {
        let w = std::f64::consts::PI / (2.0 * t_final);
        let c = (w * t).cos();
        let s = (w * t).sin();
        (c * c, -2.0 * w * c * s)
    }
}

/// Default set of three test functions for dimension `dim`.
pub fn default_test_functions(dim: usize) -> Vec<TestFunction> {
    let k = |a: i32, b: i32| {
        let mut v = vec![0; dim];
        v[0] = a;
        if dim > 1 {
            v[1] = b;
        }
        v
    };
    vec![
        TestFunction {
            k: k(1, 0),
            phase: 0.3,
            component: 0,
        },
        TestFunction {
            k: k(2, 1),
            phase: 1.1,
            component: dim - 1,
        },
        TestFunction {
            k: k(1, 1),
            phase: -0.7,
            component: 0,
        },
    ]
}

/// `(∫ rho psi_t + m.grad psi, ∫ m.psi_t + F : grad psi - ptilde u.psi)` at one time,
/// where `F = m ⊗ u - 2 nu (h Du + g div(u) I) + (rho^gamma + p) I - kappa^2 (h' lap(h) I - 4 a ⊗ a)`.
fn weak_integrands(
    model: &Model,
    state: &State,
    tf: &TestFunction,
    phi: &ScalarField,
    gphi: &VectorField,
    chi: (f64, f64),
) -> Result<(f64, f64)> {
    let co = &model.coeffs;
    let p = &model.params;
    let rho = &state.rho;
    let m = &state.mom;
    let u = state.velocity();
    let d = rho.grid().dim();

    let cont = chi.1 * integrate(&rho.mul(phi)) + chi.0 * integrate(&m.dot(gphi));

    let h = rho.map(|r| co.h(r));
    let g = rho.map(|r| co.g(r));
    let gu = grad_vec(&u)?;
    let du = gu.add(&gu.transpose()).scale(0.5);
    let divu = du.trace();
    let a = capillary_flux(rho, co);
    let mut iso = rho.map(|r| r.powf(p.gamma) + co.p(r));
    iso.axpy(-2.0 * p.nu, &g.mul(&divu));
    let hp = rho.map(|r| co.h_prime(r));
    iso.axpy(-p.kappa * p.kappa, &hp.mul(&laplacian(&h)?));

    let i = tf.component;
    let mut row = vec![ScalarField::zeros(rho.grid()); d];
    for (j, rj) in row.iter_mut().enumerate() {
        *rj = m.comp(i).mul(u.comp(j));
        rj.axpy(-2.0 * p.nu, &h.mul(du.get(i, j)));
        rj.axpy(4.0 * p.kappa * p.kappa, &a.comp(i).mul(a.comp(j)));
        if i == j {
            rj.axpy(1.0, &iso);
        }
    }
    let mut flux = 0.0;
    for (j, rj) in row.iter().enumerate() {
        flux += integrate(&rj.mul(gphi.comp(j)));
    }
    let damp = integrate(&rho.map(|r| co.ptilde(r)).mul(u.comp(i)).mul(phi));
    let mom = chi.1 * integrate(&m.comp(i).mul(phi)) + chi.0 * (flux - damp);
    Ok((cont, mom))
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Continuity and momentum weak-form residuals of a primitive trajectory
/// ending at time `T` (the last snapshot), for test functions vanishing at `T`.
/// `levels[k]` holds test function `k`: `l2` the continuity and `linf` the
/// momentum residual magnitude.
pub fn check_weak_form(
    model: &Model,
    trajectory: &[State],
    tests: &[TestFunction],
    tolerance: f64,
) -> Result<IdentityReport> {
    if trajectory.len() < 3 {
        return Err(QnsError::InsufficientSnapshots {
            got: trajectory.len(),
        });
    }
    if trajectory.iter().any(|s| s.formulation != Formulation::Primitive) {
        return Err(QnsError::Domain("weak form needs primitive snapshots".into()));
    }
    let grid = trajectory[0].grid().clone();
    let t0 = trajectory[0].time;
    let t_final = trajectory.last().map(|s| s.time).unwrap_or(t0) - t0;
    if !(t_final > 0.0) {
        return Err(QnsError::Domain("trajectory spans no time".into()));
    }
    let times: Vec<f64> = trajectory.iter().map(|s| s.time - t0).collect();
    let mut levels = Vec::with_capacity(tests.len());
    for tf in tests {
        if tf.k.len() != grid.dim() || tf.component >= grid.dim() {
            return Err(QnsError::Domain(format!("test function {tf:?} does not fit the grid")));
        }
        let phi = tf.spatial(&grid);
        let gphi = grad(&phi)?;
        let mut cont = Vec::with_capacity(trajectory.len());
        let mut mom = Vec::with_capacity(trajectory.len());
        for (s, &t) in trajectory.iter().zip(&times) {
            let (c, m) = weak_integrands(model, s, tf, &phi, &gphi, TestFunction::chi(t, t_final))?;
            cont.push(c);
            mom.push(m);
        }
        let s0 = &trajectory[0];
        let rc = integrate(&s0.rho.mul(&phi)) + trapezoid(&times, &cont);
        let rm = integrate(&s0.mom.comp(tf.component).mul(&phi)) + trapezoid(&times, &mom);
        levels.push(Level {
            n: grid.n(),
            l2: rc.abs(),
            linf: rm.abs(),
        });
    }
    let worst = levels
        .iter()
        .fold(0.0f64, |m, l| m.max(l.l2).max(l.linf));
    let mut rep = IdentityReport::from_levels("weak form", &model.params, tolerance, Vec::new());
    rep.levels = levels;
    rep.observed = Some(worst);
    rep.pass = worst <= tolerance;
    rep.detail = format!("{} snapshots over [0, {t_final:e}]", trajectory.len());
    Ok(rep)
}

/// `(h |D|^2 + g (tr D)^2) / (h |D|^2)` for a symmetric `D`.
pub fn coercivity_ratio(co: &CoefficientSet, rho: f64, d: &[f64], dim: usize) -> f64 {
    let norm2: f64 = d.iter().map(|x| x * x).sum();
    let tr: f64 = (0..dim).map(|i| d[i * dim + i]).sum();
    let h = co.h(rho);
    (h * norm2 + co.g(rho) * tr * tr) / (h * norm2)
}

/// Minimum coercivity ratio over random symmetric matrices and densities
/// log-uniform in `[1e-2, 1e2]`; passes when it exceeds 5/8.
pub fn check_stin(params: &ModelParams, samples: usize, seed: u64) -> Result<IdentityReport> {
    let co = CoefficientSet::new(params)?;
    let dim = params.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_ratio = f64::INFINITY;
    let mut m = vec![0.0; dim * dim];
    for _ in 0..samples.max(1) {
        for i in 0..dim {
            for j in i..dim {
                let v: f64 = rng.gen_range(-1.0..1.0);
                m[i * dim + j] = v;
                m[j * dim + i] = v;
            }
        }
        if m.iter().all(|&x| x == 0.0) {
            continue;
        }
        let rho = 10f64.powf(rng.gen_range(-2.0..2.0));
        min_ratio = min_ratio.min(coercivity_ratio(&co, rho, &m, dim));
    }
    Ok(IdentityReport {
        name: format!("coercivity d={dim}"),
        params: *params,
        tolerance: 0.625,
        levels: Vec::new(),
        reductions: None,
        observed: Some(min_ratio),
        flags: Vec::new(),
        detail: format!("min ratio over {samples} samples"),
        pass: min_ratio > 0.625,
    })
}

/// Fixed-width table of reports for terminal output.
pub fn format_table(reports: &[IdentityReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<36} {:>5} {:>6} {:>11} {:>11} {:>11}  {}",
        "identity", "eps", "n", "l2", "linf", "tol", "result"
    );
    for r in reports {
        let status = if r.pass { "PASS" } else { "FAIL" };
        if r.levels.is_empty() {
            let obs = r.observed.map_or("-".to_string(), |v| format!("{v:.4e}"));
            let _ = writeln!(
                out,
                "{:<36} {:>5} {:>6} {:>11} {:>11} {:>11.3e}  {status} {}",
                r.name, r.params.eps, "-", obs, "-", r.tolerance, r.detail
            );
        }
        for (k, l) in r.levels.iter().enumerate() {
            let last = k + 1 == r.levels.len();
            let _ = writeln!(
                out,
                "{:<36} {:>5} {:>6} {:>11.4e} {:>11.4e} {:>11.3e}  {}",
                r.name,
                r.params.eps,
                l.n,
                l.l2,
                l.linf,
                r.tolerance,
                if last { status } else { "" }
            );
        }
        if let Some(red) = &r.reductions {
            let txt: Vec<String> = red.iter().map(|x| format!("{x:.3}")).collect();
            let _ = writeln!(out, "{:<36} reduction per doubling: {}", "", txt.join(", "));
        }
    }
    out
}
