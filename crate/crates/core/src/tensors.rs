//! Viscous stress and capillarity fluxes.
//!
//! The capillarity divergence `div K` has three algebraically equivalent
//! expressions; each is assembled here from its own chain of pointwise
//! evaluations and spectral derivatives so that their mutual agreement is a
//! genuine check rather than a rearrangement of the same numbers:
//!
//! * form A: `2 rho grad( h' div(h' grad sqrt(rho)) / sqrt(rho) )`
//! * form B: `div(h hess(phi)) + grad(g lap(phi))`
//! * form C: `grad(h' lap(h)) - 4 div(a ⊗ a)` with `a = h' grad sqrt(rho)`
//!
//! Form C is conservative and is the one the solver uses.

use crate::coeffs::CoefficientSet;
use crate::error::{QnsError, Result};
use crate::fields::{
    div_tensor_unchecked, div_unchecked, grad_unchecked, grad_vec_unchecked, hessian_unchecked,
    laplacian_unchecked, ScalarField, TensorField, VectorField,
};

/// Fail unless `min(rho) > floor`.
pub fn require_positive(rho: &ScalarField, floor: f64, time: f64) -> Result<()> {
    rho.check_finite()?;
    let min = rho.min();
    if min > floor {
        Ok(())
    } else {
        Err(QnsError::DensityNonPositive { min, floor, time })
    }
}

fn positive(rho: &ScalarField) -> Result<()> {
    require_positive(rho, 0.0, f64::NAN)
}

/// Viscous stress parts `(h Dv, g div(v) I)`.
pub fn viscous_stress(
    rho: &ScalarField,
    v: &VectorField,
    coeffs: &CoefficientSet,
) -> Result<(TensorField, TensorField)> {
    positive(rho)?;
    v.check_finite()?;
    let gv = grad_vec_unchecked(v);
    let dv = gv.add(&gv.transpose()).scale(0.5);
    let h = rho.map(|r| coeffs.h(r));
    let g = rho.map(|r| coeffs.g(r));
    let gdiv = dv.trace().mul(&g);
    Ok((dv.mul_scalar(&h), TensorField::scalar_identity(&gdiv)))
}

/// `a = h'(rho) grad sqrt(rho)`.
pub fn capillary_flux(rho: &ScalarField, coeffs: &CoefficientSet) -> VectorField {
    capillary_flux_with(rho, &rho.map(|r| coeffs.h_prime(r)))
}

/// [`capillary_flux`] with `h'(rho)` already evaluated.
pub(crate) fn capillary_flux_with(rho: &ScalarField, hp: &ScalarField) -> VectorField {
    grad_unchecked(&rho.map(f64::sqrt)).mul_scalar(hp)
}

pub fn div_k_form_a(rho: &ScalarField, coeffs: &CoefficientSet) -> Result<VectorField> {
    positive(rho)?;
    let sq = rho.map(f64::sqrt);
    let hp = rho.map(|r| coeffs.h_prime(r));
    let inner = div_unchecked(&grad_unchecked(&sq).mul_scalar(&hp));
    let q = hp.zip_map(&inner, |a, b| a * b).zip_map(&sq, |a, s| a / s);
    Ok(grad_unchecked(&q).mul_scalar(&rho.scale(2.0)))
}

pub fn div_k_form_b(rho: &ScalarField, coeffs: &CoefficientSet) -> Result<VectorField> {
    positive(rho)?;
    let phi = rho.map(|r| coeffs.phi(r));
    let h = rho.map(|r| coeffs.h(r));
    let g = rho.map(|r| coeffs.g(r));
    let hess = hessian_unchecked(&phi);
    let lap = hess.trace();
    let mut out = div_tensor_unchecked(&hess.mul_scalar(&h));
    out.axpy(1.0, &grad_unchecked(&lap.mul(&g)));
    Ok(out)
}

/// The capillarity tensor `K = h' lap(h) I - 4 a ⊗ a` whose divergence is form C.
pub fn capillarity_tensor(rho: &ScalarField, coeffs: &CoefficientSet) -> Result<TensorField> {
    positive(rho)?;
    let h = rho.map(|r| coeffs.h(r));
    let hp = rho.map(|r| coeffs.h_prime(r));
    let a = capillary_flux(rho, coeffs);
    let iso = TensorField::scalar_identity(&hp.mul(&laplacian_unchecked(&h)));
    Ok(iso.sub(&TensorField::outer(&a, &a).scale(4.0)))
}

pub fn div_k_form_c(rho: &ScalarField, coeffs: &CoefficientSet) -> Result<VectorField> {
    positive(rho)?;
    let h = rho.map(|r| coeffs.h(r));
    let hp = rho.map(|r| coeffs.h_prime(r));
    let a = capillary_flux(rho, coeffs);
    let mut out = grad_unchecked(&hp.mul(&laplacian_unchecked(&h)));
    out.axpy(-4.0, &div_tensor_unchecked(&TensorField::outer(&a, &a)));
    Ok(out)
}

/// Which of the three quantum-term expressions to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BohmForm {
    /// `2 rho grad(lap(sqrt rho)/sqrt rho)`
    Potential,
    /// `div(rho hess(log rho))`
    LogHessian,
    /// `grad(lap rho) - 4 div(grad sqrt rho ⊗ grad sqrt rho)`
    Conservative,
}

/// The unregularized quantum term, built directly with `h = rho`.
pub fn bohm_div_k(rho: &ScalarField, form: BohmForm) -> Result<VectorField> {
    positive(rho)?;
    Ok(match form {
        BohmForm::Potential => {
            let sq = rho.map(f64::sqrt);
            let q = laplacian_unchecked(&sq).zip_map(&sq, |l, s| l / s);
            grad_unchecked(&q).mul_scalar(&rho.scale(2.0))
        }
        BohmForm::LogHessian => {
            let lr = rho.map(f64::ln);
            div_tensor_unchecked(&hessian_unchecked(&lr).mul_scalar(rho))
        }
        BohmForm::Conservative => {
            let gs = grad_unchecked(&rho.map(f64::sqrt));
            let mut out = grad_unchecked(&laplacian_unchecked(rho));
            out.axpy(-4.0, &div_tensor_unchecked(&TensorField::outer(&gs, &gs)));
            out
        }
    })
}
