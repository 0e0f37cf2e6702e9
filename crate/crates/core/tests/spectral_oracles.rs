//! Spectral calculus against independent oracles: closed-form derivatives,
//! naive DFT convolution, Parseval and summation by parts.

use std::f64::consts::TAU;

use proptest::prelude::*;
use qns_core::fields::{
    antisym_grad, dealiased_product, div, grad, grad_vec, integrate, laplacian, sym_grad,
    PeriodicGrid, ScalarField, VectorField,
};

fn field(grid: &PeriodicGrid, data: Vec<f64>) -> ScalarField {
    ScalarField::new(grid, data).unwrap()
}

#[test]
fn derivative_of_non_polynomial_profile_matches_closed_form() {
    // d/dx exp(sin 2 pi x) = 2 pi cos(2 pi x) exp(sin 2 pi x)
    let g = PeriodicGrid::new(1, 64, 1.0).unwrap();
    let f = ScalarField::from_fn(&g, |x| (TAU * x[0]).sin().exp());
    let exact = ScalarField::from_fn(&g, |x| TAU * (TAU * x[0]).cos() * (TAU * x[0]).sin().exp());
    let d = grad(&f).unwrap();
    assert!(d.comp(0).sub(&exact).max_abs() < 1e-11);
}

#[test]
fn spectral_derivative_agrees_with_sixth_order_differences() {
    let n = 512;
    let g = PeriodicGrid::new(1, n, 1.0).unwrap();
    let f = ScalarField::from_fn(&g, |x| 1.0 / (2.0 + (TAU * x[0]).cos()));
    let v = f.values();
    let h = 1.0 / n as f64;
    let at = |i: isize| v[i.rem_euclid(n as isize) as usize];
    let fd: Vec<f64> = (0..n as isize)
        .map(|i| {
            (45.0 * (at(i + 1) - at(i - 1)) - 9.0 * (at(i + 2) - at(i - 2)) + (at(i + 3) - at(i - 3)))
                / (60.0 * h)
        })
        .collect();
    let d = grad(&f).unwrap();
    assert!(d.comp(0).sub(&field(&g, fd)).max_abs() < 1e-9);
}

#[test]
fn second_derivatives_in_two_dimensions() {
    let g = PeriodicGrid::new(2, 32, 2.0).unwrap();
    let w = TAU / 2.0;
    let f = ScalarField::from_fn(&g, |x| (w * x[0]).sin() * (2.0 * w * x[1]).cos());
    let exact = f.scale(-5.0 * w * w);
    assert!(laplacian(&f).unwrap().sub(&exact).max_abs() < 1e-10);
}

/// Spectrum of a 1D signal by direct summation, indexed by signed mode.
fn naive_dft(v: &[f64]) -> Vec<(i64, f64, f64)> {
    let n = v.len() as i64;
    (-(n / 2) + 1..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &x) in v.iter().enumerate() {
                let a = -TAU * (k * j as i64) as f64 / n as f64;
                re += x * a.cos();
                im += x * a.sin();
            }
            (k, re / n as f64, im / n as f64)
        })
        .collect()
}

#[test]
fn dealiased_product_equals_truncated_exact_convolution() {
    let n = 32usize;
    let g = PeriodicGrid::new(1, n, 1.0).unwrap();
    let a = ScalarField::from_fn(&g, |x| (TAU * x[0]).sin() + 0.3 * (5.0 * TAU * x[0]).cos() + 0.1 * (11.0 * TAU * x[0]).sin());
    let b = ScalarField::from_fn(&g, |x| 0.5 + (3.0 * TAU * x[0]).cos() - 0.2 * (9.0 * TAU * x[0]).sin());
    let sa = naive_dft(a.values());
    let sb = naive_dft(b.values());
    // exact product coefficients, keeping the Nyquist mode of each factor as a single cosine
    let half = |s: &[(i64, f64, f64)], k: i64| -> (f64, f64) {
        let nn = n as i64;
        s.iter()
            .find(|(m, _, _)| *m == k || (k.abs() == nn / 2 && m.abs() == nn / 2))
            .map(|&(m, re, im)| if m.abs() == nn / 2 { (re / 2.0, im / 2.0) } else { (re, im) })
            .unwrap_or((0.0, 0.0))
    };
    let band = (n / 3) as i64;
    let mut expect = vec![0.0; n];
    for k in -band..=band {
        let (mut re, mut im) = (0.0, 0.0);
        for p in -(n as i64)..=(n as i64) {
            let (ar, ai) = if p.abs() <= n as i64 / 2 { half(&sa, p) } else { (0.0, 0.0) };
            let q = k - p;
            let (br, bi) = if q.abs() <= n as i64 / 2 { half(&sb, q) } else { (0.0, 0.0) };
            re += ar * br - ai * bi;
            im += ar * bi + ai * br;
        }
        for (j, e) in expect.iter_mut().enumerate() {
            let ang = TAU * (k * j as i64) as f64 / n as f64;
            *e += re * ang.cos() - im * ang.sin();
        }
    }
    let got = dealiased_product(&a, &b).unwrap();
    assert!(got.sub(&field(&g, expect)).max_abs() < 1e-13);
}

fn samples(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval(data in samples(32)) {
        let g = PeriodicGrid::new(1, 32, 1.5).unwrap();
        let f = field(&g, data);
        let spec = g.forward(f.values());
        let energy: f64 = spec.iter().enumerate().map(|(s, c)| g.parseval_weight(s) * c.norm_sqr()).sum();
        let lhs = integrate(&f.mul(&f));
        prop_assert!((lhs - g.volume() * energy).abs() <= 1e-13 * (1.0 + lhs));
    }

    #[test]
    fn summation_by_parts(a in samples(256), b in samples(256)) {
        let g = PeriodicGrid::new(2, 16, 1.0).unwrap();
        let (f, h) = (field(&g, a), field(&g, b));
        let (gf, gh) = (grad(&f).unwrap(), grad(&h).unwrap());
        for axis in 0..2 {
            let lhs = integrate(&f.mul(gh.comp(axis)));
            let rhs = -integrate(&gf.comp(axis).mul(&h));
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn div_grad_is_laplacian(data in samples(256)) {
        let g = PeriodicGrid::new(2, 16, 1.0).unwrap();
        let f = field(&g, data);
        let a = div(&grad(&f).unwrap()).unwrap();
        let b = laplacian(&f).unwrap();
        prop_assert!(a.sub(&b).max_abs() <= 1e-10 * (1.0 + b.max_abs()));
    }

    #[test]
    fn symmetric_and_antisymmetric_parts_split_the_gradient(u in samples(256), v in samples(256)) {
        let g = PeriodicGrid::new(2, 16, 1.0).unwrap();
        let w = VectorField::new(vec![field(&g, u), field(&g, v)]).unwrap();
        let full = grad_vec(&w).unwrap().norm_sq();
        let parts = sym_grad(&w).unwrap().norm_sq().add(&antisym_grad(&w).unwrap().norm_sq());
        prop_assert!(full.sub(&parts).max_abs() <= 1e-10 * (1.0 + full.max_abs()));
    }

    #[test]
    fn trigonometric_polynomials_differentiate_exactly(c in prop::collection::vec(-1.0f64..1.0, 8)) {
        let g = PeriodicGrid::new(1, 32, 1.0).unwrap();
        let f = ScalarField::from_fn(&g, |x| {
            (1..=4).map(|k| c[2 * k - 2] * (TAU * k as f64 * x[0]).cos() + c[2 * k - 1] * (TAU * k as f64 * x[0]).sin()).sum()
        });
        let exact = ScalarField::from_fn(&g, |x| {
            (1..=4)
                .map(|k| {
                    let w = TAU * k as f64;
                    w * (-c[2 * k - 2] * (w * x[0]).sin() + c[2 * k - 1] * (w * x[0]).cos())
                })
                .sum()
        });
        prop_assert!(grad(&f).unwrap().comp(0).sub(&exact).max_abs() <= 1e-12);
    }
}
