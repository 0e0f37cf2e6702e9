//! Uniform periodic grids, sampled fields and Fourier spectral calculus.
//!
//! Data are stored row-major with the last axis contiguous. Forward transforms
//! are real-to-complex along the last axis followed by complex transforms along
//! the remaining axes, and are normalized so that the spectral array holds the
//! coefficients of the trigonometric interpolant. Every derivative operator
//! uses the same effective wavenumber, which is zero on the Nyquist mode; this
//! keeps odd derivatives skew-adjoint and makes `div(grad s)` equal
//! `laplacian(s)` to roundoff.

pub mod snapshot;

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{QnsError, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

struct GridInner {
    dim: usize,
    n: usize,
    length: f64,
    /// Number of complex coefficients along the last axis, `n/2 + 1`.
    nh: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
    /// Effective wavenumber per spectral index, one table per axis.
    k_axis: Vec<Vec<f64>>,
    /// `-|k|^2` per spectral index.
    lap_symbol: Vec<f64>,
    /// True where every signed mode satisfies `|m| <= n/3`.
    keep: Vec<bool>,
    padded: OnceLock<PeriodicGrid>,
}

/// Uniform collocation grid on the `dim`-torus with `n` points per axis.
#[derive(Clone)]
pub struct PeriodicGrid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("dim", &self.inner.dim)
            .field("n", &self.inner.n)
            .field("length", &self.inner.length)
            .finish()
    }
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.dim() == other.dim()
                && self.n() == other.n()
                && self.length() == other.length())
    }
}

/// Signed Fourier mode of full-axis index `j`; the Nyquist index maps to `-n/2`.
fn signed_mode(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

impl PeriodicGrid {
    /// Grid with `n` a power of two, `n >= 16`.
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !n.is_power_of_two() || n < 16 {
            return Err(QnsError::Domain(format!(
                "points per axis must be a power of two >= 16, got {n}"
            )));
        }
        Self::build(dim, n, length)
    }

    fn build(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(QnsError::Domain(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if n % 2 != 0 || n < 4 {
            return Err(QnsError::Domain(format!("n must be even, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(QnsError::Domain(format!("length must be > 0, got {length}")));
        }
        let mut rplanner = RealFftPlanner::<f64>::new();
        let mut cplanner = FftPlanner::<f64>::new();
        let nh = n / 2 + 1;
        let spec_len = n.pow(dim as u32 - 1) * nh;
        let k0 = 2.0 * PI / length;
        let cutoff = (n / 3) as i64;

        let mut k_axis = vec![vec![0.0; spec_len]; dim];
        let mut lap_symbol = vec![0.0; spec_len];
        let mut keep = vec![true; spec_len];
        let mut idx = vec![0usize; dim];
        for s in 0..spec_len {
            let mut rem = s;
            for a in (0..dim).rev() {
                let extent = if a == dim - 1 { nh } else { n };
                idx[a] = rem % extent;
                rem /= extent;
            }
            let mut k2 = 0.0;
            for a in 0..dim {
                let m = signed_mode(idx[a], n);
                let nyquist = idx[a] == n / 2;
                let k = if nyquist { 0.0 } else { k0 * m as f64 };
                k_axis[a][s] = k;
                k2 += k * k;
                if m.abs() > cutoff {
                    keep[s] = false;
                }
            }
            lap_symbol[s] = -k2;
        }

        Ok(Self {
            inner: Arc::new(GridInner {
                dim,
                n,
                length,
                nh,
                r2c: rplanner.plan_fft_forward(n),
                c2r: rplanner.plan_fft_inverse(n),
                fft_fwd: cplanner.plan_fft_forward(n),
                fft_inv: cplanner.plan_fft_inverse(n),
                k_axis,
                lap_symbol,
                keep,
                padded: OnceLock::new(),
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn length(&self) -> f64 {
        self.inner.length
    }

    pub fn dx(&self) -> f64 {
        self.inner.length / self.inner.n as f64
    }

    /// Total number of collocation points.
    pub fn len(&self) -> usize {
        self.inner.n.pow(self.inner.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        self.inner.length.powi(self.inner.dim as i32)
    }

    /// Number of stored spectral coefficients.
    pub fn spec_len(&self) -> usize {
        self.inner.n.pow(self.inner.dim as u32 - 1) * self.inner.nh
    }

    /// Largest resolved wavenumber `pi/dx`.
    pub fn k_max(&self) -> f64 {
        PI / self.dx()
    }

    /// Coordinate along `axis` at every collocation point.
    pub fn coords(&self, axis: usize) -> Vec<f64> {
        let (n, d) = (self.n(), self.dim());
        let stride = n.pow((d - 1 - axis) as u32);
        let dx = self.dx();
        (0..self.len())
            .map(|p| ((p / stride) % n) as f64 * dx)
            .collect()
    }

    /// Sample `f(x)` at every collocation point; `x` has `dim` entries.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let (n, d) = (self.n(), self.dim());
        let dx = self.dx();
        let mut x = vec![0.0; d];
        (0..self.len())
            .map(|p| {
                let mut rem = p;
                for a in (0..d).rev() {
                    x[a] = (rem % n) as f64 * dx;
                    rem /= n;
                }
                f(&x)
            })
            .collect()
    }

    /// Effective wavenumbers along `axis`, indexed like the spectral array.
    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.inner.k_axis[axis]
    }

    /// Symbol of the Laplacian, `-|k|^2` with the Nyquist contribution removed.
    pub fn laplacian_symbol(&self) -> &[f64] {
        &self.inner.lap_symbol
    }

    /// Parseval weight of spectral index `s`: 2 for modes whose conjugate twin
    /// along the last axis is not stored, 1 otherwise.
    pub fn parseval_weight(&self, s: usize) -> f64 {
        let j = s % self.inner.nh;
        if j == 0 || j == self.inner.n / 2 {
            1.0
        } else {
            2.0
        }
    }

    /// Spectral coefficients of the trigonometric interpolant.
    pub fn forward(&self, data: &[f64]) -> Vec<Complex64> {
        let g = &*self.inner;
        let (n, nh) = (g.n, g.nh);
        debug_assert_eq!(data.len(), self.len());
        let rows = self.len() / n;
        let mut spec = vec![ZERO; self.spec_len()];
        let mut rbuf = vec![0.0; n];
        let mut scratch = g.r2c.make_scratch_vec();
        for r in 0..rows {
            rbuf.copy_from_slice(&data[r * n..(r + 1) * n]);
            g.r2c
                .process_with_scratch(&mut rbuf, &mut spec[r * nh..(r + 1) * nh], &mut scratch)
                .expect("real FFT buffer sizes are fixed by the grid");
        }
        self.complex_axes(&mut spec, &g.fft_fwd);
        let scale = 1.0 / self.len() as f64;
        for c in spec.iter_mut() {
            *c *= scale;
        }
        spec
    }

    /// Real samples from spectral coefficients. The input is consumed.
    pub fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        let g = &*self.inner;
        let (n, nh) = (g.n, g.nh);
        self.complex_axes(&mut spec, &g.fft_inv);
        let rows = self.len() / n;
        let mut out = vec![0.0; self.len()];
        let mut scratch = g.c2r.make_scratch_vec();
        for r in 0..rows {
            let row = &mut spec[r * nh..(r + 1) * nh];
            row[0].im = 0.0;
            row[nh - 1].im = 0.0;
            g.c2r
                .process_with_scratch(row, &mut out[r * n..(r + 1) * n], &mut scratch)
                .expect("real FFT buffer sizes are fixed by the grid");
        }
        out
    }

    fn complex_axes(&self, spec: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let g = &*self.inner;
        let (n, d, nh) = (g.n, g.dim, g.nh);
        if d == 1 {
            return;
        }
        let mut line = vec![ZERO; n];
        let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
        for a in 0..d - 1 {
            let stride = n.pow((d - 2 - a) as u32) * nh;
            let block = stride * n;
            for base in (0..spec.len()).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = spec[start + i * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (i, v) in line.iter().enumerate() {
                        spec[start + i * stride] = *v;
                    }
                }
            }
        }
    }

    /// `i k_axis` applied to a spectrum.
    pub fn deriv_spec(&self, spec: &[Complex64], axis: usize) -> Vec<Complex64> {
        let k = &self.inner.k_axis[axis];
        spec.iter()
            .zip(k)
            .map(|(c, &k)| Complex64::new(-k * c.im, k * c.re))
            .collect()
    }

    /// Second derivative `-k_a k_b` applied to a spectrum.
    pub fn deriv2_spec(&self, spec: &[Complex64], a: usize, b: usize) -> Vec<Complex64> {
        let ka = &self.inner.k_axis[a];
        let kb = &self.inner.k_axis[b];
        spec.iter()
            .zip(ka.iter().zip(kb))
            .map(|(c, (&ka, &kb))| c * (-ka * kb))
            .collect()
    }

    pub fn laplacian_spec(&self, spec: &[Complex64]) -> Vec<Complex64> {
        spec.iter()
            .zip(&self.inner.lap_symbol)
            .map(|(c, &l)| c * l)
            .collect()
    }

    /// Zero every coefficient outside the 2/3-rule band.
    pub fn truncate_spec(&self, spec: &mut [Complex64]) {
        for (c, &keep) in spec.iter_mut().zip(&self.inner.keep) {
            if !keep {
                *c = ZERO;
            }
        }
    }

    /// Partial derivative of raw samples along `axis`.
    pub fn deriv(&self, data: &[f64], axis: usize) -> Vec<f64> {
        self.inverse(self.deriv_spec(&self.forward(data), axis))
    }

    /// Grid with `3n/2` points per axis used for exact 2/3-band products.
    pub fn padded(&self) -> &PeriodicGrid {
        self.inner.padded.get_or_init(|| {
            Self::build(self.dim(), 3 * self.n() / 2, self.length())
                .expect("padded grid parameters derive from a valid grid")
        })
    }

    /// Copy a spectrum onto a finer grid, splitting Nyquist coefficients
    /// symmetrically so the interpolant is unchanged.
    fn pad_spec(&self, spec: &[Complex64], fine: &PeriodicGrid) -> Vec<Complex64> {
        let (n, d, nh) = (self.n(), self.dim(), self.inner.nh);
        let (nf, nhf) = (fine.n(), fine.inner.nh);
        let mut out = vec![ZERO; fine.spec_len()];
        let mut idx = vec![0usize; d];
        let mut targets: Vec<(usize, f64)> = Vec::with_capacity(8);
        let mut next: Vec<(usize, f64)> = Vec::with_capacity(8);
        for (s, &c) in spec.iter().enumerate() {
            if c == ZERO {
                continue;
            }
            let mut rem = s;
            for a in (0..d).rev() {
                let extent = if a == d - 1 { nh } else { n };
                idx[a] = rem % extent;
                rem /= extent;
            }
            targets.clear();
            targets.push((0, 1.0));
            for a in 0..d {
                let extent_f = if a == d - 1 { nhf } else { nf };
                next.clear();
                let j = idx[a];
                let choices: &[(usize, f64)] = if a == d - 1 {
                    if j == n / 2 {
                        &[(n / 2, 0.5)]
                    } else {
                        &[(j, 1.0)]
                    }
                } else if j == n / 2 {
                    &[(nf - n / 2, 0.5), (n / 2, 0.5)]
                } else if j < n / 2 {
                    &[(j, 1.0)]
                } else {
                    &[(nf - (n - j), 1.0)]
                };
                for &(pos, w) in &targets {
                    for &(jf, wf) in choices {
                        next.push((pos * extent_f + jf, w * wf));
                    }
                }
                std::mem::swap(&mut targets, &mut next);
            }
            for &(pos, w) in &targets {
                out[pos] += c * w;
            }
        }
        out
    }

    /// Restrict a fine-grid spectrum to the 2/3 band of this grid.
    fn restrict_spec(&self, fine_spec: &[Complex64], fine: &PeriodicGrid) -> Vec<Complex64> {
        let (n, d, nh) = (self.n(), self.dim(), self.inner.nh);
        let (nf, nhf) = (fine.n(), fine.inner.nh);
        let mut out = vec![ZERO; self.spec_len()];
        let mut idx = vec![0usize; d];
        for (s, o) in out.iter_mut().enumerate() {
            if !self.inner.keep[s] {
                continue;
            }
            let mut rem = s;
            for a in (0..d).rev() {
                let extent = if a == d - 1 { nh } else { n };
                idx[a] = rem % extent;
                rem /= extent;
            }
            let mut pos = 0;
            for a in 0..d {
                let extent_f = if a == d - 1 { nhf } else { nf };
                let j = idx[a];
                let jf = if a == d - 1 || j < n / 2 { j } else { nf - (n - j) };
                pos = pos * extent_f + jf;
            }
            *o = fine_spec[pos];
        }
        out
    }

    /// Samples of the interpolant of `data` on the padded grid.
    pub fn to_padded(&self, data: &[f64]) -> Vec<f64> {
        let fine = self.padded();
        fine.inverse(self.pad_spec(&self.forward(data), fine))
    }

    /// Spectrum (on this grid) of padded-grid samples, restricted to the 2/3 band.
    pub fn from_padded_spec(&self, fine_data: &[f64]) -> Vec<Complex64> {
        let fine = self.padded();
        self.restrict_spec(&fine.forward(fine_data), fine)
    }

    fn check(&self, other: &PeriodicGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(QnsError::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

fn check_finite(data: &[f64]) -> Result<()> {
    let count = data.iter().filter(|v| !v.is_finite()).count();
    if count == 0 {
        Ok(())
    } else {
        Err(QnsError::NonFiniteField {
            count,
            len: data.len(),
        })
    }
}

/// Real samples of a scalar function on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: PeriodicGrid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &PeriodicGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(QnsError::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            data,
        })
    }

    /// Construct without the length check; callers guarantee `data.len() == grid.len()`.
    pub(crate) fn raw(grid: &PeriodicGrid, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self {
            grid: grid.clone(),
            data,
        }
    }

    pub fn constant(grid: &PeriodicGrid, value: f64) -> Self {
        Self::raw(grid, vec![value; grid.len()])
    }

    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_fn(grid: &PeriodicGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::raw(grid, grid.sample(f))
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        check_finite(&self.data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::raw(&self.grid, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self::raw(
            &self.grid,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Discrete `L^2` norm, `sqrt(integrate(s^2))`.
    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64
            * self.grid.volume())
        .sqrt()
    }
}

/// `dim` scalar components on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(comps: Vec<ScalarField>) -> Result<Self> {
        let first = comps
            .first()
            .ok_or_else(|| QnsError::GridMismatch("vector field needs components".into()))?;
        if comps.len() != first.grid.dim() {
            return Err(QnsError::GridMismatch(format!(
                "vector field on a {}-d grid needs {} components, got {}",
                first.grid.dim(),
                first.grid.dim(),
                comps.len()
            )));
        }
        for c in &comps[1..] {
            first.grid.check(&c.grid)?;
        }
        Ok(Self { comps })
    }

    pub(crate) fn raw(comps: Vec<ScalarField>) -> Self {
        Self { comps }
    }

    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self::raw(vec![ScalarField::zeros(grid); grid.dim()])
    }

    pub fn constant(grid: &PeriodicGrid, value: &[f64]) -> Self {
        Self::raw(value.iter().map(|&v| ScalarField::constant(grid, v)).collect())
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.comps[0].grid
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, i: usize) -> &ScalarField {
        &self.comps[i]
    }

    pub fn comps(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn comps_mut(&mut self) -> &mut [ScalarField] {
        &mut self.comps
    }

    pub fn check_finite(&self) -> Result<()> {
        self.comps.iter().try_for_each(|c| c.check_finite())
    }

    pub fn map_comps(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self::raw(self.comps.iter().map(f).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::raw(self.comps.iter().zip(&other.comps).map(|(a, b)| a.add(b)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::raw(self.comps.iter().zip(&other.comps).map(|(a, b)| a.sub(b)).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_comps(|c| c.scale(s))
    }

    /// Multiply every component pointwise by a scalar field.
    pub fn mul_scalar(&self, s: &ScalarField) -> Self {
        self.map_comps(|c| c.mul(s))
    }

    pub fn axpy(&mut self, s: f64, other: &Self) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            a.axpy(s, b);
        }
    }

    pub fn dot(&self, other: &Self) -> ScalarField {
        let mut out = self.comps[0].mul(&other.comps[0]);
        for (a, b) in self.comps.iter().zip(&other.comps).skip(1) {
            out.axpy(1.0, &a.mul(b));
        }
        out
    }

    pub fn norm_sq(&self) -> ScalarField {
        self.dot(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| c.l2_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// `d x d` components per point, stored row-major as `T[i * d + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    comps: Vec<ScalarField>,
    d: usize,
}

impl TensorField {
    pub fn new(comps: Vec<ScalarField>) -> Result<Self> {
        let d = comps
            .first()
            .map(|c| c.grid.dim())
            .ok_or_else(|| QnsError::GridMismatch("tensor field needs components".into()))?;
        if comps.len() != d * d {
            return Err(QnsError::GridMismatch(format!(
                "tensor field on a {d}-d grid needs {} components, got {}",
                d * d,
                comps.len()
            )));
        }
        Ok(Self { comps, d })
    }

    pub(crate) fn raw(comps: Vec<ScalarField>) -> Self {
        let d = comps[0].grid.dim();
        Self { comps, d }
    }

    pub fn zeros(grid: &PeriodicGrid) -> Self {
        let d = grid.dim();
        Self::raw(vec![ScalarField::zeros(grid); d * d])
    }

    /// `s * I`.
    pub fn scalar_identity(s: &ScalarField) -> Self {
        let d = s.grid.dim();
        let zero = ScalarField::zeros(&s.grid);
        let comps = (0..d * d)
            .map(|k| if k / d == k % d { s.clone() } else { zero.clone() })
            .collect();
        Self { comps, d }
    }

    /// Outer product `a_i b_j`.
    pub fn outer(a: &VectorField, b: &VectorField) -> Self {
        let d = a.dim();
        let comps = (0..d * d)
            .map(|k| a.comp(k / d).mul(b.comp(k % d)))
            .collect();
        Self { comps, d }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.comps[0].grid
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> &ScalarField {
        &self.comps[i * self.d + j]
    }

    pub fn comps(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn transpose(&self) -> Self {
        let d = self.d;
        Self::raw((0..d * d).map(|k| self.comps[(k % d) * d + k / d].clone()).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::raw(self.comps.iter().zip(&other.comps).map(|(a, b)| a.add(b)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::raw(self.comps.iter().zip(&other.comps).map(|(a, b)| a.sub(b)).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::raw(self.comps.iter().map(|c| c.scale(s)).collect())
    }

    pub fn mul_scalar(&self, s: &ScalarField) -> Self {
        Self::raw(self.comps.iter().map(|c| c.mul(s)).collect())
    }

    pub fn trace(&self) -> ScalarField {
        let mut out = self.get(0, 0).clone();
        for i in 1..self.d {
            out.axpy(1.0, self.get(i, i));
        }
        out
    }

    /// Frobenius norm squared pointwise.
    pub fn norm_sq(&self) -> ScalarField {
        let mut out = self.comps[0].mul(&self.comps[0]);
        for c in &self.comps[1..] {
            out.axpy(1.0, &c.mul(c));
        }
        out
    }

    /// Frobenius inner product pointwise.
    pub fn contract(&self, other: &Self) -> ScalarField {
        let mut out = self.comps[0].mul(&other.comps[0]);
        for (a, b) in self.comps.iter().zip(&other.comps).skip(1) {
            out.axpy(1.0, &a.mul(b));
        }
        out
    }

    /// Row-wise action `T w`, i.e. `(T w)_i = T_ij w_j`.
    pub fn apply(&self, w: &VectorField) -> VectorField {
        let d = self.d;
        VectorField::raw(
            (0..d)
                .map(|i| {
                    let mut out = self.get(i, 0).mul(w.comp(0));
                    for j in 1..d {
                        out.axpy(1.0, &self.get(i, j).mul(w.comp(j)));
                    }
                    out
                })
                .collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    pub fn check_finite(&self) -> Result<()> {
        self.comps.iter().try_for_each(|c| c.check_finite())
    }
}

/// Spectral gradient.
pub fn grad(s: &ScalarField) -> Result<VectorField> {
    s.check_finite()?;
    Ok(grad_unchecked(s))
}

pub(crate) fn grad_unchecked(s: &ScalarField) -> VectorField {
    let g = &s.grid;
    let spec = g.forward(&s.data);
    VectorField::raw(
        (0..g.dim())
            .map(|a| ScalarField::raw(g, g.inverse(g.deriv_spec(&spec, a))))
            .collect(),
    )
}

/// Spectral divergence.
pub fn div(v: &VectorField) -> Result<ScalarField> {
    v.check_finite()?;
    Ok(div_unchecked(v))
}

pub(crate) fn div_unchecked(v: &VectorField) -> ScalarField {
    let g = v.grid();
    let mut acc = vec![ZERO; g.spec_len()];
    for (a, c) in v.comps.iter().enumerate() {
        let d = g.deriv_spec(&g.forward(&c.data), a);
        for (x, y) in acc.iter_mut().zip(d) {
            *x += y;
        }
    }
    ScalarField::raw(g, g.inverse(acc))
}

pub fn laplacian(s: &ScalarField) -> Result<ScalarField> {
    s.check_finite()?;
    Ok(laplacian_unchecked(s))
}

pub(crate) fn laplacian_unchecked(s: &ScalarField) -> ScalarField {
    let g = &s.grid;
    ScalarField::raw(g, g.inverse(g.laplacian_spec(&g.forward(&s.data))))
}

/// Componentwise Laplacian of a vector field.
pub fn vector_laplacian(v: &VectorField) -> Result<VectorField> {
    v.check_finite()?;
    Ok(v.map_comps(laplacian_unchecked))
}

/// Hessian `H_ab = d_a d_b s`.
pub fn hessian(s: &ScalarField) -> Result<TensorField> {
    s.check_finite()?;
    Ok(hessian_unchecked(s))
}

pub(crate) fn hessian_unchecked(s: &ScalarField) -> TensorField {
    let g = &s.grid;
    let d = g.dim();
    let spec = g.forward(&s.data);
    let mut comps: Vec<Option<ScalarField>> = vec![None; d * d];
    for a in 0..d {
        for b in a..d {
            let f = ScalarField::raw(g, g.inverse(g.deriv2_spec(&spec, a, b)));
            comps[b * d + a] = Some(f.clone());
            comps[a * d + b] = Some(f);
        }
    }
    TensorField::raw(comps.into_iter().map(|c| c.expect("filled")).collect())
}

/// Velocity gradient `G_ij = d_j v_i`.
pub fn grad_vec(v: &VectorField) -> Result<TensorField> {
    v.check_finite()?;
    Ok(grad_vec_unchecked(v))
}

pub(crate) fn grad_vec_unchecked(v: &VectorField) -> TensorField {
    let g = v.grid();
    let d = g.dim();
    let mut comps = Vec::with_capacity(d * d);
    for c in &v.comps {
        let spec = g.forward(&c.data);
        for j in 0..d {
            comps.push(ScalarField::raw(g, g.inverse(g.deriv_spec(&spec, j))));
        }
    }
    TensorField::raw(comps)
}

/// Symmetric part `Dv = (grad v + grad v^T)/2`.
pub fn sym_grad(v: &VectorField) -> Result<TensorField> {
    let gv = grad_vec(v)?;
    Ok(gv.add(&gv.transpose()).scale(0.5))
}

/// Antisymmetric part `Av = (grad v - grad v^T)/2`.
pub fn antisym_grad(v: &VectorField) -> Result<TensorField> {
    let gv = grad_vec(v)?;
    Ok(gv.sub(&gv.transpose()).scale(0.5))
}

/// Row-wise divergence `(div T)_i = d_j T_ij`.
pub fn div_tensor(t: &TensorField) -> Result<VectorField> {
    t.check_finite()?;
    Ok(div_tensor_unchecked(t))
}

pub(crate) fn div_tensor_unchecked(t: &TensorField) -> VectorField {
    let g = t.grid();
    let d = t.d;
    VectorField::raw(
        (0..d)
            .map(|i| {
                let mut acc = vec![ZERO; g.spec_len()];
                for j in 0..d {
                    let s = g.deriv_spec(&g.forward(&t.get(i, j).data), j);
                    for (x, y) in acc.iter_mut().zip(s) {
                        *x += y;
                    }
                }
                ScalarField::raw(g, g.inverse(acc))
            })
            .collect(),
    )
}

/// Product `a b` projected onto the 2/3 band. The retained modes are exact:
/// both factors are interpolated onto a `3n/2` grid before multiplying.
pub fn dealiased_product(a: &ScalarField, b: &ScalarField) -> Result<ScalarField> {
    a.grid.check(&b.grid)?;
    a.check_finite()?;
    b.check_finite()?;
    let g = &a.grid;
    let pa = g.to_padded(&a.data);
    let pb = g.to_padded(&b.data);
    let prod: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
    Ok(ScalarField::raw(g, g.inverse(g.from_padded_spec(&prod))))
}

/// Trapezoidal rule, `mean * volume`; exact for trigonometric polynomials
/// resolved by the grid.
pub fn integrate(s: &ScalarField) -> f64 {
    s.mean() * s.grid.volume()
}
