//! Truncated Fock-space linear algebra.
//!
//! Operators are stored densely in row-major order. The truncation keeps
//! Fock states `|0>..|dim-1>`; all operators are the projections of their
//! infinite-dimensional counterparts onto that subspace.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense square complex matrix, `dim >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::zeros_unchecked(dim))
    }

    pub(crate) fn zeros_unchecked(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex::new(T::zero(), T::zero()); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        Ok(m)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Result<Self> {
        check_dim(dim)?;
        let data = (0..dim * dim).map(|k| f(k / dim, k % dim)).collect();
        Ok(Self { dim, data })
    }

    /// Builds a matrix from row-major entries; `entries.len()` must be a square >= 4.
    pub fn from_row_major(entries: Vec<Complex<T>>) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim * dim != entries.len() {
            return Err(Error::InvalidDimension { dim: entries.len() });
        }
        check_dim(dim)?;
        Ok(Self { dim, data: entries })
    }

    pub fn diagonal(values: &[T]) -> Result<Self> {
        let mut m = Self::zeros(values.len())?;
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex::new(v, T::zero());
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros_unchecked(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim).fold(Complex::new(T::zero(), T::zero()), |acc, i| {
            acc + self.data[i * self.dim + i]
        })
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: T, other: &Self) {
        debug_assert_eq!(self.dim, other.dim);
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x += y * a;
        }
    }

    /// `self += a * other` with a complex coefficient.
    pub fn axpy_complex(&mut self, a: Complex<T>, other: &Self) {
        debug_assert_eq!(self.dim, other.dim);
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x += y * a;
        }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// `max |A - A^dag|` over entries.
    pub fn hermiticity_error(&self) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Matrix product. Zero entries of `self` are skipped, so products with
    /// banded ladder operators on the left cost `O(nnz * dim)`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.dim != rhs.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: rhs.dim,
            });
        }
        Ok(self.matmul_unchecked(rhs))
    }

    pub(crate) fn matmul_unchecked(&self, rhs: &Self) -> Self {
        let n = self.dim;
        let zero = Complex::new(T::zero(), T::zero());
        let mut out = Self::zeros_unchecked(n);
        for i in 0..n {
            let row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == zero {
                    continue;
                }
                let brow = &rhs.data[k * n..(k + 1) * n];
                for (o, &b) in row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `[self, rhs]`.
    pub fn commutator(&self, rhs: &Self) -> Result<Self> {
        Ok(&self.matmul(rhs)? - &rhs.matmul(self)?)
    }

    /// Column `n` as a vector.
    pub fn column(&self, n: usize) -> Vec<Complex<T>> {
        (0..self.dim).map(|i| self.data[i * self.dim + n]).collect()
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.dim + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.dim + j]
    }
}

impl<T: Real> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        Matrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Real> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        Matrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Real> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        self.matmul_unchecked(rhs)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(Error::InvalidDimension { dim })
    } else {
        Ok(())
    }
}

/// Truncated annihilation operator: entry `(n, n+1) = sqrt(n+1)`.
pub fn make_annihilation<T: Real>(dim: usize) -> Result<Matrix<T>> {
    let mut a = Matrix::zeros(dim)?;
    for n in 0..dim - 1 {
        a[(n, n + 1)] = Complex::new(T::from_usize(n + 1).unwrap().sqrt(), T::zero());
    }
    Ok(a)
}

pub fn make_creation<T: Real>(dim: usize) -> Result<Matrix<T>> {
    Ok(make_annihilation::<T>(dim)?.adjoint())
}

/// Number operator `a^dag a = diag(0, 1, .., dim-1)`.
pub fn make_number<T: Real>(dim: usize) -> Result<Matrix<T>> {
    let values: Vec<T> = (0..dim).map(|n| T::from_usize(n).unwrap()).collect();
    Matrix::diagonal(&values)
}

/// Smallest truncation that represents a state of mean occupation `nbar_max`:
/// `ceil(nbar + 6 sqrt(nbar + 1) + 4)`.
pub fn required_dim(nbar_max: f64) -> usize {
    let n = nbar_max.max(0.0);
    (n + 6.0 * (n + 1.0).sqrt() + 4.0).ceil() as usize
}

/// Validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Density<T> {
    inner: Matrix<T>,
}

/// Measured deviations of a matrix from the density-matrix invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    pub hermiticity: f64,
    pub trace_error: f64,
    pub trace_imag: f64,
    pub min_eigenvalue: f64,
}

impl InvariantReport {
    pub const HERMITICITY_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-9;
    pub const POSITIVITY_TOL: f64 = 1e-8;

    pub fn measure<T: Real>(m: &Matrix<T>) -> Self {
        let tr = m.trace();
        let mut herm = m.clone();
        // eigenvalues of the Hermitian part
        let h = m.adjoint();
        for (x, y) in herm.as_mut_slice().iter_mut().zip(h.as_slice()) {
            *x = (*x + *y) * T::lit(0.5);
        }
        let eig = hermitian_eigenvalues(&herm);
        Self {
            hermiticity: m.hermiticity_error().to_f64_lossy(),
            trace_error: (tr.re - T::one()).abs().to_f64_lossy(),
            trace_imag: tr.im.abs().to_f64_lossy(),
            min_eigenvalue: eig.first().copied().unwrap_or(T::zero()).to_f64_lossy(),
        }
    }

    /// Check against the double-precision bounds, widened for narrower scalars.
    pub fn check<T: Real>(&self) -> Result<()> {
        let herm_tol = T::tol(Self::HERMITICITY_TOL).to_f64_lossy();
        let trace_tol = T::tol(Self::TRACE_TOL).to_f64_lossy();
        let pos_tol = T::tol(Self::POSITIVITY_TOL).to_f64_lossy();
        if !(self.hermiticity <= herm_tol) {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian: max |rho - rho^dag| = {:e}",
                self.hermiticity
            )));
        }
        if !(self.trace_error <= trace_tol && self.trace_imag <= trace_tol) {
            return Err(Error::InvalidDensity(format!(
                "trace deviates from 1 by {:e} (imag {:e})",
                self.trace_error, self.trace_imag
            )));
        }
        if !(self.min_eigenvalue >= -pos_tol) {
            return Err(Error::InvalidDensity(format!(
                "not positive semidefinite: min eigenvalue {:e}",
                self.min_eigenvalue
            )));
        }
        Ok(())
    }
}

impl<T: Real> Density<T> {
    /// Validates `m` against the density-matrix invariants.
    pub fn new(m: Matrix<T>) -> Result<Self> {
        InvariantReport::measure(&m).check::<T>()?;
        Ok(Self { inner: m })
    }

    pub(crate) fn new_unchecked(m: Matrix<T>) -> Self {
        Self { inner: m }
    }

    /// Fock projector `|n><n|`.
    pub fn fock(dim: usize, n: usize) -> Result<Self> {
        let mut m = Matrix::zeros(dim)?;
        if n >= dim {
            return Err(Error::TruncationInsufficient {
                dim,
                required: n + 1,
                nbar: n as f64,
            });
        }
        m[(n, n)] = Complex::new(T::one(), T::zero());
        Ok(Self { inner: m })
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::fock(dim, 0)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.inner
    }

    pub fn invariants(&self) -> InvariantReport {
        InvariantReport::measure(&self.inner)
    }

    /// Mean occupation `Tr(a^dag a rho)`, read off the diagonal.
    pub fn mean_occupation(&self) -> T {
        (0..self.dim()).fold(T::zero(), |acc, n| {
            acc + T::from_usize(n).unwrap() * self.inner[(n, n)].re
        })
    }
}

/// Coherent state `|alpha><alpha|` in a `dim`-level truncation, renormalized.
///
/// The vacuum (`alpha = 0`) is exact at any `dim >= 2`; otherwise `dim` must
/// satisfy [`required_dim`] for `|alpha|^2`.
pub fn make_coherent_density<T: Real>(alpha: Complex<T>, dim: usize) -> Result<Density<T>> {
    check_dim(dim)?;
    let nbar = alpha.norm_sqr();
    if nbar > T::zero() {
        let required = required_dim(nbar.to_f64_lossy());
        if dim < required {
            return Err(Error::TruncationInsufficient {
                dim,
                required,
                nbar: nbar.to_f64_lossy(),
            });
        }
    }
    let mut amps = Vec::with_capacity(dim);
    let mut c = Complex::new((-nbar * T::lit(0.5)).exp(), T::zero());
    for n in 0..dim {
        amps.push(c);
        c = c * alpha / T::from_usize(n + 1).unwrap().sqrt();
    }
    let norm: T = amps.iter().fold(T::zero(), |s, z| s + z.norm_sqr());
    let scale = T::one() / norm.sqrt();
    for z in &mut amps {
        *z = *z * scale;
    }
    let m = Matrix::from_fn(dim, |i, j| amps[i] * amps[j].conj())?;
    Ok(Density::new_unchecked(m))
}

/// `Tr(op * rho)`. The imaginary part is returned as computed.
pub fn expectation<T: Real>(op: &Matrix<T>, rho: &Density<T>) -> Result<Complex<T>> {
    trace_product(op, rho.as_matrix())
}

/// `Tr(a * b)` without forming the product.
pub fn trace_product<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Complex<T>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let n = a.dim();
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    Ok(acc)
}

/// Ascending eigenvalues of a Hermitian matrix (lower triangle trusted).
///
/// Runs cyclic Jacobi on the real symmetric embedding `[[A, -B], [B, A]]`
/// of `H = A + iB`, whose spectrum is that of `H` with every value doubled.
pub fn hermitian_eigenvalues<T: Real>(h: &Matrix<T>) -> Vec<T> {
    let n = h.dim();
    let m = 2 * n;
    let mut s = vec![T::zero(); m * m];
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            s[i * m + j] = z.re;
            s[(i + n) * m + (j + n)] = z.re;
            s[i * m + (j + n)] = -z.im;
            s[(i + n) * m + j] = z.im;
        }
    }
    let mut eig = jacobi_eigenvalues(&mut s, m);
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    eig.into_iter().step_by(2).collect()
}

fn jacobi_eigenvalues<T: Real>(a: &mut [T], m: usize) -> Vec<T> {
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for p in 0..m {
            diag += a[p * m + p] * a[p * m + p];
            for q in p + 1..m {
                off += a[p * m + q] * a[p * m + q];
            }
        }
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[p * m + q];
                if apq == T::zero() {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                let theta = (aqq - app) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let sn = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - sn * akq;
                    a[k * m + q] = sn * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - sn * aqk;
                    a[q * m + k] = sn * apk + c * aqk;
                }
            }
        }
    }
    (0..m).map(|i| a[i * m + i]).collect()
}
