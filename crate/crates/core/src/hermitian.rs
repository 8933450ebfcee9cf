//! Dense complex Hermitian matrices.
//!
//! A Hermitian matrix `H = R + iS` is stored as its real part `R` (symmetric)
//! and imaginary part `S` (antisymmetric, zero diagonal). Keeping the two real
//! halves separate lets every heavy product run through real GEMM and makes
//! the Hermitian structure exact: sums, differences and real scalings of
//! stored matrices stay Hermitian bit-for-bit.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix<T: Real> {
    re: DMatrix<T>,
    im: DMatrix<T>,
}

impl<T: Real> HermitianMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            re: DMatrix::zeros(n, n),
            im: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, T::one())
    }

    pub fn scaled_identity(n: usize, s: T) -> Self {
        Self {
            re: DMatrix::from_diagonal_element(n, n, s),
            im: DMatrix::zeros(n, n),
        }
    }

    /// `Diag(d)` for a real vector `d`.
    pub fn from_real_diagonal(d: &[T]) -> Self {
        let n = d.len();
        Self {
            re: DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            im: DMatrix::zeros(n, n),
        }
    }

    /// Builds the Hermitian part `(M + M*) / 2` of a square complex matrix.
    pub fn from_complex(m: &DMatrix<Complex<T>>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Contract(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let re = m.map(|z| z.re);
        let im = m.map(|z| z.im);
        Ok(Self::symmetrized(re, im))
    }

    /// Builds `(R + R^T)/2 + i (S - S^T)/2` from arbitrary square real and
    /// imaginary parts.
    pub fn from_parts(re: DMatrix<T>, im: DMatrix<T>) -> Result<Self> {
        let n = re.nrows();
        if !re.is_square() || im.shape() != (n, n) {
            return Err(Error::Contract(format!(
                "real and imaginary parts must be square and equal-sized, got {:?} and {:?}",
                re.shape(),
                im.shape()
            )));
        }
        Ok(Self::symmetrized(re, im))
    }

    /// Real symmetric matrix, symmetrized.
    pub fn from_real(re: DMatrix<T>) -> Result<Self> {
        let (r, c) = re.shape();
        Self::from_parts(re, DMatrix::zeros(r, c))
    }

    fn symmetrized(mut re: DMatrix<T>, mut im: DMatrix<T>) -> Self {
        let n = re.nrows();
        let half: T = lit(0.5);
        for j in 0..n {
            for i in 0..j {
                let r = (re[(i, j)] + re[(j, i)]) * half;
                re[(i, j)] = r;
                re[(j, i)] = r;
                let s = (im[(i, j)] - im[(j, i)]) * half;
                im[(i, j)] = s;
                im[(j, i)] = -s;
            }
            im[(j, j)] = T::zero();
        }
        Self { re, im }
    }

    /// The lift `v v*` of a complex vector.
    pub fn outer(v: &DVector<Complex<T>>) -> Self {
        let n = v.len();
        let mut re = DMatrix::zeros(n, n);
        let mut im = DMatrix::zeros(n, n);
        for j in 0..n {
            let vj = v[j].conj();
            for i in 0..n {
                let z = v[i] * vj;
                re[(i, j)] = z.re;
                im[(i, j)] = z.im;
            }
        }
        Self::symmetrized(re, im)
    }

    /// `sum_k w_k b_k b_k*` where `b_k = re_cols[:, k] + i im_cols[:, k]`.
    ///
    /// Runs as two real GEMMs of size `n x 2k x n`.
    pub fn weighted_outer_sum(re_cols: &DMatrix<T>, im_cols: &DMatrix<T>, weights: &[T]) -> Self {
        let (n, k) = re_cols.shape();
        debug_assert_eq!(im_cols.shape(), (n, k));
        debug_assert_eq!(weights.len(), k);
        let mut right = DMatrix::zeros(n, 2 * k);
        let mut left_re = DMatrix::zeros(n, 2 * k);
        let mut left_im = DMatrix::zeros(n, 2 * k);
        for c in 0..k {
            let w = weights[c];
            for r in 0..n {
                let p = re_cols[(r, c)];
                let q = im_cols[(r, c)];
                right[(r, c)] = p;
                right[(r, k + c)] = q;
                left_re[(r, c)] = p * w;
                left_re[(r, k + c)] = q * w;
                left_im[(r, c)] = q * w;
                left_im[(r, k + c)] = -(p * w);
            }
        }
        let rt = right.transpose();
        Self::symmetrized(&left_re * &rt, &left_im * &rt)
    }

    pub fn dim(&self) -> usize {
        self.re.nrows()
    }

    /// Real part; symmetric.
    pub fn re(&self) -> &DMatrix<T> {
        &self.re
    }

    /// Imaginary part; antisymmetric with zero diagonal.
    pub fn im(&self) -> &DMatrix<T> {
        &self.im
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        Complex::new(self.re[(i, j)], self.im[(i, j)])
    }

    pub fn to_complex(&self) -> DMatrix<Complex<T>> {
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| self.get(i, j))
    }

    /// True when the imaginary part is identically zero.
    pub fn is_real(&self) -> bool {
        self.im.iter().all(|v| *v == T::zero())
    }

    pub fn trace(&self) -> T {
        self.re.trace()
    }

    /// Real inner product `<X, Y> = Re Tr(X* Y)`, which equals `Tr(XY)` for Hermitian operands.
    pub fn inner(&self, other: &Self) -> T {
        self.re.dot(&other.re) + self.im.dot(&other.im)
    }

    pub fn frobenius_norm(&self) -> T {
        self.inner(self).sqrt()
    }

    /// Largest entry modulus of `X - X*`; zero by construction.
    pub fn hermitian_defect(&self) -> T {
        let n = self.dim();
        let mut worst = T::zero();
        for j in 0..n {
            for i in 0..n {
                let d = (self.re[(i, j)] - self.re[(j, i)]).hypot(self.im[(i, j)] + self.im[(j, i)]);
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            re: &self.re * s,
            im: &self.im * s,
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        Self {
            re: &self.re + &other.re * s,
            im: &self.im + &other.im * s,
        }
    }

    pub(crate) fn map_parts(&self, f: impl Fn(T) -> T, g: impl Fn(T) -> T) -> Self {
        Self {
            re: self.re.map(f),
            im: self.im.map(g),
        }
    }
}

impl<T: Real> Add for &HermitianMatrix<T> {
    type Output = HermitianMatrix<T>;
    fn add(self, rhs: Self) -> HermitianMatrix<T> {
        HermitianMatrix {
            re: &self.re + &rhs.re,
            im: &self.im + &rhs.im,
        }
    }
}

impl<T: Real> Sub for &HermitianMatrix<T> {
    type Output = HermitianMatrix<T>;
    fn sub(self, rhs: Self) -> HermitianMatrix<T> {
        HermitianMatrix {
            re: &self.re - &rhs.re,
            im: &self.im - &rhs.im,
        }
    }
}

impl<T: Real> Neg for &HermitianMatrix<T> {
    type Output = HermitianMatrix<T>;
    fn neg(self) -> HermitianMatrix<T> {
        HermitianMatrix {
            re: -&self.re,
            im: -&self.im,
        }
    }
}

impl<T: Real> Mul<T> for &HermitianMatrix<T> {
    type Output = HermitianMatrix<T>;
    fn mul(self, s: T) -> HermitianMatrix<T> {
        self.scale(s)
    }
}
