//! Eigenstructure utilities on Hermitian matrices.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::scalar::{lit, modulus, to_f64, Real};

/// Extra convex constraint `X in Omega` on top of `X >= 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintClass {
    /// No constraint beyond Hermitian.
    #[default]
    Complex,
    /// Entrywise real.
    Real,
    /// Entrywise real and nonnegative.
    Nonnegative,
}

impl ConstraintClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintClass::Complex => "complex",
            ConstraintClass::Real => "real",
            ConstraintClass::Nonnegative => "nonnegative",
        }
    }
}

impl fmt::Display for ConstraintClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConstraintClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "complex" => Ok(ConstraintClass::Complex),
            "real" => Ok(ConstraintClass::Real),
            "nonnegative" | "nonneg" => Ok(ConstraintClass::Nonnegative),
            other => Err(Error::Contract(format!("unknown constraint class `{other}`"))),
        }
    }
}

/// `X = U Diag(eigenvalues) U*` with eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct EigenDecomposition<T: Real> {
    pub eigenvalues: DVector<T>,
    /// Unitary; column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: DMatrix<Complex<T>>,
}

impl<T: Real> EigenDecomposition<T> {
    /// `U Diag(f(sigma)) U*`.
    pub fn reconstruct_with(&self, f: impl Fn(T) -> T) -> HermitianMatrix<T> {
        let weights: Vec<T> = self.eigenvalues.iter().map(|&s| f(s)).collect();
        let keep: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] != T::zero()).collect();
        let n = self.eigenvectors.nrows();
        let re = DMatrix::from_fn(n, keep.len(), |r, c| self.eigenvectors[(r, keep[c])].re);
        let im = DMatrix::from_fn(n, keep.len(), |r, c| self.eigenvectors[(r, keep[c])].im);
        let w: Vec<T> = keep.iter().map(|&k| weights[k]).collect();
        HermitianMatrix::weighted_outer_sum(&re, &im, &w)
    }

    pub fn reconstruct(&self) -> HermitianMatrix<T> {
        self.reconstruct_with(|s| s)
    }

    pub fn max(&self) -> T {
        self.eigenvalues[0]
    }

    pub fn min(&self) -> T {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Largest eigenvalue modulus, i.e. the spectral norm.
    pub fn spectral_norm(&self) -> T {
        self.max().abs().max(self.min().abs())
    }
}

/// Full eigendecomposition of a Hermitian matrix.
///
/// Real inputs take the real symmetric path.
pub fn eigh<T: Real>(x: &HermitianMatrix<T>) -> Result<EigenDecomposition<T>> {
    let n = x.dim();
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
        });
    }
    let max_iter = 10_000 * n;
    let (values, vectors) = if x.is_real() {
        let eig = SymmetricEigen::try_new(x.re().clone(), T::default_epsilon(), max_iter)
            .ok_or_else(|| eig_failure(x))?;
        (eig.eigenvalues, eig.eigenvectors.map(|v| Complex::new(v, T::zero())))
    } else {
        let eig = SymmetricEigen::try_new(x.to_complex(), T::default_epsilon(), max_iter)
            .ok_or_else(|| eig_failure(x))?;
        (eig.eigenvalues, eig.eigenvectors)
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(eig_failure(x));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap_or(std::cmp::Ordering::Equal));
    Ok(EigenDecomposition {
        eigenvalues: DVector::from_fn(n, |k, _| values[order[k]]),
        eigenvectors: DMatrix::from_fn(n, n, |r, k| vectors[(r, order[k])]),
    })
}

fn eig_failure<T: Real>(x: &HermitianMatrix<T>) -> Error {
    Error::Numerical(format!(
        "Hermitian eigensolver did not converge (n = {}, ||X||_F = {:e})",
        x.dim(),
        to_f64(x.frobenius_norm())
    ))
}

/// Projection onto the positive semidefinite cone: `U max(Sigma, 0) U*`.
pub fn project_psd<T: Real>(x: &HermitianMatrix<T>) -> Result<HermitianMatrix<T>> {
    let eig = eigh(x)?;
    if eig.min() >= T::zero() {
        return Ok(x.clone());
    }
    Ok(eig.reconstruct_with(|s| s.max(T::zero())))
}

/// Projection onto `Omega`.
pub fn project_constraint<T: Real>(x: &HermitianMatrix<T>, omega: ConstraintClass) -> HermitianMatrix<T> {
    match omega {
        ConstraintClass::Complex => x.clone(),
        ConstraintClass::Real => x.map_parts(|v| v, |_| T::zero()),
        ConstraintClass::Nonnegative => x.map_parts(|v| v.max(T::zero()), |_| T::zero()),
    }
}

/// Largest eigenvalue and its unit eigenvector, phase-fixed so the
/// largest-modulus entry is real and positive.
pub fn leading_eigpair<T: Real>(x: &HermitianMatrix<T>) -> Result<(T, DVector<Complex<T>>)> {
    if x.frobenius_norm() == T::zero() {
        return Err(Error::NoLeadingEigenpair);
    }
    let eig = eigh(x)?;
    let u = eig.eigenvectors.column(0).into_owned();
    Ok((eig.max(), canonical_phase(u)))
}

/// Rotates `u` so its first largest-modulus entry is real-positive.
pub fn canonical_phase<T: Real>(mut u: DVector<Complex<T>>) -> DVector<Complex<T>> {
    let mut best = 0;
    let mut best_mod = T::zero();
    for (k, z) in u.iter().enumerate() {
        let m = z.norm_sqr();
        if m > best_mod {
            best_mod = m;
            best = k;
        }
    }
    if best_mod == T::zero() {
        return u;
    }
    let pivot = u[best];
    let rot = pivot.conj() / modulus(pivot);
    for z in u.iter_mut() {
        *z *= rot;
    }
    u[best] = Complex::new(u[best].re, T::zero());
    u
}

/// `Tr(X) - ||X||_F` for positive semidefinite `X`; zero exactly on rank <= 1.
///
/// Eigenvalues down to `-1e-9 * sigma_1` are accepted as rounding noise.
pub fn trace_frobenius_gap<T: Real>(x: &HermitianMatrix<T>) -> Result<T> {
    let eig = eigh(x)?;
    check_psd(&eig, "trace_frobenius_gap")?;
    Ok((x.trace() - x.frobenius_norm()).max(T::zero()))
}

pub(crate) fn psd_tolerance<T: Real>(eig: &EigenDecomposition<T>) -> T {
    let scale = eig.spectral_norm();
    lit::<T>(1e-9).max(T::default_epsilon() * lit(64.0)) * scale
}

pub(crate) fn check_psd<T: Real>(eig: &EigenDecomposition<T>, context: &str) -> Result<()> {
    if eig.eigenvalues.is_empty() {
        return Ok(());
    }
    if eig.min() < -psd_tolerance(eig) {
        return Err(Error::Contract(format!(
            "{context}: matrix is not positive semidefinite (min eigenvalue {:e}, max {:e})",
            to_f64(eig.min()),
            to_f64(eig.max())
        )));
    }
    Ok(())
}
