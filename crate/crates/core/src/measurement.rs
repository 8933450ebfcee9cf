//! The lifted measurement operator `X -> diag(A* X A)` and its companions.
//!
//! For `A = P + iQ` the quadratic forms and the adjoint are evaluated in real
//! arithmetic:
//!
//! * `a* X a = p'Rp + q'Rq - 2 p'Sq` for `X = R + iS`,
//! * `A Diag(y) A* = sum_i y_i a_i a_i*`.

use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::scalar::{lit, to_f64, tol_floor, Real};

/// Seedable generator used for every random draw in the crate.
pub type SeededRng = ChaCha8Rng;

const FACTOR_CACHE_SLOTS: usize = 8;

type Factor<T> = Arc<Cholesky<T, Dyn>>;

/// Measurement matrix `A` (n x m, columns are measurement vectors) with lazily
/// computed Gram data.
pub struct MeasurementEnsemble<T: Real> {
    a: DMatrix<Complex<T>>,
    p: DMatrix<T>,
    q: DMatrix<T>,
    gram: OnceLock<DMatrix<T>>,
    op_norm: OnceLock<T>,
    factors: Mutex<Vec<(T, Factor<T>)>>,
}

impl<T: Real> Clone for MeasurementEnsemble<T> {
    fn clone(&self) -> Self {
        Self::new_unchecked(self.a.clone())
    }
}

impl<T: Real> std::fmt::Debug for MeasurementEnsemble<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeasurementEnsemble")
            .field("n", &self.n())
            .field("m", &self.m())
            .finish_non_exhaustive()
    }
}

impl<T: Real> MeasurementEnsemble<T> {
    /// Wraps an `n x m` measurement matrix.
    pub fn new(a: DMatrix<Complex<T>>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::Contract(format!(
                "measurement matrix must be at least 1x1, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("measurement matrix has non-finite entries".into()));
        }
        Ok(Self::new_unchecked(a))
    }

    fn new_unchecked(a: DMatrix<Complex<T>>) -> Self {
        let p = a.map(|z| z.re);
        let q = a.map(|z| z.im);
        Self {
            a,
            p,
            q,
            gram: OnceLock::new(),
            op_norm: OnceLock::new(),
            factors: Mutex::new(Vec::new()),
        }
    }

    /// The `n x n` identity ensemble (`m = n`), for which `forward` is `diag`.
    pub fn identity(n: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, n))
    }

    /// Draws an ensemble whose entries have i.i.d. standard normal real and
    /// imaginary parts, so `E|a_ij|^2 = 2`.
    ///
    /// Entries are drawn column by column, real part first.
    pub fn sample_gaussian(n: usize, m: usize, seed: u64) -> Result<Self> {
        let mut rng = SeededRng::seed_from_u64(seed);
        Self::sample_gaussian_with(n, m, &mut rng)
    }

    pub fn sample_gaussian_with(n: usize, m: usize, rng: &mut SeededRng) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Contract(format!("ensemble needs n, m >= 1, got n={n}, m={m}")));
        }
        let mut a = DMatrix::zeros(n, m);
        for j in 0..m {
            for i in 0..n {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                a[(i, j)] = Complex::new(lit(re), lit(im));
            }
        }
        Self::new(a)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.a
    }

    /// `A(X) = (a_i* X a_i)_i`.
    ///
    /// The imaginary part of each quadratic form vanishes identically because
    /// [`HermitianMatrix`] stores an exactly symmetric real part and an exactly
    /// antisymmetric imaginary part, so only the real part is evaluated.
    pub fn forward(&self, x: &HermitianMatrix<T>) -> Result<DVector<T>> {
        check_dim("forward", self.n(), x.dim())?;
        let m = self.m();
        let rp = x.re() * &self.p;
        let rq = x.re() * &self.q;
        let sq = x.im() * &self.q;
        let two: T = lit(2.0);
        Ok(DVector::from_fn(m, |i, _| {
            let p = self.p.column(i);
            let q = self.q.column(i);
            p.dot(&rp.column(i)) + q.dot(&rq.column(i)) - two * p.dot(&sq.column(i))
        }))
    }

    /// `A*(y) = A Diag(y) A*`.
    pub fn adjoint(&self, y: &DVector<T>) -> Result<HermitianMatrix<T>> {
        check_dim("adjoint", self.m(), y.len())?;
        Ok(HermitianMatrix::weighted_outer_sum(&self.p, &self.q, y.as_slice()))
    }

    /// `A*A o conj(A*A)`, i.e. the matrix of `A A*` acting on `R^m`.
    pub fn gram(&self) -> &DMatrix<T> {
        self.gram.get_or_init(|| {
            let pt = self.p.transpose();
            let qt = self.q.transpose();
            let ptp = &pt * &self.p;
            let qtq = &qt * &self.q;
            let ptq = &pt * &self.q;
            let m = self.m();
            DMatrix::from_fn(m, m, |i, j| {
                let re = ptp[(i, j)] + qtq[(i, j)];
                let im = ptq[(i, j)] - ptq[(j, i)];
                re * re + im * im
            })
        })
    }

    /// `||A|| = sqrt(lambda_max(gram))`.
    ///
    /// The Gram matrix is entrywise nonnegative and positive semidefinite, so
    /// power iteration from the all-ones vector converges to its top eigenvalue.
    pub fn operator_norm(&self) -> T {
        *self.op_norm.get_or_init(|| largest_eigenvalue_nonneg_psd(self.gram()).sqrt())
    }

    /// Factorization handle for `(A*A + delta Id)^{-1}`.
    pub fn regularized_inverse(&self, delta: T) -> Result<RegularizedInverse<'_, T>> {
        if !(delta > T::zero()) || !delta.is_finite() {
            return Err(Error::Contract(format!(
                "regularization delta must be positive and finite, got {}",
                to_f64(delta)
            )));
        }
        let factor = self.factor(delta)?;
        Ok(RegularizedInverse {
            ens: self,
            delta,
            factor,
        })
    }

    /// `(A*A + delta Id)^{-1}(X)` evaluated with the Woodbury formula, followed by
    /// one step of iterative refinement. For small `delta` the residual of the
    /// plain formula grows like `||A||^2 / delta` times machine precision.
    pub fn apply_regularized_inverse(&self, delta: T, x: &HermitianMatrix<T>) -> Result<HermitianMatrix<T>> {
        let inv = self.regularized_inverse(delta)?;
        let y = inv.apply(x)?;
        let r = x - &self.apply_regularized(delta, &y)?;
        Ok(&y + &inv.apply(&r)?)
    }

    /// `(A*A + delta Id)(X) = A*(A(X)) + delta X`.
    pub fn apply_regularized(&self, delta: T, x: &HermitianMatrix<T>) -> Result<HermitianMatrix<T>> {
        let ax = self.forward(x)?;
        Ok(self.adjoint(&ax)?.axpy(delta, x))
    }

    fn factor(&self, delta: T) -> Result<Factor<T>> {
        {
            let cache = self.factors.lock().unwrap_or_else(|e| e.into_inner());
            if let Some((_, f)) = cache.iter().find(|(d, _)| *d == delta) {
                return Ok(f.clone());
            }
        }
        let mut shifted = self.gram().clone();
        for i in 0..self.m() {
            shifted[(i, i)] += delta;
        }
        let chol = Cholesky::new(shifted).ok_or_else(|| {
            Error::Numerical(format!(
                "Cholesky of gram + {} I failed (m = {})",
                to_f64(delta),
                self.m()
            ))
        })?;
        let f = Arc::new(chol);
        let mut cache = self.factors.lock().unwrap_or_else(|e| e.into_inner());
        if cache.len() >= FACTOR_CACHE_SLOTS {
            cache.remove(0);
        }
        cache.push((delta, f.clone()));
        Ok(f)
    }
}

/// A cached factorization of `gram + delta I_m`, applied through the
/// Woodbury identity.
pub struct RegularizedInverse<'a, T: Real> {
    ens: &'a MeasurementEnsemble<T>,
    delta: T,
    factor: Factor<T>,
}

impl<T: Real> RegularizedInverse<'_, T> {
    pub fn delta(&self) -> T {
        self.delta
    }

    /// `(1/delta) (X - A Diag((gram + delta I)^{-1} diag(A* X A)) A*)`.
    pub fn apply(&self, x: &HermitianMatrix<T>) -> Result<HermitianMatrix<T>> {
        let ax = self.ens.forward(x)?;
        let mut c = self.factor.solve(&ax);
        // one refinement step on the m x m system
        let r = &ax - (self.ens.gram() * &c + &c * self.delta);
        c += self.factor.solve(&r);
        let correction = self.ens.adjoint(&c)?;
        Ok((x - &correction).scale(T::one() / self.delta))
    }
}

fn largest_eigenvalue_nonneg_psd<T: Real>(g: &DMatrix<T>) -> T {
    let m = g.nrows();
    let tol: T = tol_floor(1e-11, 64.0);
    let mut v = DVector::from_element(m, T::one() / lit::<T>(m as f64).sqrt());
    let mut lambda = T::zero();
    for _ in 0..100_000 {
        let w = g * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == T::zero() {
            return T::zero();
        }
        let residual = (&w - &v * next).norm();
        v = w / norm;
        lambda = next;
        if residual <= tol * next.abs() {
            break;
        }
    }
    lambda
}

/// JSON layout: `{"n", "m", "a": [[[re, im]; n]; m]}` (one inner list per
/// measurement vector).
#[derive(Serialize, Deserialize)]
struct EnsembleRepr {
    n: usize,
    m: usize,
    a: MatrixRepr,
}

/// Column-major complex matrix, accepted either nested per column or flat.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum MatrixRepr {
    Nested(Vec<Vec<[f64; 2]>>),
    Flat(Vec<[f64; 2]>),
}

impl MatrixRepr {
    pub(crate) fn from_matrix<T: Real>(a: &DMatrix<Complex<T>>) -> Self {
        MatrixRepr::Nested(
            (0..a.ncols())
                .map(|j| a.column(j).iter().map(|z| [to_f64(z.re), to_f64(z.im)]).collect())
                .collect(),
        )
    }

    pub(crate) fn to_matrix<T: Real>(&self, n: usize, m: usize) -> Result<DMatrix<Complex<T>>> {
        let flat: Vec<[f64; 2]> = match self {
            MatrixRepr::Nested(cols) => {
                check_dim("measurement columns", m, cols.len())?;
                for col in cols {
                    check_dim("measurement vector length", n, col.len())?;
                }
                cols.iter().flatten().copied().collect()
            }
            MatrixRepr::Flat(v) => {
                check_dim("measurement entries", n * m, v.len())?;
                v.clone()
            }
        };
        Ok(DMatrix::from_iterator(
            n,
            m,
            flat.into_iter().map(|[re, im]| Complex::new(lit(re), lit(im))),
        ))
    }
}

impl<T: Real> Serialize for MeasurementEnsemble<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EnsembleRepr {
            n: self.n(),
            m: self.m(),
            a: MatrixRepr::from_matrix(&self.a),
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for MeasurementEnsemble<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = EnsembleRepr::deserialize(d)?;
        let a = repr.a.to_matrix(repr.n, repr.m).map_err(serde::de::Error::custom)?;
        MeasurementEnsemble::new(a).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn small_ensemble() -> MeasurementEnsemble<f64> {
        let a = DMatrix::from_row_slice(
            2,
            3,
            &[c(1.0, 0.5), c(-0.3, 2.0), c(0.0, -1.0), c(0.7, -0.2), c(1.1, 0.0), c(2.0, 0.4)],
        );
        MeasurementEnsemble::new(a).unwrap()
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = MeasurementEnsemble::<f64>::sample_gaussian(2, 3, 7).unwrap();
        let b = MeasurementEnsemble::<f64>::sample_gaussian(2, 3, 7).unwrap();
        let c = MeasurementEnsemble::<f64>::sample_gaussian(2, 3, 8).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert_ne!(a.matrix(), c.matrix());
        assert_eq!(a.matrix().shape(), (2, 3));
    }

    #[test]
    fn rejects_empty_or_nonfinite() {
        assert!(MeasurementEnsemble::<f64>::sample_gaussian(0, 3, 1).is_err());
        let a = DMatrix::from_element(1, 1, c(f64::NAN, 0.0));
        assert!(MeasurementEnsemble::new(a).is_err());
    }

    #[test]
    fn forward_of_zero_and_identity() {
        let ens = small_ensemble();
        assert_eq!(ens.forward(&HermitianMatrix::zeros(2)).unwrap(), DVector::zeros(3));

        let id = MeasurementEnsemble::<f64>::identity(3).unwrap();
        let x = HermitianMatrix::from_complex(&DMatrix::from_row_slice(
            3,
            3,
            &[
                c(2.0, 0.0), c(1.0, 1.0), c(0.0, 0.0),
                c(1.0, -1.0), c(-1.0, 0.0), c(0.5, 0.5),
                c(0.0, 0.0), c(0.5, -0.5), c(4.0, 0.0),
            ],
        ))
        .unwrap();
        let y = id.forward(&x).unwrap();
        assert_eq!(y.as_slice(), &[2.0, -1.0, 4.0]);
    }

    #[test]
    fn forward_matches_per_measurement_quadratic_form() {
        let ens = small_ensemble();
        let x = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let lifted = HermitianMatrix::outer(&x);
        let got = ens.forward(&lifted).unwrap();
        for i in 0..3 {
            let ai = ens.matrix().column(i);
            let inner: Complex<f64> = ai.iter().zip(x.iter()).map(|(a, v)| a.conj() * v).sum();
            assert!((got[i] - inner.norm_sqr()).abs() < 1e-13, "entry {i}");
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let ens = small_ensemble();
        assert!(matches!(
            ens.forward(&HermitianMatrix::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(ens.adjoint(&DVector::zeros(2)).is_err());
    }

    #[test]
    fn adjoint_of_zero_and_identity() {
        let ens = small_ensemble();
        assert_eq!(ens.adjoint(&DVector::zeros(3)).unwrap(), HermitianMatrix::zeros(2));
        let id = MeasurementEnsemble::<f64>::identity(3).unwrap();
        let y = DVector::from_vec(vec![1.0, -2.0, 3.5]);
        assert_eq!(id.adjoint(&y).unwrap(), HermitianMatrix::from_real_diagonal(&[1.0, -2.0, 3.5]));
    }

    #[test]
    fn gram_of_identity_is_identity_and_entries_nonnegative() {
        let id = MeasurementEnsemble::<f64>::identity(4).unwrap();
        assert_eq!(id.gram(), &DMatrix::identity(4, 4));
        assert_eq!(id.operator_norm(), 1.0);
        let g = MeasurementEnsemble::<f64>::sample_gaussian(3, 7, 11).unwrap();
        assert!(g.gram().iter().all(|v| *v >= 0.0));
        assert_eq!(g.gram(), &g.gram().transpose());
    }

    #[test]
    fn gram_matches_column_by_column_assembly() {
        let ens = MeasurementEnsemble::<f64>::sample_gaussian(2, 2, 3).unwrap();
        let g = ens.gram();
        for j in 0..2 {
            let mut e = DVector::zeros(2);
            e[j] = 1.0;
            let col = ens.forward(&ens.adjoint(&e).unwrap()).unwrap();
            for i in 0..2 {
                assert!((g[(i, j)] - col[i]).abs() < 1e-12 * (1.0 + col[i].abs()));
            }
        }
    }

    #[test]
    fn operator_norm_matches_dense_eigensolver() {
        let ens = MeasurementEnsemble::<f64>::sample_gaussian(5, 17, 99).unwrap();
        let eig = ens.gram().clone().symmetric_eigen();
        let top = eig.eigenvalues.max();
        assert!((ens.operator_norm() - top.sqrt()).abs() <= 1e-8 * top.sqrt());
    }

    #[test]
    fn regularized_inverse_zero_and_bad_delta() {
        let ens = small_ensemble();
        let z = HermitianMatrix::zeros(2);
        assert_eq!(ens.apply_regularized_inverse(1.0, &z).unwrap(), z);
        assert!(ens.apply_regularized_inverse(0.0, &z).is_err());
        assert!(ens.apply_regularized_inverse(-1.0, &z).is_err());
    }

    #[test]
    fn regularized_inverse_round_trip() {
        let ens = MeasurementEnsemble::<f64>::sample_gaussian(3, 6, 5).unwrap();
        let x = HermitianMatrix::from_complex(&DMatrix::from_fn(3, 3, |i, j| {
            c((i + 2 * j) as f64 - 1.5, (i as f64) - (j as f64) * 0.5)
        }))
        .unwrap();
        let inv = ens.apply_regularized_inverse(1.0, &x).unwrap();
        let back = ens.apply_regularized(1.0, &inv).unwrap();
        assert!((&back - &x).frobenius_norm() <= 1e-9 * x.frobenius_norm());
    }

    #[test]
    fn factor_cache_is_bounded() {
        let ens = small_ensemble();
        for k in 0..20 {
            ens.regularized_inverse(1.0 + k as f64).unwrap();
        }
        assert!(ens.factors.lock().unwrap().len() <= FACTOR_CACHE_SLOTS);
    }

    #[test]
    fn json_round_trip_and_flat_layout() {
        let ens = small_ensemble();
        let s = serde_json::to_string(&ens).unwrap();
        let back: MeasurementEnsemble<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back.matrix(), ens.matrix());

        let flat = r#"{"n":2,"m":1,"a":[[1.0,2.0],[3.0,-4.0]]}"#;
        let e: MeasurementEnsemble<f64> = serde_json::from_str(flat).unwrap();
        assert_eq!(e.matrix()[(1, 0)], c(3.0, -4.0));

        let bad = r#"{"n":3,"m":1,"a":[[1.0,2.0],[3.0,-4.0]]}"#;
        assert!(serde_json::from_str::<MeasurementEnsemble<f64>>(bad).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let ens = MeasurementEnsemble::<f32>::sample_gaussian(3, 9, 1).unwrap();
        let x = HermitianMatrix::<f32>::identity(3);
        let y = DVector::from_fn(9, |i, _| i as f32 * 0.1);
        let lhs = ens.forward(&x).unwrap().dot(&y);
        let rhs = x.inner(&ens.adjoint(&y).unwrap());
        assert!((lhs - rhs).abs() <= 1e-4 * (1.0 + lhs.abs()));
    }
}
