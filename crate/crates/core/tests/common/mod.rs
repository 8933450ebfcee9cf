#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phaselift_core::{Ensemble64, Hermitian64, Signal64};

pub mod props;

pub type C64 = Complex<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-1.0..1.0)
}

pub fn complex_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| C64::new(uniform(rng), uniform(rng)))
}

pub fn complex_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<C64> {
    DVector::from_fn(n, |_, _| C64::new(uniform(rng), uniform(rng)))
}

pub fn real_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| uniform(rng))
}

pub fn hermitian(n: usize, rng: &mut ChaCha8Rng) -> Hermitian64 {
    Hermitian64::from_complex(&complex_matrix(n, n, rng)).unwrap()
}

/// `B B*` for a random `n x r` factor.
pub fn psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> Hermitian64 {
    let b = complex_matrix(n, rank, rng);
    Hermitian64::from_complex(&(&b * b.adjoint())).unwrap()
}

pub fn ensemble(n: usize, m: usize, seed: u64) -> Ensemble64 {
    Ensemble64::sample_gaussian(n, m, seed).unwrap()
}

/// Planted noiseless instance `(A, x, b = |A* x|^2)` with `b` computed entry by entry.
pub fn planted(n: usize, m: usize, seed: u64) -> (Ensemble64, Signal64, DVector<f64>) {
    let ens = ensemble(n, m, seed);
    let mut r = rng(seed ^ 0x5eed);
    let x = Signal64::new(complex_vector(n, &mut r)).unwrap();
    let b = brute_forward(ens.matrix(), &x.lift().to_complex());
    (ens, x, b)
}

/// `b_k = a_k* X a_k` by explicit complex sums.
pub fn brute_forward(a: &DMatrix<C64>, x: &DMatrix<C64>) -> DVector<f64> {
    let (n, m) = a.shape();
    DVector::from_fn(m, |k, _| {
        let mut s = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                s += a[(i, k)].conj() * x[(i, j)] * a[(j, k)];
            }
        }
        s.re
    })
}

/// `sum_k y_k a_k a_k*` by explicit complex sums.
pub fn brute_adjoint(a: &DMatrix<C64>, y: &DVector<f64>) -> DMatrix<C64> {
    let (n, m) = a.shape();
    DMatrix::from_fn(n, n, |i, j| {
        (0..m).fold(C64::new(0.0, 0.0), |s, k| s + a[(i, k)] * a[(j, k)].conj() * y[k])
    })
}

pub fn complex_frobenius(x: &DMatrix<C64>) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Real coordinates of a Hermitian matrix: diagonal, then `re` and `im` of the strict upper triangle,
/// scaled so the Euclidean norm equals the Frobenius norm.
pub fn hermitian_to_coords(x: &DMatrix<C64>) -> DVector<f64> {
    let n = x.nrows();
    let mut v = Vec::with_capacity(n * n);
    for i in 0..n {
        v.push(x[(i, i)].re);
    }
    let s = std::f64::consts::SQRT_2;
    for j in 0..n {
        for i in 0..j {
            v.push(s * x[(i, j)].re);
            v.push(s * x[(i, j)].im);
        }
    }
    DVector::from_vec(v)
}

pub fn coords_to_hermitian(v: &DVector<f64>, n: usize) -> DMatrix<C64> {
    let mut x = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for i in 0..n {
        x[(i, i)] = C64::new(v[i], 0.0);
    }
    let s = std::f64::consts::SQRT_2;
    let mut k = n;
    for j in 0..n {
        for i in 0..j {
            let z = C64::new(v[k] / s, v[k + 1] / s);
            x[(i, j)] = z;
            x[(j, i)] = z.conj();
            k += 2;
        }
    }
    x
}

/// The real `n^2 x n^2` matrix of `X -> A*(A(X))` in [`hermitian_to_coords`] coordinates,
/// assembled column by column from the brute-force operators.
pub fn dense_normal_operator(a: &DMatrix<C64>) -> DMatrix<f64> {
    let n = a.nrows();
    let d = n * n;
    let mut out = DMatrix::zeros(d, d);
    for c in 0..d {
        let mut e = DVector::zeros(d);
        e[c] = 1.0;
        let x = coords_to_hermitian(&e, n);
        let y = brute_adjoint(a, &brute_forward(a, &x));
        out.set_column(c, &hermitian_to_coords(&y));
    }
    out
}

/// Eigenvalues of a Hermitian matrix via the real symmetric `2n x 2n` embedding
/// `[[R, -S], [S, R]]`, each eigenvalue appearing twice; returns one copy, descending.
pub fn embedded_eigenvalues(x: &DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(embed(x)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev.into_iter().step_by(2).collect()
}

fn embed(x: &DMatrix<C64>) -> DMatrix<f64> {
    let n = x.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = x[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// PSD projection computed on the real embedding with a real symmetric eigensolver.
pub fn embedded_psd_clamp(x: &DMatrix<C64>) -> DMatrix<C64> {
    let n = x.nrows();
    let eig = nalgebra::SymmetricEigen::new(embed(x));
    let clamped = DMatrix::from_diagonal(&eig.eigenvalues.map(|s| s.max(0.0)));
    let big = &eig.eigenvectors * clamped * eig.eigenvectors.transpose();
    DMatrix::from_fn(n, n, |i, j| C64::new(big[(i, j)], big[(n + i, j)]))
}
