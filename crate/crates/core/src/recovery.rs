//! Signal extraction, phase-invariant error metrics, noise injection and the
//! theory-side scales for choosing `lambda`.

use nalgebra::DVector;
use num_complex::Complex;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::measurement::{MeasurementEnsemble, SeededRng};
use crate::scalar::{lit, modulus, to_f64, Real};
use crate::spectral::{check_psd, eigh, leading_eigpair};

/// Reconstruction SNR reported for an exact (zero-error) recovery.
pub const SNR_CAP_DB: f64 = 300.0;

/// Relative MSE below which a recovery counts as exact.
pub const SUCCESS_REL_MSE: f64 = 1e-6;

/// A complex signal in `C^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal<T: Real>(pub DVector<Complex<T>>);

impl<T: Real> Signal<T> {
    pub fn new(values: DVector<Complex<T>>) -> Result<Self> {
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("signal has non-finite entries".into()));
        }
        Ok(Self(values))
    }

    /// Signal with i.i.d. standard normal real and imaginary parts.
    pub fn sample_gaussian(n: usize, rng: &mut SeededRng) -> Self {
        Self(DVector::from_fn(n, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex::new(lit(re), lit(im))
        }))
    }

    /// Real nonnegative signal `|g|` with `g` standard normal.
    pub fn sample_nonnegative(n: usize, rng: &mut SeededRng) -> Self {
        Self(DVector::from_fn(n, |_, _| {
            let v: f64 = StandardNormal.sample(rng);
            Complex::new(lit(v.abs()), T::zero())
        }))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &DVector<Complex<T>> {
        &self.0
    }

    pub fn norm(&self) -> T {
        self.0.norm()
    }

    /// `x x*`.
    pub fn lift(&self) -> HermitianMatrix<T> {
        HermitianMatrix::outer(&self.0)
    }

    pub fn scaled(&self, c: Complex<T>) -> Self {
        Self(self.0.map(|z| z * c))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryReport<T: Real> {
    pub rel_mse: T,
    pub snr_db: T,
    /// `rel_mse < 1e-6`.
    pub success: bool,
    /// The recovered signal rotated by the optimal global phase.
    pub aligned_signal: Signal<T>,
}

impl<T: Real> RecoveryReport<T> {
    pub fn evaluate(recovered: &Signal<T>, truth: &Signal<T>) -> Result<Self> {
        let c = optimal_phase(recovered, truth)?;
        let aligned = recovered.scaled(c);
        let err = rel_mse(recovered, truth)?;
        Ok(Self {
            rel_mse: err,
            snr_db: snr_db(err)?,
            success: is_success(err),
            aligned_signal: aligned,
        })
    }
}

pub fn is_success<T: Real>(rel_mse: T) -> bool {
    rel_mse < lit(SUCCESS_REL_MSE)
}

/// `sqrt(sigma_1) u_1` with the phase of `u_1` canonicalized.
pub fn extract_signal<T: Real>(x: &HermitianMatrix<T>) -> Result<Signal<T>> {
    let eig = eigh(x)?;
    check_psd(&eig, "extract_signal")?;
    let (sigma, u) = leading_eigpair(x)?;
    Signal::new(u * Complex::new(sigma.max(T::zero()).sqrt(), T::zero()))
}

fn optimal_phase<T: Real>(recovered: &Signal<T>, truth: &Signal<T>) -> Result<Complex<T>> {
    check_dim("signal length", truth.len(), recovered.len())?;
    // <x_rec, x_true> = x_rec^* x_true
    let inner = recovered.0.dotc(&truth.0);
    let modulus = modulus(inner);
    Ok(if modulus == T::zero() {
        Complex::new(T::one(), T::zero())
    } else {
        inner / modulus
    })
}

/// `min_{|c|=1} ||c x_rec - x_true||^2 / ||x_true||^2`.
pub fn rel_mse<T: Real>(recovered: &Signal<T>, truth: &Signal<T>) -> Result<T> {
    let t2 = truth.0.norm_squared();
    if t2 == T::zero() {
        return Err(Error::Contract("rel_mse: reference signal is zero".into()));
    }
    let c = optimal_phase(recovered, truth)?;
    let diff = recovered.0.map(|z| z * c) - &truth.0;
    Ok(diff.norm_squared() / t2)
}

/// `-10 log10(rel_mse)`, saturating at [`SNR_CAP_DB`].
pub fn snr_db<T: Real>(rel_mse: T) -> Result<T> {
    if !(rel_mse >= T::zero()) {
        return Err(Error::Contract(format!("snr_db: rel_mse must be >= 0, got {}", to_f64(rel_mse))));
    }
    let cap: T = lit(SNR_CAP_DB);
    if rel_mse == T::zero() {
        return Ok(cap);
    }
    Ok((-lit::<T>(10.0) * rel_mse.log10()).min(cap))
}

/// Adds real white Gaussian noise with `||b||^2 / ||e||^2` exactly `10^(snr/10)`.
///
/// `snr_db = None` means noiseless (`e = 0`).
pub fn add_noise<T: Real>(b: &DVector<T>, snr_db: Option<T>, seed: u64) -> Result<(DVector<T>, DVector<T>)> {
    let bn = b.norm();
    if bn == T::zero() {
        return Err(Error::Contract("add_noise: measurement vector is zero".into()));
    }
    let Some(snr) = snr_db else {
        return Ok((b.clone(), DVector::zeros(b.len())));
    };
    if !snr.is_finite() {
        return Err(Error::Contract("add_noise: SNR must be finite (use None for noiseless)".into()));
    }
    let mut rng = SeededRng::seed_from_u64(seed);
    let raw = DVector::from_fn(b.len(), |_, _| {
        let v: f64 = StandardNormal.sample(&mut rng);
        lit::<T>(v)
    });
    let rn = raw.norm();
    if rn == T::zero() {
        return Err(Error::Numerical("add_noise: sampled a zero noise vector".into()));
    }
    let target = bn * lit::<T>(10.0).powf(-snr / lit(20.0));
    let e = raw * (target / rn);
    Ok((b + &e, e))
}

/// `mu = ||A|| ||e||_2`, the natural unit for `lambda` under noise.
pub fn lambda_scale<T: Real>(ens: &MeasurementEnsemble<T>, e_norm: T) -> T {
    ens.operator_norm() * e_norm
}

/// `mu / (sqrt 2 - 1)`: above this `lambda`, PhaseLiftOff minimizers are rank one.
pub fn equivalence_threshold<T: Real>(mu: T) -> T {
    mu / (lit::<T>(2.0).sqrt() - T::one())
}

/// `C_alpha ||e|| / sqrt(m)` with `C_alpha = sqrt 2 / ((sqrt 2 - 1)(1 - alpha))`.
pub fn stability_bound<T: Real>(alpha: T, e_norm: T, m: usize) -> Result<T> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::Contract(format!("stability_bound: alpha must lie in (0, 1), got {}", to_f64(alpha))));
    }
    if m == 0 {
        return Err(Error::Contract("stability_bound: m must be positive".into()));
    }
    let s2 = lit::<T>(2.0).sqrt();
    let c_alpha = s2 / ((s2 - T::one()) * (T::one() - alpha));
    Ok(c_alpha * e_norm / lit::<T>(m as f64).sqrt())
}

/// Signal as `[re, im]` pairs.
pub fn signal_to_pairs<T: Real>(s: &Signal<T>) -> Vec<[f64; 2]> {
    s.0.iter().map(|z| [to_f64(z.re), to_f64(z.im)]).collect()
}

pub fn signal_from_pairs<T: Real>(pairs: &[[f64; 2]]) -> Result<Signal<T>> {
    Signal::new(DVector::from_iterator(
        pairs.len(),
        pairs.iter().map(|[re, im]| Complex::new(lit(*re), lit(*im))),
    ))
}

/// Serializable summary of a [`RecoveryReport`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RecoverySummary {
    pub rel_mse: f64,
    pub snr_db: f64,
    pub success: bool,
}

impl<T: Real> From<&RecoveryReport<T>> for RecoverySummary {
    fn from(r: &RecoveryReport<T>) -> Self {
        Self {
            rel_mse: to_f64(r.rel_mse),
            snr_db: to_f64(r.snr_db),
            success: r.success,
        }
    }
}
