//! Outer iterations for the lifted phase retrieval models.
//!
//! * [`Method::PhaseLiftOff`] minimizes
//!   `phi(X) = 1/2 ||A(X) - b||^2 + lambda (Tr X - ||X||_F)` over `X >= 0` by
//!   linearizing the concave `-lambda ||X||_F` term at the current iterate.
//! * [`Method::PhaseLift`] solves the trace-regularized problem once.
//! * [`Method::LogDet`] reweights the trace with `(X^k + eps I)^{-1}`, the
//!   same linearization applied to `lambda log det(X + eps I)`.
//!
//! All three start from `X^0 = 0` and share the ADMM subproblem solver, warm
//! started across outer iterations.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::admm::{solve_subproblem, AdmmConfig, AdmmState, AdmmTermination};
use crate::error::{check_dim, Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::measurement::MeasurementEnsemble;
use crate::scalar::{lit, to_f64, Real};
use crate::spectral::{check_psd, eigh, trace_frobenius_gap, ConstraintClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    PhaseLiftOff,
    PhaseLift,
    LogDet,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::PhaseLiftOff, Method::PhaseLift, Method::LogDet];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::PhaseLiftOff => "phaseliftoff",
            Method::PhaseLift => "phaselift",
            Method::LogDet => "logdet",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "phaseliftoff" | "plo" => Ok(Method::PhaseLiftOff),
            "phaselift" | "pl" => Ok(Method::PhaseLift),
            "logdet" => Ok(Method::LogDet),
            _ => Err(Error::Contract(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcaConfig<T> {
    pub lambda: T,
    /// Outer stopping tolerance on `||X^k - X^{k-1}||_F / max(||X^k||_F, 1)`.
    pub tol: T,
    pub max_outer: usize,
    pub admm: AdmmConfig<T>,
    pub omega: ConstraintClass,
    pub method: Method,
    /// `eps` in the log-det weight `(X + eps I)^{-1}`.
    pub logdet_eps: T,
}

impl<T: Real> Default for DcaConfig<T> {
    fn default() -> Self {
        Self {
            lambda: lit(1e-4),
            tol: lit(1e-2),
            max_outer: 10,
            admm: AdmmConfig::default(),
            omega: ConstraintClass::Complex,
            method: Method::PhaseLiftOff,
            logdet_eps: lit(2.0),
        }
    }
}

impl<T: Real> DcaConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(self.lambda) {
            return Err(Error::Contract(format!("lambda must be positive, got {:e}", to_f64(self.lambda))));
        }
        if !positive(self.tol) {
            return Err(Error::Contract(format!("tol must be positive, got {:e}", to_f64(self.tol))));
        }
        if self.max_outer == 0 {
            return Err(Error::Contract("max_outer must be at least 1".into()));
        }
        if self.method == Method::LogDet && !positive(self.logdet_eps) {
            return Err(Error::Contract("logdet_eps must be positive".into()));
        }
        self.admm.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Tolerance,
    IterationCap,
    /// The first subproblem returned `X^1 = 0`; every later iterate is zero too.
    StalledAtZero,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Tolerance => "tolerance",
            Termination::IterationCap => "iteration-cap",
            Termination::StalledAtZero => "stalled-at-zero",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scale-free first-order optimality residuals at a point `X`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals<T> {
    /// Zero: the multiplier is defined through the stationarity equation.
    pub stationarity: T,
    /// `|<X, Lambda>| / (||X||_F ||Lambda||_F)`.
    pub complementarity: T,
    /// `max(0, -lambda_min(Lambda)) / ||Lambda||_2`.
    pub dual_infeasibility: T,
}

#[derive(Clone, Debug)]
pub struct SolveResult<T: Real> {
    pub x_final: HermitianMatrix<T>,
    /// The method's own objective at `X^0 = 0, X^1, ...`.
    pub objective_trace: Vec<T>,
    pub outer_iters: usize,
    /// ADMM sweeps per outer iteration.
    pub inner_iters: Vec<usize>,
    /// Outer iterations whose subproblem hit the ADMM iteration cap.
    pub inner_caps_hit: usize,
    pub termination: Termination,
    /// `None` when `x_final = 0`.
    pub kkt: Option<KktResiduals<T>>,
    /// `sigma_2 / sigma_1` of `x_final`; zero for rank <= 1 and for the zero matrix.
    pub rank_ratio: T,
}

impl<T: Real> SolveResult<T> {
    pub fn inner_iters_total(&self) -> usize {
        self.inner_iters.iter().sum()
    }
}

/// `||X||_F` at or below this counts as the zero matrix.
pub fn zero_threshold<T: Real>(n: usize) -> T {
    lit::<T>(1e-12) * lit(n as f64)
}

fn residual<T: Real>(ens: &MeasurementEnsemble<T>, b: &DVector<T>, x: &HermitianMatrix<T>) -> Result<DVector<T>> {
    check_dim("measurements", ens.m(), b.len())?;
    Ok(ens.forward(x)? - b)
}

/// `phi(X) = 1/2 ||A(X) - b||^2 + lambda (Tr X - ||X||_F)`.
pub fn objective<T: Real>(ens: &MeasurementEnsemble<T>, b: &DVector<T>, lambda: T, x: &HermitianMatrix<T>) -> Result<T> {
    let r = residual(ens, b, x)?;
    Ok(lit::<T>(0.5) * r.norm_squared() + lambda * trace_frobenius_gap(x)?)
}

/// `1/2 ||A(X) - b||^2 + lambda Tr X`.
pub fn phaselift_objective<T: Real>(
    ens: &MeasurementEnsemble<T>,
    b: &DVector<T>,
    lambda: T,
    x: &HermitianMatrix<T>,
) -> Result<T> {
    let r = residual(ens, b, x)?;
    Ok(lit::<T>(0.5) * r.norm_squared() + lambda * x.trace())
}

/// `1/2 ||A(X) - b||^2 + lambda log det(X + eps I)`.
pub fn logdet_objective<T: Real>(
    ens: &MeasurementEnsemble<T>,
    b: &DVector<T>,
    lambda: T,
    eps: T,
    x: &HermitianMatrix<T>,
) -> Result<T> {
    let r = residual(ens, b, x)?;
    let eig = eigh(x)?;
    check_psd(&eig, "logdet_objective")?;
    let logdet = eig
        .eigenvalues
        .iter()
        .fold(T::zero(), |acc, &s| acc + (s.max(T::zero()) + eps).ln());
    Ok(lit::<T>(0.5) * r.norm_squared() + lambda * logdet)
}

/// Linear weight of the convexified PhaseLiftOff subproblem:
/// `lambda I` at the zero matrix, `lambda (I - X^k / ||X^k||_F)` otherwise.
pub fn subgradient_weight<T: Real>(x_k: &HermitianMatrix<T>, lambda: T) -> HermitianMatrix<T> {
    let n = x_k.dim();
    let norm = x_k.frobenius_norm();
    let id = HermitianMatrix::scaled_identity(n, lambda);
    if norm <= zero_threshold(n) {
        id
    } else {
        id.axpy(-lambda / norm, x_k)
    }
}

/// `lambda (X^k + eps I)^{-1}` for positive semidefinite `X^k`.
pub fn logdet_weight<T: Real>(x_k: &HermitianMatrix<T>, lambda: T, eps: T) -> Result<HermitianMatrix<T>> {
    let eig = eigh(x_k)?;
    check_psd(&eig, "logdet_weight")?;
    Ok(eig.reconstruct_with(|s| lambda / (s.max(T::zero()) + eps)))
}

/// KKT residuals for the PhaseLiftOff stationarity equation
/// `Lambda = A*(A(X) - b) + lambda (I - X / ||X||_F)`.
pub fn kkt_residuals<T: Real>(
    ens: &MeasurementEnsemble<T>,
    b: &DVector<T>,
    lambda: T,
    x: &HermitianMatrix<T>,
) -> Result<KktResiduals<T>> {
    if x.frobenius_norm() <= zero_threshold(x.dim()) {
        return Err(Error::Contract(
            "KKT residuals are undefined at X = 0 (the Frobenius norm is not differentiable there)".into(),
        ));
    }
    kkt_residuals_with_weight(ens, b, x, &subgradient_weight(x, lambda))
}

/// KKT residuals for `min 1/2 ||A(X) - b||^2 + <X, W>` over `X >= 0`, with
/// multiplier `Lambda = A*(A(X) - b) + W`.
pub fn kkt_residuals_with_weight<T: Real>(
    ens: &MeasurementEnsemble<T>,
    b: &DVector<T>,
    x: &HermitianMatrix<T>,
    w: &HermitianMatrix<T>,
) -> Result<KktResiduals<T>> {
    check_dim("KKT weight", x.dim(), w.dim())?;
    let xeig = eigh(x)?;
    check_psd(&xeig, "kkt_residuals")?;
    let r = residual(ens, b, x)?;
    let multiplier = &ens.adjoint(&r)? + w;
    let eig = eigh(&multiplier)?;
    let tiny = T::default_epsilon();
    let complementarity = x.inner(&multiplier).abs() / (x.frobenius_norm() * multiplier.frobenius_norm() + tiny);
    let dual_infeasibility = (-eig.min()).max(T::zero()) / (eig.spectral_norm() + tiny);
    Ok(KktResiduals {
        stationarity: T::zero(),
        complementarity,
        dual_infeasibility,
    })
}

/// `(||b||^2 - ||e||^2) / (2 Tr X_hat)`: below this `lambda` the first outer
/// iterate is nonzero.
pub fn no_stall_lambda_bound<T: Real>(b: &DVector<T>, e_norm: T, trace_xhat: T) -> Result<T> {
    let b2 = b.norm_squared();
    if !(e_norm >= T::zero()) || !(b2 > e_norm * e_norm) {
        return Err(Error::Contract(format!(
            "no-stall bound needs ||b|| > ||e|| >= 0 (||b|| = {:e}, ||e|| = {:e})",
            to_f64(b2.sqrt()),
            to_f64(e_norm)
        )));
    }
    if !(trace_xhat > T::zero()) {
        return Err(Error::Contract("no-stall bound needs Tr(X_hat) > 0".into()));
    }
    Ok((b2 - e_norm * e_norm) / (lit::<T>(2.0) * trace_xhat))
}

/// `sigma_2 / sigma_1` (zero when `sigma_1 <= 0`).
pub fn rank_ratio<T: Real>(x: &HermitianMatrix<T>) -> Result<T> {
    if x.dim() < 2 {
        return Ok(T::zero());
    }
    let eig = eigh(x)?;
    let s1 = eig.eigenvalues[0];
    if s1 <= T::zero() {
        return Ok(T::zero());
    }
    Ok(eig.eigenvalues[1].max(T::zero()) / s1)
}

fn method_objective<T: Real>(
    ens: &MeasurementEnsemble<T>,
    b: &DVector<T>,
    cfg: &DcaConfig<T>,
    x: &HermitianMatrix<T>,
) -> Result<T> {
    match cfg.method {
        Method::PhaseLiftOff => objective(ens, b, cfg.lambda, x),
        Method::PhaseLift => phaselift_objective(ens, b, cfg.lambda, x),
        Method::LogDet => logdet_objective(ens, b, cfg.lambda, cfg.logdet_eps, x),
    }
}

fn method_weight<T: Real>(cfg: &DcaConfig<T>, x_k: &HermitianMatrix<T>, outer: usize) -> Result<HermitianMatrix<T>> {
    let n = x_k.dim();
    match cfg.method {
        Method::PhaseLiftOff => Ok(subgradient_weight(x_k, cfg.lambda)),
        Method::PhaseLift => Ok(HermitianMatrix::scaled_identity(n, cfg.lambda)),
        Method::LogDet if outer == 0 => Ok(HermitianMatrix::scaled_identity(n, cfg.lambda)),
        Method::LogDet => logdet_weight(x_k, cfg.lambda, cfg.logdet_eps),
    }
}

/// Runs the configured method from `X^0 = 0`.
pub fn solve<T: Real>(ens: &MeasurementEnsemble<T>, b: &DVector<T>, cfg: &DcaConfig<T>) -> Result<SolveResult<T>> {
    cfg.validate()?;
    check_dim("measurements", ens.m(), b.len())?;
    let n = ens.n();
    let mut x = HermitianMatrix::zeros(n);
    let mut trace = vec![method_objective(ens, b, cfg, &x)?];
    let mut inner_iters = Vec::new();
    let mut inner_caps_hit = 0;
    let mut warm: Option<AdmmState<T>> = None;
    let mut termination = Termination::IterationCap;

    for k in 0..cfg.max_outer {
        let w = method_weight(cfg, &x, k)?;
        let out = solve_subproblem(ens, b, &w, cfg.omega, &cfg.admm, warm.take())?;
        inner_iters.push(out.iterations);
        if out.termination == AdmmTermination::IterationCap {
            inner_caps_hit += 1;
        }
        let x_next = out.x;
        warm = Some(out.state);
        trace.push(method_objective(ens, b, cfg, &x_next)?);

        let next_norm = x_next.frobenius_norm();
        let change = (&x_next - &x).frobenius_norm() / next_norm.max(T::one());
        x = x_next;
        if next_norm <= zero_threshold(n) {
            termination = Termination::StalledAtZero;
            break;
        }
        if cfg.method == Method::PhaseLift || change < cfg.tol {
            termination = Termination::Tolerance;
            break;
        }
    }

    let kkt = if x.frobenius_norm() <= zero_threshold(n) {
        None
    } else {
        let w = match cfg.method {
            Method::PhaseLiftOff => subgradient_weight(&x, cfg.lambda),
            Method::PhaseLift => HermitianMatrix::scaled_identity(n, cfg.lambda),
            Method::LogDet => logdet_weight(&x, cfg.lambda, cfg.logdet_eps)?,
        };
        Some(kkt_residuals_with_weight(ens, b, &x, &w)?)
    };
    let rank_ratio = rank_ratio(&x)?;
    Ok(SolveResult {
        x_final: x,
        outer_iters: inner_iters.len(),
        objective_trace: trace,
        inner_iters,
        inner_caps_hit,
        termination,
        kkt,
        rank_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert_eq!("PhaseLiftOff".parse::<Method>().unwrap(), Method::PhaseLiftOff);
        assert_eq!("log-det".parse::<Method>().unwrap(), Method::LogDet);
        assert!("fista".parse::<Method>().is_err());
    }

    #[test]
    fn subgradient_weight_cases() {
        let w = subgradient_weight(&HermitianMatrix::<f64>::zeros(3), 0.5);
        assert_eq!(w, HermitianMatrix::scaled_identity(3, 0.5));

        let v = DVector::from_vec(vec![Complex::new(0.6, 0.0), Complex::new(0.0, 0.8)]);
        let vv = HermitianMatrix::outer(&v);
        let w = subgradient_weight(&vv, 2.0);
        let want = HermitianMatrix::scaled_identity(2, 2.0).axpy(-2.0, &vv);
        assert!((&w - &want).frobenius_norm() < 1e-14);
    }

    #[test]
    fn no_stall_bound_formula() {
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(no_stall_lambda_bound(&b, 0.0, 1.0).unwrap(), 1.0);
        let b = DVector::from_vec(vec![2.0, 1.0]);
        assert_eq!(no_stall_lambda_bound(&b, 1.0, 2.0).unwrap(), 1.0);
        assert!(no_stall_lambda_bound(&b, 3.0, 2.0).is_err());
        assert!(no_stall_lambda_bound(&b, 0.0, 0.0).is_err());
    }

    #[test]
    fn zero_data_stalls_at_zero() {
        let ens = MeasurementEnsemble::<f64>::sample_gaussian(4, 16, 3).unwrap();
        let res = solve(&ens, &DVector::zeros(16), &DcaConfig::default()).unwrap();
        assert_eq!(res.termination, Termination::StalledAtZero);
        assert_eq!(res.x_final.frobenius_norm(), 0.0);
        assert!(res.kkt.is_none());
        assert_eq!(res.outer_iters, 1);
    }

    #[test]
    fn objective_at_zero_is_half_data_energy() {
        let ens = MeasurementEnsemble::<f64>::sample_gaussian(3, 7, 8).unwrap();
        let b = DVector::from_fn(7, |i, _| i as f64 - 2.0);
        let phi = objective(&ens, &b, 0.3, &HermitianMatrix::zeros(3)).unwrap();
        assert!((phi - 0.5 * b.norm_squared()).abs() < 1e-14);
    }

    #[test]
    fn kkt_at_zero_is_an_error() {
        let ens = MeasurementEnsemble::<f64>::sample_gaussian(3, 7, 8).unwrap();
        assert!(kkt_residuals(&ens, &DVector::zeros(7), 1.0, &HermitianMatrix::zeros(3)).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = DcaConfig::<f64>::default();
        assert!(cfg.validate().is_ok());
        cfg.lambda = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = DcaConfig::<f64> {
            method: Method::LogDet,
            ..Default::default()
        };
        cfg.logdet_eps = -1.0;
        assert!(cfg.validate().is_err());
    }
}
