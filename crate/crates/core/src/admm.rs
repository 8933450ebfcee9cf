//! ADMM for the convex subproblem
//!
//! ```text
//! min_X  1/2 ||A(X) - b||^2 + <X, W>   s.t.  X >= 0,  X in Omega
//! ```
//!
//! split as `X - Z = 0` with `Z` carrying the semidefinite constraint. Each
//! sweep performs
//!
//! ```text
//! X <- P_Omega((A*A + delta Id)^{-1}(A*(b) - W + delta Z - Y))
//! Z <- P_psd(X + Y / delta)
//! Y <- Y + delta (X - Z)
//! ```
//!
//! `Y` is kept unscaled. When the penalty changes, the scaled dual `Y / delta`
//! is therefore implicitly rescaled by `delta_old / delta_new`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::measurement::{MeasurementEnsemble, RegularizedInverse};
use crate::scalar::{lit, to_f64, Real};
use crate::spectral::{project_constraint, project_psd, ConstraintClass};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig<T> {
    /// Initial augmented-Lagrangian penalty.
    pub delta0: T,
    pub eps_abs: T,
    pub eps_rel: T,
    pub max_iters: usize,
    /// Residual balancing: double / halve `delta` when one residual dominates
    /// the other by a factor of ten.
    pub adaptive_delta: bool,
    /// Sweeps per solve during which residual balancing may change `delta`;
    /// afterwards the penalty is frozen so the iteration cannot cycle.
    pub adapt_window: usize,
}

impl<T: Real> Default for AdmmConfig<T> {
    fn default() -> Self {
        Self {
            delta0: T::one(),
            eps_abs: lit(1e-7),
            eps_rel: lit(1e-5),
            max_iters: 5000,
            adaptive_delta: true,
            adapt_window: 2000,
        }
    }
}

impl<T: Real> AdmmConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(self.delta0) || !positive(self.eps_abs) || !positive(self.eps_rel) {
            return Err(Error::Contract(format!(
                "ADMM delta0, eps_abs, eps_rel must be positive (got {:e}, {:e}, {:e})",
                to_f64(self.delta0),
                to_f64(self.eps_abs),
                to_f64(self.eps_rel)
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Contract("ADMM max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Iterate triple and bookkeeping; doubles as the warm start for the next solve.
#[derive(Clone, Debug)]
pub struct AdmmState<T: Real> {
    pub x: HermitianMatrix<T>,
    /// Positive semidefinite after every sweep.
    pub z: HermitianMatrix<T>,
    /// Unscaled dual.
    pub y: HermitianMatrix<T>,
    pub delta: T,
    /// Sweeps performed since the cold start, across warm restarts.
    pub iter: usize,
    /// `||X - Z||_F` after the last sweep.
    pub r_norm: T,
    /// `delta ||Z - Z_prev||_F` after the last sweep.
    pub s_norm: T,
}

impl<T: Real> AdmmState<T> {
    pub fn cold(n: usize, delta: T) -> Self {
        Self {
            x: HermitianMatrix::zeros(n),
            z: HermitianMatrix::zeros(n),
            y: HermitianMatrix::zeros(n),
            delta,
            iter: 0,
            r_norm: T::zero(),
            s_norm: T::zero(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdmmTermination {
    /// Both residual tests passed.
    Residuals,
    IterationCap,
}

#[derive(Clone, Debug)]
pub struct AdmmOutcome<T: Real> {
    /// The returned solution: the positive semidefinite iterate `Z`.
    pub x: HermitianMatrix<T>,
    pub state: AdmmState<T>,
    pub termination: AdmmTermination,
    /// Sweeps performed by this call.
    pub iterations: usize,
}

/// `2 delta` if `r > 10 s`, `delta / 2` if `10 r < s`, otherwise `delta`.
pub fn adapt_penalty<T: Real>(delta: T, r_norm: T, s_norm: T) -> T {
    let ten: T = lit(10.0);
    if r_norm > ten * s_norm {
        delta * lit(2.0)
    } else if ten * r_norm < s_norm {
        delta * lit(0.5)
    } else {
        delta
    }
}

/// Stepwise ADMM driver for one subproblem.
pub struct AdmmSolver<'a, T: Real> {
    ens: &'a MeasurementEnsemble<T>,
    /// `A*(b) - W`, fixed for the whole solve.
    rhs: HermitianMatrix<T>,
    omega: ConstraintClass,
    cfg: AdmmConfig<T>,
    state: AdmmState<T>,
    inverse: RegularizedInverse<'a, T>,
    /// Sweeps performed by this solver.
    sweeps: usize,
}

impl<'a, T: Real> AdmmSolver<'a, T> {
    pub fn new(
        ens: &'a MeasurementEnsemble<T>,
        b: &DVector<T>,
        w: &HermitianMatrix<T>,
        omega: ConstraintClass,
        cfg: AdmmConfig<T>,
        warm: Option<AdmmState<T>>,
    ) -> Result<Self> {
        cfg.validate()?;
        check_dim("ADMM measurements", ens.m(), b.len())?;
        check_dim("ADMM weight matrix", ens.n(), w.dim())?;
        let state = match warm {
            Some(s) => {
                check_dim("ADMM warm start", ens.n(), s.x.dim())?;
                if !(s.delta > T::zero()) {
                    return Err(Error::Contract("warm-start penalty must be positive".into()));
                }
                s
            }
            None => AdmmState::cold(ens.n(), cfg.delta0),
        };
        let rhs = &ens.adjoint(b)? - w;
        let inverse = ens.regularized_inverse(state.delta)?;
        Ok(Self {
            ens,
            rhs,
            omega,
            cfg,
            state,
            inverse,
            sweeps: 0,
        })
    }

    pub fn state(&self) -> &AdmmState<T> {
        &self.state
    }

    /// One X/Z/Y sweep. Returns whether the stopping test passed.
    pub fn step(&mut self) -> Result<bool> {
        let st = &mut self.state;
        let delta = st.delta;
        let n: T = lit(self.ens.n() as f64);

        // rhs + delta Z - Y
        let arg = self.rhs.axpy(delta, &st.z).axpy(-T::one(), &st.y);
        let x = project_constraint(&self.inverse.apply(&arg)?, self.omega);
        let z = project_psd(&x.axpy(T::one() / delta, &st.y))?;
        let r = &x - &z;
        let y = st.y.axpy(delta, &r);

        let r_norm = r.frobenius_norm();
        let s_norm = delta * (&z - &st.z).frobenius_norm();
        let eps_pri = n * self.cfg.eps_abs + self.cfg.eps_rel * x.frobenius_norm().max(z.frobenius_norm());
        let eps_dual = n * self.cfg.eps_abs + self.cfg.eps_rel * y.frobenius_norm();

        st.x = x;
        st.z = z;
        st.y = y;
        st.iter += 1;
        st.r_norm = r_norm;
        st.s_norm = s_norm;
        self.sweeps += 1;

        if !r_norm.is_finite() || !s_norm.is_finite() {
            return Err(Error::Numerical(format!(
                "ADMM residuals became non-finite at sweep {}",
                st.iter
            )));
        }
        let converged = r_norm <= eps_pri && s_norm <= eps_dual;
        if !converged && self.cfg.adaptive_delta && self.sweeps <= self.cfg.adapt_window {
            let next = adapt_penalty(delta, r_norm, s_norm);
            if next != delta {
                st.delta = next;
                self.inverse = self.ens.regularized_inverse(next)?;
            }
        }
        Ok(converged)
    }

    /// Runs at most `budget` sweeps.
    pub fn run(&mut self, budget: usize) -> Result<(AdmmTermination, usize)> {
        for k in 0..budget {
            if self.step()? {
                return Ok((AdmmTermination::Residuals, k + 1));
            }
        }
        Ok((AdmmTermination::IterationCap, budget))
    }

    pub fn into_outcome(self, termination: AdmmTermination, iterations: usize) -> AdmmOutcome<T> {
        AdmmOutcome {
            x: self.state.z.clone(),
            state: self.state,
            termination,
            iterations,
        }
    }
}

/// Solves the subproblem to the configured tolerances, optionally warm-started.
pub fn solve_subproblem<T: Real>(
    ens: &MeasurementEnsemble<T>,
    b: &DVector<T>,
    w: &HermitianMatrix<T>,
    omega: ConstraintClass,
    cfg: &AdmmConfig<T>,
    warm: Option<AdmmState<T>>,
) -> Result<AdmmOutcome<T>> {
    let mut solver = AdmmSolver::new(ens, b, w, omega, *cfg, warm)?;
    let (termination, iterations) = solver.run(cfg.max_iters)?;
    Ok(solver.into_outcome(termination, iterations))
}
