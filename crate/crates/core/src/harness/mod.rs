//! Monte-Carlo experiment drivers behind the `phaselift` command-line tool.
//!
//! Each driver expands an [`ExperimentSpec`] into independent cells, runs them
//! (in parallel when `jobs != 1`), and returns a [`ResultTable`] whose row order
//! depends only on the [`ExperimentSpec`]. Timing is the only nondeterministic column.

mod experiments;
pub mod grid;
mod instance;
pub mod seed;
mod table;

use std::io;

use thiserror::Error;

use crate::dca::{DcaConfig, Method};

pub use experiments::{
    mean_snr_out, phase_transition_cell, run_experiment, run_noise_sweep, run_norm_table, run_phase_transition,
    PlantedInstance,
};
pub use instance::{run_single_recover, Instance, SingleRecoverReport};
pub use table::{format_real, ExperimentKind, OutputFormat, ResultRow, ResultTable, COLUMNS};

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Malformed or inconsistent user input.
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] crate::Error),
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<io::Error> for HarnessError {
    fn from(e: io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl HarnessError {
    /// Process exit code: 2 for input errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Input(_) | HarnessError::Io(_) => 2,
            HarnessError::Numerical(crate::Error::Numerical(_) | crate::Error::NoLeadingEigenpair) => 3,
            HarnessError::Numerical(_) => 2,
        }
    }
}

/// How `lambda` is chosen per solve.
#[derive(Clone, Debug, PartialEq)]
pub enum LambdaPolicy {
    Fixed(f64),
    /// `lambda = factor * ||A|| ||e||_2` for each factor. When the noise is
    /// zero the solver's configured `lambda` is used instead.
    MuMultiples(Vec<f64>),
}

impl LambdaPolicy {
    pub fn factors(&self) -> Vec<Option<f64>> {
        match self {
            LambdaPolicy::Fixed(_) => vec![None],
            LambdaPolicy::MuMultiples(f) => f.iter().copied().map(Some).collect(),
        }
    }

    /// Resolves `lambda` for one factor of this policy given `mu`.
    pub fn resolve(&self, factor: Option<f64>, mu: f64, fallback: f64) -> f64 {
        match (self, factor) {
            (LambdaPolicy::Fixed(v), _) => *v,
            (LambdaPolicy::MuMultiples(_), Some(f)) if mu > 0.0 => f * mu,
            _ => fallback,
        }
    }
}

/// Declarative description of a Monte-Carlo campaign.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub n_values: Vec<usize>,
    /// Measurement counts. For the norm table an empty list means `m = 4n`.
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    pub methods: Vec<Method>,
    pub lambda_policy: LambdaPolicy,
    /// Noise levels (noise sweep only); `None` is noiseless.
    pub snr_levels_db: Vec<Option<f64>>,
    pub solver: DcaConfig<f64>,
    /// Worker threads; `0` uses all cores.
    pub jobs: usize,
}

impl ExperimentSpec {
    fn base(kind: ExperimentKind, trials: usize) -> Self {
        Self {
            kind,
            n_values: vec![32],
            m_values: Vec::new(),
            trials,
            base_seed: 0,
            methods: vec![Method::PhaseLiftOff],
            lambda_policy: LambdaPolicy::Fixed(DcaConfig::<f64>::default().lambda),
            snr_levels_db: Vec::new(),
            solver: DcaConfig::default(),
            jobs: 0,
        }
    }

    /// `||A||` for `m = 4n`, 10 samples per `n`.
    pub fn norm_table(n_values: Vec<usize>) -> Self {
        Self {
            n_values,
            ..Self::base(ExperimentKind::NormTable, 10)
        }
    }

    /// Noiseless success rates over an `m` grid, 20 trials per cell, all three methods.
    pub fn phase_transition(n: usize, m_values: Vec<usize>) -> Self {
        Self {
            n_values: vec![n],
            m_values,
            methods: Method::ALL.to_vec(),
            ..Self::base(ExperimentKind::PhaseTransition, 20)
        }
    }

    /// Output SNR against input SNR for `lambda` in multiples of `mu`, 10 trials per level.
    pub fn noise_sweep(n: usize, m: usize, snr_levels_db: Vec<Option<f64>>, mu_factors: Vec<f64>) -> Self {
        Self {
            n_values: vec![n],
            m_values: vec![m],
            snr_levels_db,
            lambda_policy: LambdaPolicy::MuMultiples(mu_factors),
            ..Self::base(ExperimentKind::NoiseSweep, 10)
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let input = |s: String| Err(HarnessError::Input(s));
        if self.trials == 0 {
            return input("trials must be at least 1".into());
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return input("n values must be a nonempty list of positive integers".into());
        }
        if self.m_values.contains(&0) {
            return input("m values must be positive".into());
        }
        let needs_m = matches!(self.kind, ExperimentKind::PhaseTransition | ExperimentKind::NoiseSweep);
        if needs_m && self.m_values.is_empty() {
            return input(format!("{} needs at least one m value", self.kind));
        }
        if self.kind == ExperimentKind::NormTable
            && self.m_values.len() > 1
            && self.m_values.len() != self.n_values.len()
        {
            return input("norm-table m override must be a single value or one per n".into());
        }
        if matches!(self.kind, ExperimentKind::PhaseTransition | ExperimentKind::NoiseSweep) && self.methods.is_empty() {
            return input("at least one method is required".into());
        }
        if self.kind == ExperimentKind::NoiseSweep && self.snr_levels_db.is_empty() {
            return input("noise-sweep needs at least one SNR level".into());
        }
        match &self.lambda_policy {
            LambdaPolicy::Fixed(v) if !(*v > 0.0 && v.is_finite()) => {
                return input(format!("lambda must be positive, got {v}"));
            }
            LambdaPolicy::MuMultiples(f) if f.is_empty() || f.iter().any(|v| !(*v > 0.0 && v.is_finite())) => {
                return input("mu factors must be a nonempty list of positive reals".into());
            }
            _ => {}
        }
        self.solver.validate().map_err(|e| HarnessError::Input(e.to_string()))
    }
}
