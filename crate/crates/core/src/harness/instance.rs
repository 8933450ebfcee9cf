use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dca::{self, DcaConfig, KktResiduals, Method, Termination};
use crate::measurement::{MatrixRepr, MeasurementEnsemble};
use crate::recovery::{self, extract_signal, signal_from_pairs, signal_to_pairs, RecoveryReport, Signal};
use crate::spectral::ConstraintClass;

use super::{HarnessError, LambdaPolicy, PlantedInstance};

#[derive(Serialize, Deserialize)]
struct InstanceRepr {
    n: usize,
    m: usize,
    a: MatrixRepr,
    b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x_true: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    e_norm: Option<f64>,
}

/// A measurement ensemble with data `b` and optionally the ground truth.
#[derive(Clone, Debug)]
pub struct Instance {
    ens: MeasurementEnsemble<f64>,
    b: DVector<f64>,
    x_true: Option<Signal<f64>>,
    e_norm: Option<f64>,
}

impl Instance {
    pub fn new(
        ens: MeasurementEnsemble<f64>,
        b: DVector<f64>,
        x_true: Option<Signal<f64>>,
        e_norm: Option<f64>,
    ) -> Result<Self, HarnessError> {
        let input = |s: String| Err(HarnessError::Input(s));
        if b.len() != ens.m() {
            return input(format!("b has {} entries, expected m = {}", b.len(), ens.m()));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return input("b contains non-finite entries".into());
        }
        if let Some(x) = &x_true {
            if x.len() != ens.n() {
                return input(format!("x_true has {} entries, expected n = {}", x.len(), ens.n()));
            }
        }
        if let Some(e) = e_norm {
            if !(e >= 0.0 && e.is_finite()) {
                return input(format!("e_norm must be a nonnegative real, got {e}"));
            }
        }
        Ok(Self { ens, b, x_true, e_norm })
    }

    /// Planted instance with optional additive noise at `snr_db`.
    pub fn planted(planted: PlantedInstance, snr_db: Option<f64>, noise_seed: u64) -> Result<Self, HarnessError> {
        let (b, e) = recovery::add_noise(&planted.b, snr_db, noise_seed)?;
        let e_norm = e.norm();
        Self::new(planted.ens, b, Some(planted.x_true), Some(e_norm))
    }

    pub fn ensemble(&self) -> &MeasurementEnsemble<f64> {
        &self.ens
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn x_true(&self) -> Option<&Signal<f64>> {
        self.x_true.as_ref()
    }

    pub fn e_norm(&self) -> Option<f64> {
        self.e_norm
    }

    pub fn from_json_str(s: &str) -> Result<Self, HarnessError> {
        let repr: InstanceRepr =
            serde_json::from_str(s).map_err(|e| HarnessError::Input(format!("malformed instance: {e}")))?;
        if repr.n == 0 || repr.m == 0 {
            return Err(HarnessError::Input("n and m must be positive".into()));
        }
        let a = repr
            .a
            .to_matrix(repr.n, repr.m)
            .map_err(|e| HarnessError::Input(e.to_string()))?;
        let ens = MeasurementEnsemble::new(a).map_err(|e| HarnessError::Input(e.to_string()))?;
        let x_true = repr
            .x_true
            .map(|p| signal_from_pairs(&p))
            .transpose()
            .map_err(|e| HarnessError::Input(e.to_string()))?;
        Self::new(ens, DVector::from_vec(repr.b), x_true, repr.e_norm)
    }

    pub fn to_json_string(&self) -> String {
        let repr = InstanceRepr {
            n: self.ens.n(),
            m: self.ens.m(),
            a: MatrixRepr::from_matrix(self.ens.matrix()),
            b: self.b.iter().copied().collect(),
            x_true: self.x_true.as_ref().map(signal_to_pairs),
            e_norm: self.e_norm,
        };
        serde_json::to_string(&repr).expect("instance serialization cannot fail")
    }
}

/// Output of [`run_single_recover`].
#[derive(Clone, Debug, Serialize)]
pub struct SingleRecoverReport {
    pub method: Method,
    pub constraint: ConstraintClass,
    pub n: usize,
    pub m: usize,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub termination: Termination,
    pub outer_iters: usize,
    pub inner_iters: Vec<usize>,
    pub inner_iters_total: usize,
    pub objective_trace: Vec<f64>,
    pub kkt: Option<KktResiduals<f64>>,
    pub rank_ratio: f64,
    /// Leading-eigenvector estimate; zeros when the solver returned `X = 0`.
    pub x_rec: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
    pub wall_time_ms: f64,
}

impl SingleRecoverReport {
    pub fn to_json_string(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serialization cannot fail");
        // Non-finite reals are not representable in JSON.
        if let Some(s) = self.snr_db.filter(|s| !s.is_finite()) {
            v["snr_db"] = super::format_real(s).into();
        }
        serde_json::to_string_pretty(&v).expect("report serialization cannot fail")
    }
}

/// Solves one instance with `method` and reports the estimate and, when the
/// ground truth is known, its error.
pub fn run_single_recover(
    instance: &Instance,
    method: Method,
    constraint: ConstraintClass,
    lambda_policy: &LambdaPolicy,
    solver: &DcaConfig<f64>,
) -> Result<SingleRecoverReport, HarnessError> {
    let start = Instant::now();
    let factor = lambda_policy.single_factor()?;
    let mu = match (factor, instance.e_norm) {
        (Some(_), None) => {
            return Err(HarnessError::Input("mu-scaled lambda needs e_norm in the instance".into()));
        }
        (Some(_), Some(e)) => Some(recovery::lambda_scale(&instance.ens, e)),
        (None, e) => e.map(|e| recovery::lambda_scale(&instance.ens, e)),
    };
    let lambda = lambda_policy.resolve(factor, mu.unwrap_or(0.0), solver.lambda);
    let cfg = DcaConfig {
        lambda,
        method,
        omega: constraint,
        ..*solver
    };
    cfg.validate().map_err(|e| HarnessError::Input(e.to_string()))?;
    let res = dca::solve(&instance.ens, &instance.b, &cfg)?;

    let x_rec = if res.x_final.frobenius_norm() > 0.0 {
        extract_signal(&res.x_final)?
    } else {
        Signal::new(DVector::zeros(instance.ens.n()))?
    };
    let report = instance
        .x_true
        .as_ref()
        .map(|truth| RecoveryReport::evaluate(&x_rec, truth))
        .transpose()?;

    Ok(SingleRecoverReport {
        method,
        constraint,
        n: instance.ens.n(),
        m: instance.ens.m(),
        lambda,
        mu,
        termination: res.termination,
        outer_iters: res.outer_iters,
        inner_iters_total: res.inner_iters_total(),
        inner_iters: res.inner_iters,
        objective_trace: res.objective_trace,
        kkt: res.kkt,
        rank_ratio: res.rank_ratio,
        x_rec: signal_to_pairs(&x_rec),
        rel_mse: report.as_ref().map(|r| r.rel_mse),
        snr_db: report.as_ref().map(|r| r.snr_db),
        success: report.as_ref().map(|r| r.success),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
