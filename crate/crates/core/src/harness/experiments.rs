use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::dca::{self, DcaConfig, Method, SolveResult};
use crate::measurement::{MeasurementEnsemble, SeededRng};
use crate::recovery::{self, extract_signal, Signal};

use super::seed::{mix_seed, STREAM_NOISE, STREAM_NOISE_SWEEP, STREAM_NORM_TABLE, STREAM_PHASE_TRANSITION};
use super::{ExperimentKind, ExperimentSpec, HarnessError, LambdaPolicy, ResultRow, ResultTable};

/// A random ensemble with a planted signal and its clean measurements.
pub struct PlantedInstance {
    pub ens: MeasurementEnsemble<f64>,
    pub x_true: Signal<f64>,
    pub b: DVector<f64>,
}

impl PlantedInstance {
    /// Draws `A` and then a complex Gaussian `x` from one generator seeded with `seed`.
    pub fn sample(n: usize, m: usize, seed: u64) -> Result<Self, HarnessError> {
        let mut rng = SeededRng::seed_from_u64(seed);
        let ens = MeasurementEnsemble::sample_gaussian_with(n, m, &mut rng)?;
        let x_true = Signal::sample_gaussian(n, &mut rng);
        Self::from_parts(ens, x_true)
    }

    /// Like [`PlantedInstance::sample`] with a real nonnegative signal.
    pub fn sample_nonnegative(n: usize, m: usize, seed: u64) -> Result<Self, HarnessError> {
        let mut rng = SeededRng::seed_from_u64(seed);
        let ens = MeasurementEnsemble::sample_gaussian_with(n, m, &mut rng)?;
        let x_true = Signal::sample_nonnegative(n, &mut rng);
        Self::from_parts(ens, x_true)
    }

    pub fn from_parts(ens: MeasurementEnsemble<f64>, x_true: Signal<f64>) -> Result<Self, HarnessError> {
        let b = ens.forward(&x_true.lift())?;
        Ok(Self { ens, x_true, b })
    }
}

fn with_pool<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R, HarnessError> {
    if jobs == 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Io(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn par_rows<J: Sync>(
    jobs: usize,
    cells: &[J],
    run: impl Fn(&J) -> Result<ResultRow, HarnessError> + Sync + Send,
) -> Result<Vec<ResultRow>, HarnessError> {
    if jobs == 1 {
        return cells.iter().map(run).collect();
    }
    with_pool(jobs, || cells.par_iter().map(run).collect::<Result<Vec<_>, _>>())?
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable, HarnessError> {
    match spec.kind {
        ExperimentKind::NormTable => run_norm_table(spec),
        ExperimentKind::PhaseTransition => run_phase_transition(spec),
        ExperimentKind::NoiseSweep => run_noise_sweep(spec),
        ExperimentKind::SingleRecover => Err(HarnessError::Input(
            "single recovery runs from an instance file, not an experiment spec".into(),
        )),
    }
}

fn expect_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<(), HarnessError> {
    if spec.kind != kind {
        return Err(HarnessError::Input(format!("expected a {kind} spec, got {}", spec.kind)));
    }
    spec.validate()
}

/// Samples `trials` ensembles per `n` and records `||A||`, followed by one mean row per `n`.
pub fn run_norm_table(spec: &ExperimentSpec) -> Result<ResultTable, HarnessError> {
    expect_kind(spec, ExperimentKind::NormTable)?;
    let m_for = |i: usize, n: usize| match spec.m_values.len() {
        0 => 4 * n,
        1 => spec.m_values[0],
        _ => spec.m_values[i],
    };
    let cells: Vec<(usize, usize, usize)> = spec
        .n_values
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| (0..spec.trials).map(move |t| (n, m_for(i, n), t)))
        .collect();
    let rows = par_rows(spec.jobs, &cells, |&(n, m, trial)| {
        let start = Instant::now();
        let seed = mix_seed(spec.base_seed, &[STREAM_NORM_TABLE, n as u64, m as u64, trial as u64]);
        let ens = MeasurementEnsemble::<f64>::sample_gaussian(n, m, seed)?;
        let mut row = ResultRow::new(ExperimentKind::NormTable, n, m);
        row.trial = Some(trial);
        row.seed = Some(seed);
        row.op_norm = Some(ens.operator_norm());
        row.wall_time_ms = elapsed_ms(start);
        Ok(row)
    })?;

    let mut out = Vec::with_capacity(rows.len() + spec.n_values.len());
    for chunk in rows.chunks(spec.trials) {
        let mut mean = ResultRow::new(ExperimentKind::NormTable, chunk[0].n, chunk[0].m);
        mean.op_norm = Some(chunk.iter().filter_map(|r| r.op_norm).sum::<f64>() / chunk.len() as f64);
        mean.wall_time_ms = chunk.iter().map(|r| r.wall_time_ms).sum();
        out.extend_from_slice(chunk);
        out.push(mean);
    }
    Ok(ResultTable::new(out))
}

struct SolveInputs<'a> {
    kind: ExperimentKind,
    method: Method,
    inst: &'a PlantedInstance,
    b: &'a DVector<f64>,
    e_norm: f64,
    snr_in_db: f64,
    lambda: f64,
    mu_factor: Option<f64>,
    trial: usize,
    seed: u64,
}

fn solve_row(spec: &ExperimentSpec, job: SolveInputs<'_>, start: Instant) -> Result<ResultRow, HarnessError> {
    let cfg = DcaConfig {
        lambda: job.lambda,
        method: job.method,
        ..spec.solver
    };
    let res: SolveResult<f64> = dca::solve(&job.inst.ens, job.b, &cfg)?;
    let (rel_mse, lift_error) = if res.x_final.frobenius_norm() > 0.0 {
        let rec = extract_signal(&res.x_final)?;
        (
            recovery::rel_mse(&rec, &job.inst.x_true)?,
            (&res.x_final - &job.inst.x_true.lift()).frobenius_norm(),
        )
    } else {
        (1.0, job.inst.x_true.lift().frobenius_norm())
    };

    let mut row = ResultRow::new(job.kind, job.inst.ens.n(), job.inst.ens.m());
    row.method = Some(job.method);
    row.lambda = Some(job.lambda);
    row.snr_in_db = Some(job.snr_in_db);
    row.trial = Some(job.trial);
    row.seed = Some(job.seed);
    row.rel_mse = Some(rel_mse);
    row.snr_out_db = Some(recovery::snr_db(rel_mse)?);
    row.success = Some(recovery::is_success(rel_mse));
    row.outer_iters = Some(res.outer_iters);
    row.inner_iters_total = Some(res.inner_iters_total());
    row.rank_ratio = Some(res.rank_ratio);
    row.termination = Some(res.termination);
    row.e_norm = Some(job.e_norm);
    row.mu_factor = job.mu_factor;
    row.lift_error = Some(lift_error);
    row.wall_time_ms = elapsed_ms(start);
    Ok(row)
}

/// One `(method, n, m, trial)` cell of a phase-transition run.
///
/// The instance depends only on `(base_seed, n, m, trial)`, so all methods in a
/// cell see the same `(A, x, b)`.
pub fn phase_transition_cell(
    spec: &ExperimentSpec,
    method: Method,
    n: usize,
    m: usize,
    trial: usize,
) -> Result<ResultRow, HarnessError> {
    let start = Instant::now();
    let seed = mix_seed(spec.base_seed, &[STREAM_PHASE_TRANSITION, n as u64, m as u64, trial as u64]);
    let inst = PlantedInstance::sample(n, m, seed)?;
    let lambda = spec.lambda_policy.resolve(None, 0.0, spec.solver.lambda);
    solve_row(
        spec,
        SolveInputs {
            kind: ExperimentKind::PhaseTransition,
            method,
            inst: &inst,
            b: &inst.b,
            e_norm: 0.0,
            snr_in_db: f64::INFINITY,
            lambda,
            mu_factor: None,
            trial,
            seed,
        },
        start,
    )
}

/// Noiseless success rates over the `m` grid; rows ordered by `(method, n, m, trial)`.
pub fn run_phase_transition(spec: &ExperimentSpec) -> Result<ResultTable, HarnessError> {
    expect_kind(spec, ExperimentKind::PhaseTransition)?;
    let mut cells = Vec::new();
    for &method in &spec.methods {
        for &n in &spec.n_values {
            for &m in &spec.m_values {
                for trial in 0..spec.trials {
                    cells.push((method, n, m, trial));
                }
            }
        }
    }
    let rows = par_rows(spec.jobs, &cells, |&(method, n, m, trial)| {
        phase_transition_cell(spec, method, n, m, trial)
    })?;
    Ok(ResultTable::new(rows))
}

/// Output SNR per `(method, lambda factor, input SNR, trial)`, in that order.
///
/// The instance for a trial is shared across noise levels and `lambda`
/// factors; the noise vector depends on the trial and the level.
pub fn run_noise_sweep(spec: &ExperimentSpec) -> Result<ResultTable, HarnessError> {
    expect_kind(spec, ExperimentKind::NoiseSweep)?;
    let factors = spec.lambda_policy.factors();
    let mut cells = Vec::new();
    for &method in &spec.methods {
        for &n in &spec.n_values {
            for &m in &spec.m_values {
                for &factor in &factors {
                    for &snr in &spec.snr_levels_db {
                        for trial in 0..spec.trials {
                            cells.push((method, n, m, factor, snr, trial));
                        }
                    }
                }
            }
        }
    }
    let rows = par_rows(spec.jobs, &cells, |&(method, n, m, factor, snr, trial)| {
        let start = Instant::now();
        let seed = mix_seed(spec.base_seed, &[STREAM_NOISE_SWEEP, n as u64, m as u64, trial as u64]);
        let inst = PlantedInstance::sample(n, m, seed)?;
        let snr_key = snr.map_or(u64::MAX, f64::to_bits);
        let (b, e) = recovery::add_noise(&inst.b, snr, mix_seed(seed, &[STREAM_NOISE, snr_key]))?;
        let e_norm = e.norm();
        let mu = recovery::lambda_scale(&inst.ens, e_norm);
        let lambda = spec.lambda_policy.resolve(factor, mu, spec.solver.lambda);
        solve_row(
            spec,
            SolveInputs {
                kind: ExperimentKind::NoiseSweep,
                method,
                inst: &inst,
                b: &b,
                e_norm,
                snr_in_db: snr.unwrap_or(f64::INFINITY),
                lambda,
                mu_factor: factor,
                trial,
                seed,
            },
            start,
        )
    })?;
    Ok(ResultTable::new(rows))
}

/// Mean output SNR per `(method, mu factor, input SNR)`, in first-seen order.
pub fn mean_snr_out(table: &ResultTable) -> Vec<(Method, Option<f64>, f64, f64)> {
    let mut acc: Vec<(Method, Option<f64>, f64, f64, usize)> = Vec::new();
    for r in table.rows.iter().filter(|r| r.trial.is_some()) {
        let (Some(method), Some(snr_in), Some(out)) = (r.method, r.snr_in_db, r.snr_out_db) else {
            continue;
        };
        match acc
            .iter_mut()
            .find(|(mm, f, s, _, _)| *mm == method && *f == r.mu_factor && *s == snr_in)
        {
            Some(slot) => {
                slot.3 += out;
                slot.4 += 1;
            }
            None => acc.push((method, r.mu_factor, snr_in, out, 1)),
        }
    }
    acc.into_iter()
        .map(|(mm, f, s, sum, k)| (mm, f, s, sum / k as f64))
        .collect()
}

impl LambdaPolicy {
    pub(crate) fn single_factor(&self) -> Result<Option<f64>, HarnessError> {
        match self {
            LambdaPolicy::Fixed(_) => Ok(None),
            LambdaPolicy::MuMultiples(f) if f.len() == 1 => Ok(Some(f[0])),
            LambdaPolicy::MuMultiples(_) => Err(HarnessError::Input(
                "a single recovery takes exactly one mu factor".into(),
            )),
        }
    }
}
