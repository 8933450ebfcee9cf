//! Randomized invariants, each run for a fixed number of generated cases.

use std::f64::consts::PI;

use nalgebra::DVector;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use super::*;
use phaselift_core::admm::solve_subproblem;
use phaselift_core::dca::{self, kkt_residuals_with_weight, subgradient_weight};
use phaselift_core::recovery::{add_noise, rel_mse};
use phaselift_core::spectral::{eigh, project_psd, trace_frobenius_gap};
use phaselift_core::{AdmmConfig, AdmmTermination, ConstraintClass, DcaConfig64, Hermitian64, Signal64};

pub const CASES: u32 = 200;

pub type Check = fn() -> Result<(), String>;

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

/// Inner tolerances tight enough that subproblem solutions are exact for the
/// purpose of first-order certificates.
pub fn tight_admm() -> AdmmConfig<f64> {
    AdmmConfig {
        eps_abs: 1e-12,
        eps_rel: 1e-11,
        max_iters: 100_000,
        ..Default::default()
    }
}

pub fn adjoint_identity() -> Result<(), String> {
    run((1usize..=8, 1usize..=24, any::<u64>()), |(n, m, seed)| {
        let ens = ensemble(n, m, seed);
        let mut r = rng(seed);
        let x = hermitian(n, &mut r);
        let y = real_vector(m, &mut r);
        let lhs = ens.forward(&x).unwrap().dot(&y);
        let rhs = x.inner(&ens.adjoint(&y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
        Ok(())
    })
}

pub fn forward_and_adjoint_match_entrywise_sums() -> Result<(), String> {
    run((1usize..=6, 1usize..=12, any::<u64>()), |(n, m, seed)| {
        let ens = ensemble(n, m, seed);
        let mut r = rng(seed);
        let x = hermitian(n, &mut r);
        let y = real_vector(m, &mut r);
        let want = brute_forward(ens.matrix(), &x.to_complex());
        let got = ens.forward(&x).unwrap();
        prop_assert!((&got - &want).norm() <= 1e-12 * (1.0 + want.norm()));
        let want = brute_adjoint(ens.matrix(), &y);
        let got = ens.adjoint(&y).unwrap().to_complex();
        prop_assert!(complex_frobenius(&(&got - &want)) <= 1e-12 * (1.0 + complex_frobenius(&want)));
        Ok(())
    })
}

pub fn hadamard_identity() -> Result<(), String> {
    run((1usize..=8, 1usize..=24, any::<u64>()), |(n, m, seed)| {
        let ens = ensemble(n, m, seed);
        let y = real_vector(m, &mut rng(seed));
        let a = ens.matrix();
        // |a_j* a_k|^2 assembled directly
        let brute = nalgebra::DMatrix::from_fn(m, m, |j, k| a.column(j).dotc(&a.column(k)).norm_sqr());
        prop_assert!((ens.gram() - &brute).norm() <= 1e-10 * brute.norm());
        prop_assert!(ens.gram().iter().all(|&g| g >= 0.0));
        let via_ops = ens.forward(&ens.adjoint(&y).unwrap()).unwrap();
        let via_gram = &brute * &y;
        prop_assert!((&via_ops - &via_gram).norm() <= 1e-10 * (1.0 + via_gram.norm()));
        Ok(())
    })
}

pub fn operator_norm_bounds_random_directions() -> Result<(), String> {
    run((1usize..=8, 1usize..=24, any::<u64>()), |(n, m, seed)| {
        let ens = ensemble(n, m, seed);
        let x = hermitian(n, &mut rng(seed));
        let x = x.scale(1.0 / x.frobenius_norm());
        prop_assert!(ens.forward(&x).unwrap().norm() <= ens.operator_norm() * (1.0 + 1e-8));
        Ok(())
    })
}

pub fn injective_on_psd_cone() -> Result<(), String> {
    run((1usize..=8, 0usize..=8, 1usize..=8, any::<u64>()), |(n, extra, rank, seed)| {
        let ens = ensemble(n, n + extra, seed);
        let x = psd(n, rank.min(n), &mut rng(seed));
        prop_assert!(ens.forward(&x).unwrap().norm() > 0.0);
        Ok(())
    })
}

pub fn woodbury_round_trip() -> Result<(), String> {
    run((1usize..=8, 1usize..=24, any::<u64>()), |(n, m, seed)| {
        let ens = ensemble(n, m, seed);
        let x = hermitian(n, &mut rng(seed));
        for delta in [1e-3, 1.0, 1e3] {
            let y = ens.apply_regularized_inverse(delta, &x).unwrap();
            let back = ens.apply_regularized(delta, &y).unwrap();
            let err = (&back - &x).frobenius_norm() / x.frobenius_norm();
            prop_assert!(err <= 1e-9, "delta {delta}: relative error {err:e}");
        }
        Ok(())
    })
}

pub fn psd_projection_idempotent_and_nonexpansive() -> Result<(), String> {
    run((1usize..=8, any::<u64>()), |(n, seed)| {
        let mut r = rng(seed);
        let x = hermitian(n, &mut r);
        let y = hermitian(n, &mut r);
        let px = project_psd(&x).unwrap();
        let py = project_psd(&y).unwrap();
        let ppx = project_psd(&px).unwrap();
        prop_assert!((&ppx - &px).frobenius_norm() <= 1e-12 * (1.0 + x.frobenius_norm()));
        prop_assert!((&px - &py).frobenius_norm() <= (&x - &y).frobenius_norm() * (1.0 + 1e-12) + 1e-14);
        let ev = eigh(&px).unwrap();
        prop_assert!(ev.min() >= -1e-12 * (1.0 + ev.max()));
        Ok(())
    })
}

pub fn psd_inner_product_nonnegative() -> Result<(), String> {
    run((1usize..=8, 1usize..=8, 1usize..=8, any::<u64>()), |(n, ra, rb, seed)| {
        let mut r = rng(seed);
        let x = psd(n, ra.min(n), &mut r);
        let y = psd(n, rb.min(n), &mut r);
        prop_assert!(x.inner(&y) >= -1e-12 * x.frobenius_norm() * y.frobenius_norm());
        Ok(())
    })
}

pub fn orthogonal_psd_pairs_multiply_to_zero() -> Result<(), String> {
    run((2usize..=8, 1usize..8, any::<u64>()), |(n, split, seed)| {
        // X lives on the first k columns of a random unitary, Y on the rest
        let k = split.min(n - 1);
        let mut r = rng(seed);
        let q = complex_matrix(n, n, &mut r).qr().q();
        let part = |cols: std::ops::Range<usize>, r: &mut rand_chacha::ChaCha8Rng| {
            let u = q.columns(cols.start, cols.len()).into_owned();
            let c = complex_matrix(cols.len(), cols.len(), r);
            let inner = &c * c.adjoint();
            Hermitian64::from_complex(&(&u * inner * u.adjoint())).unwrap()
        };
        let x = part(0..k, &mut r);
        let y = part(k..n, &mut r);
        let scale = x.frobenius_norm() * y.frobenius_norm();
        prop_assert!(x.inner(&y).abs() < 1e-12 * scale);
        let xy = x.to_complex() * y.to_complex();
        prop_assert!(complex_frobenius(&xy) < 1e-6 * scale);
        Ok(())
    })
}

pub fn trace_frobenius_gap_vanishes_exactly_on_rank_one() -> Result<(), String> {
    run((2usize..=8, 1usize..=3, any::<u64>()), |(n, rank, seed)| {
        let x = psd(n, rank.min(n), &mut rng(seed));
        let gap = trace_frobenius_gap(&x).unwrap();
        let ev = embedded_eigenvalues(&x.to_complex());
        let l1: f64 = ev.iter().map(|s| s.max(0.0)).sum();
        let l2: f64 = ev.iter().map(|s| s.max(0.0).powi(2)).sum::<f64>().sqrt();
        prop_assert!((gap - (l1 - l2)).abs() <= 1e-10 * l1);
        let effective_rank = ev.iter().filter(|&&s| s > 1e-9 * ev[0]).count();
        if effective_rank <= 1 {
            prop_assert!(gap <= 1e-9 * l1);
        } else {
            prop_assert!(gap > 1e-9 * l1);
        }
        Ok(())
    })
}

pub fn rel_mse_is_invariant_to_global_phase() -> Result<(), String> {
    run((1usize..=8, 0.0f64..0.5, any::<u64>()), |(n, noise, seed)| {
        let mut r = rng(seed);
        let truth = Signal64::new(complex_vector(n, &mut r)).unwrap();
        let perturbed = Signal64::new(truth.values() + complex_vector(n, &mut r) * C64::new(noise, 0.0)).unwrap();
        let base = rel_mse(&perturbed, &truth).unwrap();
        for k in 0..32 {
            let theta = 2.0 * PI * k as f64 / 32.0;
            let rotated = perturbed.scaled(C64::from_polar(1.0, theta));
            let v = rel_mse(&rotated, &truth).unwrap();
            prop_assert!((v - base).abs() <= 1e-12 * (1.0 + base), "theta {theta}: {v} vs {base}");
        }
        Ok(())
    })
}

pub fn add_noise_hits_requested_snr() -> Result<(), String> {
    run((1usize..=64, -10.0f64..60.0, any::<u64>()), |(m, snr, seed)| {
        let b = DVector::from_fn(m, |i, _| 0.5 + (i as f64 * 0.37).sin().abs());
        let (noisy, e) = add_noise(&b, Some(snr), seed).unwrap();
        let realized = 20.0 * (b.norm() / e.norm()).log10();
        prop_assert!((realized - snr).abs() <= 1e-9, "{realized} vs {snr}");
        prop_assert!((&noisy - &b - &e).norm() <= 1e-15 * noisy.norm());
        Ok(())
    })
}

pub fn admm_solutions_are_kkt_points() -> Result<(), String> {
    let strategy = (1usize..=6, 2usize..=5, 1e-3f64..1.0, any::<bool>(), any::<u64>());
    run(strategy, |(n, over, lambda, reweight, seed)| {
        let (ens, _, b) = planted(n, over * n, seed);
        let w = if reweight {
            let v = psd(n, 1, &mut rng(seed ^ 1));
            subgradient_weight(&v, lambda)
        } else {
            Hermitian64::scaled_identity(n, lambda)
        };
        let out = solve_subproblem(&ens, &b, &w, ConstraintClass::Complex, &tight_admm(), None).unwrap();
        prop_assume!(out.termination == AdmmTermination::Residuals);
        let ev = eigh(&out.x).unwrap();
        prop_assert!(ev.min() >= -1e-9 * ev.max().max(0.0));
        // The normalized residuals are angles; they carry no information once the
        // multiplier itself vanishes relative to the terms it is built from.
        let fit = ens.adjoint(&ens.forward(&out.x).unwrap()).unwrap();
        let aty = ens.adjoint(&b).unwrap();
        let multiplier = &(&fit - &aty) + &w;
        let scale = fit.frobenius_norm() + aty.frobenius_norm() + w.frobenius_norm();
        prop_assume!(multiplier.frobenius_norm() > 1e-6 * scale);
        let kkt = kkt_residuals_with_weight(&ens, &b, &out.x, &w).unwrap();
        prop_assert!(kkt.complementarity <= 1e-4, "complementarity {:e}", kkt.complementarity);
        prop_assert!(kkt.dual_infeasibility <= 1e-4, "dual infeasibility {:e}", kkt.dual_infeasibility);
        Ok(())
    })
}

pub fn dca_objective_descends() -> Result<(), String> {
    let strategy = (1usize..=5, 2usize..=5, -4.0f64..0.0, prop::option::of(10.0f64..60.0), any::<u64>());
    run(strategy, |(n, over, lambda_exp, snr, seed)| {
        let (ens, _, b) = planted(n, over * n, seed);
        let (b, _) = add_noise(&b, snr, seed).unwrap();
        let cfg = DcaConfig64 {
            lambda: 10f64.powf(lambda_exp),
            admm: tight_admm(),
            ..Default::default()
        };
        let res = dca::solve(&ens, &b, &cfg).unwrap();
        let phi0 = res.objective_trace[0];
        for w in res.objective_trace.windows(2) {
            prop_assert!(w[0] - w[1] >= -1e-10 * (1.0 + phi0), "trace {:?}", res.objective_trace);
        }
        Ok(())
    })
}

pub const ALL: [(&str, Check); 14] = [
    ("adjoint identity", adjoint_identity),
    ("forward/adjoint vs explicit sums", forward_and_adjoint_match_entrywise_sums),
    ("Hadamard identity", hadamard_identity),
    ("operator norm bound", operator_norm_bounds_random_directions),
    ("injective on the PSD cone", injective_on_psd_cone),
    ("Woodbury round trip", woodbury_round_trip),
    ("PSD projection", psd_projection_idempotent_and_nonexpansive),
    ("PSD inner product", psd_inner_product_nonnegative),
    ("orthogonal PSD pairs", orthogonal_psd_pairs_multiply_to_zero),
    ("trace-Frobenius gap", trace_frobenius_gap_vanishes_exactly_on_rank_one),
    ("global-phase invariance", rel_mse_is_invariant_to_global_phase),
    ("add_noise SNR", add_noise_hits_requested_snr),
    ("KKT at converged points", admm_solutions_are_kkt_points),
    ("monotone descent", dca_objective_descends),
];
