//! End-to-end solver behavior on synthetic union-of-subspaces data: the
//! expensive runs are shared across tests through `OnceLock`.

use std::sync::OnceLock;

use ndarray::prelude::*;
use ndarray_linalg::{JobSvd, SVDDC};
use tisrl_core::dataset::{synth, SynthSpec};
use tisrl_core::metrics::{accuracy, nmi};
use tisrl_core::solver::{run, ConvergenceTrace, SolverState, SolverStatus, TisrlConfig};
use tisrl_core::spectral::{cluster, SpectralConfig};

type RunOutput = (SolverState, ConvergenceTrace, SolverStatus, Vec<usize>);

fn spec(sigma: f64, seed: u64) -> SynthSpec {
    SynthSpec {
        views: 3,
        n: 100,
        k: 5,
        r: 4,
        dims: vec![25, 30, 35],
        sigma,
        seed,
    }
}

fn solve(sigma: f64) -> RunOutput {
    let data = synth(&spec(sigma, 0)).unwrap();
    let (state, trace, status) = run(&data, &TisrlConfig::new(0.1)).unwrap();
    let labels = data.labels().unwrap().to_vec();
    (state, trace, status, labels)
}

fn noisy() -> &'static RunOutput {
    static RUN: OnceLock<RunOutput> = OnceLock::new();
    RUN.get_or_init(|| solve(0.01))
}

fn noiseless() -> &'static RunOutput {
    static RUN: OnceLock<RunOutput> = OnceLock::new();
    RUN.get_or_init(|| solve(0.0))
}

fn numerical_rank(m: &Array2<f64>) -> usize {
    let (_, s, _) = m.svddc(JobSvd::None).unwrap();
    let tol = 1e-6 * s[0].max(1e-300);
    s.iter().filter(|&&v| v > tol).count()
}

fn nuclear_norm(m: &Array2<f64>) -> f64 {
    let (_, s, _) = m.svddc(JobSvd::None).unwrap();
    s.sum()
}

#[test]
fn converges_well_within_the_iteration_budget() {
    let (_, trace, status, _) = noisy();
    assert_eq!(*status, SolverStatus::Converged);
    let iters = trace.iterations();
    eprintln!("converged in {iters} iterations");
    assert!(iters <= 80, "took {iters} iterations");
}

#[test]
fn final_residuals_are_below_the_threshold() {
    let (_, trace, _, _) = noisy();
    let last = trace.iterations();
    assert!(trace.max_residual(last) < 1e-7);
}

#[test]
fn residuals_eventually_decrease() {
    // Each residual component sits below its own value ten iterations
    // earlier, once past the warm-up phase.
    let (_, trace, _, _) = noisy();
    let views = 3;
    let at = |t: usize, i: usize| trace.rows()[(t - 1) * views + i];
    for t in 21..=trace.iterations() {
        for i in 0..views {
            let now = at(t, i);
            let then = at(t - 10, i);
            assert!(
                now.err1 < then.err1,
                "err1 view {i} stalled at iteration {t}"
            );
            assert!(
                now.err2 < then.err2,
                "err2 view {i} stalled at iteration {t}"
            );
            assert!(now.err3 < then.err3, "err3 stalled at iteration {t}");
        }
    }
}

#[test]
fn rotations_are_orthogonal_at_the_solution() {
    let (state, _, _, _) = noisy();
    for p in &state.p {
        let gram = p.t().dot(p);
        let err = (&gram - &Array2::<f64>::eye(gram.nrows()))
            .iter()
            .fold(0.0_f64, |a, &b| a.max(b.abs()));
        assert!(err <= 1e-10, "orthogonality residual {err:.3e}");
    }
}

#[test]
fn clustering_recovers_the_planted_partition() {
    let (state, _, _, truth) = noisy();
    let pred = cluster(&state.intrinsic_affinity(), &SpectralConfig::new(5, 0)).unwrap();
    let nmi = nmi(truth, &pred).unwrap();
    let acc = accuracy(truth, &pred).unwrap();
    eprintln!("nmi {nmi:.4} acc {acc:.4}");
    assert!(nmi >= 0.95, "nmi {nmi:.4}");
    assert!(acc >= 0.95, "acc {acc:.4}");
}

#[test]
fn noiseless_run_preserves_representation_rank() {
    let (state, _, status, _) = noiseless();
    assert_eq!(*status, SolverStatus::Converged);
    for i in 0..state.z.len() {
        let rank_z = numerical_rank(&state.z[i]);
        let rank_c = numerical_rank(&state.c[i]);
        eprintln!("view {i}: rank(Z) = {rank_z}, rank(C) = {rank_c}");
        assert_eq!(rank_z, rank_c, "view {i} rank mismatch");
        // Z = PC with orthonormal-column P shares C's singular values, so the
        // nuclear norms must agree as well.
        let nn_z = nuclear_norm(&state.z[i]);
        let nn_c = nuclear_norm(&state.c[i]);
        assert!(
            (nn_z - nn_c).abs() <= 1e-6 * (1.0 + nn_z),
            "view {i}: nuclear norms {nn_z:.6} vs {nn_c:.6}"
        );
        let gap = (&state.z[i] - &state.p[i].dot(&state.c[i]))
            .iter()
            .fold(0.0_f64, |a, &b| a.max(b.abs()));
        assert!(gap <= 1e-6, "view {i}: |Z - PC| = {gap:.3e}");
    }
}

#[test]
fn single_view_reduces_to_plain_low_rank_representation() {
    let data = synth(&SynthSpec {
        views: 1,
        n: 60,
        k: 3,
        r: 3,
        dims: vec![20],
        sigma: 0.0,
        seed: 4,
    })
    .unwrap();
    let (state, _, status) = run(&data, &TisrlConfig::new(0.1)).unwrap();
    assert_eq!(status, SolverStatus::Converged);
    let pred = cluster(&state.intrinsic_affinity(), &SpectralConfig::new(3, 0)).unwrap();
    let acc = accuracy(data.labels().unwrap(), &pred).unwrap();
    assert!(acc >= 0.95, "acc {acc:.4}");
}
