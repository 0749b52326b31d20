//! Augmented-Lagrangian solver for the multi-view intrinsic-subspace
//! objective
//!
//! ```text
//! min  ‖Q‖_⊛ + λ‖E‖_{2,1}
//! s.t. X⁽ⁱ⁾ = X⁽ⁱ⁾Z⁽ⁱ⁾ + E⁽ⁱ⁾,  Z⁽ⁱ⁾ = P⁽ⁱ⁾C⁽ⁱ⁾,  P⁽ⁱ⁾ᵀP⁽ⁱ⁾ = I,
//! Q = Φ(C⁽¹⁾, …, C⁽ᵛ⁾)
//! ```
//!
//! with closed-form block updates, a joint column-sparse error across views,
//! tensor singular-value shrinkage of the stacked representations, and a
//! geometric penalty schedule. Also builds the symmetrized intrinsic
//! affinity consumed by spectral clustering.

use std::io::{self, Write};

use ndarray::prelude::*;
use ndarray_linalg::InverseC;
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::MultiViewDataset;
use crate::prox::{l21_prox, procrustes, ProxError, StackedError};
use crate::spectral::AffinityMatrix;
use crate::tensor::{construct_phi, phi_inverse, tnn, tnn_prox, Tensor3, TensorError};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Prox(#[from] ProxError),
}

/// How a solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    MaxItersReached,
}

impl SolverStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverStatus::Converged => "converged",
            SolverStatus::MaxItersReached => "max_iters_reached",
        }
    }
}

/// Solver hyperparameters. `new` fills everything but `lambda` with the
/// defaults; callers override fields before `run`.
#[derive(Debug, Clone)]
pub struct TisrlConfig {
    /// Weight of the column-sparse error term.
    pub lambda: f64,
    /// Convergence threshold on the max-abs feasibility residuals.
    pub epsilon: f64,
    /// Initial penalty on the reconstruction and factorization constraints.
    pub mu0: f64,
    /// Initial penalty on the tensor coupling constraint.
    pub rho0: f64,
    /// Geometric growth factor of both penalties.
    pub eta: f64,
    pub mu_max: f64,
    pub rho_max: f64,
    pub max_iters: usize,
}

impl TisrlConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            epsilon: 1e-7,
            mu0: 1e-5,
            rho0: 1e-5,
            eta: 2.0,
            mu_max: 1e12,
            rho_max: 1e12,
            max_iters: 200,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            ("lambda", self.lambda),
            ("epsilon", self.epsilon),
            ("mu0", self.mu0),
            ("rho0", self.rho0),
            ("mu_max", self.mu_max),
            ("rho_max", self.rho_max),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(SolverError::InvalidConfig(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if !self.eta.is_finite() || self.eta <= 1.0 {
            return Err(SolverError::InvalidConfig(format!(
                "eta must exceed 1, got {}",
                self.eta
            )));
        }
        if self.mu0 > self.mu_max || self.rho0 > self.rho_max {
            return Err(SolverError::InvalidConfig(
                "initial penalties exceed their caps".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(SolverError::InvalidConfig(
                "max_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Immutable per-view data: the view matrix plus cached Gram pieces for the
/// representation update's normal equations.
pub struct ViewContext {
    x: Array2<f64>,
    /// XᵀX.
    gram: Array2<f64>,
    /// (I + XᵀX)⁻¹; the normal matrix μ(I + XᵀX) divided by μ, so one
    /// factorization serves every iteration of the penalty schedule.
    gram_inv: Array2<f64>,
}

impl ViewContext {
    pub fn new(x: Array2<f64>) -> Self {
        let gram = x.t().dot(&x);
        let gram_inv = (&gram + &Array2::<f64>::eye(gram.nrows()))
            .invc()
            .expect("I + XᵀX is positive definite");
        Self { x, gram, gram_inv }
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }
}

/// All block variables and multipliers of the augmented Lagrangian.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Per-view self-representations Z⁽ⁱ⁾ (n × n).
    pub z: Vec<Array2<f64>>,
    /// Per-view orthogonal rotations P⁽ⁱ⁾ (n × n).
    pub p: Vec<Array2<f64>>,
    /// Per-view intrinsic representations C⁽ⁱ⁾ (n × n).
    pub c: Vec<Array2<f64>>,
    /// Joint column-sparse error, stacked over views ((Σd_i) × n).
    pub e: StackedError,
    /// Multipliers of X = XZ + E, one per view (d_i × n).
    pub y_x: Vec<Array2<f64>>,
    /// Multipliers of Z = PC, one per view (n × n).
    pub y_z: Vec<Array2<f64>>,
    /// Φ(C⁽¹⁾, …, C⁽ᵛ⁾), rebuilt after the C updates (n × v × n).
    pub c_tensor: Tensor3,
    /// Low-rank tensor surrogate (n × v × n).
    pub q: Tensor3,
    /// Multiplier of C = Q (n × v × n).
    pub w: Tensor3,
    pub mu: f64,
    pub rho: f64,
    /// Iterations actually executed.
    pub iter: usize,
}

/// One trace record; rows are emitted per (iteration, view), so `err3`,
/// `mu`, `rho`, and `objective` repeat across the views of an iteration.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iter: usize,
    pub view: usize,
    /// max |X − XZ − E| for this view.
    pub err1: f64,
    /// max |Z − PC| for this view.
    pub err2: f64,
    /// max |Φ(C) − Q|.
    pub err3: f64,
    pub mu: f64,
    pub rho: f64,
    /// ‖Q‖_⊛ + λ‖E‖_{2,1} after the iteration's updates.
    pub objective: f64,
}

/// Per-iteration convergence log.
#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    rows: Vec<TraceRow>,
    views: usize,
}

impl ConvergenceTrace {
    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn iterations(&self) -> usize {
        self.rows.len() / self.views.max(1)
    }

    /// Largest feasibility residual of iteration `iter` (1-based).
    pub fn max_residual(&self, iter: usize) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.iter == iter)
            .fold(0.0, |acc, r| acc.max(r.err1).max(r.err2).max(r.err3))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iter,view,err1,err2,err3,mu,rho,objective")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
                r.iter, r.view, r.err1, r.err2, r.err3, r.mu, r.rho, r.objective
            )?;
        }
        Ok(())
    }
}

/// Minimizer of the augmented terms in Z: the normal equations
///
/// ```text
/// μ(I + XᵀX)·Z = XᵀY_x + μ(XᵀX − XᵀE) − Y_z + μPC
/// ```
///
/// divided through by μ and solved with the cached μ-independent factor.
pub fn update_z(
    ctx: &ViewContext,
    e: ArrayView2<'_, f64>,
    y_x: &Array2<f64>,
    y_z: &Array2<f64>,
    p: &Array2<f64>,
    c: &Array2<f64>,
    mu: f64,
) -> Array2<f64> {
    assert!(mu > 0.0, "penalty must be positive");
    let xt = ctx.x.t();
    let mut rhs = xt.dot(y_x);
    rhs.mapv_inplace(|v| v / mu);
    rhs += &ctx.gram;
    rhs -= &xt.dot(&e);
    rhs.scaled_add(-1.0 / mu, y_z);
    rhs += &p.dot(c);
    ctx.gram_inv.dot(&rhs)
}

/// Nearest orthogonal matrix to (Z + Y_z/μ)·Cᵀ.
pub fn update_p(
    z: &Array2<f64>,
    y_z: &Array2<f64>,
    c: &Array2<f64>,
    mu: f64,
) -> Result<Array2<f64>, ProxError> {
    assert!(mu > 0.0, "penalty must be positive");
    let mut m = z.clone();
    m.scaled_add(1.0 / mu, y_z);
    procrustes(&m.dot(&c.t()))
}

/// Joint error update: stacks every view's shifted residual
/// X − XZ + Y_x/μ and shrinks columns at λ/μ. The multiplier shift
/// completes the square, so the result minimizes
/// λ‖E‖_{2,1} + Σᵢ ⟨Y_x⁽ⁱ⁾, X − XZ − E⟩ + μ/2‖X − XZ − E‖²_F over E.
pub fn update_e(
    ctxs: &[ViewContext],
    zs: &[Array2<f64>],
    y_xs: &[Array2<f64>],
    mu: f64,
    lambda: f64,
) -> StackedError {
    assert!(mu > 0.0, "penalty must be positive");
    let blocks: Vec<Array2<f64>> = (0..ctxs.len())
        .into_par_iter()
        .map(|i| {
            let mut g = &ctxs[i].x - &ctxs[i].x.dot(&zs[i]);
            g.scaled_add(1.0 / mu, &y_xs[i]);
            g
        })
        .collect();
    let row_counts: Vec<usize> = blocks.iter().map(Array2::nrows).collect();
    let n = ctxs[0].x.ncols();
    let total: usize = row_counts.iter().sum();
    let mut g = Array2::zeros((total, n));
    let mut offset = 0;
    for block in &blocks {
        g.slice_mut(s![offset..offset + block.nrows(), ..])
            .assign(block);
        offset += block.nrows();
    }
    StackedError::new(l21_prox(&g, lambda / mu), &row_counts)
}

/// Per-view representation update. With orthogonal P the normal matrix
/// collapses to the scalar ρ + μ:
///
/// ```text
/// C = (ρQ⁽ⁱ⁾ − W⁽ⁱ⁾ + PᵀY_z + μPᵀZ) / (ρ + μ)
/// ```
pub fn update_c(
    p: &Array2<f64>,
    z: &Array2<f64>,
    y_z: &Array2<f64>,
    q_slice: &Array2<f64>,
    w_slice: &Array2<f64>,
    mu: f64,
    rho: f64,
) -> Array2<f64> {
    assert!(mu > 0.0 && rho > 0.0, "penalties must be positive");
    let pt = p.t();
    let mut num = q_slice * rho;
    num -= w_slice;
    num += &pt.dot(y_z);
    num.scaled_add(mu, &pt.dot(z));
    num / (rho + mu)
}

/// Tensor shrinkage step: the nuclear-norm prox of Φ(C) + W/ρ at weight 1/ρ.
pub fn update_q(c_tensor: &Tensor3, w: &Tensor3, rho: f64) -> Result<Tensor3, TensorError> {
    tnn_prox(&(c_tensor + &(w * (1.0 / rho))), 1.0 / rho)
}

/// Grows both penalties geometrically (capped), then moves every multiplier
/// along its residual using the grown values.
pub fn update_multipliers(
    state: &mut SolverState,
    r1: &[Array2<f64>],
    r2: &[Array2<f64>],
    r3: &Tensor3,
    cfg: &TisrlConfig,
) {
    state.mu = (cfg.eta * state.mu).min(cfg.mu_max);
    state.rho = (cfg.eta * state.rho).min(cfg.rho_max);
    for (y, r) in state.y_x.iter_mut().zip(r1) {
        y.scaled_add(state.mu, r);
    }
    for (y, r) in state.y_z.iter_mut().zip(r2) {
        y.scaled_add(state.mu, r);
    }
    state.w = &state.w + &(r3 * state.rho);
}

fn max_abs(m: &Array2<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()))
}

/// Runs the alternating scheme to convergence or `max_iters`. Returns the
/// final state, the per-iteration trace, and how the solve ended.
pub fn run(
    data: &MultiViewDataset,
    config: &TisrlConfig,
) -> Result<(SolverState, ConvergenceTrace, SolverStatus), SolverError> {
    config.validate()?;
    let v = data.num_views();
    let n = data.num_samples();
    let ctxs: Vec<ViewContext> = data
        .views()
        .par_iter()
        .map(|x| ViewContext::new(x.clone()))
        .collect();
    let row_counts: Vec<usize> = ctxs.iter().map(|c| c.x.nrows()).collect();

    let mut state = SolverState {
        z: vec![Array2::zeros((n, n)); v],
        p: vec![Array2::eye(n); v],
        c: vec![Array2::zeros((n, n)); v],
        e: StackedError::zeros(&row_counts, n),
        y_x: row_counts.iter().map(|&d| Array2::zeros((d, n))).collect(),
        y_z: vec![Array2::zeros((n, n)); v],
        c_tensor: Tensor3::zeros((n, v, n)),
        q: Tensor3::zeros((n, v, n)),
        w: Tensor3::zeros((n, v, n)),
        mu: config.mu0,
        rho: config.rho0,
        iter: 0,
    };

    let mut rows = Vec::new();
    let mut status = SolverStatus::MaxItersReached;
    for iter in 1..=config.max_iters {
        state.iter = iter;

        let zp: Vec<(Array2<f64>, Array2<f64>)> = (0..v)
            .into_par_iter()
            .map(|i| {
                let z = update_z(
                    &ctxs[i],
                    state.e.block(i),
                    &state.y_x[i],
                    &state.y_z[i],
                    &state.p[i],
                    &state.c[i],
                    state.mu,
                );
                let p = update_p(&z, &state.y_z[i], &state.c[i], state.mu)?;
                Ok((z, p))
            })
            .collect::<Result<_, ProxError>>()?;
        for (i, (z, p)) in zp.into_iter().enumerate() {
            state.z[i] = z;
            state.p[i] = p;
        }

        state.e = update_e(&ctxs, &state.z, &state.y_x, state.mu, config.lambda);

        let q_slices = phi_inverse(&state.q);
        let w_slices = phi_inverse(&state.w);
        state.c = (0..v)
            .into_par_iter()
            .map(|i| {
                update_c(
                    &state.p[i],
                    &state.z[i],
                    &state.y_z[i],
                    &q_slices[i],
                    &w_slices[i],
                    state.mu,
                    state.rho,
                )
            })
            .collect();
        state.c_tensor = construct_phi(&state.c)?;

        state.q = update_q(&state.c_tensor, &state.w, state.rho)?;

        let r1: Vec<Array2<f64>> = (0..v)
            .map(|i| {
                let mut r = &ctxs[i].x - &ctxs[i].x.dot(&state.z[i]);
                r -= &state.e.block(i);
                r
            })
            .collect();
        let r2: Vec<Array2<f64>> = (0..v)
            .map(|i| &state.z[i] - &state.p[i].dot(&state.c[i]))
            .collect();
        let r3 = &state.c_tensor - &state.q;

        let err1: Vec<f64> = r1.iter().map(max_abs).collect();
        let err2: Vec<f64> = r2.iter().map(max_abs).collect();
        let err3 = r3.norm_inf();
        let objective = tnn(&state.q) + config.lambda * state.e.l21_norm();
        for i in 0..v {
            rows.push(TraceRow {
                iter,
                view: i + 1,
                err1: err1[i],
                err2: err2[i],
                err3,
                mu: state.mu,
                rho: state.rho,
                objective,
            });
        }
        log::debug!(
            "iter {iter}: err1 {:.3e} err2 {:.3e} err3 {:.3e} mu {:.3e} objective {:.6e}",
            err1.iter().fold(0.0_f64, |a, &b| a.max(b)),
            err2.iter().fold(0.0_f64, |a, &b| a.max(b)),
            err3,
            state.mu,
            objective,
        );

        let converged =
            err1.iter().chain(err2.iter()).all(|&e| e < config.epsilon) && err3 < config.epsilon;
        update_multipliers(&mut state, &r1, &r2, &r3, config);
        if converged {
            status = SolverStatus::Converged;
            break;
        }
    }

    log::info!("solver {} after {} iterations", status.as_str(), state.iter);
    Ok((state, ConvergenceTrace { rows, views: v }, status))
}

/// Symmetrized average of per-view representations:
/// (1/v)·Σᵢ (|C⁽ⁱ⁾| + |C⁽ⁱ⁾|ᵀ). Exactly symmetric and nonnegative.
pub fn affinity_from_representations(cs: &[Array2<f64>]) -> AffinityMatrix {
    assert!(!cs.is_empty(), "need at least one representation");
    let n = cs[0].nrows();
    let mut w = Array2::zeros((n, n));
    for c in cs {
        let a = c.mapv(f64::abs);
        // Symmetrize before accumulating: |C| + |C|ᵀ is bitwise symmetric
        // (addition commutes), and entrywise sums of symmetric matrices stay
        // symmetric, where interleaved accumulation would not (addition does
        // not associate).
        w += &(&a + &a.t());
    }
    w /= cs.len() as f64;
    AffinityMatrix::new(w).expect("symmetric nonnegative by construction")
}

impl SolverState {
    /// Intrinsic affinity of the learned representations.
    pub fn intrinsic_affinity(&self) -> AffinityMatrix {
        affinity_from_representations(&self.c)
    }
}
