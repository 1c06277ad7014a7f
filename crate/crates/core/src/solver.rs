//! Levenberg-Marquardt over the unit dual quaternions. Every step is
//! applied through `⊞` and the Jacobian columns are left perturbations in
//! `[omega; nu]` order, so the linear algebra stays 6×6.

use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Matrix6, SymmetricEigen, Vector6};
use thiserror::Error;

use crate::dq::{DqError, UnitDualQuaternion};
use crate::manifold::{boxplus, TangentVector};
use crate::residuals::{total_cost, CostError, Correspondences, ResidualConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Relative cost change that counts as converged.
    pub function_tolerance: f64,
    /// Tangent-space step norm that counts as converged.
    pub parameter_tolerance: f64,
    pub initial_lambda: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub finite_difference_step: f64,
    /// Minimum number of scalar residual rows.
    pub min_correspondences: usize,
    /// `λ_min(H) / λ_max(H)` below this is reported as degenerate geometry.
    pub degeneracy_ratio: f64,
    pub residual: ResidualConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 30,
            function_tolerance: 1e-8,
            parameter_tolerance: 1e-8,
            initial_lambda: 1e-4,
            lambda_up: 10.0,
            lambda_down: 10.0,
            finite_difference_step: 1e-6,
            min_correspondences: 20,
            degeneracy_ratio: 1e-10,
            residual: ResidualConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    FunctionTolerance,
    ParameterTolerance,
    /// The gradient vanished; the start point is already optimal.
    Gradient,
    MaxIterations,
    /// Damping grew without finding a decreasing step.
    DampingExhausted,
}

impl fmt::Display for Convergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Convergence::FunctionTolerance => "function_tolerance",
            Convergence::ParameterTolerance => "parameter_tolerance",
            Convergence::Gradient => "gradient",
            Convergence::MaxIterations => "max_iterations",
            Convergence::DampingExhausted => "damping_exhausted",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Cost after this iteration (unchanged when the step was rejected).
    pub cost: f64,
    /// Damping used for the step.
    pub lambda: f64,
    pub step_norm: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub convergence: Convergence,
    pub history: Vec<IterationRecord>,
    pub jacobian_time: Duration,
    pub linear_solve_time: Duration,
    pub total_time: Duration,
}

impl SolverReport {
    /// One line per iteration: `iter cost lambda step_norm`.
    pub fn to_log(&self) -> String {
        let mut s = String::new();
        for r in &self.history {
            let _ = writeln!(s, "{} {:e} {:e} {:e}", r.iteration, r.cost, r.lambda, r.step_norm);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("{rows} residual rows, at least {required} required")]
    TooFewRows { rows: usize, required: usize },
    #[error(
        "degenerate geometry: normal equations rank deficient (eigenvalue ratio {ratio:e}), unobservable direction {direction:?}"
    )]
    Degenerate { ratio: f64, direction: [f64; 6] },
    #[error("non-finite residual while probing tangent direction {direction}")]
    NonFinite { direction: usize },
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Dq(#[from] DqError),
}

/// The 12 probe poses `q ⊞ ±h e_j`, ordered `+e_0, −e_0, +e_1, …`.
fn probe_poses(q: &UnitDualQuaternion, h: f64) -> [UnitDualQuaternion; 12] {
    std::array::from_fn(|i| {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        boxplus(q, &TangentVector::basis(i / 2, sign * h))
    })
}

/// Central-difference Jacobian of `residual_fn` at `q`; column `j` is
/// `(r(q ⊞ h e_j) − r(q ⊞ −h e_j)) / 2h`.
pub fn numeric_jacobian<F>(q: &UnitDualQuaternion, h: f64, residual_fn: F) -> Result<DMatrix<f64>, SolverError>
where
    F: Fn(&UnitDualQuaternion) -> DVector<f64>,
{
    let probes = probe_poses(q, h);
    let mut jac: Option<DMatrix<f64>> = None;
    for j in 0..6 {
        let rp = residual_fn(&probes[2 * j]);
        let rm = residual_fn(&probes[2 * j + 1]);
        if rp.iter().chain(rm.iter()).any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite { direction: j });
        }
        let m = jac.get_or_insert_with(|| DMatrix::zeros(rp.len(), 6));
        m.set_column(j, &((rp - rm) / (2.0 * h)));
    }
    Ok(jac.expect("six columns"))
}

struct NormalEquations {
    h: Matrix6<f64>,
    g: Vector6<f64>,
}

/// IRLS-weighted `JᵀJ` and `Jᵀr`, reduced in block order.
fn normal_equations(
    q: &UnitDualQuaternion,
    corr: &Correspondences,
    cfg: &SolverConfig,
) -> Result<NormalEquations, SolverError> {
    let step = cfg.finite_difference_step;
    let probes = probe_poses(q, step);
    let rcfg = &cfg.residual;
    let blocks = crate::exec::map_range(corr.block_count(), |i| -> Result<_, SolverError> {
        let b = corr.block(i);
        let r0 = b.evaluate(q, rcfg)?;
        let w = b.loss(rcfg).weight(r0.squared_norm());
        let mut h = Matrix6::zeros();
        let mut g = Vector6::zeros();
        let mut cols = [[0.0; 6]; 6];
        for (j, col) in cols.iter_mut().enumerate() {
            let rp = b.evaluate(&probes[2 * j], rcfg)?;
            let rm = b.evaluate(&probes[2 * j + 1], rcfg)?;
            for k in 0..r0.dim {
                col[k] = (rp.values[k] - rm.values[k]) / (2.0 * step);
                if !col[k].is_finite() {
                    return Err(SolverError::NonFinite { direction: j });
                }
            }
        }
        for a in 0..6 {
            for k in 0..r0.dim {
                g[a] += w * cols[a][k] * r0.values[k];
            }
            for c in a..6 {
                let mut s = 0.0;
                for k in 0..r0.dim {
                    s += cols[a][k] * cols[c][k];
                }
                h[(a, c)] = w * s;
                h[(c, a)] = w * s;
            }
        }
        Ok((h, g))
    });
    let mut h = Matrix6::zeros();
    let mut g = Vector6::zeros();
    for b in blocks {
        let (bh, bg) = b?;
        h += bh;
        g += bg;
    }
    Ok(NormalEquations { h, g })
}

fn check_observability(h: &Matrix6<f64>, cfg: &SolverConfig) -> Result<(), SolverError> {
    let eig = SymmetricEigen::new(*h);
    let (mut imin, mut imax) = (0, 0);
    for i in 1..6 {
        if eig.eigenvalues[i] < eig.eigenvalues[imin] {
            imin = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[imax] {
            imax = i;
        }
    }
    let max = eig.eigenvalues[imax];
    let ratio = if max > 0.0 { eig.eigenvalues[imin].max(0.0) / max } else { 0.0 };
    if ratio < cfg.degeneracy_ratio {
        let v = eig.eigenvectors.column(imin);
        return Err(SolverError::Degenerate {
            ratio,
            direction: [v[0], v[1], v[2], v[3], v[4], v[5]],
        });
    }
    Ok(())
}

/// Minimizes the total cost of `corr` starting from `initial`.
pub fn solve(
    initial: &UnitDualQuaternion,
    corr: &Correspondences,
    cfg: &SolverConfig,
) -> Result<(UnitDualQuaternion, SolverReport), SolverError> {
    let start = Instant::now();
    let rows = corr.row_count();
    if rows < cfg.min_correspondences {
        return Err(SolverError::TooFewRows {
            rows,
            required: cfg.min_correspondences,
        });
    }
    let mut q = initial.canonical();
    let mut cost = total_cost(&q, corr, &cfg.residual)?;
    let initial_cost = cost;
    let mut lambda = cfg.initial_lambda;
    let mut history = Vec::new();
    let mut jacobian_time = Duration::ZERO;
    let mut linear_solve_time = Duration::ZERO;
    let mut convergence = Convergence::MaxIterations;
    let mut ne: Option<NormalEquations> = None;

    for iteration in 1..=cfg.max_iterations {
        if ne.is_none() {
            let t = Instant::now();
            let fresh = normal_equations(&q, corr, cfg)?;
            jacobian_time += t.elapsed();
            if iteration == 1 {
                check_observability(&fresh.h, cfg)?;
            }
            ne = Some(fresh);
        }
        let NormalEquations { h, g } = ne.as_ref().expect("just computed");
        if cost == 0.0 || g.amax() == 0.0 {
            convergence = Convergence::Gradient;
            break;
        }

        let t = Instant::now();
        let mut damped = *h;
        for i in 0..6 {
            damped[(i, i)] += lambda * h[(i, i)].max(1e-12);
        }
        let delta = damped.cholesky().map(|c| -c.solve(g));
        linear_solve_time += t.elapsed();
        let Some(delta) = delta else {
            lambda *= cfg.lambda_up;
            history.push(IterationRecord {
                iteration,
                cost,
                lambda,
                step_norm: f64::NAN,
                accepted: false,
            });
            continue;
        };

        let step = TangentVector::from_vector(&delta);
        let step_norm = step.norm();
        if step_norm < cfg.parameter_tolerance {
            history.push(IterationRecord {
                iteration,
                cost,
                lambda,
                step_norm,
                accepted: false,
            });
            convergence = Convergence::ParameterTolerance;
            break;
        }
        let candidate = boxplus(&q, &step);
        let new_cost = total_cost(&candidate, corr, &cfg.residual)?;
        let accepted = new_cost.is_finite() && new_cost <= cost;
        let used_lambda = lambda;
        if accepted {
            let decrease = cost - new_cost;
            q = candidate;
            cost = new_cost;
            lambda /= cfg.lambda_down;
            ne = None;
            history.push(IterationRecord {
                iteration,
                cost,
                lambda: used_lambda,
                step_norm,
                accepted,
            });
            if decrease <= cfg.function_tolerance * cost.max(f64::MIN_POSITIVE) || cost == 0.0 {
                convergence = Convergence::FunctionTolerance;
                break;
            }
        } else {
            lambda *= cfg.lambda_up;
            history.push(IterationRecord {
                iteration,
                cost,
                lambda: used_lambda,
                step_norm,
                accepted,
            });
            if lambda > 1e16 {
                convergence = Convergence::DampingExhausted;
                break;
            }
        }
    }

    let report = SolverReport {
        iterations: history.len(),
        initial_cost,
        final_cost: cost,
        convergence,
        history,
        jacobian_time,
        linear_solve_time,
        total_time: start.elapsed(),
    };
    log::debug!(
        "solve: {} iterations, cost {:e} -> {:e} ({})",
        report.iterations,
        report.initial_cost,
        report.final_cost,
        report.convergence
    );
    Ok((q, report))
}
