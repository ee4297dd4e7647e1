//! L1-penalized least squares on the pseudo-data.
//!
//! The objective is (2n)⁻¹‖z − Ut‖² + λ‖t‖₁, so at a solution the
//! correlations r = Uᵀ(z − Ut) satisfy |r_j| = nλ on the active set and
//! |r_j| ≤ nλ elsewhere. Everything here works from the Gram matrix UᵀU and
//! the cross-products Uᵀz, which keeps repeated solves along a path cheap.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::glm::LinearizedData;
use crate::linalg::spd_factor;

/// Coefficients below this magnitude are treated as exactly zero.
pub const ZERO_THRESHOLD: f64 = 1e-12;

/// Converts a penalty on the sum-of-squares scale ‖z − Ut‖² + P‖t‖₁ into
/// the per-observation λ used by the solver.
pub fn per_observation(penalty: f64, n: usize) -> f64 {
    penalty / (2.0 * n as f64)
}

const CHANGE_TOL: f64 = 1e-10;
const GAP_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100_000;

/// Sufficient statistics of a least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GramProblem {
    pub gram: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yty: f64,
    pub n: usize,
}

impl GramProblem {
    pub fn new(u: &DMatrix<f64>, z: &DVector<f64>) -> Self {
        GramProblem {
            gram: u.tr_mul(u),
            xty: u.tr_mul(z),
            yty: z.norm_squared(),
            n: z.len(),
        }
    }

    pub fn p(&self) -> usize {
        self.xty.len()
    }

    /// ‖z − Ut‖².
    pub fn rss(&self, t: &DVector<f64>) -> f64 {
        (self.yty - 2.0 * t.dot(&self.xty) + t.dot(&(&self.gram * t))).max(0.0)
    }

    pub fn objective(&self, t: &DVector<f64>, lambda: f64) -> f64 {
        self.rss(t) / (2.0 * self.n as f64) + lambda * t.lp_norm(1)
    }

    /// Duality gap of `t`, using the rescaled residual as dual point.
    pub fn duality_gap(&self, t: &DVector<f64>, lambda: f64) -> f64 {
        let n = self.n as f64;
        let corr = &self.xty - &self.gram * t;
        let rss = self.rss(t);
        let rz = self.yty - t.dot(&self.xty);
        let cmax = corr.amax();
        let s = if cmax > n * lambda {
            n * lambda / cmax
        } else {
            1.0
        };
        let primal = rss / (2.0 * n) + lambda * t.lp_norm(1);
        let dual = (s * rz - 0.5 * s * s * rss) / n;
        (primal - dual).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub beta_lambda: DVector<f64>,
    pub lambda: f64,
    /// Active covariates, increasing.
    pub active: Vec<usize>,
    /// Signs of the active coefficients, aligned with `active`.
    pub signs: Vec<i8>,
    /// Correlations Uᵀ(z − Uβ̂_λ).
    pub corr: DVector<f64>,
    pub objective: f64,
    pub gap: f64,
}

fn soft_threshold(v: f64, thr: f64) -> f64 {
    if v > thr {
        v - thr
    } else if v < -thr {
        v + thr
    } else {
        0.0
    }
}

fn active_set(t: &DVector<f64>) -> (Vec<usize>, Vec<i8>) {
    t.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() >= ZERO_THRESHOLD)
        .map(|(j, v)| (j, if *v > 0.0 { 1i8 } else { -1i8 }))
        .unzip()
}

/// Re-solves the KKT equations on the active set; keeps the result only when
/// signs and inactive bounds stay consistent.
fn polish(problem: &GramProblem, t: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let (active, signs) = active_set(t);
    if active.is_empty() {
        return None;
    }
    let nl = problem.n as f64 * lambda;
    let g_aa = problem
        .gram
        .select_rows(active.iter())
        .select_columns(active.iter());
    let rhs = DVector::from_iterator(
        active.len(),
        active
            .iter()
            .zip(&signs)
            .map(|(&j, &s)| problem.xty[j] - nl * s as f64),
    );
    let b = spd_factor(g_aa)?.solve(&rhs);
    let mut out = DVector::zeros(problem.p());
    for ((&j, &s), &v) in active.iter().zip(&signs).zip(b.iter()) {
        if v * s as f64 <= 0.0 {
            return None;
        }
        out[j] = v;
    }
    let corr = &problem.xty - &problem.gram * &out;
    let ok = (0..problem.p()).all(|j| out[j] != 0.0 || corr[j].abs() <= nl * (1.0 + 1e-9));
    ok.then_some(out)
}

/// Cyclic coordinate descent from `warm` (or zero).
pub fn solve_gram(
    problem: &GramProblem,
    lambda: f64,
    warm: Option<&DVector<f64>>,
) -> Result<LassoSolution> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let p = problem.p();
    let nl = problem.n as f64 * lambda;
    let mut t = warm.cloned().unwrap_or_else(|| DVector::zeros(p));
    // corr = Uᵀz − Gt, maintained incrementally.
    let mut corr = &problem.xty - &problem.gram * &t;
    let mut gap = f64::INFINITY;
    let mut converged = false;
    // Tolerances relative to the size of the problem: the objective at zero
    // and the magnitude of the unpenalized coefficients.
    let gap_scale = (problem.yty / (2.0 * problem.n as f64)).max(1.0);
    let scale = gap_scale.sqrt();

    for _ in 0..MAX_SWEEPS {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let gjj = problem.gram[(j, j)];
            if gjj <= 0.0 {
                continue;
            }
            let old = t[j];
            let new = soft_threshold(corr[j] + gjj * old, nl) / gjj;
            let delta = new - old;
            if delta != 0.0 {
                t[j] = new;
                corr.axpy(-delta, &problem.gram.column(j), 1.0);
                max_change = max_change.max(delta.abs());
            }
        }
        gap = problem.duality_gap(&t, lambda);
        if max_change < CHANGE_TOL * scale || gap < GAP_TOL * gap_scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::LassoNotConverged {
            gap,
            sweeps: MAX_SWEEPS,
        });
    }

    if let Some(polished) = polish(problem, &t, lambda) {
        let pg = problem.duality_gap(&polished, lambda);
        if pg <= gap.max(GAP_TOL * gap_scale) {
            t = polished;
            gap = pg;
        }
    }
    for v in t.iter_mut() {
        if v.abs() < ZERO_THRESHOLD {
            *v = 0.0;
        }
    }
    let (active, signs) = active_set(&t);
    let corr = &problem.xty - &problem.gram * &t;
    Ok(LassoSolution {
        objective: problem.objective(&t, lambda),
        beta_lambda: t,
        lambda,
        active,
        signs,
        corr,
        gap,
    })
}

/// Lasso on the centered pseudo-data.
pub fn solve_lasso(lin: &LinearizedData, lambda: f64) -> Result<LassoSolution> {
    solve_gram(&GramProblem::new(&lin.u_mat0, &lin.z0), lambda, None)
}

pub fn select_model(sol: &LassoSolution) -> Vec<usize> {
    sol.active.clone()
}

/// Least-squares coefficients of ẑ₀ on the columns `model` of Û₀.
pub fn refit_ls(lin: &LinearizedData, model: &[usize]) -> Result<DVector<f64>> {
    if model.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let um = lin.u_mat0.select_columns(model.iter());
    let chol = spd_factor(um.tr_mul(&um))
        .ok_or_else(|| Error::RankDeficient(format!("selected columns {model:?} are collinear")))?;
    Ok(chol.solve(&um.tr_mul(&lin.z0)))
}
