//! Lasso solution path along a one-dimensional family of responses.
//!
//! For a contrast c, responses are parameterized as z₀(τ) = q + τ c/‖c‖² with
//! q the part of ẑ₀ orthogonal to c, so that cᵀz₀(τ) = τ. For fixed λ the
//! Lasso solution is piecewise affine in τ; walking it from the observed τ
//! outward in both directions yields the set of τ where each model is
//! selected, as a finite union of intervals.

mod interval;
mod lambda;

pub use interval::{bound, IntervalUnion, MERGE_TOL};
pub use lambda::{lambda_selection_event, select_lambda, LambdaChoice, Split};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::glm::LinearizedData;
use crate::lasso::{solve_gram, GramProblem};
use crate::linalg::spd_factor;

/// Candidate breakpoints closer than this are considered simultaneous.
const TIE_TOL: f64 = 1e-9;
const MAX_STEPS: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TauParameterization {
    /// (I − P_c)ẑ₀.
    pub q: DVector<f64>,
    /// c/‖c‖².
    pub dir: DVector<f64>,
    pub c: DVector<f64>,
    /// Observed contrast value cᵀẑ₀.
    pub tau_obs: f64,
}

impl TauParameterization {
    pub fn z_at(&self, tau: f64) -> DVector<f64> {
        &self.q + &self.dir * tau
    }
}

pub fn parameterize(lin: &LinearizedData, c: &DVector<f64>) -> Result<TauParameterization> {
    if c.len() != lin.n() {
        return Err(Error::InvalidArgument(
            "contrast length does not match n".into(),
        ));
    }
    let cc = c.norm_squared();
    if !(cc > 0.0) {
        return Err(Error::InvalidArgument("zero contrast".into()));
    }
    let tau_obs = c.dot(&lin.z0);
    let dir = c / cc;
    let q = &lin.z0 - &dir * tau_obs;
    Ok(TauParameterization {
        q,
        dir,
        c: c.clone(),
        tau_obs,
    })
}

/// One piece of the path: on [lo, hi] the active set and signs are fixed and
/// the active coefficients are `intercept + slope·τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSegment {
    pub lo: f64,
    pub hi: f64,
    pub active: Vec<usize>,
    pub signs: Vec<i8>,
    pub intercept: DVector<f64>,
    pub slope: DVector<f64>,
}

impl PathSegment {
    /// Full coefficient vector (length `p`) at τ.
    pub fn beta_at(&self, tau: f64, p: usize) -> DVector<f64> {
        let mut b = DVector::zeros(p);
        for (k, &j) in self.active.iter().enumerate() {
            b[j] = self.intercept[k] + self.slope[k] * tau;
        }
        b
    }
}

/// Path computation result with traversal diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoPath {
    pub segments: Vec<PathSegment>,
    /// Breakpoints where two events coincided within tolerance.
    pub tied_breakpoints: usize,
    /// Breakpoints where the active set had to be re-derived numerically.
    pub resolved_breakpoints: usize,
}

/// Gram-form data for responses q + τd against a fixed design U.
#[derive(Debug, Clone)]
pub struct LineProblem {
    gram: DMatrix<f64>,
    uq: DVector<f64>,
    ud: DVector<f64>,
    qq: f64,
    qd: f64,
    dd: f64,
    n: usize,
}

#[derive(Debug, Clone)]
struct State {
    active: Vec<usize>,
    signs: Vec<i8>,
    a: DVector<f64>,
    b: DVector<f64>,
}

enum Event {
    Leave(usize),
    Join(usize, i8),
}

impl LineProblem {
    pub fn new(u: &DMatrix<f64>, q: &DVector<f64>, d: &DVector<f64>) -> Self {
        LineProblem {
            gram: u.tr_mul(u),
            uq: u.tr_mul(q),
            ud: u.tr_mul(d),
            qq: q.norm_squared(),
            qd: q.dot(d),
            dd: d.norm_squared(),
            n: q.len(),
        }
    }

    /// Restriction to a subset of rows (e.g. a training split).
    pub fn from_rows(u: &DMatrix<f64>, q: &DVector<f64>, d: &DVector<f64>, rows: &[usize]) -> Self {
        let u = u.select_rows(rows.iter());
        let q = q.select_rows(rows.iter());
        let d = d.select_rows(rows.iter());
        Self::new(&u, &q, &d)
    }

    pub fn p(&self) -> usize {
        self.uq.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn gram_problem(&self, tau: f64) -> GramProblem {
        GramProblem {
            gram: self.gram.clone(),
            xty: &self.uq + &self.ud * tau,
            yty: self.qq + 2.0 * tau * self.qd + tau * tau * self.dd,
            n: self.n,
        }
    }

    /// Lasso at a single τ by coordinate descent.
    pub fn solve_at(&self, tau: f64, lambda: f64) -> Result<crate::lasso::LassoSolution> {
        solve_gram(&self.gram_problem(tau), lambda, None)
    }

    fn state(&self, active: Vec<usize>, signs: Vec<i8>, lambda: f64) -> Result<State> {
        let nl = self.n as f64 * lambda;
        if active.is_empty() {
            return Ok(State {
                active,
                signs,
                a: DVector::zeros(0),
                b: DVector::zeros(0),
            });
        }
        let g = self
            .gram
            .select_rows(active.iter())
            .select_columns(active.iter());
        let chol = spd_factor(g).ok_or_else(|| {
            Error::RankDeficient(format!("active columns {active:?} are collinear"))
        })?;
        let rhs_a = DVector::from_iterator(
            active.len(),
            active
                .iter()
                .zip(&signs)
                .map(|(&j, &s)| self.uq[j] - nl * s as f64),
        );
        let rhs_b = DVector::from_iterator(active.len(), active.iter().map(|&j| self.ud[j]));
        Ok(State {
            a: chol.solve(&rhs_a),
            b: chol.solve(&rhs_b),
            active,
            signs,
        })
    }

    /// Correlation of covariate j at τ is alpha_j + gamma_j τ.
    fn correlation_affine(&self, st: &State, j: usize) -> (f64, f64) {
        let mut alpha = self.uq[j];
        let mut gamma = self.ud[j];
        for (k, &i) in st.active.iter().enumerate() {
            let g = self.gram[(j, i)];
            alpha -= g * st.a[k];
            gamma -= g * st.b[k];
        }
        (alpha, gamma)
    }

    fn state_from_solution(&self, tau: f64, lambda: f64) -> Result<State> {
        let sol = self.solve_at(tau, lambda)?;
        self.state(sol.active, sol.signs, lambda)
    }

    /// Next event strictly ahead of `tau` in direction `dir`, if any.
    fn next_event(
        &self,
        st: &State,
        tau: f64,
        dir: f64,
        lambda: f64,
    ) -> Option<(f64, Event, bool)> {
        let nl = self.n as f64 * lambda;
        let mut cands: Vec<(f64, usize, Event)> = Vec::new();
        for (k, &j) in st.active.iter().enumerate() {
            let (a, b) = (st.a[k], st.b[k]);
            if b * dir * f64::from(st.signs[k]) < 0.0 {
                let t = -a / b;
                cands.push((t, j, Event::Leave(j)));
            }
        }
        let mut in_active = vec![false; self.p()];
        for &j in &st.active {
            in_active[j] = true;
        }
        for j in (0..self.p()).filter(|&j| !in_active[j]) {
            let (alpha, gamma) = self.correlation_affine(st, j);
            if gamma * dir > 0.0 {
                cands.push(((nl - alpha) / gamma, j, Event::Join(j, 1)));
            } else if gamma * dir < 0.0 {
                cands.push(((-nl - alpha) / gamma, j, Event::Join(j, -1)));
            }
        }
        cands.retain(|c| !c.0.is_nan());
        // Events already behind (numerical noise) happen immediately.
        for c in cands.iter_mut() {
            if (c.0 - tau) * dir < 0.0 {
                c.0 = tau;
            }
        }
        let best = cands
            .iter()
            .map(|c| c.0 * dir)
            .fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            return None;
        }
        let scale = 1.0f64.max(best.abs());
        let mut tied: Vec<_> = cands
            .into_iter()
            .filter(|c| (c.0 * dir - best) <= TIE_TOL * scale)
            .collect();
        let was_tied = tied.len() > 1;
        tied.sort_by_key(|c| c.1);
        let (_, _, ev) = tied.into_iter().next()?;
        Some((best * dir, ev, was_tied))
    }

    fn apply(&self, st: &State, ev: &Event, lambda: f64) -> Result<State> {
        let mut pairs: Vec<(usize, i8)> = st
            .active
            .iter()
            .copied()
            .zip(st.signs.iter().copied())
            .collect();
        match *ev {
            Event::Leave(j) => pairs.retain(|&(i, _)| i != j),
            Event::Join(j, s) => {
                pairs.push((j, s));
                pairs.sort_by_key(|&(i, _)| i);
            }
        }
        let (active, signs) = pairs.into_iter().unzip();
        self.state(active, signs, lambda)
    }

    /// The new state must move away from the event that created it.
    fn consistent(&self, prev: &State, next: &State, ev: &Event, dir: f64) -> bool {
        match *ev {
            Event::Join(j, s) => {
                let k = next.active.iter().position(|&i| i == j).unwrap();
                next.b[k] * s as f64 * dir > 0.0
            }
            Event::Leave(j) => {
                let k = prev.active.iter().position(|&i| i == j).unwrap();
                let (_, gamma) = self.correlation_affine(next, j);
                gamma * prev.signs[k] as f64 * dir < 0.0
            }
        }
    }

    fn march(
        &self,
        start: &State,
        anchor: f64,
        end: f64,
        lambda: f64,
    ) -> Result<(Vec<PathSegment>, usize, usize)> {
        let dir = if end >= anchor { 1.0 } else { -1.0 };
        let mut st = start.clone();
        let mut tau = anchor;
        let mut out = Vec::new();
        let mut ties = 0;
        let mut resolved = 0;
        let mut stalled = 0;
        for _ in 0..MAX_STEPS {
            let next = self.next_event(&st, tau, dir, lambda);
            let (t_ev, ev, tied) = match next {
                Some((t, ev, tied)) if (t - end) * dir < 0.0 => (t, ev, tied),
                _ => {
                    if tau != end {
                        out.push(segment(&st, tau, end));
                    }
                    return Ok((out, ties, resolved));
                }
            };
            if tied {
                ties += 1;
            }
            if t_ev != tau {
                out.push(segment(&st, tau, t_ev));
                stalled = 0;
            } else {
                stalled += 1;
                if stalled > 4 * self.p() + 8 {
                    return Err(Error::PathCycling { tau });
                }
            }
            tau = t_ev;
            let cand = self.apply(&st, &ev, lambda);
            st = match cand {
                Ok(c) if self.consistent(&st, &c, &ev, dir) => c,
                _ => {
                    resolved += 1;
                    let probe = tau + dir * 1e-7 * tau.abs().max(1.0);
                    self.state_from_solution(probe, lambda)?
                }
            };
        }
        Err(Error::Numeric(format!(
            "path exceeded {MAX_STEPS} breakpoints"
        )))
    }

    /// Piecewise-affine Lasso path over `window`, started from the solution
    /// at `anchor` (which must lie in the window).
    pub fn path(&self, lambda: f64, anchor: f64, window: (f64, f64)) -> Result<LassoPath> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        let (lo, hi) = window;
        if !(lo <= anchor && anchor <= hi) {
            return Err(Error::InvalidArgument(format!(
                "window [{lo}, {hi}] does not contain the observed value {anchor}"
            )));
        }
        let start = self.state_from_solution(anchor, lambda)?;
        let (mut left, t1, r1) = self.march(&start, anchor, lo, lambda)?;
        let (right, t2, r2) = self.march(&start, anchor, hi, lambda)?;
        left.reverse();
        for s in left.iter_mut() {
            std::mem::swap(&mut s.lo, &mut s.hi);
        }
        let mut segments: Vec<PathSegment> = Vec::with_capacity(left.len() + right.len());
        for s in left.into_iter().chain(right) {
            match segments.last_mut() {
                Some(last)
                    if last.active == s.active
                        && last.signs == s.signs
                        && last.hi == s.lo
                        && last.intercept == s.intercept =>
                {
                    last.hi = s.hi;
                }
                _ => segments.push(s),
            }
        }
        if segments.is_empty() {
            segments.push(segment(&start, anchor, anchor));
        }
        Ok(LassoPath {
            segments,
            tied_breakpoints: t1 + t2,
            resolved_breakpoints: r1 + r2,
        })
    }
}

fn segment(st: &State, a: f64, b: f64) -> PathSegment {
    PathSegment {
        lo: a,
        hi: b,
        active: st.active.clone(),
        signs: st.signs.clone(),
        intercept: st.a.clone(),
        slope: st.b.clone(),
    }
}

/// Lasso path of (2n)⁻¹‖z₀(τ) − U₀t‖² + λ‖t‖₁ over τ ∈ `window`.
pub fn lasso_path_in_tau(
    par: &TauParameterization,
    u_mat0: &DMatrix<f64>,
    lambda: f64,
    window: (f64, f64),
) -> Result<Vec<PathSegment>> {
    let problem = LineProblem::new(u_mat0, &par.q, &par.dir);
    Ok(problem.path(lambda, par.tau_obs, window)?.segments)
}

/// Set of τ where the selected model equals `model` (signs ignored).
pub fn selection_event(segments: &[PathSegment], model: &[usize]) -> IntervalUnion {
    let mut m = model.to_vec();
    m.sort_unstable();
    IntervalUnion::from_intervals(
        segments
            .iter()
            .filter(|s| s.active == m)
            .map(|s| (s.lo, s.hi))
            .collect(),
    )
}

/// Set of τ where the selected model equals `model` with the given signs.
pub fn sign_event(segments: &[PathSegment], model: &[usize], signs: &[i8]) -> IntervalUnion {
    let mut pairs: Vec<(usize, i8)> = model.iter().copied().zip(signs.iter().copied()).collect();
    pairs.sort_by_key(|&(j, _)| j);
    let (m, s): (Vec<usize>, Vec<i8>) = pairs.into_iter().unzip();
    IntervalUnion::from_intervals(
        segments
            .iter()
            .filter(|seg| seg.active == m && seg.signs == s)
            .map(|seg| (seg.lo, seg.hi))
            .collect(),
    )
}

pub fn intersect(a: &IntervalUnion, b: &IntervalUnion) -> IntervalUnion {
    a.intersect(b)
}
