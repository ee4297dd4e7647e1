//! End-to-end selective inference: fit, linearize, select, then enumerate the
//! selection event along each contrast and invert the truncated Gaussian.

use nalgebra::DVector;

use crate::baselines::{finish, naive_wald_with, polyhedral_component};
use crate::error::{Error, Result};
use crate::glm::{
    contrast, fit_mle, linearize, Dataset, Family, FitOptions, GlmFit, LinearizedData,
};
use crate::lasso::{per_observation, solve_lasso, LassoSolution};
use crate::path::{
    lambda_selection_event, parameterize, select_lambda, selection_event, sign_event,
    IntervalUnion, LineProblem, Split, TauParameterization,
};
use crate::report::{
    CoefficientReport, Diagnostic, InferenceReport, LambdaInfo, LambdaMode, Method,
    SelectedCovariate,
};

/// Half-width of the initial enumeration window, in standard deviations of
/// the contrast statistic.
pub const WINDOW_SD: f64 = 30.0;
/// Half-width (in SDs) beyond which a window end that still selects the
/// model is taken to select it all the way to infinity. Exceeds the CI search
/// range, so the truncated law is unaffected wherever a CI endpoint can land.
const MAX_HALF_WIDTH_SD: f64 = 1.5 * crate::truncnorm::CI_RANGE;

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSpec {
    /// Penalty on the sum-of-squares scale.
    Fixed(f64),
    /// Validation-based choice over `grid` on a seeded split.
    DataDriven { grid: Vec<f64>, split_frac: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferOptions {
    pub alpha: f64,
    pub lambda: LambdaSpec,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Replicate index keying the split stream (0 outside simulations).
    pub rep: u64,
    pub fit: FitOptions,
}

impl Default for InferOptions {
    fn default() -> Self {
        InferOptions {
            alpha: 0.05,
            lambda: LambdaSpec::Fixed(1.0),
            methods: vec![Method::Ppl],
            seed: 0,
            rep: 0,
            fit: FitOptions::default(),
        }
    }
}

/// Everything decided before inference on individual coefficients.
#[derive(Debug, Clone)]
pub struct Selection {
    pub fit: GlmFit,
    pub lin: LinearizedData,
    /// Penalty on the sum-of-squares scale.
    pub penalty: f64,
    pub lambda: LambdaInfo,
    pub split: Option<Split>,
    pub solution: LassoSolution,
}

impl Selection {
    pub fn model(&self) -> &[usize] {
        &self.solution.active
    }

    pub fn signs(&self) -> &[i8] {
        &self.solution.signs
    }
}

pub fn initial_window(tau_obs: f64, sd: f64) -> (f64, f64) {
    (tau_obs - WINDOW_SD * sd, tau_obs + WINDOW_SD * sd)
}

/// Events on one contrast line.
#[derive(Debug, Clone)]
pub struct ContrastEvents {
    /// τ where the selected model is `model`.
    pub selection: IntervalUnion,
    /// τ where the selected model and signs are `model`, `signs`.
    pub sign: IntervalUnion,
    /// Final enumeration window.
    pub window: (f64, f64),
    /// Largest finite window actually traversed; differs from `window` on
    /// sides assumed to persist to infinity.
    pub finite_window: (f64, f64),
    pub diagnostics: Vec<Diagnostic>,
}

/// Enumerates the model and sign events on `line`, doubling the window while
/// the path at either end still selects `model`.
pub fn contrast_events(
    line: &LineProblem,
    lambda: f64,
    tau_obs: f64,
    sd: f64,
    window: (f64, f64),
    model: &[usize],
    signs: &[i8],
) -> Result<ContrastEvents> {
    let (mut lo, mut hi) = window;
    loop {
        let mut path = line.path(lambda, tau_obs, (lo, hi))?;
        let open_lo = path.segments.first().expect("path has a segment").active == model;
        let open_hi = path.segments.last().expect("path has a segment").active == model;
        let half = (tau_obs - lo).max(hi - tau_obs) / sd;
        let capped = half >= MAX_HALF_WIDTH_SD;
        if (open_lo || open_hi) && !capped {
            if open_lo {
                lo = tau_obs - 2.0 * (tau_obs - lo);
            }
            if open_hi {
                hi = tau_obs + 2.0 * (hi - tau_obs);
            }
            continue;
        }
        let mut diagnostics = Vec::new();
        if path.tied_breakpoints > 0 {
            diagnostics.push(Diagnostic::TiedBreakpoints {
                count: path.tied_breakpoints,
            });
        }
        if path.resolved_breakpoints > 0 {
            diagnostics.push(Diagnostic::ResolvedBreakpoints {
                count: path.resolved_breakpoints,
            });
        }
        if (lo, hi) != window {
            diagnostics.push(Diagnostic::WindowExtended {
                half_width_sd: half,
            });
        }
        let finite_window = (lo, hi);
        if open_lo {
            path.segments.first_mut().expect("path has a segment").lo = f64::NEG_INFINITY;
            lo = f64::NEG_INFINITY;
        }
        if open_hi {
            path.segments.last_mut().expect("path has a segment").hi = f64::INFINITY;
            hi = f64::INFINITY;
        }
        return Ok(ContrastEvents {
            selection: selection_event(&path.segments, model),
            sign: sign_event(&path.segments, model, signs),
            window: (lo, hi),
            finite_window,
            diagnostics,
        });
    }
}

/// Fits the GLM, linearizes it, picks the penalty and solves the Lasso.
pub fn select(data: &Dataset, family: Family, opts: &InferOptions) -> Result<Selection> {
    let fit = fit_mle(data, family, &opts.fit)?;
    let lin = linearize(data, family, &fit)?;
    select_on(data.n(), fit, lin, opts)
}

/// Selection on already-linearized data.
pub fn select_on(
    n: usize,
    fit: GlmFit,
    lin: LinearizedData,
    opts: &InferOptions,
) -> Result<Selection> {
    let (penalty, lambda, split) = match &opts.lambda {
        LambdaSpec::Fixed(pen) => {
            if !(*pen > 0.0) || !pen.is_finite() {
                return Err(Error::Config(format!("lambda must be positive, got {pen}")));
            }
            (
                *pen,
                LambdaInfo {
                    mode: LambdaMode::Fixed,
                    value: *pen,
                    grid: Vec::new(),
                    validation_errors: Vec::new(),
                },
                None,
            )
        }
        LambdaSpec::DataDriven { grid, split_frac } => {
            let split = Split::seeded(n, *split_frac, opts.seed, opts.rep)?;
            let choice = select_lambda(&lin, &split, grid)?;
            let mut sorted = grid.clone();
            sorted.sort_by(f64::total_cmp);
            let info = LambdaInfo {
                mode: LambdaMode::DataDriven,
                value: choice.penalty,
                grid: sorted,
                validation_errors: choice.validation_errors,
            };
            (choice.penalty, info, Some(split))
        }
    };
    let solution = solve_lasso(&lin, per_observation(penalty, n))?;
    Ok(Selection {
        fit,
        lin,
        penalty,
        lambda,
        split,
        solution,
    })
}

/// Carries pieces touching an end of `finite` out to the matching end of
/// `window`.
fn extend_ends(u: &IntervalUnion, finite: (f64, f64), window: (f64, f64)) -> IntervalUnion {
    let pieces = u
        .intervals()
        .iter()
        .map(|&(a, b)| {
            (
                if a <= finite.0 { window.0 } else { a },
                if b >= finite.1 { window.1 } else { b },
            )
        })
        .collect();
    IntervalUnion::from_intervals(pieces)
}

/// Truncation sets for position `k` of the selected model.
#[derive(Debug, Clone)]
pub struct CoefficientEvents {
    pub par: TauParameterization,
    pub sd: f64,
    /// Model event, intersected with the penalty-choice event when the
    /// penalty was data-driven.
    pub ppl: IntervalUnion,
    /// Single sign-conditioned interval (with the same penalty conditioning).
    pub polyhedral: IntervalUnion,
    pub diagnostics: Vec<Diagnostic>,
    pub polyhedral_diagnostics: Vec<Diagnostic>,
}

pub fn coefficient_events(sel: &Selection, k: usize) -> Result<CoefficientEvents> {
    let lin = &sel.lin;
    let model = sel.model();
    let c: DVector<f64> = contrast(&lin.u_mat0, model, k)?;
    let par = parameterize(lin, &c)?;
    let sd = (lin.noise_scale * c.norm_squared()).sqrt();
    let line = LineProblem::new(&lin.u_mat0, &par.q, &par.dir);
    let ev = contrast_events(
        &line,
        per_observation(sel.penalty, lin.n()),
        par.tau_obs,
        sd,
        initial_window(par.tau_obs, sd),
        model,
        sel.signs(),
    )?;
    let (ppl, sign) = match (&sel.split, sel.lambda.mode) {
        (Some(split), LambdaMode::DataDriven) => {
            let t_lambda = lambda_selection_event(
                lin,
                &par,
                split,
                &sel.lambda.grid,
                sel.penalty,
                ev.finite_window,
            )?;
            let t_lambda = extend_ends(&t_lambda, ev.finite_window, ev.window);
            (
                ev.selection.intersect(&t_lambda),
                ev.sign.intersect(&t_lambda),
            )
        }
        _ => (ev.selection.clone(), ev.sign.clone()),
    };
    if ppl.is_empty() {
        return Err(Error::SelectionEvent(
            "observed selection not reproduced along the contrast".into(),
        ));
    }
    let mut polyhedral_diagnostics = ev.diagnostics.clone();
    let (polyhedral, split_diag) = polyhedral_component(&sign, par.tau_obs)?;
    polyhedral_diagnostics.extend(split_diag);
    Ok(CoefficientEvents {
        par,
        sd,
        ppl,
        polyhedral,
        diagnostics: ev.diagnostics,
        polyhedral_diagnostics,
    })
}

/// Per-coefficient inference for the requested truncated methods. Failures
/// are recorded in the entries rather than aborting.
pub fn truncated_reports(
    sel: &Selection,
    names: &[String],
    alpha: f64,
    methods: &[Method],
) -> Vec<CoefficientReport> {
    let model = sel.model();
    let mut out = Vec::new();
    for (k, &j) in model.iter().enumerate() {
        let events = coefficient_events(sel, k);
        for &m in methods.iter().filter(|m| **m != Method::Naive) {
            let rep = events.as_ref().map_err(Clone::clone).and_then(|ev| {
                let var = ev.sd * ev.sd;
                match m {
                    Method::Ppl => finish(
                        ev.par.tau_obs,
                        var,
                        ev.ppl.clone(),
                        alpha,
                        m,
                        j,
                        ev.diagnostics.clone(),
                    ),
                    _ => finish(
                        ev.par.tau_obs,
                        var,
                        ev.polyhedral.clone(),
                        alpha,
                        m,
                        j,
                        ev.polyhedral_diagnostics.clone(),
                    ),
                }
            });
            let mut rep = rep.unwrap_or_else(|e| {
                let est = crate::lasso::refit_ls(&sel.lin, model)
                    .map(|b| b[k])
                    .unwrap_or(f64::NAN);
                CoefficientReport::failed(j, &names[j], m, est, &e)
            });
            rep.name = names[j].clone();
            out.push(rep);
        }
    }
    out
}

/// Full pipeline. An empty selected model yields a report with no
/// coefficients; callers decide whether that is an error.
pub fn infer(data: &Dataset, family: Family, opts: &InferOptions) -> Result<InferenceReport> {
    if !(opts.alpha > 0.0 && opts.alpha <= 0.5) {
        return Err(Error::Config(format!(
            "alpha must be in (0, 0.5], got {}",
            opts.alpha
        )));
    }
    let sel = select(data, family, opts)?;
    Ok(report_for(data, family, &sel, opts))
}

pub fn report_for(
    data: &Dataset,
    family: Family,
    sel: &Selection,
    opts: &InferOptions,
) -> InferenceReport {
    let model = sel.model();
    let mut coefficients = truncated_reports(sel, &data.names, opts.alpha, &opts.methods);
    if opts.methods.contains(&Method::Naive) {
        match naive_wald_with(data, family, model, opts.alpha, &opts.fit) {
            Ok(v) => coefficients.extend(v),
            Err(e) => coefficients.extend(model.iter().map(|&j| {
                CoefficientReport::failed(j, &data.names[j], Method::Naive, f64::NAN, &e)
            })),
        }
    }
    // Model order first, then method order.
    coefficients.sort_by_key(|c| (c.index, c.method));
    let mut diagnostics = Vec::new();
    if sel.fit.ridge_used {
        diagnostics.push(Diagnostic::RidgeFallback {
            penalty: sel.fit.ridge_penalty,
        });
    }
    InferenceReport {
        family,
        n: data.n(),
        p: data.p(),
        alpha: opts.alpha,
        phi: sel.fit.phi,
        lambda: sel.lambda.clone(),
        model: model
            .iter()
            .zip(sel.signs())
            .map(|(&j, &s)| SelectedCovariate {
                index: j + 1,
                name: data.names[j].clone(),
                sign: s,
            })
            .collect(),
        coefficients,
        diagnostics,
    }
}
