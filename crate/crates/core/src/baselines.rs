//! Comparison methods: Wald inference on the refitted submodel ignoring
//! selection, and sign-conditioned (polyhedral) truncated inference.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::glm::{
    beta_observed_information, fit_mle, glm_observed_information, Dataset, Family, FitOptions,
    LinearizedData,
};
use crate::linalg::spd_factor;
use crate::path::{parameterize, IntervalUnion, LineProblem};
use crate::report::{CoefficientReport, Diagnostic, Method};
use crate::truncnorm::truncated_inference;

pub(crate) fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Two-sided normal p-value for a z statistic.
pub(crate) fn normal_p_value(z: f64) -> f64 {
    (2.0 * Normal::standard().sf(z.abs())).min(1.0)
}

/// Wald CIs and p-values from the refitted submodel GLM on the columns
/// `model` (0-based), with standard errors from the inverse observed
/// information.
pub fn naive_wald(
    data: &Dataset,
    family: Family,
    model: &[usize],
    alpha: f64,
) -> Result<Vec<CoefficientReport>> {
    naive_wald_with(data, family, model, alpha, &FitOptions::default())
}

pub fn naive_wald_with(
    data: &Dataset,
    family: Family,
    model: &[usize],
    alpha: f64,
    opts: &FitOptions,
) -> Result<Vec<CoefficientReport>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    if model.is_empty() {
        return Ok(Vec::new());
    }
    let sub = data.select_columns(model);
    let fit = fit_mle(&sub, family, opts)?;
    let info = match family {
        Family::Beta => beta_observed_information(&sub.x, &sub.y, &fit),
        _ => glm_observed_information(&sub.x, &fit)?,
    };
    let mut info = info;
    if fit.ridge_used {
        for k in 1..=model.len() {
            info[(k, k)] += 2.0 * fit.ridge_penalty / fit.dispersion();
        }
    }
    let inv = spd_factor(info)
        .ok_or(Error::SingularInformation)?
        .inverse();
    let z = normal_quantile(1.0 - 0.5 * alpha);
    let diagnostics: Vec<Diagnostic> = if fit.ridge_used {
        vec![Diagnostic::RidgeFallback {
            penalty: fit.ridge_penalty,
        }]
    } else {
        Vec::new()
    };
    Ok(model
        .iter()
        .enumerate()
        .map(|(k, &j)| {
            let est = fit.beta[k];
            let se = inv[(k + 1, k + 1)].sqrt();
            CoefficientReport {
                index: j + 1,
                name: data.names[j].clone(),
                method: Method::Naive,
                estimate: est,
                ci_lo: Some(est - z * se),
                ci_hi: Some(est + z * se),
                p_value: Some(normal_p_value(est / se)),
                sd: Some(se),
                support: IntervalUnion::real_line(),
                diagnostics: diagnostics.clone(),
                error: None,
            }
        })
        .collect())
}

/// Polyhedral inference for position `k` of `model`: the truncation set is
/// the component of the sign-conditioned event containing the statistic.
/// `penalty` is on the sum-of-squares scale.
pub fn polyhedral_infer(
    lin: &LinearizedData,
    penalty: f64,
    model: &[usize],
    signs: &[i8],
    k: usize,
    alpha: f64,
) -> Result<CoefficientReport> {
    let c = crate::glm::contrast(&lin.u_mat0, model, k)?;
    let par = parameterize(lin, &c)?;
    let sd = (lin.noise_scale * c.norm_squared()).sqrt();
    let window = crate::infer::initial_window(par.tau_obs, sd);
    let line = LineProblem::new(&lin.u_mat0, &par.q, &par.dir);
    let events = crate::infer::contrast_events(
        &line,
        crate::lasso::per_observation(penalty, lin.n()),
        par.tau_obs,
        sd,
        window,
        model,
        signs,
    )?;
    let mut diagnostics = events.diagnostics.clone();
    let (support, extra) = polyhedral_component(&events.sign, par.tau_obs)?;
    diagnostics.extend(extra);
    finish(
        par.tau_obs,
        lin.noise_scale * c.norm_squared(),
        support,
        alpha,
        Method::Polyhedral,
        model[k],
        diagnostics,
    )
}

/// Component of a sign event holding `tau_obs`, as a single interval.
pub(crate) fn polyhedral_component(
    sign_event: &IntervalUnion,
    tau_obs: f64,
) -> Result<(IntervalUnion, Option<Diagnostic>)> {
    let comp = sign_event
        .component(tau_obs)
        .or_else(|| {
            // Statistic within tolerance of a boundary: nearest component.
            sign_event
                .intervals()
                .iter()
                .copied()
                .min_by(|a, b| dist(tau_obs, *a).total_cmp(&dist(tau_obs, *b)))
        })
        .ok_or_else(|| {
            Error::SelectionEvent("observed signs never selected along the contrast".into())
        })?;
    let extra = (sign_event.len() > 1).then_some(Diagnostic::SignEventSplit {
        components: sign_event.len(),
    });
    Ok((IntervalUnion::interval(comp.0, comp.1), extra))
}

fn dist(x: f64, iv: (f64, f64)) -> f64 {
    if x < iv.0 {
        iv.0 - x
    } else if x > iv.1 {
        x - iv.1
    } else {
        0.0
    }
}

/// Truncated-Gaussian CI and p-value for one coefficient.
pub(crate) fn finish(
    stat: f64,
    var: f64,
    support: IntervalUnion,
    alpha: f64,
    method: Method,
    index0: usize,
    mut diagnostics: Vec<Diagnostic>,
) -> Result<CoefficientReport> {
    let inf = truncated_inference(stat, var, &support, alpha)?;
    diagnostics.extend(inf.ci.diagnostics.iter().cloned());
    Ok(CoefficientReport {
        index: index0 + 1,
        name: String::new(),
        method,
        estimate: stat,
        ci_lo: Some(inf.ci.lo),
        ci_hi: Some(inf.ci.hi),
        p_value: Some(inf.p_value),
        sd: Some(var.sqrt()),
        support,
        diagnostics,
        error: None,
    })
}
