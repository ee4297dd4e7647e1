use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::family::{beta_working, family_eval, sigmoid_pair, working_pair};
use super::{Dataset, Family};
use crate::error::{Error, Result};
use crate::special::{digamma, ln_gamma, trigamma};

/// When to add the weak ridge penalty κ‖t‖², κ = 10⁻⁴/n, to the negative
/// log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RidgeMode {
    /// Only when the unpenalized MLE fails to exist (separation, p ≥ n,
    /// singular information).
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Convergence tolerance on the max absolute coefficient change and on the
    /// sup-norm of the score.
    pub tol: f64,
    pub max_iter: usize,
    pub ridge: RidgeMode,
    /// Tolerance on the Newton step in log φ (beta regression).
    pub phi_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_iter: 100,
            ridge: RidgeMode::Auto,
            phi_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub family: Family,
    pub beta0: f64,
    pub beta: DVector<f64>,
    /// Precision φ̂ (beta regression); 1 for logistic and Poisson.
    pub phi: f64,
    pub eta: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub ridge_used: bool,
    /// Penalty weight κ actually applied (0 without ridge).
    pub ridge_penalty: f64,
}

impl GlmFit {
    pub fn dispersion(&self) -> f64 {
        self.family.dispersion(self.phi)
    }
}

enum Failure {
    Singular,
    Diverged(Vec<f64>),
    NotConverged {
        iterations: usize,
        change: f64,
        last: Vec<f64>,
    },
}

fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut xt = DMatrix::zeros(n, x.ncols() + 1);
    xt.column_mut(0).fill(1.0);
    xt.columns_mut(1, x.ncols()).copy_from(x);
    xt
}

/// Gradient of a(φ)ℓ − κ‖t‖² with respect to (t₀, t).
fn coefficient_score(
    family: Family,
    xt: &DMatrix<f64>,
    y: &DVector<f64>,
    eta: &DVector<f64>,
    phi: f64,
    coef: &DVector<f64>,
    kappa: f64,
) -> DVector<f64> {
    let resid = DVector::from_iterator(
        y.len(),
        y.iter().zip(eta.iter()).map(|(&yi, &e)| match family {
            Family::Logistic => yi - sigmoid_pair(e).0,
            Family::Poisson => yi - e.exp(),
            Family::Beta => {
                let bw = beta_working(e, phi, yi);
                phi * bw.mu * bw.nu * (bw.y_tilde - bw.mu_tilde)
            }
        }),
    );
    let mut g = xt.tr_mul(&resid);
    for k in 1..g.len() {
        g[k] -= 2.0 * kappa * coef[k];
    }
    g
}

/// Beta log-likelihood in φ with the means held fixed.
fn beta_loglik_phi(mu: &[f64], y: &DVector<f64>, phi: f64) -> f64 {
    mu.iter()
        .zip(y.iter())
        .map(|(&m, &yi)| {
            let nu = 1.0 - m;
            ln_gamma(phi) - ln_gamma(m * phi) - ln_gamma(nu * phi)
                + (m * phi - 1.0) * yi.ln()
                + (nu * phi - 1.0) * (-yi).ln_1p()
        })
        .sum()
}

/// ∂ℓ/∂φ and ∂²ℓ/∂φ² with the means held fixed.
fn beta_phi_derivatives(mu: &[f64], y: &DVector<f64>, phi: f64) -> (f64, f64) {
    let mut s = 0.0;
    let mut h = 0.0;
    for (&m, &yi) in mu.iter().zip(y.iter()) {
        let nu = 1.0 - m;
        s += digamma(phi) - m * digamma(m * phi) - nu * digamma(nu * phi)
            + m * yi.ln()
            + nu * (-yi).ln_1p();
        h += trigamma(phi) - m * m * trigamma(m * phi) - nu * nu * trigamma(nu * phi);
    }
    (s, h)
}

/// Maximizes the beta log-likelihood over φ by Newton steps on log φ.
fn update_phi(mu: &[f64], y: &DVector<f64>, phi0: f64, tol: f64) -> f64 {
    let mut theta = phi0.ln();
    let mut ll = beta_loglik_phi(mu, y, phi0);
    for _ in 0..200 {
        let phi = theta.exp();
        let (s, h) = beta_phi_derivatives(mu, y, phi);
        let g = phi * s;
        let hh = phi * phi * h + phi * s;
        let mut step = if hh < 0.0 { -g / hh } else { g.signum() };
        step = step.clamp(-5.0, 5.0);
        let mut accepted = false;
        for _ in 0..60 {
            let cand = beta_loglik_phi(mu, y, (theta + step).exp());
            if cand.is_finite() && cand >= ll - 1e-12 * ll.abs().max(1.0) {
                theta += step;
                ll = cand;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || step.abs() < tol {
            break;
        }
    }
    theta.exp()
}

fn degenerate_response(data: &Dataset, family: Family) -> Option<String> {
    let y = &data.y;
    let first = y[0];
    let constant = y.iter().all(|&v| v == first);
    match family {
        Family::Logistic if constant => Some(format!("all responses equal {first}")),
        Family::Poisson if y.iter().all(|&v| v == 0.0) => Some("all counts are zero".into()),
        Family::Beta if constant => Some(format!(
            "all responses equal {first}; precision is unbounded"
        )),
        _ => None,
    }
}

struct Irls<'a> {
    family: Family,
    xt: DMatrix<f64>,
    y: &'a DVector<f64>,
    opts: FitOptions,
}

impl Irls<'_> {
    fn run(&self, kappa: f64) -> std::result::Result<GlmFit, Failure> {
        let (n, q) = self.xt.shape();
        let mut coef = DVector::<f64>::zeros(q);
        let mut eta = DVector::<f64>::zeros(n);
        let mut phi = 1.0;
        let mut change = f64::INFINITY;
        let beta = self.family == Family::Beta;

        for it in 1..=self.opts.max_iter {
            let mut phi_step = 0.0;
            if beta {
                let mu: Vec<f64> = eta.iter().map(|&e| sigmoid_pair(e).0).collect();
                let new_phi = update_phi(&mu, self.y, phi, self.opts.phi_tol);
                phi_step = (new_phi.ln() - phi.ln()).abs();
                phi = new_phi;
            }

            let mut xw = self.xt.clone();
            let mut zw = DVector::<f64>::zeros(n);
            for i in 0..n {
                let (w, z) = working_pair(self.family, eta[i], phi, self.y[i])
                    .map_err(|_| Failure::Diverged(coef.iter().copied().collect()))?;
                if !(w > 0.0) || !z.is_finite() {
                    return Err(Failure::Diverged(coef.iter().copied().collect()));
                }
                xw.row_mut(i).scale_mut(w);
                zw[i] = z;
            }
            let mut gram = xw.tr_mul(&xw);
            for k in 1..q {
                gram[(k, k)] += 2.0 * kappa;
            }
            let rhs = xw.tr_mul(&zw);
            let chol = gram.cholesky().ok_or(Failure::Singular)?;
            let next = chol.solve(&rhs);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Failure::Diverged(coef.iter().copied().collect()));
            }
            change = (&next - &coef).amax();
            coef = next;
            eta = &self.xt * &coef;

            if change < self.opts.tol && phi_step < self.opts.phi_tol.max(1e-14) {
                let score =
                    coefficient_score(self.family, &self.xt, self.y, &eta, phi, &coef, kappa);
                let mut ok = score.amax() < self.opts.tol;
                if beta {
                    let mu: Vec<f64> = eta.iter().map(|&e| sigmoid_pair(e).0).collect();
                    let (s, _) = beta_phi_derivatives(&mu, self.y, phi);
                    ok &= (phi * s).abs() < self.opts.tol.max(1e-10 * n as f64);
                }
                if ok {
                    return Ok(GlmFit {
                        family: self.family,
                        beta0: coef[0],
                        beta: coef.rows(1, q - 1).into_owned(),
                        phi,
                        eta,
                        converged: true,
                        iterations: it,
                        ridge_used: kappa > 0.0,
                        ridge_penalty: kappa,
                    });
                }
            }
        }
        Err(Failure::NotConverged {
            iterations: self.opts.max_iter,
            change,
            last: coef.iter().copied().collect(),
        })
    }
}

fn separated(fit: &GlmFit) -> bool {
    fit.family == Family::Logistic
        && fit.eta.iter().any(|&e| {
            let (mu, nu) = sigmoid_pair(e);
            mu < 1e-10 || nu < 1e-10
        })
}

/// Fits the GLM (or beta regression) by iteratively reweighted least squares
/// from a zero start, falling back to a weakly ridge-penalized fit when the
/// MLE does not exist.
pub fn fit_mle(data: &Dataset, family: Family, opts: &FitOptions) -> Result<GlmFit> {
    data.validate(family)?;
    let n = data.n();
    if n < 2 {
        return Err(Error::Data("at least two observations required".into()));
    }
    if let Some(msg) = degenerate_response(data, family) {
        return Err(Error::DegenerateResponse(msg));
    }
    let irls = Irls {
        family,
        xt: with_intercept(&data.x),
        y: &data.y,
        opts: *opts,
    };
    let kappa = 1e-4 / n as f64;

    let to_error = |f: Failure| match f {
        Failure::Singular => Error::RankDeficient("information matrix is singular".into()),
        Failure::Diverged(last) => Error::NotConverged {
            iterations: opts.max_iter,
            last_change: f64::INFINITY,
            last_iterate: last,
        },
        Failure::NotConverged {
            iterations,
            change,
            last,
        } => Error::NotConverged {
            iterations,
            last_change: change,
            last_iterate: last,
        },
    };

    let force_ridge =
        opts.ridge == RidgeMode::Always || (opts.ridge == RidgeMode::Auto && data.p() >= n);
    if force_ridge {
        return irls.run(kappa).map_err(to_error);
    }
    match irls.run(0.0) {
        Ok(fit) if opts.ridge == RidgeMode::Auto && separated(&fit) => {
            irls.run(kappa).map_err(to_error)
        }
        Ok(fit) => Ok(fit),
        Err(f) if opts.ridge == RidgeMode::Never => Err(to_error(f)),
        Err(_) => irls.run(kappa).map_err(to_error),
    }
}

/// Negative Hessian of the beta-regression log-likelihood in (t₀, t, φ).
pub(crate) fn beta_observed_information(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    fit: &GlmFit,
) -> DMatrix<f64> {
    let xt = with_intercept(x);
    let q = xt.ncols();
    let phi = fit.phi;
    let mut info = DMatrix::zeros(q + 1, q + 1);
    for i in 0..xt.nrows() {
        let bw = beta_working(fit.eta[i], phi, y[i]);
        let g = bw.mu * bw.nu;
        let tg_mu = trigamma(bw.mu * phi);
        let tg_nu = trigamma(bw.nu * phi);
        let resid = bw.y_tilde - bw.mu_tilde;
        let d_eta_eta =
            -phi * phi * (tg_mu + tg_nu) * g * g + phi * resid * g * (1.0 - 2.0 * bw.mu);
        let d_eta_phi = g * (resid - phi * (bw.mu * tg_mu - bw.nu * tg_nu));
        let d_phi_phi = trigamma(phi) - bw.mu * bw.mu * tg_mu - bw.nu * bw.nu * tg_nu;
        let row = xt.row(i);
        for a in 0..q {
            for b in 0..q {
                info[(a, b)] -= d_eta_eta * row[a] * row[b];
            }
            info[(a, q)] -= d_eta_phi * row[a];
            info[(q, a)] -= d_eta_phi * row[a];
        }
        info[(q, q)] -= d_phi_phi;
    }
    info
}

/// Negative Hessian of ℓ in (t₀, t) for logistic and Poisson, X̃ᵀ diag(b″) X̃.
pub(crate) fn glm_observed_information(x: &DMatrix<f64>, fit: &GlmFit) -> Result<DMatrix<f64>> {
    let mut xw = with_intercept(x);
    for i in 0..xw.nrows() {
        let c = family_eval(fit.family, fit.eta[i], fit.phi)?;
        xw.row_mut(i).scale_mut(c.b2.sqrt());
    }
    Ok(xw.tr_mul(&xw) / fit.dispersion())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intercept_only(y: Vec<f64>) -> Dataset {
        let n = y.len();
        Dataset::new(DMatrix::zeros(n, 0), DVector::from_vec(y)).unwrap()
    }

    #[test]
    fn poisson_intercept_is_log_mean() {
        let data = intercept_only(vec![3.0; 10]);
        let fit = fit_mle(&data, Family::Poisson, &FitOptions::default()).unwrap();
        assert!((fit.beta0 - 3f64.ln()).abs() < 1e-10);
        assert!(fit.converged && !fit.ridge_used);
    }

    #[test]
    fn logistic_intercept_is_logit_mean() {
        let data = intercept_only(vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let fit = fit_mle(&data, Family::Logistic, &FitOptions::default()).unwrap();
        assert!((fit.beta0 - (0.25f64 / 0.75).ln()).abs() < 1e-10);
        assert!((fit.beta0 + 1.0986).abs() < 1e-4);
    }

    #[test]
    fn constant_binary_response_is_degenerate() {
        let data = intercept_only(vec![1.0; 5]);
        let err = fit_mle(&data, Family::Logistic, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateResponse(_)));
        let data = intercept_only(vec![0.4; 5]);
        assert!(matches!(
            fit_mle(&data, Family::Beta, &FitOptions::default()),
            Err(Error::DegenerateResponse(_))
        ));
    }

    #[test]
    fn domain_violations_name_the_row() {
        let data = intercept_only(vec![0.2, 1.0, 0.3]);
        let err = fit_mle(&data, Family::Beta, &FitOptions::default()).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }

    #[test]
    fn separation_triggers_ridge() {
        let x = DMatrix::from_column_slice(6, 1, &[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]);
        let y = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let data = Dataset::new(x, y).unwrap();
        let fit = fit_mle(&data, Family::Logistic, &FitOptions::default()).unwrap();
        assert!(fit.ridge_used);
        assert!(fit.beta[0] > 0.0 && fit.beta[0].is_finite());
        let never = FitOptions {
            ridge: RidgeMode::Never,
            ..FitOptions::default()
        };
        assert!(fit_mle(&data, Family::Logistic, &never).is_err());
    }

    #[test]
    fn wide_design_uses_ridge() {
        let x = DMatrix::from_fn(4, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let y = DVector::from_vec(vec![1.0, 2.0, 0.0, 4.0]);
        let data = Dataset::new(x, y).unwrap();
        let fit = fit_mle(&data, Family::Poisson, &FitOptions::default()).unwrap();
        assert!(fit.ridge_used);
    }
}
