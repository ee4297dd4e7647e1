use super::Family;
use crate::error::{Error, Result};
use crate::special::{digamma, trigamma};

/// Cumulant function and its first two derivatives at η.
///
/// For beta regression `b1` and `b2` are the mean μ and μν (the derivative of
/// the logit-inverse mean), and `b` is their antiderivative log(1 + eη).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cumulants {
    pub b: f64,
    pub b1: f64,
    pub b2: f64,
}

/// log(1 + eη) without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// Logistic function and its complement, each computed without cancellation.
pub(crate) fn sigmoid_pair(eta: f64) -> (f64, f64) {
    if eta >= 0.0 {
        let e = (-eta).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = eta.exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    }
}

pub fn family_eval(family: Family, eta: f64, phi: f64) -> Result<Cumulants> {
    if !eta.is_finite() {
        return Err(Error::Numeric(format!("non-finite linear predictor {eta}")));
    }
    match family {
        Family::Logistic | Family::Beta => {
            if family == Family::Beta && !(phi > 0.0 && phi.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "beta precision must be positive, got {phi}"
                )));
            }
            let (mu, nu) = sigmoid_pair(eta);
            Ok(Cumulants {
                b: softplus(eta),
                b1: mu,
                b2: mu * nu,
            })
        }
        Family::Poisson => {
            let e = eta.exp();
            Ok(Cumulants { b: e, b1: e, b2: e })
        }
    }
}

/// Per-observation quantities for beta-regression Fisher scoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaWorking {
    pub mu: f64,
    pub nu: f64,
    /// Scoring weight √φ μν √(ψ′(μφ) + ψ′(νφ)).
    pub w: f64,
    /// log(y / (1 − y)).
    pub y_tilde: f64,
    /// ψ(μφ) − ψ(νφ), the mean of `y_tilde`.
    pub mu_tilde: f64,
}

pub fn beta_working(eta: f64, phi: f64, y: f64) -> BetaWorking {
    let (mu, nu) = sigmoid_pair(eta);
    let w = phi.sqrt() * mu * nu * (trigamma(mu * phi) + trigamma(nu * phi)).sqrt();
    BetaWorking {
        mu,
        nu,
        w,
        y_tilde: y.ln() - (-y).ln_1p(),
        mu_tilde: digamma(mu * phi) - digamma(nu * phi),
    }
}

/// Square-root weight and working response at η for one observation.
pub(crate) fn working_pair(family: Family, eta: f64, phi: f64, y: f64) -> Result<(f64, f64)> {
    match family {
        Family::Logistic | Family::Poisson => {
            let c = family_eval(family, eta, phi)?;
            let w = c.b2.sqrt();
            Ok((w, w * eta + (y - c.b1) / w))
        }
        Family::Beta => {
            if !eta.is_finite() {
                return Err(Error::Numeric(format!("non-finite linear predictor {eta}")));
            }
            let bw = beta_working(eta, phi, y);
            Ok((
                bw.w,
                bw.w * eta + bw.mu * bw.nu * (bw.y_tilde - bw.mu_tilde) / bw.w,
            ))
        }
    }
}
