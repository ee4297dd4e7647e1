//! Gaussian distributions truncated to a union of intervals.
//!
//! Interval masses are computed in log space from the scaled complementary
//! error function, always on the side of the mean where the mass is a tail,
//! so supports many standard deviations away from the mean are handled
//! without cancellation.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

use libm::{erf, erfc};

use crate::error::{Error, Result};
use crate::path::IntervalUnion;
use crate::report::{Diagnostic, Side};

/// Relative (to σ) bisection tolerance for CI endpoints.
const CI_TOL: f64 = 1e-8;
/// CI search gives up beyond this many σ from the statistic.
pub(crate) const CI_RANGE: f64 = 1e4;
/// Statistics within this many σ of a truncation boundary are moved inside.
const NUDGE: f64 = 1e-8;
/// Statistics further than this many σ outside the support are rejected.
const OUTSIDE_TOL: f64 = 1e-6;

/// Argument above which erfc is evaluated through its continued fraction.
const CF_SWITCH: f64 = 20.0;

/// erfc(t)·exp(t²) for t ≥ CF_SWITCH.
fn erfcx_tail(t: f64) -> f64 {
    // Continued fraction 1/(t + (1/2)/(t + 1/(t + (3/2)/(t + ...)))), Lentz.
    let tiny = 1e-300;
    let mut f = t;
    let mut c = t;
    let mut d = 0.0;
    for k in 1..200 {
        let a = k as f64 * 0.5;
        d = t + a * d;
        d = if d.abs() < tiny { tiny } else { d };
        c = t + a / c;
        c = if c.abs() < tiny { tiny } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / (f * PI.sqrt())
}

/// log P(Z > x) for a standard normal Z.
pub fn log_upper_tail(x: f64) -> f64 {
    if x == f64::INFINITY {
        f64::NEG_INFINITY
    } else if x == f64::NEG_INFINITY {
        0.0
    } else if x >= 0.0 {
        let t = x * FRAC_1_SQRT_2;
        if t < CF_SWITCH {
            erfc(t).ln() - LN_2
        } else {
            erfcx_tail(t).ln() - t * t - LN_2
        }
    } else {
        (-(log_upper_tail(-x).exp())).ln_1p()
    }
}

/// log(e^a − e^b) for a ≥ b.
fn log_diff(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        a
    } else {
        a + (-(b - a).exp_m1()).ln()
    }
}

/// log P(a ≤ Z ≤ b) for standard normal Z.
pub fn log_std_mass(a: f64, b: f64) -> f64 {
    if !(a < b) {
        return f64::NEG_INFINITY;
    }
    if a >= 0.0 {
        log_diff(log_upper_tail(a), log_upper_tail(b))
    } else if b <= 0.0 {
        log_diff(log_upper_tail(-b), log_upper_tail(-a))
    } else {
        (0.5 * (erf(b * FRAC_1_SQRT_2) + erf(-a * FRAC_1_SQRT_2))).ln()
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.filter(|t| *t > f64::NEG_INFINITY).collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedGaussian {
    pub mu: f64,
    pub var: f64,
    pub support: IntervalUnion,
}

impl TruncatedGaussian {
    pub fn new(mu: f64, var: f64, support: IntervalUnion) -> Result<Self> {
        if !(var > 0.0) || !var.is_finite() || !mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need finite mean and positive variance, got ({mu}, {var})"
            )));
        }
        if support.is_empty() {
            return Err(Error::SelectionEvent("empty truncation set".into()));
        }
        let d = TruncatedGaussian { mu, var, support };
        d.log_total()?;
        Ok(d)
    }

    pub fn sd(&self) -> f64 {
        self.var.sqrt()
    }

    fn log_mass_of(&self, pieces: impl Iterator<Item = (f64, f64)>) -> f64 {
        let sd = self.sd();
        log_sum_exp(pieces.map(|(lo, hi)| log_std_mass((lo - self.mu) / sd, (hi - self.mu) / sd)))
    }

    /// Log of the normalizing mass.
    pub fn log_total(&self) -> Result<f64> {
        let z = self.log_mass_of(self.support.intervals().iter().copied());
        if !z.is_finite() {
            return Err(Error::SupportTooRemote {
                mu: self.mu,
                sd: self.sd(),
            });
        }
        Ok(z)
    }

    /// log F(x).
    pub fn log_cdf(&self, x: f64) -> Result<f64> {
        let total = self.log_total()?;
        let below = self.log_mass_of(
            self.support
                .intervals()
                .iter()
                .filter(|iv| iv.0 < x)
                .map(|&(lo, hi)| (lo, hi.min(x))),
        );
        Ok((below - total).min(0.0))
    }

    /// log(1 − F(x)), computed from the upper pieces directly.
    pub fn log_sf(&self, x: f64) -> Result<f64> {
        let total = self.log_total()?;
        let above = self.log_mass_of(
            self.support
                .intervals()
                .iter()
                .filter(|iv| iv.1 > x)
                .map(|&(lo, hi)| (lo.max(x), hi)),
        );
        Ok((above - total).min(0.0))
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.log_cdf(x).map(f64::exp)
    }

    pub fn sf(&self, x: f64) -> Result<f64> {
        self.log_sf(x).map(f64::exp)
    }
}

pub fn cdf(x: f64, d: &TruncatedGaussian) -> Result<f64> {
    d.cdf(x)
}

/// Moves a statistic lying on (or numerically just outside) the support
/// boundary into the interior.
pub fn place_statistic(
    stat: f64,
    sd: f64,
    support: &IntervalUnion,
) -> Result<(f64, Option<Diagnostic>)> {
    let eps = NUDGE * sd;
    let nearest = support
        .intervals()
        .iter()
        .map(|&(lo, hi)| {
            if stat < lo {
                (lo - stat, lo, hi)
            } else if stat > hi {
                (stat - hi, lo, hi)
            } else {
                (0.0, lo, hi)
            }
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| Error::SelectionEvent("empty truncation set".into()))?;
    let (dist, lo, hi) = nearest;
    if dist > OUTSIDE_TOL * sd.max(stat.abs() * 1e-3) {
        return Err(Error::SelectionEvent(format!(
            "statistic {stat} lies outside its truncation set {support}"
        )));
    }
    let room = 0.5 * (hi - lo);
    let shift = eps.min(room);
    let placed = if stat - lo < eps {
        lo + shift
    } else if hi - stat < eps {
        hi - shift
    } else {
        return Ok((stat, None));
    };
    Ok((
        placed,
        Some(Diagnostic::BoundaryNudge {
            shift: placed - stat,
        }),
    ))
}

/// Two-sided selective p-value 2·min(F, 1 − F) under mean zero.
pub fn p_value(stat: f64, var: f64, support: &IntervalUnion) -> Result<f64> {
    let sd = var.sqrt();
    let (stat, _) = place_statistic(stat, sd, support)?;
    p_value_at(stat, var, support)
}

fn p_value_at(stat: f64, var: f64, support: &IntervalUnion) -> Result<f64> {
    let d = TruncatedGaussian::new(0.0, var, support.clone())?;
    let lc = d.log_cdf(stat)?;
    let ls = d.log_sf(stat)?;
    Ok((2.0 * lc.min(ls).exp()).min(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub diagnostics: Vec<Diagnostic>,
}

/// Finds μ with h(μ) = 0 for h decreasing, searching outward from `stat`.
/// Returns ±∞ when no sign change occurs within the search range.
fn decreasing_root(h: impl Fn(f64) -> Result<f64>, stat: f64, sd: f64) -> Result<Option<f64>> {
    let limit = CI_RANGE * sd;
    let (mut a, mut b);
    let mut step = sd;
    let h0 = h(stat)?;
    if h0 >= 0.0 {
        a = stat;
        loop {
            b = stat + step;
            if h(b)? <= 0.0 {
                break;
            }
            a = b;
            if step > limit {
                return Ok(None);
            }
            step *= 2.0;
        }
    } else {
        b = stat;
        loop {
            a = stat - step;
            if h(a)? >= 0.0 {
                break;
            }
            b = a;
            if step > limit {
                return Ok(None);
            }
            step *= 2.0;
        }
    }
    let tol = CI_TOL * sd;
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if h(m)? >= 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(Some(0.5 * (a + b)))
}

/// Selective CI {μ : α/2 ≤ F(stat; μ) ≤ 1 − α/2}.
pub fn confidence_interval(
    stat: f64,
    var: f64,
    support: &IntervalUnion,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be in (0, 0.5], got {alpha}"
        )));
    }
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "variance must be positive, got {var}"
        )));
    }
    let sd = var.sqrt();
    let (stat, nudge) = place_statistic(stat, sd, support)?;
    let mut diagnostics: Vec<Diagnostic> = nudge.into_iter().collect();
    let target = (0.5 * alpha).ln();
    let dist = |mu: f64| TruncatedGaussian::new(mu, var, support.clone());
    // Lower endpoint: 1 − F(stat; μ) = α/2, with 1 − F increasing in μ.
    let lo = decreasing_root(|mu| Ok(target - dist(mu)?.log_sf(stat)?), stat, sd)?;
    // Upper endpoint: F(stat; μ) = α/2, with F decreasing in μ.
    let hi = decreasing_root(|mu| Ok(dist(mu)?.log_cdf(stat)? - target), stat, sd)?;
    let lo = lo.unwrap_or_else(|| {
        diagnostics.push(Diagnostic::InfiniteEndpoint { side: Side::Lower });
        f64::NEG_INFINITY
    });
    let hi = hi.unwrap_or_else(|| {
        diagnostics.push(Diagnostic::InfiniteEndpoint { side: Side::Upper });
        f64::INFINITY
    });
    Ok(ConfidenceInterval {
        lo,
        hi,
        diagnostics,
    })
}

/// CI and p-value together, sharing one boundary placement.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedInference {
    pub ci: ConfidenceInterval,
    pub p_value: f64,
}

pub fn truncated_inference(
    stat: f64,
    var: f64,
    support: &IntervalUnion,
    alpha: f64,
) -> Result<TruncatedInference> {
    let ci = confidence_interval(stat, var, support, alpha)?;
    let (placed, _) = place_statistic(stat, var.sqrt(), support)?;
    let p_value = p_value_at(placed, var, support)?;
    Ok(TruncatedInference { ci, p_value })
}

/// F(stat; μ) for a given mean; uniform over replicates when μ is the truth.
pub fn pivot(stat: f64, mu: f64, var: f64, support: &IntervalUnion) -> Result<f64> {
    let (stat, _) = place_statistic(stat, var.sqrt(), support)?;
    TruncatedGaussian::new(mu, var, support.clone())?.cdf(stat)
}
