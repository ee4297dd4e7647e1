//! Independent oracles and instance generators shared by the integration
//! tests. Nothing here calls the solver or CDF code it is used to check.
#![allow(dead_code, clippy::excessive_precision)]

pub mod props;

use glmsel::glm::{fit_mle, linearize, Dataset, Family, FitOptions, GlmFit, LinearizedData};
use glmsel::nalgebra::{DMatrix, DVector};
use glmsel::sim::{generate_dataset, Scenario};

pub const FAMILIES: [Family; 3] = [Family::Logistic, Family::Poisson, Family::Beta];

/// A fitted and linearized random instance.
pub struct Instance {
    pub family: Family,
    pub data: Dataset,
    pub fit: GlmFit,
    pub lin: LinearizedData,
}

impl Instance {
    /// Largest sum-of-squares penalty with a nonempty Lasso model.
    pub fn penalty_max(&self) -> f64 {
        2.0 * self.lin.u_mat0.tr_mul(&self.lin.z0).amax()
    }
}

/// Small random instance with two true signals. Returns `None` when the fit
/// or linearization fails (rare; callers skip such draws).
pub fn instance(family: Family, n: usize, p: usize, seed: u64) -> Option<Instance> {
    let mut s = Scenario::defaults(family);
    s.n = n;
    s.p = p;
    s.beta0 = 0.0;
    s.support = (1..=p.min(2)).collect();
    s.beta_values = [0.8, -0.6][..s.support.len()].to_vec();
    s.seed = seed;
    let data = generate_dataset(&s, 0);
    let fit = fit_mle(&data, family, &FitOptions::default()).ok()?;
    let lin = linearize(&data, family, &fit).ok()?;
    Some(Instance {
        family,
        data,
        fit,
        lin,
    })
}

// ---------------------------------------------------------------------------
// Lasso by plain coordinate descent on explicit residuals.

/// argmin (2n)⁻¹‖z − Ut‖² + λ‖t‖₁, cold-started, iterated to stationarity.
pub fn cd_lasso(u: &DMatrix<f64>, z: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let (n, p) = u.shape();
    let nl = n as f64 * lambda;
    let norms: Vec<f64> = (0..p).map(|j| u.column(j).norm_squared()).collect();
    let mut t = DVector::zeros(p);
    let scale = z.norm().max(1.0);
    for _ in 0..1_000_000 {
        let mut r = z - u * &t;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if norms[j] == 0.0 {
                continue;
            }
            let rho = u.column(j).dot(&r) + norms[j] * t[j];
            let new = soft(rho, nl) / norms[j];
            let d = new - t[j];
            if d != 0.0 {
                r.axpy(-d, &u.column(j), 1.0);
                t[j] = new;
                max_change = max_change.max(d.abs() * norms[j].sqrt());
            }
        }
        if max_change < 1e-14 * scale {
            break;
        }
    }
    t
}

pub fn soft(x: f64, k: f64) -> f64 {
    if x > k {
        x - k
    } else if x < -k {
        x + k
    } else {
        0.0
    }
}

pub fn support(t: &DVector<f64>) -> Vec<usize> {
    (0..t.len()).filter(|&j| t[j] != 0.0).collect()
}

/// Least squares through the SVD.
pub fn lstsq(u: &DMatrix<f64>, z: &DVector<f64>) -> DVector<f64> {
    u.clone()
        .svd(true, true)
        .solve(z, 1e-14)
        .expect("svd solve")
}

// ---------------------------------------------------------------------------
// Quadrature.

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) on a finite interval with relative
/// tolerance `rel`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    fn go(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= rel * v.abs() || err < 1e-300 || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        go(f, a, m, rel, depth - 1) + go(f, m, b, rel, depth - 1)
    }
    if a >= b {
        return 0.0;
    }
    go(&f, a, b, rel, 60)
}

/// P(X ≤ x | X ∈ S) for X ~ N(μ, σ²), by quadrature of the density on each
/// piece of S. Works in standardized units with the density rescaled by its
/// largest value on S, so supports far in the tail keep full precision.
pub fn truncated_cdf_quadrature(mu: f64, sd: f64, pieces: &[(f64, f64)], x: f64) -> f64 {
    let std: Vec<(f64, f64)> = pieces
        .iter()
        .map(|&(a, b)| ((a - mu) / sd, (b - mu) / sd))
        .collect();
    let d_min = std
        .iter()
        .map(|&(a, b)| {
            if a > 0.0 {
                a
            } else if b < 0.0 {
                -b
            } else {
                0.0
            }
        })
        .fold(f64::INFINITY, f64::min);
    // Beyond this radius the rescaled density is below e⁻⁸⁰.
    let r = (d_min * d_min + 160.0).sqrt();
    let g = |t: f64| (-0.5 * (t - d_min) * (t + d_min)).exp();
    let mass = |a: f64, b: f64| -> f64 {
        let (a, b) = (a.max(-r), b.min(r));
        if a >= b {
            return 0.0;
        }
        // Split at the mode so each part is smooth with its peak at an end.
        if a < 0.0 && b > 0.0 {
            integrate(g, a, 0.0, 1e-14) + integrate(g, 0.0, b, 1e-14)
        } else {
            integrate(g, a, b, 1e-14)
        }
    };
    let xs = (x - mu) / sd;
    let den: f64 = std.iter().map(|&(a, b)| mass(a, b)).sum();
    let num: f64 = std.iter().map(|&(a, b)| mass(a, b.min(xs))).sum();
    num / den
}

// ---------------------------------------------------------------------------
// Finite differences.

/// Five-point central difference.
pub fn derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Gradient of `f` at `x` by five-point differences in each coordinate.
pub fn gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |k, _| {
        derivative(
            |v| {
                let mut y = x.clone();
                y[k] = v;
                f(&y)
            },
            x[k],
            h,
        )
    })
}

/// Hessian of `f` at `x` by differencing the finite-difference gradient.
pub fn hessian(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let p = x.len();
    let mut out = DMatrix::zeros(p, p);
    for k in 0..p {
        let col = |v: f64| {
            let mut y = x.clone();
            y[k] = v;
            gradient(&f, &y, h)
        };
        let (a, b, c, d) = (
            col(x[k] + 2.0 * h),
            col(x[k] + h),
            col(x[k] - h),
            col(x[k] - 2.0 * h),
        );
        out.set_column(k, &((-a + b * 8.0 - c * 8.0 + d) / (12.0 * h)));
    }
    out
}

/// Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}
