//! Property checks shared by the proptest suites and the acceptance runner.

use glmsel::glm::{contrast, family_eval, Family};
use glmsel::infer::{coefficient_events, initial_window, select_on, InferOptions, LambdaSpec};
use glmsel::lasso::{per_observation, refit_ls, solve_lasso, GramProblem};
use glmsel::nalgebra::DVector;
use glmsel::path::{parameterize, selection_event, IntervalUnion, LineProblem, MERGE_TOL};
use glmsel::truncnorm::{confidence_interval, TruncatedGaussian};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use super::{cd_lasso, instance, Instance, FAMILIES};

pub type Check = Result<(), TestCaseError>;

/// Raw interval endpoints, possibly unsorted and overlapping.
pub type Pieces = Vec<(f64, f64)>;

/// (family, n, p, seed) for a small random instance.
pub fn instance_params() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (0usize..3, 20usize..=60, 1usize..=8, any::<u64>())
}

/// Instance parameters plus a penalty fraction in (0, 1) of the largest
/// useful penalty and a coefficient selector.
pub fn selection_params() -> impl Strategy<Value = ((usize, usize, usize, u64), f64, usize)> {
    (instance_params(), 0.1f64..0.8, any::<usize>())
}

pub fn build(params: (usize, usize, usize, u64)) -> Result<Instance, TestCaseError> {
    let (f, n, p, seed) = params;
    instance(FAMILIES[f], n, p, seed).ok_or_else(|| TestCaseError::reject("fit failed"))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn centering(params: (usize, usize, usize, u64)) -> Check {
    let inst = build(params)?;
    let lin = &inst.lin;
    let u0n = lin.u0.norm();
    let zt = lin.u0.dot(&lin.z0).abs();
    prop_assert!(zt <= 1e-8 * u0n * lin.z0.norm().max(1.0), "u0'z0 = {zt}");
    let col_max = (0..lin.p())
        .map(|j| lin.u_mat0.column(j).norm())
        .fold(0.0, f64::max);
    let cross = lin.u0.tr_mul(&lin.u_mat0).amax();
    prop_assert!(cross <= 1e-8 * u0n * col_max.max(1.0), "u0'U0 = {cross}");
    Ok(())
}

pub fn mle_least_squares(params: (usize, usize, usize, u64)) -> Check {
    let inst = build(params)?;
    prop_assume!(!inst.fit.ridge_used);
    let all: Vec<usize> = (0..inst.lin.p()).collect();
    let ls = refit_ls(&inst.lin, &all).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let oracle = super::lstsq(&inst.lin.u_mat0, &inst.lin.z0);
    for j in 0..all.len() {
        prop_assert!(
            close(ls[j], inst.fit.beta[j], 1e-6),
            "refit {} vs mle {}",
            ls[j],
            inst.fit.beta[j]
        );
        prop_assert!(
            close(oracle[j], inst.fit.beta[j], 1e-6),
            "svd {} vs mle {}",
            oracle[j],
            inst.fit.beta[j]
        );
    }
    Ok(())
}

pub fn kkt((params, frac, _): ((usize, usize, usize, u64), f64, usize)) -> Check {
    let inst = build(params)?;
    let lin = &inst.lin;
    let n = lin.n();
    let lambda = per_observation(frac * inst.penalty_max(), n);
    let sol = solve_lasso(lin, lambda).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let nl = n as f64 * lambda;
    let corr = lin
        .u_mat0
        .tr_mul(&(&lin.z0 - &lin.u_mat0 * &sol.beta_lambda));
    for j in 0..lin.p() {
        match sol.active.iter().position(|&a| a == j) {
            Some(k) => {
                let s = f64::from(sol.signs[k]);
                prop_assert_eq!(s, sol.beta_lambda[j].signum());
                prop_assert!(
                    close(corr[j], s * nl, 1e-6 * nl),
                    "active {j}: corr {} vs {}",
                    corr[j],
                    s * nl
                );
            }
            None => {
                prop_assert_eq!(sol.beta_lambda[j], 0.0);
                prop_assert!(
                    corr[j].abs() <= nl * (1.0 + 1e-6),
                    "inactive {j}: |corr| {} > {nl}",
                    corr[j].abs()
                );
            }
        }
    }
    let g = GramProblem::new(&lin.u_mat0, &lin.z0);
    let gap_scale = (g.yty / (2.0 * n as f64)).max(1.0);
    prop_assert!(g.duality_gap(&sol.beta_lambda, lambda) <= 1e-10 * gap_scale);
    // The minimizer beats zero and the embedded least-squares refit.
    let obj = g.objective(&sol.beta_lambda, lambda);
    prop_assert!(obj <= g.objective(&DVector::zeros(lin.p()), lambda) + 1e-12 * gap_scale);
    if let Ok(b) = refit_ls(lin, &sol.active) {
        let mut full = DVector::zeros(lin.p());
        for (k, &j) in sol.active.iter().enumerate() {
            full[j] = b[k];
        }
        prop_assert!(obj <= g.objective(&full, lambda) + 1e-12 * gap_scale);
    }
    Ok(())
}

/// Path for one selected coefficient over the standard initial window.
pub struct Line {
    pub problem: LineProblem,
    pub lambda: f64,
    pub tau_obs: f64,
    pub sd: f64,
    pub window: (f64, f64),
    pub model: Vec<usize>,
    pub par: glmsel::path::TauParameterization,
}

pub fn line(inst: &Instance, frac: f64, pick: usize) -> Result<Line, TestCaseError> {
    let lin = &inst.lin;
    let lambda = per_observation(frac * inst.penalty_max(), lin.n());
    let sol = solve_lasso(lin, lambda).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assume!(!sol.active.is_empty());
    let k = pick % sol.active.len();
    let c =
        contrast(&lin.u_mat0, &sol.active, k).map_err(|_| TestCaseError::reject("collinear"))?;
    let par = parameterize(lin, &c).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let sd = (lin.noise_scale * c.norm_squared()).sqrt();
    Ok(Line {
        problem: LineProblem::new(&lin.u_mat0, &par.q, &par.dir),
        lambda,
        tau_obs: par.tau_obs,
        sd,
        window: initial_window(par.tau_obs, sd),
        model: sol.active,
        par,
    })
}

pub fn path_continuity((params, frac, pick): ((usize, usize, usize, u64), f64, usize)) -> Check {
    let inst = build(params)?;
    let l = line(&inst, frac, pick)?;
    let p = inst.lin.p();
    let path = l
        .problem
        .path(l.lambda, l.tau_obs, l.window)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    let segs = &path.segments;
    prop_assert_eq!(segs.first().unwrap().lo, l.window.0);
    prop_assert_eq!(segs.last().unwrap().hi, l.window.1);
    for w in segs.windows(2) {
        prop_assert_eq!(w[0].hi, w[1].lo);
        let t = w[0].hi;
        let (a, b) = (w[0].beta_at(t, p), w[1].beta_at(t, p));
        let jump = (&a - &b).amax();
        prop_assert!(jump <= 1e-8 * a.amax().max(1.0), "jump {jump} at τ = {t}");
    }
    // The segment at the observed point reproduces the observed model.
    let at_obs = segs
        .iter()
        .find(|s| s.lo <= l.tau_obs && l.tau_obs <= s.hi)
        .unwrap();
    prop_assert_eq!(&at_obs.active, &l.model);
    Ok(())
}

/// At interior probes of each segment a fresh solve reproduces the affine
/// formula, and the model events of all labels tile the window.
pub fn segments_match_fresh_solves(
    (params, frac, pick): ((usize, usize, usize, u64), f64, usize),
) -> Check {
    let inst = build(params)?;
    let l = line(&inst, frac, pick)?;
    let p = inst.lin.p();
    let path = l
        .problem
        .path(l.lambda, l.tau_obs, l.window)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    for s in &path.segments {
        for i in 1..=5 {
            let t = s.lo + (s.hi - s.lo) * i as f64 / 6.0;
            let fresh = cd_lasso(&inst.lin.u_mat0, &l.par.z_at(t), l.lambda);
            let affine = s.beta_at(t, p);
            let err = (&fresh - &affine).amax();
            prop_assert!(
                err <= 1e-6 * fresh.amax().max(1.0),
                "probe τ = {t}: error {err}"
            );
        }
    }
    let mut labels: Vec<Vec<usize>> = path.segments.iter().map(|s| s.active.clone()).collect();
    labels.sort();
    labels.dedup();
    let events: Vec<IntervalUnion> = labels
        .iter()
        .map(|m| selection_event(&path.segments, m))
        .collect();
    let total: f64 = events.iter().map(IntervalUnion::measure).sum();
    let width = l.window.1 - l.window.0;
    prop_assert!(
        close(total, width, 1e-9 * width),
        "labels cover {total} of {width}"
    );
    for (i, a) in events.iter().enumerate() {
        for b in &events[i + 1..] {
            prop_assert!(a.intersect(b).measure() <= 1e-9 * width);
        }
    }
    prop_assert!(selection_event(&path.segments, &l.model).contains(l.tau_obs));
    Ok(())
}

pub fn tau_reconstruction((params, frac, pick): ((usize, usize, usize, u64), f64, usize)) -> Check {
    let inst = build(params)?;
    let l = line(&inst, frac, pick)?;
    let z0 = &inst.lin.z0;
    prop_assert!((l.par.z_at(l.tau_obs) - z0).norm() <= 1e-8 * z0.norm());
    prop_assert!(l.par.c.dot(&l.par.q).abs() <= 1e-8 * l.par.c.norm() * z0.norm());
    for t in [-3.0, 0.5, 17.0] {
        prop_assert!(close(
            l.par.c.dot(&l.par.z_at(t)),
            t,
            1e-9 * (1.0 + t.abs()) * z0.norm().max(1.0)
        ));
    }
    Ok(())
}

/// The sign-conditioned interval sits inside the model event and both hold
/// the observed statistic.
pub fn refinement((params, frac, pick): ((usize, usize, usize, u64), f64, usize)) -> Check {
    let inst = build(params)?;
    let opts = InferOptions {
        lambda: LambdaSpec::Fixed(frac * inst.penalty_max()),
        ..InferOptions::default()
    };
    let sel = select_on(inst.data.n(), inst.fit.clone(), inst.lin.clone(), &opts)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assume!(!sel.model().is_empty());
    let k = pick % sel.model().len();
    let ev = coefficient_events(&sel, k).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let tau = ev.par.tau_obs;
    let tol = 1e-6 * ev.sd;
    let near = |u: &IntervalUnion| {
        u.intervals()
            .iter()
            .any(|&(a, b)| a - tol <= tau && tau <= b + tol)
    };
    prop_assert!(near(&ev.ppl), "ppl support misses the statistic");
    prop_assert!(
        near(&ev.polyhedral),
        "polyhedral support misses the statistic"
    );
    for &(a, b) in ev.polyhedral.intervals() {
        let inside = ev
            .ppl
            .intervals()
            .iter()
            .any(|&(c, d)| c <= a + tol && b - tol <= d);
        prop_assert!(inside, "[{a}, {b}] not inside {}", ev.ppl);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Interval unions.

fn piece() -> impl Strategy<Value = (f64, f64)> {
    prop_oneof![
        8 => (-10.0f64..10.0, 0.01f64..5.0).prop_map(|(a, w)| (a, a + w)),
        1 => (-10.0f64..10.0).prop_map(|b| (f64::NEG_INFINITY, b)),
        1 => (-10.0f64..10.0).prop_map(|a| (a, f64::INFINITY)),
    ]
}

pub fn union_pair() -> impl Strategy<Value = (Pieces, Pieces)> {
    (
        prop::collection::vec(piece(), 0..5),
        prop::collection::vec(piece(), 0..5),
    )
}

fn in_pieces(pieces: &[(f64, f64)], x: f64) -> bool {
    pieces.iter().any(|&(a, b)| a <= x && x <= b)
}

fn near_endpoint(pieces: &[(f64, f64)], x: f64) -> bool {
    pieces
        .iter()
        .any(|&(a, b)| (x - a).abs() < 1e-7 || (x - b).abs() < 1e-7)
}

/// Canonical form, membership, intersection, union and measure against a
/// dense grid on [−20, 20].
pub fn interval_algebra((pa, pb): (Pieces, Pieces)) -> Check {
    let a = IntervalUnion::from_intervals(pa.clone());
    let b = IntervalUnion::from_intervals(pb.clone());
    for u in [&a, &b] {
        for w in u.intervals().windows(2) {
            prop_assert!(w[0].1 + MERGE_TOL < w[1].0, "not canonical: {u}");
        }
        prop_assert!(u.intervals().iter().all(|&(lo, hi)| lo < hi));
    }
    let inter = a.intersect(&b);
    let uni = a.union(&b);
    let steps = 40_000;
    let h = 40.0 / steps as f64;
    let (mut ma, mut mi, mut mu) = (0.0, 0.0, 0.0);
    for i in 0..steps {
        let x = -20.0 + (i as f64 + 0.5) * h;
        let (ia, ib) = (in_pieces(&pa, x), in_pieces(&pb, x));
        ma += h * f64::from(u8::from(ia));
        mi += h * f64::from(u8::from(ia && ib));
        mu += h * f64::from(u8::from(ia || ib));
        if near_endpoint(&pa, x) || near_endpoint(&pb, x) {
            continue;
        }
        prop_assert_eq!(a.contains(x), ia, "a at {}", x);
        prop_assert_eq!(inter.contains(x), ia && ib, "a ∩ b at {}", x);
        prop_assert_eq!(uni.contains(x), ia || ib, "a ∪ b at {}", x);
    }
    let clipped = |u: &IntervalUnion| u.intersect(&IntervalUnion::interval(-20.0, 20.0)).measure();
    // Each endpoint costs the midpoint rule at most one step.
    let tol = 2.0 * h * (pa.len() + pb.len()) as f64 + 1e-9;
    for (got, grid) in [
        (clipped(&a), ma),
        (clipped(&inter), mi),
        (clipped(&uni), mu),
    ] {
        prop_assert!(close(got, grid, tol), "measure {got} vs grid {grid}");
    }
    let unbounded = pa
        .iter()
        .any(|&(lo, hi)| lo.is_infinite() || hi.is_infinite());
    prop_assert_eq!(a.measure().is_infinite(), unbounded);
    prop_assert_eq!(a.hull().is_none(), a.is_empty());
    Ok(())
}

// ---------------------------------------------------------------------------
// Truncated Gaussian inference.

/// (support pieces, statistic position in [0, 1] of a chosen piece, variance).
pub fn ci_case() -> impl Strategy<Value = (Vec<(f64, f64)>, usize, f64, f64)> {
    (
        prop::collection::vec(
            (-6.0f64..6.0, 0.05f64..3.0).prop_map(|(a, w)| (a, a + w)),
            1..4,
        ),
        any::<usize>(),
        0.0f64..1.0,
        0.1f64..4.0,
    )
}

/// estimate ∈ CI ⟺ F(stat; μ = stat) ∈ [α/2, 1 − α/2], and F is decreasing
/// in μ.
pub fn ci_containment((pieces, which, pos, var): (Vec<(f64, f64)>, usize, f64, f64)) -> Check {
    let support = IntervalUnion::from_intervals(pieces);
    let (a, b) = support.intervals()[which % support.len()];
    let stat = a + pos * (b - a);
    prop_assume!(support
        .intervals()
        .iter()
        .all(|&(lo, hi)| (stat - lo).abs() > 1e-6 && (stat - hi).abs() > 1e-6));
    let alpha = 0.05;
    let ci = confidence_interval(stat, var, &support, alpha)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    let f = TruncatedGaussian::new(stat, var, support.clone())
        .unwrap()
        .cdf(stat)
        .unwrap();
    prop_assume!((f - alpha / 2.0).abs() > 1e-6 && (f - 1.0 + alpha / 2.0).abs() > 1e-6);
    let contains = ci.lo <= stat && stat <= ci.hi;
    prop_assert_eq!(
        contains,
        (alpha / 2.0..=1.0 - alpha / 2.0).contains(&f),
        "F = {}, CI = [{}, {}]",
        f,
        ci.lo,
        ci.hi
    );
    prop_assert!(ci.lo <= ci.hi);
    let mut prev = 1.0;
    for mu in [-8.0, -2.0, 0.0, 1.0, 5.0] {
        let fm = TruncatedGaussian::new(stat + mu, var, support.clone())
            .unwrap()
            .cdf(stat)
            .unwrap();
        prop_assert!(fm <= prev + 1e-12);
        prev = fm;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Cumulant functions.

pub fn cumulant_derivatives((f, eta): (usize, f64)) -> Check {
    let family = [Family::Logistic, Family::Poisson][f % 2];
    let c = family_eval(family, eta, 1.0).unwrap();
    prop_assert!(c.b2 > 0.0);
    let h = 1e-5;
    let central = |g: &dyn Fn(f64) -> f64| (g(eta + h) - g(eta - h)) / (2.0 * h);
    let db = central(&|e| family_eval(family, e, 1.0).unwrap().b);
    let db1 = central(&|e| family_eval(family, e, 1.0).unwrap().b1);
    prop_assert!(close(db, c.b1, 1e-6 * c.b1), "b' {db} vs {}", c.b1);
    prop_assert!(close(db1, c.b2, 1e-6 * c.b2), "b'' {db1} vs {}", c.b2);
    Ok(())
}

/// Runs a check over `cases` generated inputs with a fixed seed.
pub fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    check: impl Fn(S::Value) -> Check,
) -> Result<(), String> {
    let config = Config {
        cases,
        max_global_rejects: 10 * cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(
        config,
        proptest::test_runner::TestRng::deterministic_rng(config_algorithm()),
    );
    runner.run(&strategy, check).map_err(|e| e.to_string())
}

fn config_algorithm() -> proptest::test_runner::RngAlgorithm {
    proptest::test_runner::RngAlgorithm::ChaCha
}
