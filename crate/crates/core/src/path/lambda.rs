//! Penalty selection on a fixed train/validation split, and the set of τ on
//! which that selection is reproduced.
//!
//! Penalty levels here are on the sum-of-squares scale: level `pen` on a
//! problem with m rows is the per-observation λ = pen/m of [`crate::lasso`],
//! so the same grid applies to the training rows and to the full data.

use nalgebra::DVector;
use rand::seq::SliceRandom;

use super::{IntervalUnion, LineProblem, TauParameterization};
use crate::error::{Error, Result};
use crate::glm::LinearizedData;
use crate::lasso::{per_observation, solve_gram, GramProblem};
use crate::rng::{stream_rng, Stream};

/// Fixed partition of the rows into training and validation sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

impl Split {
    /// Seeded random partition with `round(frac·n)` training rows (both parts
    /// nonempty). Row indices within each part are increasing.
    pub fn seeded(n: usize, frac: f64, seed: u64, rep: u64) -> Result<Split> {
        if !(frac > 0.0 && frac < 1.0) {
            return Err(Error::Config(format!(
                "split fraction must be in (0, 1), got {frac}"
            )));
        }
        if n < 2 {
            return Err(Error::Data("need at least two rows to split".into()));
        }
        let n_train = ((frac * n as f64).round() as usize).clamp(1, n - 1);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut stream_rng(seed, rep, Stream::Split));
        let mut train = perm[..n_train].to_vec();
        let mut val = perm[n_train..].to_vec();
        train.sort_unstable();
        val.sort_unstable();
        Ok(Split { train, val })
    }

    fn check(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.val) {
            if i >= n || seen[i] {
                return Err(Error::InvalidArgument(
                    "split must be a disjoint partition of the rows".into(),
                ));
            }
            seen[i] = true;
        }
        if self.train.is_empty() || self.val.is_empty() || seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument(
                "split must cover all rows with both parts nonempty".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaChoice {
    /// Position of the winner in the ascending grid.
    pub index: usize,
    pub penalty: f64,
    pub validation_errors: Vec<f64>,
}

fn sorted_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() || grid.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
        return Err(Error::InvalidArgument(
            "penalty grid must be nonempty and positive".into(),
        ));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    Ok(g)
}

/// Chooses the penalty minimizing validation error of the training-row Lasso
/// on the observed pseudo-data. Ties go to the smaller penalty.
pub fn select_lambda(lin: &LinearizedData, split: &Split, grid: &[f64]) -> Result<LambdaChoice> {
    split.check(lin.n())?;
    let grid = sorted_grid(grid)?;
    let u_tr = lin.u_mat0.select_rows(split.train.iter());
    let z_tr = lin.z0.select_rows(split.train.iter());
    let u_val = lin.u_mat0.select_rows(split.val.iter());
    let z_val = lin.z0.select_rows(split.val.iter());
    let problem = GramProblem::new(&u_tr, &z_tr);
    let mut errors = Vec::with_capacity(grid.len());
    let mut warm: Option<DVector<f64>> = None;
    for &pen in grid.iter().rev() {
        let sol = solve_gram(
            &problem,
            per_observation(pen, split.train.len()),
            warm.as_ref(),
        )?;
        errors.push((&z_val - &u_val * &sol.beta_lambda).norm_squared());
        warm = Some(sol.beta_lambda);
    }
    errors.reverse();
    let mut best = 0;
    for (k, &e) in errors.iter().enumerate() {
        if e < errors[best] {
            best = k;
        }
    }
    Ok(LambdaChoice {
        index: best,
        penalty: grid[best],
        validation_errors: errors,
    })
}

/// e(τ) = c0 + c1 τ + c2 τ² on [lo, hi].
#[derive(Debug, Clone, Copy)]
struct QuadPiece {
    lo: f64,
    hi: f64,
    c0: f64,
    c1: f64,
    c2: f64,
}

fn validation_quadratics(
    train: &LineProblem,
    u_val: &nalgebra::DMatrix<f64>,
    q_val: &DVector<f64>,
    d_val: &DVector<f64>,
    lambda: f64,
    anchor: f64,
    window: (f64, f64),
) -> Result<Vec<QuadPiece>> {
    let path = train.path(lambda, anchor, window)?;
    let p = train.p();
    Ok(path
        .segments
        .iter()
        .map(|s| {
            let mut a = DVector::zeros(p);
            let mut b = DVector::zeros(p);
            for (k, &j) in s.active.iter().enumerate() {
                a[j] = s.intercept[k];
                b[j] = s.slope[k];
            }
            let r0 = q_val - u_val * a;
            let r1 = d_val - u_val * b;
            QuadPiece {
                lo: s.lo,
                hi: s.hi,
                c0: r0.norm_squared(),
                c1: 2.0 * r0.dot(&r1),
                c2: r1.norm_squared(),
            }
        })
        .collect())
}

/// Sub-intervals of [lo, hi] where c0 + c1 τ + c2 τ² > 0.
fn positive_part(c0: f64, c1: f64, c2: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let f = |t: f64| c0 + c1 * t + c2 * t * t;
    let mut roots: Vec<f64> = Vec::new();
    if c2 == 0.0 {
        if c1 != 0.0 {
            roots.push(-c0 / c1);
        }
    } else {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc > 0.0 {
            let sq = disc.sqrt();
            let qq = -0.5 * (c1 + c1.signum() * sq);
            if qq != 0.0 {
                roots.push(qq / c2);
                roots.push(c0 / qq);
            } else {
                roots.push(sq / (2.0 * c2));
                roots.push(-sq / (2.0 * c2));
            }
        }
    }
    let mut cuts: Vec<f64> = vec![lo];
    roots.sort_by(f64::total_cmp);
    cuts.extend(roots.into_iter().filter(|r| *r > lo && *r < hi));
    cuts.push(hi);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = match (a.is_finite(), b.is_finite()) {
            (true, true) => 0.5 * (a + b),
            (false, true) => b - 1.0 - b.abs(),
            (true, false) => a + 1.0 + a.abs(),
            (false, false) => 0.0,
        };
        if f(mid) > 0.0 {
            out.push((a, b));
        }
    }
    out
}

/// Set of τ in `window` at which validation-based selection over `grid`
/// returns `chosen_penalty`, for responses z₀(τ) along the contrast of `par`.
pub fn lambda_selection_event(
    lin: &LinearizedData,
    par: &TauParameterization,
    split: &Split,
    grid: &[f64],
    chosen_penalty: f64,
    window: (f64, f64),
) -> Result<IntervalUnion> {
    split.check(lin.n())?;
    let grid = sorted_grid(grid)?;
    let star = grid
        .iter()
        .position(|&g| g == chosen_penalty)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("penalty {chosen_penalty} is not on the grid"))
        })?;
    if grid.len() == 1 {
        return Ok(IntervalUnion::from_intervals(vec![window]));
    }
    let train = LineProblem::from_rows(&lin.u_mat0, &par.q, &par.dir, &split.train);
    let u_val = lin.u_mat0.select_rows(split.val.iter());
    let q_val = par.q.select_rows(split.val.iter());
    let d_val = par.dir.select_rows(split.val.iter());

    let pieces: Vec<Vec<QuadPiece>> = grid
        .iter()
        .map(|&pen| {
            validation_quadratics(
                &train,
                &u_val,
                &q_val,
                &d_val,
                per_observation(pen, split.train.len()),
                par.tau_obs,
                window,
            )
        })
        .collect::<Result<_>>()?;

    let mut cuts: Vec<f64> = pieces
        .iter()
        .flatten()
        .flat_map(|pc| [pc.lo, pc.hi])
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut cursor = vec![0usize; grid.len()];
    let mut win = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if !(lo < hi) {
            continue;
        }
        let mid = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (false, true) => hi - 1.0,
            (true, false) => lo + 1.0,
            (false, false) => 0.0,
        };
        let quad: Vec<QuadPiece> = (0..grid.len())
            .map(|k| {
                while pieces[k][cursor[k]].hi < mid && cursor[k] + 1 < pieces[k].len() {
                    cursor[k] += 1;
                }
                pieces[k][cursor[k]]
            })
            .collect();
        let s = quad[star];
        let mut region = IntervalUnion::interval(lo, hi);
        for (k, other) in quad.iter().enumerate() {
            if k == star || region.is_empty() {
                continue;
            }
            let (d0, d1, d2) = (other.c0 - s.c0, other.c1 - s.c1, other.c2 - s.c2);
            let scale = (other.c0.abs() + s.c0.abs())
                + (other.c1.abs() + s.c1.abs()) * lo.abs().max(hi.abs()).clamp(1.0, 1e300)
                + (other.c2.abs() + s.c2.abs());
            let tie = d0.abs() + d1.abs() + d2.abs() <= 1e-13 * scale.max(f64::MIN_POSITIVE);
            if tie {
                // Exact ties go to the smaller penalty.
                if k < star {
                    region = IntervalUnion::empty();
                }
                continue;
            }
            region = region.intersect(&IntervalUnion::from_intervals(positive_part(
                d0, d1, d2, lo, hi,
            )));
        }
        win.extend_from_slice(region.intervals());
    }
    Ok(IntervalUnion::from_intervals(win))
}
