//! Monte Carlo harness: scenario generation, replication and summaries.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Bernoulli, Beta, Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::naive_wald_with;
use crate::error::{Error, Result};
use crate::glm::{fit_mle, linearize, linearize_at, Dataset, Family, FitOptions, LinearizedData};
use crate::infer::{select_on, truncated_reports, InferOptions, LambdaSpec};
use crate::linalg::spd_factor;
use crate::path::bound;
use crate::report::{CoefficientReport, LambdaMode, Method};
use crate::rng::{stream_rng, Stream};
use crate::truncnorm::pivot;

/// Precision used for beta-regression scenarios unless configured.
pub const DEFAULT_BETA_PHI: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub beta0: f64,
    /// 1-based indices of the nonzero coefficients.
    pub support: Vec<usize>,
    pub beta_values: Vec<f64>,
    pub lambda_mode: LambdaMode,
    /// Penalty grid endpoints and size (sum-of-squares scale). A single
    /// fixed penalty is a grid with `lambda_lo == lambda_hi`, `lambda_count = 1`.
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub lambda_count: usize,
    pub split_frac: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Beta-regression precision used to draw responses.
    pub phi: f64,
    pub alpha: f64,
    pub methods: Vec<Method>,
    /// 1-based coefficients whose intervals are summarized.
    pub tracked: Vec<usize>,
}

/// On-disk form: every key optional except `family`; gaps are filled from
/// the family's defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    family: Option<String>,
    n: Option<usize>,
    p: Option<usize>,
    beta0: Option<f64>,
    support: Option<Vec<usize>>,
    beta_values: Option<Vec<f64>>,
    lambda_mode: Option<String>,
    lambda: Option<f64>,
    lambda_lo: Option<f64>,
    lambda_hi: Option<f64>,
    lambda_count: Option<usize>,
    split_frac: Option<f64>,
    replicates: Option<usize>,
    seed: Option<u64>,
    phi: Option<f64>,
    alpha: Option<f64>,
    methods: Option<Vec<String>>,
    tracked: Option<Vec<usize>>,
}

impl Scenario {
    /// Study defaults for `family`: n = 500, p = 20,
    /// β₀ = −2, support {1, 2, 3}, twenty log-spaced penalties.
    pub fn defaults(family: Family) -> Scenario {
        let (beta_values, lo, hi) = match family {
            Family::Logistic => (vec![2.0, 2.0, 1.0], 2.0, 12.0),
            Family::Poisson => (vec![1.0, 1.0, -1.0], 8.0, 56.0),
            Family::Beta => (vec![1.0, -0.5, 0.5], 2.0, 10.0),
        };
        Scenario {
            family,
            n: 500,
            p: 20,
            beta0: -2.0,
            support: vec![1, 2, 3],
            beta_values,
            lambda_mode: LambdaMode::Fixed,
            lambda_lo: lo,
            lambda_hi: hi,
            lambda_count: 20,
            split_frac: 0.7,
            replicates: 1000,
            seed: 1,
            phi: if family == Family::Beta {
                DEFAULT_BETA_PHI
            } else {
                1.0
            },
            alpha: 0.05,
            methods: Method::ALL.to_vec(),
            tracked: vec![1, 2, 3, 4, 5, 6],
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        let f: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let family: Family = f
            .family
            .as_deref()
            .ok_or_else(|| Error::Config("missing key 'family'".into()))?
            .parse()?;
        let mut s = Scenario::defaults(family);
        macro_rules! set {
            ($($k:ident),*) => { $( if let Some(v) = f.$k { s.$k = v; } )* };
        }
        set!(
            n,
            p,
            beta0,
            support,
            beta_values,
            lambda_lo,
            lambda_hi,
            lambda_count,
            split_frac,
            replicates,
            seed,
            phi,
            alpha,
            tracked
        );
        if let Some(m) = f.lambda_mode {
            s.lambda_mode = m.parse()?;
        }
        if let Some(l) = f.lambda {
            if f.lambda_lo.is_some() || f.lambda_hi.is_some() || f.lambda_count.is_some() {
                return Err(Error::Config(
                    "give either 'lambda' or a lambda_lo/lambda_hi/lambda_count grid".into(),
                ));
            }
            s.lambda_lo = l;
            s.lambda_hi = l;
            s.lambda_count = 1;
        }
        if let Some(ms) = f.methods {
            s.methods = ms.iter().map(|m| m.parse()).collect::<Result<_>>()?;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 4 || self.p == 0 {
            return bad(format!(
                "need n ≥ 4 and p ≥ 1, got n = {}, p = {}",
                self.n, self.p
            ));
        }
        if self.support.len() != self.beta_values.len() {
            return bad("support and beta_values must have the same length".into());
        }
        if self
            .support
            .iter()
            .chain(&self.tracked)
            .any(|&j| j == 0 || j > self.p)
        {
            return bad(format!("coefficient indices must lie in 1..={}", self.p));
        }
        if self.replicates == 0 {
            return bad("replicates must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return bad(format!("alpha must be in (0, 0.5], got {}", self.alpha));
        }
        if !(self.phi > 0.0) || !self.phi.is_finite() {
            return bad(format!("phi must be positive, got {}", self.phi));
        }
        if !(self.split_frac > 0.0 && self.split_frac < 1.0) {
            return bad(format!(
                "split_frac must be in (0, 1), got {}",
                self.split_frac
            ));
        }
        if self.methods.is_empty() {
            return bad("no methods requested".into());
        }
        self.lambdas().map(|_| ())
    }

    pub fn lambdas(&self) -> Result<Vec<f64>> {
        if self.lambda_count == 1 && self.lambda_lo == self.lambda_hi {
            if !(self.lambda_lo > 0.0) {
                return Err(Error::Config(format!(
                    "lambda must be positive, got {}",
                    self.lambda_lo
                )));
            }
            return Ok(vec![self.lambda_lo]);
        }
        lambda_grid(self.lambda_lo, self.lambda_hi, self.lambda_count)
    }

    pub fn beta_true(&self) -> DVector<f64> {
        let mut b = DVector::zeros(self.p);
        for (&j, &v) in self.support.iter().zip(&self.beta_values) {
            b[j - 1] = v;
        }
        b
    }
}

/// `k` log-spaced values from `lo` to `hi` inclusive.
pub fn lambda_grid(lo: f64, hi: f64, k: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && lo < hi && hi.is_finite()) || k < 2 {
        return Err(Error::Config(format!(
            "need 0 < lo < hi and k ≥ 2, got ({lo}, {hi}, {k})"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..k)
        .map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp())
        .collect();
    g[0] = lo;
    g[k - 1] = hi;
    Ok(g)
}

/// Draws replicate `rep`: standard normal covariates and responses from the
/// scenario's model.
pub fn generate_dataset(s: &Scenario, rep: u64) -> Dataset {
    let mut xr = stream_rng(s.seed, rep, Stream::Covariates);
    let mut x = DMatrix::zeros(s.n, s.p);
    for i in 0..s.n {
        for j in 0..s.p {
            x[(i, j)] = xr.sample(StandardNormal);
        }
    }
    let beta = s.beta_true();
    let eta = (&x * &beta).add_scalar(s.beta0);
    let mut yr = stream_rng(s.seed, rep, Stream::Response);
    let y = DVector::from_iterator(
        s.n,
        eta.iter()
            .map(|&e| draw_response(s.family, e, s.phi, &mut yr)),
    );
    Dataset::new(x, y).expect("generated data are finite")
}

fn draw_response<R: Rng>(family: Family, eta: f64, phi: f64, rng: &mut R) -> f64 {
    match family {
        Family::Logistic => {
            let p = 1.0 / (1.0 + (-eta).exp());
            f64::from(u8::from(
                Bernoulli::new(p).expect("valid probability").sample(rng),
            ))
        }
        Family::Poisson => Poisson::new(eta.exp()).expect("positive rate").sample(rng),
        Family::Beta => {
            let mu = 1.0 / (1.0 + (-eta).exp());
            let y: f64 = Beta::new(mu * phi, (1.0 - mu) * phi)
                .expect("positive shapes")
                .sample(rng);
            // Guard against draws rounding onto the boundary.
            y.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
        }
    }
}

/// Fraction of truly-null selected coefficients whose CI excludes zero;
/// zero when the model holds no nulls. Entries without a CI are skipped.
pub fn type_i_error(entries: &[CoefficientReport], beta_true: &DVector<f64>) -> f64 {
    let nulls: Vec<bool> = entries
        .iter()
        .filter(|c| beta_true[c.index - 1] == 0.0)
        .filter_map(|c| c.excludes(0.0))
        .collect();
    if nulls.is_empty() {
        return 0.0;
    }
    nulls.iter().filter(|&&e| e).count() as f64 / nulls.len() as f64
}

/// Projected target (U_Mᵀ U_M)⁻¹ U_Mᵀ U β on idealized pseudo-data.
pub fn projected_target(
    ideal: &LinearizedData,
    model: &[usize],
    beta_true: &DVector<f64>,
) -> Result<DVector<f64>> {
    let um = ideal.u_mat0.select_columns(model.iter());
    let chol = spd_factor(um.tr_mul(&um))
        .ok_or_else(|| Error::RankDeficient(format!("model {model:?}")))?;
    Ok(chol.solve(&um.tr_mul(&(&ideal.u_mat0 * beta_true))))
}

#[derive(Debug, Clone, PartialEq)]
struct TrackedCi {
    lo: f64,
    hi: f64,
    covered: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct MethodOutcome {
    type1: f64,
    failures: usize,
    tracked: Vec<Option<TrackedCi>>,
    pivots: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
struct LambdaOutcome {
    penalty: f64,
    model_size: usize,
    methods: Vec<MethodOutcome>,
}

type RepOutcome = std::result::Result<Vec<LambdaOutcome>, String>;

fn run_replicate(s: &Scenario, rep: u64, lambdas: &[f64]) -> RepOutcome {
    let data = generate_dataset(s, rep);
    let beta_true = s.beta_true();
    let fit_opts = FitOptions::default();
    let fit = fit_mle(&data, s.family, &fit_opts).map_err(|e| e.to_string())?;
    let lin = linearize(&data, s.family, &fit).map_err(|e| e.to_string())?;
    let ideal =
        linearize_at(&data, s.family, s.beta0, &beta_true, s.phi).map_err(|e| e.to_string())?;
    let specs: Vec<LambdaSpec> = match s.lambda_mode {
        LambdaMode::Fixed => lambdas.iter().map(|&l| LambdaSpec::Fixed(l)).collect(),
        LambdaMode::DataDriven => vec![LambdaSpec::DataDriven {
            grid: lambdas.to_vec(),
            split_frac: s.split_frac,
        }],
    };
    let true_support: Vec<usize> = s.support.iter().map(|j| j - 1).collect();
    let mut naive_cache: HashMap<Vec<usize>, Vec<CoefficientReport>> = HashMap::new();
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        let opts = InferOptions {
            alpha: s.alpha,
            lambda: spec,
            methods: s.methods.clone(),
            seed: s.seed,
            rep,
            fit: fit_opts,
        };
        let sel =
            select_on(data.n(), fit.clone(), lin.clone(), &opts).map_err(|e| e.to_string())?;
        let model = sel.model().to_vec();
        let mut entries = truncated_reports(&sel, &data.names, s.alpha, &s.methods);
        if s.methods.contains(&Method::Naive) && !model.is_empty() {
            let naive = naive_cache.entry(model.clone()).or_insert_with(|| {
                naive_wald_with(&data, s.family, &model, s.alpha, &fit_opts).unwrap_or_else(|e| {
                    model
                        .iter()
                        .map(|&j| {
                            CoefficientReport::failed(
                                j,
                                &data.names[j],
                                Method::Naive,
                                f64::NAN,
                                &e,
                            )
                        })
                        .collect()
                })
            });
            entries.extend(naive.iter().cloned());
        }
        let targets: Option<DVector<f64>> = if model.is_empty() {
            None
        } else if true_support.iter().all(|j| model.contains(j)) {
            Some(DVector::from_iterator(
                model.len(),
                model.iter().map(|&j| beta_true[j]),
            ))
        } else {
            projected_target(&ideal, &model, &beta_true).ok()
        };
        let methods = s
            .methods
            .iter()
            .map(|&m| {
                let mine: Vec<CoefficientReport> =
                    entries.iter().filter(|c| c.method == m).cloned().collect();
                let failures = mine.iter().filter(|c| c.error.is_some()).count();
                let target_of = |c: &CoefficientReport| {
                    let k = model.iter().position(|&j| j == c.index - 1)?;
                    targets.as_ref().map(|t| t[k])
                };
                let tracked = s
                    .tracked
                    .iter()
                    .map(|&j| {
                        let c = mine.iter().find(|c| c.index == j)?;
                        let (lo, hi) = (c.ci_lo?, c.ci_hi?);
                        let t = target_of(c)?;
                        Some(TrackedCi {
                            lo,
                            hi,
                            covered: lo <= t && t <= hi,
                        })
                    })
                    .collect();
                let pivots = if m == Method::Naive {
                    Vec::new()
                } else {
                    mine.iter()
                        .filter(|c| c.error.is_none())
                        .filter_map(|c| {
                            let t = target_of(c)?;
                            let sd = c.sd?;
                            pivot(c.estimate, t, sd * sd, &c.support)
                                .ok()
                                .map(|v| (c.index, v))
                        })
                        .collect()
                };
                MethodOutcome {
                    type1: type_i_error(&mine, &beta_true),
                    failures,
                    tracked,
                    pivots,
                }
            })
            .collect();
        out.push(LambdaOutcome {
            penalty: sel.penalty,
            model_size: model.len(),
            methods,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub lambda_index: usize,
    /// Penalty (data-driven: average selected penalty).
    pub lambda: f64,
    pub method: Method,
    /// Replicates that completed.
    pub replicates: usize,
    pub avg_type1: f64,
    pub avg_model_size: f64,
    pub empty_models: usize,
    /// Coefficients whose inference failed.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub lambda_index: usize,
    pub lambda: f64,
    pub method: Method,
    /// 1-based coefficient index.
    pub index: usize,
    pub true_value: f64,
    /// Replicates contributing an interval.
    pub selected: usize,
    /// Replicates where the coefficient was not selected (or the model was empty).
    pub excluded: usize,
    #[serde(with = "bound")]
    pub avg_lo: f64,
    #[serde(with = "bound")]
    pub avg_hi: f64,
    #[serde(with = "bound")]
    pub avg_width: f64,
    #[serde(with = "bound")]
    pub median_width: f64,
    /// Intervals with an infinite endpoint.
    pub infinite: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PivotRecord {
    pub replicate: u64,
    pub lambda_index: usize,
    pub method: Method,
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub scenario: Scenario,
    pub rows: Vec<SummaryRow>,
    pub coefficients: Vec<CoefficientSummary>,
    pub pivots: Vec<PivotRecord>,
    /// Replicates that failed before inference, with their messages.
    pub replicate_errors: Vec<(u64, String)>,
}

impl SummaryTable {
    pub fn row(&self, lambda_index: usize, method: Method) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.lambda_index == lambda_index && r.method == method)
    }

    pub fn coefficient(
        &self,
        lambda_index: usize,
        method: Method,
        index: usize,
    ) -> Option<&CoefficientSummary> {
        self.coefficients
            .iter()
            .find(|c| c.lambda_index == lambda_index && c.method == method && c.index == index)
    }

    pub fn pivots_for(&self, method: Method) -> impl Iterator<Item = &PivotRecord> {
        self.pivots.iter().filter(move |p| p.method == method)
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, k) = v.fold((0.0, 0usize), |(s, k), x| (s + x, k + 1));
    if k == 0 {
        f64::NAN
    } else {
        s / k as f64
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Runs all replicates (in parallel) and aggregates in replicate order.
pub fn run_replications(s: &Scenario, methods: &[Method]) -> Result<SummaryTable> {
    let mut s = s.clone();
    s.methods = methods.to_vec();
    s.validate()?;
    let lambdas = s.lambdas()?;
    let outcomes: Vec<RepOutcome> = (0..s.replicates as u64)
        .into_par_iter()
        .map(|r| run_replicate(&s, r, &lambdas))
        .collect();
    Ok(aggregate(&s, &lambdas, &outcomes))
}

fn aggregate(s: &Scenario, lambdas: &[f64], outcomes: &[RepOutcome]) -> SummaryTable {
    let n_lambda = match s.lambda_mode {
        LambdaMode::Fixed => lambdas.len(),
        LambdaMode::DataDriven => 1,
    };
    let ok: Vec<(u64, &Vec<LambdaOutcome>)> = outcomes
        .iter()
        .enumerate()
        .filter_map(|(r, o)| o.as_ref().ok().map(|v| (r as u64, v)))
        .collect();
    let replicate_errors = outcomes
        .iter()
        .enumerate()
        .filter_map(|(r, o)| o.as_ref().err().map(|e| (r as u64, e.clone())))
        .collect();
    let beta_true = s.beta_true();
    let mut rows = Vec::new();
    let mut coefficients = Vec::new();
    let mut pivots = Vec::new();
    for li in 0..n_lambda {
        let lambda = match s.lambda_mode {
            LambdaMode::Fixed => lambdas[li],
            LambdaMode::DataDriven => mean(ok.iter().map(|(_, v)| v[li].penalty)),
        };
        for (mi, &method) in s.methods.iter().enumerate() {
            let per: Vec<(u64, &LambdaOutcome, &MethodOutcome)> = ok
                .iter()
                .map(|(r, v)| (*r, &v[li], &v[li].methods[mi]))
                .collect();
            rows.push(SummaryRow {
                lambda_index: li,
                lambda,
                method,
                replicates: per.len(),
                avg_type1: mean(per.iter().map(|(_, _, m)| m.type1)),
                avg_model_size: mean(per.iter().map(|(_, l, _)| l.model_size as f64)),
                empty_models: per.iter().filter(|(_, l, _)| l.model_size == 0).count(),
                failures: per.iter().map(|(_, _, m)| m.failures).sum(),
            });
            for (ti, &j) in s.tracked.iter().enumerate() {
                let cis: Vec<&TrackedCi> = per
                    .iter()
                    .filter_map(|(_, _, m)| m.tracked[ti].as_ref())
                    .collect();
                let widths: Vec<f64> = cis.iter().map(|c| c.hi - c.lo).collect();
                coefficients.push(CoefficientSummary {
                    lambda_index: li,
                    lambda,
                    method,
                    index: j,
                    true_value: beta_true[j - 1],
                    selected: cis.len(),
                    excluded: per.len() - cis.len(),
                    avg_lo: mean(cis.iter().map(|c| c.lo)),
                    avg_hi: mean(cis.iter().map(|c| c.hi)),
                    avg_width: mean(widths.iter().copied()),
                    median_width: median(widths.clone()),
                    infinite: widths.iter().filter(|w| w.is_infinite()).count(),
                    coverage: mean(cis.iter().map(|c| f64::from(u8::from(c.covered)))),
                });
            }
            for (r, _, m) in &per {
                pivots.extend(m.pivots.iter().map(|&(index, value)| PivotRecord {
                    replicate: *r,
                    lambda_index: li,
                    method,
                    index,
                    value,
                }));
            }
        }
    }
    SummaryTable {
        scenario: s.clone(),
        rows,
        coefficients,
        pivots,
        replicate_errors,
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        bound::to_text(v)
    }
}

/// Long-format table: one row per (penalty, method, tracked coefficient).
pub fn write_summary_csv<W: Write>(table: &SummaryTable, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    wr.write_record([
        "lambda_index",
        "lambda",
        "method",
        "coefficient",
        "true_value",
        "selected",
        "excluded",
        "avg_lo",
        "avg_hi",
        "avg_width",
        "median_width",
        "infinite",
        "coverage",
    ])
    .map_err(io)?;
    for c in &table.coefficients {
        wr.write_record([
            c.lambda_index.to_string(),
            fmt_num(c.lambda),
            c.method.to_string(),
            format!("beta{}", c.index),
            fmt_num(c.true_value),
            c.selected.to_string(),
            c.excluded.to_string(),
            fmt_num(c.avg_lo),
            fmt_num(c.avg_hi),
            fmt_num(c.avg_width),
            fmt_num(c.median_width),
            c.infinite.to_string(),
            fmt_num(c.coverage),
        ])
        .map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}

/// Per-penalty curves: Type I error and model size, plus coverage and width
/// columns for each tracked coefficient.
pub fn write_curves_csv<W: Write>(table: &SummaryTable, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut header: Vec<String> = [
        "lambda",
        "method",
        "replicates",
        "avg_type1",
        "avg_model_size",
        "empty_models",
        "failures",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for j in &table.scenario.tracked {
        header.push(format!("coverage_beta{j}"));
        header.push(format!("width_beta{j}"));
    }
    wr.write_record(&header).map_err(io)?;
    for r in &table.rows {
        let mut rec = vec![
            fmt_num(r.lambda),
            r.method.to_string(),
            r.replicates.to_string(),
            fmt_num(r.avg_type1),
            fmt_num(r.avg_model_size),
            r.empty_models.to_string(),
            r.failures.to_string(),
        ];
        for &j in &table.scenario.tracked {
            let c = table
                .coefficient(r.lambda_index, r.method, j)
                .expect("tracked summary present");
            rec.push(fmt_num(c.coverage));
            rec.push(fmt_num(c.avg_width));
        }
        wr.write_record(&rec).map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}

/// One-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov tail probability with Stephens' finite-n correction.
fn kolmogorov_sf(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lam = (sn + 0.12 + 0.11 / sn) * d;
    if lam < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lam * lam).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> KsTest {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
        })
        .fold(0.0, f64::max);
    KsTest {
        statistic: d,
        p_value: kolmogorov_sf(d, n),
    }
}

pub fn ks_uniform(sample: &[f64]) -> KsTest {
    ks_test(sample, |x| x.clamp(0.0, 1.0))
}

pub fn ks_normal(sample: &[f64], mean: f64, sd: f64) -> KsTest {
    use statrs::distribution::{ContinuousCDF, Normal};
    let nd = Normal::new(mean, sd).expect("valid normal");
    ks_test(sample, |x| nd.cdf(x))
}
