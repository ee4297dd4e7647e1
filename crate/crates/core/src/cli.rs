//! Command-line workflows: CSV ingestion, configuration and the `fit`,
//! `infer`, `simulate` and `compare` commands.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{fit_mle, linearize, Dataset, Family, FitOptions};
use crate::infer::{report_for, select_on, InferOptions, LambdaSpec};
use crate::path::bound;
use crate::report::{InferenceReport, LambdaMode, Method};
use crate::sim::{
    lambda_grid, run_replications, write_curves_csv, write_summary_csv, Scenario, SummaryTable,
};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "GLMSEL_THREADS";

/// Size of the default data-driven grid.
pub const DEFAULT_GRID_SIZE: usize = 20;
/// Smallest default grid value as a fraction of the smallest penalty giving
/// an empty model.
pub const DEFAULT_GRID_RATIO: f64 = 0.05;

/// Reads a rectangular numeric CSV with a header row. Columns named in
/// `one_hot` are categorical and expand into indicator columns for every
/// level except the first (in sorted order).
pub fn ingest_csv(
    path: &Path,
    response: &str,
    family: Family,
    one_hot: &[String],
) -> Result<Dataset> {
    let file =
        std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ingest_reader(file, response, family, one_hot)
}

pub fn ingest_reader<R: Read>(
    reader: R,
    response: &str,
    family: Family,
    one_hot: &[String],
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let data_err = |e: csv::Error| Error::Data(e.to_string());
    let header: Vec<String> = rdr
        .headers()
        .map_err(data_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let y_col = header
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Error::Config(format!("response column '{response}' not in header")))?;
    for c in one_hot {
        if !header.contains(c) {
            return Err(Error::Config(format!("one-hot column '{c}' not in header")));
        }
        if c == response {
            return Err(Error::Config(
                "the response cannot be one-hot encoded".into(),
            ));
        }
    }
    let rows: Vec<csv::StringRecord> = rdr
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(data_err)?;
    if rows.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    let cell = |i: usize, c: usize| -> Result<&str> {
        let v = rows[i].get(c).unwrap_or("");
        if v.is_empty() || v.eq_ignore_ascii_case("na") {
            return Err(Error::Data(format!(
                "missing value at row {}, column '{}'",
                i + 1,
                header[c]
            )));
        }
        Ok(v)
    };
    let numeric = |i: usize, c: usize| -> Result<f64> {
        let v = cell(i, c)?;
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| {
                Error::Data(format!(
                    "non-numeric value '{v}' at row {}, column '{}'",
                    i + 1,
                    header[c]
                ))
            })
    };
    let n = rows.len();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut names = Vec::new();
    for (c, h) in header.iter().enumerate().filter(|&(c, _)| c != y_col) {
        if one_hot.contains(h) {
            let values: Vec<&str> = (0..n).map(|i| cell(i, c)).collect::<Result<_>>()?;
            let levels: BTreeSet<&str> = values.iter().copied().collect();
            for level in levels.into_iter().skip(1) {
                columns.push(
                    values
                        .iter()
                        .map(|v| f64::from(u8::from(*v == level)))
                        .collect(),
                );
                names.push(format!("{h}={level}"));
            }
        } else {
            columns.push((0..n).map(|i| numeric(i, c)).collect::<Result<_>>()?);
            names.push(h.clone());
        }
    }
    let y = DVector::from_iterator(
        n,
        (0..n)
            .map(|i| numeric(i, y_col))
            .collect::<Result<Vec<_>>>()?,
    );
    let x = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    let data = Dataset::with_names(x, y, names)?;
    data.validate(family)?;
    Ok(data)
}

/// Settings for `infer` and `compare`. Read from a flat TOML file and then
/// overridden from the command line; the resolved values are echoed in the
/// output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferConfig {
    pub family: Option<Family>,
    pub response: Option<String>,
    #[serde(default = "default_mode")]
    pub lambda_mode: LambdaMode,
    /// Fixed penalty (sum-of-squares scale).
    pub lambda: Option<f64>,
    /// Data-driven grid as `[lo, hi, k]`; derived from the data when absent.
    pub lambda_grid: Option<(f64, f64, usize)>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_split")]
    pub split_frac: f64,
    #[serde(default)]
    pub one_hot: Vec<String>,
}

fn default_mode() -> LambdaMode {
    LambdaMode::DataDriven
}
fn default_alpha() -> f64 {
    0.05
}
fn default_methods() -> Vec<Method> {
    vec![Method::Ppl]
}
fn default_split() -> f64 {
    0.7
}

impl Default for InferConfig {
    fn default() -> Self {
        InferConfig {
            family: None,
            response: None,
            lambda_mode: default_mode(),
            lambda: None,
            lambda_grid: None,
            alpha: default_alpha(),
            seed: 0,
            methods: default_methods(),
            split_frac: default_split(),
            one_hot: Vec::new(),
        }
    }
}

impl InferConfig {
    pub fn from_toml_str(text: &str) -> Result<InferConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn from_file(path: &Path) -> Result<InferConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn family(&self) -> Result<Family> {
        self.family
            .ok_or_else(|| Error::Config("family is required".into()))
    }

    pub fn response(&self) -> Result<&str> {
        self.response
            .as_deref()
            .ok_or_else(|| Error::Config("response column is required".into()))
    }

    pub fn validate(&self) -> Result<()> {
        self.family()?;
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::Config(format!(
                "alpha must be in (0, 0.5], got {}",
                self.alpha
            )));
        }
        if !(self.split_frac > 0.0 && self.split_frac < 1.0) {
            return Err(Error::Config(format!(
                "split_frac must be in (0, 1), got {}",
                self.split_frac
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        match self.lambda_mode {
            LambdaMode::Fixed => match self.lambda {
                Some(l) if l > 0.0 && l.is_finite() => Ok(()),
                Some(l) => Err(Error::Config(format!("lambda must be positive, got {l}"))),
                None => Err(Error::Config(
                    "fixed lambda mode needs a lambda value".into(),
                )),
            },
            LambdaMode::DataDriven => match self.lambda_grid {
                Some((lo, hi, k)) => lambda_grid(lo, hi, k).map(|_| ()),
                None => Ok(()),
            },
        }
    }
}

/// Parses `lo,hi,k`.
pub fn parse_grid(s: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Error::Config(format!("expected lo,hi,k for the lambda grid, got '{s}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
    ))
}

/// Parses `ppl`, `polyhedral`, `naive`, `all`, or a comma-separated list.
pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    let mut v: Vec<Method> = s.split(',').map(str::parse).collect::<Result<_>>()?;
    v.sort();
    v.dedup();
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub intercept: f64,
    pub coefficients: Vec<NamedValue>,
    pub phi: f64,
    pub iterations: usize,
    pub ridge_penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

/// Unpenalized maximum-likelihood fit of the full model.
pub fn cmd_fit(data: &Dataset, family: Family) -> Result<FitReport> {
    let fit = fit_mle(data, family, &FitOptions::default())?;
    Ok(FitReport {
        family,
        n: data.n(),
        p: data.p(),
        intercept: fit.beta0,
        coefficients: data
            .names
            .iter()
            .zip(fit.beta.iter())
            .map(|(name, &value)| NamedValue {
                name: name.clone(),
                value,
            })
            .collect(),
        phi: fit.phi,
        iterations: fit.iterations,
        ridge_penalty: fit.ridge_penalty,
    })
}

/// Inference output together with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferOutput {
    pub config: InferConfig,
    pub report: InferenceReport,
}

/// Full selective-inference pipeline. An empty selected model is an error.
pub fn cmd_infer(data: &Dataset, cfg: &InferConfig) -> Result<InferOutput> {
    cfg.validate()?;
    let family = cfg.family()?;
    let fit_opts = FitOptions::default();
    let fit = fit_mle(data, family, &fit_opts)?;
    let lin = linearize(data, family, &fit)?;
    let mut resolved = cfg.clone();
    let lambda = match cfg.lambda_mode {
        LambdaMode::Fixed => LambdaSpec::Fixed(cfg.lambda.expect("validated")),
        LambdaMode::DataDriven => {
            let (lo, hi, k) = match cfg.lambda_grid {
                Some(g) => g,
                None => {
                    let top = 2.0 * lin.u_mat0.tr_mul(&lin.z0).amax();
                    if !(top > 0.0) {
                        return Err(Error::EmptyModel);
                    }
                    (DEFAULT_GRID_RATIO * top, top, DEFAULT_GRID_SIZE)
                }
            };
            resolved.lambda_grid = Some((lo, hi, k));
            LambdaSpec::DataDriven {
                grid: lambda_grid(lo, hi, k)?,
                split_frac: cfg.split_frac,
            }
        }
    };
    let opts = InferOptions {
        alpha: cfg.alpha,
        lambda,
        methods: cfg.methods.clone(),
        seed: cfg.seed,
        rep: 0,
        fit: fit_opts,
    };
    let sel = select_on(data.n(), fit, lin, &opts)?;
    if sel.model().is_empty() {
        return Err(Error::EmptyModel);
    }
    if cfg.lambda_mode == LambdaMode::DataDriven {
        resolved.lambda = Some(sel.penalty);
    }
    Ok(InferOutput {
        config: resolved,
        report: report_for(data, family, &sel, &opts),
    })
}

/// `compare` is `infer` with every method.
pub fn cmd_compare(data: &Dataset, cfg: &InferConfig) -> Result<InferOutput> {
    let mut cfg = cfg.clone();
    cfg.methods = Method::ALL.to_vec();
    cmd_infer(data, &cfg)
}

fn text(v: f64) -> String {
    bound::to_text(v)
}

fn opt_text(v: Option<f64>) -> String {
    v.map(text).unwrap_or_default()
}

/// One row per (coefficient, method).
pub fn write_report_csv<W: Write>(report: &InferenceReport, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    wr.write_record([
        "index",
        "name",
        "method",
        "estimate",
        "ci_lo",
        "ci_hi",
        "width",
        "p_value",
        "support",
        "diagnostics",
        "error",
    ])
    .map_err(io)?;
    for c in &report.coefficients {
        let support = c
            .support
            .intervals()
            .iter()
            .map(|(a, b)| format!("[{}, {}]", text(*a), text(*b)))
            .collect::<Vec<_>>()
            .join(" U ");
        let diags = c
            .diagnostics
            .iter()
            .map(|d| serde_json::to_string(d).expect("diagnostics serialize"))
            .collect::<Vec<_>>()
            .join(";");
        wr.write_record([
            c.index.to_string(),
            c.name.clone(),
            c.method.to_string(),
            text(c.estimate),
            opt_text(c.ci_lo),
            opt_text(c.ci_hi),
            opt_text(c.width()),
            opt_text(c.p_value),
            support,
            diags,
            c.error.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}

pub const SUMMARY_FILE: &str = "summary.csv";
pub const CURVES_FILE: &str = "curves.csv";
pub const PIVOTS_FILE: &str = "pivots.csv";
/// Resolved scenario, every default included.
pub const SCENARIO_FILE: &str = "scenario.json";

/// Runs a scenario and writes the summary, per-penalty curves and pivots into
/// `out_dir`. Returns the table and the files written.
pub fn cmd_simulate(scenario: &Scenario, out_dir: &Path) -> Result<(SummaryTable, Vec<PathBuf>)> {
    scenario.validate()?;
    let table = run_replications(scenario, &scenario.methods)?;
    std::fs::create_dir_all(out_dir)?;
    let files = [
        out_dir.join(SUMMARY_FILE),
        out_dir.join(CURVES_FILE),
        out_dir.join(PIVOTS_FILE),
        out_dir.join(SCENARIO_FILE),
    ];
    let scenario_json = serde_json::to_string_pretty(scenario).expect("scenario serializes");
    std::fs::write(&files[3], format!("{scenario_json}\n"))?;
    write_summary_csv(&table, std::fs::File::create(&files[0])?)?;
    write_curves_csv(&table, std::fs::File::create(&files[1])?)?;
    write_pivots_csv(&table, std::fs::File::create(&files[2])?)?;
    Ok((table, files.to_vec()))
}

pub fn write_pivots_csv<W: Write>(table: &SummaryTable, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    wr.write_record([
        "replicate",
        "lambda_index",
        "method",
        "coefficient",
        "pivot",
    ])
    .map_err(io)?;
    for p in &table.pivots {
        wr.write_record([
            p.replicate.to_string(),
            p.lambda_index.to_string(),
            p.method.to_string(),
            format!("beta{}", p.index),
            text(p.value),
        ])
        .map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Scenario::from_toml_str(&text)
}
