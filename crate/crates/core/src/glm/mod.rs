//! Generalized linear models (logistic, Poisson) and beta regression: fitting
//! and construction of the centered pseudo-data used for selection and
//! inference downstream.

mod family;
mod fit;
mod linearize;

pub use family::{beta_working, family_eval, BetaWorking, Cumulants};
pub(crate) use fit::{beta_observed_information, glm_observed_information};
pub use fit::{fit_mle, FitOptions, GlmFit, RidgeMode};
pub use linearize::{contrast, linearize, linearize_at, pivot_statistic, LinearizedData};

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Response family.
///
/// Logistic and Poisson are canonical GLMs with unit dispersion. Beta
/// regression uses a logit mean link with a precision parameter φ estimated
/// jointly with the coefficients; its noise scale is φ⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Logistic,
    Poisson,
    Beta,
}

impl Family {
    /// Dispersion function a(φ).
    pub fn dispersion(self, phi: f64) -> f64 {
        match self {
            Family::Logistic | Family::Poisson => 1.0,
            Family::Beta => 1.0 / phi,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Logistic => "logistic",
            Family::Poisson => "poisson",
            Family::Beta => "beta",
        }
    }

    /// Checks that `y` lies in the family's response domain.
    pub fn check_response(self, y: f64) -> std::result::Result<(), &'static str> {
        if !y.is_finite() {
            return Err("non-finite response");
        }
        match self {
            Family::Logistic if y != 0.0 && y != 1.0 => Err("logistic response must be 0 or 1"),
            Family::Poisson if y < 0.0 || y.fract() != 0.0 => {
                Err("poisson response must be a nonnegative integer")
            }
            Family::Beta if y <= 0.0 || y >= 1.0 => {
                Err("beta response must lie strictly inside (0, 1)")
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic" | "binomial" => Ok(Family::Logistic),
            "poisson" => Ok(Family::Poisson),
            "beta" => Ok(Family::Beta),
            other => Err(Error::Config(format!("unknown family '{other}'"))),
        }
    }
}

/// Fixed covariates (rows of `x`) and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Covariate names, one per column of `x`.
    pub names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset with default column names `x1..xp`.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(x, y, names)
    }

    pub fn with_names(x: DMatrix<f64>, y: DVector<f64>, names: Vec<String>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Data(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if names.len() != x.ncols() {
            return Err(Error::Data("one name per covariate column required".into()));
        }
        if x.nrows() == 0 {
            return Err(Error::Data("dataset has no observations".into()));
        }
        if let Some((k, _)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (r, c) = (k % x.nrows(), k / x.nrows());
            return Err(Error::Data(format!(
                "non-finite covariate at row {r}, column {c}"
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite response at row {i}")));
        }
        Ok(Dataset { x, y, names })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Validates every response against the family domain.
    pub fn validate(&self, family: Family) -> Result<()> {
        for (i, &y) in self.y.iter().enumerate() {
            family
                .check_response(y)
                .map_err(|msg| Error::Data(format!("row {i}: {msg} (got {y})")))?;
        }
        Ok(())
    }

    /// Dataset restricted to the covariates in `model` (0-based, in order).
    pub fn select_columns(&self, model: &[usize]) -> Dataset {
        let x = self.x.select_columns(model.iter());
        let names = model.iter().map(|&j| self.names[j].clone()).collect();
        Dataset {
            x,
            y: self.y.clone(),
            names,
        }
    }
}
