//! Report types shared by the inference pipeline, the baselines and the CLI.

use serde::{Deserialize, Serialize};

use crate::glm::Family;
use crate::path::{bound, IntervalUnion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ppl,
    Polyhedral,
    Naive,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ppl => "ppl",
            Method::Polyhedral => "polyhedral",
            Method::Naive => "naive",
        }
    }

    pub const ALL: [Method; 3] = [Method::Ppl, Method::Polyhedral, Method::Naive];
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ppl" => Ok(Method::Ppl),
            "polyhedral" => Ok(Method::Polyhedral),
            "naive" => Ok(Method::Naive),
            other => Err(crate::Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

/// Non-fatal events worth surfacing next to a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// The statistic sat on a truncation boundary and was moved inside by `shift`.
    BoundaryNudge { shift: f64 },
    /// No finite CI endpoint was found within the search range.
    InfiniteEndpoint { side: Side },
    /// The GLM fit used the weak ridge penalty.
    RidgeFallback { penalty: f64 },
    /// Path breakpoints where several events coincided.
    TiedBreakpoints { count: usize },
    /// Path breakpoints re-derived by a fresh solve.
    ResolvedBreakpoints { count: usize },
    /// The sign-conditioned event had several components; the one holding the
    /// statistic was used.
    SignEventSplit { components: usize },
    /// The enumeration window was widened to this many standard deviations.
    WindowExtended { half_width_sd: f64 },
}

/// Inference for one selected coefficient by one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    /// Column position, 1-based.
    pub index: usize,
    pub name: String,
    pub method: Method,
    pub estimate: f64,
    #[serde(with = "opt_bound", default)]
    pub ci_lo: Option<f64>,
    #[serde(with = "opt_bound", default)]
    pub ci_hi: Option<f64>,
    pub p_value: Option<f64>,
    /// Standard deviation of the statistic before truncation.
    pub sd: Option<f64>,
    /// Truncation set of the statistic (the real line for naive inference).
    pub support: IntervalUnion,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CoefficientReport {
    /// Whether the CI is available and excludes `value`.
    pub fn excludes(&self, value: f64) -> Option<bool> {
        Some(value < self.ci_lo? || value > self.ci_hi?)
    }

    pub fn covers(&self, value: f64) -> Option<bool> {
        self.excludes(value).map(|e| !e)
    }

    pub fn width(&self) -> Option<f64> {
        Some(self.ci_hi? - self.ci_lo?)
    }

    pub(crate) fn failed(
        index0: usize,
        name: &str,
        method: Method,
        estimate: f64,
        err: &crate::Error,
    ) -> Self {
        CoefficientReport {
            index: index0 + 1,
            name: name.to_string(),
            method,
            estimate,
            ci_lo: None,
            ci_hi: None,
            p_value: None,
            sd: None,
            support: IntervalUnion::empty(),
            diagnostics: Vec::new(),
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMode {
    Fixed,
    #[serde(rename = "datadriven")]
    DataDriven,
}

impl std::str::FromStr for LambdaMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_'], "")
            .as_str()
        {
            "fixed" => Ok(LambdaMode::Fixed),
            "datadriven" => Ok(LambdaMode::DataDriven),
            other => Err(crate::Error::Config(format!(
                "unknown lambda mode '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaInfo {
    pub mode: LambdaMode,
    /// Penalty on the sum-of-squares scale.
    pub value: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub validation_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedCovariate {
    /// 1-based column position.
    pub index: usize,
    pub name: String,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub phi: f64,
    pub lambda: LambdaInfo,
    pub model: Vec<SelectedCovariate>,
    pub coefficients: Vec<CoefficientReport>,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

impl InferenceReport {
    /// Entries for one method, in model order.
    pub fn for_method(&self, method: Method) -> impl Iterator<Item = &CoefficientReport> {
        self.coefficients.iter().filter(move |c| c.method == method)
    }

    /// 0-based model indices.
    pub fn model_indices(&self) -> Vec<usize> {
        self.model.iter().map(|m| m.index - 1).collect()
    }
}

mod opt_bound {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => super::bound::serialize(x, s),
            None => s.serialize_none(),
        }
    }

    #[derive(Deserialize)]
    struct Wrap(#[serde(with = "super::bound")] f64);

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_round_trips_with_infinite_bounds() {
        let c = CoefficientReport {
            index: 4,
            name: "x4".into(),
            method: Method::Polyhedral,
            estimate: 0.3,
            ci_lo: Some(-1.5),
            ci_hi: Some(f64::INFINITY),
            p_value: Some(0.4),
            sd: Some(1.0),
            support: IntervalUnion::interval(-0.2, f64::INFINITY),
            diagnostics: vec![Diagnostic::InfiniteEndpoint { side: Side::Upper }],
            error: None,
        };
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains(r#""ci_hi":"inf""#), "{s}");
        assert!(s.contains(r#""kind":"infinite_endpoint""#), "{s}");
        let back: CoefficientReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.excludes(-2.0), Some(true));
        assert_eq!(c.width(), Some(f64::INFINITY));
    }
}
