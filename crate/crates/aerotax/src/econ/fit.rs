//! Least-squares fitting, covariance estimation, and serialized summaries.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{DummyWindows, Panel};

use super::{build_design_matrix, DesignMatrix, ModelSpec, Regressor};

/// Relative tolerance declaring a column collinear: its post-orthogonalization
/// norm (the magnitude of the corresponding R diagonal) must exceed this
/// fraction of its original norm.
const RANK_RTOL: f64 = 1e-10;

/// Estimated coefficients with covariance and fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Column labels, aligned with `coefficients`.
    pub labels: Vec<String>,
    /// Point estimates, in column order.
    pub coefficients: DVector<f64>,
    /// Covariance of the estimates (classical or HC1, per the fit call).
    pub vcov: DMatrix<f64>,
    /// Square roots of the covariance diagonal.
    pub std_errors: DVector<f64>,
    /// Rows used.
    pub n_obs: usize,
    /// Centered R²; within-R² when fixed effects were absorbed.
    pub r_squared: f64,
    /// The specification the design matrix was built from.
    pub spec: ModelSpec,
    /// Groups absorbed by the within transformation before fitting.
    pub absorbed_groups: usize,
    /// max |Xᵀ(y − Xβ̂)| — the least-squares orthogonality defect, recorded
    /// so tests can bound it.
    pub max_abs_gram_residual: f64,
}

impl FitResult {
    fn index_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    /// Coefficient for a named column, if estimated.
    pub fn coefficient_named(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.coefficients[i])
    }

    /// Coefficient for a regressor, if estimated (the intercept is absent
    /// under fixed effects).
    pub fn coefficient(&self, reg: Regressor) -> Option<f64> {
        self.coefficient_named(reg.identifier())
    }

    /// Standard error for a regressor, if estimated.
    pub fn std_error(&self, reg: Regressor) -> Option<f64> {
        self.index_of(reg.identifier()).map(|i| self.std_errors[i])
    }

    /// t-statistic (coefficient over standard error) for a regressor.
    pub fn t_statistic(&self, reg: Regressor) -> Option<f64> {
        let i = self.index_of(reg.identifier())?;
        Some(self.coefficients[i] / self.std_errors[i])
    }

    /// The four fare-sensitivity terms needed to evaluate route elasticity.
    pub fn elasticity_terms(&self) -> Result<ElasticityTerms, FitError> {
        ElasticityTerms::from_lookup(|name| self.coefficient_named(name))
    }

    /// Route-specific price elasticity at the given passenger mix.
    pub fn effective_elasticity(
        &self,
        share_business: f64,
        share_other_mode: f64,
        lowcost_present: bool,
    ) -> Result<f64, FitError> {
        Ok(self
            .elasticity_terms()?
            .eval(share_business, share_other_mode, lowcost_present))
    }

    /// The serializable summary: named coefficient and standard-error maps
    /// plus fit diagnostics and the spec flags.
    pub fn summary(&self) -> FitSummary {
        let coefficients: IndexMap<String, f64> = self
            .labels
            .iter()
            .cloned()
            .zip(self.coefficients.iter().copied())
            .collect();
        let std_errors: IndexMap<String, f64> = self
            .labels
            .iter()
            .cloned()
            .zip(self.std_errors.iter().copied())
            .collect();
        FitSummary {
            coefficients,
            std_errors,
            n_obs: self.n_obs,
            r_squared: self.r_squared,
            use_route_fixed_effects: self.spec.use_route_fixed_effects,
            robust_se: self.spec.robust_se,
        }
    }
}

/// Route-specific price elasticity evaluated from a fit:
/// `ε = β_fare + β_fare×othermode · share_other_mode
///           + β_fare×business · share_business + β_fare×lowcost · 1{lowcost}`.
pub fn effective_elasticity(
    fit: &FitResult,
    share_business: f64,
    share_other_mode: f64,
    lowcost_present: bool,
) -> Result<f64, FitError> {
    fit.effective_elasticity(share_business, share_other_mode, lowcost_present)
}

/// The four coefficients that compose route-level price elasticity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticityTerms {
    /// β on log_fare.
    pub base: f64,
    /// β on log_fare × share_other_mode.
    pub other_mode: f64,
    /// β on log_fare × share_business.
    pub business: f64,
    /// β on log_fare × d_lowcost.
    pub lowcost: f64,
}

impl ElasticityTerms {
    fn from_lookup(lookup: impl Fn(&str) -> Option<f64>) -> Result<Self, FitError> {
        let need = |name: &str| {
            lookup(name).ok_or_else(|| FitError::MissingCoefficient {
                name: name.to_string(),
            })
        };
        Ok(ElasticityTerms {
            base: need(Regressor::LogFare.identifier())?,
            other_mode: need(Regressor::LogFareXShareOtherMode.identifier())?,
            business: need(Regressor::LogFareXShareBusiness.identifier())?,
            lowcost: need(Regressor::LogFareXDLowcost.identifier())?,
        })
    }

    /// Elasticity at a given passenger mix.
    pub fn eval(&self, share_business: f64, share_other_mode: f64, lowcost_present: bool) -> f64 {
        self.base
            + self.other_mode * share_other_mode
            + self.business * share_business
            + self.lowcost * (lowcost_present as u8 as f64)
    }
}

/// The on-disk fit summary (`fit.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSummary {
    pub coefficients: IndexMap<String, f64>,
    pub std_errors: IndexMap<String, f64>,
    pub n_obs: usize,
    pub r_squared: f64,
    pub use_route_fixed_effects: bool,
    pub robust_se: bool,
}

impl FitSummary {
    /// Serializes to pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    /// Writes the summary to a file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FitError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| FitError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    /// Loads a summary from a file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FitError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| FitError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| FitError::Json {
            path: path.display().to_string(),
            source: e,
        })
    }

    /// The four fare-sensitivity terms needed to evaluate route elasticity.
    pub fn elasticity_terms(&self) -> Result<ElasticityTerms, FitError> {
        ElasticityTerms::from_lookup(|name| self.coefficients.get(name).copied())
    }
}

/// Errors raised while building designs or fitting.
#[derive(Debug, Error)]
pub enum FitError {
    #[error("panel has no observations")]
    EmptyPanel,
    #[error("{rows} rows cannot identify {parameters} parameters")]
    TooFewRows { rows: usize, parameters: usize },
    #[error(
        "design matrix is rank deficient: column `{column}` is collinear with \
         the columns before it"
    )]
    RankDeficient { column: String },
    #[error("non-finite value in {what}")]
    NonFinite { what: String },
    #[error("fit does not include coefficient `{name}`")]
    MissingCoefficient { name: String },
    #[error("failed to read or write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed fit summary {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Ordinary least squares via Householder QR.
///
/// QR is used instead of the normal equations so conditioning is governed by
/// the design matrix itself, not its squared condition number. Covariance is
/// classical `σ²(XᵀX)⁻¹` when `robust` is false and HC1 when true, with
/// degrees of freedom reduced by the column count plus any absorbed groups.
///
/// A column whose post-orthogonalization norm falls below `1e-10` of its
/// original norm is reported as collinear by name.
pub fn fit_ols(matrix: &DesignMatrix, robust: bool) -> Result<FitResult, FitError> {
    let n = matrix.columns.nrows();
    let k = matrix.columns.ncols();
    if n < k {
        return Err(FitError::TooFewRows {
            rows: n,
            parameters: k,
        });
    }

    let col_norms: Vec<f64> = (0..k).map(|j| matrix.columns.column(j).norm()).collect();

    let qr = matrix.columns.clone().qr();
    let q = qr.q();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)].abs() <= RANK_RTOL * col_norms[j] {
            return Err(FitError::RankDeficient {
                column: matrix.labels[j].clone(),
            });
        }
    }

    let qty = q.tr_mul(&matrix.response);
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| FitError::NonFinite {
            what: "triangular solve for coefficients".to_string(),
        })?;

    let fitted = &matrix.columns * &beta;
    let residuals = &matrix.response - &fitted;
    let rss = residuals.norm_squared();

    let gram_residual = matrix.columns.tr_mul(&residuals);
    let max_abs_gram_residual = gram_residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    // Absorbed group means consume degrees of freedom exactly like explicit
    // dummy columns would.
    let dof = n.saturating_sub(k + matrix.absorbed_groups);

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| FitError::NonFinite {
            what: "triangular solve for (XᵀX)⁻¹".to_string(),
        })?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let vcov = if robust {
        // HC1: (XᵀX)⁻¹ (Σ eᵢ² xᵢxᵢᵀ) (XᵀX)⁻¹ scaled by n / dof.
        let mut weighted = matrix.columns.clone();
        for i in 0..n {
            let w = residuals[i] * residuals[i];
            for j in 0..k {
                weighted[(i, j)] *= w;
            }
        }
        let meat = matrix.columns.tr_mul(&weighted);
        let factor = if dof > 0 { n as f64 / dof as f64 } else { 0.0 };
        factor * &xtx_inv * meat * &xtx_inv
    } else {
        let sigma2 = if dof > 0 { rss / dof as f64 } else { 0.0 };
        sigma2 * xtx_inv
    };

    let std_errors = DVector::from_fn(k, |i, _| vcov[(i, i)].max(0.0).sqrt());

    for (i, v) in beta.iter().enumerate() {
        if !v.is_finite() {
            return Err(FitError::NonFinite {
                what: format!("coefficient `{}`", matrix.labels[i]),
            });
        }
    }
    for (i, v) in std_errors.iter().enumerate() {
        if !v.is_finite() {
            return Err(FitError::NonFinite {
                what: format!("standard error of `{}`", matrix.labels[i]),
            });
        }
    }

    let y_mean = matrix.response.mean();
    let tss: f64 = matrix.response.iter().map(|y| (y - y_mean).powi(2)).sum();
    let r_squared = if tss > 0.0 {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    } else if rss <= 1e-12 {
        1.0
    } else {
        0.0
    };

    Ok(FitResult {
        labels: matrix.labels.clone(),
        coefficients: beta,
        vcov,
        std_errors,
        n_obs: n,
        r_squared,
        spec: matrix.spec,
        absorbed_groups: matrix.absorbed_groups,
        max_abs_gram_residual,
    })
}

/// Builds the design for `spec` and fits it, honoring the spec's robust flag.
pub fn estimate(
    panel: &Panel,
    spec: ModelSpec,
    windows: &DummyWindows,
) -> Result<FitResult, FitError> {
    let matrix = build_design_matrix(panel, spec, windows)?;
    fit_ols(&matrix, spec.robust_se)
}
