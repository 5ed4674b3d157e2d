//! Demand-model estimation: design matrix, fixed effects, least squares.
//!
//! The demand equation is log-log (constant elasticity): log passengers on
//! a route-month regressed on log fare, log demographics, event dummies, and
//! three fare interactions that let price sensitivity vary with passenger
//! mix and low-cost presence. Route fixed effects are absorbed by the within
//! transformation; inference defaults to heteroskedasticity-consistent (HC1)
//! standard errors.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::market::{DummyWindows, Panel, Period};

mod fit;

pub use fit::{
    effective_elasticity, estimate, fit_ols, ElasticityTerms, FitError, FitResult, FitSummary,
};

/// The regressors of the demand equation, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regressor {
    Intercept,
    LogPopDensity,
    LogIncome,
    LogFare,
    DCodeshare,
    DApagao,
    DCrisis,
    DLowcost,
    LogFareXShareOtherMode,
    LogFareXShareBusiness,
    LogFareXDLowcost,
}

impl Regressor {
    /// Every regressor in canonical order.
    pub const ALL: [Regressor; 11] = [
        Regressor::Intercept,
        Regressor::LogPopDensity,
        Regressor::LogIncome,
        Regressor::LogFare,
        Regressor::DCodeshare,
        Regressor::DApagao,
        Regressor::DCrisis,
        Regressor::DLowcost,
        Regressor::LogFareXShareOtherMode,
        Regressor::LogFareXShareBusiness,
        Regressor::LogFareXDLowcost,
    ];

    /// Stable identifier used in column labels and serialized summaries.
    pub fn identifier(&self) -> &'static str {
        match self {
            Regressor::Intercept => "intercept",
            Regressor::LogPopDensity => "log_pop_density",
            Regressor::LogIncome => "log_income",
            Regressor::LogFare => "log_fare",
            Regressor::DCodeshare => "d_codeshare",
            Regressor::DApagao => "d_apagao",
            Regressor::DCrisis => "d_crisis",
            Regressor::DLowcost => "d_lowcost",
            Regressor::LogFareXShareOtherMode => "log_fare_x_share_other_mode",
            Regressor::LogFareXShareBusiness => "log_fare_x_share_business",
            Regressor::LogFareXDLowcost => "log_fare_x_d_lowcost",
        }
    }
}

impl fmt::Display for Regressor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.identifier())
    }
}

/// Estimation options: the regressor list itself is fixed; only the fixed
/// effects and covariance treatments vary.
///
/// Defaults: route fixed effects ON (route-level unobservables plainly
/// confound fares) and robust standard errors ON (route sizes differ by
/// orders of magnitude, so homoskedasticity is untenable).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub use_route_fixed_effects: bool,
    pub robust_se: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            use_route_fixed_effects: true,
            robust_se: true,
        }
    }
}

impl ModelSpec {
    /// Columns this specification estimates, in order. Under fixed effects
    /// the intercept is dropped: it is not identified once every route's
    /// mean is absorbed.
    pub fn regressors(&self) -> Vec<Regressor> {
        Regressor::ALL
            .iter()
            .copied()
            .filter(|r| !(self.use_route_fixed_effects && *r == Regressor::Intercept))
            .collect()
    }
}

/// A response vector and column matrix ready for least squares, with row
/// bookkeeping for grouping and joins.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    /// log(pax) per row (within-demeaned when fixed effects are applied).
    pub response: DVector<f64>,
    /// One column per label, aligned with `labels`.
    pub columns: DMatrix<f64>,
    /// `(route_id, period)` of each row, in row order.
    pub row_index: Vec<(String, Period)>,
    /// Column labels (regressor identifiers, plus dummy labels for the
    /// explicit-dummy estimator).
    pub labels: Vec<String>,
    /// The specification that produced this matrix.
    pub spec: ModelSpec,
    /// Number of groups absorbed by the within transformation (0 when none).
    pub absorbed_groups: usize,
}

fn regressor_value(
    obs: &crate::market::PanelObservation,
    reg: Regressor,
    windows: &DummyWindows,
) -> f64 {
    let log_fare = obs.avg_fare_brl.ln();
    match reg {
        Regressor::Intercept => 1.0,
        Regressor::LogPopDensity => obs.pop_density.ln(),
        Regressor::LogIncome => obs.income.ln(),
        Regressor::LogFare => log_fare,
        Regressor::DCodeshare => obs.codeshare as u8 as f64,
        Regressor::DApagao => windows.apagao.contains(obs.period) as u8 as f64,
        Regressor::DCrisis => windows.crisis.contains(obs.period) as u8 as f64,
        Regressor::DLowcost => obs.lowcost_present as u8 as f64,
        Regressor::LogFareXShareOtherMode => log_fare * obs.share_other_mode,
        Regressor::LogFareXShareBusiness => log_fare * obs.share_business,
        Regressor::LogFareXDLowcost => log_fare * (obs.lowcost_present as u8 as f64),
    }
}

/// Builds the design matrix for the demand equation.
///
/// The response is log passengers; continuous regressors enter in natural
/// logs; the event dummies are derived from each row's period and `windows`;
/// interactions multiply the log-fare column by the named share or flag.
/// When the spec requests route fixed effects the intercept is dropped and
/// the within transformation is applied.
pub fn build_design_matrix(
    panel: &Panel,
    spec: ModelSpec,
    windows: &DummyWindows,
) -> Result<DesignMatrix, FitError> {
    if panel.is_empty() {
        return Err(FitError::EmptyPanel);
    }
    let regressors = spec.regressors();
    let n = panel.len();
    let k = regressors.len();

    let mut response = DVector::zeros(n);
    let mut columns = DMatrix::zeros(n, k);
    let mut row_index = Vec::with_capacity(n);
    for (i, obs) in panel.observations().iter().enumerate() {
        response[i] = obs.pax.ln();
        for (j, &reg) in regressors.iter().enumerate() {
            columns[(i, j)] = regressor_value(obs, reg, windows);
        }
        row_index.push((obs.route_id.clone(), obs.period));
    }

    let matrix = DesignMatrix {
        response,
        columns,
        row_index,
        labels: regressors
            .iter()
            .map(|r| r.identifier().to_string())
            .collect(),
        spec,
        absorbed_groups: 0,
    };
    check_finite(&matrix)?;
    if spec.use_route_fixed_effects {
        Ok(within_transform(&matrix))
    } else {
        Ok(matrix)
    }
}

fn check_finite(matrix: &DesignMatrix) -> Result<(), FitError> {
    for (i, v) in matrix.response.iter().enumerate() {
        if !v.is_finite() {
            let (route, period) = &matrix.row_index[i];
            return Err(FitError::NonFinite {
                what: format!("log-demand for {route} {period}"),
            });
        }
    }
    for j in 0..matrix.columns.ncols() {
        for (i, v) in matrix.columns.column(j).iter().enumerate() {
            if !v.is_finite() {
                let (route, period) = &matrix.row_index[i];
                return Err(FitError::NonFinite {
                    what: format!("column {} for {route} {period}", matrix.labels[j]),
                });
            }
        }
    }
    Ok(())
}

/// Demeans the response and every column within each `route_id` group,
/// absorbing route fixed effects.
///
/// Per-group sums of the transformed values vanish to rounding error; a
/// group-constant column becomes identically zero, and a single-observation
/// group's row becomes all zeros.
pub fn within_transform(matrix: &DesignMatrix) -> DesignMatrix {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, (route, _)) in matrix.row_index.iter().enumerate() {
        groups.entry(route.as_str()).or_default().push(i);
    }

    let mut response = matrix.response.clone();
    let mut columns = matrix.columns.clone();
    for rows in groups.values() {
        let m = rows.len() as f64;
        let y_mean: f64 = rows.iter().map(|&i| matrix.response[i]).sum::<f64>() / m;
        for &i in rows {
            response[i] -= y_mean;
        }
        for j in 0..columns.ncols() {
            let c_mean: f64 = rows.iter().map(|&i| matrix.columns[(i, j)]).sum::<f64>() / m;
            for &i in rows {
                columns[(i, j)] -= c_mean;
            }
        }
    }

    DesignMatrix {
        response,
        columns,
        row_index: matrix.row_index.clone(),
        labels: matrix.labels.clone(),
        spec: matrix.spec,
        absorbed_groups: groups.len(),
    }
}

/// Builds the explicit-dummy (least-squares-dummy-variable) design: the ten
/// slope columns plus one 0/1 column per route, no intercept.
///
/// This estimator is algebraically equivalent to the within transformation
/// for the slope coefficients, which makes it the natural cross-check for
/// the fixed-effects path; it is exposed for exactly that purpose.
pub fn build_lsdv_design_matrix(
    panel: &Panel,
    windows: &DummyWindows,
) -> Result<DesignMatrix, FitError> {
    if panel.is_empty() {
        return Err(FitError::EmptyPanel);
    }
    let slope_spec = ModelSpec {
        use_route_fixed_effects: true,
        robust_se: true,
    };
    let slopes = slope_spec.regressors();
    let routes: Vec<&str> = {
        let set: std::collections::BTreeSet<&str> = panel
            .observations()
            .iter()
            .map(|o| o.route_id.as_str())
            .collect();
        set.into_iter().collect()
    };
    let route_pos: BTreeMap<&str, usize> =
        routes.iter().enumerate().map(|(i, &r)| (r, i)).collect();

    let n = panel.len();
    let k = slopes.len() + routes.len();
    let mut response = DVector::zeros(n);
    let mut columns = DMatrix::zeros(n, k);
    let mut row_index = Vec::with_capacity(n);
    for (i, obs) in panel.observations().iter().enumerate() {
        response[i] = obs.pax.ln();
        for (j, &reg) in slopes.iter().enumerate() {
            columns[(i, j)] = regressor_value(obs, reg, windows);
        }
        columns[(i, slopes.len() + route_pos[obs.route_id.as_str()])] = 1.0;
        row_index.push((obs.route_id.clone(), obs.period));
    }

    let mut labels: Vec<String> = slopes.iter().map(|r| r.identifier().to_string()).collect();
    labels.extend(routes.iter().map(|r| format!("route_{r}")));

    let matrix = DesignMatrix {
        response,
        columns,
        row_index,
        labels,
        spec: slope_spec,
        absorbed_groups: 0,
    };
    check_finite(&matrix)?;
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{
        default_sample_window, generate_synthetic_panel, Airport, Airports, DgpParams,
        PanelObservation, Region,
    };
    use proptest::prelude::*;

    fn small_panel() -> Panel {
        let mut airports = Airports::new();
        airports
            .insert(Airport::new("AAA", -10.0, -50.0, Region::Sudeste).unwrap())
            .unwrap();
        airports
            .insert(Airport::new("BBB", -12.0, -52.0, Region::Sul).unwrap())
            .unwrap();
        let obs = |period: &str, fare: f64, biz: f64| PanelObservation {
            route_id: "AAA-BBB".to_string(),
            origin: "AAA".to_string(),
            dest: "BBB".to_string(),
            period: period.parse().unwrap(),
            pax: 1000.0,
            avg_fare_brl: fare,
            pop_density: 100.0,
            income: 2000.0,
            share_business: biz,
            share_other_mode: 0.1,
            codeshare: false,
            lowcost_present: false,
            hhi: 0.5,
            load_factor: 0.8,
            seats: 180,
            aircraft_class: "narrow".to_string(),
        };
        Panel::new(
            vec![
                obs("2006-12", std::f64::consts::E.powi(2), 0.5),
                obs("2007-01", 300.0, 0.2),
                obs("2008-11", 400.0, 0.3),
            ],
            airports,
            default_sample_window(),
        )
        .unwrap()
    }

    #[test]
    fn pooled_design_has_one_column_per_regressor() {
        let spec = ModelSpec {
            use_route_fixed_effects: false,
            robust_se: false,
        };
        let m = build_design_matrix(&small_panel(), spec, &DummyWindows::default()).unwrap();
        assert_eq!(m.columns.nrows(), 3);
        assert_eq!(m.columns.ncols(), 11);
        assert_eq!(m.labels[0], "intercept");
        assert_eq!(m.labels[10], "log_fare_x_d_lowcost");
        assert_eq!(m.absorbed_groups, 0);
    }

    #[test]
    fn interaction_is_product_of_log_fare_and_share() {
        let spec = ModelSpec {
            use_route_fixed_effects: false,
            robust_se: false,
        };
        let m = build_design_matrix(&small_panel(), spec, &DummyWindows::default()).unwrap();
        // First row: fare = e², share_business = 0.5 ⇒ interaction = 2 × 0.5.
        let j = m
            .labels
            .iter()
            .position(|l| l == "log_fare_x_share_business")
            .unwrap();
        assert!((m.columns[(0, j)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn event_dummies_follow_periods() {
        let spec = ModelSpec {
            use_route_fixed_effects: false,
            robust_se: false,
        };
        let m = build_design_matrix(&small_panel(), spec, &DummyWindows::default()).unwrap();
        let apagao = m.labels.iter().position(|l| l == "d_apagao").unwrap();
        let crisis = m.labels.iter().position(|l| l == "d_crisis").unwrap();
        // Rows: 2006-12 (apagão), 2007-01 (apagão), 2008-11 (crisis).
        assert_eq!(m.columns[(0, apagao)], 1.0);
        assert_eq!(m.columns[(1, apagao)], 1.0);
        assert_eq!(m.columns[(2, apagao)], 0.0);
        assert_eq!(m.columns[(0, crisis)], 0.0);
        assert_eq!(m.columns[(2, crisis)], 1.0);
    }

    #[test]
    fn fixed_effects_drop_intercept_and_demean() {
        let m = build_design_matrix(
            &small_panel(),
            ModelSpec::default(),
            &DummyWindows::default(),
        )
        .unwrap();
        assert_eq!(m.columns.ncols(), 10);
        assert!(!m.labels.iter().any(|l| l == "intercept"));
        assert_eq!(m.absorbed_groups, 1);
        // Single route ⇒ every column sums to ~0.
        for j in 0..m.columns.ncols() {
            let s: f64 = m.columns.column(j).iter().sum();
            assert!(s.abs() <= 1e-10, "column {} sums to {s}", m.labels[j]);
        }
        let sy: f64 = m.response.iter().sum();
        assert!(sy.abs() <= 1e-10);
    }

    #[test]
    fn within_transform_zeroes_constant_columns_and_singleton_rows() {
        let params = DgpParams::baseline();
        let panel = generate_synthetic_panel(&params, 3, 4);
        let spec = ModelSpec {
            use_route_fixed_effects: false,
            robust_se: false,
        };
        let m = build_design_matrix(&panel, spec, &DummyWindows::default()).unwrap();
        let w = within_transform(&m);
        assert_eq!(w.absorbed_groups, 3);
        // The intercept column is constant within every route.
        let j = w.labels.iter().position(|l| l == "intercept").unwrap();
        for v in w.columns.column(j).iter() {
            assert!(v.abs() <= 1e-12);
        }

        // A one-observation route demeans to a zero row.
        let single = generate_synthetic_panel(&params, 2, 1);
        let ms = build_design_matrix(&single, spec, &DummyWindows::default()).unwrap();
        let ws = within_transform(&ms);
        for i in 0..ws.columns.nrows() {
            assert!(ws.response[i].abs() <= 1e-12);
            for j in 0..ws.columns.ncols() {
                assert!(ws.columns[(i, j)].abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn empty_panel_is_rejected() {
        let airports = Airports::new();
        let panel = Panel::new(vec![], airports, default_sample_window()).unwrap();
        let err = build_design_matrix(&panel, ModelSpec::default(), &DummyWindows::default())
            .unwrap_err();
        assert!(matches!(err, FitError::EmptyPanel));
    }

    #[test]
    fn lsdv_design_appends_one_dummy_per_route() {
        let params = DgpParams::baseline();
        let panel = generate_synthetic_panel(&params, 5, 6);
        let m = build_lsdv_design_matrix(&panel, &DummyWindows::default()).unwrap();
        assert_eq!(m.columns.ncols(), 10 + 5);
        assert_eq!(m.absorbed_groups, 0);
        // Route dummies partition the rows: each row has exactly one 1.
        for i in 0..m.columns.nrows() {
            let ones: f64 = (10..15).map(|j| m.columns[(i, j)]).sum();
            assert_eq!(ones, 1.0);
        }
    }

    proptest! {
        #[test]
        fn within_group_sums_vanish(seed in 0u64..500, routes in 2usize..8, periods in 2usize..10) {
            let mut params = DgpParams::baseline();
            params.seed = seed;
            let panel = generate_synthetic_panel(&params, routes, periods);
            let m = build_design_matrix(&panel, ModelSpec::default(), &DummyWindows::default()).unwrap();
            let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
            for (i, (route, _)) in m.row_index.iter().enumerate() {
                *sums.entry(route.as_str()).or_default() += m.response[i];
            }
            for (route, s) in &sums {
                prop_assert!(s.abs() <= 1e-10, "route {route} response sum {s}");
            }
            for j in 0..m.columns.ncols() {
                let mut col_sums: BTreeMap<&str, f64> = BTreeMap::new();
                for (i, (route, _)) in m.row_index.iter().enumerate() {
                    *col_sums.entry(route.as_str()).or_default() += m.columns[(i, j)];
                }
                for (route, s) in &col_sums {
                    prop_assert!(s.abs() <= 1e-10, "route {route} column {} sum {s}", m.labels[j]);
                }
            }
        }
    }
}
