//! Carbon-tax pass-through and demand projection.
//!
//! A €/tCO₂ tax becomes a per-ticket cost through each route's CO₂ per
//! passenger and the exchange rate, reaches fares through a pass-through
//! rate ρ, and moves demand along the constant-elasticity curve implied by
//! the log-log demand model.
//!
//! The default pass-through relation is the symmetric-Cournot/Lerner one:
//! with route concentration HHI and market elasticity ε, the Lerner index is
//! HHI/|ε|, so price = cost / (1 − HHI/|ε|) and a marginal-cost increase is
//! passed through at ρ = 1/(1 − HHI/|ε|). It is undefined when |ε| ≤ HHI
//! (no interior Cournot equilibrium); such routes must be reported as
//! skipped, never silently imputed. `full` (ρ = 1) and `fixed(ρ)` modes are
//! provided to bracket the assumption.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::econ::ElasticityTerms;
use crate::market::{PanelObservation, Period};

/// One tax scenario: a carbon price and the exchange rate converting it to
/// local currency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxScenario {
    /// Scenario name used in report headers and file names.
    pub label: String,
    /// Carbon price, € per tonne of CO₂; ≥ 0.
    pub tax_eur_per_tonne: f64,
    /// Exchange rate, BRL per €; > 0. Period-average rates are a modelling
    /// input with no sensible default.
    pub fx_brl_per_eur: f64,
}

impl TaxScenario {
    pub fn new(label: &str, tax_eur_per_tonne: f64, fx_brl_per_eur: f64) -> Result<Self, TaxError> {
        let scenario = TaxScenario {
            label: label.to_string(),
            tax_eur_per_tonne,
            fx_brl_per_eur,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), TaxError> {
        if !self.tax_eur_per_tonne.is_finite() || self.tax_eur_per_tonne < 0.0 {
            return Err(TaxError::InvalidScenario {
                message: format!(
                    "tax_eur_per_tonne {} must be finite and ≥ 0",
                    self.tax_eur_per_tonne
                ),
            });
        }
        if !self.fx_brl_per_eur.is_finite() || self.fx_brl_per_eur <= 0.0 {
            return Err(TaxError::InvalidScenario {
                message: format!(
                    "fx_brl_per_eur {} must be finite and > 0",
                    self.fx_brl_per_eur
                ),
            });
        }
        Ok(())
    }
}

/// How a marginal-cost increase reaches fares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassThroughMode {
    /// ρ = 1/(1 − HHI/|ε|), the symmetric-Cournot relation; requires |ε| > HHI.
    #[serde(alias = "lerner")]
    LernerCournot,
    /// ρ = 1: full pass-through, the perfect-competition limit.
    Full,
    /// A fixed, externally chosen ρ ≥ 0.
    Fixed(f64),
}

impl fmt::Display for PassThroughMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PassThroughMode::LernerCournot => f.write_str("lerner_cournot"),
            PassThroughMode::Full => f.write_str("full"),
            PassThroughMode::Fixed(rho) => write!(f, "fixed:{rho}"),
        }
    }
}

impl FromStr for PassThroughMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lerner" | "lerner_cournot" => Ok(PassThroughMode::LernerCournot),
            "full" => Ok(PassThroughMode::Full),
            other => {
                if let Some(rho) = other.strip_prefix("fixed:") {
                    let rho: f64 = rho
                        .parse()
                        .map_err(|_| format!("fixed pass-through rate `{rho}` is not a number"))?;
                    if !rho.is_finite() || rho < 0.0 {
                        return Err(format!(
                            "fixed pass-through rate {rho} must be finite and ≥ 0"
                        ));
                    }
                    Ok(PassThroughMode::Fixed(rho))
                } else {
                    Err(format!(
                        "unknown pass-through mode `{other}` (expected lerner, full, or fixed:<rho>)"
                    ))
                }
            }
        }
    }
}

/// Inputs to [`passthrough_rate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassThroughParams {
    /// Route concentration, in (0, 1].
    pub hhi: f64,
    /// Route price elasticity; must be < 0 for the Lerner–Cournot relation.
    pub elasticity: f64,
    pub mode: PassThroughMode,
}

/// Errors raised by tax and projection operations.
#[derive(Debug, Error)]
pub enum TaxError {
    #[error("invalid tax scenario: {message}")]
    InvalidScenario { message: String },
    #[error("invalid pass-through input: {message}")]
    InvalidParams { message: String },
    #[error(
        "pass-through undefined on route with hhi {hhi} and elasticity {elasticity}: \
         the Cournot relation requires |elasticity| > hhi"
    )]
    UndefinedPassThrough { hhi: f64, elasticity: f64 },
    #[error(
        "demand projection undefined for non-negative elasticity {elasticity}: \
         the demand model requires downward-sloping routes"
    )]
    ElasticityNotNegative { elasticity: f64 },
    #[error("non-positive price {price} in demand projection")]
    NonPositivePrice { price: f64 },
}

/// Per-ticket tax in BRL: `co2_per_pax × tax_eur_per_tonne × fx_brl_per_eur`.
///
/// Linear in both the carbon price and the emission intensity.
pub fn per_ticket_tax_brl(co2_per_pax_tonnes: f64, scenario: &TaxScenario) -> f64 {
    co2_per_pax_tonnes * scenario.tax_eur_per_tonne * scenario.fx_brl_per_eur
}

/// The pass-through rate ρ for the given mode.
///
/// `lerner_cournot` → 1/(1 − HHI/|ε|); `full` → 1; `fixed(ρ₀)` → ρ₀.
/// In Cournot mode ρ ≥ 1 always, rising with concentration and falling with
/// elasticity magnitude; as HHI → 0 it tends to 1, the competitive limit.
pub fn passthrough_rate(params: &PassThroughParams) -> Result<f64, TaxError> {
    if !params.hhi.is_finite() || params.hhi <= 0.0 || params.hhi > 1.0 {
        return Err(TaxError::InvalidParams {
            message: format!("hhi {} outside (0, 1]", params.hhi),
        });
    }
    match params.mode {
        PassThroughMode::Full => Ok(1.0),
        PassThroughMode::Fixed(rho) => {
            if !rho.is_finite() || rho < 0.0 {
                return Err(TaxError::InvalidParams {
                    message: format!("fixed pass-through rate {rho} must be finite and ≥ 0"),
                });
            }
            Ok(rho)
        }
        PassThroughMode::LernerCournot => {
            let eps = params.elasticity;
            if !eps.is_finite() || eps >= 0.0 || -eps <= params.hhi {
                return Err(TaxError::UndefinedPassThrough {
                    hhi: params.hhi,
                    elasticity: eps,
                });
            }
            Ok(1.0 / (1.0 - params.hhi / -eps))
        }
    }
}

/// The fare after passing a per-ticket tax through at rate ρ:
/// `fare_before + ρ × tax_per_ticket`.
pub fn shifted_fare(fare_before: f64, tax_per_ticket: f64, rho: f64) -> f64 {
    fare_before + rho * tax_per_ticket
}

/// Constant-elasticity demand projection: `q1 = q0 × (p1/p0)^ε`.
///
/// Consistent with the log-log demand model, whose fare coefficient is the
/// elasticity of this curve. Composing projections over successive price
/// moves equals projecting the total move.
pub fn project_demand(q0: f64, p0: f64, p1: f64, epsilon: f64) -> Result<f64, TaxError> {
    for p in [p0, p1] {
        if !p.is_finite() || p <= 0.0 {
            return Err(TaxError::NonPositivePrice { price: p });
        }
    }
    if !q0.is_finite() || q0 < 0.0 {
        return Err(TaxError::InvalidParams {
            message: format!("q0 {q0} must be finite and ≥ 0"),
        });
    }
    Ok(q0 * (p1 / p0).powf(epsilon))
}

/// Scenario outcome for one route-month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteImpact {
    pub route_id: String,
    pub period: Period,
    pub tax_per_ticket_brl: f64,
    pub passthrough_rate: f64,
    pub fare_before: f64,
    pub fare_after: f64,
    pub q_before: f64,
    pub q_after: f64,
    /// `q_before − q_after`.
    pub loss_pax: f64,
    /// `loss_pax / q_before`.
    pub loss_fraction: f64,
}

/// Evaluates one route-month under a scenario: elasticity at the route's
/// passenger mix, per-ticket tax, pass-through, shifted fare, projected
/// demand — with every intermediate value recorded.
///
/// Routes with non-negative effective elasticity or (in Cournot mode)
/// `|ε| ≤ HHI` fail with the corresponding error; callers report them as
/// skipped rather than dropping them silently.
pub fn route_impact(
    obs: &PanelObservation,
    co2_per_pax_tonnes: f64,
    scenario: &TaxScenario,
    terms: &ElasticityTerms,
    mode: PassThroughMode,
) -> Result<RouteImpact, TaxError> {
    scenario.validate()?;
    if !co2_per_pax_tonnes.is_finite() || co2_per_pax_tonnes < 0.0 {
        return Err(TaxError::InvalidParams {
            message: format!("co2_per_pax {co2_per_pax_tonnes} must be finite and ≥ 0"),
        });
    }

    let elasticity = terms.eval(
        obs.share_business,
        obs.share_other_mode,
        obs.lowcost_present,
    );
    if !elasticity.is_finite() || elasticity >= 0.0 {
        return Err(TaxError::ElasticityNotNegative { elasticity });
    }

    let rho = passthrough_rate(&PassThroughParams {
        hhi: obs.hhi,
        elasticity,
        mode,
    })?;
    let tax = per_ticket_tax_brl(co2_per_pax_tonnes, scenario);
    let fare_after = shifted_fare(obs.avg_fare_brl, tax, rho);
    let q_after = project_demand(obs.pax, obs.avg_fare_brl, fare_after, elasticity)?;
    let loss_pax = obs.pax - q_after;

    Ok(RouteImpact {
        route_id: obs.route_id.clone(),
        period: obs.period,
        tax_per_ticket_brl: tax,
        passthrough_rate: rho,
        fare_before: obs.avg_fare_brl,
        fare_after,
        q_before: obs.pax,
        q_after,
        loss_pax,
        loss_fraction: loss_pax / obs.pax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn scenario(rate: f64) -> TaxScenario {
        TaxScenario::new(&format!("{rate} eur"), rate, 3.0).unwrap()
    }

    fn flat_terms(base: f64) -> ElasticityTerms {
        ElasticityTerms {
            base,
            other_mode: 0.0,
            business: 0.0,
            lowcost: 0.0,
        }
    }

    fn table_terms() -> ElasticityTerms {
        ElasticityTerms {
            base: -1.2,
            other_mode: -0.3,
            business: 0.5,
            lowcost: -0.1,
        }
    }

    fn obs(fare: f64, hhi: f64) -> PanelObservation {
        PanelObservation {
            route_id: "AAA-BBB".to_string(),
            origin: "AAA".to_string(),
            dest: "BBB".to_string(),
            period: "2005-06".parse().unwrap(),
            pax: 1000.0,
            avg_fare_brl: fare,
            pop_density: 100.0,
            income: 2000.0,
            share_business: 0.0,
            share_other_mode: 0.0,
            codeshare: false,
            lowcost_present: false,
            hhi,
            load_factor: 0.8,
            seats: 180,
            aircraft_class: "narrow".to_string(),
        }
    }

    #[test]
    fn zero_emissions_mean_zero_tax() {
        assert_eq!(per_ticket_tax_brl(0.0, &scenario(30.0)), 0.0);
    }

    #[test]
    fn per_ticket_tax_arithmetic_and_linearity() {
        let low = per_ticket_tax_brl(0.1, &scenario(10.0));
        assert_relative_eq!(low, 3.0, epsilon = 1e-12);
        let high = per_ticket_tax_brl(0.1, &scenario(30.0));
        assert_relative_eq!(high, 9.0, epsilon = 1e-12);
        assert_relative_eq!(high, 3.0 * low, epsilon = 1e-12);
    }

    #[test]
    fn passthrough_tends_to_one_in_the_competitive_limit() {
        let rho = passthrough_rate(&PassThroughParams {
            hhi: 1e-9,
            elasticity: -1.5,
            mode: PassThroughMode::LernerCournot,
        })
        .unwrap();
        assert!((rho - 1.0).abs() <= 1e-8, "got {rho}");
        assert_eq!(
            passthrough_rate(&PassThroughParams {
                hhi: 0.9,
                elasticity: -1.5,
                mode: PassThroughMode::Full,
            })
            .unwrap(),
            1.0
        );
    }

    #[test]
    fn passthrough_cournot_arithmetic() {
        let rho = passthrough_rate(&PassThroughParams {
            hhi: 0.5,
            elasticity: -2.0,
            mode: PassThroughMode::LernerCournot,
        })
        .unwrap();
        assert_relative_eq!(rho, 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn passthrough_undefined_when_demand_too_inelastic() {
        let err = passthrough_rate(&PassThroughParams {
            hhi: 1.0,
            elasticity: -0.8,
            mode: PassThroughMode::LernerCournot,
        })
        .unwrap_err();
        assert!(
            matches!(err, TaxError::UndefinedPassThrough { .. }),
            "got {err}"
        );
        // Boundary |ε| = hhi is also undefined.
        assert!(passthrough_rate(&PassThroughParams {
            hhi: 0.8,
            elasticity: -0.8,
            mode: PassThroughMode::LernerCournot,
        })
        .is_err());
        // Upward-sloping routes are rejected even though |ε| > hhi fails anyway.
        assert!(passthrough_rate(&PassThroughParams {
            hhi: 0.3,
            elasticity: 0.5,
            mode: PassThroughMode::LernerCournot,
        })
        .is_err());
    }

    #[test]
    fn fixed_mode_returns_its_rate_and_rejects_negatives() {
        let rho = passthrough_rate(&PassThroughParams {
            hhi: 0.5,
            elasticity: -0.1,
            mode: PassThroughMode::Fixed(0.7),
        })
        .unwrap();
        assert_eq!(rho, 0.7);
        assert!(passthrough_rate(&PassThroughParams {
            hhi: 0.5,
            elasticity: -1.0,
            mode: PassThroughMode::Fixed(-0.1),
        })
        .is_err());
    }

    #[test]
    fn mode_parses_and_displays() {
        assert_eq!(
            "lerner".parse::<PassThroughMode>().unwrap(),
            PassThroughMode::LernerCournot
        );
        assert_eq!(
            "lerner_cournot".parse::<PassThroughMode>().unwrap(),
            PassThroughMode::LernerCournot
        );
        assert_eq!(
            "full".parse::<PassThroughMode>().unwrap(),
            PassThroughMode::Full
        );
        assert_eq!(
            "fixed:0.8".parse::<PassThroughMode>().unwrap(),
            PassThroughMode::Fixed(0.8)
        );
        assert!("fixed:-1".parse::<PassThroughMode>().is_err());
        assert!("partial".parse::<PassThroughMode>().is_err());
        for mode in [
            PassThroughMode::LernerCournot,
            PassThroughMode::Full,
            PassThroughMode::Fixed(0.8),
        ] {
            assert_eq!(mode.to_string().parse::<PassThroughMode>().unwrap(), mode);
        }
    }

    #[test]
    fn mode_serde_forms() {
        assert_eq!(
            serde_json::to_string(&PassThroughMode::LernerCournot).unwrap(),
            "\"lerner_cournot\""
        );
        assert_eq!(
            serde_json::to_string(&PassThroughMode::Full).unwrap(),
            "\"full\""
        );
        assert_eq!(
            serde_json::to_string(&PassThroughMode::Fixed(0.8)).unwrap(),
            "{\"fixed\":0.8}"
        );
        let m: PassThroughMode = serde_json::from_str("\"lerner\"").unwrap();
        assert_eq!(m, PassThroughMode::LernerCournot);
    }

    #[test]
    fn shifted_fare_examples() {
        assert_eq!(shifted_fare(350.0, 0.0, 1.3), 350.0);
        let full = shifted_fare(350.0, 3.0, 1.0);
        assert_relative_eq!(full, 353.0, epsilon = 1e-12);
        assert_relative_eq!(
            (full - 350.0) / 350.0,
            0.008571428571428572,
            epsilon = 1e-12
        );
        let cournot = shifted_fare(350.0, 9.0, 4.0 / 3.0);
        assert_relative_eq!(cournot, 362.0, epsilon = 1e-12);
        // +3.43%, inside the ≤3.5% band reported for comparable levies.
        let pct = (cournot - 350.0) / 350.0;
        assert!(pct > 0.034 && pct < 0.035, "got {pct}");
    }

    #[test]
    fn projection_identity_and_unit_elasticity() {
        assert_eq!(project_demand(1000.0, 350.0, 350.0, -1.3).unwrap(), 1000.0);
        let q = project_demand(1000.0, 100.0, 110.0, -1.0).unwrap();
        assert_relative_eq!(q, 1000.0 / 1.1, max_relative = 1e-12);
    }

    #[test]
    fn projection_matches_precomputed_power() {
        let q = project_demand(1.0, 1.0, 1.2, -1.5).unwrap();
        // exp(−1.5 · ln 1.2), evaluated independently beforehand.
        assert_relative_eq!(q, 0.7607257743127307, max_relative = 1e-12);
    }

    #[test]
    fn projection_rejects_non_positive_prices() {
        assert!(project_demand(1000.0, 0.0, 350.0, -1.0).is_err());
        assert!(project_demand(1000.0, 350.0, -1.0, -1.0).is_err());
    }

    #[test]
    fn null_scenario_leaves_demand_unchanged() {
        let impact = route_impact(
            &obs(350.0, 0.4),
            0.1,
            &scenario(0.0),
            &flat_terms(-1.4),
            PassThroughMode::LernerCournot,
        )
        .unwrap();
        assert_eq!(impact.tax_per_ticket_brl, 0.0);
        assert_eq!(impact.fare_after, impact.fare_before);
        assert_eq!(impact.q_after, impact.q_before);
        assert_eq!(impact.loss_pax, 0.0);
        assert_eq!(impact.loss_fraction, 0.0);
    }

    #[test]
    fn higher_tax_rates_lose_strictly_more_demand() {
        let o = obs(350.0, 0.4);
        let terms = flat_terms(-1.4);
        let at = |rate: f64| {
            route_impact(
                &o,
                0.1,
                &scenario(rate),
                &terms,
                PassThroughMode::LernerCournot,
            )
            .unwrap()
            .loss_fraction
        };
        let (l10, l15, l30) = (at(10.0), at(15.0), at(30.0));
        assert!(l10 > 0.0);
        assert!(l10 < l15 && l15 < l30, "{l10} {l15} {l30}");
        // Non-linearity: concave in the tax level.
        assert!(l30 < 3.0 * l10, "{l30} vs 3×{l10}");
    }

    #[test]
    fn hand_composed_chain_matches_route_impact() {
        // co2 0.1 t, 15 €/t, fx 3.0 ⇒ tax 4.5; hhi 0.4, ε −1.4 ⇒ ρ = 1.4;
        // fare 350 → 356.3; ratio 1.018, q ratio 1.018^−1.4.
        let impact = route_impact(
            &obs(350.0, 0.4),
            0.1,
            &scenario(15.0),
            &flat_terms(-1.4),
            PassThroughMode::LernerCournot,
        )
        .unwrap();
        assert_relative_eq!(impact.tax_per_ticket_brl, 4.5, epsilon = 1e-12);
        assert_relative_eq!(impact.passthrough_rate, 1.4, epsilon = 1e-12);
        assert_relative_eq!(impact.fare_after, 356.3, epsilon = 1e-9);
        assert_relative_eq!(
            impact.q_after,
            1000.0 * 0.9753334315401526,
            max_relative = 1e-11
        );
        assert_relative_eq!(
            impact.loss_fraction,
            0.024666568459847382,
            max_relative = 1e-11
        );
        assert_relative_eq!(
            impact.loss_pax,
            impact.q_before - impact.q_after,
            epsilon = 1e-12
        );
    }

    #[test]
    fn inelastic_route_is_rejected_not_imputed() {
        let err = route_impact(
            &obs(350.0, 0.9),
            0.1,
            &scenario(15.0),
            &flat_terms(-0.5),
            PassThroughMode::LernerCournot,
        )
        .unwrap_err();
        assert!(
            matches!(err, TaxError::UndefinedPassThrough { .. }),
            "got {err}"
        );

        let err = route_impact(
            &obs(350.0, 0.4),
            0.1,
            &scenario(15.0),
            &flat_terms(0.3),
            PassThroughMode::Full,
        )
        .unwrap_err();
        assert!(
            matches!(err, TaxError::ElasticityNotNegative { .. }),
            "got {err}"
        );
    }

    #[test]
    fn business_share_dampens_and_other_mode_amplifies_losses() {
        // Under fixed pass-through the only channel is the elasticity, so the
        // direction of each share's effect follows its interaction sign.
        let terms = table_terms();
        let loss_at = |biz: f64, other: f64| {
            let mut o = obs(350.0, 0.4);
            o.share_business = biz;
            o.share_other_mode = other;
            route_impact(&o, 0.1, &scenario(30.0), &terms, PassThroughMode::Full)
                .unwrap()
                .loss_fraction
        };
        assert!(loss_at(0.75, 0.2) < loss_at(0.25, 0.2));
        assert!(loss_at(0.2, 0.75) > loss_at(0.2, 0.25));
    }

    proptest! {
        #[test]
        fn cournot_rho_exceeds_one_and_orders_correctly(
            hhi in 0.01f64..1.0,
            slack in 0.05f64..3.0,
        ) {
            let eps = -(hhi + slack);
            let rho = passthrough_rate(&PassThroughParams {
                hhi, elasticity: eps, mode: PassThroughMode::LernerCournot,
            }).unwrap();
            prop_assert!(rho >= 1.0);

            // Increasing in concentration.
            if hhi * 0.5 > 0.0 {
                let less_concentrated = passthrough_rate(&PassThroughParams {
                    hhi: hhi * 0.5, elasticity: eps, mode: PassThroughMode::LernerCournot,
                }).unwrap();
                prop_assert!(less_concentrated <= rho + 1e-12);
            }

            // Decreasing in |ε|.
            let more_elastic = passthrough_rate(&PassThroughParams {
                hhi, elasticity: eps - 1.0, mode: PassThroughMode::LernerCournot,
            }).unwrap();
            prop_assert!(more_elastic <= rho + 1e-12);
        }

        #[test]
        fn projection_composes(
            q0 in 1.0f64..1e6,
            p0 in 50.0f64..1000.0,
            r1 in 0.5f64..2.0,
            r2 in 0.5f64..2.0,
            eps in -3.0f64..-0.1,
        ) {
            let p1 = p0 * r1;
            let p2 = p1 * r2;
            let two_step = project_demand(
                project_demand(q0, p0, p1, eps).unwrap(), p1, p2, eps,
            ).unwrap();
            let one_step = project_demand(q0, p0, p2, eps).unwrap();
            prop_assert!((two_step - one_step).abs() <= 1e-12 * one_step.max(1.0));
        }

        #[test]
        fn losses_grow_concavely_in_the_tax(
            eps in -3.0f64..-0.5,
            x in 1e-4f64..0.2,
        ) {
            // x is the proportional fare increase at the base rate; tripling
            // the rate triples the increase.
            let loss = |frac: f64| 1.0 - (1.0 + frac).powf(eps);
            let l1 = loss(x);
            let l15 = loss(1.5 * x);
            let l3 = loss(3.0 * x);
            prop_assert!(l1 > 0.0);
            prop_assert!(l1 < l15 && l15 < l3);
            prop_assert!(l3 < 3.0 * l1);
        }
    }
}
