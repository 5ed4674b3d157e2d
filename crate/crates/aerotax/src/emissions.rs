//! Per-passenger CO₂ estimation for a route.
//!
//! The chain mirrors the standard carbon-calculator methodology for air
//! travel: great-circle distance between airports, a stage-length distance
//! uplift for routing inefficiency, piecewise-linear fuel burn from a
//! per-aircraft-class table, and allocation of fuel CO₂ to passengers
//! through the pax-to-freight factor, seats, and load factor.
//!
//! All operations are pure; tables and factors are immutable after
//! validation and safe to share across threads.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in kilometres for the spherical distance model.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Default CO₂ produced per kilogram of jet fuel burned, kg CO₂ / kg fuel.
pub const DEFAULT_CO2_PER_FUEL: f64 = 3.157;

/// A validated geographic coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coord {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl Coord {
    /// Builds a coordinate, requiring latitude in [-90, 90] and longitude
    /// in (-180, 180].
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self, EmissionsError> {
        if !lat_deg.is_finite() || !(-90.0..=90.0).contains(&lat_deg) {
            return Err(EmissionsError::InvalidCoordinate {
                message: format!("latitude {lat_deg} out of range [-90, 90]"),
            });
        }
        if !lon_deg.is_finite() || !(lon_deg > -180.0 && lon_deg <= 180.0) {
            return Err(EmissionsError::InvalidCoordinate {
                message: format!("longitude {lon_deg} out of range (-180, 180]"),
            });
        }
        Ok(Coord { lat_deg, lon_deg })
    }
}

/// Great-circle distance between two points in kilometres.
///
/// Haversine formula on a sphere of radius [`EARTH_RADIUS_KM`], using the
/// `atan2` form, which is well-conditioned at both small and antipodal
/// separations. Symmetric, non-negative, and bounded by half the
/// circumference (π · 6371 km).
pub fn great_circle_km(a: Coord, b: Coord) -> f64 {
    let lat_a = a.lat_deg.to_radians();
    let lat_b = b.lat_deg.to_radians();
    let dlat = (b.lat_deg - a.lat_deg).to_radians();
    let dlon = (b.lon_deg - a.lon_deg).to_radians();

    let s_lat = (dlat / 2.0).sin();
    let s_lon = (dlon / 2.0).sin();
    let h = (s_lat * s_lat + lat_a.cos() * lat_b.cos() * s_lon * s_lon).clamp(0.0, 1.0);
    let c = 2.0 * h.sqrt().atan2((1.0 - h).sqrt());
    EARTH_RADIUS_KM * c
}

/// Conversion factors from fuel to CO₂ plus the stage-length distance uplift.
///
/// `correction_table` is a list of `(upper_bound_km, add_km)` bands, ordered
/// by upper bound with the last band unbounded (`None`). Bands are right-open:
/// a distance equal to a band's upper bound falls in the next band. Uplifts
/// must be non-negative and non-decreasing across bands so that corrected
/// distance is non-decreasing in the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionFactors {
    /// kg CO₂ per kg fuel.
    pub co2_per_fuel: f64,
    /// `(upper_bound_km, add_km)` bands; `None` upper bound = unbounded.
    pub correction_table: Vec<(Option<f64>, f64)>,
}

impl Default for EmissionFactors {
    fn default() -> Self {
        EmissionFactors {
            co2_per_fuel: DEFAULT_CO2_PER_FUEL,
            correction_table: vec![(Some(550.0), 50.0), (Some(5500.0), 100.0), (None, 125.0)],
        }
    }
}

impl EmissionFactors {
    /// Checks all invariants: positive conversion factor and a well-formed,
    /// monotone band table ending in an unbounded band.
    pub fn validate(&self) -> Result<(), EmissionsError> {
        let fail = |message: String| Err(EmissionsError::InvalidFactors { message });
        if !(self.co2_per_fuel > 0.0) || !self.co2_per_fuel.is_finite() {
            return fail(format!(
                "co2_per_fuel {} must be finite and > 0",
                self.co2_per_fuel
            ));
        }
        if self.correction_table.is_empty() {
            return fail("correction_table must have at least one band".to_string());
        }
        let last = self.correction_table.len() - 1;
        let mut prev_upper = 0.0f64;
        let mut prev_add = f64::NEG_INFINITY;
        for (i, &(upper, add)) in self.correction_table.iter().enumerate() {
            if !add.is_finite() || add < 0.0 {
                return fail(format!("band {i}: add_km {add} must be finite and ≥ 0"));
            }
            if add < prev_add {
                return fail(format!(
                    "band {i}: add_km {add} decreases from the previous band ({prev_add}); \
                     uplifts must be non-decreasing so corrected distance stays monotone"
                ));
            }
            prev_add = add;
            match upper {
                Some(u) if i == last => {
                    return fail(format!(
                        "last band must be unbounded, found upper bound {u}"
                    ));
                }
                None if i != last => {
                    return fail(format!("band {i}: only the last band may be unbounded"));
                }
                Some(u) => {
                    if !u.is_finite() || u <= prev_upper {
                        return fail(format!(
                            "band {i}: upper bound {u} must be finite and exceed the previous bound {prev_upper}"
                        ));
                    }
                    prev_upper = u;
                }
                None => {}
            }
        }
        Ok(())
    }

    /// Parses and validates factors from JSON text.
    pub fn from_json(json: &str) -> Result<Self, EmissionsError> {
        let factors: EmissionFactors =
            serde_json::from_str(json).map_err(|e| EmissionsError::InvalidFactors {
                message: format!("malformed emission-factors JSON: {e}"),
            })?;
        factors.validate()?;
        Ok(factors)
    }

    /// Loads factors from a JSON file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmissionsError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| EmissionsError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    /// The factors bundled with the crate (same values as [`Default`]).
    pub fn builtin() -> Self {
        Self::from_json(include_str!("../data/emission_factors.json"))
            .expect("bundled emission factors are valid")
    }
}

/// Distance-to-fuel-burn profile for one aircraft class.
#[derive(Debug, Clone, PartialEq)]
pub struct AircraftFuelProfile {
    /// Identifier of the class, e.g. `narrow` or `wide`.
    pub class_name: String,
    /// `(distance_km, fuel_kg)` pairs, strictly increasing in distance with
    /// non-decreasing fuel; at least two points.
    pub breakpoints: Vec<(f64, f64)>,
    /// Share of fuel attributed to passengers rather than belly freight,
    /// in (0, 1].
    pub pax_to_freight_factor: f64,
}

impl AircraftFuelProfile {
    /// Builds and validates a profile.
    pub fn new(
        class_name: &str,
        breakpoints: Vec<(f64, f64)>,
        pax_to_freight_factor: f64,
    ) -> Result<Self, EmissionsError> {
        let profile = AircraftFuelProfile {
            class_name: class_name.to_string(),
            breakpoints,
            pax_to_freight_factor,
        };
        profile.validate()?;
        Ok(profile)
    }

    fn validate(&self) -> Result<(), EmissionsError> {
        let fail = |message: String| {
            Err(EmissionsError::InvalidProfile {
                class: self.class_name.clone(),
                message,
            })
        };
        if self.class_name.is_empty() {
            return fail("empty class name".to_string());
        }
        if self.breakpoints.len() < 2 {
            return fail(format!(
                "needs at least 2 breakpoints, found {}",
                self.breakpoints.len()
            ));
        }
        if !(self.pax_to_freight_factor > 0.0 && self.pax_to_freight_factor <= 1.0) {
            return fail(format!(
                "pax_to_freight_factor {} outside (0, 1]",
                self.pax_to_freight_factor
            ));
        }
        let mut prev: Option<(f64, f64)> = None;
        for (i, &(km, kg)) in self.breakpoints.iter().enumerate() {
            if !km.is_finite() || km <= 0.0 || !kg.is_finite() || kg <= 0.0 {
                return fail(format!(
                    "breakpoint {i}: ({km} km, {kg} kg) must be finite and > 0"
                ));
            }
            if let Some((pkm, pkg)) = prev {
                if km <= pkm {
                    return fail(format!(
                        "breakpoint {i}: distance {km} does not increase over {pkm}"
                    ));
                }
                if kg < pkg {
                    return fail(format!(
                        "breakpoint {i}: fuel {kg} decreases from {pkg}; burn must be non-decreasing"
                    ));
                }
            }
            prev = Some((km, kg));
        }
        Ok(())
    }

    /// Smallest and largest tabulated distances.
    pub fn distance_range(&self) -> (f64, f64) {
        (
            self.breakpoints.first().expect("validated non-empty").0,
            self.breakpoints.last().expect("validated non-empty").0,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct RawProfile {
    pax_to_freight_factor: f64,
    breakpoints: Vec<(f64, f64)>,
}

/// A set of fuel profiles keyed by aircraft class.
#[derive(Debug, Clone, PartialEq)]
pub struct FuelTable {
    profiles: BTreeMap<String, AircraftFuelProfile>,
}

impl FuelTable {
    /// Parses and validates a fuel table from JSON text of the form
    /// `{class: {pax_to_freight_factor, breakpoints: [[km, kg], ...]}}`.
    pub fn from_json(json: &str) -> Result<Self, EmissionsError> {
        let raw: BTreeMap<String, RawProfile> =
            serde_json::from_str(json).map_err(|e| EmissionsError::InvalidProfile {
                class: "<table>".to_string(),
                message: format!("malformed fuel-table JSON: {e}"),
            })?;
        let mut profiles = BTreeMap::new();
        for (class, entry) in raw {
            let profile =
                AircraftFuelProfile::new(&class, entry.breakpoints, entry.pax_to_freight_factor)?;
            profiles.insert(class, profile);
        }
        if profiles.is_empty() {
            return Err(EmissionsError::InvalidProfile {
                class: "<table>".to_string(),
                message: "fuel table defines no aircraft classes".to_string(),
            });
        }
        Ok(FuelTable { profiles })
    }

    /// Loads a fuel table from a JSON file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmissionsError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| EmissionsError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    /// The illustrative two-class (narrow/wide) table bundled with the crate.
    ///
    /// Desk-scale defaults in plausible magnitudes; not certified figures.
    pub fn builtin() -> Self {
        Self::from_json(include_str!("../data/fuel_tables.json"))
            .expect("bundled fuel table is valid")
    }

    /// Looks up a class, failing with the class name if missing.
    pub fn get(&self, class: &str) -> Result<&AircraftFuelProfile, EmissionsError> {
        self.profiles
            .get(class)
            .ok_or_else(|| EmissionsError::UnknownAircraftClass {
                class: class.to_string(),
            })
    }

    /// Class names in sorted order.
    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }
}

/// Applies the stage-length uplift: the first band whose upper bound exceeds
/// `gcd_km` (bands are right-open) contributes its `add_km`.
///
/// Non-decreasing in `gcd_km` and always ≥ `gcd_km` for validated factors.
pub fn corrected_distance_km(gcd_km: f64, factors: &EmissionFactors) -> f64 {
    for &(upper, add) in &factors.correction_table {
        match upper {
            Some(u) if gcd_km < u => return gcd_km + add,
            None => return gcd_km + add,
            _ => continue,
        }
    }
    // Unreachable for validated factors (last band is unbounded); fall back
    // to no uplift rather than panicking on a hand-built table.
    gcd_km
}

/// Fuel burned over a corrected distance by piecewise-linear interpolation.
///
/// Exact at breakpoints. Distances outside the tabulated range are an error:
/// extrapolated burns have no empirical support, so they never enter totals.
pub fn fuel_burn_kg(
    profile: &AircraftFuelProfile,
    corrected_km: f64,
) -> Result<f64, EmissionsError> {
    let (min_km, max_km) = profile.distance_range();
    if !corrected_km.is_finite() || corrected_km < min_km || corrected_km > max_km {
        return Err(EmissionsError::DistanceOutOfTable {
            class: profile.class_name.clone(),
            corrected_km,
            min_km,
            max_km,
        });
    }
    // Index of the segment whose left endpoint is the last breakpoint
    // at or below the query.
    let idx = profile
        .breakpoints
        .partition_point(|&(km, _)| km <= corrected_km)
        .saturating_sub(1)
        .min(profile.breakpoints.len() - 2);
    let (d0, f0) = profile.breakpoints[idx];
    let (d1, f1) = profile.breakpoints[idx + 1];
    Ok(f0 + (f1 - f0) * (corrected_km - d0) / (d1 - d0))
}

/// Tonnes of CO₂ attributed to one passenger:
/// `co2_per_fuel × fuel_kg × pax_to_freight_factor / (seats × load_factor)`,
/// converted from kilograms to tonnes.
pub fn co2_per_pax_tonnes(
    fuel_kg: f64,
    profile: &AircraftFuelProfile,
    seats: u32,
    load_factor: f64,
    factors: &EmissionFactors,
) -> Result<f64, EmissionsError> {
    if seats == 0 {
        return Err(EmissionsError::BadOccupancy {
            message: "zero seats".to_string(),
        });
    }
    if !(load_factor > 0.0 && load_factor <= 1.0) {
        return Err(EmissionsError::BadOccupancy {
            message: format!("load_factor {load_factor} outside (0, 1]"),
        });
    }
    if !fuel_kg.is_finite() || fuel_kg < 0.0 {
        return Err(EmissionsError::BadOccupancy {
            message: format!("fuel_kg {fuel_kg} must be finite and ≥ 0"),
        });
    }
    Ok(
        factors.co2_per_fuel * fuel_kg * profile.pax_to_freight_factor
            / (seats as f64 * load_factor)
            / 1000.0,
    )
}

/// Full chain for one route: distance, uplift, fuel, CO₂ per passenger.
pub fn route_co2_per_pax_tonnes(
    origin: Coord,
    dest: Coord,
    profile: &AircraftFuelProfile,
    seats: u32,
    load_factor: f64,
    factors: &EmissionFactors,
) -> Result<f64, EmissionsError> {
    let gcd = great_circle_km(origin, dest);
    let corrected = corrected_distance_km(gcd, factors);
    let fuel = fuel_burn_kg(profile, corrected)?;
    co2_per_pax_tonnes(fuel, profile, seats, load_factor, factors)
}

/// Errors raised by the emissions chain.
#[derive(Debug, Error)]
pub enum EmissionsError {
    #[error("invalid coordinate: {message}")]
    InvalidCoordinate { message: String },
    #[error("invalid emission factors: {message}")]
    InvalidFactors { message: String },
    #[error("invalid fuel profile `{class}`: {message}")]
    InvalidProfile { class: String, message: String },
    #[error("aircraft class `{class}` not present in the fuel table")]
    UnknownAircraftClass { class: String },
    #[error(
        "corrected distance {corrected_km} km outside fuel table for `{class}` \
         ([{min_km}, {max_km}] km); extend the table instead of extrapolating"
    )]
    DistanceOutOfTable {
        class: String,
        corrected_km: f64,
        min_km: f64,
        max_km: f64,
    },
    #[error("invalid occupancy: {message}")]
    BadOccupancy { message: String },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lat_deg, self.lon_deg)
    }
}
