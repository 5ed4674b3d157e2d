//! Panel data model for Brazilian domestic air-travel demand.
//!
//! This module defines the core observational unit — one route-month of
//! demand, fares, demographics, and market structure — together with the
//! airport registry it references, CSV ingestion/validation, and a synthetic
//! data generator with a known data-generating process for recovery tests
//! and desk-scale experiments.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod io;
pub mod synth;

pub use io::{
    airports_to_csv, load_airports, load_panel, panel_to_csv, parse_airports, parse_panel,
    write_airports, write_panel,
};
pub use synth::{dgp_log_demand, generate_synthetic_panel, DgpParams};

/// Macro-region of Brazil used as a segmentation dimension (destination side).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    Norte,
    Nordeste,
    #[serde(rename = "Centro-Oeste", alias = "CentroOeste")]
    CentroOeste,
    Sudeste,
    Sul,
}

impl Region {
    /// All regions, in a fixed canonical order.
    pub const ALL: [Region; 5] = [
        Region::Norte,
        Region::Nordeste,
        Region::CentroOeste,
        Region::Sudeste,
        Region::Sul,
    ];
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Region::Norte => "Norte",
            Region::Nordeste => "Nordeste",
            Region::CentroOeste => "Centro-Oeste",
            Region::Sudeste => "Sudeste",
            Region::Sul => "Sul",
        };
        f.write_str(name)
    }
}

impl FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Norte" => Ok(Region::Norte),
            "Nordeste" => Ok(Region::Nordeste),
            // Accept both the hyphenated Portuguese spelling and the bare
            // identifier so hand-written and generated files both load.
            "Centro-Oeste" | "CentroOeste" => Ok(Region::CentroOeste),
            "Sudeste" => Ok(Region::Sudeste),
            "Sul" => Ok(Region::Sul),
            other => Err(format!(
                "unknown region label `{other}` (expected Norte, Nordeste, Centro-Oeste, Sudeste, or Sul)"
            )),
        }
    }
}

/// A calendar year-month, the panel's time unit.
///
/// Ordered chronologically; formatted and parsed as `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Period {
    year: i32,
    month: u8,
}

impl Period {
    /// Builds a period, rejecting out-of-range months.
    pub fn new(year: i32, month: u8) -> Result<Self, String> {
        if !(1..=12).contains(&month) {
            return Err(format!("month {month} out of range 1..=12"));
        }
        if !(1900..=9999).contains(&year) {
            return Err(format!("year {year} out of range 1900..=9999"));
        }
        Ok(Period { year, month })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u8 {
        self.month
    }

    /// Months elapsed since 1900-01; a linear index for arithmetic and spans.
    pub fn index(&self) -> i64 {
        (self.year as i64 - 1900) * 12 + (self.month as i64 - 1)
    }

    /// The period `n` months after this one.
    pub fn plus_months(&self, n: u32) -> Period {
        let idx = self.index() + n as i64;
        Period {
            year: (idx / 12 + 1900) as i32,
            month: (idx % 12 + 1) as u8,
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Period {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| format!("period `{s}` is not in YYYY-MM form"))?;
        if y.len() != 4 || m.len() != 2 {
            return Err(format!("period `{s}` is not in YYYY-MM form"));
        }
        let year: i32 = y
            .parse()
            .map_err(|_| format!("period `{s}` has a non-numeric year"))?;
        let month: u8 = m
            .parse()
            .map_err(|_| format!("period `{s}` has a non-numeric month"))?;
        Period::new(year, month)
    }
}

impl Serialize for Period {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An inclusive range of periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodRange {
    pub start: Period,
    pub end: Period,
}

impl PeriodRange {
    pub fn new(start: Period, end: Period) -> Result<Self, String> {
        if start > end {
            return Err(format!("period range start {start} is after end {end}"));
        }
        Ok(PeriodRange { start, end })
    }

    pub fn contains(&self, p: Period) -> bool {
        self.start <= p && p <= self.end
    }

    /// Number of months covered, inclusive of both endpoints.
    pub fn len_months(&self) -> u32 {
        (self.end.index() - self.start.index() + 1) as u32
    }
}

/// The sample window observations must fall in. Defaults to 2003-01..2013-12,
/// the eleven-year monthly panel the model was designed around.
pub fn default_sample_window() -> PeriodRange {
    PeriodRange {
        start: Period {
            year: 2003,
            month: 1,
        },
        end: Period {
            year: 2013,
            month: 12,
        },
    }
}

/// Calendar windows that switch the two event dummies on.
///
/// Defaults: the air-traffic-control crisis ("apagão aéreo") spans
/// Oct 2006 – Jul 2007; the economic-crisis dummy covers the last quarter
/// of 2008. Both are configurable for sensitivity runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DummyWindows {
    pub apagao: PeriodRange,
    pub crisis: PeriodRange,
}

impl Default for DummyWindows {
    fn default() -> Self {
        DummyWindows {
            apagao: PeriodRange {
                start: Period {
                    year: 2006,
                    month: 10,
                },
                end: Period {
                    year: 2007,
                    month: 7,
                },
            },
            crisis: PeriodRange {
                start: Period {
                    year: 2008,
                    month: 10,
                },
                end: Period {
                    year: 2008,
                    month: 12,
                },
            },
        }
    }
}

/// A domestic airport: three-letter code, spherical coordinates, macro-region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Airport {
    pub code: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub region: Region,
}

impl Airport {
    /// Builds a validated airport record.
    pub fn new(code: &str, lat_deg: f64, lon_deg: f64, region: Region) -> Result<Self, String> {
        if code.len() != 3 || !code.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(format!(
                "airport code `{code}` is not a 3-character identifier"
            ));
        }
        if !(-90.0..=90.0).contains(&lat_deg) || !lat_deg.is_finite() {
            return Err(format!("latitude {lat_deg} out of range [-90, 90]"));
        }
        if !(lon_deg > -180.0 && lon_deg <= 180.0) || !lon_deg.is_finite() {
            return Err(format!("longitude {lon_deg} out of range (-180, 180]"));
        }
        Ok(Airport {
            code: code.to_string(),
            lat_deg,
            lon_deg,
            region,
        })
    }
}

/// A set of airports keyed by code; codes are unique.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Airports {
    by_code: std::collections::BTreeMap<String, Airport>,
}

impl Airports {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an airport, rejecting duplicate codes.
    pub fn insert(&mut self, airport: Airport) -> Result<(), DataError> {
        let code = airport.code.clone();
        if self.by_code.insert(code.clone(), airport).is_some() {
            return Err(DataError::DuplicateAirport { code });
        }
        Ok(())
    }

    pub fn get(&self, code: &str) -> Option<&Airport> {
        self.by_code.get(code)
    }

    pub fn len(&self) -> usize {
        self.by_code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_code.is_empty()
    }

    /// Airports in code order.
    pub fn iter(&self) -> impl Iterator<Item = &Airport> {
        self.by_code.values()
    }
}

impl FromIterator<Airport> for Result<Airports, DataError> {
    fn from_iter<T: IntoIterator<Item = Airport>>(iter: T) -> Self {
        let mut set = Airports::new();
        for a in iter {
            set.insert(a)?;
        }
        Ok(set)
    }
}

/// One route-month record of the demand panel.
///
/// `pax` is monthly passengers on the route and may be fractional: the
/// synthetic generator produces exact exponentials of the linear demand
/// index so that estimation-recovery tests are exact, and real-world
/// aggregates are sometimes averages. Strict positivity is required because
/// demand enters the model in logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelObservation {
    /// Opaque route identifier, e.g. `GRU-REC`.
    pub route_id: String,
    /// Origin airport code.
    pub origin: String,
    /// Destination airport code.
    pub dest: String,
    /// Calendar year-month of the observation.
    pub period: Period,
    /// Monthly passengers (demand), strictly positive.
    pub pax: f64,
    /// Average one-way fare in BRL, strictly positive.
    pub avg_fare_brl: f64,
    /// Population density of the catchment, persons/km², strictly positive.
    pub pop_density: f64,
    /// Income per capita in BRL, strictly positive.
    pub income: f64,
    /// Share of passengers travelling on business, in [0, 1].
    pub share_business: f64,
    /// Share of passengers who have used another mode on the same
    /// origin-destination pair, in [0, 1].
    pub share_other_mode: f64,
    /// Whether a codeshare agreement operates on the route.
    pub codeshare: bool,
    /// Whether a low-cost carrier is present on the route.
    pub lowcost_present: bool,
    /// Herfindahl–Hirschman concentration index of the route, in (0, 1].
    pub hhi: f64,
    /// Average load factor, in (0, 1].
    pub load_factor: f64,
    /// Seats per flight of the representative aircraft, strictly positive.
    pub seats: u32,
    /// Key into the fuel-burn table (e.g. `narrow`, `wide`).
    pub aircraft_class: String,
}

impl PanelObservation {
    /// Checks every field-level invariant, returning the first violation.
    ///
    /// The sample `window` is part of the check because event dummies and
    /// scenario calendars are only defined inside it.
    pub fn validate(&self, window: &PeriodRange) -> Result<(), String> {
        if self.route_id.is_empty() {
            return Err("empty route_id".to_string());
        }
        if !window.contains(self.period) {
            return Err(format!(
                "period {} outside sample window {}..{}",
                self.period, window.start, window.end
            ));
        }
        if !(self.pax > 0.0) || !self.pax.is_finite() {
            return Err(format!(
                "non-positive demand pax={} (log-demand undefined)",
                self.pax
            ));
        }
        if !(self.avg_fare_brl > 0.0) || !self.avg_fare_brl.is_finite() {
            return Err(format!("non-positive fare {}", self.avg_fare_brl));
        }
        if !(self.pop_density > 0.0) || !self.pop_density.is_finite() {
            return Err(format!(
                "non-positive population density {}",
                self.pop_density
            ));
        }
        if !(self.income > 0.0) || !self.income.is_finite() {
            return Err(format!("non-positive income {}", self.income));
        }
        if !(0.0..=1.0).contains(&self.share_business) {
            return Err(format!(
                "share_business {} outside [0, 1]",
                self.share_business
            ));
        }
        if !(0.0..=1.0).contains(&self.share_other_mode) {
            return Err(format!(
                "share_other_mode {} outside [0, 1]",
                self.share_other_mode
            ));
        }
        if !(self.hhi > 0.0 && self.hhi <= 1.0) {
            return Err(format!("hhi {} outside (0, 1]", self.hhi));
        }
        if !(self.load_factor > 0.0 && self.load_factor <= 1.0) {
            return Err(format!("load_factor {} outside (0, 1]", self.load_factor));
        }
        if self.seats == 0 {
            return Err("zero seats".to_string());
        }
        if self.aircraft_class.is_empty() {
            return Err("empty aircraft_class".to_string());
        }
        Ok(())
    }
}

/// A validated demand panel: observations plus the airports they reference.
///
/// Invariants established at construction: every `(route_id, period)` pair is
/// unique, every origin/dest code resolves to a loaded airport, and every
/// observation passes [`PanelObservation::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    observations: Vec<PanelObservation>,
    airports: Airports,
    window: PeriodRange,
}

impl Panel {
    /// Validates and assembles a panel.
    pub fn new(
        observations: Vec<PanelObservation>,
        airports: Airports,
        window: PeriodRange,
    ) -> Result<Self, DataError> {
        let mut seen: BTreeSet<(&str, Period)> = BTreeSet::new();
        for obs in &observations {
            obs.validate(&window)
                .map_err(|message| DataError::Observation {
                    route_id: obs.route_id.clone(),
                    period: obs.period.to_string(),
                    message,
                })?;
            for code in [&obs.origin, &obs.dest] {
                if airports.get(code).is_none() {
                    return Err(DataError::UnknownAirport {
                        code: code.clone(),
                        route_id: obs.route_id.clone(),
                    });
                }
            }
            if !seen.insert((obs.route_id.as_str(), obs.period)) {
                return Err(DataError::DuplicateObservation {
                    route_id: obs.route_id.clone(),
                    period: obs.period.to_string(),
                });
            }
        }
        Ok(Panel {
            observations,
            airports,
            window,
        })
    }

    pub fn observations(&self) -> &[PanelObservation] {
        &self.observations
    }

    pub fn airports(&self) -> &Airports {
        &self.airports
    }

    pub fn window(&self) -> PeriodRange {
        self.window
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Observation indices sorted by `(route_id, period)` — the canonical
    /// output order used by scenario reports.
    pub fn sorted_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.observations.len()).collect();
        idx.sort_by(|&a, &b| {
            let oa = &self.observations[a];
            let ob = &self.observations[b];
            (oa.route_id.as_str(), oa.period).cmp(&(ob.route_id.as_str(), ob.period))
        });
        idx
    }
}

/// Errors raised while loading or assembling panel data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse CSV in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    Header {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path} line {line}: {message}")]
    Row {
        path: String,
        line: u64,
        message: String,
    },
    #[error("duplicate airport code `{code}`")]
    DuplicateAirport { code: String },
    #[error("observation {route_id} {period}: {message}")]
    Observation {
        route_id: String,
        period: String,
        message: String,
    },
    #[error("duplicate observation for (route_id={route_id}, period={period})")]
    DuplicateObservation { route_id: String, period: String },
    #[error("route {route_id} references unknown airport `{code}`")]
    UnknownAirport { code: String, route_id: String },
}
