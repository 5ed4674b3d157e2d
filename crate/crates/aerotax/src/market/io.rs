//! CSV ingestion and serialization for airports and demand panels.
//!
//! Both formats are plain UTF-8 CSV with a fixed header, decimal points,
//! and booleans encoded as `0`/`1`. Every ingestion error carries the file
//! path and the 1-based line number of the offending row.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{Airport, Airports, DataError, Panel, PanelObservation, Period, PeriodRange, Region};

/// Exact header required of an airports file.
pub const AIRPORTS_HEADER: &str = "code,lat_deg,lon_deg,region";

/// Exact header required of a panel file.
pub const PANEL_HEADER: &str = "route_id,origin,dest,period,pax,avg_fare_brl,pop_density,income,\
share_business,share_other_mode,codeshare,lowcost_present,hhi,load_factor,seats,aircraft_class";

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, source: csv::Error) -> DataError {
    DataError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn row_err(path: &Path, line: u64, message: impl Into<String>) -> DataError {
    DataError::Row {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn check_header(path: &Path, found: &csv::StringRecord, expected: &str) -> Result<(), DataError> {
    let found_joined = found.iter().collect::<Vec<_>>().join(",");
    if found_joined != expected {
        return Err(DataError::Header {
            path: path.display().to_string(),
            expected: expected.to_string(),
            found: found_joined,
        });
    }
    Ok(())
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_field<T: FromStr>(
    path: &Path,
    line: u64,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T, DataError>
where
    T::Err: std::fmt::Display,
{
    let raw = record
        .get(idx)
        .ok_or_else(|| row_err(path, line, format!("missing field `{name}`")))?;
    raw.parse()
        .map_err(|e| row_err(path, line, format!("field `{name}`: {e} (value `{raw}`)")))
}

fn parse_bool(
    path: &Path,
    line: u64,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<bool, DataError> {
    let raw = record
        .get(idx)
        .ok_or_else(|| row_err(path, line, format!("missing field `{name}`")))?;
    match raw {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(row_err(
            path,
            line,
            format!("field `{name}`: expected 0 or 1, got `{other}`"),
        )),
    }
}

/// Loads and validates an airports file.
pub fn load_airports(path: impl AsRef<Path>) -> Result<Airports, DataError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    parse_airports(path, &bytes)
}

/// Parses airports from in-memory CSV bytes; `path` is used for diagnostics.
pub fn parse_airports(path: &Path, bytes: &[u8]) -> Result<Airports, DataError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(bytes);
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    check_header(path, &header, AIRPORTS_HEADER)?;

    let mut airports = Airports::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record_line(&record);
        if record.len() != 4 {
            return Err(row_err(
                path,
                line,
                format!("expected 4 fields, got {}", record.len()),
            ));
        }
        let code = record.get(0).unwrap_or_default().to_string();
        let lat: f64 = parse_field(path, line, &record, 1, "lat_deg")?;
        let lon: f64 = parse_field(path, line, &record, 2, "lon_deg")?;
        let region: Region = parse_field(path, line, &record, 3, "region")?;
        let airport =
            Airport::new(&code, lat, lon, region).map_err(|msg| row_err(path, line, msg))?;
        if airports.get(&airport.code).is_some() {
            return Err(row_err(
                path,
                line,
                format!("duplicate airport code `{}`", airport.code),
            ));
        }
        airports.insert(airport).expect("duplicate already checked");
    }
    Ok(airports)
}

/// Loads and validates a panel file against a loaded airport set and a
/// sample window (see [`super::default_sample_window`]).
pub fn load_panel(
    path: impl AsRef<Path>,
    airports: &Airports,
    window: PeriodRange,
) -> Result<Panel, DataError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    parse_panel(path, &bytes, airports, window)
}

/// Parses a panel from in-memory CSV bytes; `path` is used for diagnostics.
pub fn parse_panel(
    path: &Path,
    bytes: &[u8],
    airports: &Airports,
    window: PeriodRange,
) -> Result<Panel, DataError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(bytes);
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    check_header(path, &header, PANEL_HEADER)?;

    let mut observations = Vec::new();
    let mut seen: BTreeMap<(String, Period), u64> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record_line(&record);
        if record.len() != 16 {
            return Err(row_err(
                path,
                line,
                format!("expected 16 fields, got {}", record.len()),
            ));
        }
        let obs = PanelObservation {
            route_id: record.get(0).unwrap_or_default().to_string(),
            origin: record.get(1).unwrap_or_default().to_string(),
            dest: record.get(2).unwrap_or_default().to_string(),
            period: parse_field(path, line, &record, 3, "period")?,
            pax: parse_field(path, line, &record, 4, "pax")?,
            avg_fare_brl: parse_field(path, line, &record, 5, "avg_fare_brl")?,
            pop_density: parse_field(path, line, &record, 6, "pop_density")?,
            income: parse_field(path, line, &record, 7, "income")?,
            share_business: parse_field(path, line, &record, 8, "share_business")?,
            share_other_mode: parse_field(path, line, &record, 9, "share_other_mode")?,
            codeshare: parse_bool(path, line, &record, 10, "codeshare")?,
            lowcost_present: parse_bool(path, line, &record, 11, "lowcost_present")?,
            hhi: parse_field(path, line, &record, 12, "hhi")?,
            load_factor: parse_field(path, line, &record, 13, "load_factor")?,
            seats: parse_field(path, line, &record, 14, "seats")?,
            aircraft_class: record.get(15).unwrap_or_default().to_string(),
        };
        obs.validate(&window)
            .map_err(|msg| row_err(path, line, msg))?;
        for code in [&obs.origin, &obs.dest] {
            if airports.get(code).is_none() {
                return Err(row_err(
                    path,
                    line,
                    format!("unknown airport code `{code}`"),
                ));
            }
        }
        if let Some(first) = seen.insert((obs.route_id.clone(), obs.period), line) {
            return Err(row_err(
                path,
                line,
                format!(
                    "duplicate (route_id={}, period={}); first occurrence at line {first}",
                    obs.route_id, obs.period
                ),
            ));
        }
        observations.push(obs);
    }

    // Invariants were established row-by-row above; Panel::new re-checks them,
    // which keeps a single authority on what a valid panel is.
    Panel::new(observations, airports.clone(), window)
}

/// Serializes airports to CSV (code order) and returns the bytes.
pub fn airports_to_csv(airports: &Airports) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(AIRPORTS_HEADER);
    out.push('\n');
    for a in airports.iter() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            a.code, a.lat_deg, a.lon_deg, a.region
        ));
    }
    out.into_bytes()
}

/// Serializes a panel's observations to CSV in their stored order.
pub fn panel_to_csv(panel: &Panel) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(PANEL_HEADER);
    out.push('\n');
    for o in panel.observations() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            o.route_id,
            o.origin,
            o.dest,
            o.period,
            o.pax,
            o.avg_fare_brl,
            o.pop_density,
            o.income,
            o.share_business,
            o.share_other_mode,
            o.codeshare as u8,
            o.lowcost_present as u8,
            o.hhi,
            o.load_factor,
            o.seats,
            o.aircraft_class
        ));
    }
    out.into_bytes()
}

/// Writes an airports file.
pub fn write_airports(airports: &Airports, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    fs::write(path, airports_to_csv(airports)).map_err(|e| io_err(path, e))
}

/// Writes a panel file.
pub fn write_panel(panel: &Panel, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    fs::write(path, panel_to_csv(panel)).map_err(|e| io_err(path, e))
}
