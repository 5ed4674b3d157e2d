//! Scenario engine: load inputs, estimate (or reuse) the demand model,
//! compute per-passenger CO₂, simulate each tax level, and write impact
//! tables, segment reports, and a run manifest.
//!
//! The engine is deterministic end to end: identical config and input files
//! produce byte-identical outputs, including row order. Nothing in the
//! outputs depends on the output directory, wall-clock time, or scheduling.
//! Routes whose pass-through or demand projection is undefined are listed in
//! the manifest as skipped — exactly once each — never silently dropped.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::econ::{estimate, FitError, FitSummary, ModelSpec};
use crate::emissions::{
    route_co2_per_pax_tonnes, Coord, EmissionFactors, EmissionsError, FuelTable,
};
use crate::market::{
    default_sample_window, parse_airports, parse_panel, DataError, DummyWindows, Panel,
    PanelObservation, Period,
};
use crate::tax::{route_impact, PassThroughMode, RouteImpact, TaxError, TaxScenario};

/// Header of the per-scenario impact files.
pub const IMPACTS_HEADER: &str = "route_id,period,tax_per_ticket_brl,passthrough_rate,\
                                  fare_before,fare_after,q_before,q_after,loss_pax,loss_fraction";
/// Header of the per-dimension segment files.
pub const SEGMENTS_HEADER: &str = "bucket,q_before,q_after,loss_pax,loss_fraction";

/// A way of partitioning route-months for segment reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentDimension {
    /// Load-factor bands by the configured edges, left-open right-closed.
    LfBand,
    /// Calendar year of the observation period.
    Year,
    /// Macro-region of the destination airport.
    Region,
}

impl SegmentDimension {
    pub const ALL: [SegmentDimension; 3] = [
        SegmentDimension::LfBand,
        SegmentDimension::Year,
        SegmentDimension::Region,
    ];

    /// The identifier used in config files and output file names.
    pub fn identifier(&self) -> &'static str {
        match self {
            SegmentDimension::LfBand => "lf_band",
            SegmentDimension::Year => "year",
            SegmentDimension::Region => "region",
        }
    }
}

impl fmt::Display for SegmentDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.identifier())
    }
}

impl FromStr for SegmentDimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lf_band" => Ok(SegmentDimension::LfBand),
            "year" => Ok(SegmentDimension::Year),
            "region" => Ok(SegmentDimension::Region),
            other => Err(format!(
                "unknown segment dimension `{other}` (expected lf_band, year, or region)"
            )),
        }
    }
}

fn default_tax_levels() -> Vec<f64> {
    vec![10.0, 15.0, 30.0]
}

fn default_mode() -> PassThroughMode {
    PassThroughMode::LernerCournot
}

fn default_true() -> bool {
    true
}

fn default_dimensions() -> Vec<SegmentDimension> {
    SegmentDimension::ALL.to_vec()
}

fn default_lf_edges() -> Vec<f64> {
    vec![0.0, 0.7, 0.8, 0.9, 1.0]
}

/// Full configuration of one simulation run; mirrors `config.json`
/// field-for-field. Unknown keys in the file are an error, so typos cannot
/// silently fall back to defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Carbon prices to simulate, €/tCO₂; non-negative, strictly increasing.
    #[serde(default = "default_tax_levels")]
    pub tax_levels_eur: Vec<f64>,
    /// Period-average exchange rate, BRL per €. Required: a modelling input
    /// with no sensible default.
    pub fx_brl_per_eur: f64,
    #[serde(default = "default_mode")]
    pub passthrough_mode: PassThroughMode,
    #[serde(default = "default_true")]
    pub use_route_fixed_effects: bool,
    #[serde(default = "default_true")]
    pub robust_se: bool,
    #[serde(default)]
    pub airports_path: Option<PathBuf>,
    #[serde(default)]
    pub panel_path: Option<PathBuf>,
    /// Fuel-burn lookup tables; the built-in tables when absent.
    #[serde(default)]
    pub fuel_tables_path: Option<PathBuf>,
    /// Emission factors; the built-in factors when absent.
    #[serde(default)]
    pub emission_factors_path: Option<PathBuf>,
    #[serde(default = "default_dimensions")]
    pub segment_dimensions: Vec<SegmentDimension>,
    /// Load-factor band edges; must start at 0 and end at 1, strictly
    /// increasing, so the bands partition (0, 1].
    #[serde(default = "default_lf_edges")]
    pub lf_band_edges: Vec<f64>,
}

impl RunConfig {
    /// A config with every defaultable field at its default.
    pub fn with_fx(fx_brl_per_eur: f64) -> Self {
        RunConfig {
            tax_levels_eur: default_tax_levels(),
            fx_brl_per_eur,
            passthrough_mode: default_mode(),
            use_route_fixed_effects: true,
            robust_se: true,
            airports_path: None,
            panel_path: None,
            fuel_tables_path: None,
            emission_factors_path: None,
            segment_dimensions: default_dimensions(),
            lf_band_edges: default_lf_edges(),
        }
    }

    /// Parses a config file, rejecting unknown keys.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::ConfigJson {
                path: path.display().to_string(),
                source: e,
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |message: String| Err(PipelineError::Config { message });

        if self.tax_levels_eur.is_empty() {
            return bad("tax_levels_eur must list at least one rate".to_string());
        }
        for pair in self.tax_levels_eur.windows(2) {
            if !(pair[1] > pair[0]) {
                return bad(format!(
                    "tax_levels_eur must be strictly increasing, got {} then {}",
                    pair[0], pair[1]
                ));
            }
        }
        for &rate in &self.tax_levels_eur {
            if !rate.is_finite() || rate < 0.0 {
                return bad(format!("tax level {rate} must be finite and ≥ 0"));
            }
        }
        if !self.fx_brl_per_eur.is_finite() || self.fx_brl_per_eur <= 0.0 {
            return bad(format!(
                "fx_brl_per_eur {} must be finite and > 0",
                self.fx_brl_per_eur
            ));
        }
        if let PassThroughMode::Fixed(rho) = self.passthrough_mode {
            if !rho.is_finite() || rho < 0.0 {
                return bad(format!(
                    "fixed pass-through rate {rho} must be finite and ≥ 0"
                ));
            }
        }
        for (i, dim) in self.segment_dimensions.iter().enumerate() {
            if self.segment_dimensions[..i].contains(dim) {
                return bad(format!("segment dimension `{dim}` listed twice"));
            }
        }
        let edges = &self.lf_band_edges;
        if edges.len() < 2 {
            return bad("lf_band_edges needs at least two edges".to_string());
        }
        if edges[0] != 0.0 || *edges.last().unwrap() != 1.0 {
            return bad(format!(
                "lf_band_edges must span (0, 1]: first edge must be 0 and last 1, got {} and {}",
                edges[0],
                edges.last().unwrap()
            ));
        }
        for pair in edges.windows(2) {
            if !(pair[1] > pair[0]) {
                return bad(format!(
                    "lf_band_edges must be strictly increasing, got {} then {}",
                    pair[0], pair[1]
                ));
            }
        }
        Ok(())
    }
}

/// Where the demand fit comes from: estimated on the loaded panel, or read
/// from an existing `fit.json`.
#[derive(Debug, Clone)]
pub enum FitSource {
    Estimate,
    Path(PathBuf),
}

/// One row of a segment report: a bucket of route-months and its totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub dimension: SegmentDimension,
    pub bucket: String,
    pub q_before: f64,
    pub q_after: f64,
    pub loss_pax: f64,
    pub loss_fraction: f64,
}

/// A route-month excluded from simulation, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRoute {
    pub route_id: String,
    pub period: Period,
    pub elasticity: f64,
    pub hhi: f64,
    /// `elasticity_not_negative` or `passthrough_undefined`.
    pub reason: String,
}

/// Totals for one tax level, echoed in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTotals {
    pub label: String,
    pub tax_eur_per_tonne: f64,
    pub q_before: f64,
    pub q_after: f64,
    pub loss_pax: f64,
    pub loss_fraction: f64,
    pub files: Vec<String>,
}

/// SHA-256 digests of the run's inputs; `builtin` marks embedded tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigests {
    pub airports: String,
    pub panel: String,
    pub fuel_tables: String,
    pub emission_factors: String,
    /// Digest of the fit file when one was supplied; absent when estimated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<String>,
}

/// The run manifest (`manifest.json`): config echo, input digests, the fit
/// used, skipped routes, per-scenario totals, and the output file list.
/// Contains no timestamps or absolute output paths, so identical inputs
/// reproduce it byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub inputs: InputDigests,
    /// `estimated` or `loaded`.
    pub fit_source: String,
    pub fit: FitSummary,
    pub n_obs: usize,
    pub n_routes: usize,
    pub n_skipped: usize,
    pub skipped: Vec<SkippedRoute>,
    pub scenarios: Vec<ScenarioTotals>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| PipelineError::ConfigJson {
            path: path.display().to_string(),
            source: e,
        })
    }
}

/// What [`run_pipeline`] produced: the manifest plus the absolute paths of
/// every file written.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: Manifest,
    pub written: Vec<PathBuf>,
}

/// Errors surfaced by the pipeline, each carrying file, route, or config
/// context from the failing stage.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Emissions(#[from] EmissionsError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Tax(#[from] TaxError),
    #[error("invalid run config: {message}")]
    Config { message: String },
    #[error("config {path}: {source}")]
    ConfigJson {
        path: String,
        source: serde_json::Error,
    },
    #[error(
        "all {count} route-periods were skipped ({inelastic} with non-negative elasticity, \
         {undefined} with undefined pass-through); no scenario has any route to simulate"
    )]
    AllRoutesSkipped {
        count: usize,
        inelastic: usize,
        undefined: usize,
    },
    #[error("impact row ({route_id}, {period}) has no matching panel row")]
    UnjoinableImpact { route_id: String, period: Period },
    #[error("{path}:{line}: {message}")]
    ImpactsFormat {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit code: 3 for numerical failures (rank deficiency, no
    /// simulable route), 2 for validation and I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::AllRoutesSkipped { .. } => 3,
            PipelineError::Fit(FitError::RankDeficient { .. })
            | PipelineError::Fit(FitError::NonFinite { .. }) => 3,
            _ => 2,
        }
    }
}

/// Why a route-month cannot be simulated under `mode`, if it cannot.
///
/// Skips are rate-independent: they depend only on the route's effective
/// elasticity, its concentration, and the pass-through mode.
pub fn skip_reason(elasticity: f64, hhi: f64, mode: PassThroughMode) -> Option<&'static str> {
    if !elasticity.is_finite() || elasticity >= 0.0 {
        return Some("elasticity_not_negative");
    }
    if matches!(mode, PassThroughMode::LernerCournot) && -elasticity <= hhi {
        return Some("passthrough_undefined");
    }
    None
}

fn digest_label(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

fn read_with_digest(path: &Path) -> Result<(Vec<u8>, String), PipelineError> {
    let bytes = fs::read(path).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let digest = digest_label(&bytes);
    Ok((bytes, digest))
}

fn require_path<'a>(path: &'a Option<PathBuf>, field: &str) -> Result<&'a Path, PipelineError> {
    path.as_deref().ok_or_else(|| PipelineError::Config {
        message: format!("{field} is required (set it in the config or pass the flag)"),
    })
}

/// Runs the whole pipeline and writes its outputs under `out_dir`.
///
/// Output files: one `impacts_<rate>.csv` per tax level, one
/// `segments_<rate>_<dimension>.csv` per tax level and configured dimension,
/// and `manifest.json`. All file contents are staged in memory first: a
/// failure in any stage leaves no partial outputs behind.
pub fn run_pipeline(
    config: &RunConfig,
    fit_source: FitSource,
    out_dir: &Path,
) -> Result<RunSummary, PipelineError> {
    config.validate()?;

    let airports_path = require_path(&config.airports_path, "airports_path")?;
    let panel_path = require_path(&config.panel_path, "panel_path")?;

    let (airport_bytes, airports_digest) = read_with_digest(airports_path)?;
    let airports = parse_airports(airports_path, &airport_bytes)?;
    let (panel_bytes, panel_digest) = read_with_digest(panel_path)?;
    let panel = parse_panel(panel_path, &panel_bytes, &airports, default_sample_window())?;

    let (fuel_tables, fuel_digest) = match &config.fuel_tables_path {
        Some(path) => {
            let (bytes, digest) = read_with_digest(path)?;
            let table = FuelTable::from_json(&String::from_utf8_lossy(&bytes))?;
            (table, digest)
        }
        None => (FuelTable::builtin(), "builtin".to_string()),
    };
    let (factors, factors_digest) = match &config.emission_factors_path {
        Some(path) => {
            let (bytes, digest) = read_with_digest(path)?;
            let factors = EmissionFactors::from_json(&String::from_utf8_lossy(&bytes))?;
            (factors, digest)
        }
        None => (EmissionFactors::builtin(), "builtin".to_string()),
    };

    let windows = DummyWindows::default();
    let (fit, fit_source_label, fit_digest) = match fit_source {
        FitSource::Estimate => {
            let spec = ModelSpec {
                use_route_fixed_effects: config.use_route_fixed_effects,
                robust_se: config.robust_se,
            };
            let result = estimate(&panel, spec, &windows)?;
            (result.summary(), "estimated".to_string(), None)
        }
        FitSource::Path(path) => {
            let (bytes, digest) = read_with_digest(&path)?;
            let summary: FitSummary =
                serde_json::from_slice(&bytes).map_err(|e| PipelineError::ConfigJson {
                    path: path.display().to_string(),
                    source: e,
                })?;
            (summary, "loaded".to_string(), Some(digest))
        }
    };
    let terms = fit.elasticity_terms()?;

    // Per-observation CO₂ and the rate-independent skip set, in the
    // deterministic (route_id, period) output order.
    let order = panel.sorted_indices();
    let obs = panel.observations();
    let mut active: Vec<(&PanelObservation, f64)> = Vec::with_capacity(order.len());
    let mut skipped = Vec::new();
    let (mut inelastic, mut undefined) = (0usize, 0usize);
    for &i in &order {
        let o = &obs[i];
        let elasticity = terms.eval(o.share_business, o.share_other_mode, o.lowcost_present);
        if let Some(reason) = skip_reason(elasticity, o.hhi, config.passthrough_mode) {
            match reason {
                "elasticity_not_negative" => inelastic += 1,
                _ => undefined += 1,
            }
            skipped.push(SkippedRoute {
                route_id: o.route_id.clone(),
                period: o.period,
                elasticity,
                hhi: o.hhi,
                reason: reason.to_string(),
            });
            continue;
        }
        let origin = airports.get(&o.origin).expect("panel airports validated");
        let dest = airports.get(&o.dest).expect("panel airports validated");
        let co2 = route_co2_per_pax_tonnes(
            Coord::new(origin.lat_deg, origin.lon_deg)?,
            Coord::new(dest.lat_deg, dest.lon_deg)?,
            fuel_tables.get(&o.aircraft_class)?,
            o.seats,
            o.load_factor,
            &factors,
        )?;
        active.push((o, co2));
    }
    if active.is_empty() {
        return Err(PipelineError::AllRoutesSkipped {
            count: skipped.len(),
            inelastic,
            undefined,
        });
    }

    // Simulate every tax level and stage the outputs in memory.
    let mut staged: Vec<(String, Vec<u8>)> = Vec::new();
    let mut scenarios = Vec::new();
    for &rate in &config.tax_levels_eur {
        let scenario = TaxScenario::new(&format!("{rate} EUR/t"), rate, config.fx_brl_per_eur)?;
        let mut impacts = Vec::with_capacity(active.len());
        for (o, co2) in &active {
            impacts.push(route_impact(
                o,
                *co2,
                &scenario,
                &terms,
                config.passthrough_mode,
            )?);
        }

        let mut files = Vec::new();
        let impacts_name = format!("impacts_{rate}.csv");
        staged.push((impacts_name.clone(), impacts_to_csv(&impacts)));
        files.push(impacts_name);
        for dim in &config.segment_dimensions {
            let rows = segment_report(&impacts, &panel, *dim, config)?;
            let name = format!("segments_{rate}_{dim}.csv");
            staged.push((name.clone(), segments_to_csv(&rows)));
            files.push(name);
        }

        let q_before: f64 = impacts.iter().map(|r| r.q_before).sum();
        let q_after: f64 = impacts.iter().map(|r| r.q_after).sum();
        let loss_pax: f64 = impacts.iter().map(|r| r.loss_pax).sum();
        scenarios.push(ScenarioTotals {
            label: scenario.label,
            tax_eur_per_tonne: rate,
            q_before,
            q_after,
            loss_pax,
            loss_fraction: loss_pax / q_before,
            files,
        });
    }

    let mut route_ids: Vec<&str> = obs.iter().map(|o| o.route_id.as_str()).collect();
    route_ids.sort_unstable();
    route_ids.dedup();

    let mut outputs: Vec<String> = staged.iter().map(|(name, _)| name.clone()).collect();
    outputs.push("manifest.json".to_string());
    let manifest = Manifest {
        config: config.clone(),
        inputs: InputDigests {
            airports: airports_digest,
            panel: panel_digest,
            fuel_tables: fuel_digest,
            emission_factors: factors_digest,
            fit: fit_digest,
        },
        fit_source: fit_source_label,
        fit,
        n_obs: obs.len(),
        n_routes: route_ids.len(),
        n_skipped: skipped.len(),
        skipped,
        scenarios,
        outputs,
    };
    staged.push(("manifest.json".to_string(), manifest.to_json().into_bytes()));

    // Only now touch the filesystem.
    fs::create_dir_all(out_dir).map_err(|e| PipelineError::Io {
        path: out_dir.display().to_string(),
        source: e,
    })?;
    let mut written = Vec::with_capacity(staged.len());
    for (name, bytes) in &staged {
        let path = out_dir.join(name);
        if let Err(e) = fs::write(&path, bytes) {
            for done in &written {
                let _ = fs::remove_file(done);
            }
            return Err(PipelineError::Io {
                path: path.display().to_string(),
                source: e,
            });
        }
        written.push(path);
    }

    Ok(RunSummary { manifest, written })
}

/// Aggregates impact rows into buckets along one dimension.
///
/// Buckets partition the impact set: load-factor bands are left-open
/// right-closed on the configured edges, years come from the observation
/// period, regions from the destination airport. Rows are ranked by
/// loss_fraction descending; ties break by bucket label ascending.
pub fn segment_report(
    impacts: &[RouteImpact],
    panel: &Panel,
    dimension: SegmentDimension,
    config: &RunConfig,
) -> Result<Vec<SegmentReport>, PipelineError> {
    config.validate()?;
    let by_key: BTreeMap<(&str, Period), &PanelObservation> = panel
        .observations()
        .iter()
        .map(|o| ((o.route_id.as_str(), o.period), o))
        .collect();

    struct Acc {
        q_before: f64,
        q_after: f64,
        loss_pax: f64,
    }
    let mut buckets: BTreeMap<String, Acc> = BTreeMap::new();
    for impact in impacts {
        let obs = by_key
            .get(&(impact.route_id.as_str(), impact.period))
            .ok_or_else(|| PipelineError::UnjoinableImpact {
                route_id: impact.route_id.clone(),
                period: impact.period,
            })?;
        let label = match dimension {
            SegmentDimension::LfBand => lf_band_label(obs.load_factor, &config.lf_band_edges),
            SegmentDimension::Year => obs.period.year().to_string(),
            SegmentDimension::Region => {
                let dest = panel
                    .airports()
                    .get(&obs.dest)
                    .expect("panel airports validated");
                dest.region.to_string()
            }
        };
        let acc = buckets.entry(label).or_insert(Acc {
            q_before: 0.0,
            q_after: 0.0,
            loss_pax: 0.0,
        });
        acc.q_before += impact.q_before;
        acc.q_after += impact.q_after;
        acc.loss_pax += impact.loss_pax;
    }

    let mut rows: Vec<SegmentReport> = buckets
        .into_iter()
        .map(|(bucket, acc)| SegmentReport {
            dimension,
            bucket,
            q_before: acc.q_before,
            q_after: acc.q_after,
            loss_pax: acc.loss_pax,
            loss_fraction: acc.loss_pax / acc.q_before,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.loss_fraction
            .total_cmp(&a.loss_fraction)
            .then_with(|| a.bucket.cmp(&b.bucket))
    });
    Ok(rows)
}

/// The label of the load-factor band containing `lf`: the band
/// `(e_j, e_{j+1}]` with `e_j < lf ≤ e_{j+1}`.
pub fn lf_band_label(lf: f64, edges: &[f64]) -> String {
    let j = edges
        .partition_point(|e| *e < lf)
        .saturating_sub(1)
        .min(edges.len() - 2);
    format!("({},{}]", edges[j], edges[j + 1])
}

/// Serializes impact rows to CSV. Floats print in shortest round-trip form,
/// so equal runs give equal bytes.
pub fn impacts_to_csv(rows: &[RouteImpact]) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(IMPACTS_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.route_id,
            r.period,
            r.tax_per_ticket_brl,
            r.passthrough_rate,
            r.fare_before,
            r.fare_after,
            r.q_before,
            r.q_after,
            r.loss_pax,
            r.loss_fraction
        )
        .expect("writing to a String cannot fail");
    }
    out.into_bytes()
}

/// Serializes segment rows to CSV. Band labels contain commas, so the bucket
/// field is quoted when needed.
pub fn segments_to_csv(rows: &[SegmentReport]) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(SEGMENTS_HEADER);
    out.push('\n');
    for r in rows {
        let bucket = if r.bucket.contains(',') || r.bucket.contains('"') {
            format!("\"{}\"", r.bucket.replace('"', "\"\""))
        } else {
            r.bucket.clone()
        };
        writeln!(
            out,
            "{},{},{},{},{}",
            bucket, r.q_before, r.q_after, r.loss_pax, r.loss_fraction
        )
        .expect("writing to a String cannot fail");
    }
    out.into_bytes()
}

/// Reads an `impacts_<rate>.csv` back into rows (for the report command).
pub fn read_impacts_csv(path: impl AsRef<Path>) -> Result<Vec<RouteImpact>, PipelineError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let display = path.display().to_string();
    let format = |line: u64, message: String| PipelineError::ImpactsFormat {
        path: display.clone(),
        line,
        message,
    };

    let mut reader = csv::ReaderBuilder::new().from_reader(bytes.as_slice());
    let header = reader
        .headers()
        .map_err(|e| format(1, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != IMPACTS_HEADER {
        return Err(format(
            1,
            format!("expected header `{IMPACTS_HEADER}`, got `{header}`"),
        ));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| format(0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 10 {
            return Err(format(
                line,
                format!("expected 10 fields, got {}", record.len()),
            ));
        }
        let field = |idx: usize| record.get(idx).unwrap_or_default();
        let num = |idx: usize, name: &str| -> Result<f64, PipelineError> {
            field(idx)
                .parse::<f64>()
                .map_err(|_| format(line, format!("{name}: `{}` is not a number", field(idx))))
        };
        rows.push(RouteImpact {
            route_id: field(0).to_string(),
            period: field(1)
                .parse::<Period>()
                .map_err(|e| format(line, format!("period: {e}")))?,
            tax_per_ticket_brl: num(2, "tax_per_ticket_brl")?,
            passthrough_rate: num(3, "passthrough_rate")?,
            fare_before: num(4, "fare_before")?,
            fare_after: num(5, "fare_after")?,
            q_before: num(6, "q_before")?,
            q_after: num(7, "q_after")?,
            loss_pax: num(8, "loss_pax")?,
            loss_fraction: num(9, "loss_fraction")?,
        });
    }
    Ok(rows)
}
