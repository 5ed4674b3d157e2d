//! Command-line front end for the carbon-tax scenario toolkit.
//!
//! Subcommands: `emissions` (one route's CO₂ chain), `estimate` (panel →
//! `fit.json`), `simulate` (panel + config → impact and segment files),
//! `report` (recompute a segment table from an impacts file), and `synth`
//! (synthetic panel generator). Exit codes: 0 success, 2 validation or I/O
//! error, 3 numerical error (rank-deficient design, or no simulable route).

use std::fs;
use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};

use aerotax::econ::{estimate, FitSummary, ModelSpec};
use aerotax::emissions::{
    co2_per_pax_tonnes, corrected_distance_km, fuel_burn_kg, great_circle_km, Coord,
    EmissionFactors, FuelTable,
};
use aerotax::engine::{
    read_impacts_csv, run_pipeline, segment_report, segments_to_csv, FitSource, PipelineError,
    RunConfig, SegmentDimension,
};
use aerotax::market::{
    default_sample_window, generate_synthetic_panel, load_airports, load_panel, write_airports,
    write_panel, DgpParams, DummyWindows,
};
use aerotax::tax::PassThroughMode;

#[derive(Parser)]
#[command(
    name = "aerotax",
    about = "Demand-side carbon-tax scenarios for domestic aviation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one route's distance, fuel burn, and CO₂ per passenger.
    Emissions(EmissionsArgs),
    /// Estimate the demand model from a panel and write `fit.json`.
    Estimate(EstimateArgs),
    /// Run tax scenarios end to end and write impact and segment files.
    Simulate(SimulateArgs),
    /// Recompute one segment table from a previously written impacts file.
    Report(ReportArgs),
    /// Generate a synthetic panel from the documented data-generating process.
    Synth(SynthArgs),
}

#[derive(Args)]
struct EmissionsArgs {
    /// Airports CSV (code,lat_deg,lon_deg,region).
    #[arg(long)]
    airports: PathBuf,
    /// Origin airport code.
    #[arg(long)]
    origin: String,
    /// Destination airport code.
    #[arg(long)]
    dest: String,
    /// Aircraft class named in the fuel tables (e.g. narrow, wide).
    #[arg(long)]
    class: String,
    #[arg(long)]
    seats: u32,
    /// Load factor in (0, 1].
    #[arg(long)]
    load_factor: f64,
    /// Fuel-burn tables JSON; built-in tables when omitted.
    #[arg(long)]
    fuel_tables: Option<PathBuf>,
    /// Emission factors JSON; built-in factors when omitted.
    #[arg(long)]
    emission_factors: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Panel CSV.
    #[arg(long)]
    panel: PathBuf,
    /// Airports CSV.
    #[arg(long)]
    airports: PathBuf,
    /// Absorb route fixed effects (on) or fit pooled with intercept (off).
    #[arg(long, default_value = "on", value_parser = parse_on_off, action = ArgAction::Set)]
    fixed_effects: bool,
    /// Heteroskedasticity-robust (HC1) standard errors on|off.
    #[arg(long, default_value = "on", value_parser = parse_on_off, action = ArgAction::Set)]
    robust: bool,
    /// Where to write the fit summary.
    #[arg(long, default_value = "fit.json")]
    fit: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Run configuration JSON; unknown keys are an error.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's panel path.
    #[arg(long)]
    panel: Option<PathBuf>,
    /// Override the config's airports path.
    #[arg(long)]
    airports: Option<PathBuf>,
    /// Reuse an existing fit summary instead of re-estimating.
    #[arg(long)]
    fit: Option<PathBuf>,
    /// Output directory for impact files, segment files, and the manifest.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Override the pass-through mode: lerner, full, or fixed:<rho>.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<PassThroughMode>,
    /// Override the fixed-effects flag.
    #[arg(long, value_parser = parse_on_off)]
    fixed_effects: Option<bool>,
    /// Override the robust-SE flag.
    #[arg(long, value_parser = parse_on_off)]
    robust: Option<bool>,
}

#[derive(Args)]
struct ReportArgs {
    /// An impacts_<rate>.csv written by `simulate`.
    #[arg(long)]
    impacts: PathBuf,
    /// Panel CSV the impacts were simulated from.
    #[arg(long)]
    panel: PathBuf,
    /// Airports CSV.
    #[arg(long)]
    airports: PathBuf,
    /// Segment dimension: lf_band, year, or region.
    #[arg(long, value_parser = parse_dimension)]
    dimension: SegmentDimension,
    /// Run configuration, read only for the load-factor band edges;
    /// the default edges when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of directed routes.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    routes: u32,
    /// Number of consecutive months starting 2003-01.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    periods: u32,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the baseline noise standard deviation.
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Coefficient file (dgp.json); the baseline pattern when omitted.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Output directory for airports.csv, panel.csv, and dgp.json.
    #[arg(long, default_value = "synth")]
    out_dir: PathBuf,
}

fn parse_on_off(s: &str) -> Result<bool, String> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("expected on or off, got `{other}`")),
    }
}

fn parse_mode(s: &str) -> Result<PassThroughMode, String> {
    s.parse()
}

fn parse_dimension(s: &str) -> Result<SegmentDimension, String> {
    s.parse()
}

/// Restores the default SIGPIPE disposition so `aerotax ... | head` dies
/// quietly like any other pipeline member instead of panicking on a closed
/// stdout. Rust's runtime ignores SIGPIPE, which suits servers, not CLIs.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() {
    reset_sigpipe();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Emissions(args) => run_emissions(args),
        Command::Estimate(args) => run_estimate(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Report(args) => run_report(args),
        Command::Synth(args) => run_synth(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn config_err(message: String) -> PipelineError {
    PipelineError::Config { message }
}

fn run_emissions(args: EmissionsArgs) -> Result<(), PipelineError> {
    let airports = load_airports(&args.airports)?;
    let lookup = |code: &str| {
        airports.get(code).ok_or_else(|| {
            config_err(format!(
                "airport `{code}` not in {}",
                args.airports.display()
            ))
        })
    };
    let origin = lookup(&args.origin)?;
    let dest = lookup(&args.dest)?;
    let tables = match &args.fuel_tables {
        Some(path) => FuelTable::load(path)?,
        None => FuelTable::builtin(),
    };
    let factors = match &args.emission_factors {
        Some(path) => EmissionFactors::load(path)?,
        None => EmissionFactors::builtin(),
    };
    let profile = tables.get(&args.class)?;

    let gcd = great_circle_km(
        Coord::new(origin.lat_deg, origin.lon_deg)?,
        Coord::new(dest.lat_deg, dest.lon_deg)?,
    );
    let corrected = corrected_distance_km(gcd, &factors);
    let fuel = fuel_burn_kg(profile, corrected)?;
    let co2 = co2_per_pax_tonnes(fuel, profile, args.seats, args.load_factor, &factors)?;

    println!("route: {} -> {}", origin.code, dest.code);
    println!("great_circle_km: {gcd:.3}");
    println!("corrected_km: {corrected:.3}");
    println!("fuel_kg: {fuel:.3}");
    println!("co2_per_pax_tonnes: {co2:.6}");
    Ok(())
}

fn run_estimate(args: EstimateArgs) -> Result<(), PipelineError> {
    let airports = load_airports(&args.airports)?;
    let panel = load_panel(&args.panel, &airports, default_sample_window())?;
    let spec = ModelSpec {
        use_route_fixed_effects: args.fixed_effects,
        robust_se: args.robust,
    };
    let fit = estimate(&panel, spec, &DummyWindows::default())?;
    let summary = fit.summary();
    summary.save(&args.fit)?;
    print_summary(&summary);
    println!("fit written to {}", args.fit.display());
    Ok(())
}

fn print_summary(summary: &FitSummary) {
    println!(
        "{} observations, fixed effects {}, {} standard errors, R² {:.4}",
        summary.n_obs,
        if summary.use_route_fixed_effects {
            "on"
        } else {
            "off"
        },
        if summary.robust_se {
            "HC1"
        } else {
            "classical"
        },
        summary.r_squared
    );
    println!(
        "{:<30} {:>12} {:>12} {:>9}",
        "coefficient", "estimate", "std error", "t"
    );
    for (name, coef) in &summary.coefficients {
        let se = summary.std_errors.get(name).copied().unwrap_or(f64::NAN);
        let t = if se > 0.0 { coef / se } else { f64::NAN };
        println!("{name:<30} {coef:>12.6} {se:>12.6} {t:>9.2}");
    }
}

fn run_simulate(args: SimulateArgs) -> Result<(), PipelineError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(panel) = args.panel {
        config.panel_path = Some(panel);
    }
    if let Some(airports) = args.airports {
        config.airports_path = Some(airports);
    }
    if let Some(mode) = args.mode {
        config.passthrough_mode = mode;
    }
    if let Some(fe) = args.fixed_effects {
        config.use_route_fixed_effects = fe;
    }
    if let Some(robust) = args.robust {
        config.robust_se = robust;
    }

    let fit_source = match args.fit {
        Some(path) => FitSource::Path(path),
        None => FitSource::Estimate,
    };
    let summary = run_pipeline(&config, fit_source, &args.out_dir)?;
    let manifest = &summary.manifest;
    println!(
        "{} observations, {} routes, {} skipped ({} files written to {})",
        manifest.n_obs,
        manifest.n_routes,
        manifest.n_skipped,
        summary.written.len(),
        args.out_dir.display()
    );
    for scenario in &manifest.scenarios {
        println!(
            "{:>10}: loss {:.4}% of {:.0} pax",
            scenario.label,
            scenario.loss_fraction * 100.0,
            scenario.q_before
        );
    }
    Ok(())
}

fn run_report(args: ReportArgs) -> Result<(), PipelineError> {
    let airports = load_airports(&args.airports)?;
    let panel = load_panel(&args.panel, &airports, default_sample_window())?;
    let impacts = read_impacts_csv(&args.impacts)?;
    let config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        // Only the lf band edges matter here; the fx placeholder is unused.
        None => RunConfig::with_fx(1.0),
    };
    let rows = segment_report(&impacts, &panel, args.dimension, &config)?;
    print!(
        "{}",
        String::from_utf8(segments_to_csv(&rows)).expect("segment CSV is UTF-8")
    );
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<(), PipelineError> {
    let mut params = match &args.params {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| PipelineError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            serde_json::from_str::<DgpParams>(&text).map_err(|e| PipelineError::ConfigJson {
                path: path.display().to_string(),
                source: e,
            })?
        }
        None => DgpParams::baseline(),
    };
    params.seed = args.seed;
    if let Some(noise_sd) = args.noise_sd {
        params.noise_sd = noise_sd;
    }
    params.validate().map_err(config_err)?;

    let panel = generate_synthetic_panel(&params, args.routes as usize, args.periods as usize);
    fs::create_dir_all(&args.out_dir).map_err(|e| PipelineError::Io {
        path: args.out_dir.display().to_string(),
        source: e,
    })?;
    write_airports(panel.airports(), args.out_dir.join("airports.csv"))?;
    write_panel(&panel, args.out_dir.join("panel.csv"))?;
    let mut dgp_json = serde_json::to_string_pretty(&params).expect("params serialize");
    dgp_json.push('\n');
    let dgp_path = args.out_dir.join("dgp.json");
    fs::write(&dgp_path, dgp_json).map_err(|e| PipelineError::Io {
        path: dgp_path.display().to_string(),
        source: e,
    })?;

    println!(
        "{} observations ({} routes x {} months, seed {}) written to {}",
        panel.len(),
        args.routes,
        args.periods,
        args.seed,
        args.out_dir.display()
    );
    Ok(())
}
