//! `lorenz-scb`: Lorenz curves, confidence bands and coverage experiments
//! from the command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lorenz_scb::band::{band_geometry, build_band, pcb_critical, BandGeometry};
use lorenz_scb::design::{derive_seed, draw_srswor};
use lorenz_scb::popdata::{gini, load_population, population_lorenz};
use lorenz_scb::simharness::{
    check_points, report_to_table, run_experiment, trim_curve, worst_g, ExperimentSpec, TableFormat,
};
use lorenz_scb::svg::{band_svg, curve_svg};
use lorenz_scb::{BandKind, BandOptions, CurvePoint, Error, ErrorClass};

const THREADS_ENV: &str = "LORENZ_SCB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "lorenz-scb",
    version,
    about = "Lorenz curve confidence bands under SRSWOR"
)]
struct Cli {
    /// Seed for every random draw (sampling and Monte Carlo).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Pcb,
    Scb,
}

impl From<KindArg> for BandKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Pcb => BandKind::Pcb,
            KindArg::Scb => BandKind::Scb,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Population Lorenz curve and Gini index of a CSV income column.
    Lorenz {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "income")]
        column: String,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Draw one sample and build a point-wise or simultaneous band.
    Band {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "income")]
        column: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "scb")]
        kind: KindArg,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Fraction of the population curve dropped at each end when
        /// checking and drawing it.
        #[arg(long, default_value_t = 0.025)]
        trim: f64,
        /// Grid nodes per segment for ellipses and containment.
        #[arg(long, default_value_t = 16)]
        grid_per_segment: usize,
        /// Interior quadrature nodes per segment for the Davies constant.
        #[arg(long, default_value_t = 8)]
        c_grid: usize,
        #[arg(long, default_value_t = 1000)]
        mc_draws: usize,
        /// Vertices per ellipse polygon.
        #[arg(long, default_value_t = 48)]
        resolution: usize,
        /// Overlay the trimmed population curve in SVG output.
        #[arg(long)]
        show_population: bool,
    },
    /// Run a coverage experiment described by a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// JSON report path; the CSV table is written next to it.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the config's trim fraction.
        #[arg(long)]
        trim: Option<f64>,
    },
}

#[derive(Debug)]
struct Failure {
    class: ErrorClass,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            class: ErrorClass::Usage,
            message: message.into(),
        }
    }

    fn context(stage: &str) -> impl FnOnce(Error) -> Failure + '_ {
        move |e| Failure {
            class: e.class(),
            message: format!("{stage}: {e}"),
        }
    }

    fn exit_code(&self) -> u8 {
        match self.class {
            ErrorClass::Usage => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(f) = configure_threads() {
        eprintln!("error: {}", f.message);
        return ExitCode::from(f.exit_code());
    }
    let result = match cli.command {
        Command::Lorenz {
            input,
            column,
            output,
            format,
        } => cmd_lorenz(&input, &column, output.as_deref(), format),
        Command::Band {
            input,
            column,
            n,
            alpha,
            kind,
            output,
            format,
            trim,
            grid_per_segment,
            c_grid,
            mc_draws,
            resolution,
            show_population,
        } => cmd_band(BandArgs {
            input,
            column,
            n,
            alpha,
            kind: kind.into(),
            seed: cli.seed.unwrap_or(0),
            output,
            format,
            trim,
            opts: BandOptions {
                c_grid,
                contains_grid: grid_per_segment,
                mc_draws,
            },
            resolution,
            show_population,
        }),
        Command::Simulate {
            config,
            output,
            trim,
        } => cmd_simulate(&config, output.as_deref(), trim, cli.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.exit_code())
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize =
        raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
            Failure::usage(format!("{THREADS_ENV}={raw} is not a positive integer"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::usage(format!("thread pool: {e}")))
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| Failure {
            class: ErrorClass::Data,
            message: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Failure::context("json")(e.into()))
}

#[derive(Serialize)]
struct LorenzOutput<'a> {
    population_size: usize,
    gini: f64,
    points: &'a [CurvePoint],
}

fn cmd_lorenz(
    input: &Path,
    column: &str,
    output: Option<&Path>,
    format: Format,
) -> Result<(), Failure> {
    let pop =
        load_population(input, column).map_err(Failure::context(&input.display().to_string()))?;
    let curve = population_lorenz(&pop);
    let text = match format {
        Format::Json => to_json(&LorenzOutput {
            population_size: pop.size(),
            gini: gini(&curve),
            points: &curve.points,
        })?,
        Format::Csv => {
            let mut s = String::from("p,q\n");
            for pt in &curve.points {
                s.push_str(&format!("{},{}\n", pt.p, pt.q));
            }
            s
        }
        Format::Svg => curve_svg(&curve),
    };
    emit(output, &text)
}

struct BandArgs {
    input: PathBuf,
    column: String,
    n: usize,
    alpha: f64,
    kind: BandKind,
    seed: u64,
    output: Option<PathBuf>,
    format: Format,
    trim: f64,
    opts: BandOptions,
    resolution: usize,
    show_population: bool,
}

#[derive(Serialize)]
struct BandOutput<'a> {
    kind: BandKind,
    alpha: f64,
    critical: f64,
    d_alpha: f64,
    davies_c: f64,
    davies_c_std_error: f64,
    seed: u64,
    n: usize,
    population_size: usize,
    trim: f64,
    population_covered: bool,
    estimate: &'a [CurvePoint],
    geometry: &'a BandGeometry,
}

fn cmd_band(args: BandArgs) -> Result<(), Failure> {
    if args.format == Format::Csv {
        return Err(Failure::usage("band output supports --format json or svg"));
    }
    let pop = load_population(&args.input, &args.column)
        .map_err(Failure::context(&args.input.display().to_string()))?;
    if args.n < 3 || args.n > pop.size() {
        return Err(Failure::usage(format!(
            "--n {} outside [3, {}]",
            args.n,
            pop.size()
        )));
    }
    let sample = draw_srswor(&pop, args.n, derive_seed(args.seed, &[0]))
        .map_err(Failure::context("sampling"))?;
    // the Davies constant is reported for both kinds
    let fit = build_band(
        &sample,
        BandKind::Scb,
        args.alpha,
        &args.opts,
        derive_seed(args.seed, &[1]),
    )
    .map_err(Failure::context("band"))?;
    let d_alpha = pcb_critical(args.alpha).map_err(Failure::context("critical value"))?;
    let band = match args.kind {
        BandKind::Scb => fit.band,
        BandKind::Pcb => fit
            .band
            .with_critical(BandKind::Pcb, d_alpha)
            .map_err(Failure::context("band"))?,
    };
    let davies = fit.davies.expect("SCB fit carries its Davies constant");

    let target =
        trim_curve(&population_lorenz(&pop), args.trim).map_err(Failure::context("trim"))?;
    let covered = worst_g(&band, &check_points(&target, 5000)) < band.critical;
    let geometry = band_geometry(&band, args.resolution).map_err(Failure::context("geometry"))?;

    let text = match args.format {
        Format::Svg => band_svg(
            &geometry,
            &band.est.points[..band.est.n() - 1],
            args.show_population.then_some(&target),
        ),
        _ => to_json(&BandOutput {
            kind: band.kind,
            alpha: args.alpha,
            critical: band.critical,
            d_alpha,
            davies_c: davies.value,
            davies_c_std_error: davies.std_error,
            seed: args.seed,
            n: args.n,
            population_size: pop.size(),
            trim: args.trim,
            population_covered: covered,
            estimate: &band.est.points,
            geometry: &geometry,
        })?,
    };
    emit(args.output.as_deref(), &text)
}

fn cmd_simulate(
    config: &Path,
    output: Option<&Path>,
    trim: Option<f64>,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let text = fs::read_to_string(config).map_err(|e| Failure {
        class: ErrorClass::Data,
        message: format!("cannot read {}: {e}", config.display()),
    })?;
    let mut spec = ExperimentSpec::from_json(&text).map_err(Failure::context("config"))?;
    if let Some(trim) = trim {
        spec.trim = trim;
    }
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let report = run_experiment(&spec).map_err(Failure::context("simulate"))?;
    print!("{}", report_to_table(&report, TableFormat::Text));
    if let Some(path) = output {
        emit(Some(path), &to_json(&report)?)?;
        emit(
            Some(&path.with_extension("csv")),
            &report_to_table(&report, TableFormat::Csv),
        )?;
    }
    Ok(())
}
