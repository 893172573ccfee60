//! Command-line surface: stencil inspection, B-spline calibration,
//! quasi-interpolation convergence studies, Fourier-Gegenbauer coefficient
//! tables and degenerate radii, sphere fits, and ball approximations.
//! Tabular results go to CSV, structured artifacts to JSON (always with the
//! run configuration embedded); failures print a JSON error record to
//! stderr and exit nonzero.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use polyapprox::ball::{build_ball_approximant, BallControls, BallError};
use polyapprox::bspline::{BsplineError, CalibrateOptions, CalibrationStore};
use polyapprox::config::{ConfigError, RunConfig, TestFunction};
use polyapprox::gegenbauer::{
    coeff_numeric, degenerate_radii, fundamentality_report, GegenbauerError, QuadratureOptions,
    ReportOptions,
};
use polyapprox::kernels::{KernelError, KernelSpec};
use polyapprox::quasi::{convergence_study, QuasiError};
use polyapprox::sphere::{check_fundamental, fit_sphere, SphereError};
use polyapprox::stencil::build_stencil;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Kernel(#[from] KernelError),
    #[error("{0}")]
    Bspline(#[from] BsplineError),
    #[error("{0}")]
    Gegenbauer(#[from] GegenbauerError),
    #[error("{0}")]
    Quasi(#[from] QuasiError),
    #[error("{0}")]
    Sphere(#[from] SphereError),
    #[error("{0}")]
    Ball(#[from] BallError),
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Parser)]
#[command(
    name = "polyapprox",
    version,
    about = "Polyharmonic spline approximation toolkit"
)]
struct Cli {
    /// JSON run-config file (tolerances, seed, cache path).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SpecArgs {
    /// Spatial dimension d.
    #[arg(long)]
    d: u32,
    /// Polyharmonic order k (requires 2k > d).
    #[arg(long)]
    k: u32,
    /// Scale radius rho of the rescaled kernel family.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
}

impl SpecArgs {
    fn spec(&self) -> Result<KernelSpec, CliError> {
        Ok(KernelSpec::with_rho(self.d, self.k, self.rho)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the k-fold discrete Laplacian stencil as JSON.
    Stencil {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        k: u32,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate the (d, k) B-spline constants and print them.
    Calibrate {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        k: u32,
        /// Override the calibration tail tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quasi-interpolation experiments.
    Quasi {
        #[command(subcommand)]
        cmd: QuasiCommand,
    },
    /// Fourier-Gegenbauer analysis of the restricted kernel.
    Geg {
        #[command(subcommand)]
        cmd: GegCommand,
    },
    /// Zonal fits on the unit sphere.
    Sphere {
        #[command(subcommand)]
        cmd: SphereCommand,
    },
    /// Two-stage approximation on the closed unit ball.
    Ball {
        #[command(subcommand)]
        cmd: BallCommand,
    },
}

#[derive(Subcommand)]
enum QuasiCommand {
    /// Sup-error table of s_h over a grid for a list of spacings.
    Converge {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        k: u32,
        /// Comma-separated spacings, e.g. 0.2,0.1,0.05.
        #[arg(long = "h-list")]
        h_list: String,
        /// Named test function (constant, gaussian_bump, poly_cos, zonal_single).
        #[arg(long)]
        function: String,
        /// Sample box radius for the target function.
        #[arg(long, default_value_t = 3.5)]
        support: f64,
        /// Test points per axis over [-grid-half, grid-half]^d.
        #[arg(long, default_value_t = 41)]
        grid: usize,
        #[arg(long = "grid-half", default_value_t = 1.0)]
        grid_half: f64,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum GegCommand {
    /// Coefficient table with zero flags.
    Coeffs {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 10)]
        jmax: u32,
        /// "report" for the standard table, "both" to add an independent
        /// quadrature column for every degree.
        #[arg(long, default_value = "report")]
        method: String,
        /// CSV output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Degenerate radii of the rescaled family, with exact tau values.
    Degenerate {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        k: u32,
    },
}

#[derive(Subcommand)]
enum SphereCommand {
    /// Fit a named function on S^(d-1) by zonal translates.
    Fit {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        centers: usize,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        function: String,
        /// Tikhonov damping; default 1e-10 relative to the largest entry.
        #[arg(long)]
        regularization: Option<f64>,
        /// Verify fundamentality (nonzero coefficients) before fitting.
        #[arg(long, default_value_t = false)]
        check_fundamental: bool,
        /// JSON output path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum BallCommand {
    /// Build the two-stage approximant on the closed unit ball.
    Approx {
        #[command(flatten)]
        spec: SpecArgs,
        /// Sup-error target.
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        function: String,
        /// JSON artifact (centers, coefficients, diagnostics).
        #[arg(long)]
        out: PathBuf,
        /// CSV with per-stage budgets and measured errors.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}

/// Cache path precedence: config file, then POLYAPPROX_CACHE, then a local
/// default file.
fn cache_path(config: &RunConfig) -> PathBuf {
    if let Some(p) = &config.cache_path {
        return PathBuf::from(p);
    }
    if let Ok(p) = std::env::var("POLYAPPROX_CACHE") {
        if !p.is_empty() {
            return PathBuf::from(p);
        }
    }
    PathBuf::from("polyapprox_cache.json")
}

fn open_store(config: &RunConfig, tol_override: Option<f64>) -> Result<CalibrationStore, CliError> {
    let opts = CalibrateOptions {
        tol: tol_override.unwrap_or(config.calibration_tol),
        seed: config.seed,
        ..CalibrateOptions::default()
    };
    Ok(CalibrationStore::with_options(
        Some(cache_path(config)),
        opts,
    )?)
}

fn parse_function(name: &str) -> Result<TestFunction, CliError> {
    Ok(name.parse::<TestFunction>()?)
}

fn report_options(config: &RunConfig) -> ReportOptions {
    ReportOptions {
        zero_threshold: config.zero_threshold,
        quadrature: QuadratureOptions {
            tol: config.quadrature_tol,
            ..QuadratureOptions::default()
        },
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    match cli.command {
        Command::Stencil { d, k, out } => {
            if d == 0 || k == 0 {
                return Err(CliError::InvalidArgument(
                    "stencil requires d >= 1 and k >= 1".into(),
                ));
            }
            let stencil = build_stencil(d as usize, k);
            let doc = json!({
                "config": config,
                "d": d,
                "k": k,
                "support_radius_l1": stencil.support_radius_l1(),
                "coefficients": stencil.to_key_map(),
            });
            emit(out.as_deref(), &serde_json::to_string_pretty(&doc).unwrap())
        }
        Command::Calibrate { d, k, tol, out } => {
            let store = open_store(&config, tol)?;
            let cal = store.get_or_calibrate(d, k)?;
            let doc = json!({ "config": config, "calibration": *cal });
            emit(out.as_deref(), &serde_json::to_string_pretty(&doc).unwrap())
        }
        Command::Quasi {
            cmd:
                QuasiCommand::Converge {
                    d,
                    k,
                    h_list,
                    function,
                    support,
                    grid,
                    grid_half,
                    out,
                },
        } => {
            let spec = KernelSpec::new(d, k)?;
            let f = parse_function(&function)?.build(&spec);
            let hs: Vec<f64> = h_list
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| CliError::InvalidArgument(format!("bad h '{s}': {e}")))
                })
                .collect::<Result<_, _>>()?;
            if hs.iter().any(|h| !(*h > 0.0)) {
                return Err(CliError::InvalidArgument(
                    "spacings must be positive".into(),
                ));
            }
            if grid < 2 {
                return Err(CliError::InvalidArgument(
                    "grid needs at least 2 points".into(),
                ));
            }
            let store = open_store(&config, None)?;
            let bspline = store.bspline(d, k)?;
            let mut points: Vec<Vec<f64>> = vec![Vec::new()];
            for _ in 0..d {
                let mut next = Vec::new();
                for p in &points {
                    for i in 0..grid {
                        let mut q = p.clone();
                        q.push(-grid_half + 2.0 * grid_half * i as f64 / (grid - 1) as f64);
                        next.push(q);
                    }
                }
                points = next;
            }
            let rows = convergence_study(|x| f(x), &bspline, &hs, support, &points)?;
            let mut csv = String::from("h,sup_error\n");
            for (h, e) in &rows {
                csv.push_str(&format!("{h},{e}\n"));
                println!("h = {h}: sup error {e}");
            }
            write_text(&out, &csv)
        }
        Command::Geg { cmd } => match cmd {
            GegCommand::Coeffs {
                spec,
                jmax,
                method,
                out,
            } => {
                let spec = spec.spec()?;
                let opts = report_options(&config);
                let report = fundamentality_report(&spec, jmax, &opts)?;
                let csv = match method.as_str() {
                    "report" => {
                        let mut csv = String::from("j,value,method,zero\n");
                        for e in &report.entries {
                            csv.push_str(&format!(
                                "{},{},{},{}\n",
                                e.j,
                                e.value,
                                match e.method {
                                    polyapprox::gegenbauer::CoeffMethod::ClosedForm =>
                                        "closed_form",
                                    polyapprox::gegenbauer::CoeffMethod::Quadrature => "quadrature",
                                },
                                e.zero
                            ));
                        }
                        csv
                    }
                    "both" => {
                        let mut csv = String::from("j,value,method,quadrature,difference,zero\n");
                        for e in &report.entries {
                            let q = coeff_numeric(
                                |t| spec.eval_psi_scaled(t).expect("node in range"),
                                e.j,
                                spec.lambda(),
                                &opts.quadrature,
                            )?;
                            csv.push_str(&format!(
                                "{},{},{},{},{},{}\n",
                                e.j,
                                e.value,
                                match e.method {
                                    polyapprox::gegenbauer::CoeffMethod::ClosedForm =>
                                        "closed_form",
                                    polyapprox::gegenbauer::CoeffMethod::Quadrature => "quadrature",
                                },
                                q.value,
                                (e.value - q.value).abs(),
                                e.zero
                            ));
                        }
                        csv
                    }
                    other => {
                        return Err(CliError::InvalidArgument(format!(
                            "unknown method '{other}'; use report or both"
                        )))
                    }
                };
                emit(out.as_deref(), &csv)
            }
            GegCommand::Degenerate { d, k } => {
                let radii = degenerate_radii(d, k)?;
                println!("j,tau,rho");
                for r in &radii {
                    println!("{},{},{}", r.j, r.tau_string(), r.rho);
                }
                if radii.is_empty() {
                    log::info!("odd dimension: the family is homogeneous, no degenerate radii");
                }
                Ok(())
            }
        },
        Command::Sphere {
            cmd:
                SphereCommand::Fit {
                    spec,
                    centers,
                    samples,
                    function,
                    regularization,
                    check_fundamental: check,
                    out,
                },
        } => {
            let spec = spec.spec()?;
            if check {
                check_fundamental(&spec, 10)?;
            }
            let f = parse_function(&function)?.build(&spec);
            let lambda =
                regularization.unwrap_or_else(|| polyapprox::sphere::default_regularization(&spec));
            let fit = fit_sphere(|x| f(x), &spec, centers, samples, lambda)?;
            println!(
                "centers = {}, residual_sup = {}",
                fit.len(),
                fit.residual_sup
            );
            let doc = json!({ "config": config, "spec": spec, "fit": fit });
            write_text(&out, &serde_json::to_string_pretty(&doc).unwrap())
        }
        Command::Ball {
            cmd:
                BallCommand::Approx {
                    spec,
                    eps,
                    function,
                    out,
                    report,
                },
        } => {
            let spec = spec.spec()?;
            let f = parse_function(&function)?.build(&spec);
            let store = open_store(&config, None)?;
            let controls = BallControls::default();
            let appr = build_ball_approximant(|x| f(x), &spec, eps, &store, &controls)?;
            let diag = &appr.diagnostics;
            println!(
                "delta = {}, h = {}, centers = {}, measured sup error = {}",
                appr.delta, appr.h, diag.center_count, diag.measured_sup_error
            );
            if let Some(report_path) = report {
                let m = diag.m_hat;
                let mut csv = String::from("stage,budget,measured\n");
                csv.push_str(&format!(
                    "boundary_residual,{},{}\n",
                    eps / (4.0 * m),
                    diag.sphere_residual_sup
                ));
                csv.push_str(&format!(
                    "collar_bound,{},{}\n",
                    eps / (2.0 * m),
                    diag.annulus_bound
                ));
                csv.push_str(&format!("interior,{},{}\n", eps / 2.0, diag.interior_error));
                csv.push_str(&format!("total,{eps},{}\n", diag.measured_sup_error));
                write_text(&report_path, &csv)?;
            }
            let doc = json!({ "config": config, "approximant": appr });
            write_text(&out, &serde_json::to_string_pretty(&doc).unwrap())
        }
    }
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        let record = json!({ "error": e.to_string() });
        eprintln!("{record}");
        std::process::exit(1);
    }
}
