//! `cfl-lab`: command-line front end of the stability laboratory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use cfl_lab::catalog::{self, builtin, BUILTIN_NAMES};
use cfl_lab::scheme_algebra::{analyze, SchemeKind, SchemeSpec, DEFAULT_GROWTH_RATE};
use cfl_lab::scheme_constructor::{ab_tangency, build_modified_ab, build_rk_chain, build_taylor_chain};
use cfl_lab::spectral_burgers::{self as burgers, BurgersConfig};
use cfl_lab::stability_domain::{fit_tangency, render_svg, trace_boundary, Overlay};
use cfl_lab::transport_models::{
    combined_exponent, parse_stencils, reduce_system, sample_directions, stencil_symbol, stencil_tangency, Reduction,
    Stencil, SystemSpec, TangencyOrder, DEFAULT_DIRECTIONS,
};
use cfl_lab::Error;

#[derive(Parser, Debug)]
#[command(name = "cfl-lab", version, about = "Stability laboratory for explicit time integrators")]
struct Cli {
    /// Output directory (overridden by CFL_LAB_OUT).
    #[arg(long, global = true, default_value = "cfl-lab-out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Amplification factor, energy coefficients, order and CFL prediction.
    Analyze {
        /// Built-in scheme names or scheme catalog files.
        #[arg(required = true)]
        schemes: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_GROWTH_RATE)]
        growth_rate: f64,
    },
    /// Synthesize optimized schemes.
    Construct {
        #[command(subcommand)]
        family: Family,
    },
    /// Trace von Neumann stability domains.
    Domain {
        #[arg(long, value_delimiter = ',', required = true)]
        scheme: Vec<String>,
        #[arg(long, default_value_t = 1024)]
        n_points: usize,
        /// Stencil symbols overlaid as `label:nu` (scaled by ν = δt/δx).
        #[arg(long, value_delimiter = ',')]
        overlay: Vec<String>,
    },
    /// Maximal stable time steps of the Burgers experiment.
    BurgersSweep {
        /// Comma separated built-in names or catalog files.
        #[arg(long, value_delimiter = ',')]
        scheme: Vec<String>,
        #[command(flatten)]
        sweep: SweepArgs,
        /// Write profile snapshots at these multiples of dt_max on the largest grid.
        #[arg(long, value_delimiter = ',')]
        snapshot_factors: Vec<f64>,
    },
    /// Finite-difference symbols, combined exponents and system reduction.
    Transport {
        /// Built-in stencil labels.
        #[arg(long, value_delimiter = ',')]
        stencil: Vec<String>,
        /// Stencil catalog file.
        #[arg(long)]
        stencil_file: Option<PathBuf>,
        /// Tangency half-order of the time scheme.
        #[arg(long, default_value_t = 2)]
        q: u32,
        #[arg(long, default_value_t = 512)]
        n_points: usize,
        /// System matrices, one per dimension, rows separated by `;`, e.g. `0,1;1,0`.
        #[arg(long)]
        system: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_DIRECTIONS)]
        directions: usize,
    },
    /// Summary table of the built-in catalog.
    Report,
}

#[derive(Subcommand, Debug)]
enum Family {
    /// Shrinking-CFL Runge-Kutta chain with m stages.
    Chain { m: usize },
    /// Order-p chain with s stages and maximal tangency.
    Taylor { p: usize, s: usize },
    /// Modified Adams-Bashforth scheme with K+1 steps.
    Ab { k: usize },
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Smallest grid (power of two, default 16).
    #[arg(long)]
    n_min: Option<usize>,
    /// Largest grid (power of two, default 1024).
    #[arg(long)]
    n_max: Option<usize>,
    /// Final time T (default 1).
    #[arg(long)]
    time_horizon: Option<f64>,
    /// Divergence threshold on total variation relative to the initial one (default 1.1).
    #[arg(long)]
    k_tv: Option<f64>,
    /// Fraction of the half spectrum kept after each product (default 2/3).
    #[arg(long)]
    dealias: Option<f64>,
    /// Relative width of the final dt_max bracket (default 0.005).
    #[arg(long)]
    tolerance: Option<f64>,
    /// Worker threads; schemes are swept in parallel.
    #[arg(long)]
    jobs: Option<usize>,
    /// `key = value` file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Failure carrying its exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Input(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } => Failure::Input(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let out_dir = std::env::var_os("CFL_LAB_OUT").map(PathBuf::from).unwrap_or(cli.out_dir);
    match run(cli.command, &out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command, out: &Path) -> CmdResult {
    fs::create_dir_all(out).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", out.display())))?;
    match command {
        Command::Analyze { schemes, growth_rate } => cmd_analyze(&schemes, growth_rate, out),
        Command::Construct { family } => cmd_construct(family, out),
        Command::Domain {
            scheme,
            n_points,
            overlay,
        } => cmd_domain(&scheme, n_points, &overlay, out),
        Command::BurgersSweep {
            scheme,
            sweep,
            snapshot_factors,
        } => cmd_sweep(&scheme, &sweep, &snapshot_factors, out),
        Command::Transport {
            stencil,
            stencil_file,
            q,
            n_points,
            system,
            directions,
        } => cmd_transport(&stencil, stencil_file.as_deref(), q, n_points, &system, directions, out),
        Command::Report => cmd_report(out),
    }
}

fn write(path: PathBuf, text: &str) -> CmdResult {
    fs::write(&path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// A built-in name or a catalog file with one or more schemes.
fn resolve_schemes(arg: &str) -> std::result::Result<Vec<SchemeSpec>, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {arg}: {e}")))?;
        return catalog::parse_catalog(&text).map_err(|e| Failure::Input(format!("{arg}: {e}")));
    }
    builtin(arg).map(|s| vec![s]).map_err(|e| match e {
        Error::InvalidScheme(m) => Failure::Usage(m),
        other => other.into(),
    })
}

fn resolve_all(args: &[String]) -> std::result::Result<Vec<SchemeSpec>, Failure> {
    if args.is_empty() {
        return Err(Failure::Usage("no scheme given".into()));
    }
    let mut out = Vec::new();
    for a in args {
        out.extend(resolve_schemes(a)?);
    }
    Ok(out)
}

fn analysis_text(scheme: &SchemeSpec, growth_rate: f64) -> std::result::Result<(String, String), Failure> {
    let a = analyze(scheme, growth_rate, 24)?;
    let p = &a.prediction;
    let mut text = String::new();
    let mut csv = String::from("scheme,index,beta,energy\n");
    let _ = writeln!(text, "scheme: {} ({})", scheme.name, scheme.kind.label());
    let shown = match &scheme.kind {
        SchemeKind::AdamsBashforth { alphas } => 2 * alphas.len() + 1,
        _ => a.amplification.degree(),
    }
    .min(12);
    let betas: Vec<String> = a.amplification.betas.iter().take(shown + 1).map(|b| format!("{b:.12}")).collect();
    let _ = writeln!(text, "beta: {}", betas.join(", "));
    for l in 1..p.energy_coeffs.len().min(shown / 2 + 2) {
        let _ = writeln!(text, "S_{l} = {:.12e}", p.energy_coeffs[l]);
    }
    if let SchemeKind::AdamsBashforth { alphas } = &scheme.kind {
        if let Ok(t) = ab_tangency(alphas, 2 * alphas.len() + 2) {
            for (j, v) in t.iter().enumerate().skip(1).step_by(2) {
                let _ = writeln!(text, "T_{} = {v:.12e}", j + 1);
            }
        }
    }
    let _ = writeln!(
        text,
        "order: {}{}",
        a.order.order,
        if a.order.linear_only { " (linear problems)" } else { "" }
    );
    let _ = writeln!(text, "regime: {}", p.regime.label());
    match (p.exponent, p.constant_factor) {
        (Some(e), Some(c)) => {
            let _ = writeln!(text, "exponent: {e}");
            let _ = writeln!(text, "constant: {c:.6} (growth rate C = {growth_rate})");
        }
        _ => {
            let _ = writeln!(text, "exponent: 1");
        }
    }
    for (l, b) in a.amplification.betas.iter().enumerate() {
        let s = p.energy_coeffs.get(l).copied().unwrap_or(0.0);
        let _ = writeln!(csv, "{},{l},{b:.17e},{s:.17e}", scheme.name);
    }
    Ok((text, csv))
}

fn cmd_analyze(args: &[String], growth_rate: f64, out: &Path) -> CmdResult {
    for scheme in resolve_all(args)? {
        let (text, csv) = analysis_text(&scheme, growth_rate)?;
        print!("{text}");
        println!();
        write(out.join(format!("analyze_{}.csv", file_stem(&scheme.name))), &csv)?;
    }
    Ok(())
}

fn cmd_construct(family: Family, out: &Path) -> CmdResult {
    let built = match family {
        Family::Chain { m } => build_rk_chain(m)?,
        Family::Taylor { p, s } => build_taylor_chain(p, s)?,
        Family::Ab { k } => build_modified_ab(k)?,
    };
    let cert = built.certificate();
    print!("{cert}");
    write(out.join(format!("{}.scheme", file_stem(&built.scheme.name))), &cert)
}

fn parse_overlay(spec: &str) -> std::result::Result<Overlay, Failure> {
    let (label, nu) = spec.split_once(':').unwrap_or((spec, "1"));
    let nu: f64 = nu
        .parse()
        .map_err(|_| Failure::Usage(format!("overlay `{spec}` needs `label:nu`")))?;
    let stencil = if label == "spectral" {
        None
    } else {
        Some(Stencil::builtin(label).map_err(|e| Failure::Usage(e.to_string()))?)
    };
    let curve = match &stencil {
        Some(s) => stencil_symbol(s, 256),
        None => cfl_lab::transport_models::spectral_symbol(256),
    };
    Ok(Overlay {
        label: format!("{label} (nu = {nu})"),
        points: curve.scaled(nu),
    })
}

/// Resolution of the trace used for the tangency fit.
const FIT_POINTS: usize = 1024;

fn cmd_domain(args: &[String], n_points: usize, overlays: &[String], out: &Path) -> CmdResult {
    let schemes = resolve_all(args)?;
    let overlays = overlays.iter().map(|o| parse_overlay(o)).collect::<std::result::Result<Vec<_>, _>>()?;
    let mut boundaries = Vec::new();
    for scheme in &schemes {
        let boundary = trace_boundary(scheme, n_points)?;
        write(out.join(format!("domain_{}.csv", file_stem(&scheme.name))), &boundary.to_csv())?;
        let fine;
        let fit_source = if n_points >= FIT_POINTS {
            &boundary
        } else {
            fine = trace_boundary(scheme, FIT_POINTS)?;
            &fine
        };
        let summary = match fit_tangency(fit_source) {
            Ok(fit) => {
                let side = if fit.coefficient > 0.0 { "right tangency" } else { "left tangency" };
                format!(
                    "r = {}, T_{} = {:.9e} ({side}, relative residual {:.1e})",
                    fit.r,
                    2 * fit.r,
                    fit.coefficient,
                    fit.relative_residual
                )
            }
            Err(e) => format!("no tangency fit: {e}"),
        };
        println!("{}: {} branch(es); {summary}", scheme.name, boundary.branches.len());
        boundaries.push(boundary);
    }
    write(out.join("domain.svg"), &render_svg(&boundaries, &overlays))
}

fn sweep_config(args: &SweepArgs) -> std::result::Result<BurgersConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
            BurgersConfig::parse(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?
        }
        None => BurgersConfig::default(),
    };
    if args.n_min.is_some() || args.n_max.is_some() {
        let lo = args.n_min.unwrap_or(cfg.n_list[0]);
        let hi = args.n_max.unwrap_or(*cfg.n_list.last().expect("nonempty ladder"));
        cfg.n_list = burgers::parse_n_list(&format!("{lo}..{hi}"))
            .ok_or_else(|| Failure::Usage(format!("bad n range {lo}..{hi}")))?;
    }
    if let Some(t) = args.time_horizon {
        cfg.t_final = t;
    }
    if let Some(k) = args.k_tv {
        cfg.k_tv = k;
    }
    if let Some(d) = args.dealias {
        cfg.dealias_fraction = d;
    }
    if let Some(t) = args.tolerance {
        cfg.tolerance = t;
    }
    if let Some(j) = args.jobs {
        cfg.jobs = j;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn cmd_sweep(args: &[String], sweep: &SweepArgs, factors: &[f64], out: &Path) -> CmdResult {
    let schemes = resolve_all(args)?;
    let cfg = sweep_config(sweep)?;
    let results = burgers::sweep_all(&schemes, &cfg);
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (scheme, result) in schemes.iter().zip(results) {
        match result {
            Ok(r) => {
                println!(
                    "{}: fitted slope {:.4} (predicted {:.4}) over n = {}..{}",
                    r.scheme, r.fitted_slope, -r.predicted_exponent, r.fit_window.0, r.fit_window.1
                );
                write(out.join(format!("sweep_{}.csv", file_stem(&r.scheme))), &r.to_csv())?;
                if let Some(last) = r.rows.last() {
                    for &f in factors {
                        let u0 = burgers::initial_condition(last.n)?;
                        let outcome = burgers::run_with(&u0, f * last.dt_max, scheme, &cfg)?;
                        let state = burgers::GridState {
                            n: last.n,
                            values: outcome.final_state,
                            time: cfg.t_final,
                        };
                        write(
                            out.join(format!("snapshot_{}_{:.3}.csv", file_stem(&r.scheme), f)),
                            &state.to_csv(),
                        )?;
                    }
                }
                ok.push(r);
            }
            Err(e) => {
                eprintln!("{}: {e}", scheme.name);
                failed.push(scheme.name.clone());
            }
        }
    }
    write(out.join("sweep.svg"), &burgers::render_sweep_svg(&ok))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("sweep failed for {}", failed.join(", "))))
    }
}

fn parse_matrix(text: &str) -> std::result::Result<DMatrix<f64>, Failure> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| catalog::parse_number(v.trim()).ok_or_else(|| Failure::Input(format!("bad matrix entry `{v}`"))))
                .collect()
        })
        .collect::<std::result::Result<_, _>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Failure::Input(format!("matrix `{text}` is not square")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn cmd_transport(
    labels: &[String],
    file: Option<&Path>,
    q: u32,
    n_points: usize,
    systems: &[String],
    directions: usize,
    out: &Path,
) -> CmdResult {
    let mut stencils = labels
        .iter()
        .map(|l| Stencil::builtin(l).map_err(|e| Failure::Usage(e.to_string())))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
        stencils.extend(parse_stencils(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?);
    }
    if stencils.is_empty() && systems.is_empty() {
        return Err(Failure::Usage("give --stencil, --stencil-file or --system".into()));
    }
    for s in &stencils {
        let curve = stencil_symbol(s, n_points);
        write(out.join(format!("symbol_{}.csv", file_stem(&s.label))), &curve.to_csv())?;
        let t = stencil_tangency(s);
        let p = match t.p {
            TangencyOrder::Finite(p) => p.to_string(),
            TangencyOrder::Infinite => "infinity".into(),
        };
        let combined = match combined_exponent(t.p, t.coefficient, q) {
            Ok(e) => format!("combined exponent with q = {q}: {e}"),
            Err(e) => e.to_string(),
        };
        println!("{}: p = {p}, V = {:.12e}; {combined}", s.label, t.coefficient);
    }
    if !systems.is_empty() {
        let mats = systems.iter().map(|s| parse_matrix(s)).collect::<std::result::Result<Vec<_>, _>>()?;
        let system = SystemSpec::new(mats).map_err(|e| Failure::Input(e.to_string()))?;
        let dirs = sample_directions(system.dimension(), directions)?;
        match reduce_system(&system, &dirs)? {
            Reduction::Hyperbolic { a_eff } => println!("system: a_eff = {a_eff:.12}"),
            Reduction::JordanBlock { direction, a_eff } => println!(
                "system: a_eff = {a_eff:.12}; warning: Jordan block along {direction:?}, coupling acts as a source term"
            ),
        }
    }
    Ok(())
}

fn cmd_report(out: &Path) -> CmdResult {
    let mut csv = String::from("scheme,kind,order,regime,exponent,constant\n");
    println!("{:<18} {:<18} {:>5} {:<15} {:>8} {:>10}", "scheme", "kind", "order", "regime", "exponent", "constant");
    for name in BUILTIN_NAMES {
        let scheme = builtin(name)?;
        let a = analyze(&scheme, DEFAULT_GROWTH_RATE, 24)?;
        let exponent = a.prediction.exponent.map_or("1".to_string(), |e| e.to_string());
        let constant = a.prediction.constant_factor.map_or(String::new(), |c| format!("{c:.6}"));
        println!(
            "{:<18} {:<18} {:>5} {:<15} {:>8} {:>10}",
            name,
            scheme.kind.label(),
            a.order.order,
            a.prediction.regime.label(),
            exponent,
            constant
        );
        let _ = writeln!(
            csv,
            "{name},{},{},{},{exponent},{constant}",
            scheme.kind.label(),
            a.order.order,
            a.prediction.regime.label()
        );
    }
    write(out.join("report.csv"), &csv)
}
