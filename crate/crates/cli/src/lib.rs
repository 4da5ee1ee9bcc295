//! `phonolab` subcommands: `simulate`, `fit` and `derive`.
//!
//! Every command returns a [`CommandOutcome`]; files are written through a
//! temporary file in the target directory and renamed into place, so a
//! failing command leaves no partial output.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use phonolab::dataio::{
    emit_plot, load_config_file, read_grid, read_series, CrossCheck, Dataset, FitReport, NoiseModel, PlotStyle,
    ProtocolConfig, RunConfig,
};
use phonolab::dispersive::{
    avoided_crossing_branches, chi_shift, master_equation_fwhm, pure_dephasing_time, total_decoherence_rate,
};
use phonolab::estimation::{
    fit_lorentzian, fit_ramsey, fit_ring_up_ring_down, FitResult, OptimizeOptions, ParamSpec, RamseyFit, RingUpFit,
};
use phonolab::protocols::{simulate_ramsey, simulate_ring_up_ring_down, simulate_spectroscopy, SeriesKind};
use phonolab::units::{format_hz, format_seconds, parse_si};
use phonolab::Error;

pub const THREADS_ENV: &str = "PHONOLAB_THREADS";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutcome {
    /// 0 success, 1 user error, 2 numerical failure.
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

impl CommandOutcome {
    fn ok(artifacts: Vec<PathBuf>, summary: String) -> Self {
        Self {
            exit_code: 0,
            artifacts,
            summary,
        }
    }

    fn failure(err: &Error) -> Self {
        Self {
            exit_code: exit_code(err),
            artifacts: Vec::new(),
            summary: format!("error: {err}\n"),
        }
    }
}

/// 2 for failures of the numerics, 1 for everything the user can fix.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Stiffness { .. }
        | Error::IntegrationAccuracy(_)
        | Error::InvalidDensity(_)
        | Error::Verification(_)
        | Error::BoundViolation(_) => 2,
        _ => 1,
    }
}

#[derive(Debug, Parser)]
#[command(name = "phonolab", version, about = "Simulate and fit a driven, lossy, dephasing bosonic mode")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProtocolArg {
    Ringupdown,
    Ramsey,
    Spectroscopy,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the protocol in a config file and write CSV data.
    Simulate {
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Also write an SVG figure next to the CSV.
        #[arg(long)]
        plot: bool,
        /// Override the noise seed of the config.
        #[arg(long)]
        noise_seed: Option<u64>,
    },
    /// Fit CSV data and write a JSON report.
    Fit {
        data: PathBuf,
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Hold a parameter fixed, e.g. `kappa_phi=0` or `U=4.35M`.
        #[arg(long = "fix", value_name = "NAME=VALUE")]
        fix: Vec<String>,
        /// Data schema and model; defaults to the config's protocol.
        #[arg(long, value_enum)]
        protocol: Option<ProtocolArg>,
        /// Spectroscopic FWHM (Hz) for the linewidth cross-check.
        #[arg(long, allow_hyphen_values = true)]
        spec_fwhm: Option<String>,
        /// Skip the density-matrix verification of time-domain fits.
        #[arg(long)]
        no_verify: bool,
    },
    /// Print a derived device quantity; values in Hz or s with SI suffixes.
    Derive {
        #[command(subcommand)]
        quantity: Derive,
    },
}

#[derive(Debug, Subcommand)]
enum Derive {
    /// Dispersive shift per quantum `2 chi` from `g`, `Delta = omega_q - omega_m`, `alpha`.
    Chi {
        #[arg(allow_hyphen_values = true)]
        g: String,
        #[arg(allow_hyphen_values = true)]
        delta: String,
        #[arg(allow_hyphen_values = true)]
        alpha: String,
    },
    /// Pure dephasing time from `T1` and `T2`.
    Tphi {
        #[arg(allow_hyphen_values = true)]
        t1: String,
        #[arg(allow_hyphen_values = true)]
        t2: String,
    },
    /// Total decoherence rate from `kappa1` and `kappa_phi`.
    Kappa {
        #[arg(allow_hyphen_values = true)]
        kappa1: String,
        #[arg(allow_hyphen_values = true)]
        kappa_phi: String,
    },
    /// Dressed qubit-mode branches from `omega_q`, `omega_m` and `g`.
    AvoidedCrossing {
        #[arg(allow_hyphen_values = true)]
        omega_q: String,
        #[arg(allow_hyphen_values = true)]
        omega_m: String,
        #[arg(allow_hyphen_values = true)]
        g: String,
    },
}

/// Caps the global rayon pool from `PHONOLAB_THREADS` (0 or unset: automatic).
/// Returns a warning when the variable cannot be used.
pub fn configure_threads() -> Option<String> {
    let value = std::env::var(THREADS_ENV).ok()?;
    let n: usize = match value.trim().parse() {
        Ok(n) => n,
        Err(_) => return Some(format!("ignoring {THREADS_ENV}={value}: not a non-negative integer")),
    };
    if n == 0 {
        return None;
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .err()
        .map(|e| format!("could not apply {THREADS_ENV}: {e}"))
}

pub fn run<I, T>(args: I) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let exit_code = if e.use_stderr() { 1 } else { 0 };
            return CommandOutcome {
                exit_code,
                artifacts: Vec::new(),
                summary: e.render().to_string(),
            };
        }
    };
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            plot,
            noise_seed,
        } => cmd_simulate(&config, &out, plot, noise_seed),
        Command::Fit {
            data,
            config,
            out,
            fix,
            protocol,
            spec_fwhm,
            no_verify,
        } => cmd_fit(&data, &config, &out, &fix, protocol, spec_fwhm.as_deref(), !no_verify),
        Command::Derive { quantity } => cmd_derive(&quantity),
    };
    result.unwrap_or_else(|e| CommandOutcome::failure(&e))
}

/// Writes all files or none: contents go to temporaries first and are
/// renamed into place only once every temporary is complete.
fn write_atomic(files: &[(&Path, &[u8])]) -> phonolab::Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        staged.push((tmp, *path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    }
    Ok(())
}

fn load(config: &Path) -> phonolab::Result<(RunConfig, Vec<String>)> {
    let cfg = load_config_file(config).map_err(|e| match e {
        Error::Io(io) => Error::Config {
            path: config.display().to_string(),
            message: io.to_string(),
        },
        other => other,
    })?;
    let warnings = cfg.validate()?;
    Ok((cfg, warnings))
}

fn cmd_simulate(config: &Path, out: &Path, plot: bool, noise_seed: Option<u64>) -> phonolab::Result<CommandOutcome> {
    let (cfg, warnings) = load(config)?;
    let settings = cfg.solver.settings();
    let u = cfg.protocol.drive().angular(&cfg.device)?;
    let t_d = cfg.protocol.t_d();
    let (data, dim, stats) = match &cfg.protocol {
        ProtocolConfig::Ringupdown { times, .. } => {
            let r = simulate_ring_up_ring_down(&cfg.device, u, t_d, &times.values(), &settings)?;
            (Dataset::Series(r.output), r.dim, r.stats)
        }
        ProtocolConfig::Ramsey {
            taus, phis, phi0, mode, ..
        } => {
            let r = simulate_ramsey(&cfg.device, u, t_d, &taus.values(), &phis.values(), *phi0, *mode, &settings)?;
            (Dataset::Grid(r.output), r.dim, r.stats)
        }
        ProtocolConfig::Spectroscopy { deltas, .. } => {
            let r = simulate_spectroscopy(&cfg.device, u, t_d, &deltas.values(), &settings)?;
            (Dataset::Series(r.output), r.dim, r.stats)
        }
    };
    let noise = NoiseModel {
        seed: noise_seed.unwrap_or(cfg.noise.seed),
        ..cfg.noise
    };
    let data = if noise.is_silent() { data } else { data.with_noise(&noise) };

    let mut csv = Vec::new();
    data.write_csv(&mut csv)?;
    let svg_path = out.with_extension("svg");
    let svg = if plot {
        let mut style = match &data {
            Dataset::Series(s) => PlotStyle::for_series(s),
            Dataset::Grid(_) => PlotStyle::for_grid(),
        };
        if let ProtocolConfig::Ringupdown { .. } = cfg.protocol {
            style.break_at = Some(t_d);
        }
        Some(emit_plot(&data, &style)?)
    } else {
        None
    };
    let mut files: Vec<(&Path, &[u8])> = vec![(out, &csv)];
    if let Some(svg) = &svg {
        files.push((&svg_path, svg.as_bytes()));
    }
    write_atomic(&files)?;

    let mut summary = String::new();
    for w in &warnings {
        let _ = writeln!(summary, "warning: {w}");
    }
    let _ = writeln!(summary, "protocol: {}", cfg.protocol.name());
    let _ = writeln!(summary, "points: {}", data.len());
    let _ = writeln!(summary, "drive U: {:.6e} rad/s", u);
    let _ = writeln!(summary, "truncation dim: {dim}");
    let _ = writeln!(
        summary,
        "solver steps: {} accepted, {} rejected, {} rhs evaluations",
        stats.accepted, stats.rejected, stats.rhs_evals
    );
    if !noise.is_silent() {
        let _ = writeln!(
            summary,
            "noise: sigma_abs {}, sigma_rel {}, seed {}",
            noise.sigma_abs, noise.sigma_rel, noise.seed
        );
    }
    let mut artifacts = vec![out.to_path_buf()];
    if svg.is_some() {
        artifacts.push(svg_path);
    }
    for a in &artifacts {
        let _ = writeln!(summary, "wrote {}", a.display());
    }
    Ok(CommandOutcome::ok(artifacts, summary))
}

fn parse_fixes(fixes: &[String]) -> phonolab::Result<Vec<(String, f64)>> {
    fixes
        .iter()
        .map(|f| {
            let (name, value) = f.split_once('=').ok_or_else(|| Error::InvalidParameter {
                name: "fix",
                reason: format!("`{f}` is not NAME=VALUE"),
            })?;
            let name = name.trim();
            if !matches!(name, "U" | "kappa1" | "kappa_phi" | "phi0") {
                return Err(Error::InvalidParameter {
                    name: "fix",
                    reason: format!("unknown parameter `{name}` (expected U, kappa1, kappa_phi or phi0)"),
                });
            }
            Ok((name.to_string(), parse_si(value)?))
        })
        .collect()
}

fn spec(fixes: &[(String, f64)], name: &str, init: f64, fixed_by_default: bool) -> ParamSpec {
    match fixes.iter().rev().find(|(n, _)| n == name) {
        Some((_, v)) => ParamSpec::fixed(*v),
        None if fixed_by_default => ParamSpec::fixed(init),
        None => ParamSpec::free(init),
    }
}

fn protocol_of(cfg: &RunConfig) -> ProtocolArg {
    match cfg.protocol {
        ProtocolConfig::Ringupdown { .. } => ProtocolArg::Ringupdown,
        ProtocolConfig::Ramsey { .. } => ProtocolArg::Ramsey,
        ProtocolConfig::Spectroscopy { .. } => ProtocolArg::Spectroscopy,
    }
}

fn param_table(fit: &FitResult, units: &std::collections::BTreeMap<String, String>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<10} {:>16} {:>14}  unit", "parameter", "value", "sigma");
    for (name, v) in &fit.params {
        let sigma = fit
            .sigmas
            .get(name)
            .map_or("n/a".to_string(), |x| format!("{x:.4e}"));
        let _ = writeln!(s, "{name:<10} {v:>16.6e} {sigma:>14}  {}", units[name]);
    }
    for (name, v) in &fit.fixed {
        let _ = writeln!(s, "{name:<10} {v:>16.6e} {:>14}  {}", "fixed", units[name]);
    }
    s
}

fn cmd_fit(
    data: &Path,
    config: &Path,
    out: &Path,
    fixes: &[String],
    protocol: Option<ProtocolArg>,
    spec_fwhm: Option<&str>,
    verify: bool,
) -> phonolab::Result<CommandOutcome> {
    let (cfg, mut warnings) = load(config)?;
    let fixes = parse_fixes(fixes)?;
    let spec_fwhm = spec_fwhm.map(parse_si).transpose()?;
    let protocol = protocol.unwrap_or_else(|| protocol_of(&cfg));
    let file = std::fs::File::open(data).map_err(|e| Error::Config {
        path: data.display().to_string(),
        message: e.to_string(),
    })?;
    let reader = std::io::BufReader::new(file);
    let u0 = cfg.protocol.drive().angular(&cfg.device)?;
    let t_d = cfg.protocol.t_d();
    let k1 = cfg.device.kappa1;
    let kphi = cfg.device.kappa_phi;
    let options = OptimizeOptions::default();

    let (name, fit) = match protocol {
        ProtocolArg::Ringupdown => {
            let series = read_series(reader, SeriesKind::RingUpRingDown)?;
            let setup = RingUpFit {
                t_d,
                u: spec(&fixes, "U", u0, false),
                kappa1: spec(&fixes, "kappa1", k1, false),
                kappa_phi: spec(&fixes, "kappa_phi", 0.0, true),
                verify,
                options,
            };
            ("ringupdown", fit_ring_up_ring_down(&series, &setup)?)
        }
        ProtocolArg::Ramsey => {
            let grid = read_grid(reader)?;
            let (phi0, mode) = match &cfg.protocol {
                ProtocolConfig::Ramsey { phi0, mode, .. } => (*phi0, *mode),
                _ => (0.0, Default::default()),
            };
            let kphi0 = if kphi > 0.0 { kphi } else { 0.25 * k1 };
            let setup = RamseyFit {
                t_d,
                u: spec(&fixes, "U", u0, false),
                kappa1: spec(&fixes, "kappa1", k1, false),
                kappa_phi: spec(&fixes, "kappa_phi", kphi0, false),
                phi0: spec(&fixes, "phi0", phi0, false),
                mode,
                verify,
                options,
            };
            ("ramsey", fit_ramsey(&grid, &setup)?)
        }
        ProtocolArg::Spectroscopy => {
            let series = read_series(reader, SeriesKind::Spectroscopy)?;
            ("spectroscopy", fit_lorentzian(&series, &options)?)
        }
    };
    warnings.extend(fit.warnings.iter().cloned());
    let converged = fit.converged;
    let mut report = FitReport::new(name, fit);
    report.cross_check = match protocol {
        ProtocolArg::Spectroscopy => Some(CrossCheck::new(k1, kphi, report.fit.param("fwhm"))),
        _ => {
            let k1 = report.fit.param("kappa1").unwrap_or(k1);
            let kp = report.fit.param("kappa_phi").unwrap_or(kphi);
            Some(CrossCheck::new(k1, kp, spec_fwhm))
        }
    };
    let json = report.to_json()?;
    write_atomic(&[(out, json.as_bytes())])?;

    let mut summary = String::new();
    for w in &warnings {
        let _ = writeln!(summary, "warning: {w}");
    }
    let _ = writeln!(summary, "protocol: {name}");
    summary += &param_table(&report.fit, &report.units);
    let _ = writeln!(
        summary,
        "residual norm {:.4e}, reduced chi2 {:.4}, {} evaluations, converged: {}",
        report.fit.residual_norm,
        report.fit.reduced_chi2(),
        report.fit.n_evaluations,
        converged
    );
    if let Some(c) = &report.cross_check {
        let _ = writeln!(summary, "cross-check: {}", c.summary());
    }
    let _ = writeln!(summary, "wrote {}", out.display());
    Ok(CommandOutcome {
        exit_code: if converged { 0 } else { 2 },
        artifacts: vec![out.to_path_buf()],
        summary,
    })
}

fn cmd_derive(quantity: &Derive) -> phonolab::Result<CommandOutcome> {
    let mut s = String::new();
    match quantity {
        Derive::Chi { g, delta, alpha } => {
            let (g, delta, alpha) = (parse_si(g)?, parse_si(delta)?, parse_si(alpha)?);
            let two_chi = chi_shift(g, delta, alpha)?;
            let _ = writeln!(
                s,
                "g = {}, Delta = {}, alpha = {}",
                format_hz(g),
                format_hz(delta),
                format_hz(alpha)
            );
            let _ = writeln!(s, "2chi = {} ({:.3} MHz)", format_hz(two_chi), two_chi / 1e6);
        }
        Derive::Tphi { t1, t2 } => {
            let (t1, t2) = (parse_si(t1)?, parse_si(t2)?);
            let tphi = pure_dephasing_time(t1, t2)?;
            let _ = writeln!(s, "T1 = {}, T2 = {}", format_seconds(t1), format_seconds(t2));
            let _ = writeln!(s, "T_phi = {} ({:.2} us)", format_seconds(tphi), tphi * 1e6);
        }
        Derive::Kappa { kappa1, kappa_phi } => {
            let (k1, kp) = (parse_si(kappa1)?, parse_si(kappa_phi)?);
            if !(k1 >= 0.0 && kp >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "kappa",
                    reason: "rates must be >= 0".into(),
                });
            }
            let _ = writeln!(s, "kappa1 = {}, kappa_phi = {}", format_hz(k1), format_hz(kp));
            let _ = writeln!(s, "kappa = kappa1/2 + kappa_phi = {}", format_hz(total_decoherence_rate(k1, kp)));
            let _ = writeln!(
                s,
                "master-equation FWHM kappa1 + kappa_phi/2 = {}",
                format_hz(master_equation_fwhm(k1, kp))
            );
        }
        Derive::AvoidedCrossing { omega_q, omega_m, g } => {
            let (wq, wm, g) = (parse_si(omega_q)?, parse_si(omega_m)?, parse_si(g)?);
            let (up, lo) = avoided_crossing_branches(wq, wm, g)?;
            let _ = writeln!(s, "omega_q = {}, omega_m = {}, g = {}", format_hz(wq), format_hz(wm), format_hz(g));
            let _ = writeln!(s, "upper branch = {}", format_hz(up));
            let _ = writeln!(s, "lower branch = {}", format_hz(lo));
            let _ = writeln!(s, "splitting = {}", format_hz(up - lo));
            let _ = writeln!(s, "minimum splitting 2g = {}", format_hz(2.0 * g));
        }
    }
    Ok(CommandOutcome::ok(Vec::new(), s))
}
