//! Command-line front end.
//!
//! Each subcommand writes its outputs and a `manifest.json` into the output
//! directory. Failures exit with a code naming the stage:
//!
//! | code | stage                                   |
//! |------|-----------------------------------------|
//! | 2    | input or configuration validation       |
//! | 3    | eigenvalue computation                  |
//! | 4    | traces                                  |
//! | 5    | reconstruction                          |
//! | 6    | orbit search                            |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::billiards::{named_orbits, search_periodic_orbits, shortest_orbit_check, SearchOptions};
use crate::config::{RunConfig, Tolerances};
use crate::fem::{
    compute_spectrum, rectangle_double_spectrum, rectangle_exact_spectrum, BoundaryCondition, EigenOptions,
    EigenRequest, RichardsonPair, SpectrumData,
};
use crate::geometry::{forward_invariants, InvariantSet, TrapezoidSpec};
use crate::inverse::{
    end_to_end_reconstruct, reconstruct_from_invariants, staged_heat_fit, PlanThresholds, ReconstructOptions,
    Recovered,
};
use crate::io::{
    read_eigenvalues, read_trapezoid, write_eigenvalues, write_json, write_orbits_jsonl, write_scan_csv,
    write_transform_csv, Manifest,
};
use crate::traces::{
    compare_dn_at, detect_peaks, estimate_order, fit_heat_invariants, geometric_grid, heat_trace, max_complete_k,
    spectral_union_check, wave_scan, wave_transform, PeakOptions, SpectralMeasure,
};
use crate::{Error, Result};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_EIGS: i32 = 3;
pub const EXIT_TRACES: i32 = 4;
pub const EXIT_RECONSTRUCT: i32 = 5;
pub const EXIT_ORBITS: i32 = 6;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "TRAPEZOID_SPECTRA_OUT";

#[derive(Debug, Parser)]
#[command(name = "trapezoid-spectra", version, about = "Spectral invariants of planar trapezoids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "trapezoid-spectra-out")]
    pub out: PathBuf,

    /// RunConfig JSON; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form invariants of a trapezoid.
    Invariants(TrapezoidArgs),
    /// Laplace eigenvalues by FEM, or exactly for rectangles.
    Eigs(EigsArgs),
    /// Heat and wave trace analyses of eigenvalue lists.
    Traces {
        #[command(subcommand)]
        mode: TraceMode,
    },
    /// Recover a trapezoid from a Neumann spectrum or an invariant set.
    Reconstruct(ReconstructArgs),
    /// Named periodic orbits, a shooting search and the shortest-orbit check.
    Orbits(OrbitArgs),
}

#[derive(Debug, Args)]
pub struct TrapezoidArgs {
    /// Trapezoid JSON `{"b", "h", "alpha", "beta"}`.
    #[arg(long)]
    pub input: PathBuf,
    /// Angles in the input are degrees.
    #[arg(long)]
    pub degrees: bool,
}

#[derive(Debug, Args)]
pub struct EigsArgs {
    #[command(flatten)]
    pub trapezoid: TrapezoidArgs,
    #[arg(long, default_value = "neumann")]
    pub bc: BoundaryCondition,
    #[arg(long)]
    pub mesh_n: Option<usize>,
    /// Number of eigenvalues; all below --lambda-max when absent.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// Also solve on the doubled mesh and write the extrapolated list.
    #[arg(long)]
    pub richardson: bool,
    /// Exact rectangle spectrum instead of FEM.
    #[arg(long, conflicts_with = "richardson")]
    pub exact: bool,
    /// With --exact: spectrum of the doubled rectangle.
    #[arg(long, requires = "exact")]
    pub double: bool,
}

/// An eigenvalue list, optionally paired with its coarse-mesh partner.
#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Eigenvalue CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Coarse-mesh CSV; the pair is used as a Richardson measure.
    #[arg(long)]
    pub coarse: Option<PathBuf>,
    /// Boundary condition of a CSV without sidecar.
    #[arg(long)]
    pub bc: Option<BoundaryCondition>,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    #[arg(long)]
    pub width: Option<f64>,
    /// `k_min:k_max:k_step`.
    #[arg(long, value_parser = parse_k_range)]
    pub k_range: Option<(f64, f64, f64)>,
}

#[derive(Debug, Subcommand)]
pub enum TraceMode {
    /// Heat trace and the fitted area, perimeter and corner sum.
    Heat {
        #[command(flatten)]
        spectrum: SpectrumArgs,
        /// `t_min:t_max:points`; chosen from the spectrum when absent.
        #[arg(long, value_parser = parse_t_grid)]
        t_grid: Option<(f64, f64, usize)>,
    },
    /// `|W(t0)|` over a range of `t0`, and the detected peaks.
    WaveScan {
        #[command(flatten)]
        spectrum: SpectrumArgs,
        #[command(flatten)]
        window: WindowArgs,
        /// `t_min:t_max`.
        #[arg(long, value_parser = parse_pair)]
        t_scan: Option<(f64, f64)>,
    },
    /// Transform at one `t0` and its power-law order in `k`.
    WaveOrder {
        #[command(flatten)]
        spectrum: SpectrumArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long)]
        t0: Option<f64>,
    },
    /// `|W_N| / |W_D|` at one `t0`.
    DnCompare {
        #[arg(long)]
        neumann: PathBuf,
        #[arg(long)]
        neumann_coarse: Option<PathBuf>,
        #[arg(long)]
        dirichlet: PathBuf,
        #[arg(long)]
        dirichlet_coarse: Option<PathBuf>,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long)]
        t0: Option<f64>,
    },
    /// Checks that the Dirichlet and Neumann spectra together form the spectrum of the double.
    UnionCheck {
        #[arg(long)]
        dirichlet: PathBuf,
        #[arg(long)]
        neumann: PathBuf,
        #[arg(long)]
        double: PathBuf,
        #[arg(long)]
        lambda_max: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Neumann eigenvalue CSV, or invariant-set JSON.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub coarse: Option<PathBuf>,
    #[arg(long)]
    pub bc: Option<BoundaryCondition>,
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long, value_parser = parse_pair)]
    pub t_scan: Option<(f64, f64)>,
}

#[derive(Debug, Args)]
pub struct OrbitArgs {
    #[command(flatten)]
    pub trapezoid: TrapezoidArgs,
    /// Longest orbit searched; twice the diameter when absent.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub max_bounces: usize,
    #[arg(long)]
    pub boundary_points: Option<usize>,
    #[arg(long)]
    pub directions: Option<usize>,
    #[arg(long)]
    pub shot_cap: Option<usize>,
}

fn parse_floats(s: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != n {
        return Err(format!("expected {n} values separated by ':'"));
    }
    parts.iter().map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"))).collect()
}

fn parse_k_range(s: &str) -> std::result::Result<(f64, f64, f64), String> {
    let v = parse_floats(s, 3)?;
    Ok((v[0], v[1], v[2]))
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let v = parse_floats(s, 2)?;
    Ok((v[0], v[1]))
}

fn parse_t_grid(s: &str) -> std::result::Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err("expected t_min:t_max:points".into());
    }
    let lo = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let hi = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    let n = parts[2].trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi, n))
}

/// A failed command: exit code plus the underlying error.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub stage: &'static str,
    pub error: Error,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.stage, self.error)
    }
}

impl std::error::Error for CliError {}

type CliResult<T> = std::result::Result<T, CliError>;

trait Exit<T> {
    fn exit(self, code: i32, stage: &'static str) -> CliResult<T>;
}

impl<T, E: Into<Error>> Exit<T> for std::result::Result<T, E> {
    fn exit(self, code: i32, stage: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError { code, stage, error: e.into() })
    }
}

/// Output directory plus the manifest being built.
struct Run {
    dir: PathBuf,
    manifest: Manifest,
}

impl Run {
    fn start<C: Serialize>(dir: &Path, command: &str, config: &C, inputs: &[PathBuf]) -> CliResult<Self> {
        fs::create_dir_all(dir).exit(EXIT_VALIDATION, "output")?;
        let manifest = Manifest::new(command, config, inputs).exit(EXIT_VALIDATION, "input")?;
        Ok(Self { dir: dir.to_path_buf(), manifest })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T, code: i32) -> CliResult<()> {
        let p = self.path(name);
        write_json(&p, value).exit(code, "output")
    }

    fn finish(self) -> CliResult<()> {
        self.manifest.write(&self.dir).exit(EXIT_VALIDATION, "output")?;
        Ok(())
    }
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).exit(EXIT_VALIDATION, "config")?;
            serde_json::from_str(&text).exit(EXIT_VALIDATION, "config")?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn apply_window(cfg: &mut RunConfig, w: &WindowArgs) {
    if let Some(width) = w.width {
        cfg.window_width = width;
    }
    if let Some((lo, hi, step)) = w.k_range {
        cfg.k_min = lo;
        cfg.k_max = hi;
        cfg.k_step = step;
    }
}

/// Either a single list or a Richardson pair.
enum Measure {
    Single(SpectrumData),
    Pair(RichardsonPair),
}

impl Measure {
    fn get(&self) -> &dyn SpectralMeasure {
        match self {
            Measure::Single(s) => s,
            Measure::Pair(p) => p,
        }
    }
}

fn load_measure(
    fine: &Path,
    coarse: Option<&Path>,
    bc: Option<BoundaryCondition>,
    code: i32,
) -> CliResult<(Measure, Vec<PathBuf>)> {
    let s = read_eigenvalues(fine, bc).exit(EXIT_VALIDATION, "input")?;
    let mut inputs = vec![fine.to_path_buf()];
    match coarse {
        None => Ok((Measure::Single(s), inputs)),
        Some(c) => {
            let cs = read_eigenvalues(c, bc).exit(EXIT_VALIDATION, "input")?;
            inputs.push(c.to_path_buf());
            Ok((Measure::Pair(RichardsonPair::new(cs, s).exit(code, "richardson")?), inputs))
        }
    }
}

fn load_trapezoid(a: &TrapezoidArgs) -> CliResult<TrapezoidSpec> {
    read_trapezoid(&a.input, a.degrees).exit(EXIT_VALIDATION, "input")
}

/// Runs one parsed command line and returns what it printed to stdout.
pub fn run(cli: &Cli) -> CliResult<String> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Invariants(a) => cmd_invariants(cli, &cfg, a),
        Command::Eigs(a) => cmd_eigs(cli, &mut cfg, a),
        Command::Traces { mode } => cmd_traces(cli, &mut cfg, mode),
        Command::Reconstruct(a) => cmd_reconstruct(cli, &cfg, a),
        Command::Orbits(a) => cmd_orbits(cli, &cfg, a),
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).unwrap_or_default()
}

fn cmd_invariants(cli: &Cli, cfg: &RunConfig, a: &TrapezoidArgs) -> CliResult<String> {
    let t = load_trapezoid(a)?;
    let inv = forward_invariants(&t);
    let mut run = Run::start(&cli.out, "invariants", cfg, &[a.input.clone()])?;
    run.json("invariants.json", &inv, EXIT_VALIDATION)?;
    run.finish()?;
    Ok(pretty(&inv))
}

#[derive(Serialize)]
struct EigsSummary {
    bc: BoundaryCondition,
    count: usize,
    lambda_max_trust: f64,
    files: Vec<String>,
}

fn cmd_eigs(cli: &Cli, cfg: &mut RunConfig, a: &EigsArgs) -> CliResult<String> {
    let t = load_trapezoid(&a.trapezoid)?;
    if let Some(n) = a.mesh_n {
        cfg.mesh_n = n;
    }
    if let Some(l) = a.lambda_max {
        cfg.lambda_max = l;
    }
    if a.count.is_some() {
        cfg.eig_count = a.count;
    }
    if cfg.mesh_n == 0 || !(cfg.lambda_max > 0.0) {
        return Err(CliError {
            code: EXIT_VALIDATION,
            stage: "config",
            error: Error::Precondition("mesh_n and lambda_max must be positive".into()),
        });
    }
    let request = match cfg.eig_count {
        Some(c) => EigenRequest::Count(c),
        None => EigenRequest::Threshold(cfg.lambda_max),
    };
    let opts = EigenOptions { residual_tol: cfg.tolerances.eig_residual, seed: cfg.seed, ..EigenOptions::default() };
    let mut run = Run::start(&cli.out, "eigs", cfg, &[a.trapezoid.input.clone()])?;
    let mut outputs: Vec<(String, SpectrumData)> = Vec::new();
    if a.exact {
        if !t.is_rectangle() {
            return Err(CliError {
                code: EXIT_VALIDATION,
                stage: "input",
                error: Error::Precondition("exact spectra exist only for rectangles".into()),
            });
        }
        let (w, h) = (t.b(), t.h());
        let s = if a.double {
            rectangle_double_spectrum(w, h, cfg.lambda_max)
        } else {
            rectangle_exact_spectrum(w, h, a.bc, cfg.lambda_max)
        }
        .exit(EXIT_EIGS, "eigs")?;
        let s = match cfg.eig_count {
            Some(c) => truncate(s, c).exit(EXIT_EIGS, "eigs")?,
            None => s,
        };
        let stem = if a.double { "eigenvalues_double".to_string() } else { format!("eigenvalues_{}", a.bc) };
        outputs.push((stem, s));
    } else if a.richardson {
        let pair = RichardsonPair::compute(&t, cfg.mesh_n, a.bc, request, &opts).exit(EXIT_EIGS, "eigs")?;
        let extrapolated = pair.extrapolated().exit(EXIT_EIGS, "richardson")?;
        outputs.push((format!("eigenvalues_{}_coarse", a.bc), pair.coarse().clone()));
        outputs.push((format!("eigenvalues_{}_fine", a.bc), pair.fine().clone()));
        outputs.push((format!("eigenvalues_{}", a.bc), extrapolated));
    } else {
        let s = compute_spectrum(&t, cfg.mesh_n, a.bc, request, &opts).exit(EXIT_EIGS, "eigs")?;
        outputs.push((format!("eigenvalues_{}", a.bc), s));
    }
    let mut files = Vec::new();
    for (stem, s) in &outputs {
        let csv_name = format!("{stem}.csv");
        let p = run.path(&csv_name);
        run.manifest.outputs.push(format!("{stem}.json"));
        write_eigenvalues(&p, s).exit(EXIT_EIGS, "output")?;
        files.push(csv_name);
    }
    run.finish()?;
    let main = &outputs.last().expect("at least one spectrum").1;
    Ok(pretty(&EigsSummary { bc: main.bc(), count: main.count(), lambda_max_trust: main.lambda_max_trust(), files }))
}

fn truncate(s: SpectrumData, count: usize) -> Result<SpectrumData> {
    if count > s.count() {
        return Err(Error::Precondition(format!("{count} eigenvalues requested, {} below lambda_max", s.count())));
    }
    let values = s.eigenvalues()[..count].to_vec();
    SpectrumData::from_values(s.bc(), values, s.method())
}

#[derive(Serialize)]
struct HeatReport {
    fit: crate::traces::HeatFit,
    angle_invariant: f64,
    t_grid: (f64, f64, usize),
}

#[derive(Serialize)]
struct ScanReport {
    width: f64,
    t_scan: (f64, f64),
    k_probe: f64,
    peaks: Vec<crate::traces::WavePeak>,
}

#[derive(Serialize)]
struct OrderReport {
    t0: f64,
    width: f64,
    k_range: (f64, f64, f64),
    fit: crate::traces::OrderFit,
}

#[derive(Serialize)]
struct UnionReport {
    lambda_max: f64,
    equal: bool,
}

fn peak_options(tol: &Tolerances) -> PeakOptions {
    PeakOptions {
        median_factor: tol.peak_median_factor,
        relative_floor: tol.peak_relative_floor,
        r2_floor: tol.order_r2_floor,
        clean_r2: tol.peak_clean_r2,
        tail: tol.wave_tail,
        ..PeakOptions::default()
    }
}

fn require_t0(cfg: &RunConfig) -> CliResult<f64> {
    cfg.t0.ok_or_else(|| CliError {
        code: EXIT_VALIDATION,
        stage: "config",
        error: Error::Precondition("--t0 is required".into()),
    })
}

fn validate_window(cfg: &mut RunConfig, m: &dyn SpectralMeasure) -> CliResult<()> {
    cfg.lambda_trust = Some(m.lambda_max_trust());
    cfg.validate().exit(EXIT_TRACES, "range")
}

fn cmd_traces(cli: &Cli, cfg: &mut RunConfig, mode: &TraceMode) -> CliResult<String> {
    let tol = cfg.tolerances.clone();
    match mode {
        TraceMode::Heat { spectrum, t_grid } => {
            let (m, inputs) = load_measure(&spectrum.input, spectrum.coarse.as_deref(), spectrum.bc, EXIT_TRACES)?;
            let s = m.get();
            let opts = ReconstructOptions { tolerances: tol.clone(), ..ReconstructOptions::default() };
            let (fit, grid) = match t_grid {
                Some((lo, hi, n)) => {
                    let ts = geometric_grid(*lo, *hi, *n);
                    let values = heat_trace(s, &ts, tol.heat_tail).exit(EXIT_TRACES, "heat")?;
                    let fit = fit_heat_invariants(&values, &ts, s.bc(), tol.heat_condition).exit(EXIT_TRACES, "heat")?;
                    (fit, (*lo, *hi, *n))
                }
                None => staged_heat_fit(s, &opts).exit(EXIT_TRACES, "heat")?,
            };
            let ts = geometric_grid(grid.0, grid.1, grid.2);
            let values = heat_trace(s, &ts, tol.heat_tail).exit(EXIT_TRACES, "heat")?;
            let mut run = Run::start(&cli.out, "traces heat", cfg, &inputs)?;
            let p = run.path("heat_trace.csv");
            write_pairs(&p, ("t", "heat_trace"), ts.iter().copied().zip(values)).exit(EXIT_TRACES, "output")?;
            let report = HeatReport { angle_invariant: fit.angle_invariant(), fit, t_grid: grid };
            run.json("heat_fit.json", &report, EXIT_TRACES)?;
            run.finish()?;
            Ok(pretty(&report))
        }
        TraceMode::WaveScan { spectrum, window, t_scan } => {
            apply_window(cfg, window);
            if let Some(r) = t_scan {
                cfg.t_scan = *r;
            }
            let (m, inputs) = load_measure(&spectrum.input, spectrum.coarse.as_deref(), spectrum.bc, EXIT_TRACES)?;
            let s = m.get();
            let width = cfg.window_width;
            let k_probe = s.lambda_max_trust().sqrt().min(max_complete_k(s.lambda_complete(), width, tol.wave_tail));
            let k_probe = (k_probe / cfg.k_step).floor() * cfg.k_step;
            let scan = wave_scan(s, cfg.t_scan, width, k_probe, 0.25 * width, tol.wave_tail)
                .exit(EXIT_TRACES, "wave-scan")?;
            let k_grid = crate::config::octave_k_grid(k_probe, cfg.k_step);
            let peaks = detect_peaks(s, cfg.t_scan, width, k_probe, &k_grid, &peak_options(&tol))
                .exit(EXIT_TRACES, "wave-scan")?;
            let mut run = Run::start(&cli.out, "traces wave-scan", cfg, &inputs)?;
            let p = run.path("wave_scan.csv");
            write_scan_csv(&p, &scan).exit(EXIT_TRACES, "output")?;
            let report = ScanReport { width, t_scan: cfg.t_scan, k_probe, peaks };
            run.json("peaks.json", &report, EXIT_TRACES)?;
            run.finish()?;
            Ok(pretty(&report))
        }
        TraceMode::WaveOrder { spectrum, window, t0 } => {
            apply_window(cfg, window);
            if t0.is_some() {
                cfg.t0 = *t0;
            }
            let t0 = require_t0(cfg)?;
            let (m, inputs) = load_measure(&spectrum.input, spectrum.coarse.as_deref(), spectrum.bc, EXIT_TRACES)?;
            let s = m.get();
            validate_window(cfg, s)?;
            let ks = cfg.k_grid();
            let w = wave_transform(s, t0, cfg.window_width, &ks, tol.wave_tail).exit(EXIT_TRACES, "wave-order")?;
            let fit = estimate_order(&w, &ks).exit(EXIT_TRACES, "wave-order")?;
            let mut run = Run::start(&cli.out, "traces wave-order", cfg, &inputs)?;
            let p = run.path("wave_transform.csv");
            write_transform_csv(&p, &ks, &w).exit(EXIT_TRACES, "output")?;
            let report = OrderReport { t0, width: cfg.window_width, k_range: (cfg.k_min, cfg.k_max, cfg.k_step), fit };
            run.json("order.json", &report, EXIT_TRACES)?;
            run.finish()?;
            Ok(pretty(&report))
        }
        TraceMode::DnCompare { neumann, neumann_coarse, dirichlet, dirichlet_coarse, window, t0 } => {
            apply_window(cfg, window);
            if t0.is_some() {
                cfg.t0 = *t0;
            }
            let t0 = require_t0(cfg)?;
            let (mn, mut inputs) =
                load_measure(neumann, neumann_coarse.as_deref(), Some(BoundaryCondition::Neumann), EXIT_TRACES)?;
            let (md, more) =
                load_measure(dirichlet, dirichlet_coarse.as_deref(), Some(BoundaryCondition::Dirichlet), EXIT_TRACES)?;
            inputs.extend(more);
            let trust = mn.get().lambda_max_trust().min(md.get().lambda_max_trust());
            cfg.lambda_trust = Some(trust);
            cfg.validate().exit(EXIT_TRACES, "range")?;
            let ks = cfg.k_grid();
            let cmp = compare_dn_at(mn.get(), md.get(), t0, cfg.window_width, &ks, tol.wave_tail)
                .exit(EXIT_TRACES, "dn-compare")?;
            let mut run = Run::start(&cli.out, "traces dn-compare", cfg, &inputs)?;
            run.json("dn_compare.json", &cmp, EXIT_TRACES)?;
            run.finish()?;
            Ok(pretty(&cmp))
        }
        TraceMode::UnionCheck { dirichlet, neumann, double, lambda_max } => {
            let d = read_eigenvalues(dirichlet, Some(BoundaryCondition::Dirichlet)).exit(EXIT_VALIDATION, "input")?;
            let n = read_eigenvalues(neumann, Some(BoundaryCondition::Neumann)).exit(EXIT_VALIDATION, "input")?;
            let t = read_eigenvalues(double, None)
                .or_else(|_| read_eigenvalues(double, Some(BoundaryCondition::Neumann)))
                .exit(EXIT_VALIDATION, "input")?;
            let complete = d.lambda_complete().min(n.lambda_complete()).min(t.lambda_complete());
            let lmax = lambda_max.unwrap_or(complete);
            if lmax > complete {
                return Err(CliError {
                    code: EXIT_TRACES,
                    stage: "union-check",
                    error: Error::Range(format!("lambda_max {lmax} exceeds the complete range {complete}")),
                });
            }
            let equal = spectral_union_check(&d, &n, &t, lmax, tol.union_exact);
            let mut run =
                Run::start(&cli.out, "traces union-check", cfg, &[dirichlet.clone(), neumann.clone(), double.clone()])?;
            run.json("union_check.json", &UnionReport { lambda_max: lmax, equal }, EXIT_TRACES)?;
            run.finish()?;
            Ok(equal.to_string())
        }
    }
}

fn write_pairs(path: &Path, header: (&str, &str), rows: impl Iterator<Item = (f64, f64)>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([header.0, header.1])?;
    for (a, b) in rows {
        w.write_record([format!("{a:.16e}"), format!("{b:.16e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Reconstruction report written by `reconstruct`.
#[derive(Debug, Serialize)]
pub struct ReconstructionReport {
    pub plan: serde_json::Value,
    pub invariants: InvariantSet,
    pub recovered: Recovered,
    pub residuals: serde_json::Value,
    pub thresholds: serde_json::Value,
}

fn cmd_reconstruct(cli: &Cli, cfg: &RunConfig, a: &ReconstructArgs) -> CliResult<String> {
    let tol = &cfg.tolerances;
    let is_csv = a.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let (report, diagnostics, inputs) = if is_csv {
        let (m, inputs) = load_measure(&a.input, a.coarse.as_deref(), a.bc, EXIT_RECONSTRUCT)?;
        let opts = ReconstructOptions {
            window_width: a.width,
            t_scan: a.t_scan,
            tolerances: tol.clone(),
            ..ReconstructOptions::default()
        };
        let (_, diag) = end_to_end_reconstruct(m.get(), &opts).exit(EXIT_RECONSTRUCT, "reconstruct")?;
        let report = ReconstructionReport {
            plan: serde_json::to_value(&diag.plan).exit(EXIT_RECONSTRUCT, "output")?,
            invariants: diag.invariants.clone(),
            recovered: diag.recovered.clone(),
            residuals: serde_json::to_value(&diag.residuals).exit(EXIT_RECONSTRUCT, "output")?,
            thresholds: serde_json::to_value(diag.plan.thresholds).exit(EXIT_RECONSTRUCT, "output")?,
        };
        (report, Some(diag), inputs)
    } else {
        let text = fs::read_to_string(&a.input).exit(EXIT_VALIDATION, "input")?;
        let inv: InvariantSet = serde_json::from_str(&text).exit(EXIT_VALIDATION, "input")?;
        let (t, path) = reconstruct_from_invariants(&inv, tol).exit(EXIT_RECONSTRUCT, "reconstruct")?;
        let thresholds = PlanThresholds {
            rectangle_q: tol.rectangle_q,
            order_window: tol.order_window,
            altitude_exponent: crate::inverse::ALTITUDE_EXPONENT,
            top_edge_exponent: crate::inverse::TOP_EDGE_EXPONENT,
            right_angle_exponent: crate::inverse::RIGHT_ANGLE_EXPONENT,
        };
        let residuals = serde_json::json!({
            "perimeter": t.perimeter() - inv.perimeter.value,
            "area": t.area() - inv.area.value,
        });
        let report = ReconstructionReport {
            plan: serde_json::json!({ "path": path }),
            invariants: inv,
            recovered: Recovered::from(&t),
            residuals,
            thresholds: serde_json::to_value(thresholds).exit(EXIT_RECONSTRUCT, "output")?,
        };
        (report, None, vec![a.input.clone()])
    };
    let mut run = Run::start(&cli.out, "reconstruct", cfg, &inputs)?;
    run.json("reconstruction.json", &report, EXIT_RECONSTRUCT)?;
    if let Some(d) = &diagnostics {
        run.json("diagnostics.json", d, EXIT_RECONSTRUCT)?;
    }
    run.finish()?;
    Ok(pretty(&report))
}

#[derive(Serialize)]
struct OrbitsSummary {
    named: Vec<(crate::billiards::OrbitKind, f64)>,
    found: usize,
    corner_hits: usize,
    shortest: crate::billiards::ShortestOrbitReport,
}

fn cmd_orbits(cli: &Cli, cfg: &RunConfig, a: &OrbitArgs) -> CliResult<String> {
    let t = load_trapezoid(&a.trapezoid)?;
    let mut opts = SearchOptions { corner_rel: cfg.tolerances.corner, ..SearchOptions::default() };
    if let Some(v) = a.boundary_points {
        opts.boundary_points = v;
    }
    if let Some(v) = a.directions {
        opts.directions = v;
    }
    if let Some(v) = a.shot_cap {
        opts.shot_cap = v;
    }
    let budget = a.budget.unwrap_or(2.0 * t.diameter());
    let named = named_orbits(&t);
    let search = search_periodic_orbits(&t, budget, a.max_bounces, &opts).exit(EXIT_ORBITS, "orbits")?;
    let shortest = shortest_orbit_check(&t, &opts).exit(EXIT_ORBITS, "orbits")?;
    let mut run = Run::start(&cli.out, "orbits", cfg, &[a.trapezoid.input.clone()])?;
    let mut all = named.clone();
    all.extend(search.orbits.iter().cloned());
    let p = run.path("orbits.jsonl");
    write_orbits_jsonl(&p, &all).exit(EXIT_ORBITS, "output")?;
    run.json("shortest_orbit.json", &shortest, EXIT_ORBITS)?;
    run.finish()?;
    Ok(pretty(&OrbitsSummary {
        named: named.iter().map(|o| (o.kind, o.length)).collect(),
        found: search.orbits.len(),
        corner_hits: search.corner_hits,
        shortest,
    }))
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { 0 };
        }
    };
    match run(&cli) {
        Ok(out) => {
            // a closed pipe is not a failure of the command
            let _ = writeln!(std::io::stdout(), "{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
