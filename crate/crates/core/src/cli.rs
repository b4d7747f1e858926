//! The `tdmosc` command line: config loading, the five subcommands and
//! their exit codes.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{
    effective_frequency, solve_damped_oscillator, solve_ermakov, solve_newton, AuxiliaryTrajectory,
};
use crate::error::Error;
use crate::expansion::{
    coefficients_quadrature, compare_with_reference, cross_time_deviation, recommended_n_max, DistributionReport,
    ExpansionSpectrum,
};
use crate::mass::{MassModel, DEFAULT_QUASI_COHERENCE_EPS};
use crate::ode::{uniform_grid, OdeOptions};
use crate::output;
use crate::packet::{build_packet, lambda0, required_half_width, PacketConfig, PacketState};
use crate::pde::{certify_packet, Grid, Hamiltonian, SnapshotCheck, DEFAULT_LEAK_THRESHOLD};
use crate::riccati::{
    cross_pipeline_width_deviation, relative_drift, riccati_residual, riccati_states, wp_from_mass_model, BridgeConfig,
    PhysicalConstants, RiccatiState, WpFamily,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const OUT_ENV: &str = "TDMOSC_OUT";

const DEFAULT_HALF_WIDTH: f64 = 20.0;

/// Weights below this are left out of the relative Poisson comparison.
const POISSON_WEIGHT_FLOOR: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "tdmosc",
    version,
    about = "Gaussian packets of the time-dependent-mass oscillator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON run configuration; every field is optional.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory (beats $TDMOSC_OUT and the config).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Skip a verify row (e.g. `pde`); repeatable.
    #[arg(long, global = true, value_name = "SUITE")]
    pub skip: Vec<String>,

    #[arg(long, global = true, value_enum, default_value_t = Pipeline::Both)]
    pub pipeline: Pipeline,

    /// Integrator tolerance (absolute and relative).
    #[arg(long, global = true, value_name = "X")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Trajectory and packet time series, Riccati snapshots.
    Simulate,
    /// Run the invariant suite and print a pass/fail table.
    Verify,
    /// Expansion spectra at the sample times.
    Expand,
    /// Crank–Nicolson certification of the analytic packets.
    Oracle,
    /// Invariants across a range of mass parameters.
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pipeline {
    U,
    Riccati,
    Both,
}

impl Pipeline {
    fn u(self) -> bool {
        matches!(self, Pipeline::U | Pipeline::Both)
    }

    fn riccati(self) -> bool {
        matches!(self, Pipeline::Riccati | Pipeline::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Box edges. When both are absent the box is [−20, 20], widened
    /// symmetrically if the analytic packet would reach the walls.
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub h: f64,
    pub dt: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x_min: None,
            x_max: None,
            h: 0.02,
            dt: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub wronskian: f64,
    pub lambda: f64,
    pub norm: f64,
    pub poisson: f64,
    pub cross_time: f64,
    pub ermakov_lewis: f64,
    pub riccati: f64,
    pub cross_width: f64,
    pub pde: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            wronskian: 1e-6,
            lambda: 1e-6,
            norm: 1e-8,
            poisson: 1e-6,
            cross_time: 1e-6,
            ermakov_lewis: 1e-6,
            riccati: 1e-5,
            cross_width: 1e-4,
            pde: 1e-5,
        }
    }
}

impl Thresholds {
    fn all(&self) -> [(&'static str, f64); 9] {
        [
            ("wronskian", self.wronskian),
            ("lambda", self.lambda),
            ("norm", self.norm),
            ("poisson", self.poisson),
            ("cross_time", self.cross_time),
            ("ermakov_lewis", self.ermakov_lewis),
            ("riccati", self.riccati),
            ("cross_width", self.cross_width),
            ("pde", self.pde),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mass: MassModel,
    pub window: [f64; 2],
    /// Sample spacing of the time series.
    pub dt: f64,
    pub u0: Complex64,
    pub du0: Complex64,
    pub b0: Complex64,
    pub eta0: f64,
    pub deta0: f64,
    pub alpha0: f64,
    pub dalpha0: f64,
    pub hbar: f64,
    pub m: f64,
    pub tol: f64,
    pub grid: GridSpec,
    pub pde_window: [f64; 2],
    pub pde_snapshot_dt: f64,
    pub leak_threshold: f64,
    pub out_dir: PathBuf,
    pub sample_times: Vec<f64>,
    /// Highest expansion index; chosen from the Poisson mean when absent.
    pub n_max: Option<usize>,
    pub tail_tolerance: f64,
    pub quasi_coherence_eps: f64,
    pub verify_models: Vec<MassModel>,
    /// Parameter values (m0 or gamma0) swept over the `mass` family.
    pub sweep_parameters: Vec<f64>,
    pub thresholds: Thresholds,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mass: MassModel::default(),
            window: [0.0, 10.0],
            dt: 1e-3,
            u0: Complex64::new(1.0, 0.0),
            du0: Complex64::i(),
            b0: Complex64::new(1.0, 0.0),
            eta0: 1.0,
            deta0: 0.0,
            alpha0: 2.0,
            dalpha0: 0.0,
            hbar: 1.0,
            m: 1.0,
            tol: 1e-10,
            grid: GridSpec::default(),
            pde_window: [0.0, 5.0],
            pde_snapshot_dt: 0.5,
            leak_threshold: DEFAULT_LEAK_THRESHOLD,
            out_dir: PathBuf::from("out"),
            sample_times: vec![0.0, 2.0, 5.0, 10.0],
            n_max: None,
            tail_tolerance: crate::expansion::DEFAULT_TAIL_TOLERANCE,
            quasi_coherence_eps: DEFAULT_QUASI_COHERENCE_EPS,
            verify_models: vec![
                MassModel::constant(1.0),
                MassModel::gaussian_decaying(0.1),
                MassModel::exponential(0.5),
            ],
            sweep_parameters: vec![0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9],
            thresholds: Thresholds::default(),
        }
    }
}

fn ordered(w: [f64; 2]) -> bool {
    w[0].is_finite() && w[1].is_finite() && w[0] < w[1]
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config is not valid: {e}"))
    }

    /// Checks every precondition that does not need a numerical run.
    pub fn validate(&self) -> Result<(), String> {
        let mut problems = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                problems.push(msg);
            }
        };
        if let Err(e) = self.mass.validate() {
            check(false, format!("mass: {e}"));
        }
        check(
            ordered(self.window),
            format!("window must satisfy tau0 < tau1, got {:?}", self.window),
        );
        let span = self.window[1] - self.window[0];
        check(
            positive(self.dt) && self.dt <= span,
            format!("dt must lie in (0, {span}], got {}", self.dt),
        );
        check(
            positive(self.tol) && self.tol < 1.0,
            format!("tol must lie in (0, 1), got {}", self.tol),
        );
        if let Err(e) = self.constants().validate() {
            check(false, e.to_string());
        }
        if let Err(e) = self.spatial_grid() {
            check(false, format!("grid: {e}"));
        }
        check(
            positive(self.grid.dt),
            format!("grid.dt must be > 0, got {}", self.grid.dt),
        );
        check(
            ordered(self.pde_window),
            format!("pde_window must satisfy tau0 < tau1, got {:?}", self.pde_window),
        );
        check(
            positive(self.pde_snapshot_dt),
            format!("pde_snapshot_dt must be > 0, got {}", self.pde_snapshot_dt),
        );
        check(
            positive(self.leak_threshold),
            format!("leak_threshold must be > 0, got {}", self.leak_threshold),
        );
        check(!self.sample_times.is_empty(), "sample_times must not be empty".into());
        check(
            self.sample_times.windows(2).all(|w| w[0] < w[1]),
            "sample_times must be strictly increasing".into(),
        );
        check(
            self.sample_times
                .iter()
                .all(|&t| t >= self.window[0] && t <= self.window[1]),
            format!("sample_times must lie inside the window {:?}", self.window),
        );
        check(
            positive(self.tail_tolerance),
            format!("tail_tolerance must be > 0, got {}", self.tail_tolerance),
        );
        check(
            positive(self.quasi_coherence_eps),
            format!("quasi_coherence_eps must be > 0, got {}", self.quasi_coherence_eps),
        );
        check(!self.verify_models.is_empty(), "verify_models must not be empty".into());
        for m in &self.verify_models {
            if let Err(e) = m.validate() {
                check(false, format!("verify_models: {e}"));
            }
        }
        for &p in &self.sweep_parameters {
            if let Err(e) = self.mass.with_parameter(p).validate() {
                check(false, format!("sweep_parameters: {e}"));
            }
        }
        for (name, v) in self.thresholds.all() {
            check(positive(v), format!("thresholds.{name} must be > 0, got {v}"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems.join("; "))
        }
    }

    pub fn constants(&self) -> PhysicalConstants {
        PhysicalConstants {
            hbar: self.hbar,
            m: self.m,
        }
    }

    pub fn spatial_grid(&self) -> crate::error::Result<Grid> {
        Grid::new(
            self.grid.x_min.unwrap_or(-DEFAULT_HALF_WIDTH),
            self.grid.x_max.unwrap_or(DEFAULT_HALF_WIDTH),
            self.grid.h,
        )
    }

    /// The configured box, or for an unconfigured box the default one
    /// widened to hold a packet reaching out to `extent`.
    pub fn fitted_grid(&self, extent: f64) -> crate::error::Result<Grid> {
        if self.grid.x_min.is_some() || self.grid.x_max.is_some() || extent <= DEFAULT_HALF_WIDTH {
            return self.spatial_grid();
        }
        let h = self.grid.h;
        let half = (1.05 * extent / h).ceil() * h;
        Grid::new(-half, half, h)
    }

    fn opts(&self) -> OdeOptions {
        OdeOptions::with_tol(self.tol)
    }

    fn time_grid(&self) -> Vec<f64> {
        uniform_grid(self.window[0], self.window[1], self.dt)
    }

    fn pde_times(&self) -> Vec<f64> {
        let mut t = uniform_grid(self.pde_window[0], self.pde_window[1], self.pde_snapshot_dt);
        if let Some(last) = t.last_mut() {
            *last = self.pde_window[1];
        }
        t
    }

    fn packet_config(&self) -> PacketConfig {
        PacketConfig {
            b0: self.b0,
            n0_phase: 0.0,
        }
    }

    fn bridge(&self) -> BridgeConfig {
        BridgeConfig {
            u0: self.u0,
            du0: self.du0,
            eta0: self.eta0,
            deta0: self.deta0,
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(Error),
    Io(PathBuf, std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numerical(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) | Failure::Io(..) => EXIT_CONFIG,
            Failure::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Config(msg) => format!("config error: {msg}"),
            Failure::Numerical(e @ Error::BoundaryLeak { .. }) => {
                format!("{}: {e} (grid.x_min, grid.x_max in the config)", e.name())
            }
            Failure::Numerical(e) => format!("{}: {e}", e.name()),
            Failure::Io(path, e) => format!("cannot write {}: {e}", path.display()),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn io<T>(path: &Path, r: std::io::Result<T>) -> Outcome<T> {
    r.map_err(|e| Failure::Io(path.to_path_buf(), e))
}

/// Loaded config plus the resolved output directory.
#[derive(Debug)]
pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub pipeline: Pipeline,
    pub skip: Vec<String>,
}

impl Context {
    pub fn load(cli: &Cli, env_out: Option<OsString>) -> Outcome<Self> {
        let mut config = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
                RunConfig::from_json(&text).map_err(Failure::Config)?
            }
            None => RunConfig::default(),
        };
        if let Some(tol) = cli.tol {
            config.tol = tol;
        }
        config.validate().map_err(Failure::Config)?;
        let out_dir = cli
            .out
            .clone()
            .or_else(|| env_out.filter(|s| !s.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| config.out_dir.clone());
        for s in &cli.skip {
            if !VERIFY_ROWS.contains(&s.as_str()) {
                return Err(Failure::Config(format!(
                    "unknown suite '{s}' for --skip; expected one of {}",
                    VERIFY_ROWS.join(", ")
                )));
            }
        }
        Ok(Self {
            config,
            out_dir,
            pipeline: cli.pipeline,
            skip: cli.skip.clone(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Parses `args` and runs the selected subcommand; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let result = Context::load(&cli, std::env::var_os(OUT_ENV)).and_then(|ctx| match cli.command {
        Command::Simulate => simulate(&ctx),
        Command::Verify => verify(&ctx),
        Command::Expand => expand(&ctx),
        Command::Oracle => oracle(&ctx),
        Command::Sweep => sweep(&ctx),
    });
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.exit_code()
        }
    }
}

fn mass_warnings(model: &MassModel, window: [f64; 2], dt: f64) -> Outcome<()> {
    let report = model.validate_on((window[0], window[1]), dt)?;
    for msg in &report.messages {
        eprintln!("warning: {}: {msg}", model.name());
    }
    Ok(())
}

fn model_label(m: &MassModel) -> String {
    match m {
        MassModel::Constant { m0 } => format!("constant(m0={m0})"),
        other => format!("{}(gamma0={})", other.name(), other.parameter()),
    }
}

fn max_lambda_error(states: &[PacketState], l0: f64) -> f64 {
    states
        .iter()
        .map(|s| output::lambda_error(s.lambda, l0))
        .fold(0.0, f64::max)
}

fn max_norm_error(states: &[PacketState]) -> f64 {
    states
        .iter()
        .map(|s| (s.quadrature_norm() - 1.0).abs())
        .fold(0.0, f64::max)
}

pub fn simulate(ctx: &Context) -> Outcome<i32> {
    let cfg = &ctx.config;
    mass_warnings(&cfg.mass, cfg.window, cfg.dt)?;
    let opts = cfg.opts();
    let grid = cfg.time_grid();
    let window = (cfg.window[0], cfg.window[1]);

    #[derive(Serialize)]
    struct MassSummary {
        model: MassModel,
        report: crate::mass::MassReport,
        quasi_coherence: crate::mass::QuasiCoherence,
    }
    let summary = MassSummary {
        model: cfg.mass,
        report: cfg.mass.validate_on(window, cfg.dt)?,
        quasi_coherence: cfg
            .mass
            .quasi_coherence_window(window, cfg.quasi_coherence_eps, cfg.dt)?,
    };
    let path = ctx.path("mass.json");
    io(&path, output::write_json(&path, &summary))?;

    if ctx.pipeline.u() {
        let traj = solve_damped_oscillator(cfg.mass, cfg.u0, cfg.du0, &grid, &opts)?;
        let states = build_packet(&traj, &cfg.packet_config(), &opts)?;
        let l0 = lambda0(cfg.b0, traj.w0)?;
        let path = ctx.path("trajectory.csv");
        io(&path, output::write_trajectory(&path, &traj))?;
        let path = ctx.path("packet.csv");
        io(&path, output::write_packet(&path, &states, l0))?;
        println!("lambda0 = {}", output::fmt(l0));
        println!("max |lambda - lambda0|/lambda0 = {:e}", max_lambda_error(&states, l0));
        println!("max abel drift = {:e}", traj.max_abel_drift());
        println!("max norm error = {:e}", max_norm_error(&states));
    }
    if ctx.pipeline.riccati() {
        let family = wp_from_mass_model(cfg.mass, &cfg.bridge(), &cfg.sample_times, &cfg.constants(), &opts)?;
        let x_grid = cfg.spatial_grid()?;

        #[derive(Serialize)]
        struct ManifestEntry {
            t: f64,
            eta: f64,
            alpha: f64,
            y_re: f64,
            y_im: f64,
            invariant: f64,
            file: String,
        }
        let mut manifest = Vec::new();
        for s in &family.states {
            let file = format!("riccati_{}.csv", output::time_tag(s.t));
            let path = ctx.path(&file);
            io(
                &path,
                output::write_snapshot(&path, &s.snapshot(&x_grid, &family.consts)?),
            )?;
            manifest.push(ManifestEntry {
                t: s.t,
                eta: s.eta,
                alpha: s.alpha,
                y_re: s.y.re,
                y_im: s.y.im,
                invariant: s.invariant(),
                file,
            });
        }
        let path = ctx.path("riccati_manifest.json");
        io(&path, output::write_json(&path, &manifest))?;
        println!("riccati snapshots = {}", manifest.len());
    }
    println!("wrote {}", ctx.out_dir.display());
    Ok(EXIT_PASS)
}

pub const VERIFY_ROWS: [&str; 8] = [
    "wronskian",
    "lambda_constancy",
    "norm",
    "poisson_match",
    "ermakov_lewis",
    "riccati_residual",
    "cross_pipeline_width",
    "pde",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub model: String,
    pub invariant: String,
    pub measured: Option<f64>,
    pub threshold: f64,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl Row {
    fn new(model: &MassModel, invariant: &str, measured: f64, threshold: f64) -> Self {
        Self {
            model: model_label(model),
            invariant: invariant.to_string(),
            measured: Some(measured),
            threshold,
            status: if measured <= threshold {
                Status::Pass
            } else {
                Status::Fail
            },
        }
    }

    fn skipped(model: &MassModel, invariant: &str, threshold: f64) -> Self {
        Self {
            model: model_label(model),
            invariant: invariant.to_string(),
            measured: None,
            threshold,
            status: Status::Skipped,
        }
    }
}

/// Max relative deviation of |Cₙ|² from Poisson(λ/2) over the sample times,
/// counting weights above `POISSON_WEIGHT_FLOOR`.
fn poisson_match(cfg: &RunConfig, model: MassModel) -> crate::error::Result<f64> {
    let spectra = spectra_at(cfg, model, &cfg.sample_times)?;
    Ok(spectra
        .iter()
        .map(|s| compare_with_reference(s, &s.poisson_ref, POISSON_WEIGHT_FLOOR).max_rel_err)
        .fold(0.0, f64::max))
}

fn spectra_at(cfg: &RunConfig, model: MassModel, times: &[f64]) -> crate::error::Result<Vec<ExpansionSpectrum>> {
    let opts = cfg.opts();
    let traj = sample_trajectory(cfg, model, times)?;
    let states = build_packet(&traj, &cfg.packet_config(), &opts)?;
    let mean = lambda0(cfg.b0, traj.w0)? / 2.0;
    let n_max = cfg
        .n_max
        .unwrap_or(if mean == 0.0 { 0 } else { recommended_n_max(mean) });
    states
        .iter()
        .map(|s| coefficients_quadrature(s, n_max, cfg.tail_tolerance))
        .collect()
}

/// Trajectory sampled at arbitrary increasing times.
fn sample_trajectory(cfg: &RunConfig, model: MassModel, times: &[f64]) -> crate::error::Result<AuxiliaryTrajectory> {
    solve_damped_oscillator(model, cfg.u0, cfg.du0, times, &cfg.opts())
}

fn standalone_family(cfg: &RunConfig, model: MassModel, samples: &[f64]) -> crate::error::Result<WpFamily> {
    let opts = cfg.opts();
    let w2 = effective_frequency(model);
    let alpha = solve_ermakov(&w2, cfg.alpha0, cfg.dalpha0, samples, &opts)?;
    let eta = solve_newton(&w2, cfg.eta0, cfg.deta0, samples, &opts)?;
    let consts = cfg.constants();
    let states = riccati_states(&alpha, &eta, &consts)?;
    Ok(WpFamily {
        model,
        consts,
        alpha,
        eta,
        states,
    })
}

/// Sampling step used to bound the packet extent over the PDE window.
const EXTENT_DT: f64 = 0.05;

#[derive(Debug, Clone, Serialize)]
pub struct Certified {
    pub pipeline: &'static str,
    pub model: &'static str,
    pub params: MassModel,
    pub grid: Grid,
    pub dt: f64,
    pub snapshots: Vec<SnapshotCheck>,
    pub max_infidelity: f64,
}

fn certify(cfg: &RunConfig, model: MassModel, pipeline: Pipeline) -> crate::error::Result<Certified> {
    let times = cfg.pde_times();
    let dense = uniform_grid(cfg.pde_window[0], cfg.pde_window[1], EXTENT_DT);
    let opts = cfg.opts();
    let unit = PhysicalConstants::default();
    let (name, grid, cert) = match pipeline {
        Pipeline::Riccati => {
            let extent = wp_from_mass_model(model, &cfg.bridge(), &dense, &unit, &opts)?
                .states
                .iter()
                .map(|s| s.half_extent(cfg.leak_threshold))
                .fold(0.0, f64::max);
            let grid = cfg.fitted_grid(extent)?;
            let family = wp_from_mass_model(model, &cfg.bridge(), &times, &unit, &opts)?;
            let ham = Hamiltonian::frequency(effective_frequency(model));
            let cert = certify_packet(&family, &ham, &grid, &times, cfg.grid.dt, cfg.leak_threshold)?;
            ("riccati", grid, cert)
        }
        _ => {
            let dense_traj = sample_trajectory(cfg, model, &dense)?;
            let extent = required_half_width(
                &build_packet(&dense_traj, &cfg.packet_config(), &opts)?,
                cfg.leak_threshold,
            );
            let grid = cfg.fitted_grid(extent)?;
            let traj = sample_trajectory(cfg, model, &times)?;
            let states = build_packet(&traj, &cfg.packet_config(), &opts)?;
            let ham = Hamiltonian::Mass(model);
            let cert = certify_packet(states.as_slice(), &ham, &grid, &times, cfg.grid.dt, cfg.leak_threshold)?;
            ("u", grid, cert)
        }
    };
    Ok(Certified {
        pipeline: name,
        model: model.name(),
        params: model,
        grid,
        dt: cfg.grid.dt,
        snapshots: cert.snapshots,
        max_infidelity: cert.max_infidelity,
    })
}

fn pipelines(p: Pipeline) -> Vec<Pipeline> {
    match p {
        Pipeline::Both => vec![Pipeline::U, Pipeline::Riccati],
        other => vec![other],
    }
}

fn verify_case(ctx: &Context, model: MassModel) -> crate::error::Result<Vec<Row>> {
    let cfg = &ctx.config;
    let th = &cfg.thresholds;
    let opts = cfg.opts();
    let grid = cfg.time_grid();
    let skipped = |name: &str| ctx.skip.iter().any(|s| s == name);

    let traj = solve_damped_oscillator(model, cfg.u0, cfg.du0, &grid, &opts)?;
    let states = build_packet(&traj, &cfg.packet_config(), &opts)?;
    let l0 = lambda0(cfg.b0, traj.w0)?;

    let mut rows = Vec::new();
    let mut push = |name: &str, threshold: f64, measure: &mut dyn FnMut() -> crate::error::Result<f64>| {
        if skipped(name) {
            rows.push(Row::skipped(&model, name, threshold));
        } else {
            rows.push(Row::new(&model, name, measure()?, threshold));
        }
        Ok::<(), Error>(())
    };
    push("wronskian", th.wronskian, &mut || Ok(traj.max_abel_drift()))?;
    push("lambda_constancy", th.lambda, &mut || Ok(max_lambda_error(&states, l0)))?;
    push("norm", th.norm, &mut || Ok(max_norm_error(&states)))?;
    push("poisson_match", th.poisson, &mut || poisson_match(cfg, model))?;

    let mut families: Option<(WpFamily, WpFamily)> = None;
    let mut family_pair = || -> crate::error::Result<(WpFamily, WpFamily)> {
        if families.is_none() {
            let bridged = wp_from_mass_model(model, &cfg.bridge(), &grid, &PhysicalConstants::default(), &opts)?;
            let standalone = standalone_family(cfg, model, &grid)?;
            families = Some((bridged, standalone));
        }
        Ok(families.clone().expect("set above"))
    };
    push("ermakov_lewis", th.ermakov_lewis, &mut || {
        let (a, b) = family_pair()?;
        Ok(a.invariant_drift().max(b.invariant_drift()))
    })?;
    push("riccati_residual", th.riccati, &mut || {
        let (a, b) = family_pair()?;
        let t: Vec<f64> = b.states.iter().map(|s| s.t).collect();
        let y: Vec<Complex64> = b.states.iter().map(|s| s.y).collect();
        let standalone = riccati_residual(&t, &y, &effective_frequency(model), &b.consts)?;
        Ok(a.riccati_residual()?.max(standalone))
    })?;
    push("cross_pipeline_width", th.cross_width, &mut || {
        let (a, _) = family_pair()?;
        cross_pipeline_width_deviation(&a, &traj)
    })?;
    push("pde", th.pde, &mut || {
        let results: Vec<crate::error::Result<Certified>> = pipelines(ctx.pipeline)
            .into_par_iter()
            .map(|p| certify(cfg, model, p))
            .collect();
        let mut worst = 0.0f64;
        for r in results {
            worst = worst.max(r?.max_infidelity);
        }
        Ok(worst)
    })?;
    Ok(rows)
}

fn format_table(rows: &[Row]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<30} {:<26} {:>12} {:>10}  status",
        "model", "invariant", "measured", "threshold"
    );
    for r in rows {
        let measured = r.measured.map_or_else(|| "-".to_string(), |m| format!("{m:.3e}"));
        let status = match r.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "skipped",
        };
        let label = if r.invariant == "poisson_match" {
            "poisson_match (mean λ/2)".to_string()
        } else {
            r.invariant.clone()
        };
        let _ = writeln!(
            s,
            "{:<30} {:<26} {:>12} {:>10.1e}  {status}",
            r.model, label, measured, r.threshold
        );
    }
    s
}

pub fn verify(ctx: &Context) -> Outcome<i32> {
    let cfg = &ctx.config;
    for m in &cfg.verify_models {
        mass_warnings(m, cfg.window, cfg.dt)?;
    }
    let results: Vec<crate::error::Result<Vec<Row>>> =
        cfg.verify_models.par_iter().map(|&m| verify_case(ctx, m)).collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    print!("{}", format_table(&rows));
    let path = ctx.path("verify.json");
    io(&path, output::write_json(&path, &rows))?;
    let failed = rows.iter().filter(|r| r.status == Status::Fail).count();
    if failed == 0 {
        println!("all invariants pass");
        Ok(EXIT_PASS)
    } else {
        println!("{failed} invariant(s) failed");
        Ok(EXIT_INVARIANT)
    }
}

pub fn expand(ctx: &Context) -> Outcome<i32> {
    let cfg = &ctx.config;
    mass_warnings(&cfg.mass, cfg.window, cfg.dt)?;
    let spectra = spectra_at(cfg, cfg.mass, &cfg.sample_times)?;
    let deviation = cross_time_deviation(&spectra);

    #[derive(Serialize)]
    struct PerTime {
        tau: f64,
        lambda: f64,
        file: String,
        report: DistributionReport,
    }
    #[derive(Serialize)]
    struct ExpandReport {
        model: MassModel,
        poisson_mean: f64,
        n_max: usize,
        cross_time_deviation: f64,
        spectra: Vec<PerTime>,
    }
    let mut per_time = Vec::new();
    for s in &spectra {
        let file = format!("spectrum_{}.csv", output::time_tag(s.tau));
        let path = ctx.path(&file);
        io(&path, output::write_spectrum(&path, s))?;
        per_time.push(PerTime {
            tau: s.tau,
            lambda: s.lambda,
            file,
            report: compare_with_reference(s, &s.poisson_ref, POISSON_WEIGHT_FLOOR),
        });
    }
    let report = ExpandReport {
        model: cfg.mass,
        poisson_mean: spectra[0].poisson_mean,
        n_max: spectra[0].n_max,
        cross_time_deviation: deviation,
        spectra: per_time,
    };
    let path = ctx.path("expand.json");
    io(&path, output::write_json(&path, &report))?;
    println!("poisson mean = {}", output::fmt(report.poisson_mean));
    println!("cross-time deviation = {deviation:e}");
    Ok(if deviation <= cfg.thresholds.cross_time {
        EXIT_PASS
    } else {
        EXIT_INVARIANT
    })
}

pub fn oracle(ctx: &Context) -> Outcome<i32> {
    let cfg = &ctx.config;
    mass_warnings(&cfg.mass, cfg.pde_window, cfg.pde_snapshot_dt)?;
    let results: Vec<crate::error::Result<Certified>> = pipelines(ctx.pipeline)
        .into_par_iter()
        .map(|p| certify(cfg, cfg.mass, p))
        .collect();
    let reports = results.into_iter().collect::<crate::error::Result<Vec<_>>>()?;
    let path = ctx.path("certification.json");
    io(&path, output::write_json(&path, &reports))?;
    let mut pass = true;
    for r in &reports {
        let ok = r.max_infidelity <= cfg.thresholds.pde;
        pass &= ok;
        println!(
            "{:<8} max infidelity = {:.3e} (threshold {:.1e}) {}",
            r.pipeline,
            r.max_infidelity,
            cfg.thresholds.pde,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    Ok(if pass { EXIT_PASS } else { EXIT_INVARIANT })
}

pub const SWEEP_HEADER: [&str; 8] = [
    "parameter",
    "lambda0",
    "max_lambda_rel_err",
    "max_abel_drift",
    "max_norm_error",
    "cross_pipeline_width",
    "invariant_drift",
    "mass_accepted",
];

struct SweepRow {
    parameter: f64,
    lambda0: f64,
    lambda_err: f64,
    abel: f64,
    norm: f64,
    width: f64,
    invariant: f64,
    accepted: bool,
}

fn sweep_case(cfg: &RunConfig, model: MassModel) -> crate::error::Result<SweepRow> {
    let opts = cfg.opts();
    let grid = cfg.time_grid();
    let report = model.validate_on((cfg.window[0], cfg.window[1]), cfg.dt)?;
    let traj = solve_damped_oscillator(model, cfg.u0, cfg.du0, &grid, &opts)?;
    let states = build_packet(&traj, &cfg.packet_config(), &opts)?;
    let l0 = lambda0(cfg.b0, traj.w0)?;
    let family = wp_from_mass_model(model, &cfg.bridge(), &grid, &PhysicalConstants::default(), &opts)?;
    Ok(SweepRow {
        parameter: model.parameter(),
        lambda0: l0,
        lambda_err: max_lambda_error(&states, l0),
        abel: traj.max_abel_drift(),
        norm: max_norm_error(&states),
        width: cross_pipeline_width_deviation(&family, &traj)?,
        invariant: relative_drift(family.states.iter().map(RiccatiState::invariant)),
        accepted: report.accepted,
    })
}

pub fn sweep(ctx: &Context) -> Outcome<i32> {
    let cfg = &ctx.config;
    let params = if cfg.sweep_parameters.is_empty() {
        vec![cfg.mass.parameter()]
    } else {
        cfg.sweep_parameters.clone()
    };
    let results: Vec<crate::error::Result<SweepRow>> = params
        .par_iter()
        .map(|&p| sweep_case(cfg, cfg.mass.with_parameter(p)))
        .collect();
    let rows = results.into_iter().collect::<crate::error::Result<Vec<_>>>()?;
    let path = ctx.path("sweep.csv");
    io(
        &path,
        output::write_csv(
            &path,
            &SWEEP_HEADER,
            rows.iter().map(|r| {
                let mut v: Vec<String> = [
                    r.parameter,
                    r.lambda0,
                    r.lambda_err,
                    r.abel,
                    r.norm,
                    r.width,
                    r.invariant,
                ]
                .map(output::fmt)
                .to_vec();
                v.push(r.accepted.to_string());
                v
            }),
        ),
    )?;
    let th = &cfg.thresholds;
    let mut pass = true;
    for r in &rows {
        let ok = r.lambda_err <= th.lambda
            && r.abel <= th.wronskian
            && r.norm <= th.norm
            && r.width <= th.cross_width
            && r.invariant <= th.ermakov_lewis;
        pass &= ok;
        println!(
            "{}={:<8} lambda0={:.6} lambda_err={:.2e} abel={:.2e} norm={:.2e} width={:.2e} {}{}",
            if matches!(cfg.mass, MassModel::Constant { .. }) {
                "m0"
            } else {
                "gamma0"
            },
            r.parameter,
            r.lambda0,
            r.lambda_err,
            r.abel,
            r.norm,
            r.width,
            if ok { "PASS" } else { "FAIL" },
            if r.accepted { "" } else { " (mass not accepted)" }
        );
    }
    Ok(if pass { EXIT_PASS } else { EXIT_INVARIANT })
}
