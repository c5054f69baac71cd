// SPDX-License-Identifier: MIT
//! Run configuration, command-line surface and command implementations.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::oracle::feasibility_oracle;
use crate::lmi::theorems::{assemble, RowBound, SchemeScalars, TheoremContext, ThetaMode};
use crate::nnet::{synthesize_surrogate, Dnn};
use crate::simulator::{
    event_params_from, iqc_monitor, lyapunov_monitor, roa_samples, roa_validation, rollout,
    self_params_from, ClosedLoop, IqcMonitorReport, LyapunovReport, Metrics, MonitorData,
    RoaValidationReport, SimConfig, SimScheme,
};
use crate::synthesis::{
    boundary_csv, roa_boundary, solve, sweep, ObjectiveKind, SweepGrid, SweepTemplate,
    SynthesisOptions, SynthesisResult,
};
use crate::uncertain_plant::{
    build_augmented, build_pendulum, IqcFilter, PendulumParams, Plant, UncertaintyOp,
};

/// Success.
pub const EXIT_OK: i32 = 0;
/// Configuration, input or I/O problem.
pub const EXIT_CONFIG: i32 = 1;
/// Infeasible, inaccurate or failed verification.
pub const EXIT_INFEASIBLE: i32 = 2;
/// A rollout left the blow-up guard.
pub const EXIT_DIVERGENCE: i32 = 3;

/// Plant, uncertainty and filter source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
#[allow(clippy::large_enum_variant)]
pub enum SystemConfig {
    Pendulum {
        #[serde(default)]
        params: Option<PendulumParams>,
    },
    Explicit {
        plant: Plant,
        uncertainty: UncertaintyOp,
        filter: IqcFilter,
    },
}

/// Controller source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DnnConfig {
    /// Weight file in the JSON layout of [`crate::nnet::WeightFile`].
    File { path: PathBuf },
    /// Deterministic tanh network approximating `u = −K x`.
    Surrogate {
        k: Vec<Vec<f64>>,
        scale: f64,
        widths: (usize, usize),
    },
}

/// Event-trigger scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    pub eps1: f64,
    pub eps2: f64,
    pub mu: f64,
    pub g: f64,
    pub theta_l: usize,
    pub theta_u: usize,
    pub theta_mode: ThetaMode,
    pub alpha0: f64,
}

/// Self-trigger scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfConfig {
    pub eps1c: f64,
    pub eps2c: f64,
    pub s_bar: usize,
}

/// Relaxation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxationConfig {
    pub delta_rho: f64,
    pub delta_beta: f64,
}

/// State-row bound `|row·x| ≤ bound` on the ellipsoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBoundConfig {
    pub row: Vec<f64>,
    pub bound: f64,
}

/// Synthesis knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    pub objective: ObjectiveKind,
    pub margin: f64,
    pub post_tol: f64,
    #[serde(default)]
    pub state_bounds: Vec<StateBoundConfig>,
}

/// Simulation knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// Plant initial states, one case each.
    pub x0: Vec<Vec<f64>>,
    pub horizon: usize,
    /// Event sampling intervals, one case each.
    pub thetas: Vec<usize>,
    pub roa_points: usize,
    #[serde(default = "one")]
    pub predictor_uncertainty_scale: f64,
}

fn one() -> f64 {
    1.0
}

/// Single JSON run document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub dnn: DnnConfig,
    pub event: EventConfig,
    #[serde(rename = "self")]
    pub self_triggered: SelfConfig,
    pub relaxation: RelaxationConfig,
    pub synthesis: SynthesisConfig,
    pub sweep: SweepGrid,
    pub simulation: SimulationConfig,
    pub out: PathBuf,
}

impl RunConfig {
    /// Embedded pendulum preset.
    pub fn pendulum_preset() -> Self {
        let phi_bar = PendulumParams::default().phi_bar;
        Self {
            system: SystemConfig::Pendulum { params: None },
            dnn: DnnConfig::Surrogate {
                k: vec![vec![3.0, 0.8]],
                scale: 0.1,
                widths: (32, 32),
            },
            event: EventConfig {
                eps1: 0.003,
                eps2: 0.002,
                mu: 0.05,
                g: 500.0,
                theta_l: 1,
                theta_u: 5,
                theta_mode: ThetaMode::Vertices,
                alpha0: 0.0,
            },
            self_triggered: SelfConfig {
                eps1c: 0.8,
                eps2c: 0.6,
                s_bar: 10,
            },
            relaxation: RelaxationConfig {
                delta_rho: 0.45,
                delta_beta: 1.0,
            },
            synthesis: SynthesisConfig {
                objective: ObjectiveKind::Trace,
                margin: 1e-6,
                post_tol: 1e-7,
                state_bounds: vec![StateBoundConfig {
                    row: vec![1.0, 0.0],
                    bound: phi_bar,
                }],
            },
            sweep: SweepGrid {
                delta_rho: vec![0.25, 0.45],
                delta_beta: vec![0.97, 1.0, 1.03],
                param: vec![2, 5],
            },
            simulation: SimulationConfig {
                x0: vec![vec![0.19, 3.5], vec![0.43, 3.0], vec![-0.33, -3.3]],
                horizon: 800,
                thetas: vec![4, 3, 2, 1],
                roa_points: 64,
                predictor_uncertainty_scale: 1.0,
            },
            out: PathBuf::from("out"),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.simulation.horizon == 0 {
            return bad("simulation.horizon must be ≥ 1");
        }
        if self.simulation.roa_points == 0 {
            return bad("simulation.roa_points must be ≥ 1");
        }
        if self.simulation.thetas.contains(&0) {
            return bad("simulation.thetas entries must be ≥ 1");
        }
        if self.event.theta_l == 0 || self.event.theta_l > self.event.theta_u {
            return bad("event needs 1 ≤ theta_l ≤ theta_u");
        }
        if self.self_triggered.s_bar == 0 {
            return bad("self.s_bar must be ≥ 1");
        }
        if !(self.synthesis.margin >= 0.0) || !(self.synthesis.post_tol >= 0.0) {
            return bad("synthesis tolerances must be ≥ 0");
        }
        self.sweep
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Plant, uncertainty and filter.
    pub fn system(&self) -> Result<(Plant, UncertaintyOp, IqcFilter)> {
        match &self.system {
            SystemConfig::Pendulum { params } => build_pendulum(&params.unwrap_or_default()),
            SystemConfig::Explicit {
                plant,
                uncertainty,
                filter,
            } => {
                plant.validate()?;
                filter.validate()?;
                Ok((plant.clone(), *uncertainty, filter.clone()))
            }
        }
    }

    /// Controller.
    pub fn network(&self) -> Result<Dnn> {
        match &self.dnn {
            DnnConfig::File { path } => Dnn::from_json_file(path),
            DnnConfig::Surrogate { k, scale, widths } => {
                let rows = k.len();
                let cols = k.first().map_or(0, Vec::len);
                if rows == 0 || k.iter().any(|r| r.len() != cols) {
                    return Err(Error::Config(
                        "surrogate gain must be a nonempty rectangular matrix".into(),
                    ));
                }
                let flat: Vec<f64> = k.iter().flatten().copied().collect();
                synthesize_surrogate(&DMatrix::from_row_slice(rows, cols, &flat), *scale, *widths)
            }
        }
    }

    /// Closed loop for simulation.
    pub fn closed_loop(&self) -> Result<ClosedLoop> {
        let (plant, unc, filter) = self.system()?;
        ClosedLoop::new(plant, unc, filter, self.network()?)
    }

    /// Scheme scalars of the certificate.
    pub fn scheme(&self, scheme: SchemeChoice) -> SchemeScalars {
        match scheme {
            SchemeChoice::Event => SchemeScalars::Event {
                eps1: self.event.eps1,
                eps2: self.event.eps2,
                mu: self.event.mu,
                g: self.event.g,
                theta_l: self.event.theta_l,
                theta_u: self.event.theta_u,
                theta_mode: self.event.theta_mode,
            },
            SchemeChoice::SelfTriggered => SchemeScalars::SelfTriggered {
                eps1c: self.self_triggered.eps1c,
                eps2c: self.self_triggered.eps2c,
                s_bar: self.self_triggered.s_bar,
            },
        }
    }

    fn state_rows(&self) -> Vec<RowBound> {
        self.synthesis
            .state_bounds
            .iter()
            .map(|b| RowBound {
                row: DVector::from_vec(b.row.clone()),
                bound: b.bound,
            })
            .collect()
    }

    /// Sweep ingredients.
    pub fn template(&self, scheme: SchemeChoice) -> Result<SweepTemplate> {
        let (plant, _, filter) = self.system()?;
        Ok(SweepTemplate {
            sys: build_augmented(&plant, &filter)?,
            dnn: self.network()?,
            m_theta: filter.m_theta.clone(),
            scheme: self.scheme(scheme),
            extra_rows: self.state_rows(),
        })
    }

    /// Assembly context at the configured relaxation point.
    pub fn context(&self, scheme: SchemeChoice) -> Result<TheoremContext> {
        let t = self.template(scheme)?;
        let param = match scheme {
            SchemeChoice::Event => self.event.theta_u,
            SchemeChoice::SelfTriggered => self.self_triggered.s_bar,
        };
        let mut ctx = t.context(self.relaxation.delta_rho, self.relaxation.delta_beta, param)?;
        if let SchemeScalars::Event { theta_l, .. } = &mut ctx.scheme {
            *theta_l = self.event.theta_l;
        }
        Ok(ctx)
    }

    /// Solver options with the environment tolerance override.
    pub fn options(&self) -> Result<SynthesisOptions> {
        let mut o = SynthesisOptions::from_env()?;
        o.objective = self.synthesis.objective;
        o.margin = self.synthesis.margin;
        o.post_tol = self.synthesis.post_tol;
        Ok(o)
    }
}

/// Certificate family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeChoice {
    Event,
    #[value(name = "self")]
    SelfTriggered,
}

/// Objective flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveChoice {
    Trace,
    Logdet,
}

/// Command-line interface.
#[derive(Debug, Parser)]
#[command(
    name = "trigcert",
    version,
    about = "Certify, synthesize and simulate triggered neural feedback loops"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration; the pendulum preset when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Controller weight file overriding the configuration.
    #[arg(long)]
    pub dnn: Option<PathBuf>,
    /// Output directory overriding the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeChoice>,
    /// Upper sampling interval (event) or simulated interval list entry.
    #[arg(long)]
    pub theta: Option<usize>,
    #[arg(long = "s-bar")]
    pub s_bar: Option<usize>,
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveChoice>,
    /// Certificate file; `<out>/certificate.json` when omitted.
    #[arg(long)]
    pub cert: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the event-triggered certificate.
    SynthesizeEvent(Common),
    /// Solve the self-triggered certificate.
    SynthesizeSelf(Common),
    /// Sweep relaxation and interval parameters.
    Sweep(Common),
    /// Roll out the configured cases under a certificate.
    Simulate(Common),
    /// Re-check a certificate and its closed-loop behaviour.
    Verify(Common),
    /// Export the ellipsoid boundary and validate it by simulation.
    Roa(Common),
}

impl Common {
    /// Configuration with the flag overrides applied.
    pub fn resolve(&self, default_scheme: SchemeChoice) -> Result<(RunConfig, SchemeChoice)> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::read(p)?,
            None => RunConfig::pendulum_preset(),
        };
        if let Some(p) = &self.dnn {
            cfg.dnn = DnnConfig::File { path: p.clone() };
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        let scheme = self.scheme.unwrap_or(default_scheme);
        if let Some(t) = self.theta {
            cfg.event.theta_u = t;
            cfg.event.theta_l = cfg.event.theta_l.min(t);
            cfg.simulation.thetas = vec![t];
        }
        if let Some(s) = self.s_bar {
            cfg.self_triggered.s_bar = s;
        }
        if let Some(o) = self.objective {
            cfg.synthesis.objective = match o {
                ObjectiveChoice::Trace => ObjectiveKind::Trace,
                ObjectiveChoice::Logdet => ObjectiveKind::LogdetLinearized,
            };
        }
        cfg.validate()?;
        Ok((cfg, scheme))
    }

    fn cert_path(&self, cfg: &RunConfig) -> PathBuf {
        self.cert
            .clone()
            .unwrap_or_else(|| cfg.out.join("certificate.json"))
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

/// Exit code of an error.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        Error::Solver(_) => EXIT_INFEASIBLE,
        _ => EXIT_CONFIG,
    }
}

fn dispatch(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::SynthesizeEvent(c) => cmd_synthesize(c, SchemeChoice::Event),
        Command::SynthesizeSelf(c) => cmd_synthesize(c, SchemeChoice::SelfTriggered),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Simulate(c) => cmd_simulate(c),
        Command::Verify(c) => cmd_verify(c),
        Command::Roa(c) => cmd_roa(c),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn read_cert(path: &Path) -> Result<SynthesisResult> {
    let s =
        fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    SynthesisResult::from_json(&s).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn scheme_of(cert: &SynthesisResult) -> SchemeChoice {
    match cert.scheme {
        SchemeScalars::Event { .. } => SchemeChoice::Event,
        SchemeScalars::SelfTriggered { .. } => SchemeChoice::SelfTriggered,
    }
}

/// Solve report written next to the certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub status: String,
    pub solver_status: String,
    pub objective: f64,
    pub volume_proxy: f64,
    pub worst_slack: Option<f64>,
    pub oracle_pass: bool,
    pub lambda: Option<(f64, f64)>,
    pub row_ratio: Option<f64>,
}

/// Solves one certificate; exit 0 iff optimal with a passing oracle.
pub fn cmd_synthesize(c: &Common, default_scheme: SchemeChoice) -> Result<i32> {
    let (cfg, _) = c.resolve(default_scheme)?;
    let scheme = default_scheme;
    let ctx = cfg.context(scheme)?;
    let res = solve(&ctx, &cfg.options()?)?;
    let oracle_pass = res.oracle.as_ref().is_some_and(|o| o.pass);
    let report = SynthesisReport {
        status: format!("{:?}", res.status).to_lowercase(),
        solver_status: res.solver_status.clone(),
        objective: res.objective,
        volume_proxy: res.volume_proxy(),
        worst_slack: res.oracle.as_ref().map(|o| o.worst_slack),
        oracle_pass,
        lambda: res.lambda,
        row_ratio: res.row_ratio,
    };
    write(
        &cfg.out,
        "synthesis_report.json",
        &serde_json::to_string_pretty(&report)?,
    )?;
    write(&cfg.out, "certificate.json", &res.to_json()?)?;
    if let Some(roa) = &res.roa {
        write(
            &cfg.out,
            "ellipse.csv",
            &boundary_csv(&roa_boundary(roa, 256)?),
        )?;
    }
    println!("{}", serde_json::to_string(&report)?);
    Ok(if res.is_optimal() && oracle_pass {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    })
}

/// Runs the configured sweep grid.
pub fn cmd_sweep(c: &Common) -> Result<i32> {
    let (cfg, scheme) = c.resolve(SchemeChoice::Event)?;
    let outcome = sweep(&cfg.template(scheme)?, &cfg.sweep, &cfg.options()?)?;
    write(&cfg.out, "sweep.csv", &outcome.to_csv())?;
    let best = outcome.best.map(|i| outcome.rows[i].clone());
    write(
        &cfg.out,
        "sweep_best.json",
        &serde_json::to_string_pretty(&best)?,
    )?;
    println!("{}", serde_json::to_string(&best)?);
    Ok(if best.is_some() {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    })
}

/// Monitors of one simulated case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseReport {
    pub case: usize,
    pub x0: Vec<f64>,
    pub theta: Option<usize>,
    pub metrics: Metrics,
    pub efficiency_percent: String,
    pub lyapunov: LyapunovReport,
    pub iqc: IqcMonitorReport,
}

impl CaseReport {
    pub fn pass(&self) -> bool {
        self.lyapunov.pass && self.iqc.pass && self.metrics.converged
    }
}

/// Simulation cases of a configuration under a certificate.
pub fn simulation_cases(
    cfg: &RunConfig,
    cert: &SynthesisResult,
) -> Result<Vec<(SimConfig, Option<usize>)>> {
    let n = cfg.system()?.0.n();
    let mut out = Vec::new();
    for x in &cfg.simulation.x0 {
        if x.len() != n {
            return Err(Error::Config(format!("x0 entries need {n} components")));
        }
    }
    match scheme_of(cert) {
        SchemeChoice::Event => {
            for &t in &cfg.simulation.thetas {
                for x in &cfg.simulation.x0 {
                    let p = event_params_from(cert, t, cfg.event.alpha0)?;
                    let horizon = cfg.simulation.horizon.div_ceil(t) * t;
                    out.push((
                        SimConfig::new(horizon, DVector::from_vec(x.clone()), SimScheme::Event(p)),
                        Some(t),
                    ));
                }
            }
        }
        SchemeChoice::SelfTriggered => {
            for x in &cfg.simulation.x0 {
                let mut sc = SimConfig::new(
                    cfg.simulation.horizon,
                    DVector::from_vec(x.clone()),
                    SimScheme::SelfTriggered(self_params_from(cert)?),
                );
                sc.predictor_uncertainty_scale = cfg.simulation.predictor_uncertainty_scale;
                out.push((sc, None));
            }
        }
    }
    Ok(out)
}

fn run_cases(cfg: &RunConfig, cert: &SynthesisResult, emit: bool) -> Result<Vec<CaseReport>> {
    let cl = cfg.closed_loop()?;
    let mon = MonitorData::from_certificate(cert)?;
    let bound = cfg.synthesis.state_bounds.first().map(|b| b.bound);
    let mut reports = Vec::new();
    for (i, (sc, theta)) in simulation_cases(cfg, cert)?.into_iter().enumerate() {
        let (traj, metrics) = rollout(&sc, &cl, Some(&mon))?;
        let lyapunov = lyapunov_monitor(&traj, theta, Some(&cl.filter.m_theta))?;
        let iqc = iqc_monitor(&traj, &cl.filter, bound)?;
        let case = i + 1;
        if emit {
            write(
                &cfg.out,
                &format!("trajectory_case{case}.csv"),
                &traj.to_csv(),
            )?;
        }
        reports.push(CaseReport {
            case,
            x0: sc.x0.as_slice().to_vec(),
            theta,
            efficiency_percent: crate::triggers::efficiency_percent(
                metrics.samples,
                metrics.transmissions,
            ),
            metrics,
            lyapunov,
            iqc,
        });
    }
    Ok(reports)
}

/// Simulates every configured case; writes trajectories, metrics and
/// monitor reports.
pub fn cmd_simulate(c: &Common) -> Result<i32> {
    let (cfg, _) = c.resolve(SchemeChoice::Event)?;
    let cert = read_cert(&c.cert_path(&cfg))?;
    let reports = run_cases(&cfg, &cert, true)?;
    write(
        &cfg.out,
        "simulation_report.json",
        &serde_json::to_string_pretty(&reports)?,
    )?;
    for r in &reports {
        println!(
            "case {} theta {:?}: tx {}/{} efficiency {}% converged {} lyapunov {} iqc {}",
            r.case,
            r.theta,
            r.metrics.transmissions,
            r.metrics.samples,
            r.efficiency_percent,
            r.metrics.converged,
            r.lyapunov.pass,
            r.iqc.pass
        );
    }
    Ok(EXIT_OK)
}

/// Ellipsoid validation used by `roa` and `verify`.
pub fn validate_roa(cfg: &RunConfig, cert: &SynthesisResult) -> Result<RoaValidationReport> {
    let roa = cert
        .roa
        .as_ref()
        .ok_or_else(|| Error::Config("certificate has no ellipsoid".into()))?;
    let cl = cfg.closed_loop()?;
    let scheme = match scheme_of(cert) {
        SchemeChoice::Event => {
            let t = cfg.simulation.thetas.iter().copied().max().unwrap_or(1);
            SimScheme::Event(event_params_from(cert, t, cfg.event.alpha0)?)
        }
        SchemeChoice::SelfTriggered => SimScheme::SelfTriggered(self_params_from(cert)?),
    };
    let horizon = match &scheme {
        SimScheme::Event(p) => cfg.simulation.horizon.div_ceil(p.theta) * p.theta,
        _ => cfg.simulation.horizon,
    };
    let mut starts = roa_samples(roa, cfg.simulation.roa_points, false, 1.0, 0)?;
    starts.extend(roa_samples(roa, cfg.simulation.roa_points, true, 1.0, 0)?);
    roa_validation(&starts, &cl, &scheme, horizon)
}

/// Writes the ellipsoid boundary and the validation report.
pub fn cmd_roa(c: &Common) -> Result<i32> {
    let (cfg, _) = c.resolve(SchemeChoice::Event)?;
    let cert = read_cert(&c.cert_path(&cfg))?;
    let roa = cert
        .roa
        .as_ref()
        .ok_or_else(|| Error::Config("certificate has no ellipsoid".into()))?;
    write(
        &cfg.out,
        "ellipse.csv",
        &boundary_csv(&roa_boundary(roa, 256)?),
    )?;
    let report = validate_roa(&cfg, &cert)?;
    write(
        &cfg.out,
        "roa_report.json",
        &serde_json::to_string_pretty(&report)?,
    )?;
    println!("fraction converged {}", report.fraction_converged);
    Ok(if report.pass {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    })
}

/// Verification summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub oracle_pass: bool,
    pub worst_slack: f64,
    pub cases: Vec<CaseReport>,
    pub roa: RoaValidationReport,
    pub pass: bool,
}

/// Re-runs the oracle on the stored assignment, every simulation case and
/// the ellipsoid validation; exit 0 iff all pass.
pub fn cmd_verify(c: &Common) -> Result<i32> {
    let (cfg, _) = c.resolve(SchemeChoice::Event)?;
    let cert = read_cert(&c.cert_path(&cfg))?;
    let ctx = certificate_context(&cfg, &cert)?;
    let problem = assemble(&ctx)?;
    let oracle = feasibility_oracle(
        &problem,
        &cert.assignment,
        cfg.synthesis.post_tol,
        cfg.synthesis.post_tol,
    )?;
    let cases = match run_cases(&cfg, &cert, false) {
        Ok(c) => c,
        Err(Error::Divergence { .. }) => Vec::new(),
        Err(e) => return Err(e),
    };
    let roa = validate_roa(&cfg, &cert)?;
    let pass = oracle.pass && !cases.is_empty() && cases.iter().all(CaseReport::pass) && roa.pass;
    let report = VerifyReport {
        oracle_pass: oracle.pass,
        worst_slack: oracle.worst_slack,
        cases,
        roa,
        pass,
    };
    write(
        &cfg.out,
        "verify_report.json",
        &serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "oracle {} (worst slack {:.3e}) cases {} roa {} => {}",
        report.oracle_pass,
        report.worst_slack,
        report.cases.iter().all(CaseReport::pass),
        report.roa.pass,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(if pass { EXIT_OK } else { EXIT_INFEASIBLE })
}

/// Assembly context matching a stored certificate.
pub fn certificate_context(cfg: &RunConfig, cert: &SynthesisResult) -> Result<TheoremContext> {
    let mut t = cfg.template(scheme_of(cert))?;
    t.scheme = cert.scheme.clone();
    let (dr, db) = cert
        .relaxation
        .as_ref()
        .map_or((cfg.relaxation.delta_rho, cfg.relaxation.delta_beta), |r| {
            (r.delta_rho, r.delta_beta)
        });
    let param = match cert.scheme {
        SchemeScalars::Event { theta_u, .. } => theta_u,
        SchemeScalars::SelfTriggered { s_bar, .. } => s_bar,
    };
    let mut ctx = t.context(dr, db, param)?;
    ctx.scheme = cert.scheme.clone();
    Ok(ctx)
}
