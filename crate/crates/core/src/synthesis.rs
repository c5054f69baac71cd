// SPDX-License-Identifier: MIT
//! Certificate synthesis: conic solves with an ellipsoid-size objective,
//! parameter sweeps and extraction of trigger matrices and ellipsoids.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_spd, min_eig};
use crate::lmi::conic::{solve_clarabel, ConicProgram, SolveStatus, SolverSettings};
use crate::lmi::expr::{Assignment, LmiProblem};
use crate::lmi::oracle::{feasibility_oracle, OracleReport};
use crate::lmi::theorems::{assemble, RowBound, SchemeScalars, TheoremContext};
use crate::nnet::Dnn;
use crate::parallel::par_map;
use crate::uncertain_plant::{AugmentedSystem, RoaEllipsoid};

/// Ellipsoid-size objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// Minimise `tr(P_1)`.
    Trace,
    /// Iterate `min tr(P_1,prev⁻¹ P_1)` from the trace solution.
    LogdetLinearized,
}

/// Solve options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub objective: ObjectiveKind,
    /// Strictness margin of the conic program.
    pub margin: f64,
    /// Post-solve oracle tolerance.
    pub post_tol: f64,
    pub solver: SolverSettings,
    pub max_logdet_iters: usize,
    pub logdet_rel_tol: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            objective: ObjectiveKind::Trace,
            margin: 1e-6,
            post_tol: 1e-7,
            solver: SolverSettings::default(),
            max_logdet_iters: 20,
            logdet_rel_tol: 1e-6,
        }
    }
}

impl SynthesisOptions {
    /// Defaults with the solver tolerance read from the environment.
    pub fn from_env() -> Result<Self> {
        Ok(Self {
            solver: SolverSettings::from_env()?,
            ..Self::default()
        })
    }
}

/// Outcome tag of a synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisStatus {
    Optimal,
    Infeasible,
    Inaccurate,
}

/// Trigger weights extracted from a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerMatrices {
    pub xi1: DMatrix<f64>,
    pub xi2: DMatrix<f64>,
}

/// Relaxation parameters a certificate was computed with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationParams {
    pub delta_rho: f64,
    pub delta_beta: f64,
}

/// Result of one synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub scheme: SchemeScalars,
    pub relaxation: Option<RelaxationParams>,
    pub objective_kind: ObjectiveKind,
    pub status: SynthesisStatus,
    pub solver_status: String,
    pub objective: f64,
    pub assignment: Assignment,
    pub roa: Option<RoaEllipsoid>,
    pub trigger_out: Option<TriggerMatrices>,
    /// `(λ̄_1, λ̄_2)` for the self-triggered certificate.
    pub lambda: Option<(f64, f64)>,
    pub oracle: Option<OracleReport>,
    /// `max_j W_1j P_1⁻¹ W_1jᵀ / δ_j²`.
    pub row_ratio: Option<f64>,
    pub iterations: usize,
}

impl SynthesisResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SynthesisStatus::Optimal
    }

    /// `det(P_1)^{−1/2}`, or 0 without an ellipsoid.
    pub fn volume_proxy(&self) -> f64 {
        self.roa.as_ref().map_or(0.0, RoaEllipsoid::volume_proxy)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Upper-left `n × n` block of `P`.
fn p1_of(assign: &Assignment, n: usize) -> Result<DMatrix<f64>> {
    Ok(assign.get("P")?.view((0, 0), (n, n)).into_owned())
}

/// `max_j W_1j P_1⁻¹ W_1jᵀ / δ_j²`.
pub fn row_ratio(ctx: &TheoremContext, p1: &DMatrix<f64>) -> Option<f64> {
    let inv = p1.clone().try_inverse()?;
    let w1 = ctx.w1();
    let n = ctx.n();
    let mut worst: f64 = 0.0;
    for j in 0..w1.nrows() {
        let r = w1.rows(j, 1).into_owned();
        let delta = ctx.bx.upper[j] - ctx.bx.center[j];
        worst = worst.max((&r * &inv * r.transpose())[(0, 0)] / (delta * delta));
    }
    for rb in &ctx.extra_rows {
        let r = DMatrix::from_row_slice(1, n, rb.row.as_slice());
        worst = worst.max((&r * &inv * r.transpose())[(0, 0)] / (rb.bound * rb.bound));
    }
    Some(worst)
}

fn solve_problem(
    ctx: &TheoremContext,
    problem: &LmiProblem,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    let n = ctx.n();
    let mut prog = ConicProgram::from_problem(problem, opts.margin)?;
    prog.set_weighted_trace_objective("P", &DMatrix::identity(n, n))?;
    let mut sol = solve_clarabel(&prog, &opts.solver)?;
    let mut iterations = 1;
    if opts.objective == ObjectiveKind::LogdetLinearized && sol.status == SolveStatus::Optimal {
        let mut prev_logdet = f64::NAN;
        for _ in 0..opts.max_logdet_iters {
            let asg = Assignment::from_vector(&problem.vars, &sol.x)?;
            let p1 = p1_of(&asg, n)?;
            let logdet = p1.determinant().ln();
            if prev_logdet.is_finite()
                && (logdet - prev_logdet).abs() <= opts.logdet_rel_tol * prev_logdet.abs().max(1.0)
            {
                break;
            }
            prev_logdet = logdet;
            let Some(w) = p1.clone().try_inverse() else {
                break;
            };
            let w = (&w + w.transpose()) * 0.5;
            prog.set_weighted_trace_objective("P", &w)?;
            let next = solve_clarabel(&prog, &opts.solver)?;
            iterations += 1;
            if next.status != SolveStatus::Optimal {
                break;
            }
            sol = next;
        }
    }
    let assignment = Assignment::from_vector(&problem.vars, &sol.x)?;
    let mut status = match sol.status {
        SolveStatus::Optimal => SynthesisStatus::Optimal,
        SolveStatus::Infeasible => SynthesisStatus::Infeasible,
        SolveStatus::Inaccurate => SynthesisStatus::Inaccurate,
    };
    let (mut roa, mut trigger_out, mut lambda, mut oracle, mut ratio) =
        (None, None, None, None, None);
    if status != SynthesisStatus::Infeasible {
        let report = feasibility_oracle(problem, &assignment, opts.post_tol, opts.post_tol)?;
        let p1 = p1_of(&assignment, n)?;
        if status == SynthesisStatus::Optimal && (!report.pass || min_eig(&p1) <= 0.0) {
            status = SynthesisStatus::Inaccurate;
        }
        ratio = row_ratio(ctx, &p1);
        roa = Some(RoaEllipsoid {
            p1,
            center: DVector::zeros(n),
        });
        trigger_out = Some(TriggerMatrices {
            xi1: assignment.get("Xi1")?.clone(),
            xi2: assignment.get("Xi2")?.clone(),
        });
        if let SchemeScalars::SelfTriggered { .. } = ctx.scheme {
            lambda = Some((
                assignment.get("lambda1")?[(0, 0)],
                assignment.get("lambda2")?[(0, 0)],
            ));
        }
        oracle = Some(report);
    }
    Ok(SynthesisResult {
        scheme: ctx.scheme.clone(),
        relaxation: ctx
            .relaxation
            .map(|(delta_rho, delta_beta)| RelaxationParams {
                delta_rho,
                delta_beta,
            }),
        objective_kind: opts.objective,
        status,
        solver_status: sol.solver_status,
        objective: sol.objective,
        assignment,
        roa,
        trigger_out,
        lambda,
        oracle,
        row_ratio: ratio,
        iterations,
    })
}

/// Solves the event-triggered certificate.
pub fn solve_event(ctx: &TheoremContext, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    if !matches!(ctx.scheme, SchemeScalars::Event { .. }) {
        return Err(Error::InvalidParameter(
            "solve_event needs an event-triggered context".into(),
        ));
    }
    solve_problem(ctx, &assemble(ctx)?, opts)
}

/// Solves the self-triggered certificate.
pub fn solve_self(ctx: &TheoremContext, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    if !matches!(ctx.scheme, SchemeScalars::SelfTriggered { .. }) {
        return Err(Error::InvalidParameter(
            "solve_self needs a self-triggered context".into(),
        ));
    }
    solve_problem(ctx, &assemble(ctx)?, opts)
}

/// Dispatches on the context's scheme.
pub fn solve(ctx: &TheoremContext, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    solve_problem(ctx, &assemble(ctx)?, opts)
}

/// Fixed ingredients of a sweep.
#[derive(Debug, Clone)]
pub struct SweepTemplate {
    pub sys: AugmentedSystem,
    pub dnn: Dnn,
    pub m_theta: DMatrix<f64>,
    pub scheme: SchemeScalars,
    pub extra_rows: Vec<RowBound>,
}

impl SweepTemplate {
    /// Context for one grid point; `param` replaces `ϑ_u` (event) or `s̄`
    /// (self).
    pub fn context(&self, delta_rho: f64, delta_beta: f64, param: usize) -> Result<TheoremContext> {
        let scheme = match self.scheme.clone() {
            SchemeScalars::Event {
                eps1,
                eps2,
                mu,
                g,
                theta_l,
                theta_mode,
                ..
            } => SchemeScalars::Event {
                eps1,
                eps2,
                mu,
                g,
                theta_l: theta_l.min(param),
                theta_u: param,
                theta_mode,
            },
            SchemeScalars::SelfTriggered { eps1c, eps2c, .. } => SchemeScalars::SelfTriggered {
                eps1c,
                eps2c,
                s_bar: param,
            },
        };
        let mut ctx = TheoremContext::from_network(
            &self.sys,
            &self.dnn,
            delta_rho,
            delta_beta,
            &self.m_theta,
            scheme,
        )?;
        ctx.extra_rows = self.extra_rows.clone();
        ctx.validate()?;
        Ok(ctx)
    }
}

/// Sweep axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub delta_rho: Vec<f64>,
    pub delta_beta: Vec<f64>,
    /// `ϑ_u` values (event) or `s̄` values (self).
    pub param: Vec<usize>,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.delta_rho.is_empty() || self.delta_beta.is_empty() || self.param.is_empty() {
            return Err(Error::InvalidParameter(
                "sweep grid axes must be nonempty".into(),
            ));
        }
        if self
            .delta_rho
            .iter()
            .chain(&self.delta_beta)
            .any(|&v| !(v > 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidParameter(
                "sweep grid entries must be positive".into(),
            ));
        }
        if self.param.contains(&0) {
            return Err(Error::InvalidParameter(
                "sweep parameter must be ≥ 1".into(),
            ));
        }
        Ok(())
    }

    /// Grid points in row-major order `(δ_ρ, δ_β, param)`.
    pub fn points(&self) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::new();
        for &r in &self.delta_rho {
            for &b in &self.delta_beta {
                for &p in &self.param {
                    out.push((r, b, p));
                }
            }
        }
        out
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta_rho: f64,
    pub delta_beta: f64,
    pub param: usize,
    pub status: String,
    pub objective: f64,
    pub volume: f64,
    pub worst_slack: f64,
}

/// Sweep table plus the selected point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub best: Option<usize>,
}

impl SweepOutcome {
    /// CSV with header `delta_rho,delta_beta,param,status,objective,volume,worst_slack`.
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("delta_rho,delta_beta,param,status,objective,volume,worst_slack\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{:.12e},{:.12e},{:.6e}\n",
                r.delta_rho, r.delta_beta, r.param, r.status, r.objective, r.volume, r.worst_slack
            ));
        }
        s
    }
}

/// Index of the largest-volume optimal row; within `1e−9` prefers the
/// smaller `ϑ_u` (event) or the larger `s̄` (self).
pub fn select_best(rows: &[SweepRow], event: bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in rows.iter().enumerate() {
        if r.status != "optimal" {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let rb = &rows[b];
                let better = if r.volume > rb.volume + 1e-9 {
                    true
                } else if (r.volume - rb.volume).abs() <= 1e-9 {
                    if event {
                        r.param < rb.param
                    } else {
                        r.param > rb.param
                    }
                } else {
                    false
                };
                Some(if better { i } else { b })
            }
        };
    }
    best
}

fn status_tag(s: SynthesisStatus) -> &'static str {
    match s {
        SynthesisStatus::Optimal => "optimal",
        SynthesisStatus::Infeasible => "infeasible",
        SynthesisStatus::Inaccurate => "inaccurate",
    }
}

/// Solves every grid point; per-point failures are recorded as rows with
/// status `error`.
pub fn sweep(
    template: &SweepTemplate,
    grid: &SweepGrid,
    opts: &SynthesisOptions,
) -> Result<SweepOutcome> {
    grid.validate()?;
    let points = grid.points();
    let rows = par_map(&points, |&(r, b, p)| {
        let res = template.context(r, b, p).and_then(|ctx| solve(&ctx, opts));
        match res {
            Ok(res) => SweepRow {
                delta_rho: r,
                delta_beta: b,
                param: p,
                status: status_tag(res.status).into(),
                objective: res.objective,
                volume: if res.is_optimal() {
                    res.volume_proxy()
                } else {
                    0.0
                },
                worst_slack: res.oracle.as_ref().map_or(f64::NAN, |o| o.worst_slack),
            },
            Err(_) => SweepRow {
                delta_rho: r,
                delta_beta: b,
                param: p,
                status: "error".into(),
                objective: f64::NAN,
                volume: 0.0,
                worst_slack: f64::NAN,
            },
        }
    });
    let event = matches!(template.scheme, SchemeScalars::Event { .. });
    let best = select_best(&rows, event);
    Ok(SweepOutcome { rows, best })
}

/// Boundary points of the ellipsoid: a traced curve for `n = 2`, the
/// `±` principal-axis endpoints otherwise.
pub fn roa_boundary(roa: &RoaEllipsoid, samples: usize) -> Result<Vec<DVector<f64>>> {
    let n = roa.p1.nrows();
    if min_eig(&roa.p1) <= 0.0 {
        return Err(Error::InvalidParameter(
            "P_1 must be positive definite".into(),
        ));
    }
    let root = inv_sqrt_spd(&roa.p1)?;
    if n == 2 {
        if samples == 0 {
            return Err(Error::InvalidParameter("samples must be ≥ 1".into()));
        }
        Ok((0..samples)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / samples as f64;
                &roa.center + &root * DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect())
    } else {
        let mut out = Vec::with_capacity(2 * n);
        for i in 0..n {
            let col = root.column(i).into_owned();
            out.push(&roa.center + &col);
            out.push(&roa.center - &col);
        }
        Ok(out)
    }
}

/// Ellipsoid boundary as CSV with header `x1,x2,...`.
pub fn boundary_csv(points: &[DVector<f64>]) -> String {
    let n = points.first().map_or(0, |p| p.len());
    let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let mut s = header.join(",") + "\n";
    for p in points {
        let row: Vec<String> = p.iter().map(|v| format!("{v:.12e}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}
