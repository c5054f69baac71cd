// SPDX-License-Identifier: MIT
//! Conic-program interchange document and the embedded solver adapter.
//!
//! Every block is stored in the canonical form `S(x) = F₀ + Σ x_k F_k ⪰ 0`
//! with upper-triangle triplets; a triplet `(r, c, v)` with `r < c` stands
//! for both `(r, c)` and `(c, r)`.

use std::path::Path;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::expr::{Assignment, LmiProblem, Sense, VarKind, VarSpec};
use crate::error::{Error, Result};

/// Format tag written into every document.
pub const CONIC_FORMAT: &str = "trigcert-conic/1";

/// Environment variable overriding the solver feasibility tolerance.
pub const SOLVER_TOL_ENV: &str = "TRIGCERT_SOLVER_TOL";

/// Declared variable with its offset in the stacked decision vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicVar {
    pub spec: VarSpec,
    pub offset: usize,
}

/// Entry of a constant matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Entry of a coefficient matrix for global scalar `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefEntry {
    pub k: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Where a block came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockOrigin {
    Constraint(Sense),
    VariableCone,
}

/// One semidefinite block `F₀ + Σ x_k F_k ⪰ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicBlock {
    pub name: String,
    pub size: usize,
    pub origin: BlockOrigin,
    pub constant: Vec<Entry>,
    pub coefficients: Vec<CoefEntry>,
}

/// Scalar bound `x_k ≥ lower`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub k: usize,
    pub lower: f64,
}

/// Complete interchange document, optionally carrying a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConicProgram {
    pub format: String,
    pub num_scalars: usize,
    pub margin: f64,
    pub vars: Vec<ConicVar>,
    pub blocks: Vec<ConicBlock>,
    pub lower_bounds: Vec<LowerBound>,
    /// Linear objective `Σ c_k x_k` to minimise.
    pub objective: Vec<(usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<Vec<f64>>,
}

impl ConicProgram {
    /// Converts an assembled problem; `NegDef` constraints become
    /// `−F(x) − margin·I ⪰ 0`, `Psd` constraints `F(x) − margin·I ⪰ 0`,
    /// `SymPsd` variables `V − margin·I ⪰ 0`,
    /// nonnegative vectors `≥ 0` and nonnegative scalars `≥ margin`.
    pub fn from_problem(problem: &LmiProblem, margin: f64) -> Result<Self> {
        problem.validate()?;
        if !(margin >= 0.0) || !margin.is_finite() {
            return Err(Error::InvalidParameter("margin must be ≥ 0".into()));
        }
        let mut vars = Vec::with_capacity(problem.vars.len());
        let mut offset = 0;
        for v in &problem.vars {
            vars.push(ConicVar {
                spec: v.clone(),
                offset,
            });
            offset += v.len();
        }
        let offset_of = |name: &str| {
            vars.iter()
                .find(|cv| cv.spec.name == name)
                .map(|cv| cv.offset)
        };
        let mut blocks = Vec::new();
        for l in &problem.lmis {
            let d = l.size();
            let sign = match l.sense {
                Sense::NegDef => -1.0,
                Sense::Psd => 1.0,
            };
            let mut constant = Vec::new();
            for c in 0..d {
                for r in 0..=c {
                    let mut v = sign * 0.5 * (l.expr.constant[(r, c)] + l.expr.constant[(c, r)]);
                    if r == c {
                        v -= margin;
                    }
                    if v != 0.0 {
                        constant.push(Entry {
                            row: r,
                            col: c,
                            value: v,
                        });
                    }
                }
            }
            let mut coefficients = Vec::new();
            for v in l.expr.variables() {
                let off = offset_of(&v.name).expect("validated");
                for (k, r, c, val) in l.expr.sparse_coefficients(&v) {
                    coefficients.push(CoefEntry {
                        k: off + k,
                        row: r,
                        col: c,
                        value: sign * val,
                    });
                }
            }
            blocks.push(ConicBlock {
                name: l.name.clone(),
                size: d,
                origin: BlockOrigin::Constraint(l.sense),
                constant,
                coefficients,
            });
        }
        let mut lower_bounds = Vec::new();
        for cv in &vars {
            match cv.spec.kind {
                VarKind::SymPsd => {
                    let n = cv.spec.rows;
                    let constant = (0..n)
                        .map(|i| Entry {
                            row: i,
                            col: i,
                            value: -margin,
                        })
                        .collect();
                    let coefficients = (0..cv.spec.len())
                        .map(|k| {
                            let (i, j) = cv.spec.entry(k);
                            CoefEntry {
                                k: cv.offset + k,
                                row: i.min(j),
                                col: i.max(j),
                                value: 1.0,
                            }
                        })
                        .collect();
                    blocks.push(ConicBlock {
                        name: format!("var:{}", cv.spec.name),
                        size: n,
                        origin: BlockOrigin::VariableCone,
                        constant,
                        coefficients,
                    });
                }
                VarKind::NonnegVector => {
                    lower_bounds.extend((0..cv.spec.len()).map(|k| LowerBound {
                        k: cv.offset + k,
                        lower: 0.0,
                    }));
                }
                VarKind::NonnegScalar => lower_bounds.push(LowerBound {
                    k: cv.offset,
                    lower: margin,
                }),
                VarKind::SymFree | VarKind::Free => {}
            }
        }
        Ok(Self {
            format: CONIC_FORMAT.into(),
            num_scalars: offset,
            margin,
            vars,
            blocks,
            lower_bounds,
            objective: Vec::new(),
            solution: None,
        })
    }

    pub fn var(&self, name: &str) -> Option<&ConicVar> {
        self.vars.iter().find(|cv| cv.spec.name == name)
    }

    /// Sets the objective to `tr(W · V₁₁)` where `V₁₁` is the leading
    /// `W.nrows()` block of the symmetric variable `name`.
    pub fn set_weighted_trace_objective(&mut self, name: &str, w: &DMatrix<f64>) -> Result<()> {
        let cv = self
            .var(name)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown variable {name}")))?
            .clone();
        let n = w.nrows();
        if !cv.spec.is_symmetric() || w.ncols() != n || n > cv.spec.rows {
            return Err(Error::InvalidParameter(format!(
                "objective weight does not fit {name}"
            )));
        }
        self.objective.clear();
        for k in 0..cv.spec.len() {
            let (i, j) = cv.spec.entry(k);
            if i < n && j < n {
                let c = if i == j {
                    w[(i, i)]
                } else {
                    w[(i, j)] + w[(j, i)]
                };
                if c != 0.0 {
                    self.objective.push((cv.offset + k, c));
                }
            }
        }
        Ok(())
    }

    /// Objective value at `x`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(k, c)| c * x[k]).sum()
    }

    /// Dense value of block `b` at `x`.
    pub fn block_value(&self, b: usize, x: &[f64]) -> DMatrix<f64> {
        let blk = &self.blocks[b];
        let mut m = DMatrix::zeros(blk.size, blk.size);
        for e in &blk.constant {
            m[(e.row, e.col)] += e.value;
            if e.row != e.col {
                m[(e.col, e.row)] += e.value;
            }
        }
        for e in &blk.coefficients {
            m[(e.row, e.col)] += e.value * x[e.k];
            if e.row != e.col {
                m[(e.col, e.row)] += e.value * x[e.k];
            }
        }
        m
    }

    /// Attached solution as a named assignment.
    pub fn assignment(&self) -> Result<Option<Assignment>> {
        let Some(x) = &self.solution else {
            return Ok(None);
        };
        let specs: Vec<VarSpec> = self.vars.iter().map(|cv| cv.spec.clone()).collect();
        Assignment::from_vector(&specs, x).map(Some)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Structural checks on an imported document.
    pub fn validate(&self) -> Result<()> {
        if self.format != CONIC_FORMAT {
            return Err(Error::Config(format!(
                "unknown conic format {}",
                self.format
            )));
        }
        let total: usize = self.vars.iter().map(|cv| cv.spec.len()).sum();
        if total != self.num_scalars {
            return Err(Error::Config("variable sizes do not add up".into()));
        }
        for b in &self.blocks {
            let bad_entry = b.constant.iter().any(|e| e.row > e.col || e.col >= b.size);
            let bad_coef = b
                .coefficients
                .iter()
                .any(|e| e.row > e.col || e.col >= b.size || e.k >= total);
            if bad_entry || bad_coef {
                return Err(Error::Config(format!(
                    "block {} has out-of-range entries",
                    b.name
                )));
            }
        }
        if self.lower_bounds.iter().any(|l| l.k >= total)
            || self.objective.iter().any(|&(k, _)| k >= total)
        {
            return Err(Error::Config("index out of range".into()));
        }
        if let Some(x) = &self.solution {
            if x.len() != total {
                return Err(Error::Config("solution length mismatch".into()));
            }
        }
        Ok(())
    }
}

/// Embedded solver options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: u32,
    /// Optional box `|x_k| ≤ bound` on every scalar.
    pub var_bound: Option<f64>,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_gap: 1e-8,
            max_iter: 200,
            var_bound: None,
            verbose: false,
        }
    }
}

impl SolverSettings {
    /// Defaults with the feasibility tolerance taken from the environment
    /// when set.
    pub fn from_env() -> Result<Self> {
        let mut s = Self::default();
        if let Ok(v) = std::env::var(SOLVER_TOL_ENV) {
            let t: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SOLVER_TOL_ENV} is not a number: {v}")))?;
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Config(format!("{SOLVER_TOL_ENV} must be > 0")));
            }
            s.tol_feas = t;
            s.tol_gap = t;
        }
        Ok(s)
    }
}

/// Coarse solver outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Inaccurate,
}

/// Raw solver output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub solver_status: String,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
    pub solve_time: f64,
}

fn svec_index(row: usize, col: usize) -> usize {
    col * (col + 1) / 2 + row
}

/// Solves `prog` with the embedded interior-point solver.
pub fn solve_clarabel(prog: &ConicProgram, settings: &SolverSettings) -> Result<ConicSolution> {
    prog.validate()?;
    let n = prog.num_scalars;
    let mut ii = Vec::new();
    let mut jj = Vec::new();
    let mut vv = Vec::new();
    let mut b = Vec::new();
    let mut cones = Vec::new();
    // Scalar rows: x_k − lower ≥ 0, plus optional box and 1×1 blocks.
    let push_scalar = |row_consts: f64,
                       coefs: &[(usize, f64)],
                       b: &mut Vec<f64>,
                       ii: &mut Vec<usize>,
                       jj: &mut Vec<usize>,
                       vv: &mut Vec<f64>| {
        let r = b.len();
        b.push(row_consts);
        for &(k, c) in coefs {
            ii.push(r);
            jj.push(k);
            vv.push(-c);
        }
    };
    for lb in &prog.lower_bounds {
        push_scalar(-lb.lower, &[(lb.k, 1.0)], &mut b, &mut ii, &mut jj, &mut vv);
    }
    if let Some(bound) = settings.var_bound {
        for k in 0..n {
            push_scalar(bound, &[(k, -1.0)], &mut b, &mut ii, &mut jj, &mut vv);
            push_scalar(bound, &[(k, 1.0)], &mut b, &mut ii, &mut jj, &mut vv);
        }
    }
    for blk in prog.blocks.iter().filter(|blk| blk.size == 1) {
        let c0 = blk.constant.iter().map(|e| e.value).sum();
        let coefs: Vec<(usize, f64)> = blk.coefficients.iter().map(|e| (e.k, e.value)).collect();
        push_scalar(c0, &coefs, &mut b, &mut ii, &mut jj, &mut vv);
    }
    if !b.is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(b.len()));
    }
    let s2 = std::f64::consts::SQRT_2;
    for blk in prog.blocks.iter().filter(|blk| blk.size > 1) {
        let base = b.len();
        let d = blk.size;
        b.resize(base + d * (d + 1) / 2, 0.0);
        for e in &blk.constant {
            let w = if e.row == e.col { 1.0 } else { s2 };
            b[base + svec_index(e.row, e.col)] += w * e.value;
        }
        for e in &blk.coefficients {
            let w = if e.row == e.col { 1.0 } else { s2 };
            ii.push(base + svec_index(e.row, e.col));
            jj.push(e.k);
            vv.push(-w * e.value);
        }
        cones.push(SupportedConeT::PSDTriangleConeT(d));
    }
    let m = b.len();
    let a = CscMatrix::new_from_triplets(m, n, ii, jj, vv);
    let p = CscMatrix::<f64>::zeros((n, n));
    let mut q = vec![0.0; n];
    for &(k, c) in &prog.objective {
        q[k] += c;
    }
    let cfg = DefaultSettingsBuilder::default()
        .verbose(settings.verbose)
        .tol_feas(settings.tol_feas)
        .tol_gap_abs(settings.tol_gap)
        .tol_gap_rel(settings.tol_gap)
        .max_iter(settings.max_iter)
        .build()
        .map_err(|e| Error::Solver(format!("settings: {e}")))?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, cfg)
        .map_err(|e| Error::Solver(e.to_string()))?;
    solver.solve();
    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        _ => SolveStatus::Inaccurate,
    };
    Ok(ConicSolution {
        status,
        solver_status: format!("{:?}", sol.status),
        x: sol.x.clone(),
        objective: prog.objective_value(&sol.x),
        iterations: sol.iterations,
        solve_time: sol.solve_time,
    })
}
