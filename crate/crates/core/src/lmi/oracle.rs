// SPDX-License-Identifier: MIT
//! Numerical re-checks of assembled constraints at a given assignment.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::expr::{Assignment, LmiProblem, Sense, VarKind};
use crate::error::{Error, Result};
use crate::linalg::{max_eig, min_eig, sym_eigenvalues};

/// Definiteness class of a symmetric matrix at a tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Definiteness {
    Psd,
    Nsd,
    Indefinite,
}

/// Outcome of comparing a block with its Schur complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchurVerdict {
    /// Both forms are PSD.
    AgreePsd,
    /// Both forms fail to be PSD.
    AgreeNotPsd,
    /// The forms disagree.
    Disagree,
    /// `C` is singular or not positive definite within tolerance.
    Indeterminate,
}

impl SchurVerdict {
    pub fn agrees(self) -> bool {
        matches!(self, SchurVerdict::AgreePsd | SchurVerdict::AgreeNotPsd)
    }
}

/// Classifies a symmetric matrix.
pub fn definiteness(m: &DMatrix<f64>, tol: f64) -> Definiteness {
    let ev = sym_eigenvalues(m);
    if ev.is_empty() || ev[0] >= -tol {
        Definiteness::Psd
    } else if ev[ev.len() - 1] <= tol {
        Definiteness::Nsd
    } else {
        Definiteness::Indefinite
    }
}

/// Compares PSD-ness of `[[A, B], [Bᵀ, C]]` with that of `A − B C⁻¹ Bᵀ`,
/// splitting at row `split`.
pub fn schur_check(block: &DMatrix<f64>, split: usize, tol: f64) -> Result<SchurVerdict> {
    let d = block.nrows();
    if block.ncols() != d || split == 0 || split >= d {
        return Err(Error::InvalidParameter(
            "schur_check needs a square block and 0 < split < size".into(),
        ));
    }
    let a = block.view((0, 0), (split, split)).into_owned();
    let b = block.view((0, split), (split, d - split)).into_owned();
    let c = block
        .view((split, split), (d - split, d - split))
        .into_owned();
    if min_eig(&c) <= tol {
        return Ok(SchurVerdict::Indeterminate);
    }
    let Some(ci) = c.clone().try_inverse() else {
        return Ok(SchurVerdict::Indeterminate);
    };
    let s = &a - &b * ci * b.transpose();
    let full = min_eig(block) >= -tol;
    let schur = min_eig(&s) >= -tol;
    Ok(match (full, schur) {
        (true, true) => SchurVerdict::AgreePsd,
        (false, false) => SchurVerdict::AgreeNotPsd,
        _ => SchurVerdict::Disagree,
    })
}

/// Per-constraint result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub sense: Sense,
    pub size: usize,
    /// Largest eigenvalue for `NegDef`, smallest for `Psd`.
    pub extreme_eigenvalue: f64,
    /// Signed slack: positive when satisfied.
    pub slack: f64,
    pub pass: bool,
}

/// Result of evaluating every constraint and variable cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub constraints: Vec<ConstraintCheck>,
    /// Variable cone checks named `var:<name>`.
    pub cones: Vec<ConstraintCheck>,
    pub tol_margin: f64,
    pub tol_psd: f64,
    pub worst_slack: f64,
    pub pass: bool,
}

/// Evaluates every constraint of `problem` at `assign`.
///
/// `NegDef` constraints pass when the largest eigenvalue is at most
/// `−tol_margin`; `Psd` constraints and variable cones pass when the
/// smallest eigenvalue is at least `−tol_psd`.
pub fn feasibility_oracle(
    problem: &LmiProblem,
    assign: &Assignment,
    tol_margin: f64,
    tol_psd: f64,
) -> Result<OracleReport> {
    let mut constraints = Vec::with_capacity(problem.lmis.len());
    for l in &problem.lmis {
        let m = l.evaluate(assign)?;
        let (ext, slack) = match l.sense {
            Sense::NegDef => {
                let e = max_eig(&m);
                (e, -e - tol_margin)
            }
            Sense::Psd => {
                let e = min_eig(&m);
                (e, e + tol_psd)
            }
        };
        constraints.push(ConstraintCheck {
            name: l.name.clone(),
            sense: l.sense,
            size: l.size(),
            extreme_eigenvalue: ext,
            slack,
            pass: slack >= 0.0 && ext.is_finite(),
        });
    }
    let mut cones = Vec::new();
    for v in &problem.vars {
        let value = assign.get(&v.name)?;
        let ext = match v.kind {
            VarKind::SymPsd => min_eig(value),
            VarKind::NonnegVector | VarKind::NonnegScalar => value.min(),
            VarKind::SymFree | VarKind::Free => continue,
        };
        let slack = ext + tol_psd;
        cones.push(ConstraintCheck {
            name: format!("var:{}", v.name),
            sense: Sense::Psd,
            size: v.rows,
            extreme_eigenvalue: ext,
            slack,
            pass: slack >= 0.0 && ext.is_finite(),
        });
    }
    let worst_slack = constraints
        .iter()
        .chain(cones.iter())
        .map(|c| c.slack)
        .fold(f64::INFINITY, f64::min);
    let pass = constraints.iter().chain(cones.iter()).all(|c| c.pass);
    Ok(OracleReport {
        constraints,
        cones,
        tol_margin,
        tol_psd,
        worst_slack,
        pass,
    })
}
