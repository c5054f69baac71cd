// SPDX-License-Identifier: MIT
//! Affine matrix expressions, certificate assembly, numerical oracles and
//! the conic-program interchange.

pub mod conic;
pub mod expr;
pub mod oracle;
pub mod theorems;

pub use conic::{solve_clarabel, ConicProgram, ConicSolution, SolveStatus, SolverSettings};
pub use expr::{AffineExpr, AffineLmi, Assignment, LmiProblem, Sense, VarForm, VarKind, VarSpec};
pub use oracle::{feasibility_oracle, schur_check, OracleReport, SchurVerdict};
pub use theorems::{
    assemble, assemble_theorem1, assemble_theorem2, theorem1_symbols, theorem2_symbols, RowBound,
    SchemeScalars, SymbolRegistry, TheoremContext, ThetaMode, THEOREM1_SYMBOLS, THEOREM2_SYMBOLS,
};
