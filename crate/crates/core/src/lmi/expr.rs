// SPDX-License-Identifier: MIT
//! Matrix-valued affine functions of named decision variables.
//!
//! An [`AffineExpr`] is `M₀ + Σ_t L_tᵀ F_t(V_t) R_t` where each `F_t(V_t)` is
//! a fixed linear embedding of one decision variable (the variable itself,
//! its transpose, a diagonal built from a vector, or a scalar times the
//! identity). All algebra needed by the certificate assemblies (sums,
//! congruences, constant products, transposes and block layouts) stays
//! inside this form, so the coefficient of every scalar decision entry is
//! available exactly.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{asymmetry, selector};

/// Structural class of a decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    /// Symmetric, constrained `≥ margin·I`.
    SymPsd,
    /// Symmetric, unconstrained.
    SymFree,
    /// General rectangular, unconstrained.
    Free,
    /// Column vector with non-negative entries.
    NonnegVector,
    /// Scalar bounded below by the margin.
    NonnegScalar,
}

/// Declaration of one decision variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub kind: VarKind,
}

impl VarSpec {
    pub fn sym_psd(name: &str, n: usize) -> Self {
        Self {
            name: name.into(),
            rows: n,
            cols: n,
            kind: VarKind::SymPsd,
        }
    }
    pub fn sym_free(name: &str, n: usize) -> Self {
        Self {
            name: name.into(),
            rows: n,
            cols: n,
            kind: VarKind::SymFree,
        }
    }
    pub fn free(name: &str, rows: usize, cols: usize) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
            kind: VarKind::Free,
        }
    }
    pub fn nonneg_vector(name: &str, len: usize) -> Self {
        Self {
            name: name.into(),
            rows: len,
            cols: 1,
            kind: VarKind::NonnegVector,
        }
    }
    pub fn nonneg_scalar(name: &str) -> Self {
        Self {
            name: name.into(),
            rows: 1,
            cols: 1,
            kind: VarKind::NonnegScalar,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self.kind, VarKind::SymPsd | VarKind::SymFree)
    }

    /// Number of scalar entries in the decision vector.
    pub fn len(&self) -> usize {
        if self.is_symmetric() {
            self.rows * (self.rows + 1) / 2
        } else {
            self.rows * self.cols
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Natural `(row, col)` of scalar entry `k`: symmetric kinds walk the
    /// upper triangle row by row, the others walk all entries row by row.
    pub fn entry(&self, k: usize) -> (usize, usize) {
        if self.is_symmetric() {
            let n = self.rows;
            let mut rem = k;
            for i in 0..n {
                let len = n - i;
                if rem < len {
                    return (i, i + rem);
                }
                rem -= len;
            }
            panic!("entry {k} out of range for {}", self.name);
        }
        (k / self.cols, k % self.cols)
    }

    /// Flattens a natural-shape value.
    pub fn vectorize(&self, m: &DMatrix<f64>) -> Result<Vec<f64>> {
        if m.shape() != (self.rows, self.cols) {
            return Err(dim_err(
                &self.name,
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        Ok((0..self.len())
            .map(|k| {
                let (i, j) = self.entry(k);
                m[(i, j)]
            })
            .collect())
    }

    /// Rebuilds the natural-shape value from its entries.
    pub fn devectorize(&self, v: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (k, &val) in v.iter().enumerate().take(self.len()) {
            let (i, j) = self.entry(k);
            m[(i, j)] = val;
            if self.is_symmetric() {
                m[(j, i)] = val;
            }
        }
        m
    }
}

/// How a variable enters a term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarForm {
    /// `V`.
    Matrix,
    /// `Vᵀ`.
    Transposed,
    /// `Diag(v)` for a vector variable.
    Diag,
    /// `v·I_p` for a scalar variable.
    ScaledIdentity(usize),
}

impl VarForm {
    fn dims(self, var: &VarSpec) -> (usize, usize) {
        match self {
            VarForm::Matrix => (var.rows, var.cols),
            VarForm::Transposed => (var.cols, var.rows),
            VarForm::Diag => (var.rows, var.rows),
            VarForm::ScaledIdentity(p) => (p, p),
        }
    }

    fn transposed(self, var: &VarSpec) -> Self {
        match self {
            VarForm::Matrix if !var.is_symmetric() => VarForm::Transposed,
            VarForm::Transposed => VarForm::Matrix,
            other => other,
        }
    }

    /// Positions and weights of scalar entry `k` inside `F(V)`.
    pub fn basis(self, var: &VarSpec, k: usize) -> Vec<(usize, usize, f64)> {
        let (i, j) = var.entry(k);
        match self {
            VarForm::Matrix | VarForm::Transposed => {
                let (i, j) = if self == VarForm::Transposed {
                    (j, i)
                } else {
                    (i, j)
                };
                if var.is_symmetric() && i != j {
                    vec![(i, j, 1.0), (j, i, 1.0)]
                } else {
                    vec![(i, j, 1.0)]
                }
            }
            VarForm::Diag => vec![(i, i, 1.0)],
            VarForm::ScaledIdentity(p) => (0..p).map(|d| (d, d, 1.0)).collect(),
        }
    }

    /// Evaluates `F(V)` from the natural-shape value.
    pub fn embed(self, value: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            VarForm::Matrix => value.clone(),
            VarForm::Transposed => value.transpose(),
            VarForm::Diag => DMatrix::from_diagonal(&DVector::from_column_slice(value.as_slice())),
            VarForm::ScaledIdentity(p) => DMatrix::identity(p, p) * value[(0, 0)],
        }
    }
}

/// One summand `Lᵀ F(V) R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub var: VarSpec,
    pub form: VarForm,
    /// `p × rows` of the enclosing expression.
    pub left: DMatrix<f64>,
    /// `q × cols` of the enclosing expression.
    pub right: DMatrix<f64>,
}

/// Named values of decision variables in their natural shapes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub values: BTreeMap<String, DMatrix<f64>>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: &str, value: DMatrix<f64>) {
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Result<&DMatrix<f64>> {
        self.values
            .get(name)
            .ok_or_else(|| Error::InvalidParameter(format!("assignment lacks variable {name}")))
    }

    /// All-zero assignment for `vars`.
    pub fn zeros(vars: &[VarSpec]) -> Self {
        let mut a = Self::new();
        for v in vars {
            a.set(&v.name, DMatrix::zeros(v.rows, v.cols));
        }
        a
    }

    /// Builds an assignment from a stacked decision vector.
    pub fn from_vector(vars: &[VarSpec], x: &[f64]) -> Result<Self> {
        let total: usize = vars.iter().map(VarSpec::len).sum();
        if x.len() != total {
            return Err(dim_err("decision vector", total, x.len()));
        }
        let mut a = Self::new();
        let mut off = 0;
        for v in vars {
            a.set(&v.name, v.devectorize(&x[off..off + v.len()]));
            off += v.len();
        }
        Ok(a)
    }

    /// Stacks the assignment into a decision vector in declaration order.
    pub fn to_vector(&self, vars: &[VarSpec]) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for v in vars {
            out.extend(v.vectorize(self.get(&v.name)?)?);
        }
        Ok(out)
    }

    /// Entry-wise `self + other` over the union of names.
    pub fn add(&self, other: &Assignment) -> Assignment {
        let mut out = self.clone();
        for (k, v) in &other.values {
            out.values
                .entry(k.clone())
                .and_modify(|m| *m += v)
                .or_insert_with(|| v.clone());
        }
        out
    }
}

/// Affine matrix expression.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr {
    pub rows: usize,
    pub cols: usize,
    pub constant: DMatrix<f64>,
    pub terms: Vec<Term>,
}

impl AffineExpr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            constant: DMatrix::zeros(rows, cols),
            terms: Vec::new(),
        }
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            constant: m,
            terms: Vec::new(),
        }
    }

    /// `a · F(V) · b`.
    pub fn lin(a: &DMatrix<f64>, var: &VarSpec, form: VarForm, b: &DMatrix<f64>) -> Self {
        let (p, q) = form.dims(var);
        assert_eq!(
            a.ncols(),
            p,
            "left factor does not match variable {}",
            var.name
        );
        assert_eq!(
            b.nrows(),
            q,
            "right factor does not match variable {}",
            var.name
        );
        Self {
            rows: a.nrows(),
            cols: b.ncols(),
            constant: DMatrix::zeros(a.nrows(), b.ncols()),
            terms: vec![Term {
                var: var.clone(),
                form,
                left: a.transpose(),
                right: b.clone(),
            }],
        }
    }

    /// `Xᵀ V X` for a square variable.
    pub fn congruence(x: &DMatrix<f64>, var: &VarSpec) -> Self {
        Self::lin(&x.transpose(), var, VarForm::Matrix, x)
    }

    /// The variable itself.
    pub fn var(var: &VarSpec) -> Self {
        let (p, q) = (var.rows, var.cols);
        Self::lin(
            &DMatrix::identity(p, p),
            var,
            VarForm::Matrix,
            &DMatrix::identity(q, q),
        )
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn check_same_shape(&self, other: &Self) {
        assert_eq!(
            self.shape(),
            other.shape(),
            "affine expression shape mismatch"
        );
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_same_shape(other);
        let mut out = self.clone();
        out.constant += &other.constant;
        out.terms.extend(other.terms.iter().cloned());
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn add_const(&self, m: &DMatrix<f64>) -> Self {
        let mut out = self.clone();
        out.constant += m;
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.constant *= s;
        for t in &mut out.terms {
            t.left *= s;
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            constant: self.constant.transpose(),
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    var: t.var.clone(),
                    form: t.form.transposed(&t.var),
                    left: t.right.clone(),
                    right: t.left.clone(),
                })
                .collect(),
        }
    }

    /// `C · self`.
    pub fn lmul(&self, c: &DMatrix<f64>) -> Self {
        assert_eq!(c.ncols(), self.rows, "left product shape mismatch");
        Self {
            rows: c.nrows(),
            cols: self.cols,
            constant: c * &self.constant,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    var: t.var.clone(),
                    form: t.form,
                    left: &t.left * c.transpose(),
                    right: t.right.clone(),
                })
                .collect(),
        }
    }

    /// `self · D`.
    pub fn rmul(&self, d: &DMatrix<f64>) -> Self {
        assert_eq!(d.nrows(), self.cols, "right product shape mismatch");
        Self {
            rows: self.rows,
            cols: d.ncols(),
            constant: &self.constant * d,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    var: t.var.clone(),
                    form: t.form,
                    left: t.left.clone(),
                    right: &t.right * d,
                })
                .collect(),
        }
    }

    /// `Sym(X) = X + Xᵀ`.
    pub fn sym(&self) -> Self {
        self.add(&self.transpose())
    }

    /// Lays out blocks on a grid; `None` blocks are zero. Row heights and
    /// column widths are inferred from the non-empty blocks.
    pub fn block(grid: &[Vec<Option<&AffineExpr>>]) -> Result<Self> {
        let nr = grid.len();
        let nc = grid.first().map_or(0, Vec::len);
        let mut heights = vec![None; nr];
        let mut widths = vec![None; nc];
        for (i, row) in grid.iter().enumerate() {
            if row.len() != nc {
                return Err(dim_err("block grid", nc, row.len()));
            }
            for (j, b) in row.iter().enumerate() {
                if let Some(b) = b {
                    for (slot, val, what) in [
                        (&mut heights[i], b.rows, "block height"),
                        (&mut widths[j], b.cols, "block width"),
                    ] {
                        match slot {
                            Some(v) if *v != val => return Err(dim_err(what, *v, val)),
                            _ => *slot = Some(val),
                        }
                    }
                }
            }
        }
        let heights: Vec<usize> = heights
            .into_iter()
            .map(|h| h.ok_or_else(|| Error::InvalidParameter("empty block row".into())))
            .collect::<Result<_>>()?;
        let widths: Vec<usize> = widths
            .into_iter()
            .map(|w| w.ok_or_else(|| Error::InvalidParameter("empty block column".into())))
            .collect::<Result<_>>()?;
        let rows: usize = heights.iter().sum();
        let cols: usize = widths.iter().sum();
        let mut out = Self::zeros(rows, cols);
        for (i, row) in grid.iter().enumerate() {
            let si = selector(&heights, i + 1)?;
            for (j, b) in row.iter().enumerate() {
                if let Some(b) = b {
                    let sj = selector(&widths, j + 1)?;
                    out = out.add(&b.lmul(&si.transpose()).rmul(&sj));
                }
            }
        }
        Ok(out)
    }

    /// Numerical value at an assignment.
    pub fn evaluate(&self, assign: &Assignment) -> Result<DMatrix<f64>> {
        let mut out = self.constant.clone();
        for t in &self.terms {
            let value = assign.get(&t.var.name)?;
            if value.shape() != (t.var.rows, t.var.cols) {
                return Err(dim_err(
                    &t.var.name,
                    format!("{}x{}", t.var.rows, t.var.cols),
                    format!("{}x{}", value.nrows(), value.ncols()),
                ));
            }
            let f = t.form.embed(value);
            out += t.left.transpose() * f * &t.right;
        }
        Ok(out)
    }

    /// Distinct variables referenced, in first-use order.
    pub fn variables(&self) -> Vec<VarSpec> {
        let mut seen: Vec<VarSpec> = Vec::new();
        for t in &self.terms {
            if !seen.iter().any(|v| v.name == t.var.name) {
                seen.push(t.var.clone());
            }
        }
        seen
    }

    /// Coefficient matrix of scalar entry `k` of variable `name`.
    pub fn coefficient(&self, name: &str, k: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for t in self.terms.iter().filter(|t| t.var.name == name) {
            for (i, j, c) in t.form.basis(&t.var, k) {
                let l = t.left.row(i);
                let r = t.right.row(j);
                out += l.transpose() * r * c;
            }
        }
        out
    }

    /// Sparse upper-triangle coefficients of every scalar entry of
    /// `var`: `(k, row, col, value)` with `row ≤ col`. Requires a square
    /// expression whose coefficients are symmetric.
    pub fn sparse_coefficients(&self, var: &VarSpec) -> Vec<(usize, usize, usize, f64)> {
        let d = self.rows;
        let terms: Vec<&Term> = self
            .terms
            .iter()
            .filter(|t| t.var.name == var.name)
            .collect();
        if terms.is_empty() {
            return Vec::new();
        }
        let sparse_rows = |m: &DMatrix<f64>| -> Vec<Vec<(usize, f64)>> {
            (0..m.nrows())
                .map(|i| {
                    (0..m.ncols())
                        .filter_map(|c| {
                            let v = m[(i, c)];
                            (v != 0.0).then_some((c, v))
                        })
                        .collect()
                })
                .collect()
        };
        #[allow(clippy::type_complexity)]
        let prepared: Vec<(&Term, Vec<Vec<(usize, f64)>>, Vec<Vec<(usize, f64)>>)> = terms
            .iter()
            .map(|t| (*t, sparse_rows(&t.left), sparse_rows(&t.right)))
            .collect();
        let mut buf = vec![0.0; d * d];
        let mut touched: Vec<usize> = Vec::new();
        let mut out = Vec::new();
        for k in 0..var.len() {
            for (t, lrows, rrows) in &prepared {
                for (i, j, c) in t.form.basis(&t.var, k) {
                    for &(a, lv) in &lrows[i] {
                        for &(b, rv) in &rrows[j] {
                            let (r, s) = if a <= b { (a, b) } else { (b, a) };
                            let idx = r * d + s;
                            touched.push(idx);
                            let w = if a == b { 1.0 } else { 0.5 };
                            buf[idx] += c * lv * rv * w;
                        }
                    }
                }
            }
            touched.sort_unstable();
            touched.dedup();
            for &idx in &touched {
                let v = buf[idx];
                if v != 0.0 {
                    out.push((k, idx / d, idx % d, v));
                }
                buf[idx] = 0.0;
            }
            touched.clear();
        }
        out
    }
}

/// Sign requirement of a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// `F(x) ⪯ −margin·I`.
    NegDef,
    /// `F(x) ⪰ 0`.
    Psd,
}

/// Named symmetric affine constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLmi {
    pub name: String,
    pub expr: AffineExpr,
    pub sense: Sense,
}

impl AffineLmi {
    pub fn new(name: &str, expr: AffineExpr, sense: Sense) -> Result<Self> {
        if expr.rows != expr.cols {
            return Err(dim_err(
                name,
                "square",
                format!("{}x{}", expr.rows, expr.cols),
            ));
        }
        if asymmetry(&expr.constant) > 1e-12 * (1.0 + expr.constant.amax()) {
            return Err(Error::InvalidParameter(format!(
                "{name}: constant part is not symmetric"
            )));
        }
        Ok(Self {
            name: name.into(),
            expr,
            sense,
        })
    }

    pub fn size(&self) -> usize {
        self.expr.rows
    }

    /// Symmetrised value at an assignment.
    pub fn evaluate(&self, assign: &Assignment) -> Result<DMatrix<f64>> {
        let m = self.expr.evaluate(assign)?;
        Ok((&m + m.transpose()) * 0.5)
    }
}

/// Variables plus constraints of one certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    pub vars: Vec<VarSpec>,
    pub lmis: Vec<AffineLmi>,
}

impl LmiProblem {
    /// Total number of scalar decision entries.
    pub fn num_scalars(&self) -> usize {
        self.vars.iter().map(VarSpec::len).sum()
    }

    pub fn var(&self, name: &str) -> Option<&VarSpec> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn lmi(&self, name: &str) -> Option<&AffineLmi> {
        self.lmis.iter().find(|l| l.name == name)
    }

    /// Checks unique names and that every referenced variable is declared.
    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.vars.iter().enumerate() {
            if self.vars[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate variable {}",
                    v.name
                )));
            }
            if v.is_symmetric() && v.rows != v.cols {
                return Err(dim_err(&v.name, "square", format!("{}x{}", v.rows, v.cols)));
            }
        }
        for l in &self.lmis {
            for v in l.expr.variables() {
                if self.var(&v.name) != Some(&v) {
                    return Err(Error::InvalidParameter(format!(
                        "{} uses undeclared variable {}",
                        l.name, v.name
                    )));
                }
            }
        }
        Ok(())
    }
}
