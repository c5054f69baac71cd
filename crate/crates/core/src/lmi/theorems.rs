// SPDX-License-Identifier: MIT
//! Assembly of the event-triggered and self-triggered certificates.
//!
//! Every named symbol of both certificates is produced once and recorded
//! in a [`SymbolRegistry`], so the constraint matrices can be inspected
//! piece by piece.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::expr::{AffineExpr, AffineLmi, LmiProblem, Sense, VarForm, VarSpec};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{expect_finite, expect_shape, hstack, selector, vstack};
use crate::nnet::{
    dnn_quadratic_constraint, interval_bounds, isolation_maps, sector_bounds, Dnn, IsolationMaps,
    PreactivationBox, SectorBounds,
};
use crate::uncertain_plant::AugmentedSystem;

/// How the sampling-interval range enters the event-triggered LMI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMode {
    /// Enforce at `ϑ_l` and `ϑ_u` only.
    Vertices,
    /// Enforce at every integer in `[ϑ_l, ϑ_u]`.
    All,
}

/// Scheme-specific scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum SchemeScalars {
    Event {
        eps1: f64,
        eps2: f64,
        mu: f64,
        g: f64,
        theta_l: usize,
        theta_u: usize,
        theta_mode: ThetaMode,
    },
    SelfTriggered {
        eps1c: f64,
        eps2c: f64,
        s_bar: usize,
    },
}

/// Extra state bound `|c x| ≤ bound` imposed on the ellipsoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowBound {
    pub row: DVector<f64>,
    pub bound: f64,
}

/// Everything the assemblies need.
#[derive(Debug, Clone)]
pub struct TheoremContext {
    pub sys: AugmentedSystem,
    pub maps: IsolationMaps,
    pub sec: SectorBounds,
    pub bx: PreactivationBox,
    pub m_theta: DMatrix<f64>,
    pub scheme: SchemeScalars,
    pub extra_rows: Vec<RowBound>,
    /// `(δ_ρ, δ_β)` when built from a network.
    pub relaxation: Option<(f64, f64)>,
}

impl TheoremContext {
    /// Builds the relaxation of `dnn` on a symmetric first-layer seed and
    /// wraps it with the system and scheme.
    pub fn from_network(
        sys: &AugmentedSystem,
        dnn: &Dnn,
        delta_rho: f64,
        delta_beta: f64,
        m_theta: &DMatrix<f64>,
        scheme: SchemeScalars,
    ) -> Result<Self> {
        let a1 = dnn.widths()[0];
        let bx = interval_bounds(dnn, &DVector::from_element(a1, delta_rho), None)?;
        let sigma = DVector::from_element(dnn.total_width(), delta_beta);
        let sec = sector_bounds(&bx, dnn.activation(), Some(&sigma))?;
        let ctx = Self {
            sys: sys.clone(),
            maps: isolation_maps(dnn),
            sec,
            bx,
            m_theta: m_theta.clone(),
            scheme,
            extra_rows: Vec::new(),
            relaxation: Some((delta_rho, delta_beta)),
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn n(&self) -> usize {
        self.sys.dims.n
    }
    pub fn z(&self) -> usize {
        self.sys.dims.z
    }
    pub fn a(&self) -> usize {
        self.maps.pi_pm.nrows()
    }
    pub fn w(&self) -> usize {
        self.sys.dims.w
    }
    pub fn m(&self) -> usize {
        self.sys.dims.m
    }

    /// `n̄ = z + a + w + 5n` for the event scheme, `ñ = z + a + w + 4n`
    /// for the self scheme.
    pub fn stacked_dim(&self) -> usize {
        let base = self.z() + self.a() + self.w();
        match self.scheme {
            SchemeScalars::Event { .. } => base + 5 * self.n(),
            SchemeScalars::SelfTriggered { .. } => base + 4 * self.n(),
        }
    }

    /// Checks dimensional consistency of every constant.
    pub fn validate(&self) -> Result<()> {
        let (n, z, a, w, m) = (self.n(), self.z(), self.a(), self.w(), self.m());
        let kappa = self.sys.dims.kappa;
        expect_shape("A", &self.sys.a, z, z)?;
        expect_shape("B", &self.sys.b, z, m + w)?;
        expect_shape("C", &self.sys.c, kappa, z)?;
        expect_shape("D", &self.sys.d, kappa, m + w)?;
        expect_shape("Pi_ux", &self.maps.pi_ux, m, n)?;
        expect_shape("Pi_um", &self.maps.pi_um, m, a)?;
        expect_shape("Pi_px", &self.maps.pi_px, a, n)?;
        expect_shape("Pi_pm", &self.maps.pi_pm, a, a)?;
        expect_shape("M_theta", &self.m_theta, kappa, kappa)?;
        expect_finite("M_theta", &self.m_theta)?;
        if self.sec.rho.len() != a || self.sec.sigma.len() != a {
            return Err(dim_err("sector bounds", a, self.sec.rho.len()));
        }
        if self.bx.center.len() != a {
            return Err(dim_err("preactivation box", a, self.bx.center.len()));
        }
        if !self.bx.is_symmetric(1e-12) {
            return Err(Error::InvalidParameter(
                "first-layer box must be symmetric".into(),
            ));
        }
        for r in &self.extra_rows {
            if r.row.len() != n {
                return Err(dim_err("state row bound", n, r.row.len()));
            }
            if !(r.bound > 0.0) {
                return Err(Error::InvalidParameter(
                    "state row bound must be > 0".into(),
                ));
            }
        }
        match self.scheme {
            SchemeScalars::Event {
                theta_l,
                theta_u,
                eps1,
                eps2,
                ..
            } => {
                if theta_l < 1 || theta_u < theta_l {
                    return Err(Error::InvalidParameter("need 1 ≤ theta_l ≤ theta_u".into()));
                }
                if !(0.0..=1.0).contains(&eps1) || !(0.0..=1.0).contains(&eps2) {
                    return Err(Error::InvalidParameter(
                        "eps1, eps2 must lie in [0, 1]".into(),
                    ));
                }
            }
            SchemeScalars::SelfTriggered { s_bar, .. } => {
                if s_bar < 2 {
                    return Err(Error::InvalidParameter("s_bar must be ≥ 2".into()));
                }
            }
        }
        Ok(())
    }

    /// First-layer weights `W_1` (rows `0..a_1` of `Π_px`).
    pub fn w1(&self) -> DMatrix<f64> {
        let a1 = self.maps.widths[0];
        self.maps.pi_px.rows(0, a1).into_owned()
    }
}

/// A registered symbol: constant matrix or affine expression.
#[derive(Debug, Clone)]
pub enum Symbol {
    Constant(DMatrix<f64>),
    Affine(AffineExpr),
}

impl Symbol {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Symbol::Constant(m) => m.shape(),
            Symbol::Affine(e) => e.shape(),
        }
    }
}

/// Symbols by name; each name may be registered once.
#[derive(Debug, Clone, Default)]
pub struct SymbolRegistry {
    pub entries: BTreeMap<String, Symbol>,
}

impl SymbolRegistry {
    fn put_const(&mut self, name: &str, m: &DMatrix<f64>) -> Result<()> {
        self.put(name, Symbol::Constant(m.clone()))
    }

    fn put_affine(&mut self, name: &str, e: &AffineExpr) -> Result<()> {
        self.put(name, Symbol::Affine(e.clone()))
    }

    fn put(&mut self, name: &str, s: Symbol) -> Result<()> {
        if self.entries.insert(name.to_string(), s).is_some() {
            return Err(Error::InvalidParameter(format!(
                "symbol {name} built twice"
            )));
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Symbol> {
        self.entries.get(name)
    }

    pub fn constant(&self, name: &str) -> Option<&DMatrix<f64>> {
        match self.entries.get(name) {
            Some(Symbol::Constant(m)) => Some(m),
            _ => None,
        }
    }

    pub fn affine(&self, name: &str) -> Option<&AffineExpr> {
        match self.entries.get(name) {
            Some(Symbol::Affine(e)) => Some(e),
            _ => None,
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

/// Printed symbols of the event-triggered certificate.
pub const THEOREM1_SYMBOLS: &[&str] = &[
    "L_1", "L_2", "L_3", "L_4", "L_5", "L_6", "L_7", "L_8", "Lambda_1", "Lambda_2", "Sigma_1",
    "G_1", "G_2", "G_3", "R_1", "R_2", "R_3", "R_4", "R_5", "R_6", "R_7", "R_8", "R_9", "R_10",
    "R_1,3", "R_2,3", "Q", "G", "Coprod_1", "Coprod_2", "T_1cal", "T_2cal",
];

/// Printed symbols of the self-triggered certificate.
pub const THEOREM2_SYMBOLS: &[&str] = &[
    "Lbar_1",
    "Lbar_2",
    "Lbar_3",
    "Lbar_4",
    "Lbar_5",
    "Lbar_6",
    "Lbar_7",
    "Lambdabar_1",
    "Lambda_2",
    "Sigma_1",
    "Gbar_1",
    "Gbar_2",
    "Gbar_3",
    "Rbar_1",
    "Rbar_2",
    "Rbar_3",
    "Rbar_4",
    "Rbar_5",
    "Rbar_6",
    "Rbar_7",
    "Rbar_8",
    "Rbar_9",
    "Rbar_10",
    "Rbar_11",
    "Rbar_12",
    "Rbar_13",
    "Gtilde",
    "eth_1",
    "eth_2",
    "Xitilde",
    "X_1",
    "X_2",
    "Upsilonbar_3",
    "Upsilonbar_4",
    "Tbar_1cal",
    "Tbar_2cal",
];

/// Decision variables of the event-triggered certificate.
pub fn theorem1_vars(ctx: &TheoremContext) -> Vec<VarSpec> {
    let (n, z, a) = (ctx.n(), ctx.z(), ctx.a());
    let nb = ctx.stacked_dim();
    vec![
        VarSpec::sym_psd("P", z),
        VarSpec::sym_psd("T1", n),
        VarSpec::sym_psd("T2", n),
        VarSpec::sym_psd("Xi1", n),
        VarSpec::sym_psd("Xi2", n),
        VarSpec::free("R", 4 * n, 4 * n),
        VarSpec::free("N1", nb, 2 * n),
        VarSpec::free("N2", nb, 2 * n),
        VarSpec::nonneg_vector("gamma", a),
    ]
}

/// Decision variables of the self-triggered certificate.
pub fn theorem2_vars(ctx: &TheoremContext) -> Vec<VarSpec> {
    let (n, z, a) = (ctx.n(), ctx.z(), ctx.a());
    let nt = ctx.stacked_dim();
    vec![
        VarSpec::sym_psd("P", z),
        VarSpec::sym_psd("T1", n),
        VarSpec::sym_psd("T2", n),
        VarSpec::sym_psd("Xi1", n),
        VarSpec::sym_psd("Xi2", n),
        VarSpec::free("R", 4 * n, 4 * n),
        VarSpec::free("N1", nt, 2 * n),
        VarSpec::free("N2", nt, 2 * n),
        VarSpec::nonneg_vector("gamma", a),
        VarSpec::nonneg_scalar("lambda1"),
        VarSpec::nonneg_scalar("lambda2"),
    ]
}

fn var<'a>(vars: &'a [VarSpec], name: &str) -> &'a VarSpec {
    vars.iter()
        .find(|v| v.name == name)
        .expect("declared above")
}

/// `Σ_1 = Col([Π_ux Π_um 0], [0 0 I_w])`.
fn sigma1(ctx: &TheoremContext) -> DMatrix<f64> {
    let (n, a, w, m) = (ctx.n(), ctx.a(), ctx.w(), ctx.m());
    vstack(&[
        &hstack(&[&ctx.maps.pi_ux, &ctx.maps.pi_um, &DMatrix::zeros(m, w)]),
        &hstack(&[
            &DMatrix::zeros(w, n),
            &DMatrix::zeros(w, a),
            &DMatrix::identity(w, w),
        ]),
    ])
}

/// `Λ_2 = [I_n 0_{n×ψ}]`.
fn lambda2(ctx: &TheoremContext) -> DMatrix<f64> {
    hstack(&[
        &DMatrix::identity(ctx.n(), ctx.n()),
        &DMatrix::zeros(ctx.n(), ctx.sys.dims.psi),
    ])
}

/// `G_3ᵀ M_DNN G_3` as an affine expression in `γ`.
fn dnn_term(ctx: &TheoremContext, g3: &DMatrix<f64>, gamma: &VarSpec) -> Result<AffineExpr> {
    let a = ctx.a();
    let q = dnn_quadratic_constraint(&ctx.sec)?;
    let jg = q.outer_factor() * g3;
    let u = jg.rows(0, a).into_owned();
    let v = jg.rows(a, a).into_owned();
    Ok(
        AffineExpr::lin(&u.transpose(), gamma, VarForm::Diag, &v).add(&AffineExpr::lin(
            &v.transpose(),
            gamma,
            VarForm::Diag,
            &u,
        )),
    )
}

/// `Diag(T, 3T)`.
fn t_cal(n: usize, t: &VarSpec) -> AffineExpr {
    let e1 = hstack(&[&DMatrix::identity(n, n), &DMatrix::zeros(n, n)]);
    let e2 = hstack(&[&DMatrix::zeros(n, n), &DMatrix::identity(n, n)]);
    AffineExpr::congruence(&e1, t).add(&AffineExpr::congruence(&e2, t).scale(3.0))
}

/// `[[δ², [c 0_ψ]], [⋆, P]] ⪰ 0`.
fn row_lmi(
    name: &str,
    row: &DMatrix<f64>,
    bound: f64,
    p: &VarSpec,
    psi: usize,
) -> Result<AffineLmi> {
    let z = p.rows;
    let full = hstack(&[row, &DMatrix::zeros(1, psi)]);
    let mut c = DMatrix::zeros(1 + z, 1 + z);
    c[(0, 0)] = bound * bound;
    for j in 0..z {
        c[(0, 1 + j)] = full[(0, j)];
        c[(1 + j, 0)] = full[(0, j)];
    }
    let eb = hstack(&[&DMatrix::zeros(z, 1), &DMatrix::identity(z, z)]);
    let expr = AffineExpr::constant(c).add(&AffineExpr::congruence(&eb, p));
    AffineLmi::new(name, expr, Sense::Psd)
}

/// First-layer and extra state-row constraints.
fn row_lmis(ctx: &TheoremContext, p: &VarSpec) -> Result<Vec<AffineLmi>> {
    let psi = ctx.sys.dims.psi;
    let w1 = ctx.w1();
    let mut out = Vec::new();
    for j in 0..w1.nrows() {
        let delta = ctx.bx.upper[j] - ctx.bx.center[j];
        out.push(row_lmi(
            &format!("preact_row_{}", j + 1),
            &w1.rows(j, 1).into_owned(),
            delta,
            p,
            psi,
        )?);
    }
    for (i, r) in ctx.extra_rows.iter().enumerate() {
        let row = DMatrix::from_row_slice(1, r.row.len(), r.row.as_slice());
        out.push(row_lmi(
            &format!("state_row_{}", i + 1),
            &row,
            r.bound,
            p,
            psi,
        )?);
    }
    Ok(out)
}

/// Symbols and constraints of the event-triggered certificate.
pub fn theorem1_symbols(ctx: &TheoremContext) -> Result<SymbolRegistry> {
    let SchemeScalars::Event { eps1, eps2, .. } = ctx.scheme else {
        return Err(Error::InvalidParameter(
            "context is not an event-triggered scheme".into(),
        ));
    };
    ctx.validate()?;
    let vars = theorem1_vars(ctx);
    let (n, z, a, w) = (ctx.n(), ctx.z(), ctx.a(), ctx.w());
    let nb = ctx.stacked_dim();
    let dims = [z, a, w, n, n, n, n, n];
    let mut reg = SymbolRegistry::default();
    let l: Vec<DMatrix<f64>> = (1..=8).map(|j| selector(&dims, j)).collect::<Result<_>>()?;
    for (j, lj) in l.iter().enumerate() {
        reg.put_const(&format!("L_{}", j + 1), lj)?;
    }
    let (l1, l2, l3, l4, l5, l6, l7, l8) = (&l[0], &l[1], &l[2], &l[3], &l[4], &l[5], &l[6], &l[7]);
    let lam2 = lambda2(ctx);
    let lam1 = vstack(&[l8, l2, l3]);
    let sig1 = sigma1(ctx);
    reg.put_const("Lambda_2", &lam2)?;
    reg.put_const("Lambda_1", &lam1)?;
    reg.put_const("Sigma_1", &sig1)?;
    let (a_m, b_m, c_m, d_m) = (&ctx.sys.a, &ctx.sys.b, &ctx.sys.c, &ctx.sys.d);
    let bsl = b_m * &sig1 * &lam1;
    let ab = a_m * l1 + &bsl;
    let lam2_ab = &lam2 * &ab;
    let lam2_l1 = &lam2 * l1;
    let g1 = &lam2_ab - &lam2_l1;
    let g2 = c_m * l1 + d_m * &sig1 * &lam1;
    let g3 = vstack(&[&(&ctx.maps.pi_px * l8 + &ctx.maps.pi_pm * l2), l2]);
    reg.put_const("G_1", &g1)?;
    reg.put_const("G_2", &g2)?;
    reg.put_const("G_3", &g3)?;
    let r13 = &lam2_ab - l4;
    let r23 = l5 - &lam2_ab;
    reg.put_const("R_1,3", &r13)?;
    reg.put_const("R_2,3", &r23)?;
    let zn = DMatrix::zeros(n, nb);
    let r1 = vstack(&[l4, l5, &r13, &(l6 + &r13)]);
    let r2 = vstack(&[&(-l4), &(-l5), &r23, &(l7 - l5 - &lam2_l1)]);
    let r3 = vstack(&[l4, l5, &zn, l6]);
    let r4 = vstack(&[l4, l5, &zn, l7]);
    let r5 = vstack(&[&zn, &zn, &(&lam2_l1 - l4), &(l6 - l4)]);
    let r6 = vstack(&[&zn, &zn, &(l5 - &lam2_l1), &(l7 - l5)]);
    let r7 = &r2 - &r6;
    let r8 = &r1 - &r5;
    let r9 = vstack(&[&(&lam2_l1 - l4), &(&lam2_l1 + l4 - l6)]);
    let r10 = vstack(&[&(l5 - &lam2_l1), &(l5 + &lam2_l1 - l7)]);
    for (name, m) in [
        ("R_1", &r1),
        ("R_2", &r2),
        ("R_3", &r3),
        ("R_4", &r4),
        ("R_5", &r5),
        ("R_6", &r6),
        ("R_7", &r7),
        ("R_8", &r8),
        ("R_9", &r9),
        ("R_10", &r10),
    ] {
        reg.put_const(name, m)?;
    }
    let (p, t1, t2) = (var(&vars, "P"), var(&vars, "T1"), var(&vars, "T2"));
    let (xi1, xi2, r) = (var(&vars, "Xi1"), var(&vars, "Xi2"), var(&vars, "R"));
    let (n1, n2, gamma) = (var(&vars, "N1"), var(&vars, "N2"), var(&vars, "gamma"));
    let inb = DMatrix::identity(nb, nb);
    let l48 = l4 - l8;
    let q = AffineExpr::congruence(l4, xi1)
        .scale(eps1)
        .add(&AffineExpr::congruence(l8, xi1).scale(eps2))
        .sub(&AffineExpr::congruence(&l48, xi2));
    reg.put_affine("Q", &q)?;
    let sym_part = AffineExpr::lin(&r1.transpose(), r, VarForm::Matrix, &r2)
        .sub(&AffineExpr::lin(&r5.transpose(), r, VarForm::Matrix, &r6))
        .add(&AffineExpr::lin(&inb, n1, VarForm::Matrix, &r9))
        .add(&AffineExpr::lin(&inb, n2, VarForm::Matrix, &r10))
        .sym();
    let g = AffineExpr::congruence(&ab, p)
        .add(&AffineExpr::congruence(&g1, t2))
        .sub(&AffineExpr::congruence(&g1, t1))
        .add_const(&(g2.transpose() * &ctx.m_theta * &g2))
        .add(&dnn_term(ctx, &g3, gamma)?)
        .add(&sym_part)
        .sub(&AffineExpr::congruence(l1, p))
        .add(&q);
    reg.put_affine("G", &g)?;
    let cop1 = AffineExpr::congruence(&g1, t2)
        .add(&AffineExpr::lin(&r3.transpose(), r, VarForm::Matrix, &r7).sym());
    let cop2 = AffineExpr::congruence(&g1, t1)
        .add(&AffineExpr::lin(&r8.transpose(), r, VarForm::Matrix, &r4).sym());
    reg.put_affine("Coprod_1", &cop1)?;
    reg.put_affine("Coprod_2", &cop2)?;
    reg.put_affine("T_1cal", &t_cal(n, t1))?;
    reg.put_affine("T_2cal", &t_cal(n, t2))?;
    Ok(reg)
}

/// Event-triggered block constraint at a fixed `ϑ` for `ι ∈ {1, 2}`.
pub fn theorem1_block(
    reg: &SymbolRegistry,
    vars: &[VarSpec],
    iota: usize,
    theta: f64,
) -> Result<AffineExpr> {
    let g = reg.affine("G").expect("registered");
    let cop = reg.affine(&format!("Coprod_{iota}")).expect("registered");
    let tcal = reg.affine(&format!("T_{iota}cal")).expect("registered");
    let nv = var(vars, &format!("N{iota}"));
    let top_left = g.add(&cop.scale(theta));
    let top_right = AffineExpr::var(nv).scale(theta);
    let bottom_left = top_right.transpose();
    let bottom_right = tcal.scale(-theta);
    AffineExpr::block(&[
        vec![Some(&top_left), Some(&top_right)],
        vec![Some(&bottom_left), Some(&bottom_right)],
    ])
}

/// Sampling intervals at which the event-triggered block is enforced.
pub fn theta_grid(scheme: &SchemeScalars) -> Vec<usize> {
    match *scheme {
        SchemeScalars::Event {
            theta_l,
            theta_u,
            theta_mode,
            ..
        } => match theta_mode {
            ThetaMode::All => (theta_l..=theta_u).collect(),
            ThetaMode::Vertices if theta_l == theta_u => vec![theta_l],
            ThetaMode::Vertices => vec![theta_l, theta_u],
        },
        SchemeScalars::SelfTriggered { .. } => Vec::new(),
    }
}

/// Event-triggered certificate: block constraints for each `ι` and each
/// enforced `ϑ`, followed by the row constraints.
pub fn assemble_theorem1(ctx: &TheoremContext) -> Result<LmiProblem> {
    let reg = theorem1_symbols(ctx)?;
    let vars = theorem1_vars(ctx);
    let mut lmis = Vec::new();
    for theta in theta_grid(&ctx.scheme) {
        for iota in 1..=2 {
            let e = theorem1_block(&reg, &vars, iota, theta as f64)?;
            lmis.push(AffineLmi::new(
                &format!("main_{iota}_theta{theta}"),
                e,
                Sense::NegDef,
            )?);
        }
    }
    lmis.extend(row_lmis(ctx, var(&vars, "P"))?);
    let prob = LmiProblem { vars, lmis };
    prob.validate()?;
    Ok(prob)
}

/// Symbols of the self-triggered certificate.
pub fn theorem2_symbols(ctx: &TheoremContext) -> Result<SymbolRegistry> {
    let SchemeScalars::SelfTriggered {
        eps1c,
        eps2c,
        s_bar,
    } = ctx.scheme
    else {
        return Err(Error::InvalidParameter(
            "context is not a self-triggered scheme".into(),
        ));
    };
    ctx.validate()?;
    let sb = s_bar as f64;
    let vars = theorem2_vars(ctx);
    let (n, z, a, w) = (ctx.n(), ctx.z(), ctx.a(), ctx.w());
    let nt = ctx.stacked_dim();
    let dims = [z, a, w, n, n, n, n];
    let mut reg = SymbolRegistry::default();
    let l: Vec<DMatrix<f64>> = (1..=7).map(|j| selector(&dims, j)).collect::<Result<_>>()?;
    for (j, lj) in l.iter().enumerate() {
        reg.put_const(&format!("Lbar_{}", j + 1), lj)?;
    }
    let (l1, l2, l3, l4, l5, l6, l7) = (&l[0], &l[1], &l[2], &l[3], &l[4], &l[5], &l[6]);
    let lam2 = lambda2(ctx);
    let lam1 = vstack(&[l4, l2, l3]);
    let sig1 = sigma1(ctx);
    reg.put_const("Lambda_2", &lam2)?;
    reg.put_const("Lambdabar_1", &lam1)?;
    reg.put_const("Sigma_1", &sig1)?;
    let (a_m, b_m, c_m, d_m) = (&ctx.sys.a, &ctx.sys.b, &ctx.sys.c, &ctx.sys.d);
    let ab = a_m * l1 + b_m * &sig1 * &lam1;
    let lam2_ab = &lam2 * &ab;
    let lam2_l1 = &lam2 * l1;
    let g1 = &lam2_ab - &lam2_l1;
    let g2 = c_m * l1 + d_m * &sig1 * &lam1;
    let g3 = vstack(&[&(&ctx.maps.pi_px * l4 + &ctx.maps.pi_pm * l2), l2]);
    reg.put_const("Gbar_1", &g1)?;
    reg.put_const("Gbar_2", &g2)?;
    reg.put_const("Gbar_3", &g3)?;
    let r12 = lam2_ab.clone();
    let r13 = l5 - &lam2_ab;
    let zn = DMatrix::zeros(n, nt);
    let r1 = vstack(&[l4, l5, &r12, &(l6 + &r12)]);
    let r2 = vstack(&[&(-l4), &(-l5), &r13, &(l7 - l5 - &lam2_l1)]);
    let r3 = vstack(&[l4, l5, &zn, l6]);
    let r4 = vstack(&[l4, l5, &zn, l7]);
    let r5 = vstack(&[&zn, &zn, &(&lam2_l1 - l4), &(l6 - l4)]);
    let r6 = vstack(&[&zn, &zn, &(l5 - &lam2_l1), &(l7 - l5)]);
    let r7 = &r2 - &r6;
    let r8 = &r1 - &r5;
    let r9 = vstack(&[&(&lam2_l1 - l4), &(&lam2_l1 + l4 - l6)]);
    let r10 = vstack(&[&(l5 - &lam2_l1), &(l5 + &lam2_l1 - l7)]);
    let r11 = vstack(&[l5, l4]);
    for (name, m) in [
        ("Rbar_1", &r1),
        ("Rbar_2", &r2),
        ("Rbar_3", &r3),
        ("Rbar_4", &r4),
        ("Rbar_5", &r5),
        ("Rbar_6", &r6),
        ("Rbar_7", &r7),
        ("Rbar_8", &r8),
        ("Rbar_9", &r9),
        ("Rbar_10", &r10),
        ("Rbar_11", &r11),
        ("Rbar_12", &r12),
        ("Rbar_13", &r13),
    ] {
        reg.put_const(name, m)?;
    }
    reg.put_const("Upsilonbar_3", &vstack(&[l4, l5, &zn, l6]))?;
    reg.put_const("Upsilonbar_4", &vstack(&[l4, l5, &zn, l7]))?;

    let (p, t1, t2) = (var(&vars, "P"), var(&vars, "T1"), var(&vars, "T2"));
    let (xi1, xi2, r) = (var(&vars, "Xi1"), var(&vars, "Xi2"), var(&vars, "R"));
    let (n1, n2, gamma) = (var(&vars, "N1"), var(&vars, "N2"), var(&vars, "gamma"));
    let (lam1v, lam2v) = (var(&vars, "lambda1"), var(&vars, "lambda2"));
    let xi1e = AffineExpr::var(xi1);
    let xi2e = AffineExpr::var(xi2);
    let top = xi1e.scale(eps1c).sub(&xi2e);
    let bottom = xi1e.scale(eps2c).sub(&xi2e);
    let x1 = AffineExpr::block(&[vec![Some(&top)], vec![Some(&xi2e.transpose())]])?;
    let x2 = AffineExpr::block(&[vec![Some(&xi2e)], vec![Some(&bottom)]])?;
    let xit = AffineExpr::block(&[vec![Some(&x1), Some(&x2)]])?;
    reg.put_affine("X_1", &x1)?;
    reg.put_affine("X_2", &x2)?;
    reg.put_affine("Xitilde", &xit)?;

    let i4 = DMatrix::identity(4 * n, 4 * n);
    let int = DMatrix::identity(nt, nt);
    let sym_part = AffineExpr::lin(&r1.transpose(), r, VarForm::Matrix, &r2)
        .sub(&AffineExpr::lin(&r5.transpose(), r, VarForm::Matrix, &r6))
        .add(&AffineExpr::lin(&int, n1, VarForm::Matrix, &r9))
        .add(&AffineExpr::lin(&int, n2, VarForm::Matrix, &r10))
        .sym();
    let gt = AffineExpr::congruence(&ab, p)
        .add(&AffineExpr::congruence(&g1, t1).scale(sb - 1.0))
        .add(&AffineExpr::congruence(&g1, t2).scale(sb + 1.0))
        .add(
            &AffineExpr::lin(&r7.transpose(), lam1v, VarForm::ScaledIdentity(4 * n), &r7).scale(sb),
        )
        .add(
            &AffineExpr::lin(&r4.transpose(), lam2v, VarForm::ScaledIdentity(4 * n), &r4).scale(sb),
        )
        .add_const(&(g2.transpose() * &ctx.m_theta * &g2))
        .add(&dnn_term(ctx, &g3, gamma)?)
        .add(&sym_part)
        .sub(&xit.lmul(&r11.transpose()).rmul(&r11))
        .sub(&AffineExpr::congruence(l1, p));
    reg.put_affine("Gtilde", &gt)?;

    let e1 = AffineExpr::lin(&int, n1, VarForm::Matrix, &DMatrix::identity(2 * n, 2 * n)).scale(sb);
    let e2 = AffineExpr::lin(&int, n2, VarForm::Matrix, &DMatrix::identity(2 * n, 2 * n)).scale(sb);
    let e3 = AffineExpr::lin(&r3.transpose(), r, VarForm::Matrix, &i4).scale(sb);
    let e4 = AffineExpr::lin(&r8.transpose(), r, VarForm::Matrix, &i4).scale(sb);
    let eth1 = AffineExpr::block(&[vec![Some(&e1), Some(&e2), Some(&e3), Some(&e4)]])?;
    reg.put_affine("eth_1", &eth1)?;
    let tc1 = t_cal(n, t1);
    let tc2 = t_cal(n, t2);
    reg.put_affine("Tbar_1cal", &tc1)?;
    reg.put_affine("Tbar_2cal", &tc2)?;
    let d1 = tc1.scale(sb);
    let d2 = tc2.scale(sb);
    let d3 = AffineExpr::lin(&i4, lam1v, VarForm::ScaledIdentity(4 * n), &i4).scale(sb);
    let d4 = AffineExpr::lin(&i4, lam2v, VarForm::ScaledIdentity(4 * n), &i4).scale(sb);
    let eth2 = AffineExpr::block(&[
        vec![Some(&d1), None, None, None],
        vec![None, Some(&d2), None, None],
        vec![None, None, Some(&d3), None],
        vec![None, None, None, Some(&d4)],
    ])?;
    reg.put_affine("eth_2", &eth2)?;
    Ok(reg)
}

/// Self-triggered main block `[[G̃, ð_1], [⋆, −ð_2]]`.
pub fn theorem2_block(reg: &SymbolRegistry) -> Result<AffineExpr> {
    let gt = reg.affine("Gtilde").expect("registered");
    let eth1 = reg.affine("eth_1").expect("registered");
    let eth2 = reg.affine("eth_2").expect("registered");
    let eth1t = eth1.transpose();
    let neg = eth2.scale(-1.0);
    AffineExpr::block(&[vec![Some(gt), Some(eth1)], vec![Some(&eth1t), Some(&neg)]])
}

/// Self-triggered certificate: the main block followed by the row
/// constraints.
pub fn assemble_theorem2(ctx: &TheoremContext) -> Result<LmiProblem> {
    let reg = theorem2_symbols(ctx)?;
    let vars = theorem2_vars(ctx);
    let mut lmis = vec![AffineLmi::new(
        "main",
        theorem2_block(&reg)?,
        Sense::NegDef,
    )?];
    lmis.extend(row_lmis(ctx, var(&vars, "P"))?);
    let prob = LmiProblem { vars, lmis };
    prob.validate()?;
    Ok(prob)
}

/// Assembles whichever certificate matches the context's scheme.
pub fn assemble(ctx: &TheoremContext) -> Result<LmiProblem> {
    match ctx.scheme {
        SchemeScalars::Event { .. } => assemble_theorem1(ctx),
        SchemeScalars::SelfTriggered { .. } => assemble_theorem2(ctx),
    }
}
