// SPDX-License-Identifier: MIT
//! Nominal plant, static uncertainty, IQC filter and their interconnection.
//!
//! The plant is
//! `x⁺ = A_g x + B_g u + F_g ω`, `ν = C_g x + D_g u + G_g ω`, `ω = Θ(ν)`,
//! and the filter `ξ⁺ = A_f ξ + B_f ν + F_f ω`, `r = C_f ξ + D_f ν + G_f ω`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{expect_finite, expect_shape, hstack, spectral_radius, vstack, wnorm2};

/// Nominal discrete-time plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    pub a_g: DMatrix<f64>,
    pub b_g: DMatrix<f64>,
    pub f_g: DMatrix<f64>,
    pub c_g: DMatrix<f64>,
    pub d_g: DMatrix<f64>,
    pub g_g: DMatrix<f64>,
}

impl Plant {
    /// Validates shapes and finiteness.
    pub fn new(
        a_g: DMatrix<f64>,
        b_g: DMatrix<f64>,
        f_g: DMatrix<f64>,
        c_g: DMatrix<f64>,
        d_g: DMatrix<f64>,
        g_g: DMatrix<f64>,
    ) -> Result<Self> {
        let p = Self {
            a_g,
            b_g,
            f_g,
            c_g,
            d_g,
            g_g,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a_g.nrows();
        let (m, w, v) = (self.b_g.ncols(), self.f_g.ncols(), self.c_g.nrows());
        expect_shape("A_g", &self.a_g, n, n)?;
        expect_shape("B_g", &self.b_g, n, m)?;
        expect_shape("F_g", &self.f_g, n, w)?;
        expect_shape("C_g", &self.c_g, v, n)?;
        expect_shape("D_g", &self.d_g, v, m)?;
        expect_shape("G_g", &self.g_g, v, w)?;
        for (name, mat) in [
            ("A_g", &self.a_g),
            ("B_g", &self.b_g),
            ("F_g", &self.f_g),
            ("C_g", &self.c_g),
            ("D_g", &self.d_g),
            ("G_g", &self.g_g),
        ] {
            expect_finite(name, mat)?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.a_g.nrows()
    }
    pub fn m(&self) -> usize {
        self.b_g.ncols()
    }
    pub fn w(&self) -> usize {
        self.f_g.ncols()
    }
    pub fn v(&self) -> usize {
        self.c_g.nrows()
    }

    /// Uncertainty input `ν = C_g x + D_g u + G_g ω`.
    pub fn nu(&self, x: &DVector<f64>, u: &DVector<f64>, omega: &DVector<f64>) -> DVector<f64> {
        &self.c_g * x + &self.d_g * u + &self.g_g * omega
    }

    /// One plant step.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, omega: &DVector<f64>) -> DVector<f64> {
        &self.a_g * x + &self.b_g * u + &self.f_g * omega
    }
}

/// Known static uncertainty used by simulations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyKind {
    /// `ω = ν − sin ν`, element-wise.
    SineDefect,
    /// `ω = 0`.
    None,
}

/// Static uncertainty operator with its local sector `(l_s, m_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyOp {
    pub kind: UncertaintyKind,
    pub l_s: f64,
    pub m_s: f64,
}

impl UncertaintyOp {
    /// Evaluates `Θ(ν)`.
    pub fn apply(&self, nu: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            UncertaintyKind::SineDefect => nu.map(|v| v - v.sin()),
            UncertaintyKind::None => DVector::zeros(nu.len()),
        }
    }
}

/// Virtual filter and IQC multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqcFilter {
    pub a_f: DMatrix<f64>,
    pub b_f: DMatrix<f64>,
    pub f_f: DMatrix<f64>,
    pub c_f: DMatrix<f64>,
    pub d_f: DMatrix<f64>,
    pub g_f: DMatrix<f64>,
    pub m_theta: DMatrix<f64>,
    pub rho_iqc: f64,
}

impl IqcFilter {
    /// Validates shapes, the multiplier, and that `A_f` is Schur.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a_f: DMatrix<f64>,
        b_f: DMatrix<f64>,
        f_f: DMatrix<f64>,
        c_f: DMatrix<f64>,
        d_f: DMatrix<f64>,
        g_f: DMatrix<f64>,
        m_theta: DMatrix<f64>,
        rho_iqc: f64,
    ) -> Result<Self> {
        let f = Self {
            a_f,
            b_f,
            f_f,
            c_f,
            d_f,
            g_f,
            m_theta,
            rho_iqc,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let psi = self.a_f.nrows();
        let (v, w, kappa) = (self.b_f.ncols(), self.f_f.ncols(), self.c_f.nrows());
        expect_shape("A_f", &self.a_f, psi, psi)?;
        expect_shape("B_f", &self.b_f, psi, v)?;
        expect_shape("F_f", &self.f_f, psi, w)?;
        expect_shape("C_f", &self.c_f, kappa, psi)?;
        expect_shape("D_f", &self.d_f, kappa, v)?;
        expect_shape("G_f", &self.g_f, kappa, w)?;
        expect_shape("M_theta", &self.m_theta, kappa, kappa)?;
        if crate::linalg::asymmetry(&self.m_theta) > 1e-12 {
            return Err(Error::InvalidParameter("M_theta must be symmetric".into()));
        }
        if !(self.rho_iqc > 0.0 && self.rho_iqc <= 1.0) {
            return Err(Error::InvalidParameter("rho_iqc must lie in (0, 1]".into()));
        }
        let r = spectral_radius(&self.a_f);
        if r >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "filter state matrix is not Schur (spectral radius {r})"
            )));
        }
        Ok(())
    }

    pub fn psi(&self) -> usize {
        self.a_f.nrows()
    }
    pub fn kappa(&self) -> usize {
        self.c_f.nrows()
    }
}

/// Dimension record of the augmented interconnection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedDims {
    pub n: usize,
    pub psi: usize,
    pub z: usize,
    pub m: usize,
    pub w: usize,
    pub v: usize,
    pub kappa: usize,
}

/// Plant and filter in series: `η⁺ = A η + B Col(u, ω)`, `r = C η + D Col(u, ω)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub dims: AugmentedDims,
}

/// Composes plant and filter.
pub fn build_augmented(plant: &Plant, filter: &IqcFilter) -> Result<AugmentedSystem> {
    plant.validate()?;
    filter.validate()?;
    if filter.b_f.ncols() != plant.v() {
        return Err(dim_err("filter input ν", plant.v(), filter.b_f.ncols()));
    }
    if filter.f_f.ncols() != plant.w() {
        return Err(dim_err("filter input ω", plant.w(), filter.f_f.ncols()));
    }
    let (n, m, w, v) = (plant.n(), plant.m(), plant.w(), plant.v());
    let (psi, kappa) = (filter.psi(), filter.kappa());
    let a = vstack(&[
        &hstack(&[&plant.a_g, &DMatrix::zeros(n, psi)]),
        &hstack(&[&(&filter.b_f * &plant.c_g), &filter.a_f]),
    ]);
    let b = vstack(&[
        &hstack(&[&plant.b_g, &plant.f_g]),
        &hstack(&[
            &(&filter.b_f * &plant.d_g),
            &(&filter.b_f * &plant.g_g + &filter.f_f),
        ]),
    ]);
    let c = hstack(&[&(&filter.d_f * &plant.c_g), &filter.c_f]);
    let d = hstack(&[
        &(&filter.d_f * &plant.d_g),
        &(&filter.d_f * &plant.g_g + &filter.g_f),
    ]);
    Ok(AugmentedSystem {
        a,
        b,
        c,
        d,
        dims: AugmentedDims {
            n,
            psi,
            z: n + psi,
            m,
            w,
            v,
            kappa,
        },
    })
}

impl AugmentedSystem {
    fn input(u: &DVector<f64>, omega: &DVector<f64>) -> DVector<f64> {
        let mut ub = DVector::zeros(u.len() + omega.len());
        ub.rows_mut(0, u.len()).copy_from(u);
        ub.rows_mut(u.len(), omega.len()).copy_from(omega);
        ub
    }

    /// One augmented step.
    pub fn step(&self, eta: &DVector<f64>, u: &DVector<f64>, omega: &DVector<f64>) -> DVector<f64> {
        &self.a * eta + &self.b * Self::input(u, omega)
    }

    /// Filter output `r`.
    pub fn output(
        &self,
        eta: &DVector<f64>,
        u: &DVector<f64>,
        omega: &DVector<f64>,
    ) -> DVector<f64> {
        &self.c * eta + &self.d * Self::input(u, omega)
    }
}

/// Physical parameters of the Euler-discretised inverted pendulum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumParams {
    pub ts: f64,
    pub g: f64,
    pub l_d: f64,
    pub mu: f64,
    pub mass: f64,
    pub phi_bar: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            ts: 0.01,
            g: 9.8,
            l_d: 0.5,
            mu: 0.05,
            mass: 0.15,
            phi_bar: 0.73,
        }
    }
}

/// Default IQC multiplier for the two-output sector filter.
pub fn default_m_theta() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

/// Pendulum plant, its sine-defect uncertainty and the off-by-one filter.
pub fn build_pendulum(p: &PendulumParams) -> Result<(Plant, UncertaintyOp, IqcFilter)> {
    for (name, v) in [
        ("ts", p.ts),
        ("g", p.g),
        ("l_d", p.l_d),
        ("mu", p.mu),
        ("mass", p.mass),
        ("phi_bar", p.phi_bar),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pendulum {name} must be > 0"
            )));
        }
    }
    let ml2 = p.mass * p.l_d * p.l_d;
    let a_g = DMatrix::from_row_slice(
        2,
        2,
        &[1.0, p.ts, p.ts * p.g / p.l_d, 1.0 - p.ts * p.mu / ml2],
    );
    let b_g = DMatrix::from_row_slice(2, 1, &[0.0, p.ts / ml2]);
    let f_g = DMatrix::from_row_slice(2, 1, &[0.0, -p.ts * p.g / p.l_d]);
    let c_g = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let plant = Plant::new(
        a_g,
        b_g,
        f_g,
        c_g,
        DMatrix::zeros(1, 1),
        DMatrix::zeros(1, 1),
    )?;
    let l_s = (p.phi_bar - p.phi_bar.sin()) / p.phi_bar;
    let m_s = 0.0;
    let unc = UncertaintyOp {
        kind: UncertaintyKind::SineDefect,
        l_s,
        m_s,
    };
    let filter = IqcFilter::new(
        DMatrix::zeros(1, 1),
        DMatrix::from_element(1, 1, -l_s),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
        DMatrix::from_row_slice(2, 1, &[l_s, -m_s]),
        DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]),
        default_m_theta(),
        1.0,
    )?;
    Ok((plant, unc, filter))
}

/// Partial sums of the weighted IQC and their validity verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqcReport {
    pub partial_sums: Vec<f64>,
    pub valid: bool,
    /// First index whose partial sum is below `-1e-9`.
    pub first_violation: Option<usize>,
    pub min_partial_sum: f64,
}

/// Tolerance below which a partial sum counts as a violation.
pub const IQC_TOL: f64 = 1e-9;

/// Runs the filter from `ξ(0) = 0` over `(ν, ω)` and accumulates
/// `Σ ρ^{−2k} r(k)ᵀ M_Θ r(k)`.
pub fn iqc_partial_sums(
    filter: &IqcFilter,
    nu_seq: &[DVector<f64>],
    omega_seq: &[DVector<f64>],
) -> Result<IqcReport> {
    if nu_seq.len() != omega_seq.len() {
        return Err(dim_err("IQC sequences", nu_seq.len(), omega_seq.len()));
    }
    let mut xi = DVector::zeros(filter.psi());
    let mut sums = Vec::with_capacity(nu_seq.len());
    let mut acc = 0.0;
    let w2 = filter.rho_iqc.powi(-2);
    let mut weight = 1.0;
    for (nu, om) in nu_seq.iter().zip(omega_seq) {
        if nu.len() != filter.b_f.ncols() || om.len() != filter.f_f.ncols() {
            return Err(dim_err("IQC sample", filter.b_f.ncols(), nu.len()));
        }
        let r = &filter.c_f * &xi + &filter.d_f * nu + &filter.g_f * om;
        acc += weight * wnorm2(&r, &filter.m_theta);
        sums.push(acc);
        xi = &filter.a_f * &xi + &filter.b_f * nu + &filter.f_f * om;
        weight *= w2;
    }
    Ok(summarise_iqc(sums))
}

/// Builds a report from precomputed partial sums.
pub fn summarise_iqc(sums: Vec<f64>) -> IqcReport {
    let first_violation = sums.iter().position(|&s| s < -IQC_TOL);
    let min_partial_sum = sums.iter().copied().fold(f64::INFINITY, f64::min);
    IqcReport {
        valid: first_violation.is_none(),
        first_violation,
        min_partial_sum: if sums.is_empty() {
            0.0
        } else {
            min_partial_sum
        },
        partial_sums: sums,
    }
}

/// Ellipsoid `{x : (x − x*)ᵀ P_1 (x − x*) ≤ 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoaEllipsoid {
    pub p1: DMatrix<f64>,
    pub center: DVector<f64>,
}

impl RoaEllipsoid {
    /// Level `(x − x*)ᵀ P_1 (x − x*)`.
    pub fn level(&self, x: &DVector<f64>) -> f64 {
        wnorm2(&(x - &self.center), &self.p1)
    }

    /// Membership test.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.level(x) <= 1.0
    }

    /// Volume proxy `det(P_1)^{−1/2}`.
    pub fn volume_proxy(&self) -> f64 {
        self.p1.determinant().powf(-0.5)
    }

    /// Largest `|x_i − x*_i|` over the ellipsoid: `sqrt((P_1⁻¹)_{ii})`.
    pub fn axis_extent(&self, i: usize) -> Option<f64> {
        self.p1.clone().try_inverse().map(|inv| inv[(i, i)].sqrt())
    }
}
