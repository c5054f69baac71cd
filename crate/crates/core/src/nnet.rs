// SPDX-License-Identifier: MIT
//! Feed-forward controller and its convex relaxation artifacts.
//!
//! A [`Dnn`] holds `l` hidden layers followed by a linear output layer.
//! Hidden preactivations and activations are aggregated into the stacked
//! vectors `p` and `m` of length `a = a_1 + ... + a_l`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{block_diag, hstack, vstack};

/// Scalar activation applied element-wise in every hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    /// Evaluates the activation at `t`.
    pub fn apply(self, t: f64) -> f64 {
        match self {
            Activation::Tanh => t.tanh(),
            Activation::Relu => t.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-t).exp()),
        }
    }

    /// All supported tags are non-decreasing.
    pub fn is_monotone(self) -> bool {
        matches!(
            self,
            Activation::Tanh | Activation::Relu | Activation::Sigmoid
        )
    }

    /// Whether the activation maps zero to zero.
    pub fn fixes_zero(self) -> bool {
        matches!(self, Activation::Tanh | Activation::Relu)
    }
}

/// One affine layer `W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Layer {
    /// Layer with zero bias.
    pub fn unbiased(w: DMatrix<f64>) -> Self {
        let b = DVector::zeros(w.nrows());
        Self { w, b }
    }
}

/// Feed-forward network with `l ≥ 1` hidden layers and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Dnn {
    activation: Activation,
    hidden: Vec<Layer>,
    output: Layer,
}

/// Result of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    /// Control output, length `m`.
    pub u: DVector<f64>,
    /// Stacked preactivations, length `a`.
    pub p: DVector<f64>,
    /// Stacked activations, length `a`.
    pub m_act: DVector<f64>,
}

impl Dnn {
    /// Builds a network from its layers; the last entry is the output layer.
    pub fn new(activation: Activation, mut layers: Vec<Layer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidParameter(
                "a network needs at least one hidden layer and an output layer".into(),
            ));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.b.len() != layer.w.nrows() {
                return Err(dim_err(
                    &format!("bias of layer {}", i + 1),
                    layer.w.nrows(),
                    layer.b.len(),
                ));
            }
            if layer.w.iter().chain(layer.b.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "layer {} has non-finite entries",
                    i + 1
                )));
            }
        }
        for i in 1..layers.len() {
            if layers[i].w.ncols() != layers[i - 1].w.nrows() {
                return Err(dim_err(
                    &format!("columns of W_{}", i + 1),
                    layers[i - 1].w.nrows(),
                    layers[i].w.ncols(),
                ));
            }
        }
        let output = layers.pop().expect("length checked above");
        Ok(Self {
            activation,
            hidden: layers,
            output,
        })
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Hidden layers `1..=l`.
    pub fn hidden(&self) -> &[Layer] {
        &self.hidden
    }

    /// Output layer `l + 1`.
    pub fn output(&self) -> &Layer {
        &self.output
    }

    /// State dimension `n = a_0`.
    pub fn n(&self) -> usize {
        self.hidden[0].w.ncols()
    }

    /// Control dimension.
    pub fn m(&self) -> usize {
        self.output.w.nrows()
    }

    /// Number of hidden layers `l`.
    pub fn depth(&self) -> usize {
        self.hidden.len()
    }

    /// Hidden widths `a_1..a_l`.
    pub fn widths(&self) -> Vec<usize> {
        self.hidden.iter().map(|l| l.w.nrows()).collect()
    }

    /// Total hidden width `a`.
    pub fn total_width(&self) -> usize {
        self.widths().iter().sum()
    }

    /// True when every bias is exactly zero.
    pub fn is_zero_bias(&self) -> bool {
        self.hidden
            .iter()
            .chain(std::iter::once(&self.output))
            .all(|l| l.b.iter().all(|&v| v == 0.0))
    }

    /// Evaluates the network at `x`.
    pub fn forward(&self, x: &DVector<f64>) -> Result<ForwardPass> {
        if x.len() != self.n() {
            return Err(dim_err("network input", self.n(), x.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "network input is not finite".into(),
            ));
        }
        let a = self.total_width();
        let mut p = DVector::zeros(a);
        let mut m_act = DVector::zeros(a);
        let mut h = x.clone();
        let mut off = 0;
        for layer in &self.hidden {
            let pre = &layer.w * &h + &layer.b;
            let post = pre.map(|t| self.activation.apply(t));
            let k = pre.len();
            p.rows_mut(off, k).copy_from(&pre);
            m_act.rows_mut(off, k).copy_from(&post);
            off += k;
            h = post;
        }
        let u = &self.output.w * &h + &self.output.b;
        Ok(ForwardPass { u, p, m_act })
    }

    /// Control output only.
    pub fn control(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.forward(x)?.u)
    }

    /// Parses the JSON weight document.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: WeightFile = serde_json::from_str(s)?;
        doc.into_dnn()
    }

    /// Reads a JSON weight file.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Serialises to the JSON weight document.
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&WeightFile::from_dnn(self))?)
    }
}

/// On-disk weight format; `W` is row-major and the last layer is linear.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightFile {
    pub activation: Activation,
    pub layers: Vec<WeightLayer>,
}

/// One layer of a [`WeightFile`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightLayer {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl WeightFile {
    fn into_dnn(self) -> Result<Dnn> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.into_iter().enumerate() {
            let rows = l.w.len();
            let cols = l.w.first().map_or(0, |r| r.len());
            if l.w.iter().any(|r| r.len() != cols) {
                return Err(dim_err(&format!("rows of W_{}", i + 1), cols, "ragged"));
            }
            let w = DMatrix::from_row_iterator(rows, cols, l.w.into_iter().flatten());
            layers.push(Layer {
                w,
                b: DVector::from_vec(l.b),
            });
        }
        Dnn::new(self.activation, layers)
    }

    fn from_dnn(dnn: &Dnn) -> Self {
        let layers = dnn
            .hidden
            .iter()
            .chain(std::iter::once(&dnn.output))
            .map(|l| WeightLayer {
                w: l.w
                    .row_iter()
                    .map(|r| r.iter().copied().collect())
                    .collect(),
                b: l.b.iter().copied().collect(),
            })
            .collect();
        Self {
            activation: dnn.activation,
            layers,
        }
    }
}

/// Interval box on the stacked preactivations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreactivationBox {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    /// Equilibrium preactivation `p*`.
    pub center: DVector<f64>,
}

impl PreactivationBox {
    /// Validates `lower ≤ upper` and matching lengths.
    pub fn validate(&self) -> Result<()> {
        let a = self.center.len();
        if self.lower.len() != a || self.upper.len() != a {
            return Err(dim_err("preactivation box", a, self.lower.len()));
        }
        if self.lower.iter().zip(self.upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::InvalidParameter("box has lower > upper".into()));
        }
        Ok(())
    }

    /// True when `lower = 2·center − upper` to `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.center.len())
            .all(|i| (self.lower[i] - (2.0 * self.center[i] - self.upper[i])).abs() <= tol)
    }

    /// Whether `p` lies inside the box up to `tol`.
    pub fn contains(&self, p: &DVector<f64>, tol: f64) -> bool {
        p.len() == self.center.len()
            && (0..p.len()).all(|i| p[i] >= self.lower[i] - tol && p[i] <= self.upper[i] + tol)
    }
}

/// Propagates a first-layer box through all hidden layers.
///
/// The seed is `[p*_1 − h, p*_1 + h]`. `center` defaults to the
/// preactivations of the forward pass at `x = 0`.
pub fn interval_bounds(
    dnn: &Dnn,
    first_layer_halfwidth: &DVector<f64>,
    center: Option<&DVector<f64>>,
) -> Result<PreactivationBox> {
    let widths = dnn.widths();
    if first_layer_halfwidth.len() != widths[0] {
        return Err(dim_err(
            "seed half-width",
            widths[0],
            first_layer_halfwidth.len(),
        ));
    }
    if first_layer_halfwidth
        .iter()
        .any(|&h| !(h >= 0.0) || !h.is_finite())
    {
        return Err(Error::InvalidParameter(
            "seed half-width must be ≥ 0".into(),
        ));
    }
    if !dnn.activation.is_monotone() {
        return Err(Error::Unsupported("non-monotone activation".into()));
    }
    let a = dnn.total_width();
    let center = match center {
        Some(c) => {
            if c.len() != a {
                return Err(dim_err("equilibrium preactivation", a, c.len()));
            }
            c.clone()
        }
        None => dnn.forward(&DVector::zeros(dnn.n()))?.p,
    };
    let mut lower = DVector::zeros(a);
    let mut upper = DVector::zeros(a);
    let a1 = widths[0];
    for i in 0..a1 {
        lower[i] = center[i] - first_layer_halfwidth[i];
        upper[i] = center[i] + first_layer_halfwidth[i];
    }
    let mut off = a1;
    let mut prev_lo: DVector<f64> = lower.rows(0, a1).map(|t| dnn.activation.apply(t));
    let mut prev_hi: DVector<f64> = upper.rows(0, a1).map(|t| dnn.activation.apply(t));
    for layer in &dnn.hidden[1..] {
        let wp = layer.w.map(|v| v.max(0.0));
        let wn = layer.w.map(|v| v.min(0.0));
        let lo = &wp * &prev_lo + &wn * &prev_hi + &layer.b;
        let hi = &wp * &prev_hi + &wn * &prev_lo + &layer.b;
        let k = lo.len();
        lower.rows_mut(off, k).copy_from(&lo);
        upper.rows_mut(off, k).copy_from(&hi);
        prev_lo = lo.map(|t| dnn.activation.apply(t));
        prev_hi = hi.map(|t| dnn.activation.apply(t));
        off += k;
    }
    Ok(PreactivationBox {
        lower,
        upper,
        center,
    })
}

/// Element-wise local sector `Sec[ρ, σ]` for the hidden activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorBounds {
    pub rho: DVector<f64>,
    pub sigma: DVector<f64>,
    /// Diagnostics attached when a bound is only a modelling knob.
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl SectorBounds {
    /// Number of neurons `a`.
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

/// `tanh(u)/u` with its limit 1 at the origin.
pub fn tanh_slope(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u * u / 3.0
    } else {
        u.tanh() / u
    }
}

/// Local sector bounds on a symmetric box centred at zero.
///
/// For tanh, `ρ_i = tanh(ū_i)/ū_i` and `σ_i = 1` unless overridden. When an
/// override drops below `ρ_i`, `ρ_i` is clamped to `σ_i` and a warning is
/// recorded.
pub fn sector_bounds(
    bx: &PreactivationBox,
    activation: Activation,
    sigma_override: Option<&DVector<f64>>,
) -> Result<SectorBounds> {
    bx.validate()?;
    let a = bx.center.len();
    if !bx.is_symmetric(1e-12) || bx.center.iter().any(|&c| c != 0.0) {
        return Err(Error::Unsupported(
            "sector bounds require a box symmetric about a zero equilibrium".into(),
        ));
    }
    if let Some(s) = sigma_override {
        if s.len() != a {
            return Err(dim_err("sigma override", a, s.len()));
        }
    }
    let mut warnings = Vec::new();
    let (rho, mut sigma) = match activation {
        Activation::Tanh => (bx.upper.map(tanh_slope), DVector::from_element(a, 1.0)),
        Activation::Relu => (DVector::zeros(a), DVector::from_element(a, 1.0)),
        Activation::Sigmoid => {
            return Err(Error::Unsupported(
                "sigmoid does not fix zero; offset sectors are not supported".into(),
            ))
        }
    };
    if let Some(s) = sigma_override {
        sigma = s.clone();
    }
    let mut rho = rho;
    if sigma.iter().any(|&s| s < 1.0) {
        warnings.push("sigma < 1: sector claim does not hold near the origin".into());
    }
    let mut clamped = 0;
    for i in 0..a {
        if rho[i] > sigma[i] {
            rho[i] = sigma[i];
            clamped += 1;
        }
    }
    if clamped > 0 {
        warnings.push(format!("rho clamped to sigma on {clamped} neurons"));
    }
    Ok(SectorBounds {
        rho,
        sigma,
        warnings,
    })
}

/// Linear maps isolating the activations from the network structure.
///
/// `u = Π_ux x + Π_um m + Π_u1` and `p = Π_px x + Π_pm m + Π_p1` with
/// `m = φ(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationMaps {
    pub pi_ux: DMatrix<f64>,
    pub pi_um: DMatrix<f64>,
    pub pi_u1: DVector<f64>,
    pub pi_px: DMatrix<f64>,
    pub pi_pm: DMatrix<f64>,
    pub pi_p1: DVector<f64>,
    /// Hidden widths used to resolve `m = φ(p)` layer by layer.
    pub widths: Vec<usize>,
}

/// Builds the isolation maps of `dnn`.
pub fn isolation_maps(dnn: &Dnn) -> IsolationMaps {
    let n = dnn.n();
    let m = dnn.m();
    let widths = dnn.widths();
    let a = dnn.total_width();
    let al = *widths.last().expect("at least one hidden layer");
    let pi_ux = DMatrix::zeros(m, n);
    let pi_um = hstack(&[&DMatrix::zeros(m, a - al), &dnn.output.w]);
    let pi_u1 = dnn.output.b.clone();
    let pi_px = vstack(&[&dnn.hidden[0].w, &DMatrix::zeros(a - widths[0], n)]);
    let mut pi_pm = DMatrix::zeros(a, a);
    if dnn.depth() > 1 {
        let inner: Vec<&DMatrix<f64>> = dnn.hidden[1..].iter().map(|l| &l.w).collect();
        let diag = block_diag(&inner);
        pi_pm
            .view_mut((widths[0], 0), (a - widths[0], a - al))
            .copy_from(&diag);
    }
    let biases: Vec<f64> = dnn
        .hidden
        .iter()
        .flat_map(|l| l.b.iter().copied())
        .collect();
    IsolationMaps {
        pi_ux,
        pi_um,
        pi_u1,
        pi_px,
        pi_pm,
        pi_p1: DVector::from_vec(biases),
        widths,
    }
}

impl IsolationMaps {
    /// Reconstructs the control output through the maps, resolving
    /// `m = φ(Π_px x + Π_pm m + Π_p1)` one layer at a time.
    pub fn reconstruct(&self, x: &DVector<f64>, activation: Activation) -> DVector<f64> {
        let a = self.pi_pm.nrows();
        let mut m = DVector::zeros(a);
        let mut off = 0;
        for &k in &self.widths {
            let p = &self.pi_px * x + &self.pi_pm * &m + &self.pi_p1;
            for i in off..off + k {
                m[i] = activation.apply(p[i]);
            }
            off += k;
        }
        &self.pi_ux * x + &self.pi_um * &m + &self.pi_u1
    }
}

/// Quadratic constraint on `(Δp, Δm)` induced by a local sector, affine
/// in the multiplier vector `γ ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DnnQuadraticConstraint {
    pub rho: DVector<f64>,
    pub sigma: DVector<f64>,
}

/// Wraps sector bounds as the activation quadratic constraint.
pub fn dnn_quadratic_constraint(sec: &SectorBounds) -> Result<DnnQuadraticConstraint> {
    if sec.rho.len() != sec.sigma.len() {
        return Err(dim_err("sector bounds", sec.rho.len(), sec.sigma.len()));
    }
    if sec.rho.iter().zip(sec.sigma.iter()).any(|(r, s)| r > s) {
        return Err(Error::InvalidParameter("rho must not exceed sigma".into()));
    }
    Ok(DnnQuadraticConstraint {
        rho: sec.rho.clone(),
        sigma: sec.sigma.clone(),
    })
}

impl DnnQuadraticConstraint {
    /// Number of neurons `a`.
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Outer factor `[M_σ, −I; −M_ρ, I]`.
    pub fn outer_factor(&self) -> DMatrix<f64> {
        let a = self.len();
        let i = DMatrix::<f64>::identity(a, a);
        let ms = DMatrix::from_diagonal(&self.sigma);
        let mr = DMatrix::from_diagonal(&self.rho);
        vstack(&[&hstack(&[&ms, &(-&i)]), &hstack(&[&(-mr), &i])])
    }

    /// The matrix `M_DNN` at a concrete multiplier.
    pub fn matrix(&self, gamma: &DVector<f64>) -> Result<DMatrix<f64>> {
        let a = self.len();
        if gamma.len() != a {
            return Err(dim_err("gamma", a, gamma.len()));
        }
        if gamma.iter().any(|&g| g < 0.0) {
            return Err(Error::InvalidParameter("gamma must be non-negative".into()));
        }
        let j = self.outer_factor();
        let mut mid = DMatrix::zeros(2 * a, 2 * a);
        for i in 0..a {
            mid[(i, a + i)] = gamma[i];
            mid[(a + i, i)] = gamma[i];
        }
        Ok(j.transpose() * mid * j)
    }

    /// Quadratic form `Col(Δp, Δm)ᵀ M_DNN Col(Δp, Δm)`.
    pub fn form(&self, gamma: &DVector<f64>, dp: &DVector<f64>, dm: &DVector<f64>) -> Result<f64> {
        let mat = self.matrix(gamma)?;
        let v = vstack(&[
            &DMatrix::from_column_slice(dp.len(), 1, dp.as_slice()),
            &DMatrix::from_column_slice(dm.len(), 1, dm.as_slice()),
        ]);
        Ok((v.transpose() * mat * v)[(0, 0)])
    }
}

/// Two-hidden-layer tanh network approximating `u = −K x` near zero.
///
/// With scale `s`: `W_1 = s·[I; 0]`, `W_2 = s·[I 0; 0 0]`, `W_3 = −K·[I 0]/s²`
/// and zero biases. The error obeys
/// `‖π(x) + K x‖_∞ ≤ c·s²·‖x‖_∞³` with `c` from [`surrogate_error_constant`].
pub fn synthesize_surrogate(k: &DMatrix<f64>, scale: f64, widths: (usize, usize)) -> Result<Dnn> {
    let (m, n) = k.shape();
    let (a1, a2) = widths;
    if a1 < n || a2 < n {
        return Err(Error::InvalidParameter(format!(
            "surrogate widths ({a1}, {a2}) must be at least n = {n}"
        )));
    }
    if !(scale > 0.0 && scale <= 0.1) {
        return Err(Error::InvalidParameter(format!(
            "surrogate scale {scale} must lie in (0, 0.1]"
        )));
    }
    let mut w1 = DMatrix::zeros(a1, n);
    let mut w2 = DMatrix::zeros(a2, a1);
    for i in 0..n {
        w1[(i, i)] = scale;
        w2[(i, i)] = scale;
    }
    let mut w3 = DMatrix::zeros(m, a2);
    w3.view_mut((0, 0), (m, n))
        .copy_from(&(-k / (scale * scale)));
    Dnn::new(
        Activation::Tanh,
        vec![
            Layer::unbiased(w1),
            Layer::unbiased(w2),
            Layer::unbiased(w3),
        ],
    )
}

/// Constant `c = ‖K‖_∞ (1 + s²)/3` of the surrogate error bound.
///
/// Follows from `|tanh t − t| ≤ |t|³/3` applied to both hidden layers.
pub fn surrogate_error_constant(k: &DMatrix<f64>, scale: f64) -> f64 {
    let kinf = k
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    kinf * (1.0 + scale * scale) / 3.0
}
