// SPDX-License-Identifier: MIT
//! Closed-loop rollouts of the sampled neural-feedback loop with
//! zero-order hold, plus the certificate monitors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::nnet::Dnn;
use crate::parallel::par_map;
use crate::synthesis::{roa_boundary, SynthesisResult};
use crate::triggers::{
    efficiency, et_step, st_next, EventTriggerParams, EventTriggerState, SelfTriggerParams,
};
use crate::uncertain_plant::{
    iqc_partial_sums, IqcFilter, IqcReport, Plant, RoaEllipsoid, UncertaintyOp,
};

/// State-norm blow-up guard.
pub const DIVERGENCE_GUARD: f64 = 1e6;

/// Convergence tolerance on `‖x(T) − x*‖`.
pub const CONVERGENCE_TOL: f64 = 1e-3;

/// Transmission scheme of a rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum SimScheme {
    Event(EventTriggerParams),
    SelfTriggered(SelfTriggerParams),
    Periodic { period: usize },
}

/// Rollout configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: usize,
    pub x0: DVector<f64>,
    pub scheme: SimScheme,
    /// Scale applied to the uncertainty inside the self-trigger predictor;
    /// `1` is the exact model.
    #[serde(default = "one")]
    pub predictor_uncertainty_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl SimConfig {
    pub fn new(horizon: usize, x0: DVector<f64>, scheme: SimScheme) -> Self {
        Self {
            horizon,
            x0,
            scheme,
            predictor_uncertainty_scale: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be ≥ 1".into()));
        }
        if self.x0.len() != n {
            return Err(dim_err("x0", n, self.x0.len()));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("x0 must be finite".into()));
        }
        match &self.scheme {
            SimScheme::Event(p) => {
                p.validate()?;
                if p.xi1.nrows() != n {
                    return Err(dim_err("trigger weights", n, p.xi1.nrows()));
                }
                if !self.horizon.is_multiple_of(p.theta) {
                    return Err(Error::InvalidParameter(
                        "horizon must be a multiple of theta".into(),
                    ));
                }
            }
            SimScheme::SelfTriggered(p) => {
                p.validate()?;
                if p.xi1c.nrows() != n {
                    return Err(dim_err("trigger weights", n, p.xi1c.nrows()));
                }
            }
            SimScheme::Periodic { period } => {
                if *period == 0 {
                    return Err(Error::InvalidParameter("period must be ≥ 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// Plant, uncertainty, filter and controller of one loop.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub plant: Plant,
    pub uncertainty: UncertaintyOp,
    pub filter: IqcFilter,
    pub dnn: Dnn,
}

impl ClosedLoop {
    pub fn new(
        plant: Plant,
        uncertainty: UncertaintyOp,
        filter: IqcFilter,
        dnn: Dnn,
    ) -> Result<Self> {
        if plant.g_g.iter().any(|&v| v != 0.0) {
            return Err(Error::Unsupported("simulation needs G_g = 0".into()));
        }
        if dnn.n() != plant.n() || dnn.m() != plant.m() {
            return Err(dim_err(
                "controller",
                format!("{}→{}", plant.n(), plant.m()),
                format!("{}→{}", dnn.n(), dnn.m()),
            ));
        }
        Ok(Self {
            plant,
            uncertainty,
            filter,
            dnn,
        })
    }

    pub fn n(&self) -> usize {
        self.plant.n()
    }

    /// `(ν, ω)` at state `x` under input `u`.
    fn nu_omega(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        scale: f64,
    ) -> (DVector<f64>, DVector<f64>) {
        let nu = self.plant.nu(x, u, &DVector::zeros(self.plant.w()));
        let omega = self.uncertainty.apply(&nu) * scale;
        (nu, omega)
    }

    /// Plant state after `s` steps from `x` with `u` held.
    fn predict(&self, x: &DVector<f64>, u: &DVector<f64>, s: usize, scale: f64) -> DVector<f64> {
        let mut x = x.clone();
        for _ in 0..s {
            let (_, omega) = self.nu_omega(&x, u, scale);
            x = self.plant.step(&x, u, &omega);
        }
        x
    }
}

/// One row of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub x: DVector<f64>,
    pub xi: DVector<f64>,
    pub u: DVector<f64>,
    pub omega: DVector<f64>,
    pub nu: DVector<f64>,
    pub r: DVector<f64>,
    /// Trigger variable in effect at `k` (`NaN` outside the event scheme).
    pub alpha: f64,
    pub tx: bool,
    /// `ηᵀPη` when a certificate is attached.
    pub v: f64,
    /// Looped-function value at sampling boundaries.
    pub h: f64,
}

/// Recorded rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    /// Plant state after the last step.
    pub x_final: DVector<f64>,
    pub xi_final: DVector<f64>,
    pub tx_instants: Vec<usize>,
    /// Instants at which the trigger was evaluated (including `k = 0`).
    pub sample_instants: Vec<usize>,
}

impl Trajectory {
    /// Plant states `x(0..=T)`.
    pub fn states(&self) -> Vec<DVector<f64>> {
        let mut xs: Vec<DVector<f64>> = self.records.iter().map(|r| r.x.clone()).collect();
        xs.push(self.x_final.clone());
        xs
    }

    /// CSV with header `k,x1..,xi1..,u1..,omega,nu,r1,r2,alpha,tx,V,H`.
    pub fn to_csv(&self) -> String {
        let Some(first) = self.records.first() else {
            return String::new();
        };
        let name = |base: &str, len: usize, always_index: bool| -> Vec<String> {
            if len == 1 && !always_index {
                vec![base.to_string()]
            } else {
                (1..=len).map(|i| format!("{base}{i}")).collect()
            }
        };
        let mut header = vec!["k".to_string()];
        header.extend(name("x", first.x.len(), true));
        header.extend(name("xi", first.xi.len(), true));
        header.extend(name("u", first.u.len(), true));
        header.extend(name("omega", first.omega.len(), false));
        header.extend(name("nu", first.nu.len(), false));
        header.extend(name("r", first.r.len(), true));
        header.extend(["alpha", "tx", "V", "H"].map(String::from));
        let mut s = header.join(",") + "\n";
        let f = |v: f64| {
            if v.is_nan() {
                String::new()
            } else {
                format!("{v:.12e}")
            }
        };
        for r in &self.records {
            let mut row = vec![r.k.to_string()];
            for vec in [&r.x, &r.xi, &r.u, &r.omega, &r.nu, &r.r] {
                row.extend(vec.iter().map(|&v| f(v)));
            }
            row.push(f(r.alpha));
            row.push(u8::from(r.tx).to_string());
            row.push(f(r.v));
            row.push(f(r.h));
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Communication and convergence summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub samples: usize,
    pub transmissions: usize,
    pub efficiency: f64,
    pub converged: bool,
    pub final_norm: f64,
    pub max_inter_tx: usize,
}

/// Certificate quantities used while recording `V` and `H`.
#[derive(Debug, Clone)]
pub struct MonitorData {
    pub p: DMatrix<f64>,
    pub r: Option<DMatrix<f64>>,
    pub t1: Option<DMatrix<f64>>,
    pub t2: Option<DMatrix<f64>>,
}

impl MonitorData {
    pub fn from_certificate(cert: &SynthesisResult) -> Result<Self> {
        let a = &cert.assignment;
        Ok(Self {
            p: a.get("P")?.clone(),
            r: a.get("R").ok().cloned(),
            t1: a.get("T1").ok().cloned(),
            t2: a.get("T2").ok().cloned(),
        })
    }
}

fn eta_of(x: &DVector<f64>, xi: &DVector<f64>) -> DVector<f64> {
    let mut eta = DVector::zeros(x.len() + xi.len());
    eta.rows_mut(0, x.len()).copy_from(x);
    eta.rows_mut(x.len(), xi.len()).copy_from(xi);
    eta
}

/// Three-term looped function at step `k` of the interval `[a, b]`,
/// using deviations from the origin. Needs states up to `x(b + 1)`.
pub fn looped_function(
    xs: &[DVector<f64>],
    k: usize,
    a: usize,
    b: usize,
    r: &DMatrix<f64>,
    t1: &DMatrix<f64>,
    t2: &DMatrix<f64>,
) -> f64 {
    let n = xs[0].len();
    let y = |s: usize| &xs[s + 1] - &xs[s];
    let sum = |lo: usize, hi: usize| (lo..=hi).fold(DVector::zeros(n), |acc, s| acc + &xs[s]);
    let stack = |parts: [&DVector<f64>; 4]| {
        let mut v = DVector::zeros(4 * n);
        for (i, p) in parts.iter().enumerate() {
            v.rows_mut(i * n, n).copy_from(p);
        }
        v
    };
    let (xa, xb, xk) = (&xs[a], &xs[b], &xs[k]);
    let c1 = (k - a) as f64;
    let c2 = (b - k) as f64;
    let chi1 = stack([&(xa * c1), &(xb * c1), &(xk - xa), &(sum(a, k) - xa)]);
    let chi2 = stack([&(xa * c2), &(xb * c2), &(xb - xk), &(sum(k, b) - xb)]);
    let w1 = 2.0 * (chi1.transpose() * r * &chi2)[(0, 0)];
    let q1 = |s: usize| (y(s).transpose() * t1 * y(s))[(0, 0)];
    let q2 = |s: usize| (y(s).transpose() * t2 * y(s))[(0, 0)];
    let w2 = c2 * ((a..=k).map(q1).sum::<f64>() - q1(k));
    let w3 = c1 * (q2(b) - (k..=b).map(q2).sum::<f64>());
    w1 + w2 + w3
}

/// Rolls out the loop. Every step records the state before the update.
pub fn rollout(
    cfg: &SimConfig,
    cl: &ClosedLoop,
    monitor: Option<&MonitorData>,
) -> Result<(Trajectory, Metrics)> {
    let n = cl.n();
    cfg.validate(n)?;
    let x_star = DVector::zeros(n);
    let mut x = cfg.x0.clone();
    let mut xi = DVector::zeros(cl.filter.psi());
    let mut u = DVector::zeros(cl.plant.m());
    let mut records = Vec::with_capacity(cfg.horizon);
    let mut tx_instants = Vec::new();
    let mut sample_instants = Vec::new();
    let mut et_state = match &cfg.scheme {
        SimScheme::Event(p) => Some(EventTriggerState::initial(p, &x)),
        _ => None,
    };
    let mut next_tx = 0;
    for k in 0..cfg.horizon {
        let norm = x.norm();
        if !norm.is_finite() || norm > DIVERGENCE_GUARD {
            return Err(Error::Divergence { step: k, norm });
        }
        let mut alpha = f64::NAN;
        let tx = match &cfg.scheme {
            SimScheme::Event(p) => {
                let st = et_state.as_mut().expect("event state");
                alpha = st.alpha;
                if k == 0 {
                    sample_instants.push(0);
                    true
                } else if k % p.theta == 0 {
                    sample_instants.push(k);
                    let (fire, ns) = et_step(p, st, &x, &x_star, k);
                    *st = ns;
                    fire
                } else {
                    false
                }
            }
            SimScheme::SelfTriggered(_) | SimScheme::Periodic { .. } => k == next_tx,
        };
        if tx {
            let held = x.clone();
            u = cl.dnn.control(&x)?;
            tx_instants.push(k);
            match &cfg.scheme {
                SimScheme::SelfTriggered(p) => {
                    sample_instants.push(k);
                    let scale = cfg.predictor_uncertainty_scale;
                    let mut cache: Vec<DVector<f64>> = vec![held.clone()];
                    let s = st_next(
                        p,
                        |s| {
                            while cache.len() <= s {
                                let last = cache.last().expect("seeded").clone();
                                cache.push(cl.predict(&last, &u, 1, scale));
                            }
                            cache[s].clone()
                        },
                        &held,
                        &x_star,
                    );
                    next_tx = k + s;
                }
                SimScheme::Periodic { period } => {
                    sample_instants.push(k);
                    next_tx = k + period;
                }
                SimScheme::Event(_) => {}
            }
        }
        let (nu, omega) = cl.nu_omega(&x, &u, 1.0);
        let r = &cl.filter.c_f * &xi + &cl.filter.d_f * &nu + &cl.filter.g_f * &omega;
        let v = monitor.map_or(f64::NAN, |m| {
            let eta = eta_of(&x, &xi);
            (eta.transpose() * &m.p * &eta)[(0, 0)]
        });
        records.push(StepRecord {
            k,
            x: x.clone(),
            xi: xi.clone(),
            u: u.clone(),
            omega: omega.clone(),
            nu: nu.clone(),
            r,
            alpha,
            tx,
            v,
            h: f64::NAN,
        });
        let x_next = cl.plant.step(&x, &u, &omega);
        xi = &cl.filter.a_f * &xi + &cl.filter.b_f * &nu + &cl.filter.f_f * &omega;
        x = x_next;
    }
    let norm = x.norm();
    if !norm.is_finite() || norm > DIVERGENCE_GUARD {
        return Err(Error::Divergence {
            step: cfg.horizon,
            norm,
        });
    }
    let mut traj = Trajectory {
        records,
        x_final: x,
        xi_final: xi,
        tx_instants,
        sample_instants,
    };
    if let Some(m) = monitor {
        fill_looped_function(&mut traj, m);
    }
    let mut max_gap = 0;
    for w in traj.tx_instants.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    max_gap = max_gap.max(cfg.horizon - traj.tx_instants.last().copied().unwrap_or(0));
    let final_norm = traj.x_final.norm();
    let metrics = Metrics {
        samples: cfg.horizon,
        transmissions: traj.tx_instants.len(),
        efficiency: efficiency(cfg.horizon, traj.tx_instants.len()),
        converged: final_norm < CONVERGENCE_TOL,
        final_norm,
        max_inter_tx: max_gap,
    };
    Ok((traj, metrics))
}

/// Writes `H` at every interval start whose interval closes inside the
/// horizon.
fn fill_looped_function(traj: &mut Trajectory, m: &MonitorData) {
    let (Some(r), Some(t1), Some(t2)) = (&m.r, &m.t1, &m.t2) else {
        return;
    };
    let xs = traj.states();
    let horizon = traj.records.len();
    let bounds = &traj.sample_instants;
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b < horizon {
            traj.records[a].h = looped_function(&xs, a, a, b, r, t1, t2);
            traj.records[b].h = looped_function(&xs, b, a, b, r, t1, t2);
        }
    }
}

/// Rolls out every configuration, in parallel when enabled.
pub fn rollout_batch(
    cfgs: &[SimConfig],
    cl: &ClosedLoop,
    monitor: Option<&MonitorData>,
) -> Vec<Result<(Trajectory, Metrics)>> {
    par_map(cfgs, |c| rollout(c, cl, monitor))
}

/// Lyapunov monitor outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// Transmission pairs checked.
    pub checked: usize,
    /// Indices `q` with a non-decrease between `k_q` and `k_{q+1}`.
    pub violations: Vec<usize>,
    /// Indices `q` where the value plus the IQC sum over `[k_q, k_{q+1})`
    /// fails to decrease. Empty when no multiplier is supplied.
    pub dissipation_violations: Vec<usize>,
    /// Indices `q ≥ 1` whose value is not below the value at `k_0`.
    pub cumulative_violations: Vec<usize>,
    /// Pairs at equilibrium where the decrease is zero.
    pub non_strict_at_equilibrium: usize,
    /// Largest `|H|` at sampling boundaries.
    pub max_boundary_h: f64,
    pub pass: bool,
}

/// Values below this count as the equilibrium in the monitor.
pub const EQUILIBRIUM_TOL: f64 = 1e-14;

/// Checks the certified decrease at consecutive transmissions: the event
/// scheme uses `V + (ϑ − 1)α`, the others `V`. With `m_theta` the
/// dissipation form with the interval IQC sum is checked as well.
pub fn lyapunov_monitor(
    traj: &Trajectory,
    theta: Option<usize>,
    m_theta: Option<&DMatrix<f64>>,
) -> Result<LyapunovReport> {
    if traj.records.iter().any(|r| r.v.is_nan()) {
        return Err(Error::InvalidParameter(
            "trajectory lacks the V column".into(),
        ));
    }
    if theta.is_some() && traj.records.iter().any(|r| r.alpha.is_nan()) {
        return Err(Error::InvalidParameter(
            "trajectory lacks the alpha column".into(),
        ));
    }
    let value = |k: usize| {
        let rec = &traj.records[k];
        match theta {
            Some(t) => rec.v + (t as f64 - 1.0) * rec.alpha,
            None => rec.v,
        }
    };
    let mut iqc_prefix = vec![0.0; traj.records.len() + 1];
    if let Some(m) = m_theta {
        for (k, rec) in traj.records.iter().enumerate() {
            iqc_prefix[k + 1] = iqc_prefix[k] + crate::linalg::wnorm2(&rec.r, m);
        }
    }
    let mut violations = Vec::new();
    let mut dissipation = Vec::new();
    let mut cumulative = Vec::new();
    let mut non_strict = 0;
    let mut checked = 0;
    let v0 = traj.tx_instants.first().map(|&k| value(k));
    for (q, w) in traj.tx_instants.windows(2).enumerate() {
        let (a, b) = (value(w[0]), value(w[1]));
        checked += 1;
        if a.abs() <= EQUILIBRIUM_TOL && b.abs() <= EQUILIBRIUM_TOL {
            non_strict += 1;
            continue;
        }
        if b >= a {
            violations.push(q);
        }
        if m_theta.is_some() && b + iqc_prefix[w[1]] - iqc_prefix[w[0]] >= a {
            dissipation.push(q);
        }
        if v0.is_some_and(|v0| b >= v0) {
            cumulative.push(q + 1);
        }
    }
    let max_h = traj
        .records
        .iter()
        .filter(|r| !r.h.is_nan())
        .map(|r| r.h.abs())
        .fold(0.0, f64::max);
    let scale = traj.records.iter().map(|r| r.v.abs()).fold(1.0, f64::max);
    Ok(LyapunovReport {
        checked,
        pass: violations.is_empty() && max_h <= 1e-9 * scale,
        violations,
        dissipation_violations: dissipation,
        cumulative_violations: cumulative,
        non_strict_at_equilibrium: non_strict,
        max_boundary_h: max_h,
    })
}

/// IQC monitor outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqcMonitorReport {
    pub iqc: IqcReport,
    /// First step with `|ν| > bound`, when a bound is given.
    pub sector_exit_step: Option<usize>,
    pub pass: bool,
}

/// Re-runs the filter over the recorded `(ν, ω)` and checks every partial
/// sum; optionally reports the first exit from `|ν| ≤ bound`.
pub fn iqc_monitor(
    traj: &Trajectory,
    filter: &IqcFilter,
    nu_bound: Option<f64>,
) -> Result<IqcMonitorReport> {
    let nu: Vec<DVector<f64>> = traj.records.iter().map(|r| r.nu.clone()).collect();
    let om: Vec<DVector<f64>> = traj.records.iter().map(|r| r.omega.clone()).collect();
    let mut iqc = iqc_partial_sums(filter, &nu, &om)?;
    iqc.partial_sums.clear();
    let sector_exit_step = nu_bound.and_then(|b| traj.records.iter().position(|r| r.nu.amax() > b));
    Ok(IqcMonitorReport {
        pass: iqc.valid,
        iqc,
        sector_exit_step,
    })
}

/// Initial states on the boundary (`interior = false`) or spread inside
/// the ellipsoid scaled by `scale`, from a deterministic pattern.
pub fn roa_samples(
    roa: &RoaEllipsoid,
    n_points: usize,
    interior: bool,
    scale: f64,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    if n_points == 0 {
        return Err(Error::InvalidParameter("n_points must be ≥ 1".into()));
    }
    let scaled = RoaEllipsoid {
        p1: &roa.p1 / (scale * scale),
        center: roa.center.clone(),
    };
    if !interior {
        let pts = roa_boundary(&scaled, n_points)?;
        return Ok(pts.into_iter().cycle().take(n_points.max(1)).collect());
    }
    let n = roa.p1.nrows();
    let root = crate::linalg::inv_sqrt_spd(&scaled.p1)?;
    let offset = seed as usize;
    Ok((0..n_points)
        .map(|i| {
            let idx = i + 1 + offset;
            let mut dir = DVector::from_fn(n, |d, _| {
                2.0 * radical_inverse(idx, PRIMES[d % PRIMES.len()]) - 1.0
            });
            if dir.norm() == 0.0 {
                dir[0] = 1.0;
            }
            let radius = radical_inverse(idx, 2).powf(1.0 / n as f64);
            &scaled.center + &root * (dir.normalize() * radius)
        })
        .collect())
}

const PRIMES: [usize; 8] = [3, 5, 7, 11, 13, 17, 19, 23];

/// Van der Corput radical inverse of `i` in `base`.
fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// Per-start outcome of a validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoaOutcome {
    pub x0: DVector<f64>,
    pub converged: bool,
    pub diverged: bool,
    pub final_norm: f64,
    pub max_abs_nu: f64,
}

/// Validation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoaValidationReport {
    pub outcomes: Vec<RoaOutcome>,
    pub fraction_converged: f64,
    pub pass: bool,
}

/// Rolls out from every start under `scheme` and reports the converged
/// fraction at `horizon`.
pub fn roa_validation(
    starts: &[DVector<f64>],
    cl: &ClosedLoop,
    scheme: &SimScheme,
    horizon: usize,
) -> Result<RoaValidationReport> {
    if starts.is_empty() {
        return Err(Error::InvalidParameter("need at least one start".into()));
    }
    let cfgs: Vec<SimConfig> = starts
        .iter()
        .map(|x0| SimConfig::new(horizon, x0.clone(), scheme.clone()))
        .collect();
    let outcomes = rollout_batch(&cfgs, cl, None)
        .into_iter()
        .zip(starts)
        .map(|(res, x0)| match res {
            Ok((traj, m)) => Ok(RoaOutcome {
                x0: x0.clone(),
                converged: m.converged,
                diverged: false,
                final_norm: m.final_norm,
                max_abs_nu: traj.records.iter().map(|r| r.nu.amax()).fold(0.0, f64::max),
            }),
            Err(Error::Divergence { norm, .. }) => Ok(RoaOutcome {
                x0: x0.clone(),
                converged: false,
                diverged: true,
                final_norm: norm,
                max_abs_nu: f64::INFINITY,
            }),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let conv = outcomes.iter().filter(|o| o.converged).count();
    let fraction = conv as f64 / outcomes.len() as f64;
    Ok(RoaValidationReport {
        pass: conv == outcomes.len(),
        fraction_converged: fraction,
        outcomes,
    })
}

/// Event-trigger parameters from a certificate at sampling interval `theta`.
pub fn event_params_from(
    cert: &SynthesisResult,
    theta: usize,
    alpha0: f64,
) -> Result<EventTriggerParams> {
    let crate::lmi::theorems::SchemeScalars::Event {
        eps1, eps2, mu, g, ..
    } = cert.scheme
    else {
        return Err(Error::InvalidParameter(
            "certificate is not event-triggered".into(),
        ));
    };
    let t = cert
        .trigger_out
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("certificate has no trigger matrices".into()))?;
    Ok(EventTriggerParams {
        eps1,
        eps2,
        xi1: t.xi1.clone(),
        xi2: t.xi2.clone(),
        mu,
        g,
        theta,
        alpha0,
    })
}

/// Self-trigger parameters from a certificate.
pub fn self_params_from(cert: &SynthesisResult) -> Result<SelfTriggerParams> {
    let crate::lmi::theorems::SchemeScalars::SelfTriggered {
        eps1c,
        eps2c,
        s_bar,
    } = cert.scheme
    else {
        return Err(Error::InvalidParameter(
            "certificate is not self-triggered".into(),
        ));
    };
    let t = cert
        .trigger_out
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("certificate has no trigger matrices".into()))?;
    Ok(SelfTriggerParams {
        eps1c,
        eps2c,
        xi1c: t.xi1.clone(),
        xi2c: t.xi2.clone(),
        s_bar,
    })
}
