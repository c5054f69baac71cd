// SPDX-License-Identifier: MIT
//! Shared fixtures: random systems, a hand-coded certificate assembler and
//! pendulum helpers.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use trigcert::lmi::{Assignment, SchemeScalars, TheoremContext, ThetaMode};
use trigcert::nnet::{synthesize_surrogate, Activation, Dnn, Layer};
use trigcert::uncertain_plant::{
    build_augmented, build_pendulum, IqcFilter, PendulumParams, Plant,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_mat(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.gen_range(-scale..scale))
}

pub fn rand_sym(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = rand_mat(r, n, n, 1.0);
    (&m + m.transpose()) * 0.5
}

/// Random zero-bias tanh network with the given hidden widths.
pub fn random_dnn(r: &mut ChaCha8Rng, n: usize, m: usize, widths: &[usize]) -> Dnn {
    let mut layers = Vec::new();
    let mut prev = n;
    for &w in widths {
        layers.push(Layer::unbiased(rand_mat(r, w, prev, 1.0)));
        prev = w;
    }
    layers.push(Layer::unbiased(rand_mat(r, m, prev, 1.0)));
    Dnn::new(Activation::Tanh, layers).expect("consistent shapes")
}

/// Random two-state plant with a one-state filter and a two-output IQC.
pub fn random_context(seed: u64, scheme: SchemeScalars) -> TheoremContext {
    let mut r = rng(seed);
    let (n, m, w, v) = (2, 1, 1, 1);
    let plant = Plant::new(
        rand_mat(&mut r, n, n, 1.0),
        rand_mat(&mut r, n, m, 1.0),
        rand_mat(&mut r, n, w, 1.0),
        rand_mat(&mut r, v, n, 1.0),
        DMatrix::zeros(v, m),
        DMatrix::zeros(v, w),
    )
    .unwrap();
    let filter = IqcFilter::new(
        DMatrix::from_element(1, 1, r.gen_range(-0.9..0.9)),
        rand_mat(&mut r, 1, v, 1.0),
        rand_mat(&mut r, 1, w, 1.0),
        rand_mat(&mut r, 2, 1, 1.0),
        rand_mat(&mut r, 2, v, 1.0),
        rand_mat(&mut r, 2, w, 1.0),
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        1.0,
    )
    .unwrap();
    let sys = build_augmented(&plant, &filter).unwrap();
    let dnn = random_dnn(&mut r, n, m, &[3, 2]);
    let m_theta = rand_sym(&mut r, 2);
    TheoremContext::from_network(&sys, &dnn, 0.5, 1.0, &m_theta, scheme).unwrap()
}

pub fn event_scheme(theta_u: usize) -> SchemeScalars {
    SchemeScalars::Event {
        eps1: 0.003,
        eps2: 0.002,
        mu: 0.05,
        g: 500.0,
        theta_l: 1,
        theta_u,
        theta_mode: ThetaMode::Vertices,
    }
}

pub fn self_scheme(s_bar: usize) -> SchemeScalars {
    SchemeScalars::SelfTriggered {
        eps1c: 0.8,
        eps2c: 0.6,
        s_bar,
    }
}

/// Random values for every variable of a problem.
pub fn random_assignment(r: &mut ChaCha8Rng, vars: &[trigcert::lmi::VarSpec]) -> Assignment {
    let total: usize = vars.iter().map(|v| v.len()).sum();
    let x: Vec<f64> = (0..total).map(|_| r.gen_range(-1.0..1.0)).collect();
    Assignment::from_vector(vars, &x).unwrap()
}

/// Column-block selector: rows pick block `idx` of a stacked vector.
fn pick(sizes: &[usize], idx: usize) -> DMatrix<f64> {
    let total: usize = sizes.iter().sum();
    let start: usize = sizes[..idx].iter().sum();
    let mut s = DMatrix::zeros(sizes[idx], total);
    for i in 0..sizes[idx] {
        s[(i, start + i)] = 1.0;
    }
    s
}

fn stack(parts: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols = parts[0].ncols();
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut off = 0;
    for p in parts {
        out.view_mut((off, 0), (p.nrows(), cols)).copy_from(p);
        off += p.nrows();
    }
    out
}

fn side(parts: &[DMatrix<f64>]) -> DMatrix<f64> {
    let t: Vec<DMatrix<f64>> = parts.iter().map(|p| p.transpose()).collect();
    stack(&t).transpose()
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    m + m.transpose()
}

fn tcal(t: &DMatrix<f64>) -> DMatrix<f64> {
    let n = t.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(t);
    out.view_mut((n, n), (n, n)).copy_from(&(t * 3.0));
    out
}

/// Expanded activation form `2γ_i(σ_i p_i − m_i)(m_i − ρ_i p_i)` on `(p, m)`.
fn activation_form(rho: &DVector<f64>, sigma: &DVector<f64>, gamma: &[f64]) -> DMatrix<f64> {
    let a = rho.len();
    let mut q = DMatrix::zeros(2 * a, 2 * a);
    for i in 0..a {
        let g = gamma[i];
        q[(i, i)] = -2.0 * g * sigma[i] * rho[i];
        q[(i, a + i)] = g * (sigma[i] + rho[i]);
        q[(a + i, i)] = g * (sigma[i] + rho[i]);
        q[(a + i, a + i)] = -2.0 * g;
    }
    q
}

struct Common {
    l: Vec<DMatrix<f64>>,
    lam2_l1: DMatrix<f64>,
    ab: DMatrix<f64>,
    g1: DMatrix<f64>,
    g2: DMatrix<f64>,
    g3: DMatrix<f64>,
}

/// Shared constants; `held` indexes the held-state block.
fn common(ctx: &TheoremContext, blocks: usize, held: usize) -> Common {
    let (n, z, a, w) = (ctx.n(), ctx.z(), ctx.a(), ctx.w());
    let psi = z - n;
    let mut sizes = vec![z, a, w];
    sizes.extend(std::iter::repeat_n(n, blocks));
    let l: Vec<DMatrix<f64>> = (0..sizes.len()).map(|i| pick(&sizes, i)).collect();
    let lam2 = side(&[DMatrix::identity(n, n), DMatrix::zeros(n, psi)]);
    let m = ctx.m();
    let sigma1 = stack(&[
        side(&[
            ctx.maps.pi_ux.clone(),
            ctx.maps.pi_um.clone(),
            DMatrix::zeros(m, w),
        ]),
        side(&[
            DMatrix::zeros(w, n),
            DMatrix::zeros(w, a),
            DMatrix::identity(w, w),
        ]),
    ]);
    let lam1 = stack(&[l[held].clone(), l[1].clone(), l[2].clone()]);
    let ab = &ctx.sys.a * &l[0] + &ctx.sys.b * &sigma1 * &lam1;
    let lam2_l1 = &lam2 * &l[0];
    let g1 = &lam2 * &ab - &lam2_l1;
    let g2 = &ctx.sys.c * &l[0] + &ctx.sys.d * &sigma1 * &lam1;
    let g3 = stack(&[
        &ctx.maps.pi_px * &l[held] + &ctx.maps.pi_pm * &l[1],
        l[1].clone(),
    ]);
    Common {
        l,
        lam2_l1,
        ab,
        g1,
        g2,
        g3,
    }
}

fn get(asg: &Assignment, name: &str) -> DMatrix<f64> {
    asg.get(name).unwrap().clone()
}

/// Event-triggered block at `(ι, ϑ)` evaluated term by term from the block formulas.
pub fn hand_theorem1(
    ctx: &TheoremContext,
    asg: &Assignment,
    iota: usize,
    theta: f64,
) -> DMatrix<f64> {
    let SchemeScalars::Event { eps1, eps2, .. } = ctx.scheme else {
        panic!("event scheme expected")
    };
    let c = common(ctx, 5, 7);
    let (l4, l5, l6, l7, l8) = (&c.l[3], &c.l[4], &c.l[5], &c.l[6], &c.l[7]);
    let nb = c.l[0].ncols();
    let n = ctx.n();
    let p = get(asg, "P");
    let (t1, t2) = (get(asg, "T1"), get(asg, "T2"));
    let (xi1, xi2) = (get(asg, "Xi1"), get(asg, "Xi2"));
    let r = get(asg, "R");
    let (n1, n2) = (get(asg, "N1"), get(asg, "N2"));
    let gamma: Vec<f64> = get(asg, "gamma").iter().copied().collect();
    let lx = &c.lam2_l1;
    let lab = &c.ab.rows(0, n).into_owned();
    let r13 = lab - l4;
    let r23 = l5 - lab;
    let zero = DMatrix::zeros(n, nb);
    let r1 = stack(&[l4.clone(), l5.clone(), r13.clone(), l6 + &r13]);
    let r2 = stack(&[-l4, -l5, r23.clone(), l7 - l5 - lx]);
    let r3 = stack(&[l4.clone(), l5.clone(), zero.clone(), l6.clone()]);
    let r4 = stack(&[l4.clone(), l5.clone(), zero.clone(), l7.clone()]);
    let r5 = stack(&[zero.clone(), zero.clone(), lx - l4, l6 - l4]);
    let r6 = stack(&[zero.clone(), zero.clone(), l5 - lx, l7 - l5]);
    let r7 = &r2 - &r6;
    let r8 = &r1 - &r5;
    let r9 = stack(&[lx - l4, lx + l4 - l6]);
    let r10 = stack(&[l5 - lx, l5 + lx - l7]);
    let d48 = l4 - l8;
    let q = l4.transpose() * &xi1 * l4 * eps1 + l8.transpose() * &xi1 * l8 * eps2
        - d48.transpose() * &xi2 * &d48;
    let mdnn = activation_form(&ctx.sec.rho, &ctx.sec.sigma, &gamma);
    let g = c.ab.transpose() * &p * &c.ab
        + c.g1.transpose() * (&t2 - &t1) * &c.g1
        + c.g2.transpose() * &ctx.m_theta * &c.g2
        + c.g3.transpose() * mdnn * &c.g3
        + sym(&(r1.transpose() * &r * &r2 - r5.transpose() * &r * &r6 + &n1 * &r9 + &n2 * &r10))
        - c.l[0].transpose() * &p * &c.l[0]
        + q;
    let (cop, nv, t) = if iota == 1 {
        (
            c.g1.transpose() * &t2 * &c.g1 + sym(&(r3.transpose() * &r * &r7)),
            n1,
            t1,
        )
    } else {
        (
            c.g1.transpose() * &t1 * &c.g1 + sym(&(r8.transpose() * &r * &r4)),
            n2,
            t2,
        )
    };
    let tl = g + cop * theta;
    let tr = nv * theta;
    let br = tcal(&t) * (-theta);
    stack(&[side(&[tl, tr.clone()]), side(&[tr.transpose(), br])])
}

/// Self-triggered main block evaluated term by term from the block formulas.
pub fn hand_theorem2(ctx: &TheoremContext, asg: &Assignment) -> DMatrix<f64> {
    let SchemeScalars::SelfTriggered {
        eps1c,
        eps2c,
        s_bar,
    } = ctx.scheme
    else {
        panic!("self scheme expected")
    };
    let sb = s_bar as f64;
    let c = common(ctx, 4, 3);
    let (l4, l5, l6, l7) = (&c.l[3], &c.l[4], &c.l[5], &c.l[6]);
    let nt = c.l[0].ncols();
    let n = ctx.n();
    let p = get(asg, "P");
    let (t1, t2) = (get(asg, "T1"), get(asg, "T2"));
    let (xi1, xi2) = (get(asg, "Xi1"), get(asg, "Xi2"));
    let r = get(asg, "R");
    let (n1, n2) = (get(asg, "N1"), get(asg, "N2"));
    let gamma: Vec<f64> = get(asg, "gamma").iter().copied().collect();
    let (lam1, lam2) = (get(asg, "lambda1")[(0, 0)], get(asg, "lambda2")[(0, 0)]);
    let lx = &c.lam2_l1;
    let lab = c.ab.rows(0, n).into_owned();
    let r12 = lab.clone();
    let r13 = l5 - &lab;
    let zero = DMatrix::zeros(n, nt);
    let r1 = stack(&[l4.clone(), l5.clone(), r12.clone(), l6 + &r12]);
    let r2 = stack(&[-l4, -l5, r13.clone(), l7 - l5 - lx]);
    let r3 = stack(&[l4.clone(), l5.clone(), zero.clone(), l6.clone()]);
    let r4 = stack(&[l4.clone(), l5.clone(), zero.clone(), l7.clone()]);
    let r5 = stack(&[zero.clone(), zero.clone(), lx - l4, l6 - l4]);
    let r6 = stack(&[zero.clone(), zero.clone(), l5 - lx, l7 - l5]);
    let r7 = &r2 - &r6;
    let r8 = &r1 - &r5;
    let r9 = stack(&[lx - l4, lx + l4 - l6]);
    let r10 = stack(&[l5 - lx, l5 + lx - l7]);
    let r11 = stack(&[l5.clone(), l4.clone()]);
    let xit = stack(&[
        side(&[&xi1 * eps1c - &xi2, xi2.clone()]),
        side(&[xi2.clone(), &xi1 * eps2c - &xi2]),
    ]);
    let mdnn = activation_form(&ctx.sec.rho, &ctx.sec.sigma, &gamma);
    let gt = c.ab.transpose() * &p * &c.ab
        + c.g1.transpose() * &t1 * &c.g1 * (sb - 1.0)
        + c.g1.transpose() * &t2 * &c.g1 * (sb + 1.0)
        + r7.transpose() * &r7 * (sb * lam1)
        + r4.transpose() * &r4 * (sb * lam2)
        + c.g2.transpose() * &ctx.m_theta * &c.g2
        + c.g3.transpose() * mdnn * &c.g3
        + sym(&(r1.transpose() * &r * &r2 - r5.transpose() * &r * &r6 + &n1 * &r9 + &n2 * &r10))
        - r11.transpose() * xit * &r11
        - c.l[0].transpose() * &p * &c.l[0];
    let eth1 = side(&[
        &n1 * sb,
        &n2 * sb,
        r3.transpose() * &r * sb,
        r8.transpose() * &r * sb,
    ]);
    let k = 4 * n;
    let d = 2 * n + 2 * n + k + k;
    let mut eth2 = DMatrix::zeros(d, d);
    eth2.view_mut((0, 0), (2 * n, 2 * n))
        .copy_from(&(tcal(&t1) * sb));
    eth2.view_mut((2 * n, 2 * n), (2 * n, 2 * n))
        .copy_from(&(tcal(&t2) * sb));
    eth2.view_mut((4 * n, 4 * n), (k, k))
        .copy_from(&(DMatrix::identity(k, k) * (sb * lam1)));
    eth2.view_mut((4 * n + k, 4 * n + k), (k, k))
        .copy_from(&(DMatrix::identity(k, k) * (sb * lam2)));
    stack(&[side(&[gt, eth1.clone()]), side(&[eth1.transpose(), -eth2])])
}

/// Pendulum plant, uncertainty, filter and the surrogate network.
pub fn pendulum_surrogate(
    k: [f64; 2],
    widths: (usize, usize),
) -> (
    Plant,
    trigcert::uncertain_plant::UncertaintyOp,
    IqcFilter,
    Dnn,
) {
    let (plant, unc, filt) = build_pendulum(&PendulumParams::default()).unwrap();
    let dnn = synthesize_surrogate(&DMatrix::from_row_slice(1, 2, &k), 0.1, widths).unwrap();
    (plant, unc, filt, dnn)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    (a - b).amax()
}

/// Printed `(samples, transmissions, percent)` triples.
pub const EFFICIENCY_TABLE: [(usize, usize, &str); 7] = [
    (800, 179, "77.63"),
    (800, 242, "69.75"),
    (800, 351, "56.13"),
    (800, 739, "7.63"),
    (800, 222, "72.25"),
    (800, 219, "72.63"),
    (800, 218, "72.75"),
];

/// Pendulum loop driven by the surrogate controller.
pub fn pendulum_loop() -> trigcert::simulator::ClosedLoop {
    let (plant, unc, filt, dnn) = pendulum_surrogate([3.0, 0.8], (4, 4));
    trigcert::simulator::ClosedLoop::new(plant, unc, filt, dnn).unwrap()
}

fn random_psd(r: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let m = rand_mat(r, n, n, scale);
    &m * m.transpose()
}

/// One randomized event-triggered rollout obeying `1 − μ − 1/g ≥ 0` and
/// `α(0) ≥ 0`; returns the smallest recorded `α`.
pub fn alpha_trial(cl: &trigcert::simulator::ClosedLoop, seed: u64) -> f64 {
    use trigcert::simulator::{rollout, SimConfig, SimScheme};
    use trigcert::triggers::EventTriggerParams;
    let mut r = rng(seed);
    let mu = r.gen_range(0.0..0.9);
    let g = r.gen_range(1.0 / (1.0 - mu)..1000.0);
    let theta = r.gen_range(1..=5);
    let params = EventTriggerParams {
        eps1: r.gen_range(0.0..=1.0),
        eps2: r.gen_range(0.0..=1.0),
        xi1: random_psd(&mut r, 2, 2.0),
        xi2: random_psd(&mut r, 2, 2.0),
        mu,
        g,
        theta,
        alpha0: if r.gen_bool(0.3) {
            0.0
        } else {
            r.gen_range(0.0..5.0)
        },
    };
    assert!(params.nonnegativity_prerequisite());
    let x0 = DVector::from_vec(vec![r.gen_range(-0.4..0.4), r.gen_range(-3.0..3.0)]);
    let cfg = SimConfig::new(60 * theta, x0, SimScheme::Event(params));
    let (traj, _) = rollout(&cfg, cl, None).unwrap();
    traj.records
        .iter()
        .map(|rec| rec.alpha)
        .filter(|a| !a.is_nan())
        .fold(f64::INFINITY, f64::min)
}

/// Pendulum certificate context with the surrogate controller and the
/// `|x_1| ≤ 0.73` state row.
pub fn pendulum_context(
    widths: (usize, usize),
    delta_rho: f64,
    delta_beta: f64,
    scheme: SchemeScalars,
) -> TheoremContext {
    let (plant, _, filt, dnn) = pendulum_surrogate([3.0, 0.8], widths);
    let sys = build_augmented(&plant, &filt).unwrap();
    let mut ctx =
        TheoremContext::from_network(&sys, &dnn, delta_rho, delta_beta, &filt.m_theta, scheme)
            .unwrap();
    ctx.extra_rows.push(trigcert::lmi::RowBound {
        row: DVector::from_vec(vec![1.0, 0.0]),
        bound: 0.73,
    });
    ctx
}
