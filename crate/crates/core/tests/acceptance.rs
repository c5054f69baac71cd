// SPDX-License-Identifier: MIT
//! Acceptance report: one line per criterion. Exits nonzero on a failure
//! only when `ACCEPTANCE_STRICT=1`.

mod common;

use std::time::Instant;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use trigcert::cli::{RunConfig, SchemeChoice};
use trigcert::lmi::theorems::{theorem1_block, theorem1_vars, theorem2_block, theorem2_vars};
use trigcert::lmi::{
    assemble, feasibility_oracle, theorem1_symbols, theorem2_symbols, THEOREM1_SYMBOLS,
    THEOREM2_SYMBOLS,
};
use trigcert::nnet::{
    dnn_quadratic_constraint, interval_bounds, isolation_maps, sector_bounds, Activation, Dnn,
    Layer, PreactivationBox,
};
use trigcert::simulator::{
    event_params_from, iqc_monitor, lyapunov_monitor, roa_samples, rollout, self_params_from,
    ClosedLoop, MonitorData, SimConfig, SimScheme,
};
use trigcert::synthesis::{roa_boundary, solve, SynthesisResult};
use trigcert::triggers::efficiency_percent;
use trigcert::uncertain_plant::{build_pendulum, PendulumParams};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let bad: Vec<String> = EFFICIENCY_TABLE
        .iter()
        .filter(|(s, tx, pct)| efficiency_percent(*s, *tx) != *pct)
        .map(|(s, tx, pct)| format!("({s},{tx}) gave {} want {pct}", efficiency_percent(*s, *tx)))
        .collect();
    let secs = t.elapsed().as_secs_f64();
    check(
        bad.is_empty() && secs < 1.0,
        format!(
            "{} values, {secs:.3}s {}",
            EFFICIENCY_TABLE.len(),
            bad.join("; ")
        ),
    )
}

fn criterion_2() -> Outcome {
    let (plant, unc, _) = build_pendulum(&PendulumParams::default()).map_err(|e| e.to_string())?;
    let err = [
        max_abs_diff(
            &plant.a_g,
            &DMatrix::from_row_slice(2, 2, &[1.0, 0.01, 0.196, 0.9866666666666667]),
        ),
        max_abs_diff(
            &plant.b_g,
            &DMatrix::from_row_slice(2, 1, &[0.0, 0.26666666666666666]),
        ),
        max_abs_diff(&plant.f_g, &DMatrix::from_row_slice(2, 1, &[0.0, -0.196])),
        (unc.l_s - 0.0864799520497289).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    check(
        err <= 1e-12,
        format!("max error {err:.2e}, l_s {:.6}", unc.l_s),
    )
}

fn biased_dnn(r: &mut rand_chacha::ChaCha8Rng, widths: &[usize], act: Activation) -> Dnn {
    let mut layers = Vec::new();
    let mut prev = 2;
    for &w in widths.iter().chain(std::iter::once(&1)) {
        layers.push(Layer {
            w: rand_mat(r, w, prev, 1.0),
            b: DVector::from_fn(w, |_, _| r.gen_range(-0.5..0.5)),
        });
        prev = w;
    }
    Dnn::new(act, layers).unwrap()
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let mut r = rng(31);
    let (mut samples, mut ibp_bad) = (0usize, 0usize);
    for net in 0..10 {
        let act = if net % 2 == 0 {
            Activation::Tanh
        } else {
            Activation::Relu
        };
        let dnn = biased_dnn(&mut r, &[4, 3, 3], act);
        let a1 = dnn.widths()[0];
        let h = DVector::from_fn(a1, |_, _| r.gen_range(0.05..1.5));
        let bx = interval_bounds(&dnn, &h, None).map_err(|e| e.to_string())?;
        for _ in 0..10_000 {
            let mut prev =
                DVector::from_fn(a1, |i, _| bx.center[i] + h[i] * r.gen_range(-1.0..=1.0));
            let mut off = 0;
            for (li, layer) in dnn.hidden().iter().enumerate() {
                let p = if li == 0 {
                    prev.clone()
                } else {
                    &layer.w * &prev + &layer.b
                };
                ibp_bad += (0..p.len())
                    .filter(|&i| {
                        p[i] < bx.lower[off + i] - 1e-12 || p[i] > bx.upper[off + i] + 1e-12
                    })
                    .count();
                off += p.len();
                prev = p.map(|v| act.apply(v));
            }
            samples += 1;
        }
    }
    let mut sector_bad = 0usize;
    for ubar in [0.01, 0.3, 1.0, 2.5, 6.0] {
        let bx = PreactivationBox {
            lower: DVector::from_element(1, -ubar),
            upper: DVector::from_element(1, ubar),
            center: DVector::zeros(1),
        };
        let sec = sector_bounds(&bx, Activation::Tanh, None).map_err(|e| e.to_string())?;
        sector_bad += (0..=20_000)
            .map(|k| -ubar + 2.0 * ubar * k as f64 / 20_000.0)
            .filter(|&t| (sec.sigma[0] * t - t.tanh()) * (t.tanh() - sec.rho[0] * t) < -1e-15)
            .count();
    }
    let a = 6;
    let ubar = DVector::from_fn(a, |_, _| r.gen_range(0.1..3.0));
    let bx = PreactivationBox {
        lower: -&ubar,
        upper: ubar.clone(),
        center: DVector::zeros(a),
    };
    let qc = dnn_quadratic_constraint(
        &sector_bounds(&bx, Activation::Tanh, None).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let mut min_form = f64::INFINITY;
    for _ in 0..10_000 {
        let p = DVector::from_fn(a, |i, _| ubar[i] * r.gen_range(-1.0..=1.0));
        let gamma = DVector::from_fn(a, |_, _| r.gen_range(0.0..10.0));
        min_form = min_form.min(
            qc.form(&gamma, &p, &p.map(f64::tanh))
                .map_err(|e| e.to_string())?,
        );
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        ibp_bad == 0 && sector_bad == 0 && min_form >= -1e-12 && secs < 30.0,
        format!("{samples} samples, {ibp_bad} box violations, {sector_bad} sector violations, min form {min_form:.2e}, {secs:.1}s"),
    )
}

fn criterion_4() -> Outcome {
    let mut r = rng(41);
    let mut worst = 0.0f64;
    for net in 0..100 {
        let act = if net % 3 == 0 {
            Activation::Relu
        } else {
            Activation::Tanh
        };
        let widths: Vec<usize> = (0..1 + net % 3).map(|_| r.gen_range(1..6)).collect();
        let dnn = biased_dnn(&mut r, &widths, act);
        let maps = isolation_maps(&dnn);
        for _ in 0..100 {
            let x = DVector::from_fn(2, |_, _| r.gen_range(-2.0..2.0));
            let direct = dnn.control(&x).map_err(|e| e.to_string())?;
            let rel = (&direct - maps.reconstruct(&x, act)).amax() / direct.amax().max(1.0);
            worst = worst.max(rel);
        }
    }
    check(
        worst <= 1e-12,
        format!("100 nets x 100 inputs, worst relative error {worst:.2e}"),
    )
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..6 {
        let ctx = random_context(seed, event_scheme(4));
        let reg = theorem1_symbols(&ctx).map_err(|e| e.to_string())?;
        let vars = theorem1_vars(&ctx);
        let mut r = rng(500 + seed);
        for _ in 0..3 {
            let asg = random_assignment(&mut r, &vars);
            for iota in [1, 2] {
                for theta in [1.0, 2.5, 4.0] {
                    let lib = theorem1_block(&reg, &vars, iota, theta)
                        .and_then(|b| b.evaluate(&asg))
                        .map_err(|e| e.to_string())?;
                    worst = worst.max(max_abs_diff(&lib, &hand_theorem1(&ctx, &asg, iota, theta)));
                }
            }
        }
        for s_bar in [2, 3, 10] {
            let ctx = random_context(seed, self_scheme(s_bar));
            let reg = theorem2_symbols(&ctx).map_err(|e| e.to_string())?;
            let vars = theorem2_vars(&ctx);
            let asg = random_assignment(&mut r, &vars);
            let lib = theorem2_block(&reg)
                .and_then(|b| b.evaluate(&asg))
                .map_err(|e| e.to_string())?;
            worst = worst.max(max_abs_diff(&lib, &hand_theorem2(&ctx, &asg)));
        }
    }
    let reg1 = theorem1_symbols(&random_context(0, event_scheme(3))).map_err(|e| e.to_string())?;
    let reg2 = theorem2_symbols(&random_context(0, self_scheme(3))).map_err(|e| e.to_string())?;
    let missing: Vec<&str> = THEOREM1_SYMBOLS
        .iter()
        .filter(|s| reg1.get(s).is_none())
        .chain(THEOREM2_SYMBOLS.iter().filter(|s| reg2.get(s).is_none()))
        .copied()
        .collect();
    check(
        worst <= 1e-10 && missing.is_empty(),
        format!(
            "worst entry gap {worst:.2e}, {} symbols, missing {missing:?}",
            THEOREM1_SYMBOLS.len() + THEOREM2_SYMBOLS.len()
        ),
    )
}

/// Solves at the first grid point with an optimal status and a passing
/// oracle.
fn first_certificate(
    cfg: &RunConfig,
    scheme: SchemeChoice,
    params: &[usize],
) -> Result<SynthesisResult, String> {
    let template = cfg.template(scheme).map_err(|e| e.to_string())?;
    let opts = cfg.options().map_err(|e| e.to_string())?;
    let mut tried = Vec::new();
    for &dr in &cfg.sweep.delta_rho {
        for &db in &cfg.sweep.delta_beta {
            for &param in params {
                let ctx = template.context(dr, db, param).map_err(|e| e.to_string())?;
                let res = solve(&ctx, &opts).map_err(|e| e.to_string())?;
                let oracle_ok = res.is_optimal()
                    && feasibility_oracle(
                        &assemble(&ctx).map_err(|e| e.to_string())?,
                        &res.assignment,
                        1e-7,
                        1e-7,
                    )
                    .map(|o| o.pass)
                    .unwrap_or(false);
                if oracle_ok {
                    return Ok(res);
                }
                tried.push(format!("({dr},{db},{param}) {:?}", res.status));
            }
        }
    }
    Err(format!("no grid point certified: {}", tried.join(", ")))
}

/// Boundary rollouts with both monitors under one certificate.
fn validate_certificate(
    cert: &SynthesisResult,
    cl: &ClosedLoop,
    scheme: &SimScheme,
    theta: Option<usize>,
    starts: &[DVector<f64>],
    horizon: usize,
) -> Result<(bool, String), String> {
    let mon = MonitorData::from_certificate(cert).map_err(|e| e.to_string())?;
    let (mut unconverged, mut lyap, mut iqc_fail, mut outside) = (0usize, 0usize, 0usize, 0usize);
    for x0 in starts {
        if x0[0].abs() > 0.73 + 1e-9 {
            outside += 1;
        }
        match rollout(
            &SimConfig::new(horizon, x0.clone(), scheme.clone()),
            cl,
            Some(&mon),
        ) {
            Ok((traj, m)) => {
                if m.final_norm > 1e-3 {
                    unconverged += 1;
                }
                let l = lyapunov_monitor(&traj, theta, Some(&cl.filter.m_theta))
                    .map_err(|e| e.to_string())?;
                lyap += l.violations.len();
                if !iqc_monitor(&traj, &cl.filter, None)
                    .map_err(|e| e.to_string())?
                    .pass
                {
                    iqc_fail += 1;
                }
            }
            Err(_) => unconverged += 1,
        }
    }
    Ok((
        unconverged == 0 && lyap == 0 && iqc_fail == 0 && outside == 0,
        format!(
            "{} starts: {unconverged} not converged, {outside} with |x1| > 0.73, {lyap} decrease violations, {iqc_fail} IQC failures",
            starts.len()
        ),
    ))
}

fn criterion_6(cfg: &RunConfig, cl: &ClosedLoop) -> (Outcome, Option<SynthesisResult>) {
    let t = Instant::now();
    let params: Vec<usize> = cfg
        .sweep
        .param
        .iter()
        .copied()
        .filter(|&p| p >= 2)
        .collect();
    let cert = match first_certificate(cfg, SchemeChoice::Event, &params) {
        Ok(c) => c,
        Err(e) => return (Err(e), None),
    };
    let theta = match cert.scheme {
        trigcert::lmi::SchemeScalars::Event { theta_u, .. } => theta_u,
        _ => unreachable!(),
    };
    let outcome = (|| {
        let roa = cert.roa.as_ref().ok_or("no ellipsoid")?;
        let starts = roa_boundary(roa, 64).map_err(|e| e.to_string())?;
        let scheme =
            SimScheme::Event(event_params_from(&cert, theta, 0.0).map_err(|e| e.to_string())?);
        let (ok, detail) = validate_certificate(&cert, cl, &scheme, Some(theta), &starts, 800)?;
        let r = cert
            .relaxation
            .as_ref()
            .map(|r| (r.delta_rho, r.delta_beta));
        check(
            ok,
            format!(
                "theta_u {theta} relaxation {r:?}, {detail}, {:.0}s",
                t.elapsed().as_secs_f64()
            ),
        )
    })();
    (outcome, Some(cert))
}

fn criterion_7(cfg: &RunConfig, cl: &ClosedLoop) -> (Outcome, Option<SynthesisResult>) {
    let t = Instant::now();
    let cert = match first_certificate(cfg, SchemeChoice::SelfTriggered, &[10]) {
        Ok(c) => c,
        Err(e) => return (Err(e), None),
    };
    let outcome = (|| {
        let (l1, l2) = cert.lambda.ok_or("certificate has no lambdas")?;
        let roa = cert.roa.as_ref().ok_or("no ellipsoid")?;
        let starts = roa_boundary(roa, 64).map_err(|e| e.to_string())?;
        let scheme = SimScheme::SelfTriggered(self_params_from(&cert).map_err(|e| e.to_string())?);
        let (ok, detail) = validate_certificate(&cert, cl, &scheme, None, &starts, 800)?;
        check(
            ok && l1 > 0.0 && l2 > 0.0,
            format!(
                "lambda ({l1:.3e}, {l2:.3e}), {detail}, {:.0}s",
                t.elapsed().as_secs_f64()
            ),
        )
    })();
    (outcome, Some(cert))
}

fn criterion_8(
    cfg: &RunConfig,
    cl: &ClosedLoop,
    et: Option<&SynthesisResult>,
    st: Option<&SynthesisResult>,
) -> Outcome {
    let et = et.ok_or("no event certificate")?;
    let (dr, db) = et
        .relaxation
        .as_ref()
        .map(|r| (r.delta_rho, r.delta_beta))
        .ok_or("no relaxation")?;
    let theta_u = match et.scheme {
        trigcert::lmi::SchemeScalars::Event { theta_u, .. } => theta_u,
        _ => unreachable!(),
    };
    let template = cfg
        .template(SchemeChoice::Event)
        .map_err(|e| e.to_string())?;
    let opts = cfg.options().map_err(|e| e.to_string())?;
    let mut volumes = Vec::new();
    for theta in 1..=theta_u {
        let res = solve(
            &template.context(dr, db, theta).map_err(|e| e.to_string())?,
            &opts,
        )
        .map_err(|e| e.to_string())?;
        volumes.push(if res.is_optimal() {
            res.volume_proxy()
        } else {
            f64::NAN
        });
    }
    let trend = volumes.iter().all(|v| v.is_finite())
        && volumes.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6));
    let vols: Vec<String> = volumes.iter().map(|v| format!("{v:.4e}")).collect();
    let Some(st) = st else {
        return check(
            false,
            format!("event volumes [{}], no self certificate", vols.join(", ")),
        );
    };
    let roa = st.roa.as_ref().ok_or("no ellipsoid")?;
    let mut starts = roa_samples(roa, 32, true, 1.0, 0).map_err(|e| e.to_string())?;
    starts.extend(
        cfg.simulation
            .x0
            .iter()
            .map(|x| DVector::from_vec(x.clone())),
    );
    let scheme = SimScheme::SelfTriggered(self_params_from(st).map_err(|e| e.to_string())?);
    let (ok, detail) =
        validate_certificate(st, cl, &scheme, None, &starts, cfg.simulation.horizon)?;
    check(
        trend && ok,
        format!(
            "event volumes [{}] non-increasing {trend}; self runs: {detail}",
            vols.join(", ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let cl = pendulum_loop();
    let min = (0..1000u64)
        .map(|s| alpha_trial(&cl, 9000 + s))
        .fold(f64::INFINITY, f64::min);
    check(min >= -1e-12, format!("1000 rollouts, min alpha {min:.3e}"))
}

fn report(id: usize, o: &Outcome, failures: &mut usize) {
    match o {
        Ok(d) => println!("criterion {id}: PASS ({d})"),
        Err(d) => {
            *failures += 1;
            println!("criterion {id}: FAIL ({d})");
        }
    }
}

fn main() {
    let mut failures = 0;
    report(1, &criterion_1(), &mut failures);
    report(2, &criterion_2(), &mut failures);
    report(3, &criterion_3(), &mut failures);
    report(4, &criterion_4(), &mut failures);
    report(5, &criterion_5(), &mut failures);
    let cfg = RunConfig::pendulum_preset();
    match cfg.closed_loop() {
        Ok(cl) => {
            let (o6, et) = criterion_6(&cfg, &cl);
            report(6, &o6, &mut failures);
            let (o7, st) = criterion_7(&cfg, &cl);
            report(7, &o7, &mut failures);
            report(
                8,
                &criterion_8(&cfg, &cl, et.as_ref(), st.as_ref()),
                &mut failures,
            );
        }
        Err(e) => {
            for id in 6..=8 {
                report(id, &Err(e.to_string()), &mut failures);
            }
        }
    }
    report(9, &criterion_9(), &mut failures);
    println!("criterion 10: SKIPPED (reference weight files are not bundled)");
    println!("acceptance: {failures} of 9 evaluated criteria failed");
    if failures > 0 && std::env::var("ACCEPTANCE_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}
