// SPDX-License-Identifier: MIT
//! Closed-loop rollouts and runtime monitors.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use trigcert::nnet::synthesize_surrogate;
use trigcert::simulator::{
    iqc_monitor, lyapunov_monitor, roa_samples, roa_validation, rollout, rollout_batch, ClosedLoop,
    MonitorData, SimConfig, SimScheme,
};
use trigcert::triggers::{EventTriggerParams, SelfTriggerParams};
use trigcert::uncertain_plant::{build_augmented, RoaEllipsoid};

fn et(theta: usize) -> SimScheme {
    SimScheme::Event(EventTriggerParams {
        eps1: 0.003,
        eps2: 0.002,
        xi1: DMatrix::from_row_slice(2, 2, &[40.0, 5.0, 5.0, 2.0]),
        xi2: DMatrix::from_row_slice(2, 2, &[4.0, 0.5, 0.5, 0.3]),
        mu: 0.05,
        g: 500.0,
        theta,
        alpha0: 0.0,
    })
}

fn st(s_bar: usize) -> SimScheme {
    SimScheme::SelfTriggered(SelfTriggerParams {
        eps1c: 0.8,
        eps2c: 0.6,
        xi1c: DMatrix::from_row_slice(2, 2, &[40.0, 5.0, 5.0, 2.0]),
        xi2c: DMatrix::from_row_slice(2, 2, &[4.0, 0.5, 0.5, 0.3]),
        s_bar,
    })
}

fn x0() -> DVector<f64> {
    DVector::from_vec(vec![0.19, 3.5])
}

fn identity_monitor() -> MonitorData {
    MonitorData {
        p: DMatrix::identity(3, 3),
        r: None,
        t1: None,
        t2: None,
    }
}

#[test]
fn control_is_held_between_transmissions() {
    let cl = pendulum_loop();
    for scheme in [et(3), st(10), SimScheme::Periodic { period: 4 }] {
        let (traj, m) = rollout(&SimConfig::new(300, x0(), scheme), &cl, None).unwrap();
        assert_eq!(traj.tx_instants[0], 0);
        assert_eq!(traj.records[0].xi, DVector::zeros(1));
        assert!(m.transmissions >= 1);
        for w in traj.records.windows(2) {
            let changed = w[0].u != w[1].u;
            if changed {
                assert!(
                    w[1].tx,
                    "input changed without a transmission at {}",
                    w[1].k
                );
            }
        }
        for rec in &traj.records {
            if rec.tx {
                assert_eq!(rec.u, cl.dnn.control(&rec.x).unwrap());
            }
        }
        let tx_flags: Vec<usize> = traj.records.iter().filter(|r| r.tx).map(|r| r.k).collect();
        assert_eq!(tx_flags, traj.tx_instants);
    }
}

#[test]
fn event_samples_every_theta() {
    let cl = pendulum_loop();
    let (traj, _) = rollout(&SimConfig::new(120, x0(), et(4)), &cl, None).unwrap();
    assert!(traj.sample_instants.iter().all(|k| k % 4 == 0));
    assert!(traj.tx_instants.iter().all(|k| k % 4 == 0));
    assert_eq!(traj.sample_instants.len(), 30);
}

#[test]
fn identical_configs_give_identical_runs() {
    let cl = pendulum_loop();
    let cfg = SimConfig::new(400, x0(), et(2));
    let (a, ma) = rollout(&cfg, &cl, Some(&identity_monitor())).unwrap();
    let (b, mb) = rollout(&cfg, &cl, Some(&identity_monitor())).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(ma, mb);
}

#[test]
fn batch_matches_individual_runs() {
    let cl = pendulum_loop();
    let cfgs: Vec<SimConfig> = [0.1, -0.2, 0.3, 0.05]
        .iter()
        .map(|&v| SimConfig::new(200, DVector::from_vec(vec![v, -v]), st(5)))
        .collect();
    let batch = rollout_batch(&cfgs, &cl, None);
    for (cfg, res) in cfgs.iter().zip(batch) {
        let (t, _) = res.unwrap();
        let (s, _) = rollout(cfg, &cl, None).unwrap();
        assert_eq!(t.to_csv(), s.to_csv());
    }
}

#[test]
fn rollout_matches_augmented_recursion() {
    let cl = pendulum_loop();
    let sys = build_augmented(&cl.plant, &cl.filter).unwrap();
    let (traj, _) = rollout(&SimConfig::new(200, x0(), st(10)), &cl, None).unwrap();
    let mut eta = DVector::zeros(3);
    eta.rows_mut(0, 2).copy_from(&x0());
    for rec in &traj.records {
        assert!((eta.rows(0, 2) - &rec.x).amax() <= 1e-12 * (1.0 + eta.amax()));
        assert!((eta.rows(2, 1) - &rec.xi).amax() <= 1e-12 * (1.0 + eta.amax()));
        let r = sys.output(&eta, &rec.u, &rec.omega);
        assert!((r - &rec.r).amax() <= 1e-12 * (1.0 + eta.amax()));
        eta = sys.step(&eta, &rec.u, &rec.omega);
    }
}

#[test]
fn periodic_unit_period_has_zero_efficiency() {
    let cl = pendulum_loop();
    let (_, m) = rollout(
        &SimConfig::new(100, x0(), SimScheme::Periodic { period: 1 }),
        &cl,
        None,
    )
    .unwrap();
    assert_eq!(m.transmissions, 100);
    assert_eq!(m.efficiency, 0.0);
}

#[test]
fn equilibrium_is_invariant() {
    let cl = pendulum_loop();
    let zero = DVector::zeros(2);
    let (traj, m) = rollout(
        &SimConfig::new(200, zero.clone(), et(2)),
        &cl,
        Some(&identity_monitor()),
    )
    .unwrap();
    assert!(traj.records.iter().all(|r| r.x == zero));
    assert_eq!(m.transmissions, 1);
    let (traj, m) = rollout(&SimConfig::new(200, zero.clone(), st(10)), &cl, None).unwrap();
    assert!(traj.records.iter().all(|r| r.x == zero));
    assert_eq!(m.transmissions, 20);
    assert_eq!(m.max_inter_tx, 10);
}

#[test]
fn zero_run_is_non_strict_at_equilibrium() {
    let cl = pendulum_loop();
    let cfg = SimConfig::new(100, DVector::zeros(2), SimScheme::Periodic { period: 5 });
    let (traj, _) = rollout(&cfg, &cl, Some(&identity_monitor())).unwrap();
    let rep = lyapunov_monitor(&traj, None, None).unwrap();
    assert_eq!(rep.checked, 19);
    assert_eq!(rep.non_strict_at_equilibrium, 19);
    assert!(rep.violations.is_empty());
    assert!(rep.pass);
    let iqc = iqc_monitor(&traj, &cl.filter, Some(0.73)).unwrap();
    assert!(iqc.pass);
    assert_eq!(iqc.sector_exit_step, None);
}

#[test]
fn destabilizing_gain_is_flagged() {
    let base = pendulum_loop();
    let dnn =
        synthesize_surrogate(&DMatrix::from_row_slice(1, 2, &[-3.0, -0.8]), 0.1, (4, 4)).unwrap();
    let cl = ClosedLoop::new(base.plant, base.uncertainty, base.filter, dnn).unwrap();
    let cfg = SimConfig::new(
        60,
        DVector::from_vec(vec![0.05, 0.0]),
        SimScheme::Periodic { period: 2 },
    );
    let (traj, m) = rollout(&cfg, &cl, Some(&identity_monitor())).unwrap();
    let rep = lyapunov_monitor(&traj, None, None).unwrap();
    assert!(!rep.pass);
    assert!(rep.violations.contains(&0) || rep.violations.contains(&1));
    assert!(!m.converged);
}

#[test]
fn monitor_requires_value_column() {
    let cl = pendulum_loop();
    let (traj, _) = rollout(
        &SimConfig::new(10, x0(), SimScheme::Periodic { period: 1 }),
        &cl,
        None,
    )
    .unwrap();
    assert!(lyapunov_monitor(&traj, None, None).is_err());
}

#[test]
fn iqc_monitor_reports_sector_exit() {
    let cl = pendulum_loop();
    let (traj, _) = rollout(
        &SimConfig::new(200, DVector::from_vec(vec![0.7, 3.0]), st(10)),
        &cl,
        None,
    )
    .unwrap();
    let rep = iqc_monitor(&traj, &cl.filter, Some(0.73)).unwrap();
    let first = traj.records.iter().position(|r| r.x[0].abs() > 0.73);
    assert_eq!(rep.sector_exit_step, first);
    assert!(first.is_some());
}

#[test]
fn roa_validation_at_equilibrium() {
    let cl = pendulum_loop();
    let rep = roa_validation(&[DVector::zeros(2)], &cl, &et(1), 50).unwrap();
    assert!(rep.pass);
    assert_eq!(rep.fraction_converged, 1.0);
    assert!(roa_validation(&[], &cl, &et(1), 50).is_err());
}

#[test]
fn roa_samples_lie_where_requested() {
    let roa = RoaEllipsoid {
        p1: DMatrix::from_row_slice(2, 2, &[9.0, 1.0, 1.0, 0.5]),
        center: DVector::zeros(2),
    };
    for p in roa_samples(&roa, 64, false, 1.0, 0).unwrap() {
        assert!((roa.level(&p) - 1.0).abs() < 1e-9);
    }
    for p in roa_samples(&roa, 200, true, 1.0, 3).unwrap() {
        assert!(roa.level(&p) <= 1.0 + 1e-12);
    }
    for p in roa_samples(&roa, 16, false, 3.0, 0).unwrap() {
        assert!((roa.level(&p) - 9.0).abs() < 1e-8);
    }
    assert_eq!(
        roa_samples(&roa, 32, true, 1.0, 7).unwrap(),
        roa_samples(&roa, 32, true, 1.0, 7).unwrap()
    );
}

#[test]
fn csv_header_and_rows() {
    let cl = pendulum_loop();
    let (traj, _) = rollout(
        &SimConfig::new(8, x0(), et(2)),
        &cl,
        Some(&identity_monitor()),
    )
    .unwrap();
    let csv = traj.to_csv();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,x1,x2,xi1,u1,omega,nu,r1,r2,alpha,tx,V,H"
    );
    assert_eq!(lines.count(), 8);
}

#[test]
fn bad_configs_rejected() {
    let cl = pendulum_loop();
    assert!(rollout(&SimConfig::new(0, x0(), et(1)), &cl, None).is_err());
    assert!(rollout(&SimConfig::new(10, x0(), et(3)), &cl, None).is_err());
    assert!(rollout(&SimConfig::new(10, DVector::zeros(3), et(1)), &cl, None).is_err());
    assert!(rollout(
        &SimConfig::new(10, x0(), SimScheme::Periodic { period: 0 }),
        &cl,
        None
    )
    .is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transmissions_bounded_by_samples(theta in 1usize..6, x1 in -0.5f64..0.5, x2 in -3.0f64..3.0) {
        let cl = pendulum_loop();
        let (traj, m) = rollout(&SimConfig::new(60 * theta, DVector::from_vec(vec![x1, x2]), et(theta)), &cl, None).unwrap();
        prop_assert!(m.transmissions >= 1);
        prop_assert!(m.transmissions <= traj.sample_instants.len());
        prop_assert!(m.efficiency >= 0.0 && m.efficiency < 1.0);
    }
}
