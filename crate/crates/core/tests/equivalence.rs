//! The exact simulation against the closed-form two-qubit model.

use twostroke::analytic::{
    build_affine_maps, steady_state, thermo_from_states, trajectory, work_closed_form, AnalyticParams, ObservableVector,
};
use twostroke::engine::{BathSpec, CouplingSpec, EngineSpec};
use twostroke::strobe::{Engine, InitialState, LimitCycleOptions, SolverMethod};

fn two_qubit(w1: f64, w2: f64, g: f64, g_bath: f64, tau_q: f64, tau_w: f64) -> EngineSpec {
    EngineSpec::qubit_chain(
        &[w1, w2],
        CouplingSpec::partial_swap_uniform(g, 2),
        (0.4, g_bath),
        (0.8, g_bath),
        tau_q,
        tau_w,
    )
    .unwrap()
}

fn cases() -> Vec<EngineSpec> {
    vec![
        two_qubit(0.75, 1.0, 0.3, 0.3, 1.0, 1.0),
        two_qubit(0.3, 1.0, 0.3, 0.3, 1.0, 1.0),
        two_qubit(1.2, 0.9, 0.5, 0.2, 0.7, 2.3),
        two_qubit(0.6, 1.4, 0.05, 0.8, 2.5, 0.4),
        two_qubit(0.75, 1.0, 0.0, 0.3, 1.0, 1.0),
    ]
}

#[test]
fn trajectories_agree_stroke_by_stroke() {
    for spec in cases() {
        let engine = Engine::new(&spec).unwrap();
        let maps = build_affine_maps(&AnalyticParams::from_spec(&spec).unwrap());
        for init in [
            InitialState::ColdThermal,
            InitialState::Ground,
            InitialState::MaximallyMixed,
        ] {
            let rho0 = engine.initial_state(&init).unwrap();
            let ledger = engine.run_cycles(&rho0, 100, true).unwrap();
            let expected = trajectory(&ObservableVector::from_state(&rho0).unwrap(), 100, &maps);
            for (snap, point) in ledger.snapshots.as_ref().unwrap().iter().zip(&expected) {
                let x = ObservableVector::from_state(&snap.rho).unwrap();
                let xt = ObservableVector::from_state(&snap.rho_tilde).unwrap();
                assert!(x.max_abs_diff(&point.x) < 1e-10, "{spec:?} cycle {}", point.n);
                assert!(xt.max_abs_diff(&point.x_tilde) < 1e-10, "{spec:?} cycle {}", point.n);
            }
        }
    }
}

#[test]
fn ledger_heat_and_work_match_the_observables() {
    for spec in cases() {
        let engine = Engine::new(&spec).unwrap();
        let params = AnalyticParams::from_spec(&spec).unwrap();
        let maps = build_affine_maps(&params);
        let rho0 = engine.initial_state(&InitialState::Ground).unwrap();
        let ledger = engine.run_cycles(&rho0, 30, false).unwrap();
        let points = trajectory(&ObservableVector::from_state(&rho0).unwrap(), 30, &maps);
        for (row, pair) in ledger.rows.iter().zip(points.windows(2)) {
            let (q_c, q_h, w) = thermo_from_states(&pair[0].x, &pair[0].x_tilde, &pair[1].x, &params);
            assert!((row.q_c - q_c).abs() < 1e-10);
            assert!((row.q_h - q_h).abs() < 1e-10);
            assert!((row.w - w).abs() < 1e-10);
        }
    }
}

#[test]
fn limit_cycles_agree_with_the_steady_state() {
    for spec in cases() {
        let engine = Engine::new(&spec).unwrap();
        let params = AnalyticParams::from_spec(&spec).unwrap();
        let steady = steady_state(&build_affine_maps(&params)).unwrap();
        let report = engine
            .find_limit_cycle(&LimitCycleOptions {
                method: SolverMethod::Spectral,
                ..Default::default()
            })
            .unwrap();
        let x = ObservableVector::from_state(&report.rho_star).unwrap();
        assert!(x.max_abs_diff(&steady.x) < 1e-9, "{spec:?}");
        let closed = work_closed_form(&params);
        assert!((report.w - closed).abs() < 1e-10, "{spec:?}: {} vs {closed}", report.w);
    }
}

#[test]
fn detuned_ancillas_are_outside_the_model() {
    let spec = two_qubit(0.75, 1.0, 0.3, 0.3, 1.0, 1.0)
        .with_baths(
            BathSpec::qubit(0.9, 0.4, 0.3).unwrap(),
            BathSpec::qubit(1.0, 0.8, 0.3).unwrap(),
        )
        .unwrap();
    assert!(AnalyticParams::from_spec(&spec).is_err());
}
