//! Randomized invariants of the strokes and the cycle ledger.

use proptest::prelude::*;

use twostroke::engine::{BathSpec, CouplingSpec, EngineSpec};
use twostroke::hilbert::{partial_trace, tensor_compose, DensityMatrix};
use twostroke::strobe::{Engine, InitialState, LimitCycleOptions, SolverMethod};

fn coupling(kind: u8, n: usize, a: f64, b: f64, c: f64) -> CouplingSpec {
    match kind % 4 {
        0 => CouplingSpec::partial_swap_uniform(a, n),
        1 => CouplingSpec::xx(a),
        2 => CouplingSpec::xxz(a, c),
        _ => CouplingSpec::Xyz { jx: a, jy: b, jz: c },
    }
}

prop_compose! {
    fn any_spec()(
        n in 2usize..=3,
        omegas in prop::collection::vec(0.3f64..2.0, 3),
        kind in 0u8..4,
        a in 0.05f64..1.0,
        b in 0.05f64..1.0,
        c in -1.0f64..1.0,
        t_c in 0.1f64..1.0,
        dt in 0.05f64..2.0,
        g_c in 0.05f64..1.5,
        g_h in 0.05f64..1.5,
        detune in -0.3f64..0.3,
        tau_q in 0.05f64..3.0,
        tau_w in 0.05f64..3.0,
    ) -> EngineSpec {
        let omegas = &omegas[..n];
        let base = EngineSpec::qubit_chain(omegas, coupling(kind, n, a, b, c), (t_c, g_c), (t_c + dt, g_h), tau_q, tau_w)
            .unwrap();
        let cold = BathSpec::qubit(omegas[0] + detune, t_c, g_c).unwrap();
        let hot = BathSpec::qubit(omegas[n - 1], t_c + dt, g_h).unwrap();
        base.with_baths(cold, hot).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ledger_obeys_both_laws(spec in any_spec()) {
        let engine = Engine::new(&spec).unwrap();
        let rho0 = engine.initial_state(&InitialState::MaximallyMixed).unwrap();
        let ledger = engine.run_cycles(&rho0, 15, false).unwrap();
        prop_assert!(ledger.first_law_residual() <= 1e-10);
        prop_assert!(ledger.min_entropy_production() >= -1e-12);
    }

    #[test]
    fn kraus_channel_matches_the_dilation(spec in any_spec(), k in 0usize..8) {
        let engine = Engine::new(&spec).unwrap();
        let dim = spec.chain_layout().total_dim();
        let rho = DensityMatrix::basis_state(spec.chain_layout(), k % dim).unwrap();
        let direct = engine.heat_stroke(&rho).unwrap().state_after;
        let kraus = engine.heat_channel(&rho).unwrap();
        prop_assert!(direct.trace_distance(&kraus).unwrap() < 1e-12);
        let cycle = engine.cycle_channel(&rho).unwrap();
        let two = engine.work_channel(&kraus).unwrap();
        prop_assert!(cycle.trace_distance(&two).unwrap() < 1e-12);
        prop_assert!(cycle.min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn onoff_work_is_the_trapped_interaction_energy(spec in any_spec()) {
        let engine = Engine::new(&spec).unwrap();
        let mut rho = engine.initial_state(&InitialState::ColdThermal).unwrap();
        for _ in 0..5 {
            let heat = engine.heat_stroke(&rho).unwrap();
            prop_assert!((heat.w_onoff_c + heat.dv_c).abs() < 1e-10);
            prop_assert!((heat.w_onoff_h + heat.dv_h).abs() < 1e-10);
            rho = engine.work_stroke(&heat.state_after).unwrap().state_after;
        }
    }

    #[test]
    fn limit_cycle_is_a_fixed_point(spec in any_spec()) {
        let engine = Engine::new(&spec).unwrap();
        let r = engine.find_limit_cycle(&LimitCycleOptions::default()).unwrap();
        let back = engine.cycle_channel(&r.rho_star).unwrap();
        prop_assert!(back.trace_distance(&r.rho_star).unwrap() < 1e-10);
        prop_assert!((r.w - r.q_c - r.q_h).abs() < 1e-10);
        prop_assert!(r.sigma >= -1e-12);
    }

    #[test]
    fn compose_then_trace_recovers_factors(spec in any_spec()) {
        let engine = Engine::new(&spec).unwrap();
        let rho = engine.initial_state(&InitialState::ColdThermal).unwrap();
        let layout = spec.chain_layout();
        let labels: Vec<&str> = layout.labels().iter().map(String::as_str).collect();
        let mixed = DensityMatrix::maximally_mixed(twostroke::hilbert::SpaceLayout::single("X", 3).unwrap());
        let joint = tensor_compose(&[&mixed, &rho]).unwrap();
        prop_assert!(partial_trace(&joint, &labels).unwrap().trace_distance(&rho).unwrap() < 1e-12);
    }
}

#[test]
fn solvers_agree_on_the_three_site_chain() {
    let spec = EngineSpec::qubit_chain(
        &[1.5, 1.75, 2.0],
        CouplingSpec::xx(0.8),
        (0.2, 10.0),
        (0.8, 10.0),
        twostroke::sweep::tau_q_for_lambda(0.5, 10.0),
        0.25,
    )
    .unwrap();
    let engine = Engine::new(&spec).unwrap();
    let tol = 1e-12;
    let solve = |method| {
        engine
            .find_limit_cycle(&LimitCycleOptions {
                method,
                tol,
                ..Default::default()
            })
            .unwrap()
    };
    let spectral = solve(SolverMethod::Spectral);
    let iterate = solve(SolverMethod::Iterate);
    let gap = spectral.rho_star.trace_distance(&iterate.rho_star).unwrap();
    assert!(
        gap <= 10.0 * tol,
        "gap {gap:.3e}, subleading {:?}",
        spectral.subleading_eigenvalue
    );
}
