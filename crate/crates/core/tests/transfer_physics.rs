use hqc_core::bounds::{adiabatic_population_bound, effective_three_level, omega_tilde, transfer_time_window, Regime};
use hqc_core::scenario::bound_rows_at;
use hqc_core::schemes::{build, run_transfer, simulate, LogicalEncoding, Scheme, SchemeParams, ATOM1, ATOM2};

fn optical(total_time: f64) -> SchemeParams {
    SchemeParams { total_time, tol: 1e-8, ..SchemeParams::default() }
}

#[test]
fn every_logical_word_arrives_on_atom_two() {
    let enc = LogicalEncoding::default();
    let p = optical(1e4);
    for word in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let r = run_transfer(Scheme::Optical, &p, word).unwrap();
        assert!(r.fidelity > 0.99, "{word:?}: {}", r.fidelity);
        assert!(r.norm_loss < 1e-6);
        assert_eq!(enc.transferred(word).unwrap(), (0, 2 * word.0 + word.1));
    }
}

#[test]
fn pulsing_the_sender_first_goes_through_the_excited_state() {
    let run = |first: &str, gamma: f64| {
        let p = SchemeParams { gamma, ..optical(1e4) };
        let model = build(Scheme::Optical, &p, &p.schedule(first).unwrap()).unwrap();
        let psi0 = model.system.ket(&["g1", "g3", "0"]).unwrap();
        let tgt = model.system.ket(&["g3", "g1", "0"]).unwrap();
        simulate(model, &psi0, &tgt, p.total_time, p.tol).unwrap().result
    };
    let (dark, bright) = (run(ATOM2, 0.0), run(ATOM1, 0.0));
    assert!(dark.fidelity > 0.99 && dark.max_pe < 0.01);
    assert!(bright.max_pe > 0.9, "{}", bright.max_pe);
    assert!(run(ATOM2, 0.01).fidelity > 0.9);
    assert!(run(ATOM1, 0.01).fidelity < 0.01);
}

#[test]
fn adiabaticity_improves_with_the_dressed_gap() {
    // fidelity loss at fixed T shrinks when Ω̃T grows
    let slow = run_transfer(Scheme::Optical, &optical(1000.0), (1, 0)).unwrap();
    let fast = run_transfer(Scheme::Optical, &optical(8000.0), (1, 0)).unwrap();
    let p = optical(1.0);
    let w = omega_tilde(Regime::Resonant, p.omega, p.omega, p.g, 0.0).unwrap();
    assert!(w > 0.0 && w < p.omega);
    assert!(1.0 - fast.fidelity < 1.0 - slow.fidelity);
}

#[test]
fn window_edges_scale_with_the_safety_factor() {
    for scheme in [Scheme::Optical, Scheme::Motional, Scheme::ModifiedOptical] {
        let p = SchemeParams { delta: 10.0, gamma: 1e-3, kappa: 1e-3, ..SchemeParams::default() };
        let w1 = transfer_time_window(scheme, &p, 1.0).unwrap();
        let w10 = transfer_time_window(scheme, &p, 10.0).unwrap();
        assert!((w10.t_min / w1.t_min - 10.0).abs() < 1e-12);
        assert!((w1.t_max / w10.t_max - 10.0).abs() < 1e-12);
        let lossless = SchemeParams { gamma: 0.0, kappa: 0.0, ..p };
        let w = transfer_time_window(scheme, &lossless, 10.0).unwrap();
        assert_eq!(w.t_min, 0.0);
        assert!(w.t_max.is_infinite() && w.contains(1e9));
    }
}

#[test]
fn motional_bound_rows_at_an_adiabatic_point() {
    let p = SchemeParams { delta: 10.0, total_time: 1e6, tol: 1e-9, ..SchemeParams::default() };
    let rows = bound_rows_at(Scheme::Motional, &p).unwrap();
    let (g, d) = effective_three_level(Scheme::Motional, &p).unwrap();
    assert_eq!(d, 0.0);
    assert!((g - p.g * p.eta * p.omega / p.delta).abs() < 1e-15);

    let est = adiabatic_population_bound(g, p.total_time, p.a, p.tau, d).unwrap();
    let following = rows.iter().find(|r| r.tag == "adiabatic-following").unwrap();
    assert!((following.analytic - est.following_estimate).abs() <= 1e-12 * est.following_estimate);
    assert!(following.satisfied, "{following:?}");
    for r in rows.iter().filter(|r| r.tag.starts_with("messiah")) {
        assert!(r.satisfied, "{r:?}");
    }
    // the e^{a²/τ²} forms sit below the observed population for exp(−x²/τ²) pulses
    for r in rows.iter().filter(|r| r.tag.starts_with("gaussian")) {
        assert!(r.observed > r.analytic, "{r:?}");
    }
}
