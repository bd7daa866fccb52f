use nalgebra::DVector;

use tlq_core::dynamics::{assemble_rhs, integrate, ladder_oracle, IntegrateOptions, LadderOptions, ReducedState};
use tlq_core::quantum::{propagate_gaussian, propagator_of, CanonicalSystem, GaussianMoments};
use tlq_core::spectral::LcExampleParams;
use tlq_core::tline::{line_params, thevenin_source, LineInitialState, SampledProfile};
use tlq_core::{OutOfDomain, Signal, TimeGrid};

/// Line carrying a Gaussian flux bump that travels towards `x = 0`.
fn incoming_bump(x0: f64, width: f64, c: f64, v: f64, length: f64, samples: usize) -> LineInitialState {
    let dx = length / (samples - 1) as f64;
    let f = |x: f64| (-0.5 * ((x - x0) / width).powi(2)).exp();
    let fp = |x: f64| -(x - x0) / (width * width) * f(x);
    // φ(x, t) = F(x + v t): q = c ∂ₜφ = c v F′
    LineInitialState::new(
        SampledProfile::from_fn(dx, samples, f).unwrap(),
        SampledProfile::from_fn(dx, samples, |x| c * v * fp(x)).unwrap(),
    )
}

#[test]
fn bump_arrives_at_transport_time() {
    let line = line_params(2.0, 0.5).unwrap();
    let init = incoming_bump(7.0, 0.5, line.c_per_len, line.v_p, 20.0, 4001);
    let grid = TimeGrid::span(15.0, 3000).unwrap();
    let e0 = thevenin_source(&init, &line, grid, OutOfDomain::Error).unwrap();
    // e₀ = 2 v F′(v t): zero crossing at the bump centre, extrema at ±width
    let (_, t_peak) = e0.max_abs();
    assert!((t_peak - (7.0 - 0.5) / line.v_p).abs() <= 2.0 * grid.dt() || (t_peak - (7.0 + 0.5) / line.v_p).abs() <= 2.0 * grid.dt());
}

#[test]
fn ladder_agrees_with_thevenin_one_port() {
    // the semi-infinite line seen from the port is Z_c in series with e₀ = 2v←
    let params = LcExampleParams::normalized(0.3, 2.0).unwrap();
    let topo = params.topology().unwrap();
    let model = params.reduced_model().unwrap();
    let line = line_params(2.0, 0.5).unwrap();
    let length = 40.0;
    let init = incoming_bump(8.0, 1.0, line.c_per_len, line.v_p, length, 16_001);
    let t_max = 30.0;
    let grid = TimeGrid::span(t_max, 3000).unwrap();
    let e0 = thevenin_source(&init, &line, grid, OutOfDomain::Error).unwrap();
    let rhs = assemble_rhs(&model, &topo, Some(&e0)).unwrap();
    let circuit = ReducedState::zeros(1);
    let reduced = integrate(&rhs, &circuit, grid, IntegrateOptions { substeps: 4, ..Default::default() }).unwrap();
    let ladder = ladder_oracle(line, 4000, length, &topo, &circuit, Some(&init), grid, LadderOptions::default()).unwrap();
    let a = reduced.flux(1).unwrap();
    let b = ladder.trajectory.flux(1).unwrap();
    let scale = a.max_abs().0;
    assert!(scale > 0.1);
    let err = a.samples().iter().zip(b.samples()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(err <= 5e-3 * scale, "{err:e} vs {scale}");
    let qa = reduced.q0().unwrap();
    let qb = ladder.trajectory.q0().unwrap();
    let qerr = qa.samples().iter().zip(qb.samples()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(qerr <= 1e-2 * qa.max_abs().0, "{qerr:e}");
}

#[test]
fn mean_propagation_is_the_classical_trajectory() {
    let params = LcExampleParams::new(0.6, 1.4, 0.3, 2.5).unwrap();
    let topo = params.topology().unwrap();
    let model = params.reduced_model().unwrap();
    let (phi1, q1, q0) = (0.4, -0.2, 0.15);
    let grid = TimeGrid::span(3.0 * params.period(), 300).unwrap();
    let rhs = assemble_rhs(&model, &topo, None).unwrap();
    let init = ReducedState::new(DVector::from_vec(vec![phi1]), DVector::from_vec(vec![q1]), q0).unwrap();
    let tr = integrate(&rhs, &init, grid, IntegrateOptions::default()).unwrap();
    let moments = GaussianMoments::vacuum(DVector::from_vec(vec![phi1, 0.0, q1, q0]), 1.0);
    for k in [0, 17, 150, 300] {
        let prop = propagator_of(CanonicalSystem::Reduced { model: &model, topology: &topo }, grid.time(k)).unwrap();
        let m = propagate_gaussian(&moments, &prop, true).unwrap();
        let s = &tr.states[k];
        assert!((m.mean[0] - s.phi[0]).abs() <= 1e-10 * phi1.abs().max(1.0));
        assert!((m.mean[2] - s.q[0]).abs() <= 1e-10);
        assert!((m.mean[3] - s.q0).abs() <= 1e-10);
    }
}

#[test]
fn trajectory_csv_has_expected_columns() {
    let params = LcExampleParams::normalized(0.3, 2.0).unwrap();
    let topo = params.topology().unwrap();
    let model = params.reduced_model().unwrap();
    let rhs = assemble_rhs(&model, &topo, None).unwrap();
    let mut init = ReducedState::zeros(1);
    init.phi[0] = 1.0;
    let tr = integrate(&rhs, &init, TimeGrid::span(1.0, 10).unwrap(), IntegrateOptions::default()).unwrap();
    let mut buf = Vec::new();
    tr.write_csv(&mut buf, &model).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,phi_1,q_1,q0,v0");
    assert_eq!(text.lines().count(), 12);
    let phi = tr.flux(1).unwrap();
    let mut sbuf = Vec::new();
    phi.write_csv(&mut sbuf, "phi_1").unwrap();
    let back = Signal::read_csv(sbuf.as_slice()).unwrap();
    assert_eq!(back.samples(), phi.samples());
}
