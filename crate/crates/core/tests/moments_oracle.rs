//! The moment hierarchy against the master equation.

use otto_core::fock::JointOperators;
use otto_core::lindblad::Propagator;
use otto_core::moments::{
    integrate_moments, moment_limit_cycle, moment_rhs_with, Closure, MomentOptions, MomentState, Variant,
};
use otto_core::thermo::{engine_foms, solve_cycle};
use otto_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random density matrix with at most `na` photons and `nb` phonons, so that
/// no operator in the hierarchy reaches the truncation edge.
fn low_support_state(dim_a: usize, dim_b: usize, na: usize, nb: usize, seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx: Vec<usize> = (0..=na).flat_map(|m| (0..=nb).map(move |k| m * dim_b + k)).collect();
    let k = idx.len();
    let a = CMatrix::from_fn(k, k, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let small = &a * a.adjoint();
    let tr = small.trace();
    let n = dim_a * dim_b;
    let mut full = CMatrix::zeros(n, n);
    for (i, &gi) in idx.iter().enumerate() {
        for (j, &gj) in idx.iter().enumerate() {
            full[(gi, gj)] = small[(i, j)] / tr;
        }
    }
    DensityMatrix::new(dim_a, dim_b, full, 0.0).unwrap()
}

fn field_errors(a: &MomentState, b: &MomentState) -> Vec<(&'static str, f64)> {
    vec![
        ("n_a", (a.n_a - b.n_a).abs()),
        ("n_a2", (a.n_a2 - b.n_a2).abs()),
        ("n_b", (a.n_b - b.n_b).abs()),
        ("q2", (a.q2 - b.q2).abs()),
        ("p2", (a.p2 - b.p2).abs()),
        ("qp", (a.qp - b.qp).abs()),
        ("c_qp", (a.c_qp - b.c_qp).norm()),
        ("c_q2", (a.c_q2 - b.c_q2).norm()),
        ("c_p2", (a.c_p2 - b.c_p2).norm()),
        ("c_nn", (a.c_nn - b.c_nn).norm()),
        ("c_b2", (a.c_b2 - b.c_b2).norm()),
    ]
}

#[test]
fn rederived_equations_are_exact_away_from_the_cutoff() {
    for (seed, g, on) in [(1, -0.6, true), (2, -0.6, false), (3, -0.2, true), (4, 0.3, false)] {
        let params = EngineParams::baseline().with_g(g).with_dims(5, 12);
        let l = build_liouvillian(&params).unwrap();
        let rho = low_support_state(5, 12, 1, 3, seed);
        let drho = DensityMatrix::new(5, 12, l.apply(on, rho.matrix()), 0.0).unwrap();
        let (exact, _) = MomentState::from_density(&drho).unwrap();
        let (state, six) = MomentState::from_density(&rho).unwrap();
        let rhs = moment_rhs_with(&state, &params, on, Variant::Rederived, &six);
        for (name, err) in field_errors(&rhs, &exact) {
            assert!(err < 1e-10, "seed {seed}: d{name}/dt off by {err:e}");
        }
    }
}

#[test]
fn as_printed_variant_is_not_exact() {
    let params = EngineParams::baseline().with_dims(5, 12);
    let l = build_liouvillian(&params).unwrap();
    let rho = low_support_state(5, 12, 1, 3, 7);
    let drho = DensityMatrix::new(5, 12, l.apply(true, rho.matrix()), 0.0).unwrap();
    let (exact, _) = MomentState::from_density(&drho).unwrap();
    let (state, six) = MomentState::from_density(&rho).unwrap();
    let printed = moment_rhs_with(&state, &params, true, Variant::AsPrinted, &six);
    let worst = field_errors(&printed, &exact).into_iter().map(|(_, e)| e).fold(0.0, f64::max);
    assert!(worst > 1e-3, "{worst}");
}

/// The hierarchy relies on [q, p] = 2i, which the phonon cutoff breaks once
/// population reaches the edge; at g = -0.1 the (4, 8) space is converged.
#[test]
fn mechanical_occupation_rate_matches_master_equation_state() {
    let params = EngineParams::baseline().with_g(-0.1).with_dims(4, 8);
    let schedule = params.schedule();
    let l = build_liouvillian(&params).unwrap();
    let ops = JointOperators::new(4, 8).unwrap();
    let opts = SolverOptions { backend: Backend::Expm, ..SolverOptions::default() };
    let rho0 = DensityMatrix::initial(&params);
    let h = 1e-4;
    for t in [0.5, 1.0, 2.5] {
        let mut prop = Propagator::new(&l, &rho0, &opts).unwrap();
        let mut x = prop.pack(&rho0).unwrap();
        prop.advance(&mut x, &schedule, 0.0, t - h);
        let before = prop.observables(&x).n_b;
        prop.advance(&mut x, &schedule, t - h, t);
        let rho = prop.unpack(&x, t);
        prop.advance(&mut x, &schedule, t, t + h);
        let after = prop.observables(&x).n_b;
        let fd = (after - before) / (2.0 * h);

        let (state, six) = MomentState::from_density(&rho).unwrap();
        let rhs = moment_rhs_with(&state, &params, true, Variant::Rederived, &six);
        let exact = DensityMatrix::new(4, 8, l.apply(true, rho.matrix()), 0.0).unwrap().expectation(&ops.n_b).re;
        assert!((fd - exact).abs() < 1e-9, "t = {t}: {fd} vs {exact}");
        assert!((rhs.n_b - fd).abs() < 1e-6, "t = {t}: {} vs finite difference {}", rhs.n_b, fd);
    }
}

#[test]
fn occupation_line_is_analytic() {
    let params = EngineParams::baseline();
    // on for the whole run
    let schedule = DriveSchedule { period: 1e4, duty: 0.5, phase: 0.0 };
    let (a, b) = params.rate_coefficients(true);
    let s0 = MomentState::thermal(&params);
    let samples = integrate_moments(&s0, &params, &schedule, 0.0, 2.0, 0.05, &MomentOptions { dt: Some(1e-3), ..Default::default() })
        .unwrap();
    for s in samples {
        let expect = a / b + (s0.n_a - a / b) * (-b * s.t).exp();
        assert!((s.state.n_a - expect).abs() < 1e-10 * expect, "t = {}: {} vs {}", s.t, s.state.n_a, expect);
    }
}

#[test]
fn uncoupled_moments_factorise() {
    let params = EngineParams::baseline().with_g(0.0);
    let s0 = MomentState::thermal(&params);
    let t_end = 3.0 * params.drive_period();
    let samples = integrate_moments(&s0, &params, &params.schedule(), 0.0, t_end, 0.5, &MomentOptions::default()).unwrap();
    let x2 = 2.0 * params.nbar_b + 1.0;
    for s in samples {
        let m = s.state;
        assert!((m.n_b - params.nbar_b).abs() < 1e-12);
        assert!((m.q2 - x2).abs() < 1e-12 && (m.p2 - x2).abs() < 1e-12);
        assert!((m.c_q2.re - m.n_a * x2).abs() < 1e-12, "{} vs {}", m.c_q2, m.n_a * x2);
        assert!((m.c_p2.re - m.n_a * x2).abs() < 1e-12);
        assert!((m.c_nn.re - m.n_a * m.n_b).abs() < 1e-12);
        assert!(m.c_qp.norm() < 1e-12 && m.c_b2.norm() < 1e-12);
    }
}

#[test]
fn hermitian_correlators_stay_real() {
    let params = EngineParams::baseline().with_g(-0.2);
    let t_end = 3.0 * params.drive_period();
    let samples =
        integrate_moments(&MomentState::thermal(&params), &params, &params.schedule(), 0.0, t_end, 0.1, &MomentOptions::default())
            .unwrap();
    for s in samples {
        assert!(s.state.c_q2.im.abs() < 1e-8 && s.state.c_p2.im.abs() < 1e-8 && s.state.c_qp.im.abs() < 1e-8);
        assert!(s.state.n_a >= -1e-9 && s.state.n_b >= -1e-9);
    }
}

/// At weak coupling the master equation is converged in the truncation, so
/// it is a fair reference for the closures.
#[test]
fn optical_ratio_closure_tracks_weak_coupling_piston() {
    let params = EngineParams::baseline().with_g(-0.1);
    let run = solve_cycle(&params, &SolverOptions::default()).unwrap();
    let reference = engine_foms(&run).unwrap().n_b.mean;
    let mean_nb = |closure| {
        let opts = MomentOptions { closure, ..Default::default() };
        let (s, _) =
            moment_limit_cycle(&MomentState::thermal(&params), &params, &params.schedule(), &opts, 256, 1e-10, 5000).unwrap();
        s[..256].iter().map(|x| x.state.n_b).sum::<f64>() / 256.0
    };
    let ratio = mean_nb(Closure::OpticalRatio);
    let mean_field = mean_nb(Closure::MeanField);
    assert!((ratio - reference).abs() < 0.02 * reference, "{ratio} vs {reference}");
    // the factorised closure misses the photon-number noise
    assert!(mean_field < 0.5 * reference, "{mean_field} vs {reference}");
}

#[test]
fn moment_cycle_heats_cavity_to_bath_average() {
    let mut params = EngineParams::baseline();
    params.nbar_h = 0.125;
    let (s, _) =
        moment_limit_cycle(&MomentState::thermal(&params), &params, &params.schedule(), &MomentOptions::default(), 256, 1e-10, 5000)
            .unwrap();
    // n_a peaks at the end of the heating stroke
    let peak = s.iter().map(|x| x.state.n_a).fold(f64::MIN, f64::max);
    let target = 0.5 * (params.nbar_a + params.nbar_h);
    assert!((peak - target).abs() < 1e-3 * target, "{peak} vs {target}");
}
