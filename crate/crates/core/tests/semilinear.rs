use num_complex::Complex64;
use spde_core::gaussian::GaussianSpec;
use spde_core::linear::{evolve_exact, InitialCondition, LinearProblem};
use spde_core::rng;
use spde_core::semilinear::*;
use spde_core::spectral::{biot_savart, make_grid, sobolev_norm, FourierGrid, SpectralField};
use spde_core::stats::Moments;

fn band_limited(grid: FourierGrid, band: i64, seed: u64) -> SpectralField {
    let spec = GaussianSpec::from_fn(grid, |k| {
        let zero_mean = k != [0, 0] || grid.dim() == 1;
        if k[0].abs() <= band && k[1].abs() <= band && zero_mean {
            1.0
        } else {
            0.0
        }
    })
    .unwrap();
    spec.sample(&mut rng::stream(seed, 0))
}

/// `-(u·∇)w` by direct summation over pairs of modes.
fn transport_by_convolution(w: &SpectralField) -> SpectralField {
    let grid = *w.grid();
    let u = biot_savart(w).unwrap();
    let m = grid.max_wavenumber();
    let mut out = SpectralField::zeros(grid, 1);
    for idx in 0..grid.len() {
        let k = grid.wavevector(idx);
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..grid.len() {
            let p = grid.wavevector(a);
            let q = [k[0] - p[0], k[1] - p[1]];
            if q[0].abs() > m || q[1].abs() > m {
                continue;
            }
            let wq = w.coeff(q, 0).unwrap();
            let grad = [Complex64::new(0.0, q[0] as f64) * wq, Complex64::new(0.0, q[1] as f64) * wq];
            acc += u.get(a, 0) * grad[0] + u.get(a, 1) * grad[1];
        }
        out.set(idx, 0, -acc);
    }
    out
}

#[test]
fn taylor_green_transport_matches_convolution() {
    let grid = make_grid(2, 8).unwrap();
    let mut tg = SpectralField::zeros(grid, 1);
    for k in [[1, 1], [1, -1]] {
        tg.set_pair(k, 0, Complex64::new(0.25, 0.0)).unwrap();
    }
    let fast = ns_vorticity_nonlinearity(&tg).unwrap();
    let slow = transport_by_convolution(&tg);
    assert!(fast.max_abs_diff(&slow) < 1e-14);
    // a steady Euler flow: the transport term vanishes
    assert!(fast.norm_sq() < 1e-28);
    let w = band_limited(grid, 2, 5);
    let fast = ns_vorticity_nonlinearity(&w).unwrap();
    let slow = transport_by_convolution(&w);
    assert!(fast.norm_sq() > 1e-3);
    assert!(fast.max_abs_diff(&slow) < 1e-12, "{}", fast.max_abs_diff(&slow));
}

#[test]
fn transport_is_orthogonal_to_vorticity() {
    let grid = make_grid(2, 32).unwrap();
    let spec = GaussianSpec::from_fn(grid, |k| {
        let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
        if k2 == 0.0 {
            0.0
        } else {
            1.0 / (1.0 + k2)
        }
    })
    .unwrap();
    for i in 0..100 {
        let w = spec.sample(&mut rng::stream(91, i));
        let f = ns_vorticity_nonlinearity(&w).unwrap();
        let bound = 1e-11 * w.norm_sq().sqrt() * f.norm_sq().sqrt();
        assert!(w.inner(&f).unwrap().abs() <= bound);
        assert_eq!(f.mean(), 0.0);
    }
}

#[test]
fn reaction_matches_refined_grid_evaluation() {
    let coeffs = [0.3, 1.0, -0.5, -1.0];
    for dim in [1, 2] {
        let grid = make_grid(dim, 24).unwrap();
        let u = band_limited(grid, 5, 7 + dim as u64);
        let fast = reaction_nonlinearity(&u, &coeffs).unwrap();
        let points = 4 * 24;
        let vals: Vec<f64> = u
            .to_physical(0, points)
            .iter()
            .map(|x| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c))
            .collect();
        let oracle = SpectralField::from_physical(grid, points, &vals);
        let rel = fast.max_abs_diff(&oracle) / oracle.norm_sq().sqrt();
        assert!(rel < 1e-10, "d={dim}: {rel}");
    }
}

#[test]
fn reaction_degree_cap() {
    let grid = make_grid(1, 8).unwrap();
    assert!(reaction_nonlinearity(&SpectralField::zeros(grid, 1), &[0.0; 7]).is_err());
}

#[test]
fn linear_damping_converges_at_first_order() {
    let grid = make_grid(1, 4).unwrap();
    let c = 0.8;
    let mut u0 = SpectralField::zeros(grid, 1);
    u0.set_pair([1, 0], 0, Complex64::new(1.0, 0.0)).unwrap();
    let idx = grid.index_of([1, 0]).unwrap();
    let error = |dt: f64| {
        let p = SemilinearProblem::reaction(grid, 1.0, vec![0.0, -c], |_| 0.0, u0.clone(), dt, 1.0).unwrap();
        let res = run(&p, &MonitorConfig::default(), &mut rng::stream(0, 0)).unwrap();
        (res.final_state.get(idx, 0).re - (-(1.0 + c)).exp()).abs()
    };
    let errs: Vec<f64> = [0.1, 0.05, 0.025, 0.0125].iter().map(|&dt| error(dt)).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.8..=2.2).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn zero_drift_is_the_exact_linear_flow() {
    let grid = make_grid(1, 8).unwrap();
    let idx = grid.index_of([2, 0]).unwrap();
    let q = |k: [i64; 2]| 1.0 / (1.0 + k[0].abs() as f64);
    let p = SemilinearProblem::reaction(grid, 1.0, vec![0.0], q, SpectralField::zeros(grid, 1), 0.5, 0.5).unwrap();
    let lin = LinearProblem::from_fns(
        grid,
        |k| (k[0] * k[0]) as f64,
        q,
        InitialCondition::Field(SpectralField::zeros(grid, 1)),
    )
    .unwrap();
    let (mut a, mut b) = (Moments::default(), Moments::default());
    for i in 0..40_000 {
        a.push(
            run(&p, &MonitorConfig::default(), &mut rng::stream(101, i))
                .unwrap()
                .final_state
                .get(idx, 0)
                .norm_sqr(),
        );
        b.push(
            evolve_exact(&lin, &[0.5], &mut rng::stream(102, i)).unwrap()[0]
                .get(idx, 0)
                .norm_sqr(),
        );
    }
    let se = (a.std_error().powi(2) + b.std_error().powi(2)).sqrt();
    assert!((a.mean() - b.mean()).abs() <= 3.0 * se);
}

#[test]
fn undamped_mode_steps_as_euler_plus_brownian_increment() {
    let grid = make_grid(1, 4).unwrap();
    let zero = grid.zero_index();
    let p = SemilinearProblem::new(
        grid,
        vec![0.0; grid.len()],
        vec![1.0; grid.len()],
        Nonlinearity::Reaction(vec![1.0, -0.5]),
        SpectralField::from_fn(grid, 1, |k, _| Complex64::new(if k == [0, 0] { 2.0 } else { 0.0 }, 0.0)),
        0.1,
        0.1,
    )
    .unwrap();
    let e = ExponentialEuler::new(&p).unwrap();
    let mut x = p.initial().clone();
    let mut eta = SpectralField::zeros(grid, 1);
    eta.set(zero, 0, Complex64::new(0.3, 0.0));
    e.step_with_noise(&mut x, &eta).unwrap();
    assert!((x.get(zero, 0).re - (2.0 + 0.1 * (1.0 - 0.5 * 2.0) + 0.3)).abs() < 1e-15);
}

#[test]
fn allen_cahn_stays_bounded_and_convexity_flag_clear() {
    let grid = make_grid(1, 128).unwrap();
    let coeffs = vec![0.0, 1.0, 0.0, -1.0];
    let mut u0 = SpectralField::zeros(grid, 1);
    u0.set_pair([1, 0], 0, Complex64::new(0.25, 0.0)).unwrap();
    let p = SemilinearProblem::reaction(
        grid,
        1.0,
        coeffs.clone(),
        |k| 0.1 / (1.0 + (k[0] * k[0]) as f64).sqrt(),
        u0,
        0.01,
        50.0,
    )
    .unwrap();
    let cfg = MonitorConfig {
        track_linear: true,
        convex: Some(ConvexV::Square),
        ..Default::default()
    };
    let res = run(&p, &cfg, &mut rng::stream(3, 0)).unwrap();
    assert_eq!(res.outcome, Outcome::Completed);
    assert!(res.monitor.max_sup_norm() <= 1.5);
    let rep = convexity_monitor(&res.monitor, ConvexV::Square, &coeffs).unwrap();
    assert!(!rep.flagged, "rate {} worst {}", rep.rate, rep.worst_growth);
}

#[test]
fn heat_flow_does_not_increase_sup_of_convex_functional() {
    let grid = make_grid(1, 64).unwrap();
    let u0 = band_limited(grid, 10, 4);
    for v in [ConvexV::Square, ConvexV::CoshMinusOne] {
        let p = SemilinearProblem::reaction(grid, 1.0, vec![0.0], |_| 0.0, u0.clone(), 0.01, 1.0).unwrap();
        let cfg = MonitorConfig {
            track_linear: true,
            convex: Some(v),
            ..Default::default()
        };
        let res = run(&p, &cfg, &mut rng::stream(0, 0)).unwrap();
        for w in res.monitor.records.windows(2) {
            assert!(w[1].v_tilde <= w[0].v_tilde * (1.0 + 1e-9), "{v:?} at {}", w[1].t);
        }
    }
}

#[test]
fn linear_decay_of_constant_matches_analytic_rate() {
    // V = u^2, u ≡ c, f = -u: d/dt Ṽ = -2c^2 at t = 0
    let grid = make_grid(1, 8).unwrap();
    let c = 0.7;
    let u0 = SpectralField::from_fn(grid, 1, |k, _| Complex64::new(if k == [0, 0] { c } else { 0.0 }, 0.0));
    let dt = 1e-4;
    let p = SemilinearProblem::reaction(grid, 1.0, vec![0.0, -1.0], |_| 0.0, u0, dt, dt).unwrap();
    let cfg = MonitorConfig {
        track_linear: true,
        convex: Some(ConvexV::Square),
        ..Default::default()
    };
    let r = run(&p, &cfg, &mut rng::stream(0, 0)).unwrap().monitor.records;
    let slope = (r[1].v_tilde - r[0].v_tilde) / dt;
    assert!((slope + 2.0 * c * c).abs() < 1e-3 * 2.0 * c * c, "{slope}");
}

#[test]
fn wrong_sign_cubic_blows_up_before_scalar_ode() {
    let grid = make_grid(1, 8).unwrap();
    let u0 = SpectralField::from_fn(grid, 1, |k, _| Complex64::new(if k == [0, 0] { 2.0 } else { 0.0 }, 0.0));
    let p = SemilinearProblem::reaction(grid, 1.0, vec![0.0, 0.0, 0.0, 1.0], |_| 0.0, u0, 1e-4, 1.0).unwrap();
    let res = run(&p, &MonitorConfig::default(), &mut rng::stream(0, 0)).unwrap();
    match res.outcome {
        Outcome::BlowUp { time } => assert!(time < 1.0 && (time - 0.125).abs() < 0.01, "{time}"),
        Outcome::Completed => panic!("no blow-up"),
    }
}

#[test]
fn strong_order_one_for_additive_noise() {
    let grid = make_grid(1, 128).unwrap();
    let mut u0 = SpectralField::zeros(grid, 1);
    u0.set_pair([1, 0], 0, Complex64::new(0.25, 0.0)).unwrap();
    let p = SemilinearProblem::reaction(
        grid,
        1.0,
        vec![0.0, 1.0, 0.0, -1.0],
        |k| 0.5 / (1.0 + (k[0] * k[0]) as f64),
        u0,
        0.1,
        1.0,
    )
    .unwrap();
    let errs = strong_errors(&p, 3, 100, 5).unwrap();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.7..=2.3).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn rough_data_smooths_independently_of_resolution() {
    // u0 ∈ H^{0.1} only: coefficients ~ |k|^{-0.6}; trace-class noise
    let h1 = |n: usize| {
        let grid = make_grid(1, n).unwrap();
        let rough = GaussianSpec::from_fn(grid, |k| (1.0 + (k[0] * k[0]) as f64).powf(-0.3)).unwrap();
        let u0 = rough.sample(&mut rng::stream(9, 0));
        let p = SemilinearProblem::reaction(
            grid,
            1.0,
            vec![0.0, 1.0, 0.0, -1.0],
            |k| 0.5 / (1.0 + (k[0] * k[0]) as f64),
            u0,
            1e-3,
            0.1,
        )
        .unwrap();
        let x = run(&p, &MonitorConfig::default(), &mut rng::stream(10, 0)).unwrap().final_state;
        sobolev_norm(&x, 1.0)
    };
    let norms: Vec<f64> = [64, 128, 256].iter().map(|&n| h1(n)).collect();
    assert!(norms.iter().all(|v| v.is_finite()));
    assert!((norms[2] / norms[1] - 1.0).abs() < 0.05, "{norms:?}");
}

fn low_mode_noise(k: [i64; 2]) -> f64 {
    let k2 = k[0] * k[0] + k[1] * k[1];
    if k2 > 0 && k2 <= 2 {
        0.5
    } else {
        0.0
    }
}

#[test]
fn ns_structure_is_preserved_along_a_run() {
    let grid = make_grid(2, 32).unwrap();
    let w0 = band_limited(grid, 3, 1);
    let p = SemilinearProblem::navier_stokes(grid, 0.1, low_mode_noise, w0, 0.01, 2.0).unwrap();
    let res = run(
        &p,
        &MonitorConfig {
            track_linear: true,
            ..Default::default()
        },
        &mut rng::stream(2, 0),
    )
    .unwrap();
    for r in &res.monitor.records {
        assert!(r.mean.abs() <= 1e-14 && r.divergence <= 1e-12 && r.orthogonality <= 1e-11, "{r:?}");
    }
    let e = ns_energy_monitor(&res.monitor, 0.1).unwrap();
    assert_eq!(e.violations, 0);
}

#[test]
fn noiseless_ns_dissipates() {
    let grid = make_grid(2, 32).unwrap();
    let w0 = band_limited(grid, 3, 4);
    let p = SemilinearProblem::navier_stokes(grid, 0.1, |_| 0.0, w0, 0.01, 1.0).unwrap();
    let res = run(
        &p,
        &MonitorConfig {
            track_linear: true,
            ..Default::default()
        },
        &mut rng::stream(0, 0),
    )
    .unwrap();
    for w in res.monitor.records.windows(2) {
        assert!(w[1].v_l2_sq < w[0].v_l2_sq);
    }
}

#[test]
fn stationary_enstrophy_balance() {
    let grid = make_grid(2, 32).unwrap();
    let nu = 0.1;
    let p = SemilinearProblem::navier_stokes(grid, nu, low_mode_noise, SpectralField::zeros(grid, 1), 0.01, 400.0).unwrap();
    let res = run(&p, &MonitorConfig::default(), &mut rng::stream(12, 0)).unwrap();
    let trace: f64 = p.q().iter().map(|q| q * q).sum();
    let (m, se) = enstrophy_balance(&res.monitor, nu, trace, 5000).unwrap();
    assert!(m.abs() <= 3.0 * se, "{m} ± {se} (trace {trace})");
}
