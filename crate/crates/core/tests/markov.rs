use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use spde_core::linear::LinearProblem;
use spde_core::markov::*;
use spde_core::rng;
use spde_core::spectral::{make_grid, SpectralField};
use spde_core::Error;

fn random_model(r: &mut impl Rng) -> MarkovModel {
    let n = r.random_range(2..=6);
    let p = (0..n)
        .map(|_| {
            let w: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0f64).powi(2)).collect();
            let s: f64 = w.iter().sum();
            let mut row: Vec<f64> = w.iter().map(|x| x / s).collect();
            let rest: f64 = row[1..].iter().sum();
            row[0] = 1.0 - rest;
            row
        })
        .collect();
    let v = (0..n).map(|i| if i == 0 { 0.0 } else { r.random_range(0.0..10.0) }).collect();
    MarkovModel::finite(p, v).unwrap()
}

#[test]
fn certificates_are_sound_on_random_chains() {
    let mut r = rng::stream(77, 0);
    let (mut validated, mut attempts) = (0, 0);
    while validated < 200 {
        attempts += 1;
        assert!(attempts < 10_000, "only {validated} certificates in {attempts} attempts");
        let m = random_model(&mut r);
        let Ok(cert) = certify(&m) else { continue };
        let (c1, witness) = contraction_factor(&m, cert.beta);
        assert!(c1 <= cert.alpha, "ĉ1 {c1} > α {} at {witness:?} for {m:?}", cert.alpha);
        assert!(contraction_verify(&m, &cert, 5).unwrap().certificate.validated);
        validated += 1;
    }
}

#[test]
fn small_set_includes_pairs_straddling_half_the_level() {
    // V(1) exceeds K'/2 but V(0) + V(1) stays below K'
    let m = MarkovModel::finite(
        vec![
            vec![0.9868714386994673, 0.013128561300532804],
            vec![0.2850532633654531, 0.7149467366345469],
        ],
        vec![0.0, 6.174937780563223],
    )
    .unwrap();
    let (gamma, k) = drift_constants(&m).unwrap();
    let k_prime = (2.0 * k + 2.0) / (1.0 - gamma);
    assert!(2.0 * m.lyapunov()[1] > k_prime && m.lyapunov()[1] <= k_prime);
    let delta = small_set_delta(&m, k_prime).unwrap();
    assert!((delta - (2.0 - tv_distance(&m.matrix()[0], &m.matrix()[1]))).abs() < 1e-15);
    let cert = certify(&m).unwrap();
    assert!(contraction_factor(&m, cert.beta).0 <= cert.alpha);
}

#[test]
fn violated_certificate_reports_witness() {
    let m = MarkovModel::finite(vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![0.0, 1.0]).unwrap();
    let mut cert = certify(&m).unwrap();
    cert.alpha = 0.5;
    match contraction_verify(&m, &cert, 3) {
        Err(Error::CertificateViolated { x, y, measured, .. }) => {
            assert_eq!((x, y), (0, 1));
            assert!((measured - 0.7).abs() < 1e-12);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn two_state_decay_matches_second_eigenvalue() {
    let m = MarkovModel::finite(vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![0.0, 1.0]).unwrap();
    let rep = contraction_verify(&m, &certify(&m).unwrap(), 30).unwrap();
    // eigen-decomposition: δ_0 P^n - π = (1/3)(0.7)^n (1, -1)
    let mut d = vec![1.0, 0.0];
    for n in 0..30 {
        let tv = tv_distance(&d, &rep.stationary);
        assert!((tv - 2.0 / 3.0 * 0.7f64.powi(n)).abs() < 1e-12);
        d = m.push_forward(&d);
    }
    for w in rep.decay.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

#[test]
fn gaussian_tv_exceeds_lower_bound() {
    for i in 0..=60 {
        let m = 0.1 * i as f64;
        let exact = gaussian_tv(m);
        assert!((exact - gaussian_tv_quadrature(m)).abs() < 1e-9, "m = {m}");
        assert!(exact >= gaussian_tv_lower_bound(m), "m = {m}");
    }
}

#[test]
fn lattice_drift_converges_under_refinement() {
    let ks: Vec<f64> = [241, 481, 961]
        .iter()
        .map(|&n| {
            let m = MarkovModel::gaussian_ar(0.6, 1.0, 12.0, n, |x| x * x).unwrap();
            let (g, k) = drift_constants(&m).unwrap();
            assert!((g - 0.36).abs() < 1e-12);
            k
        })
        .collect();
    assert!((ks[2] - 1.0).abs() < (ks[1] - 1.0).abs() + 1e-15);
    assert!((ks[2] - 1.0).abs() < 1e-3, "{ks:?}");
}

#[test]
fn lattice_model_certifies_and_contracts() {
    let m = MarkovModel::gaussian_ar(0.5, 1.0, 10.0, 201, |x| x * x).unwrap();
    let cert = certify(&m).unwrap();
    let rep = contraction_verify(&m, &cert, 10).unwrap();
    assert!(rep.c1 <= cert.alpha && cert.alpha < 1.0);
}

#[test]
fn invariant_variances_from_two_starts() {
    let grid = make_grid(1, 8).unwrap();
    let p = LinearProblem::from_fns(
        grid,
        |k| (k[0] * k[0]) as f64 + 1.0,
        |_| 1.0,
        spde_core::linear::InitialCondition::Field(SpectralField::zeros(grid, 1)),
    )
    .unwrap();
    let far = SpectralField::from_fn(grid, 1, |k, _| Complex64::new(3.0 / (1.0 + k[0].abs() as f64), 0.0));
    let rows = empirical_invariant_check(&p, &far, 20_000, 5.0, 13).unwrap();
    let zero = rows.iter().find(|r| r.k == [0, 0] && r.start == "zero").unwrap();
    assert!((zero.target - 0.5).abs() < 1e-15);
    let misses = rows.iter().filter(|r| !r.pass).count();
    assert!(misses <= 1, "{rows:?}");
    assert!(empirical_invariant_check(&p, &far, 100, 4.0, 13).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn certificate_invariants(gamma in 0.001f64..0.999, k in 1e-3f64..1e3, delta in 1e-6f64..=2.0) {
        let c = make_certificate(gamma, k, delta).unwrap();
        prop_assert!(c.beta > 0.0 && c.beta < c.beta_sup());
        let alpha1 = 1.0 - 0.5 * c.beta / (1.0 - gamma + c.beta * k + c.beta);
        // dense scan of both regimes of s = V(x) + V(y) as the oracle
        let (b, kp) = (c.beta, (2.0 * k + 2.0) / (1.0 - gamma));
        let scan = (0..=400)
            .map(|i| {
                let s = kp * i as f64 / 400.0;
                let inside = (2.0 - delta + 2.0 * b * k + b * gamma * s) / (2.0 + b * s);
                let far = kp * (1.0 + 1e3 * i as f64);
                let outside = (2.0 + 2.0 * b * k + b * gamma * far) / (2.0 + b * far);
                inside.max(outside)
            })
            .fold(gamma, f64::max);
        prop_assert!(c.pairwise >= scan * (1.0 - 1e-14));
        prop_assert!(c.pairwise <= scan + 1e-3 * (1.0 - gamma));
        prop_assert_eq!(c.alpha, alpha1.max(1.0 - delta / 2.0).max(c.pairwise));
        prop_assert!(c.alpha < 1.0 && c.alpha > 0.0);
        prop_assert_eq!(c.k_prime, (2.0 * k + 2.0) / (1.0 - gamma));
        prop_assert!(!c.validated);
    }
}

proptest! {
    #[test]
    fn tv_metric_axioms(seed in 0u64..1_000_000) {
        let mut r = rng::stream(seed, 0);
        let n = 5;
        let mut dist = || {
            let w: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let (a, b, c) = (dist(), dist(), dist());
        let v: Vec<f64> = (0..n).map(|i| i as f64 * 1.7).collect();
        prop_assert_eq!(tv_distance(&a, &b), tv_distance(&b, &a));
        prop_assert!(tv_distance(&a, &c) <= (tv_distance(&a, &b) + tv_distance(&b, &c)) * (1.0 + 4.0 * f64::EPSILON));
        prop_assert!(tv_distance(&a, &b) <= weighted_tv_distance(&a, &b, &v));
    }

    #[test]
    fn lip_seminorm_equals_shifted_weighted_norm(seed in 0u64..1_000_000, beta in 0.01f64..2.0) {
        let mut r = rng::stream(seed, 1);
        let phi: Vec<f64> = (0..5).map(|_| r.random_range(-3.0..3.0)).collect();
        let v: Vec<f64> = (0..5).map(|_| r.random_range(0.0..4.0)).collect();
        let lip = lip_beta_seminorm(&phi, &v, beta);
        prop_assert!((shifted_weighted_norm(&phi, &v, beta) - lip).abs() <= 1e-9);
        // oracle: dense scan over the shift
        let scan = (0..=60_000)
            .map(|i| {
                let c = -3.0 + 6.0 * i as f64 / 60_000.0;
                let shifted: Vec<f64> = phi.iter().map(|p| p + c).collect();
                weighted_sup_norm(&shifted, &v, beta)
            })
            .fold(f64::INFINITY, f64::min);
        prop_assert!(scan >= lip - 1e-12 && scan - lip <= 1e-4);
    }
}
