use spde_core::gaussian::*;
use spde_core::io::{read_ensemble, write_ensemble};
use spde_core::rng;
use spde_core::spectral::{make_grid, FourierGrid, SpectralField};
use spde_core::stats::{mean_se, Moments};

fn decaying(grid: FourierGrid) -> GaussianSpec {
    GaussianSpec::from_fn(grid, |k| 1.0 / (1.0 + (k[0] * k[0] + k[1] * k[1]) as f64)).unwrap()
}

fn single_mode() -> GaussianSpec {
    GaussianSpec::from_fn(make_grid(1, 4).unwrap(), |k| if k == [0, 0] { 1.0 } else { 0.0 }).unwrap()
}

#[test]
fn trace_identity() {
    let spec = decaying(make_grid(1, 64).unwrap());
    let norms = spec.sample_norms_sq(7, 100_000);
    let (m, se) = mean_se(&norms);
    assert!((m - spec.trace()).abs() <= 3.0 * se, "{m} ± {se} vs {}", spec.trace());
}

#[test]
fn characteristic_function() {
    let grid = make_grid(1, 16).unwrap();
    let spec = decaying(grid);
    let samples: Vec<SpectralField> = (0..20_000).map(|i| spec.sample(&mut rng::stream(3, i))).collect();
    let lspec = GaussianSpec::white(grid, 0.5).unwrap();
    for j in 0..20 {
        let l = lspec.sample(&mut rng::stream(99, j));
        let target = (-0.5 * spec.functional_variance(&l).unwrap()).exp();
        let vals: Vec<f64> = samples.iter().map(|u| l.inner(u).unwrap().cos()).collect();
        let (m, se) = mean_se(&vals);
        assert!((m - target).abs() <= 3.0 * se, "functional {j}: {m} ± {se} vs {target}");
    }
}

#[test]
fn whitened_coordinates_have_gaussian_kurtosis() {
    let grid = make_grid(1, 8).unwrap();
    let spec = decaying(grid);
    let n = 100_000;
    let idx = grid.index_of([2, 0]).unwrap();
    let s = spec.mode_std()[idx] / std::f64::consts::SQRT_2;
    let xs: Vec<f64> = (0..n).map(|i| spec.sample(&mut rng::stream(5, i)).get(idx, 0).re / s).collect();
    let mut m = Moments::default();
    xs.iter().for_each(|x| m.push(*x));
    let var = m.variance();
    let k = xs.iter().map(|x| (x - m.mean()).powi(4)).sum::<f64>() / n as f64 / (var * var);
    assert!((k - 3.0).abs() <= 3.0 * (24.0 / n as f64).sqrt(), "kurtosis {k}");
}

#[test]
fn fernique_single_mode_moment() {
    let spec = single_mode();
    let norms = spec.sample_norms_sq(11, 1_000_000);
    let r = fernique_from_norms(&spec, &norms, 0.25).unwrap();
    // oracle: trapezoid quadrature of e^{x^2/4} φ(x)
    let h = 1e-3;
    let quad: f64 = (-40_000..=40_000)
        .map(|i| {
            let x = i as f64 * h;
            (0.25 * x * x - 0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() * h
        })
        .sum();
    assert!((quad - 2f64.sqrt()).abs() < 1e-9);
    assert!((r.mean - quad).abs() <= 0.05 * quad, "{}", r.mean);
    assert_eq!(r.threshold, 0.5);
    assert!(r.stable());
    assert_eq!(fernique_from_norms(&spec, &norms, 0.0).unwrap().mean, 1.0);
}

#[test]
fn fernique_stability_around_threshold() {
    let spec = single_mode();
    let norms = spec.sample_norms_sq(12, 1_000_000);
    assert!(fernique_from_norms(&spec, &norms, 0.45).unwrap().stable());
    let above = fernique_from_norms(&spec, &norms, 0.55).unwrap();
    assert!(!above.stable(), "tail rate {}", above.tail_rate);
    let far = fernique_from_norms(&spec, &norms, 0.6).unwrap();
    assert!(!far.stable() && far.monotone_growth(), "{:?}", far.block_medians);
}

#[test]
fn cameron_martin_norm_of_samples_grows_with_modes() {
    let per_mode: Vec<f64> = [16, 32, 64, 128]
        .iter()
        .map(|&n| {
            let grid = make_grid(1, n).unwrap();
            let spec = decaying(grid);
            let v: Vec<f64> = (0..200)
                .map(|i| cameron_martin_norm(&spec, &spec.sample(&mut rng::stream(8, i))).unwrap().powi(2))
                .collect();
            mean_se(&v).0 / grid.len() as f64
        })
        .collect();
    for p in &per_mode {
        assert!((p - 1.0).abs() < 0.05, "{per_mode:?}");
    }
}

#[test]
fn rotation_invariance() {
    let spec = decaying(make_grid(1, 8).unwrap());
    for phi in [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
        let r = rotation_invariance_check(&spec, 2, phi, 100_000).unwrap();
        assert!(r.pass(), "phi {phi}: {r:?}");
    }
}

#[test]
fn dilates_concentrate_on_c_squared() {
    let spec = decaying(make_grid(1, 4098).unwrap());
    let m = 4096;
    let tol = 3.0 * (2.0 / m as f64).sqrt();
    let one = dilate_singularity_diagnostic(&spec, 1.0, m, 4).unwrap();
    assert!((one - 1.0).abs() <= tol, "{one}");
    let two = dilate_singularity_diagnostic(&spec, 2.0, m, 4).unwrap();
    assert!((two - 4.0).abs() <= 4.0 * tol, "{two}");
    assert_eq!(dilate_singularity_diagnostic(&spec, 0.0, m, 4).unwrap(), 0.0);
}

/// Exact Brownian bridge on `[0, 1]` at `2^levels + 1` points.
fn brownian_bridge(levels: u32, seed: u64) -> Vec<f64> {
    let n = 1usize << levels;
    let h = 1.0 / n as f64;
    let mut r = rng::stream(seed, 0);
    let mut w = vec![0.0];
    for _ in 0..n {
        let last = *w.last().unwrap();
        w.push(last + h.sqrt() * rng::normal(&mut r));
    }
    let end = w[n];
    w.iter().enumerate().map(|(i, x)| x - i as f64 * h * end).collect()
}

#[test]
fn brownian_bridge_is_half_holder() {
    let paths: Vec<Vec<f64>> = (0..200).map(|s| brownian_bridge(10, s)).collect();
    let est = holder_exponent_estimate(&paths, &[3, 4, 5, 6, 7, 8, 9, 10], 1.0, false).unwrap();
    assert!((est.alpha - 0.5).abs() <= 0.02, "{}", est.alpha);
}

#[test]
fn smooth_fields_saturate_at_lipschitz() {
    let grid = make_grid(1, 16).unwrap();
    let spec = decaying(grid);
    let paths: Vec<Vec<f64>> = (0..100).map(|i| spec.sample(&mut rng::stream(6, i)).to_physical(0, 1024)).collect();
    let est = holder_exponent_estimate(&paths, &[7, 8, 9, 10], 2.0 * std::f64::consts::PI, true).unwrap();
    assert!(est.alpha >= 0.95, "{}", est.alpha);
}

#[test]
fn ensembles_reproduce_and_round_trip() {
    let spec = decaying(make_grid(2, 8).unwrap());
    let a = SampleEnsemble::generate(&spec, 42, 16);
    let b = SampleEnsemble::generate(&spec, 42, 16);
    assert_eq!(a.fields, b.fields);
    assert_ne!(a.fields, SampleEnsemble::generate(&spec, 43, 16).fields);
    let mut bytes = Vec::new();
    write_ensemble(&mut bytes, spec.grid(), 42, &a.fields).unwrap();
    let back = read_ensemble(bytes.as_slice()).unwrap();
    assert_eq!(back.seed, 42);
    assert_eq!(back.fields, a.fields);
}
