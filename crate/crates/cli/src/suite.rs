//! `verify-all`: every experiment kind at its defaults plus the cross-module
//! property suite.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::time::Instant;

use num_complex::Complex64;
use spde_core::gaussian::{dilate_singularity_diagnostic, rotation_invariance_check, GaussianSpec};
use spde_core::linear::LinearProblem;
use spde_core::rng;
use spde_core::semilinear::{run, strong_errors, MonitorConfig, SemilinearProblem};
use spde_core::spectral::*;
use spde_core::stats::Moments;

use crate::config::{ExperimentConfig, Kind};
use crate::experiments::run_experiment;
use crate::report::{Provenance::*, ReportBundle, Row};

/// Seed used by `verify-all` for every experiment.
pub const VERIFY_SEED: u64 = 1;

/// Default configuration of `kind`, reduced in size when `quick` is set.
pub fn verify_config(kind: Kind, quick: bool) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(kind, VERIFY_SEED);
    if quick {
        let overrides: &[(&str, &str)] = match kind {
            Kind::HeatCovariance => &[("samples", "10000"), ("structure_samples", "4000")],
            Kind::OuLimit => &[("samples", "4000")],
            Kind::Regularity => &[("samples", "200")],
            Kind::ItoIsometry => &[("cases", "20")],
            Kind::AllenCahn => &[("t_end", "10")],
            Kind::NavierStokes => &[("N", "64"), ("t_end", "2")],
            _ => &[],
        };
        for (k, v) in overrides {
            cfg.set(k, v).expect("quick override matches the schema");
        }
    }
    cfg
}

fn rough_field(grid: FourierGrid, decay: f64, seed: u64) -> SpectralField {
    GaussianSpec::from_fn(grid, |k| (1.0 + (k[0] * k[0] + k[1] * k[1]) as f64).powf(-decay / 2.0))
        .expect("positive amplitudes")
        .sample(&mut rng::stream(seed, 0))
}

fn spectral_rows(seed: u64) -> spde_core::Result<Vec<Row>> {
    let mut hermitian = 0.0_f64;
    let mut parseval = 0.0_f64;
    let mut leray = 0.0_f64;
    for i in 0..50 {
        let grid = make_grid(2, 12)?;
        let mut w = rough_field(grid, 0.0, seed + i);
        w.set(grid.zero_index(), 0, Complex64::new(0.0, 0.0));
        let lap = apply_multiplier(&w, &DiagonalOperator::laplacian(grid))?;
        let prod = dealiased_product(&w, &lap)?;
        let vel = biot_savart(&w)?;
        let proj = leray_project(&vel)?;
        for f in [&lap, &prod, &vel, &proj] {
            hermitian = hermitian.max(f.hermitian_defect() / (1.0 + f.norm_sq().sqrt()));
        }
        leray = leray.max(leray_project(&proj)?.max_abs_diff(&proj) / proj.norm_sq().sqrt());

        let dim = 1 + (i as usize % 2);
        let u = rough_field(make_grid(dim, 16)?, 0.3, seed + 1000 + i);
        let vals = u.to_physical(0, 32);
        let direct = vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64;
        parseval = parseval.max((sobolev_norm(&u, 0.0).powi(2) - direct).abs() / direct);
    }
    let mut violations = 0;
    let mut triples = 0;
    let levels: Vec<f64> = (0..=12).map(|i| 0.25 * i as f64).collect();
    let u = rough_field(make_grid(1, 32)?, 0.0, seed + 2000);
    for (a, &s) in levels.iter().enumerate() {
        for (b, &r) in levels.iter().enumerate().skip(a + 1) {
            for &t in levels.iter().skip(b + 1) {
                triples += 1;
                let lhs = sobolev_norm(&u, r).powf(t - s);
                let rhs = sobolev_norm(&u, t).powf(r - s) * sobolev_norm(&u, s).powf(t - r);
                if lhs > rhs * (1.0 + 1e-12) {
                    violations += 1;
                }
            }
        }
    }
    Ok(vec![
        Row::at_most("spectral: Hermitian defect after operations", hermitian, 1e-14, Trivial),
        Row::at_most("spectral: Parseval vs grid quadrature", parseval, 1e-10, DerivedOracle),
        Row::at_most("spectral: Leray idempotence", leray, 4.0 * f64::EPSILON, Trivial),
        Row::at_most(
            format!("spectral: interpolation violations of {triples}"),
            violations as f64,
            0.0,
            Trivial,
        ),
    ])
}

fn gaussian_rows(seed: u64) -> spde_core::Result<Vec<Row>> {
    let decaying = |grid| GaussianSpec::from_fn(grid, |k: [i64; 2]| 1.0 / (1.0 + (k[0] * k[0]) as f64));
    let spec = decaying(make_grid(1, 8)?)?;
    let mut rows = Vec::new();
    for (label, phi) in [("0", 0.0), ("pi/4", FRAC_PI_4), ("pi/2", FRAC_PI_2)] {
        let r = rotation_invariance_check(&spec, seed, phi, 100_000)?;
        rows.push(Row::at_most(format!("gaussian: rotation phi={label} max z"), r.max_z, 3.0, Trivial));
    }
    let m = 4096;
    let wide = decaying(make_grid(1, m + 2)?)?;
    let tol = 3.0 * (2.0 / m as f64).sqrt();
    rows.push(Row::within(
        "gaussian: dilate c=1",
        dilate_singularity_diagnostic(&wide, 1.0, m, seed)?,
        1.0,
        tol,
        DerivedOracle,
    ));
    rows.push(Row::within(
        "gaussian: dilate c=2",
        dilate_singularity_diagnostic(&wide, 2.0, m, seed)?,
        4.0,
        4.0 * tol,
        DerivedOracle,
    ));
    Ok(rows)
}

fn chapman_kolmogorov_rows(seed: u64) -> spde_core::Result<Vec<Row>> {
    let grid = make_grid(1, 8)?;
    let p = LinearProblem::heat(grid, 1.0, 0.5, 1.0)?;
    let (dt, n) = (0.05, 20);
    let fine = p.propagator(dt)?;
    let coarse = p.propagator(n as f64 * dt)?;
    let mut x0 = SpectralField::zeros(grid, 1);
    x0.set_pair([1, 0], 0, Complex64::new(1.0, -0.5))?;
    let idx = grid.index_of([1, 0]).expect("mode on grid");
    let (mut many, mut one) = ([Moments::default(); 2], [Moments::default(); 2]);
    for i in 0..40_000 {
        let mut x = x0.clone();
        let mut r = rng::stream(seed, i);
        for _ in 0..n {
            fine.step(&mut x, &mut r);
        }
        let mut y = x0.clone();
        coarse.step(&mut y, &mut rng::stream(seed ^ 0xc0a5, i));
        for (m, z) in [(&mut many, x.get(idx, 0)), (&mut one, y.get(idx, 0))] {
            m[0].push(z.re);
            m[1].push(z.norm_sqr());
        }
    }
    Ok(["mean", "second moment"]
        .iter()
        .enumerate()
        .map(|(j, label)| {
            let se = (many[j].std_error().powi(2) + one[j].std_error().powi(2)).sqrt();
            Row::within(
                format!("linear: Chapman-Kolmogorov {label}"),
                many[j].mean(),
                one[j].mean(),
                3.0 * se,
                DerivedOracle,
            )
        })
        .collect())
}

fn integrator_rows(seed: u64) -> spde_core::Result<Vec<Row>> {
    let grid = make_grid(1, 4)?;
    let c = 0.8;
    let mut u0 = SpectralField::zeros(grid, 1);
    u0.set_pair([1, 0], 0, Complex64::new(1.0, 0.0))?;
    let idx = grid.index_of([1, 0]).expect("mode on grid");
    let mut errs = Vec::new();
    for dt in [0.1, 0.05, 0.025, 0.0125] {
        let p = SemilinearProblem::reaction(grid, 1.0, vec![0.0, -c], |_| 0.0, u0.clone(), dt, 1.0)?;
        let res = run(&p, &MonitorConfig::default(), &mut rng::stream(seed, 0))?;
        errs.push((res.final_state.get(idx, 0).re - (-(1.0 + c)).exp()).abs());
    }
    let mut rows: Vec<Row> = errs
        .windows(2)
        .enumerate()
        .map(|(m, w)| {
            Row::within(
                format!("semilinear: deterministic error ratio {m}"),
                w[0] / w[1],
                2.0,
                0.2,
                DerivedOracle,
            )
        })
        .collect();

    let grid = make_grid(1, 128)?;
    let mut u0 = SpectralField::zeros(grid, 1);
    u0.set_pair([1, 0], 0, Complex64::new(0.25, 0.0))?;
    let p = SemilinearProblem::reaction(
        grid,
        1.0,
        vec![0.0, 1.0, 0.0, -1.0],
        |k| 0.5 / (1.0 + (k[0] * k[0]) as f64),
        u0,
        0.1,
        1.0,
    )?;
    let errs = strong_errors(&p, 3, 100, seed)?;
    rows.extend(
        errs.windows(2)
            .enumerate()
            .map(|(m, w)| Row::within(format!("semilinear: strong error ratio {m}"), w[0] / w[1], 2.0, 0.3, DerivedOracle)),
    );
    Ok(rows)
}

/// Cross-module invariants that carry no closed-form target of their own.
pub fn property_suite(seed: u64) -> spde_core::Result<ReportBundle> {
    let start = Instant::now();
    let mut rows = spectral_rows(seed)?;
    rows.extend(gaussian_rows(seed)?);
    rows.extend(chapman_kolmogorov_rows(seed)?);
    rows.extend(integrator_rows(seed)?);
    Ok(ReportBundle {
        kind: "property-suite".into(),
        config_echo: format!("seed = {seed}\n"),
        rows,
        extra_files: Vec::new(),
        wall_clock: start.elapsed(),
    })
}

/// Runs every experiment kind and the property suite, in a fixed order.
pub fn verify_all(quick: bool) -> spde_core::Result<Vec<ReportBundle>> {
    let mut out = Vec::new();
    for kind in Kind::ALL {
        out.push(run_experiment(&verify_config(kind, quick))?);
    }
    out.push(property_suite(VERIFY_SEED)?);
    Ok(out)
}
