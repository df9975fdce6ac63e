//! Exact simulation of `dx = -Λ x dt + Q dW` with diagonal `Λ, Q`, and the
//! covariance, regularity and invariant-measure checks built on it.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::gaussian::{self, GaussianSpec, HolderEstimate};
use crate::io::{fmt_f64, Csv};
use crate::rng;
use crate::spectral::{sobolev_norm, FourierGrid, SpectralField};
use crate::stats::{self, LinearFit, Moments};
use crate::stochastic::{ou_decay, ou_noise_variance, OuPropagator};

/// Initial datum of a linear problem.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Field(SpectralField),
    Gaussian(GaussianSpec),
}

/// Linear SPDE with generator symbol `-λ_k` and noise amplitudes `q_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProblem {
    grid: FourierGrid,
    lambda: Vec<f64>,
    q: Vec<f64>,
    initial: InitialCondition,
}

impl LinearProblem {
    pub fn new(grid: FourierGrid, lambda: Vec<f64>, q: Vec<f64>, initial: InitialCondition) -> Result<Self> {
        if lambda.len() != grid.len() || q.len() != grid.len() {
            return Err(invalid("lambda/q", "length does not match the grid"));
        }
        for idx in 0..grid.len() {
            let m = grid.mirror(idx);
            if !(lambda[idx] >= 0.0 && lambda[idx].is_finite()) || !(q[idx] >= 0.0 && q[idx].is_finite()) {
                return Err(invalid(
                    "lambda/q",
                    format!("must be finite and non-negative at {:?}", grid.wavevector(idx)),
                ));
            }
            if lambda[idx] != lambda[m] || q[idx] != q[m] {
                return Err(invalid(
                    "lambda/q",
                    format!("not symmetric under k -> -k at {:?}", grid.wavevector(idx)),
                ));
            }
        }
        match &initial {
            InitialCondition::Field(f) if f.grid() != &grid || f.components() != 1 => {
                return Err(Error::GridMismatch("initial field".into()))
            }
            InitialCondition::Gaussian(s) if s.grid() != &grid => return Err(Error::GridMismatch("initial law".into())),
            _ => {}
        }
        Ok(Self { grid, lambda, q, initial })
    }

    pub fn from_fns<L, Q>(grid: FourierGrid, lambda: L, q: Q, initial: InitialCondition) -> Result<Self>
    where
        L: Fn([i64; 2]) -> f64,
        Q: Fn([i64; 2]) -> f64,
    {
        let lam = (0..grid.len()).map(|i| lambda(grid.wavevector(i))).collect();
        let qs = (0..grid.len()).map(|i| q(grid.wavevector(i))).collect();
        Self::new(grid, lam, qs, initial)
    }

    /// `du = (ν Δ - m) u dt + q dW` started from zero.
    pub fn heat(grid: FourierGrid, nu: f64, mass: f64, q: f64) -> Result<Self> {
        Self::from_fns(
            grid,
            |k| nu * (k[0] * k[0] + k[1] * k[1]) as f64 + mass,
            |_| q,
            InitialCondition::Field(SpectralField::zeros(grid, 1)),
        )
    }

    /// `du = (ν ∂_x^2 - m) u dt + ξ` with standard space-time white noise on
    /// a circle of circumference `2πR`, written on the reference torus:
    /// `λ_k = ν (k/R)^2 + m`, `q_k^2 = 1 / (2πR)`.
    pub fn line_scaled_heat(grid: FourierGrid, nu: f64, mass: f64, radius: f64) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(Error::UnsupportedDimension(grid.dim()));
        }
        if !(radius > 0.0) {
            return Err(invalid("radius", "must be positive"));
        }
        let q = (2.0 * PI * radius).powf(-0.5);
        Self::from_fns(
            grid,
            |k| nu * (k[0] as f64 / radius).powi(2) + mass,
            |_| q,
            InitialCondition::Field(SpectralField::zeros(grid, 1)),
        )
    }

    pub fn with_initial(mut self, initial: InitialCondition) -> Result<Self> {
        let grid = self.grid;
        self.initial = initial;
        Self::new(grid, self.lambda, self.q, self.initial)
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn initial(&self) -> &InitialCondition {
        &self.initial
    }

    /// First mode that is forced but undamped, if any.
    pub fn non_dissipative_mode(&self) -> Option<[i64; 2]> {
        (0..self.grid.len())
            .find(|&i| self.lambda[i] == 0.0 && self.q[i] > 0.0)
            .map(|i| self.grid.wavevector(i))
    }

    pub fn is_dissipative(&self) -> bool {
        self.non_dissipative_mode().is_none()
    }

    /// Smallest damping rate among forced modes.
    pub fn min_forced_lambda(&self) -> f64 {
        (0..self.grid.len())
            .filter(|&i| self.q[i] > 0.0)
            .map(|i| self.lambda[i])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sample_initial<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> SpectralField {
        match &self.initial {
            InitialCondition::Field(f) => f.clone(),
            InitialCondition::Gaussian(s) => s.sample(rng),
        }
    }

    pub fn propagator(&self, dt: f64) -> Result<OuPropagator> {
        OuPropagator::new(self.grid, &self.lambda, &self.q, dt)
    }

    /// Law at `t = ∞` of the damped modes; undamped modes get variance 0.
    /// Used as a stationary start when the zero mode is a Brownian motion.
    pub fn stationary_part(&self) -> GaussianSpec {
        let var = (0..self.grid.len())
            .map(|i| {
                if self.lambda[i] > 0.0 {
                    self.q[i].powi(2) / (2.0 * self.lambda[i])
                } else {
                    0.0
                }
            })
            .collect();
        GaussianSpec::from_variances(self.grid, var).expect("non-negative and symmetric")
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || !(times[0] >= 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::UnsortedTimes);
    }
    Ok(())
}

/// Exact samples of the solution at the given times; the initial datum is
/// drawn first from `rng`, then one exact OU transition per interval.
pub fn evolve_exact<R: rand::Rng + ?Sized>(p: &LinearProblem, times: &[f64], rng: &mut R) -> Result<Vec<SpectralField>> {
    check_times(times)?;
    let mut x = p.sample_initial(rng);
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t > now {
            p.propagator(t - now)?.step(&mut x, rng);
            now = t;
        }
        out.push(x.clone());
    }
    Ok(out)
}

/// Trajectory on a uniform time grid together with the cumulative Wiener
/// process that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedTrajectory {
    pub dt: f64,
    pub states: Vec<SpectralField>,
    /// `W(t_n)`, with `W(0) = 0`.
    pub wiener: Vec<SpectralField>,
}

impl RecordedTrajectory {
    /// The same path observed every `factor` steps.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !(self.states.len() - 1).is_multiple_of(factor) {
            return Err(invalid("factor", "must divide the number of steps"));
        }
        Ok(Self {
            dt: self.dt * factor as f64,
            states: self.states.iter().step_by(factor).cloned().collect(),
            wiener: self.wiener.iter().step_by(factor).cloned().collect(),
        })
    }
}

/// Exact trajectory with stored increments: each step jointly samples the
/// stochastic convolution and the Wiener increment over the step.
pub fn evolve_recorded<R: rand::Rng + ?Sized>(p: &LinearProblem, dt: f64, steps: usize, rng: &mut R) -> Result<RecordedTrajectory> {
    let prop = p.propagator(dt)?;
    let mut x = p.sample_initial(rng);
    let mut w = SpectralField::zeros(p.grid, 1);
    let mut states = vec![x.clone()];
    let mut wiener = vec![w.clone()];
    for _ in 0..steps {
        let (eta, dw) = prop.sample_joint(rng);
        prop.apply(&mut x, &eta);
        w.axpy(1.0, &dw)?;
        states.push(x.clone());
        wiener.push(w.clone());
    }
    Ok(RecordedTrajectory { dt, states, wiener })
}

/// `max_k |x_k(T) - x_k(0) + λ_k ∫_0^T x_k ds - q_k W_k(T)|` with the time
/// integral by the trapezoid rule, over `modes` (all modes when `None`).
pub fn weak_form_residual(p: &LinearProblem, traj: &RecordedTrajectory, modes: Option<&[usize]>) -> Result<f64> {
    if traj.states.len() != traj.wiener.len() || traj.states.is_empty() {
        return Err(Error::InsufficientData("trajectory lacks stored increments".into()));
    }
    let all: Vec<usize> = (0..p.grid.len()).collect();
    let modes = modes.unwrap_or(&all);
    let n = traj.states.len() - 1;
    let mut worst = 0.0_f64;
    for &idx in modes {
        let first = traj.states[0].get(idx, 0);
        let last = traj.states[n].get(idx, 0);
        let interior: num_complex::Complex64 = traj.states[1..n.max(1)].iter().map(|s| s.get(idx, 0)).sum();
        let integral = if n == 0 {
            first * 0.0
        } else {
            ((first + last) * 0.5 + interior) * traj.dt
        };
        let r = last - first + integral * p.lambda[idx] - traj.wiener[n].get(idx, 0) * p.q[idx];
        worst = worst.max(r.norm());
    }
    Ok(worst)
}

/// Full-line temporal covariance at `x = 0` in the closed form
/// `½(√(s+t) - √|s-t|)`.
pub fn heat_time_covariance_target(s: f64, t: f64) -> Result<f64> {
    if !(s >= 0.0 && t >= 0.0) {
        return Err(invalid("s/t", "times must be non-negative"));
    }
    Ok(0.5 * ((s + t).sqrt() - (s - t).abs().sqrt()))
}

/// `E u(s,0) u(t,0)` for `∂_t u = ∂_x^2 u + ξ` on the line with standard
/// space-time white noise: `(4π)^{-1/2}(√(s+t) - √|s-t|)`.
pub fn heat_time_covariance_line(s: f64, t: f64) -> Result<f64> {
    Ok(heat_time_covariance_target(s, t)? * 2.0 / (4.0 * PI).sqrt())
}

/// Same quantity on the circle of circumference `2πR` truncated to `p`'s
/// modes (exact for the simulated system).
pub fn heat_time_covariance_truncated(p: &LinearProblem, s: f64, t: f64) -> f64 {
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    (0..p.grid.len())
        .map(|i| ou_decay(p.lambda[i], hi - lo) * ou_noise_variance(p.lambda[i], p.q[i], lo))
        .sum()
}

/// One compared quantity of a covariance check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceRow {
    pub a: f64,
    pub b: f64,
    pub empirical: f64,
    pub se: f64,
    pub target: f64,
    pub pass: bool,
}

impl CovarianceRow {
    pub fn new(a: f64, b: f64, empirical: f64, se: f64, target: f64) -> Self {
        Self {
            a,
            b,
            empirical,
            se,
            target,
            pass: (empirical - target).abs() <= 3.0 * se,
        }
    }
}

/// Empirical covariances against analytic targets; a row passes when it is
/// within three standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    /// Names of the two parameters `a`, `b` (e.g. `s`, `t` or `x`, `y`).
    pub params: [&'static str; 2],
    pub rows: Vec<CovarianceRow>,
}

impl CovarianceReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&[self.params[0], self.params[1], "empirical", "se", "target", "pass"]);
        for r in &self.rows {
            csv.row(&[
                fmt_f64(r.a),
                fmt_f64(r.b),
                fmt_f64(r.empirical),
                fmt_f64(r.se),
                fmt_f64(r.target),
                r.pass.to_string(),
            ]);
        }
        csv.into_string()
    }
}

/// Settings for the large-torus heat covariance experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatCovarianceConfig {
    pub modes: usize,
    pub nu: f64,
    pub radius: f64,
    /// `(s, t)` pairs for `E u(s,0) u(t,0)`.
    pub pairs: Vec<(f64, f64)>,
    pub samples: usize,
    /// Base time and lags for `E|u(base,0) - u(base+h,0)|^2`.
    pub structure_base: f64,
    pub structure_lags: Vec<f64>,
    pub structure_samples: usize,
    pub seed: u64,
}

impl Default for HeatCovarianceConfig {
    fn default() -> Self {
        Self {
            modes: 1024,
            nu: 1.0,
            radius: 3.0,
            pairs: vec![(1.0, 1.0), (1.0, 2.0), (0.5, 1.0), (0.0, 1.0)],
            samples: 100_000,
            structure_base: 1.0,
            structure_lags: (2..=6).map(|j| 2f64.powi(-j)).collect(),
            structure_samples: 20_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatCovarianceResult {
    /// Against [`heat_time_covariance_target`].
    pub closed_form: CovarianceReport,
    /// Against [`heat_time_covariance_line`].
    pub line: CovarianceReport,
    /// `(h, E|u(s,0) - u(s+h,0)|^2, se)`.
    pub structure: Vec<(f64, f64, f64)>,
    pub structure_fit: LinearFit,
    /// Relative size of the periodic-image terms neglected by the comparison.
    pub wrap_bound: f64,
}

/// Upper bound on the relative periodic-image contribution to the heat
/// kernel on a circle of circumference `2πR` up to time `t_max`.
pub fn heat_wrap_bound(nu: f64, radius: f64, t_max: f64) -> f64 {
    2.0 * (-(PI * radius).powi(2) / (2.0 * nu * t_max)).exp()
}

/// Samples of `u(t_j, 0)` for sorted `times`, one row per trajectory.
/// `u(t,0) = Σ_k u_k(t)` only involves the real parts of the modes, so only
/// those are simulated (each an exact real OU chain).
fn heat_point_paths(p: &LinearProblem, times: &[f64], samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let grid = p.grid;
    let zero = grid.zero_index();
    let half = grid.half_plane();
    let steps: Vec<f64> = times
        .iter()
        .scan(0.0, |prev, &t| {
            let d = t - *prev;
            *prev = t;
            Some(d)
        })
        .collect();
    // per mode and interval: (decay, noise std)
    let chain = |idx: usize, weight: f64| -> Vec<(f64, f64)> {
        steps
            .iter()
            .map(|&d| {
                let v = if d > 0.0 {
                    ou_noise_variance(p.lambda[idx], p.q[idx], d)
                } else {
                    0.0
                };
                (ou_decay(p.lambda[idx], d), (weight * v).sqrt())
            })
            .collect()
    };
    let mut coeffs = vec![(1.0, chain(zero, 1.0))];
    coeffs.extend(half.iter().map(|&i| (2.0, chain(i, 0.5))));
    (0..samples)
        .into_par_iter()
        .map(|n| {
            let mut r = rng::stream(seed, n as u64);
            let mut u = vec![0.0; times.len()];
            for (weight, c) in &coeffs {
                let mut x = 0.0;
                for (j, &(decay, std)) in c.iter().enumerate() {
                    x = decay * x + std * rng::normal(&mut r);
                    u[j] += weight * x;
                }
            }
            u
        })
        .collect()
}

pub fn verify_heat_covariance(cfg: &HeatCovarianceConfig) -> Result<HeatCovarianceResult> {
    let grid = FourierGrid::new(1, cfg.modes)?;
    let p = LinearProblem::line_scaled_heat(grid, cfg.nu, 0.0, cfg.radius)?;
    if cfg.samples < 2 || cfg.structure_samples < 2 {
        return Err(invalid("samples", "need at least two trajectories"));
    }
    if cfg.structure_lags.len() < 3 {
        return Err(invalid("structure_lags", "need at least three lags"));
    }
    let mut times: Vec<f64> = cfg.pairs.iter().flat_map(|&(s, t)| [s, t]).collect();
    if times.iter().any(|t| !(*t >= 0.0)) || cfg.structure_lags.iter().any(|h| !(*h > 0.0)) {
        return Err(invalid("times", "must be non-negative, lags positive"));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let t_max = times
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(cfg.structure_base + cfg.structure_lags.iter().fold(0.0_f64, |m, h| m.max(*h)));
    let wrap_bound = heat_wrap_bound(cfg.nu, cfg.radius, t_max);
    if wrap_bound > 1e-6 {
        return Err(invalid(
            "radius",
            format!("periodic images contribute up to {wrap_bound:e} at t = {t_max}; enlarge the torus"),
        ));
    }

    let paths = heat_point_paths(&p, &times, cfg.samples, cfg.seed);
    let pos = |t: f64| times.iter().position(|&v| v == t).expect("time present");
    let mut closed_form = Vec::new();
    let mut line = Vec::new();
    for &(s, t) in &cfg.pairs {
        let (i, j) = (pos(s), pos(t));
        let prods: Vec<f64> = paths.iter().map(|u| u[i] * u[j]).collect();
        let (m, se) = stats::mean_se(&prods);
        closed_form.push(CovarianceRow::new(s, t, m, se, heat_time_covariance_target(s, t)?));
        line.push(CovarianceRow::new(s, t, m, se, heat_time_covariance_line(s, t)?));
    }

    let mut stimes = vec![cfg.structure_base];
    stimes.extend(cfg.structure_lags.iter().map(|h| cfg.structure_base + h));
    stimes.sort_by(f64::total_cmp);
    stimes.dedup();
    if cfg.structure_base == 0.0 {
        stimes.retain(|&t| t > 0.0);
        stimes.insert(0, 0.0);
    }
    let spaths = heat_point_paths(&p, &stimes, cfg.structure_samples, cfg.seed ^ 0x5eed);
    let base = stimes.iter().position(|&v| v == cfg.structure_base).expect("base present");
    let mut structure = Vec::new();
    for &h in &cfg.structure_lags {
        let j = stimes.iter().position(|&v| v == cfg.structure_base + h).expect("lag present");
        let sq: Vec<f64> = spaths.iter().map(|u| (u[j] - u[base]).powi(2)).collect();
        let (m, se) = stats::mean_se(&sq);
        structure.push((h, m, se));
    }
    let x: Vec<f64> = structure.iter().map(|s| s.0.ln()).collect();
    let y: Vec<f64> = structure.iter().map(|s| s.1.ln()).collect();
    Ok(HeatCovarianceResult {
        closed_form: CovarianceReport {
            params: ["s", "t"],
            rows: closed_form,
        },
        line: CovarianceReport {
            params: ["s", "t"],
            rows: line,
        },
        structure,
        structure_fit: stats::linear_fit(&x, &y),
        wrap_bound,
    })
}

/// Stationary spatial covariance `C e^{-c r}` of `∂_t u = ∂_x^2 u - a u + ξ`
/// on the line, `C = 1/(4√a)`, `c = √a`.
pub fn ou_limit_target(a: f64, r: f64) -> Result<f64> {
    let (c_amp, rate) = ou_limit_constants(a)?;
    Ok(c_amp * (-rate * r.abs()).exp())
}

/// `(C, c) = (1/(4√a), √a)`.
pub fn ou_limit_constants(a: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid("a", "must be positive"));
    }
    Ok((0.25 / a.sqrt(), a.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuLimitConfig {
    pub a: f64,
    pub modes: usize,
    pub radius: f64,
    /// Simulated time in units of `1/a`.
    pub relax_multiplier: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for OuLimitConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            modes: 512,
            radius: 2.0,
            relax_multiplier: 10.0,
            samples: 10_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuLimitResult {
    /// Spatially averaged covariance per lag `r` against `C e^{-c r}`.
    pub report: CovarianceReport,
    pub fitted_amplitude: f64,
    pub fitted_rate: f64,
    pub fit: LinearFit,
}

/// Runs to time `relax_multiplier / a` from zero, evaluates each sample on
/// `modes` grid points of the circle and fits `ln cov(r)` linearly over
/// `r ∈ [2Δx, 2/c]`.
pub fn verify_ou_limit(cfg: &OuLimitConfig) -> Result<OuLimitResult> {
    let (amp, rate) = ou_limit_constants(cfg.a)?;
    if !(cfg.relax_multiplier >= 5.0) {
        return Err(invalid("relax_multiplier", "relaxation time must be at least 5/a"));
    }
    if cfg.samples < 2 {
        return Err(invalid("samples", "need at least two samples"));
    }
    let grid = FourierGrid::new(1, cfg.modes)?;
    let p = LinearProblem::line_scaled_heat(grid, 1.0, cfg.a, cfg.radius)?;
    let points = cfg.modes;
    let dx = 2.0 * PI * cfg.radius / points as f64;
    let max_lag = ((2.0 / rate) / dx).floor() as usize;
    if max_lag < 4 || max_lag >= points / 2 {
        return Err(invalid("radius/modes", "fit window does not fit the grid"));
    }
    let prop = p.propagator(cfg.relax_multiplier / cfg.a)?;
    let per_sample: Vec<Vec<f64>> = (0..cfg.samples)
        .into_par_iter()
        .map(|n| {
            let mut r = rng::stream(cfg.seed, n as u64);
            let mut x = p.sample_initial(&mut r);
            prop.step(&mut x, &mut r);
            let u = x.to_physical(0, points);
            (0..=max_lag)
                .map(|lag| (0..points).map(|j| u[j] * u[(j + lag) % points]).sum::<f64>() / points as f64)
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for lag in 0..=max_lag {
        let col: Vec<f64> = per_sample.iter().map(|v| v[lag]).collect();
        let (m, se) = stats::mean_se(&col);
        let r = lag as f64 * dx;
        rows.push(CovarianceRow::new(r, 0.0, m, se, amp * (-rate * r).exp()));
    }
    let window: Vec<&CovarianceRow> = rows[2..].iter().filter(|r| r.empirical > 0.0).collect();
    if window.len() < 3 {
        return Err(Error::InsufficientData("covariance not positive over the fit window".into()));
    }
    let x: Vec<f64> = window.iter().map(|r| r.a).collect();
    let y: Vec<f64> = window.iter().map(|r| r.empirical.ln()).collect();
    let fit = stats::linear_fit(&x, &y);
    Ok(OuLimitResult {
        report: CovarianceReport {
            params: ["r", "unused"],
            rows,
        },
        fitted_amplitude: fit.intercept.exp(),
        fitted_rate: -fit.slope,
        fit,
    })
}

/// Invariant law `N(0, Q_∞)` with `σ_k^2 = q_k^2 / (2λ_k)`, and `tr Q_∞`.
pub fn invariant_covariance(p: &LinearProblem) -> Result<(GaussianSpec, f64)> {
    if let Some(k) = p.non_dissipative_mode() {
        return Err(Error::NonDissipative(k));
    }
    let spec = p.stationary_part();
    let trace = spec.trace();
    Ok((spec, trace))
}

/// `max_x |2 Re<Q_∞ L^* x, x> + ‖Q^* x‖^2| / ‖x‖^2` over the probes; per
/// mode the summand is `(q_k^2 - 2λ_k σ_k^2)|x_k|^2`.
pub fn lyapunov_identity_residual(p: &LinearProblem, q_inf: &GaussianSpec, probes: &[SpectralField]) -> Result<f64> {
    if q_inf.grid() != p.grid() {
        return Err(Error::GridMismatch("covariance and problem".into()));
    }
    let mut worst = 0.0_f64;
    for x in probes {
        if x.grid() != p.grid() {
            return Err(Error::GridMismatch("probe".into()));
        }
        let norm = x.norm_sq();
        if norm == 0.0 {
            continue;
        }
        let s: f64 = (0..p.grid.len())
            .map(|i| (p.q[i].powi(2) - 2.0 * p.lambda[i] * q_inf.variance(i)) * x.get(i, 0).norm_sqr())
            .sum();
        worst = worst.max(s.abs() / norm);
    }
    Ok(worst)
}

/// Mean of `‖x(t)‖^2_{H^s}` restricted to a sub-grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityRow {
    pub modes: usize,
    pub s: f64,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Saturates,
    Grows,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub rows: Vec<RegularityRow>,
    /// Per `s`: ratios of successive increments under refinement and the
    /// resulting verdict.
    pub verdicts: Vec<(f64, Vec<f64>, Verdict)>,
    /// `½ + α - 1/4` limit of the admissible range, i.e. `1/4 + α`.
    pub gamma0: f64,
    /// Exponent of `h ↦ (E‖x(t+h) - x(t)‖^2)^{1/2}` and its prediction
    /// `min(½, γ_0)`.
    pub time_holder: Option<(HolderEstimate, f64)>,
}

impl RegularityReport {
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["modes", "s", "mean", "se"]);
        for r in &self.rows {
            csv.row(&[r.modes.to_string(), fmt_f64(r.s), fmt_f64(r.mean), fmt_f64(r.se)]);
        }
        csv.into_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityConfig {
    /// Noise smoothness: `q_k = (1 + k^2)^{-α}`.
    pub alpha: f64,
    pub nu: f64,
    pub mass: f64,
    /// Refinement ladder; the finest entry is simulated, coarser grids are
    /// its nested truncations (same low-mode noise).
    pub modes: Vec<usize>,
    pub sobolev: Vec<f64>,
    pub time: f64,
    pub samples: usize,
    /// Time-Hölder estimate: step, number of steps, lag levels `h = dt·2^j`.
    pub holder_dt: f64,
    pub holder_steps: usize,
    pub holder_paths: usize,
    pub seed: u64,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            nu: 1.0,
            mass: 1.0,
            modes: vec![128, 256, 512, 1024],
            sobolev: vec![0.4, 0.6],
            time: 1.0,
            samples: 400,
            holder_dt: 2f64.powi(-12),
            holder_steps: 512,
            holder_paths: 100,
            seed: 1,
        }
    }
}

/// Sobolev norms under refinement and the time-Hölder exponent for the d = 1
/// heat equation `du = (ν ∂_x^2 - m) u dt + Q dW`, `q_k = (1+k^2)^{-α}`.
pub fn regularity_report(cfg: &RegularityConfig) -> Result<RegularityReport> {
    let finest = *cfg.modes.iter().max().ok_or_else(|| invalid("modes", "empty refinement ladder"))?;
    if cfg.modes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("modes", "must be strictly increasing"));
    }
    if cfg.samples < 2 {
        return Err(invalid("samples", "need at least two samples"));
    }
    let grid = FourierGrid::new(1, finest)?;
    let p = LinearProblem::from_fns(
        grid,
        |k| cfg.nu * (k[0] * k[0]) as f64 + cfg.mass,
        |k| (1.0 + (k[0] * k[0]) as f64).powf(-cfg.alpha),
        InitialCondition::Field(SpectralField::zeros(grid, 1)),
    )?;
    let prop = p.propagator(cfg.time)?;
    let per_sample: Vec<Vec<f64>> = (0..cfg.samples)
        .into_par_iter()
        .map(|n| {
            let mut r = rng::stream(cfg.seed, n as u64);
            let mut x = p.sample_initial(&mut r);
            prop.step(&mut x, &mut r);
            let mut out = Vec::with_capacity(cfg.modes.len() * cfg.sobolev.len());
            for &m in &cfg.modes {
                let sub = truncate(&x, m);
                for &s in &cfg.sobolev {
                    out.push(sobolev_norm(&sub, s).powi(2));
                }
            }
            out
        })
        .collect();

    let ns = cfg.sobolev.len();
    let mut rows = Vec::new();
    for (mi, &m) in cfg.modes.iter().enumerate() {
        for (si, &s) in cfg.sobolev.iter().enumerate() {
            let col: Vec<f64> = per_sample.iter().map(|v| v[mi * ns + si]).collect();
            let (mean, se) = stats::mean_se(&col);
            rows.push(RegularityRow { modes: m, s, mean, se });
        }
    }
    let mut verdicts = Vec::new();
    for (si, &s) in cfg.sobolev.iter().enumerate() {
        // band increments computed per sample so their noise is small
        let incs: Vec<f64> = (1..cfg.modes.len())
            .map(|mi| per_sample.iter().map(|v| v[mi * ns + si] - v[(mi - 1) * ns + si]).sum::<f64>() / cfg.samples as f64)
            .collect();
        let ratios: Vec<f64> = incs.windows(2).map(|w| w[1] / w[0]).collect();
        let verdict = if ratios.is_empty() {
            Verdict::Inconclusive
        } else if ratios.iter().all(|r| *r < 1.0) {
            Verdict::Saturates
        } else if ratios.iter().all(|r| *r > 1.0) && incs.iter().all(|d| *d > 0.0) {
            Verdict::Grows
        } else {
            Verdict::Inconclusive
        };
        verdicts.push((s, ratios, verdict));
    }

    let gamma0 = 0.25 + cfg.alpha;
    let time_holder = if cfg.holder_paths > 0 && cfg.holder_steps >= 8 {
        let est = l2_time_holder(&p, cfg.holder_dt, cfg.holder_steps, cfg.holder_paths, cfg.seed ^ 0x7)?;
        Some((est, gamma0.min(0.5)))
    } else {
        None
    };
    Ok(RegularityReport {
        rows,
        verdicts,
        gamma0,
        time_holder,
    })
}

/// Restriction of a scalar 1-D field to the modes of a coarser grid.
fn truncate(x: &SpectralField, modes: usize) -> SpectralField {
    let coarse = FourierGrid::new(x.grid().dim(), modes).expect("valid ladder");
    SpectralField::from_fn(coarse, 1, |k, _| x.coeff(k, 0).expect("coarse mode retained"))
}

/// Stationary start (damped modes), exact steps of size `dt`, lags `dt·2^j`.
fn l2_time_holder(p: &LinearProblem, dt: f64, steps: usize, paths: usize, seed: u64) -> Result<HolderEstimate> {
    let prop = p.propagator(dt)?;
    let start = p.stationary_part();
    let lags: Vec<usize> = (0..).map(|j| 1usize << j).take_while(|l| *l <= steps / 4).collect();
    let sums: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|n| {
            let mut r = rng::stream(seed, n as u64);
            let mut x = start.sample(&mut r);
            let mut states = vec![x.clone()];
            for _ in 0..steps {
                prop.step(&mut x, &mut r);
                states.push(x.clone());
            }
            lags.iter()
                .map(|&l| {
                    let pairs = steps + 1 - l;
                    (0..pairs)
                        .map(|i| {
                            let mut d = states[i + l].clone();
                            d.axpy(-1.0, &states[i]).expect("same grid");
                            d.norm_sq()
                        })
                        .sum::<f64>()
                        / pairs as f64
                })
                .collect()
        })
        .collect();
    let points = lags
        .iter()
        .enumerate()
        .map(|(j, &l)| (l as f64 * dt, sums.iter().map(|v| v[j]).sum::<f64>() / paths as f64))
        .collect();
    gaussian::holder_from_points(points)
}

/// Values `u(t, x_j)` of independent trajectories started from
/// `p.stationary_part()`, at `x_points` equispaced points, on the time grid
/// `0, dt, ..., steps·dt`; one output path per (trajectory, point).
pub fn sample_time_paths(
    p: &LinearProblem,
    dt: f64,
    steps: usize,
    trajectories: usize,
    x_points: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let prop = p.propagator(dt)?;
    let start = p.stationary_part();
    let points = p.grid.modes_per_dim();
    if x_points == 0 || x_points > points {
        return Err(invalid("x_points", "must be between 1 and the grid size"));
    }
    let stride = points / x_points;
    let per: Vec<Vec<Vec<f64>>> = (0..trajectories)
        .into_par_iter()
        .map(|n| {
            let mut r = rng::stream(seed, n as u64);
            let mut x = start.sample(&mut r);
            let mut out = vec![Vec::with_capacity(steps + 1); x_points];
            for step in 0..=steps {
                if step > 0 {
                    prop.step(&mut x, &mut r);
                }
                let u = x.to_physical(0, points);
                for (j, path) in out.iter_mut().enumerate() {
                    path.push(u[j * stride]);
                }
            }
            out
        })
        .collect();
    Ok(per.into_iter().flatten().collect())
}

/// Spatial profiles `u(t, ·)` on the `N`-point grid for independent
/// trajectories started from `p.stationary_part()`.
pub fn sample_space_slices(p: &LinearProblem, t: f64, trajectories: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let prop = p.propagator(t)?;
    let start = p.stationary_part();
    let points = p.grid.modes_per_dim();
    Ok((0..trajectories)
        .into_par_iter()
        .map(|n| {
            let mut r = rng::stream(seed, n as u64);
            let mut x = start.sample(&mut r);
            prop.step(&mut x, &mut r);
            x.to_physical(0, points)
        })
        .collect())
}

/// Empirical `E|x_k(t)|^2` per mode over `samples` exact trajectories.
pub fn mode_second_moments(p: &LinearProblem, t: f64, samples: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    if samples < 2 {
        return Err(invalid("samples", "need at least two samples"));
    }
    let n = p.grid.len();
    let acc = (0..samples)
        .into_par_iter()
        .map(|s| -> Result<Vec<Moments>> {
            let mut r = rng::stream(seed, s as u64);
            let x = evolve_exact(p, &[t], &mut r)?.pop().expect("one time");
            Ok((0..n)
                .map(|i| {
                    let mut m = Moments::default();
                    m.push(x.get(i, 0).norm_sqr());
                    m
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![Moments::default(); n];
    for v in &acc {
        for (t, m) in total.iter_mut().zip(v) {
            t.merge(m);
        }
    }
    Ok(total.iter().map(|m| (m.mean(), m.std_error())).collect())
}

/// Exact `E|x_k(t)|^2` for a fixed or Gaussian initial datum.
pub fn exact_second_moment(p: &LinearProblem, idx: usize, t: f64) -> f64 {
    let d = ou_decay(p.lambda[idx], t);
    let init = match &p.initial {
        InitialCondition::Field(f) => f.get(idx, 0).norm_sqr(),
        InitialCondition::Gaussian(s) => s.variance(idx),
    };
    d * d * init + ou_noise_variance(p.lambda[idx], p.q[idx], t)
}
