//! Cylindrical Wiener increments on the truncated mode space, Itô integrals of
//! deterministic step processes and the exact per-mode Ornstein–Uhlenbeck
//! transition used by every solver.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::gaussian::GaussianSpec;
use crate::rng::{self, StreamRng};
use crate::spectral::{DiagonalOperator, FourierGrid, SpectralField};
use crate::stats;

/// Increments `W(t_{n+1}) - W(t_n)` of a cylindrical Wiener process, one
/// independent Brownian motion per mode. Step `n` of trajectory `id` draws
/// from `substream(seed, id, n)`.
#[derive(Debug, Clone)]
pub struct WienerIncrementStream {
    grid: FourierGrid,
    dt: f64,
    seed: u64,
    trajectory: u64,
    step: u64,
}

impl WienerIncrementStream {
    pub fn new(grid: FourierGrid, dt: f64, seed: u64, trajectory: u64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        Ok(Self {
            grid,
            dt,
            seed,
            trajectory,
            step: 0,
        })
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Generator for the next step; advances the counter.
    pub fn next_rng(&mut self) -> StreamRng {
        let r = rng::substream(self.seed, self.trajectory, self.step);
        self.step += 1;
        r
    }

    /// White-in-space increment with `E|ΔW_k|^2 = dt` for every mode.
    pub fn draw_increment(&mut self) -> SpectralField {
        self.draw_increment_over(self.dt).expect("dt validated at construction")
    }

    /// Increment over a window of length `h` (still one counter step).
    pub fn draw_increment_over(&mut self, h: f64) -> Result<SpectralField> {
        if !(h > 0.0) {
            return Err(invalid("h", "must be positive"));
        }
        let spec = GaussianSpec::white(self.grid, h)?;
        Ok(spec.sample(&mut self.next_rng()))
    }
}

/// Deterministic elementary integrand: `Φ(t) = Φ_n` on `(t_n, t_{n+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProcess {
    breakpoints: Vec<f64>,
    operators: Vec<DiagonalOperator>,
}

impl StepProcess {
    pub fn new(breakpoints: Vec<f64>, operators: Vec<DiagonalOperator>) -> Result<Self> {
        if breakpoints.len() < 2 || operators.len() + 1 != breakpoints.len() {
            return Err(invalid("operators", "need one operator per interval and at least one interval"));
        }
        if breakpoints[0] < 0.0 || breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::UnsortedTimes);
        }
        let grid = *operators[0].grid();
        if let Some(op) = operators.iter().find(|op| *op.grid() != grid) {
            return Err(Error::GridMismatch(format!("{grid:?} vs {:?}", op.grid())));
        }
        Ok(Self { breakpoints, operators })
    }

    pub fn grid(&self) -> &FourierGrid {
        self.operators[0].grid()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn operators(&self) -> &[DiagonalOperator] {
        &self.operators
    }

    /// `Σ_n tr(Φ_n Φ_n^*) (t_{n+1} - t_n)`, the second moment of the integral.
    pub fn isometry_target(&self) -> f64 {
        self.operators
            .iter()
            .zip(self.breakpoints.windows(2))
            .map(|(op, w)| (w[1] - w[0]) * op.symbol().iter().map(|m| m.norm_sqr()).sum::<f64>())
            .sum()
    }
}

/// `Σ_n Φ_n (W(t_{n+1}) - W(t_n))` with fresh increments drawn from `rng`.
pub fn ito_integral<R: rand::Rng + ?Sized>(phi: &StepProcess, rng: &mut R) -> SpectralField {
    let grid = *phi.grid();
    let mut out = SpectralField::zeros(grid, 1);
    for (op, w) in phi.operators.iter().zip(phi.breakpoints.windows(2)) {
        let dw = GaussianSpec::white(grid, w[1] - w[0]).expect("positive window").sample(rng);
        let coeffs = out.coeffs_mut();
        for (idx, m) in op.symbol().iter().enumerate() {
            coeffs[idx] += m * dw.get(idx, 0);
        }
    }
    out
}

/// Deterministic random elementary integrand: 1 to 5 intervals of lengths
/// in `[0.1, 0.5)` and Hermitian symbols with entries of modulus below 1.
pub fn random_step_process(grid: FourierGrid, seed: u64, case: u64) -> StepProcess {
    let mut r = rng::stream(seed, case);
    let intervals = r.random_range(1..=5usize);
    let mut breakpoints = vec![0.0];
    for _ in 0..intervals {
        let last = *breakpoints.last().expect("non-empty");
        breakpoints.push(last + r.random_range(0.1..0.5));
    }
    let operators = (0..intervals)
        .map(|_| {
            let mut symbol = vec![Complex64::new(0.0, 0.0); grid.len()];
            symbol[grid.zero_index()] = Complex64::new(r.random_range(-1.0..1.0), 0.0);
            for idx in grid.half_plane() {
                let m = Complex64::from_polar(r.random_range(0.0..1.0), r.random_range(0.0..std::f64::consts::TAU));
                symbol[idx] = m;
                symbol[grid.mirror(idx)] = m.conj();
            }
            DiagonalOperator::new(grid, symbol).expect("Hermitian by construction")
        })
        .collect();
    StepProcess::new(breakpoints, operators).expect("valid by construction")
}

/// `(mean, se)` of `‖∫ Φ dW‖^2` over `reps` independent integrals, repetition
/// `i` using `stream(seed, i)`.
pub fn ito_second_moment(phi: &StepProcess, reps: usize, seed: u64) -> (f64, f64) {
    let norms: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| ito_integral(phi, &mut rng::stream(seed, i as u64)).norm_sq())
        .collect();
    stats::mean_se(&norms)
}

/// `e^{-λ dt}`.
#[inline]
pub fn ou_decay(lambda: f64, dt: f64) -> f64 {
    (-lambda * dt).exp()
}

/// Variance of `∫_0^dt e^{-λ(dt-s)} q dW(s)`: `q^2 (1 - e^{-2λ dt}) / (2λ)`,
/// and `q^2 dt` at `λ = 0`.
#[inline]
pub fn ou_noise_variance(lambda: f64, q: f64, dt: f64) -> f64 {
    let x = 2.0 * lambda * dt;
    if x == 0.0 {
        q * q * dt
    } else {
        q * q * dt * (-(-x).exp_m1() / x)
    }
}

/// `Cov(∫_0^dt e^{-λ(dt-s)} q dW(s), W(dt))`: `q (1 - e^{-λ dt}) / λ`, and
/// `q dt` at `λ = 0`.
#[inline]
pub fn ou_noise_covariance(lambda: f64, q: f64, dt: f64) -> f64 {
    q * dt * phi1(-lambda * dt)
}

/// `φ_1(z) = (e^z - 1) / z`, `φ_1(0) = 1`.
#[inline]
pub fn phi1(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

fn check_ou(lambda: f64, q: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be positive"));
    }
    if !(lambda >= 0.0) || !(q >= 0.0) {
        return Err(invalid("lambda/q", "must be non-negative"));
    }
    Ok(())
}

/// Exact transition of `dx = -λ x dt + q dW` for a complex mode with
/// circular noise, `E|η|^2 = v(λ, q, dt)`.
pub fn ou_step<R: rand::Rng + ?Sized>(x: Complex64, lambda: f64, q: f64, dt: f64, rng: &mut R) -> Result<Complex64> {
    check_ou(lambda, q, dt)?;
    let s = (0.5 * ou_noise_variance(lambda, q, dt)).sqrt();
    Ok(x * ou_decay(lambda, dt) + Complex64::new(s * rng::normal(rng), s * rng::normal(rng)))
}

/// Exact transition of the real scalar OU process.
pub fn ou_step_real<R: rand::Rng + ?Sized>(x: f64, lambda: f64, q: f64, dt: f64, rng: &mut R) -> Result<f64> {
    check_ou(lambda, q, dt)?;
    Ok(x * ou_decay(lambda, dt) + ou_noise_variance(lambda, q, dt).sqrt() * rng::normal(rng))
}

/// Exact one-step propagator of `dx = -Λ x dt + Q dW` for diagonal `Λ, Q`.
#[derive(Debug, Clone)]
pub struct OuPropagator {
    dt: f64,
    decay: Vec<f64>,
    noise: GaussianSpec,
    /// `Cov(η_k, ΔW_k) / dt` per mode, for joint sampling with the increment.
    regression: Vec<f64>,
    residual_std: Vec<f64>,
}

impl OuPropagator {
    pub fn new(grid: FourierGrid, lambda: &[f64], q: &[f64], dt: f64) -> Result<Self> {
        if lambda.len() != grid.len() || q.len() != grid.len() {
            return Err(invalid("lambda/q", "length does not match the grid"));
        }
        let mut decay = Vec::with_capacity(grid.len());
        let mut std = Vec::with_capacity(grid.len());
        let mut regression = Vec::with_capacity(grid.len());
        let mut residual_std = Vec::with_capacity(grid.len());
        for (&l, &qk) in lambda.iter().zip(q) {
            check_ou(l, qk, dt)?;
            let v = ou_noise_variance(l, qk, dt);
            let c = ou_noise_covariance(l, qk, dt);
            decay.push(ou_decay(l, dt));
            std.push(v.sqrt());
            regression.push(c / dt);
            residual_std.push((v - c * c / dt).max(0.0).sqrt());
        }
        Ok(Self {
            dt,
            decay,
            noise: GaussianSpec::new(grid, std)?,
            regression,
            residual_std,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn decay(&self) -> &[f64] {
        &self.decay
    }

    pub fn noise(&self) -> &GaussianSpec {
        &self.noise
    }

    /// Exact stochastic-convolution increment `η` over one step.
    pub fn sample_noise<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> SpectralField {
        self.noise.sample(rng)
    }

    /// `x ← e^{-Λ dt} x + η`.
    pub fn step<R: rand::Rng + ?Sized>(&self, x: &mut SpectralField, rng: &mut R) {
        let eta = self.sample_noise(rng);
        self.apply(x, &eta);
    }

    /// `x ← e^{-Λ dt} x + η` for a given `η`.
    pub fn apply(&self, x: &mut SpectralField, eta: &SpectralField) {
        for ((c, d), e) in x.coeffs_mut().iter_mut().zip(&self.decay).zip(eta.coeffs()) {
            *c = *c * *d + e;
        }
    }

    /// Jointly draw `η` and the Wiener increment `ΔW` driving it over the
    /// step; returns `(η, ΔW)`.
    pub fn sample_joint<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> (SpectralField, SpectralField) {
        let grid = *self.noise.grid();
        let dw = GaussianSpec::white(grid, self.dt).expect("dt > 0").sample(rng);
        let resid = GaussianSpec::new(grid, self.residual_std.clone()).expect("symmetric").sample(rng);
        let mut eta = resid;
        for (idx, e) in eta.coeffs_mut().iter_mut().enumerate() {
            *e += dw.get(idx, 0) * self.regression[idx];
        }
        (eta, dw)
    }
}

/// Path `B(t_n) = Σ_{m<n} <l, ΔW_m>` for a unit-norm functional `l`; a
/// standard Brownian motion sampled every `dt`, starting at `B(0) = 0`.
pub fn brownian_from_white_noise(stream: &mut WienerIncrementStream, functional: &SpectralField, steps: usize) -> Result<Vec<f64>> {
    if functional.grid() != stream.grid() || functional.components() != 1 {
        return Err(invalid("functional", "must be a scalar field on the stream grid"));
    }
    let norm = functional.norm_sq().sqrt();
    if norm == 0.0 {
        return Err(invalid("functional", "must be non-zero"));
    }
    let mut path = Vec::with_capacity(steps + 1);
    let mut b = 0.0;
    path.push(b);
    for _ in 0..steps {
        let dw = stream.draw_increment();
        b += functional.inner(&dw)? / norm;
        path.push(b);
    }
    Ok(path)
}
