//! Exponential-Euler integration of `dx = -Λx dt + F(x) dt + Q dW` in mild
//! form, with polynomial reaction terms and the 2-D Navier–Stokes vorticity
//! nonlinearity, plus run-time monitors for the a priori bounds.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::spectral::{biot_savart, dealiased_product, divergence_residual, gradient, sobolev_norm, FourierGrid, SpectralField};
use crate::stochastic::{phi1, OuPropagator};

/// Nonlinear drift `F`.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    None,
    /// `f(u) = Σ_j c_j u^j`, degree at most 5.
    Reaction(Vec<f64>),
    /// `-(u·∇)w` with `u` the Biot–Savart velocity of `w`.
    NsVorticity,
}

pub const MAX_REACTION_DEGREE: usize = 5;

/// Fourier coefficients of `Σ_j c_j u^j` by Horner's rule with dealiased
/// products.
pub fn reaction_nonlinearity(u: &SpectralField, coeffs: &[f64]) -> Result<SpectralField> {
    if u.components() != 1 {
        return Err(Error::ComponentMismatch {
            expected: 1,
            found: u.components(),
        });
    }
    if coeffs.len() > MAX_REACTION_DEGREE + 1 {
        return Err(invalid(
            "coeffs",
            format!("degree {} exceeds {MAX_REACTION_DEGREE}", coeffs.len() - 1),
        ));
    }
    let grid = *u.grid();
    let zero = grid.zero_index();
    let mut acc = SpectralField::zeros(grid, 1);
    let Some((&top, rest)) = coeffs.split_last() else {
        return Ok(acc);
    };
    acc.set(zero, 0, top.into());
    for &c in rest.iter().rev() {
        acc = dealiased_product(&acc, u)?;
        let z = acc.get(zero, 0);
        acc.set(zero, 0, z + c);
    }
    Ok(acc)
}

/// `-(u·∇)w`, `u = K w`, evaluated on a 3/2-padded grid: four inverse
/// transforms, a pointwise sum of products, one forward transform.
pub fn ns_vorticity_nonlinearity(w: &SpectralField) -> Result<SpectralField> {
    let u = biot_savart(w)?;
    let g = gradient(w)?;
    let grid = *w.grid();
    let points = grid.dealias_points();
    let u1 = u.to_physical(0, points);
    let u2 = u.to_physical(1, points);
    let g1 = g.to_physical(0, points);
    let g2 = g.to_physical(1, points);
    let adv: Vec<f64> = (0..u1.len()).map(|i| -(u1[i] * g1[i] + u2[i] * g2[i])).collect();
    let mut out = SpectralField::from_physical(grid, points, &adv);
    out.set(grid.zero_index(), 0, 0.0.into());
    Ok(out)
}

/// Semilinear problem with generator symbol `-λ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemilinearProblem {
    grid: FourierGrid,
    lambda: Vec<f64>,
    q: Vec<f64>,
    nonlinearity: Nonlinearity,
    initial: SpectralField,
    dt: f64,
    t_end: f64,
}

impl SemilinearProblem {
    pub fn new(
        grid: FourierGrid,
        lambda: Vec<f64>,
        q: Vec<f64>,
        nonlinearity: Nonlinearity,
        initial: SpectralField,
        dt: f64,
        t_end: f64,
    ) -> Result<Self> {
        if lambda.len() != grid.len() || q.len() != grid.len() {
            return Err(invalid("lambda/q", "length does not match the grid"));
        }
        for i in 0..grid.len() {
            let m = grid.mirror(i);
            if !(lambda[i] >= 0.0) || !(q[i] >= 0.0) || lambda[i] != lambda[m] || q[i] != q[m] {
                return Err(invalid("lambda/q", format!("invalid or asymmetric at {:?}", grid.wavevector(i))));
            }
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(invalid("t_end", "must be non-negative"));
        }
        if initial.grid() != &grid || initial.components() != 1 {
            return Err(Error::GridMismatch("initial field".into()));
        }
        match &nonlinearity {
            Nonlinearity::Reaction(c) if c.len() > MAX_REACTION_DEGREE + 1 => {
                return Err(invalid("coeffs", format!("degree {} exceeds {MAX_REACTION_DEGREE}", c.len() - 1)));
            }
            Nonlinearity::NsVorticity => {
                if grid.dim() != 2 {
                    return Err(Error::UnsupportedDimension(grid.dim()));
                }
                let mean = initial.mean();
                if mean.abs() > 1e-14 {
                    return Err(Error::NonZeroMean(mean));
                }
                if q[grid.zero_index()] != 0.0 {
                    return Err(invalid("q", "the zero mode must not be forced for vorticity"));
                }
            }
            _ => {}
        }
        Ok(Self {
            grid,
            lambda,
            q,
            nonlinearity,
            initial,
            dt,
            t_end,
        })
    }

    /// `du = (ν Δ u + Σ c_j u^j) dt + Q dW`.
    pub fn reaction(
        grid: FourierGrid,
        nu: f64,
        coeffs: Vec<f64>,
        q: impl Fn([i64; 2]) -> f64,
        initial: SpectralField,
        dt: f64,
        t_end: f64,
    ) -> Result<Self> {
        let lambda = (0..grid.len()).map(|i| nu * grid.norm_sq(i)).collect();
        let q = (0..grid.len()).map(|i| q(grid.wavevector(i))).collect();
        Self::new(grid, lambda, q, Nonlinearity::Reaction(coeffs), initial, dt, t_end)
    }

    /// `dw = (ν Δ w - (u·∇)w) dt + Q dW` with `u = K w`.
    pub fn navier_stokes(
        grid: FourierGrid,
        nu: f64,
        q: impl Fn([i64; 2]) -> f64,
        initial: SpectralField,
        dt: f64,
        t_end: f64,
    ) -> Result<Self> {
        let lambda = (0..grid.len()).map(|i| nu * grid.norm_sq(i)).collect();
        let q = (0..grid.len())
            .map(|i| if i == grid.zero_index() { 0.0 } else { q(grid.wavevector(i)) })
            .collect();
        Self::new(grid, lambda, q, Nonlinearity::NsVorticity, initial, dt, t_end)
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

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn initial(&self) -> &SpectralField {
        &self.initial
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Self::new(
            self.grid,
            self.lambda.clone(),
            self.q.clone(),
            self.nonlinearity.clone(),
            self.initial.clone(),
            dt,
            self.t_end,
        )
    }

    pub fn drift(&self, x: &SpectralField) -> Result<SpectralField> {
        match &self.nonlinearity {
            Nonlinearity::None => Ok(SpectralField::zeros(self.grid, 1)),
            Nonlinearity::Reaction(c) => reaction_nonlinearity(x, c),
            Nonlinearity::NsVorticity => ns_vorticity_nonlinearity(x),
        }
    }
}

/// One-step map `x ← e^{-λdt} x + φ_1(-λdt) dt F(x) + η`.
#[derive(Debug, Clone)]
pub struct ExponentialEuler {
    problem: SemilinearProblem,
    propagator: OuPropagator,
    weight: Vec<f64>,
}

impl ExponentialEuler {
    pub fn new(problem: &SemilinearProblem) -> Result<Self> {
        let dt = problem.dt;
        Ok(Self {
            propagator: OuPropagator::new(problem.grid, &problem.lambda, &problem.q, dt)?,
            weight: problem.lambda.iter().map(|&l| dt * phi1(-l * dt)).collect(),
            problem: problem.clone(),
        })
    }

    pub fn propagator(&self) -> &OuPropagator {
        &self.propagator
    }

    /// Advance with a given noise increment; returns `F(x)` at the old state.
    pub fn step_with_noise(&self, x: &mut SpectralField, eta: &SpectralField) -> Result<SpectralField> {
        let f = self.problem.drift(x)?;
        self.advance(x, &f, eta);
        Ok(f)
    }

    /// Advance given the drift `f = F(x)` already evaluated at `x`.
    pub fn advance(&self, x: &mut SpectralField, f: &SpectralField, eta: &SpectralField) {
        self.propagator.apply(x, eta);
        for ((c, w), fk) in x.coeffs_mut().iter_mut().zip(&self.weight).zip(f.coeffs()) {
            *c += fk * *w;
        }
        if self.problem.nonlinearity == Nonlinearity::NsVorticity {
            x.set(self.problem.grid.zero_index(), 0, 0.0.into());
        }
    }

    /// Advance with fresh exact noise; returns `(F(x_old), η)`.
    pub fn step<R: rand::Rng + ?Sized>(&self, x: &mut SpectralField, rng: &mut R) -> Result<(SpectralField, SpectralField)> {
        let eta = self.propagator.sample_noise(rng);
        let f = self.step_with_noise(x, &eta)?;
        Ok((f, eta))
    }
}

/// Convex functional `V` used for `Ṽ(v) = sup_x V(v(x))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvexV {
    Square,
    CoshMinusOne,
}

impl ConvexV {
    pub fn value(self, x: f64) -> f64 {
        match self {
            ConvexV::Square => x * x,
            ConvexV::CoshMinusOne => x.cosh() - 1.0,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ConvexV::Square => 2.0 * x,
            ConvexV::CoshMinusOne => x.sinh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorConfig {
    /// Sup-norm ceiling that counts as blow-up.
    pub ceiling: f64,
    /// Record every `record_every` steps (and the final state).
    pub record_every: usize,
    /// Integrate `W_L` alongside and record `v = x - W_L`.
    pub track_linear: bool,
    pub convex: Option<ConvexV>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            ceiling: 1e8,
            record_every: 1,
            track_linear: false,
            convex: None,
        }
    }
}

/// Monitored quantities at one time; `NaN` marks a quantity not tracked for
/// the problem at hand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorRecord {
    pub t: f64,
    pub sup_norm: f64,
    pub l2_sq: f64,
    pub mean: f64,
    /// NS: `‖K w‖^2`.
    pub energy: f64,
    /// NS: `‖w‖^2`.
    pub enstrophy: f64,
    /// NS: `‖∇w‖^2`.
    pub palinstrophy: f64,
    /// NS: `|<w, F(w)>| / (‖w‖ ‖F(w)‖)`.
    pub orthogonality: f64,
    /// NS: `max_k |<k, u_k>| / ‖u‖`.
    pub divergence: f64,
    /// `‖F(x)‖^2`.
    pub drift_sq: f64,
    pub v_l2_sq: f64,
    pub v_grad_sq: f64,
    pub v_tilde: f64,
    pub v_sup: f64,
    pub linear_h12: f64,
    pub linear_sup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMonitor {
    pub records: Vec<MonitorRecord>,
    /// Stopping time when the ceiling was exceeded or the state became
    /// non-finite.
    pub blow_up: Option<f64>,
}

impl RunMonitor {
    pub fn max_sup_norm(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.sup_norm))
    }

    pub fn to_csv(&self) -> String {
        use crate::io::{fmt_f64, Csv};
        let mut csv = Csv::new(&[
            "t",
            "sup_norm",
            "l2_sq",
            "mean",
            "energy",
            "enstrophy",
            "orthogonality",
            "divergence",
            "v_l2_sq",
            "v_tilde",
            "blow_up",
        ]);
        for r in &self.records {
            csv.row(&[
                fmt_f64(r.t),
                fmt_f64(r.sup_norm),
                fmt_f64(r.l2_sq),
                fmt_f64(r.mean),
                fmt_f64(r.energy),
                fmt_f64(r.enstrophy),
                fmt_f64(r.orthogonality),
                fmt_f64(r.divergence),
                fmt_f64(r.v_l2_sq),
                fmt_f64(r.v_tilde),
                "false".to_string(),
            ]);
        }
        if let Some(t) = self.blow_up {
            let nan = fmt_f64(f64::NAN);
            csv.row(&[
                fmt_f64(t),
                nan.clone(),
                nan.clone(),
                nan.clone(),
                nan.clone(),
                nan.clone(),
                nan.clone(),
                nan.clone(),
                nan.clone(),
                nan,
                "true".to_string(),
            ]);
        }
        csv.into_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Completed,
    BlowUp { time: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub final_state: SpectralField,
    pub monitor: RunMonitor,
    pub outcome: Outcome,
}

fn physical_points(grid: &FourierGrid) -> usize {
    grid.modes_per_dim()
}

fn record(
    p: &SemilinearProblem,
    cfg: &MonitorConfig,
    t: f64,
    x: &SpectralField,
    f: &SpectralField,
    linear: Option<&SpectralField>,
) -> Result<MonitorRecord> {
    let grid = *x.grid();
    let points = physical_points(&grid);
    let phys = x.to_physical(0, points);
    let nan = f64::NAN;
    let mut r = MonitorRecord {
        t,
        sup_norm: phys.iter().fold(0.0, |m, v| m.max(v.abs())),
        l2_sq: x.norm_sq(),
        mean: x.mean(),
        energy: nan,
        enstrophy: nan,
        palinstrophy: nan,
        orthogonality: nan,
        divergence: nan,
        drift_sq: f.norm_sq(),
        v_l2_sq: nan,
        v_grad_sq: nan,
        v_tilde: nan,
        v_sup: nan,
        linear_h12: nan,
        linear_sup: nan,
    };
    if p.nonlinearity == Nonlinearity::NsVorticity {
        let u = biot_savart(x)?;
        let un = u.norm_sq();
        r.energy = un;
        r.enstrophy = r.l2_sq;
        r.palinstrophy = gradient(x)?.norm_sq();
        let denom = (r.l2_sq * r.drift_sq).sqrt();
        r.orthogonality = if denom > 0.0 { x.inner(f)?.abs() / denom } else { 0.0 };
        r.divergence = if un > 0.0 { divergence_residual(&u)? / un.sqrt() } else { 0.0 };
    }
    let v_phys = if let Some(wl) = linear {
        let mut v = x.clone();
        v.axpy(-1.0, wl)?;
        r.v_l2_sq = v.norm_sq();
        r.v_grad_sq = (0..grid.len()).map(|i| grid.norm_sq(i) * v.get(i, 0).norm_sqr()).sum();
        r.linear_h12 = sobolev_norm(wl, 0.5);
        r.linear_sup = wl.sup_norm(points);
        v.to_physical(0, points)
    } else {
        phys
    };
    if linear.is_some() {
        r.v_sup = v_phys.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    if let Some(vf) = cfg.convex {
        r.v_tilde = v_phys.iter().fold(f64::NEG_INFINITY, |m, v| m.max(vf.value(*v)));
    }
    Ok(r)
}

/// Integrate to `t_end` or until the sup-norm exceeds the ceiling.
pub fn run<R: rand::Rng + ?Sized>(p: &SemilinearProblem, cfg: &MonitorConfig, rng: &mut R) -> Result<RunResult> {
    if cfg.record_every == 0 {
        return Err(invalid("record_every", "must be positive"));
    }
    let stepper = ExponentialEuler::new(p)?;
    let mut x = p.initial.clone();
    let mut linear = cfg.track_linear.then(|| SpectralField::zeros(p.grid, 1));
    let mut records = Vec::new();
    let steps = p.steps();
    let points = physical_points(&p.grid);
    let mut blow_up = None;
    for n in 0..=steps {
        let t = (n as f64 * p.dt).min(p.t_end);
        let f = p.drift(&x)?;
        if n % cfg.record_every == 0 || n == steps {
            records.push(record(p, cfg, t, &x, &f, linear.as_ref())?);
        }
        if n == steps {
            break;
        }
        let eta = stepper.propagator.sample_noise(rng);
        stepper.advance(&mut x, &f, &eta);
        if let Some(wl) = linear.as_mut() {
            stepper.propagator.apply(wl, &eta);
        }
        let sup = if x.is_finite() { x.sup_norm(points) } else { f64::INFINITY };
        if !(sup <= cfg.ceiling) {
            blow_up = Some(((n + 1) as f64 * p.dt).min(p.t_end));
            break;
        }
    }
    let outcome = match blow_up {
        Some(time) => Outcome::BlowUp { time },
        None => Outcome::Completed,
    };
    Ok(RunResult {
        final_state: x,
        monitor: RunMonitor { records, blow_up },
        outcome,
    })
}

/// Growth check for `Ṽ(v)` against the Gronwall rate implied by the
/// reaction term.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    /// `(t, Ṽ(v(t)))`.
    pub series: Vec<(f64, f64)>,
    /// `sup ⟨V'(x), f(x+y)⟩ / V(x)` over `V(x) ≥ min_t Ṽ`, `|x| ≤ sup‖v‖_∞`,
    /// `|y| ≤ sup‖W_L‖_∞`.
    pub rate: f64,
    /// Largest `log Ṽ(t+1) - log Ṽ(t)` over unit windows.
    pub worst_growth: f64,
    pub flagged: bool,
}

/// Requires a run recorded with `track_linear` and a convex `V`; `coeffs`
/// describe the reaction term `f`.
pub fn convexity_monitor(monitor: &RunMonitor, v: ConvexV, coeffs: &[f64]) -> Result<ConvexityReport> {
    let series: Vec<(f64, f64)> = monitor.records.iter().map(|r| (r.t, r.v_tilde)).collect();
    if series.len() < 2 || series.iter().any(|s| s.1.is_nan()) {
        return Err(Error::InsufficientData("run lacks Ṽ records".into()));
    }
    let radius = monitor.records.iter().fold(0.0_f64, |m, r| m.max(r.linear_sup.max(0.0)));
    let x_max = monitor.records.iter().fold(0.0_f64, |m, r| m.max(r.v_sup.max(0.0)));
    let floor = series.iter().fold(f64::INFINITY, |m, s| m.min(s.1));
    let f = |u: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c);
    let mut rate = f64::NEG_INFINITY;
    let n = 400;
    for i in 0..=n {
        let x = -x_max + 2.0 * x_max * i as f64 / n as f64;
        let vx = v.value(x);
        if vx <= 0.0 || vx < floor {
            continue;
        }
        for j in 0..=n / 4 {
            let y = -radius + 2.0 * radius * j as f64 / (n / 4) as f64;
            rate = rate.max(v.derivative(x) * f(x + y) / vx);
        }
    }
    if !rate.is_finite() {
        rate = 0.0;
    }
    let mut worst_growth = f64::NEG_INFINITY;
    let mut flagged = false;
    let mut j = 0;
    for i in 0..series.len() {
        while j < series.len() && series[j].0 < series[i].0 + 1.0 - 1e-12 {
            j += 1;
        }
        if j == series.len() {
            break;
        }
        let (a, b) = (series[i].1, series[j].1);
        if a <= 0.0 || b <= 0.0 {
            continue;
        }
        let g = (b.ln() - a.ln()) / (series[j].0 - series[i].0);
        worst_growth = worst_growth.max(g);
        if g > rate + 0.1 * rate.abs() + 1e-12 {
            flagged = true;
        }
    }
    Ok(ConvexityReport {
        series,
        rate,
        worst_growth,
        flagged,
    })
}

/// Step-by-step check of the enstrophy-level a priori bound for `v = w - W_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    /// `(t, ‖v‖^2, ‖∇v‖^2, bound rate)` per record.
    pub series: Vec<(f64, f64, f64, f64)>,
    pub checked: usize,
    pub violations: usize,
    /// Largest ratio of observed growth rate to the allowed one.
    pub worst_ratio: f64,
}

/// Checks `(‖v_{n+1}‖^2 - ‖v_n‖^2)/dt ≤ 1.1·max(B_n, B_{n+1}) + dt‖F(w_n)‖^2`
/// with `B = (8/ν)‖W_L‖^2_{H^{1/2}}‖v‖^2 + 2‖W_L‖^3_{H^{1/2}}`; requires a
/// run recorded every step with `track_linear`.
pub fn ns_energy_monitor(monitor: &RunMonitor, nu: f64) -> Result<EnergyReport> {
    let recs = &monitor.records;
    if recs.len() < 2 || recs.iter().any(|r| r.v_l2_sq.is_nan()) {
        return Err(Error::InsufficientData("run lacks v records".into()));
    }
    let bound = |r: &MonitorRecord| 8.0 / nu * r.linear_h12.powi(2) * r.v_l2_sq + 2.0 * r.linear_h12.powi(3);
    let series = recs.iter().map(|r| (r.t, r.v_l2_sq, r.v_grad_sq, bound(r))).collect();
    let mut violations = 0;
    let mut worst_ratio = f64::NEG_INFINITY;
    for w in recs.windows(2) {
        let dt = w[1].t - w[0].t;
        let growth = (w[1].v_l2_sq - w[0].v_l2_sq) / dt;
        let allowed = 1.1 * bound(&w[0]).max(bound(&w[1])) + dt * w[0].drift_sq;
        if growth > allowed {
            violations += 1;
        }
        if allowed > 0.0 {
            worst_ratio = worst_ratio.max(growth / allowed);
        }
    }
    Ok(EnergyReport {
        series,
        checked: recs.len() - 1,
        violations,
        worst_ratio,
    })
}

/// Time average of `(‖w_{n+1}‖^2 - ‖w_n‖^2)/dt + 2ν‖∇w_n‖^2 - Σ_k q_k^2`
/// with a batch-means standard error (ten batches).
pub fn enstrophy_balance(monitor: &RunMonitor, nu: f64, noise_trace: f64, skip: usize) -> Result<(f64, f64)> {
    let recs = &monitor.records[skip.min(monitor.records.len())..];
    if recs.len() < 21 {
        return Err(Error::InsufficientData("too few records for batch means".into()));
    }
    let terms: Vec<f64> = recs
        .windows(2)
        .map(|w| (w[1].enstrophy - w[0].enstrophy) / (w[1].t - w[0].t) + 2.0 * nu * w[0].palinstrophy - noise_trace)
        .collect();
    let size = terms.len() / 10;
    let batches: Vec<f64> = terms
        .chunks_exact(size)
        .take(10)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    Ok(crate::stats::mean_se(&batches))
}

/// Strong errors `E‖x_dt(T) - x_ref(T)‖^2)^{1/2}` for step sizes
/// `dt_0 / 2^m`, `m = 0..levels`, against a reference with `dt_0 / 2^{levels+2}`.
/// All resolutions share one noise path: coarse stochastic-convolution
/// increments are exact aggregates of the fine ones.
pub fn strong_errors(p: &SemilinearProblem, levels: usize, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let finest_level = levels + 2;
    let factor = 1usize << finest_level;
    let dt_f = p.dt / factor as f64;
    let steps_f = p.steps() * factor;
    let fine = ExponentialEuler::new(&p.with_dt(dt_f)?)?;
    let steppers: Vec<ExponentialEuler> = (0..=finest_level)
        .map(|m| ExponentialEuler::new(&p.with_dt(p.dt / (1usize << m) as f64)?))
        .collect::<Result<_>>()?;
    let per_sample: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| -> Result<Vec<f64>> {
            let mut r = rng::stream(seed, s as u64);
            let mut noise: Vec<SpectralField> = (0..steps_f).map(|_| fine.propagator.sample_noise(&mut r)).collect();
            let mut finals = vec![SpectralField::zeros(p.grid, 1); finest_level + 1];
            for m in (0..=finest_level).rev() {
                let st = &steppers[m];
                let mut x = p.initial.clone();
                for eta in &noise {
                    st.step_with_noise(&mut x, eta)?;
                }
                finals[m] = x;
                if m > 0 {
                    // aggregate pairs: η' = e^{-λh} η_1 + η_2
                    let decay = st.propagator.decay();
                    noise = noise
                        .chunks_exact(2)
                        .map(|c| {
                            let mut e = c[0].clone();
                            for (z, d) in e.coeffs_mut().iter_mut().zip(decay) {
                                *z *= d;
                            }
                            e.axpy(1.0, &c[1]).expect("same grid");
                            e
                        })
                        .collect();
                }
            }
            Ok((0..=levels)
                .map(|m| {
                    let mut d = finals[m].clone();
                    d.axpy(-1.0, &finals[finest_level]).expect("same grid");
                    d.norm_sq()
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..=levels)
        .map(|m| (per_sample.iter().map(|v| v[m]).sum::<f64>() / samples as f64).sqrt())
        .collect())
}
